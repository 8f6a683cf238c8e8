"""Algebra on the space of bivectors.

Curvature-type objects at a point are represented as symmetric matrices on
Lambda^2 of an orthonormal frame, in the graded-lexicographic basis of index
pairs (i, j), i < j ("lex-pairs").  The inner product makes those pair
vectors orthonormal.

The main players:

* ``bianchi_project``: projection of S^2(Lambda^2) onto the 4-forms; its
  kernel is the algebraic curvature operators, and every Riemann tensor of
  a metric lies in that kernel (first Bianchi identity).
* ``ricci_contract``: trace map to symmetric 2-tensors; algebraic Weyl
  operators are ker(bianchi) intersect ker(ricci).
* ``pm_split``: the dimension-4 decomposition into self-dual and
  anti-self-dual blocks induced by the Hodge involution.
* ``phi_map``: assembles a Weyl operator with an invariant flag
  v ^ v-perp from a rotation, eigenvalues summing to zero, and a curvature
  operator on the orthogonal complement with prescribed Ricci contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConstraintViolation, DimensionError, NotOrthogonal, SymmetryViolation
from .pipeline import kulkarni_nomizu


@lru_cache(maxsize=None)
def lex_pairs(n):
    """Ordered index pairs (i, j), i < j, lexicographic."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def pair_index(n):
    return {p: a for a, p in enumerate(lex_pairs(n))}


def bivector_dim(n):
    return n * (n - 1) // 2


@dataclass
class BivectorBasis:
    """Bookkeeping for Lambda^2 of an n-dimensional orthonormal frame."""

    dim: int

    @property
    def pairs(self):
        return lex_pairs(self.dim)

    @property
    def m(self):
        return bivector_dim(self.dim)


@dataclass
class CurvatureOperator:
    """Symmetric matrix on bivectors in the lex-pairs basis."""

    dim: int
    mat: np.ndarray

    def __post_init__(self):
        m = bivector_dim(self.dim)
        self.mat = np.asarray(self.mat, dtype=float)
        if self.mat.shape != (m, m):
            raise DimensionError(
                f"operator matrix must be {m}x{m} for dim {self.dim}, got {self.mat.shape}"
            )
        if np.abs(self.mat - self.mat.T).max() > 1e-10 * max(1.0, np.abs(self.mat).max()):
            raise SymmetryViolation("operator matrix is not symmetric")
        self.mat = 0.5 * (self.mat + self.mat.T)

    def norm(self):
        return float(np.linalg.norm(self.mat))

    def to_json_dict(self):
        return {"dim": self.dim, "basis": "lex-pairs", "mat": self.mat}


def _check_curvature_symmetries(r4, tol):
    scale = max(np.abs(r4).max(), 1.0)
    if np.abs(r4 + r4.transpose(1, 0, 2, 3)).max() > tol * scale:
        raise SymmetryViolation("tensor not antisymmetric in its first index pair")
    if np.abs(r4 + r4.transpose(0, 1, 3, 2)).max() > tol * scale:
        raise SymmetryViolation("tensor not antisymmetric in its second index pair")
    if np.abs(r4 - r4.transpose(2, 3, 0, 1)).max() > tol * scale:
        raise SymmetryViolation("tensor not symmetric under pair exchange")


def orthonormal_frame(g):
    """Columns form a g-orthonormal frame (Gram-Schmidt via Cholesky)."""
    g = np.asarray(g, dtype=float)
    L = np.linalg.cholesky(g)
    return np.linalg.inv(L).T


def operator_from_0_4(r4, g=None, tol=1e-8) -> CurvatureOperator:
    """Curvature operator of a (0,4) tensor with curvature symmetries.

    The frame is orthonormalized against ``g`` first (identity when g is
    omitted), so the operator acts on bivectors of an orthonormal basis:
    mat[(ij),(kl)] = R(e_i, e_j, e_k, e_l).
    """
    r4 = np.asarray(r4, dtype=float)
    n = r4.shape[0]
    if r4.shape != (n, n, n, n):
        raise DimensionError("expected an (n,n,n,n) array")
    _check_curvature_symmetries(r4, tol)
    if g is not None:
        e = orthonormal_frame(g)
        r4 = np.einsum("ijkl,ia,jb,kc,ld->abcd", r4, e, e, e, e)
    pairs = lex_pairs(n)
    m = len(pairs)
    mat = np.empty((m, m))
    for a, (i, j) in enumerate(pairs):
        for c, (k, l) in enumerate(pairs):
            mat[a, c] = r4[i, j, k, l]
    return CurvatureOperator(dim=n, mat=mat)


def operator_to_0_4(op: CurvatureOperator) -> np.ndarray:
    """(0,4) components in the orthonormal frame, extended by symmetry."""
    n = op.dim
    r4 = np.zeros((n, n, n, n))
    for a, (i, j) in enumerate(lex_pairs(n)):
        for c, (k, l) in enumerate(lex_pairs(n)):
            v = op.mat[a, c]
            r4[i, j, k, l] = v
            r4[j, i, k, l] = -v
            r4[i, j, l, k] = -v
            r4[j, i, l, k] = v
    return r4


def hodge_star_matrix(g=None, orientation=1, dim=None):
    """Hodge star on bivectors.

    dim 4: the involution on Lambda^2 in an oriented orthonormal frame
    (matrix in the lex-pairs basis; its square is the identity).
    dim 3: the map Lambda^2 -> Lambda^1 in coordinates,
    star(dx^i ^ dx^j) = sum_k g_{lk} eps(i,j,l)/sqrt(det g) dx^k,
    returned as a 3 x 3 matrix with rows indexed by lex pairs.
    """
    if g is not None:
        g = np.asarray(g, dtype=float)
        if dim is None:
            dim = g.shape[0]
    if dim not in (3, 4):
        raise DimensionError("Hodge star implemented for dims 3 and 4 only")
    if dim == 4:
        pairs = lex_pairs(4)
        m = len(pairs)
        star = np.zeros((m, m))
        for a, (i, j) in enumerate(pairs):
            rest = [x for x in range(4) if x not in (i, j)]
            k, l = rest
            sign = _perm_sign_4(i, j, k, l)
            star[pair_index(4)[(k, l)], a] = sign * orientation
        return star
    # dim 3 coordinate formula
    if g is None:
        g = np.eye(3)
    from .pipeline import EPS3

    sqrtdet = np.sqrt(np.linalg.det(g))
    pairs = lex_pairs(3)
    star = np.zeros((3, 3))
    for a, (i, j) in enumerate(pairs):
        for k in range(3):
            star[a, k] = orientation * sum(
                g[l, k] * EPS3[i, j, l] for l in range(3)
            ) / sqrtdet
    return star


def _perm_sign_4(i, j, k, l):
    perm = (i, j, k, l)
    sign = 1
    p = list(perm)
    for a in range(4):
        for b in range(a + 1, 4):
            if p[a] > p[b]:
                sign = -sign
    return sign


def pm_basis_matrix():
    """Columns: normalized self-dual basis (phi_1..3) then anti-self-dual
    (psi_1..3), in lex-pair coordinates of dim 4.

    phi_1 = e12+e34, phi_2 = e13-e24, phi_3 = e14+e23;
    psi_1 = e12-e34, psi_2 = e13+e24, psi_3 = e14-e23.
    """
    s = 1.0 / np.sqrt(2.0)
    u = np.zeros((6, 6))
    # lex pairs of 4: (01),(02),(03),(12),(13),(23)
    u[:, 0] = [s, 0, 0, 0, 0, s]
    u[:, 1] = [0, s, 0, 0, -s, 0]
    u[:, 2] = [0, 0, s, s, 0, 0]
    u[:, 3] = [s, 0, 0, 0, 0, -s]
    u[:, 4] = [0, s, 0, 0, s, 0]
    u[:, 5] = [0, 0, s, -s, 0, 0]
    return u


@dataclass
class PMSplit:
    """Self-dual / anti-self-dual decomposition of a dim-4 operator."""

    wplus: np.ndarray
    wminus: np.ndarray
    z: np.ndarray
    scalar_part: float


def pm_split(op: CurvatureOperator) -> PMSplit:
    if op.dim != 4:
        raise DimensionError("plus/minus splitting needs dim 4")
    u = pm_basis_matrix()
    b = u.T @ op.mat @ u
    scalar_part = float(np.trace(b)) / 6.0
    return PMSplit(
        wplus=b[:3, :3] - scalar_part * np.eye(3),
        wminus=b[3:, 3:] - scalar_part * np.eye(3),
        z=b[:3, 3:],
        scalar_part=scalar_part,
    )


def pm_reassemble(split: PMSplit) -> CurvatureOperator:
    u = pm_basis_matrix()
    b = np.zeros((6, 6))
    b[:3, :3] = split.wplus + split.scalar_part * np.eye(3)
    b[3:, 3:] = split.wminus + split.scalar_part * np.eye(3)
    b[:3, 3:] = split.z
    b[3:, :3] = split.z.T
    return CurvatureOperator(dim=4, mat=u @ b @ u.T)


def bianchi_project(op: CurvatureOperator) -> CurvatureOperator:
    """Projection onto the 4-forms: cyclic average over the first three
    slots.  Its kernel is the algebraic curvature operators; it fixes
    4-forms and annihilates every Riemann tensor."""
    r4 = operator_to_0_4(op)
    b4 = (r4 + r4.transpose(1, 2, 0, 3) + r4.transpose(2, 0, 1, 3)) / 3.0
    n = op.dim
    pairs = lex_pairs(n)
    m = len(pairs)
    mat = np.empty((m, m))
    for a, (i, j) in enumerate(pairs):
        for c, (k, l) in enumerate(pairs):
            mat[a, c] = b4[i, j, k, l]
    mat = 0.5 * (mat + mat.T)
    return CurvatureOperator(dim=n, mat=mat)


def ricci_contract(op: CurvatureOperator) -> np.ndarray:
    """r(R)[x, y] = trace of R(x, ., y, .) in the orthonormal frame."""
    r4 = operator_to_0_4(op)
    return np.einsum("xaya->xy", r4)


def sym_matrix_basis(m):
    """Frobenius-orthonormal basis of symmetric m x m matrices."""
    out = []
    for i in range(m):
        e = np.zeros((m, m))
        e[i, i] = 1.0
        out.append(e)
    s = 1.0 / np.sqrt(2.0)
    for i in range(m):
        for j in range(i + 1, m):
            e = np.zeros((m, m))
            e[i, j] = e[j, i] = s
            out.append(e)
    return out


def sym_vec(mat):
    m = mat.shape[0]
    out = []
    for i in range(m):
        out.append(mat[i, i])
    r2 = np.sqrt(2.0)
    for i in range(m):
        for j in range(i + 1, m):
            out.append(mat[i, j] * r2)
    return np.array(out)


def sym_unvec(v, m):
    out = np.zeros((m, m))
    k = 0
    for i in range(m):
        out[i, i] = v[k]
        k += 1
    s = 1.0 / np.sqrt(2.0)
    for i in range(m):
        for j in range(i + 1, m):
            out[i, j] = out[j, i] = v[k] * s
            k += 1
    return out


def expected_weyl_dim(n):
    """dim ker(b) - dim S^2(V) = (n^4 - n^2)/12 - n(n+1)/2 (0 when n = 3)."""
    if n == 3:
        return 0
    return (n**4 - n**2) // 12 - n * (n + 1) // 2


@lru_cache(maxsize=None)
def _weyl_basis_cached(n):
    if n == 3:
        return ()
    m = bivector_dim(n)
    basis = sym_matrix_basis(m)
    nvec = len(basis)
    rows_b = []
    rows_r = []
    for e in basis:
        opi = CurvatureOperator(dim=n, mat=e)
        rows_b.append(sym_vec(bianchi_project(opi).mat))
        rows_r.append(sym_vec(ricci_contract(opi)))
    bmat = np.array(rows_b).T  # maps vec -> vec of b-image
    rmat = np.array(rows_r).T  # maps vec -> vec(sym n x n)
    stacked = np.vstack([bmat, rmat])
    u, s, vt = np.linalg.svd(stacked)
    expected = expected_weyl_dim(n)
    null_dim = int(np.sum(s <= 1e-10 * s[0])) + (nvec - len(s))
    if null_dim != expected:
        raise ConstraintViolation(
            f"numeric Weyl-space dimension {null_dim} != expected {expected} for n={n}"
        )
    if expected > 0:
        # singular values must split cleanly between range and kernel
        smallest_kept = s[nvec - expected - 1]
        largest_dropped = s[nvec - expected] if nvec - expected < len(s) else 0.0
        if largest_dropped > 0 and smallest_kept / largest_dropped < 1e6:
            raise ConstraintViolation(
                f"singular value gap too small for a reliable Weyl basis (n={n})"
            )
    vecs = vt[nvec - expected:]
    return tuple(CurvatureOperator(dim=n, mat=sym_unvec(v, m)) for v in vecs)


def weyl_space_basis(n):
    """Frobenius-orthonormal basis of ker(bianchi) intersect ker(ricci).

    Empty for n = 3 (the space is {0}); DimensionError outside 3..6.
    """
    if not 3 <= n <= 6:
        raise DimensionError(f"Weyl basis supported for 3 <= n <= 6, got {n}")
    return list(_weyl_basis_cached(n))


def random_weyl_operator(n, rng) -> CurvatureOperator:
    """Uniform sample from the unit (Frobenius) sphere of the Weyl space."""
    basis = weyl_space_basis(n)
    if not basis:
        raise DimensionError("Weyl space is trivial for n = 3")
    c = rng.standard_normal(len(basis))
    c /= np.linalg.norm(c)
    mat = sum(ci * b.mat for ci, b in zip(c, basis))
    return CurvatureOperator(dim=n, mat=mat)


def induced_rotation(rho, n=None):
    """B(rho) on bivectors: B(rho)(v ^ w) = rho(v) ^ rho(w)."""
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[0] if n is None else n
    pairs = lex_pairs(n)
    m = len(pairs)
    b = np.empty((m, m))
    for c, (k, l) in enumerate(pairs):
        for a, (i, j) in enumerate(pairs):
            b[a, c] = rho[i, k] * rho[j, l] - rho[i, l] * rho[j, k]
    return b


def rotate_operator(op: CurvatureOperator, rho) -> CurvatureOperator:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (op.dim, op.dim):
        raise DimensionError("rotation has the wrong shape")
    if np.abs(rho.T @ rho - np.eye(op.dim)).max() > 1e-10:
        raise NotOrthogonal("rotation matrix is not orthogonal")
    b = induced_rotation(rho, op.dim)
    return CurvatureOperator(dim=op.dim, mat=b @ op.mat @ b.T)


def discriminant_check(op: CurvatureOperator) -> float:
    """Discriminant of the characteristic polynomial of the operator:
    product of squared eigenvalue differences; zero iff some eigenvalue
    repeats."""
    w = np.linalg.eigvalsh(op.mat)
    out = 1.0
    for i in range(len(w)):
        for j in range(i + 1, len(w)):
            out *= (w[i] - w[j]) ** 2
    return float(out)


# -- eigenflag parametrization ------------------------------------------------


@dataclass
class EigenflagParams:
    """Data for one point of the flag-invariant Weyl family.

    ``rotation`` is n x n orthogonal; ``lambdas`` are the n-1 eigenvalues on
    the pairs (e1, e_k) and must sum to zero; ``w2`` is a curvature operator
    on Lambda^2 of the orthogonal complement of e1 (lex pairs of indices
    2..n), constrained by r(w2) = -sum_k lambda_k e_k (x) e_k.
    """

    rotation: np.ndarray
    lambdas: np.ndarray
    w2: np.ndarray

    @property
    def dim(self):
        return self.rotation.shape[0]


def _embed_w2(w2, n):
    """Place an operator on Lambda^2(e1-perp) into the full lex basis."""
    m = bivector_dim(n)
    sub_pairs = [(i, j) for i in range(1, n) for j in range(i + 1, n)]
    idx = [pair_index(n)[p] for p in sub_pairs]
    out = np.zeros((m, m))
    out[np.ix_(idx, idx)] = w2
    return out


def ricci_target_operator(lambdas, n):
    """Particular curvature operator on e1-perp with
    r = -sum lambda_k e_k (x) e_k, built from a Kulkarni-Nomizu product."""
    nm1 = n - 1
    if nm1 < 3:
        raise DimensionError("needs n >= 4")
    t = -np.diag(lambdas)  # on the (n-1)-dim complement
    h = t / (nm1 - 2)  # r(h KN delta) = (m-2) h + tr(h) delta, tr t = 0
    r4 = kulkarni_nomizu(h, np.eye(nm1))
    return operator_from_0_4(r4).mat


def phi_map(params: EigenflagParams, tol=1e-9) -> CurvatureOperator:
    """Assemble the flag-invariant Weyl operator
    B(rho) (diag(lambda) + [0 ... 0, W2]) B(rho)^T.

    The result satisfies b = 0 and r = 0 and is invariant on
    v ^ v-perp for v = rho(e1).
    """
    n = params.dim
    if not 4 <= n <= 6:
        raise DimensionError("eigenflag parametrization needs 4 <= n <= 6")
    rho = np.asarray(params.rotation, dtype=float)
    lam = np.asarray(params.lambdas, dtype=float)
    if lam.shape != (n - 1,):
        raise ConstraintViolation(f"need {n-1} eigenvalues, got {lam.shape}")
    scale = max(np.abs(lam).max(), np.abs(params.w2).max(), 1.0)
    if abs(lam.sum()) > tol * scale:
        raise ConstraintViolation(f"eigenvalues must sum to zero (sum = {lam.sum():g})")
    if np.abs(rho.T @ rho - np.eye(n)).max() > 1e-12:
        raise ConstraintViolation("rotation is not orthogonal to 1e-12")
    m = bivector_dim(n)
    core = np.zeros((m, m))
    for k in range(n - 1):
        a = pair_index(n)[(0, k + 1)]
        core[a, a] = lam[k]
    core += _embed_w2(np.asarray(params.w2, dtype=float), n)
    core_op = CurvatureOperator(dim=n, mat=core)
    # the Ricci constraint on w2 makes the assembled operator a Weyl tensor
    rc = ricci_contract(core_op)
    if np.abs(rc).max() > tol * scale:
        raise ConstraintViolation(
            f"w2 violates its Ricci constraint (|r| = {np.abs(rc).max():g})"
        )
    bc = bianchi_project(core_op)
    if np.abs(bc.mat).max() > tol * scale:
        raise ConstraintViolation("w2 is not an algebraic curvature operator (b != 0)")
    b = induced_rotation(rho, n)
    return CurvatureOperator(dim=n, mat=b @ core @ b.T)


def sample_eigenflag_params(n, rng, lambda_scale=1.0, w2_extra_scale=1.0) -> EigenflagParams:
    """Random valid parameters: Haar-ish rotation, centered eigenvalues,
    w2 = particular solution + random element of the lower Weyl space."""
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    lam = rng.standard_normal(n - 1) * lambda_scale
    lam -= lam.mean()
    w2 = ricci_target_operator(lam, n)
    lower = weyl_space_basis(n - 1)
    if lower:
        c = rng.standard_normal(len(lower)) * w2_extra_scale
        w2 = w2 + sum(ci * b.mat for ci, b in zip(c, lower))
    return EigenflagParams(rotation=q, lambdas=lam, w2=w2)


# -- dimension arithmetic ------------------------------------------------------


def dimension_report(n) -> dict:
    """Dimension bookkeeping for the Weyl space and its flag-invariant
    subvariety.

    The report carries the numerically measured dim of the Weyl space, the
    assembled count dim ker(b) - dim S^2(V), and the literal quartic closed
    form (1/12 n^4 - 7/12 n^2 - 1/2), which does not match the assembled
    count (it gives 11.5 at n = 4 where the true dimension is 10); the
    mismatch is surfaced rather than hidden.
    """
    if not 4 <= n <= 6:
        raise DimensionError("dimension report defined for 4 <= n <= 6")
    dim_weyl_numeric = len(weyl_space_basis(n))
    dim_weyl_assembled = expected_weyl_dim(n)
    quartic = n**4 / 12.0 - 7.0 * n**2 / 12.0 - 0.5
    dim_so = n * (n - 1) // 2
    dim_lambdas = n - 2
    dim_weyl_lower = expected_weyl_dim(n - 1)
    dim_ew = dim_so + dim_lambdas + dim_weyl_lower
    codim = dim_weyl_numeric - dim_ew
    codim_closed_form = n**3 / 3.0 - n**2 - 4.0 * n / 3.0 + 2.0
    return {
        "dim": n,
        "dim_weyl": dim_weyl_numeric,
        "dim_weyl_assembled": dim_weyl_assembled,
        "dim_weyl_quartic_closed_form": quartic,
        "quartic_closed_form_mismatch": bool(abs(quartic - dim_weyl_assembled) > 1e-12),
        "dim_so": dim_so,
        "dim_lambdas": dim_lambdas,
        "dim_weyl_lower": dim_weyl_lower,
        "dim_ew": dim_ew,
        "codim": codim,
        "codim_closed_form": codim_closed_form,
        "dim_ker_bianchi": n**2 * (n**2 - 1) // 12,
        "dim_sym2_lambda2": bivector_dim(n) * (bivector_dim(n) + 1) // 2,
    }
