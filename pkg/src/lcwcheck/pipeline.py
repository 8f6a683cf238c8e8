"""Pointwise curvature tensors of a coordinate metric.

Everything is computed from order-3 jets of the metric components, so all
derivatives entering Christoffel symbols, curvature, Schouten, Cotton and
Cotton-York are exact (no finite differencing anywhere).

Conventions, fixed once and used everywhere:

* ``riemann[i, k, l, m]`` is antisymmetric in (i, k) and in (l, m) and
  symmetric under pair exchange; for the round unit sphere the sectional
  value ``R[0, 1, 0, 1]`` is positive (K = +1).
* ``ricci[k, m] = g^{ab} R[a, k, b, m]`` and ``scalar = g^{km} Ric[k, m]``.
* ``schouten = (Ric - scalar/(2(n-1)) g) / (n-2)``.
* ``weyl = riemann - kulkarni_nomizu(schouten, g)``.
* ``cotton[i, j, k] = (nabla_i S)[j, k] - (nabla_j S)[i, k]``.
* ``cotton_york[i, j] = 1/2 C[k, l, i] g[j, m] eps(k, l, m)/sqrt(det g)``
  (dimension 3 only; eps is the permutation signature).
* ``div_weyl[i, j, k] = g^{la} (nabla_l W)[i, j, a, k]``; with these signs
  it equals (n-3) * cotton on every metric (divergence identity).

All functions are pure; snapshots at distinct points can be computed in
parallel with no shared state.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .dsl import Call, MetricDef, Mul, Num
from .errors import DimensionError, SingularMetric
from .jets import Jet3, jet_constant

COND_LIMIT = 1e12


def _eps3():
    eps = np.zeros((3, 3, 3))
    for p in itertools.permutations(range(3)):
        eps[p] = _perm_sign(p)
    return eps


def _perm_sign(p):
    sign = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


EPS3 = _eps3()


def kulkarni_nomizu(alpha, beta) -> np.ndarray:
    """Kulkarni-Nomizu product of two symmetric matrices:
    (a ^o b)[i,j,k,l] = a_ik b_jl + b_ik a_jl - a_il b_jk - a_jk b_il."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("kulkarni_nomizu needs two square matrices of equal size")
    t1 = np.einsum("ik,jl->ijkl", a, b)
    t2 = np.einsum("ik,jl->ijkl", b, a)
    t3 = np.einsum("il,jk->ijkl", a, b)
    t4 = np.einsum("jk,il->ijkl", a, b)
    return t1 + t2 - t3 - t4


def _kn_jets(a, b, n, dim):
    """Kulkarni-Nomizu product on matrices of jets."""
    out = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    out[i][j][k][l] = (
                        a[i][k] * b[j][l]
                        + b[i][k] * a[j][l]
                        - a[i][l] * b[j][k]
                        - a[j][k] * b[i][l]
                    )
    return out


def _invert_jet_matrix(g, n, dim):
    """Gauss-Jordan inverse of a matrix of jets, pivoting on constant terms."""
    a = [[Jet3(g[i][j].space, g[i][j].c.copy()) for j in range(n)] for i in range(n)]
    inv = [[jet_constant(1.0 if i == j else 0.0, dim) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col].value))
        if a[pivot][col].value == 0.0:
            raise SingularMetric("metric matrix is singular at the evaluation point")
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            inv[col], inv[pivot] = inv[pivot], inv[col]
        piv = a[col][col]
        for j in range(n):
            a[col][j] = a[col][j] / piv
            inv[col][j] = inv[col][j] / piv
        for r in range(n):
            if r == col:
                continue
            f = a[r][col]
            if np.all(f.c == 0.0):
                continue
            for j in range(n):
                a[r][j] = a[r][j] - f * a[col][j]
                inv[r][j] = inv[r][j] - f * inv[col][j]
    return inv


def _values(jets, shape):
    out = np.empty(shape)
    it = np.nditer(out, flags=["multi_index"], op_flags=["writeonly"])
    for slot in it:
        node = jets
        for k in it.multi_index:
            node = node[k]
        slot[...] = node.value
    return out


class JetPipeline:
    """One evaluation of every tensor at a single point.

    Jets of derived tensors lose one valid order per differentiation:
    the metric is exact to order 3, Christoffel symbols to order 2,
    curvature/Ricci/Schouten/Weyl to order 1, Cotton and the Weyl
    divergence are plain values.  Nothing below reads past its valid order.
    """

    def __init__(self, metric: MetricDef, point):
        self.metric = metric
        self.point = np.asarray(point, dtype=float)
        self.n = metric.dim
        if len(self.point) != self.n:
            raise DimensionError(
                f"point has {len(self.point)} coordinates, metric dim is {self.n}"
            )
        metric.check_point(self.point, COND_LIMIT)
        self.g_jets = metric.eval_jets(self.point)
        self.ginv_jets = _invert_jet_matrix(self.g_jets, self.n, self.n)
        self.g = _values(self.g_jets, (self.n, self.n))
        self.g_inv = _values(self.ginv_jets, (self.n, self.n))
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    # -- Christoffel symbols --------------------------------------------

    def gamma_first_jets(self):
        """First-kind symbols Gamma_{k,ij} = (d_i g_kj + d_j g_ki - d_k g_ij)/2."""

        def build():
            n = self.n
            dg = [[[self.g_jets[i][j].partial(k) for k in range(n)] for j in range(n)] for i in range(n)]
            out = [[[None] * n for _ in range(n)] for _ in range(n)]
            for k in range(n):
                for i in range(n):
                    for j in range(i, n):
                        v = (dg[k][j][i] + dg[k][i][j] - dg[i][j][k]) * 0.5
                        out[k][i][j] = v
                        out[k][j][i] = v
            return out

        return self._get("gamma1", build)

    def gamma_jets(self):
        def build():
            n = self.n
            g1 = self.gamma_first_jets()
            out = [[[None] * n for _ in range(n)] for _ in range(n)]
            for k in range(n):
                for i in range(n):
                    for j in range(i, n):
                        acc = self.ginv_jets[k][0] * g1[0][i][j]
                        for m in range(1, n):
                            acc = acc + self.ginv_jets[k][m] * g1[m][i][j]
                        out[k][i][j] = acc
                        out[k][j][i] = acc
            return out

        return self._get("gamma", build)

    def gamma(self):
        return _values(self.gamma_jets(), (self.n,) * 3)

    def dgamma(self):
        """First partials d_l Gamma^k_{ij}, indexed [l, k, i, j]."""
        n = self.n
        gj = self.gamma_jets()
        out = np.empty((n, n, n, n))
        for l in range(n):
            for k in range(n):
                for i in range(n):
                    for j in range(n):
                        out[l, k, i, j] = gj[k][i][j].partial(l).value
        return out

    # -- curvature -------------------------------------------------------

    def riemann_jets(self):
        def build():
            n = self.n
            g1 = self.gamma_first_jets()
            gam = self.gamma_jets()
            ddg = {}

            def second(a, b, c, d):
                key = (a, b, c, d) if c <= d else (a, b, d, c)
                if key not in ddg:
                    ddg[key] = self.g_jets[key[0]][key[1]].partial(key[2]).partial(key[3])
                return ddg[key]

            out = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
            for i in range(n):
                for k in range(i + 1, n):
                    for l in range(n):
                        for m in range(l + 1, n):
                            if (l, m) < (i, k):
                                continue
                            term = (
                                second(i, m, k, l)
                                + second(k, l, i, m)
                                - second(i, l, k, m)
                                - second(k, m, i, l)
                            ) * 0.5
                            for p in range(n):
                                term = term + (
                                    g1[p][k][l] * gam[p][i][m]
                                    - g1[p][k][m] * gam[p][i][l]
                                )
                            out[i][k][l][m] = term
                            neg = -term
                            out[k][i][l][m] = neg
                            out[i][k][m][l] = neg
                            out[k][i][m][l] = term
                            if (i, k) != (l, m):
                                out[l][m][i][k] = term
                                out[m][l][i][k] = neg
                                out[l][m][k][i] = neg
                                out[m][l][k][i] = term
            zero = jet_constant(0.0, n)
            for i in range(n):
                for k in range(n):
                    for l in range(n):
                        for m in range(n):
                            if out[i][k][l][m] is None:
                                out[i][k][l][m] = zero
            return out

        return self._get("riemann", build)

    def riemann(self):
        return _values(self.riemann_jets(), (self.n,) * 4)

    def ricci_jets(self):
        def build():
            n = self.n
            r = self.riemann_jets()
            out = [[None] * n for _ in range(n)]
            for k in range(n):
                for m in range(k, n):
                    acc = jet_constant(0.0, n)
                    for a in range(n):
                        for b in range(n):
                            acc = acc + self.ginv_jets[a][b] * r[a][k][b][m]
                    out[k][m] = acc
                    out[m][k] = acc
            return out

        return self._get("ricci", build)

    def scalar_jet(self):
        def build():
            n = self.n
            ric = self.ricci_jets()
            acc = jet_constant(0.0, n)
            for k in range(n):
                for m in range(n):
                    acc = acc + self.ginv_jets[k][m] * ric[k][m]
            return acc

        return self._get("scalar", build)

    def schouten_jets(self):
        def build():
            n = self.n
            if n < 3:
                raise DimensionError("Schouten tensor needs dim >= 3")
            ric = self.ricci_jets()
            s = self.scalar_jet()
            factor = 1.0 / (n - 2)
            c = 1.0 / (2.0 * (n - 1))
            out = [[None] * n for _ in range(n)]
            for i in range(n):
                for j in range(i, n):
                    v = (ric[i][j] - s * self.g_jets[i][j] * c) * factor
                    out[i][j] = v
                    out[j][i] = v
            return out

        return self._get("schouten", build)

    def weyl_jets(self):
        def build():
            n = self.n
            r = self.riemann_jets()
            sg = _kn_jets(self.schouten_jets(), self.g_jets, n, n)
            out = [[[[r[i][j][k][l] - sg[i][j][k][l] for l in range(n)] for k in range(n)] for j in range(n)] for i in range(n)]
            return out

        return self._get("weyl", build)

    def weyl(self):
        return _values(self.weyl_jets(), (self.n,) * 4)

    # -- third-order tensors ----------------------------------------------

    def cotton(self):
        """C[i, j, k] = (nabla_i S)[j, k] - (nabla_j S)[i, k] at the point."""

        def build():
            n = self.n
            sj = self.schouten_jets()
            s_val = _values(sj, (n, n))
            ds = np.empty((n, n, n))  # ds[a, b, c] = d_a S_bc
            for a in range(n):
                for b in range(n):
                    for c in range(b, n):
                        v = sj[b][c].partial(a).value
                        ds[a, b, c] = v
                        ds[a, c, b] = v
            gam = self.gamma()
            # (nabla_a S)_bc = d_a S_bc - Gamma^m_ab S_mc - Gamma^m_ac S_bm
            nas = (
                ds
                - np.einsum("mab,mc->abc", gam, s_val)
                - np.einsum("mac,bm->abc", gam, s_val)
            )
            return nas.transpose(0, 1, 2) - nas.transpose(1, 0, 2)

        return self._get("cotton", build)

    def cotton_york(self):
        def build():
            if self.n != 3:
                raise DimensionError("Cotton-York tensor is defined in dimension 3 only")
            c = self.cotton()
            sqrtdet = math.sqrt(np.linalg.det(self.g))
            cy = 0.5 * np.einsum("kli,jm,klm->ij", c, self.g, EPS3) / sqrtdet
            return cy

        return self._get("cotton_york", build)

    def div_weyl(self):
        """(nabla_l W)^l[i, j, k] = g^{la} (nabla_l W)[i, j, a, k]."""

        def build():
            n = self.n
            if n < 4:
                raise DimensionError("Weyl divergence needs dim >= 4")
            wj = self.weyl_jets()
            w = _values(wj, (n, n, n, n))
            dw = np.empty((n, n, n, n, n))  # dw[a, i, j, k, l] = d_a W_ijkl
            for a in range(n):
                for i in range(n):
                    for j in range(n):
                        for k in range(n):
                            for l in range(n):
                                dw[a, i, j, k, l] = wj[i][j][k][l].partial(a).value
            gam = self.gamma()
            nw = (
                dw
                - np.einsum("mai,mjkl->aijkl", gam, w)
                - np.einsum("maj,imkl->aijkl", gam, w)
                - np.einsum("mak,ijml->aijkl", gam, w)
                - np.einsum("mal,ijkm->aijkl", gam, w)
            )
            return np.einsum("la,lijak->ijk", self.g_inv, nw)

        return self._get("div_weyl", build)


# -- public operations --------------------------------------------------------


@dataclass
class ChristoffelResult:
    """Gamma^k_{ij} at the point plus its first partials d_l Gamma^k_{ij}."""

    gamma: np.ndarray  # [k, i, j]
    dgamma: np.ndarray  # [l, k, i, j]


def christoffel(metric: MetricDef, point) -> ChristoffelResult:
    pl = JetPipeline(metric, point)
    return ChristoffelResult(gamma=pl.gamma(), dgamma=pl.dgamma())


def riemann_0_4(metric: MetricDef, point) -> np.ndarray:
    return JetPipeline(metric, point).riemann()


def ricci_scalar_schouten(metric: MetricDef, point):
    pl = JetPipeline(metric, point)
    if pl.n < 3:
        raise DimensionError("Schouten tensor needs dim >= 3")
    ric = _values(pl.ricci_jets(), (pl.n, pl.n))
    s = pl.scalar_jet().value
    sch = _values(pl.schouten_jets(), (pl.n, pl.n))
    return ric, s, sch


def weyl_0_4(metric: MetricDef, point) -> np.ndarray:
    pl = JetPipeline(metric, point)
    if pl.n < 3:
        raise DimensionError("Weyl decomposition needs dim >= 3")
    return pl.weyl()


def cotton(metric: MetricDef, point) -> np.ndarray:
    pl = JetPipeline(metric, point)
    if pl.n < 3:
        raise DimensionError("Cotton tensor needs dim >= 3")
    return pl.cotton()


def cotton_york(metric: MetricDef, point) -> np.ndarray:
    return JetPipeline(metric, point).cotton_york()


def div_weyl(metric: MetricDef, point) -> np.ndarray:
    return JetPipeline(metric, point).div_weyl()


@dataclass(frozen=True)
class ConformalFactor:
    """Exponent f in the rescaling g -> e^{2f} g."""

    f: object  # Expr


def conformal_rescale(metric: MetricDef, factor) -> MetricDef:
    """New MetricDef with components e^{2f} g_ij."""
    f = factor.f if isinstance(factor, ConformalFactor) else factor
    scale = Call("exp", (Mul(Num(2.0), f),))
    comp = tuple(
        tuple(Mul(scale, metric.components[i][j]) for j in range(metric.dim))
        for i in range(metric.dim)
    )
    name = f"{metric.name}:rescaled" if metric.name else "rescaled"
    return MetricDef(dim=metric.dim, components=comp, name=name, chart=metric.chart)


# -- snapshots ----------------------------------------------------------------


@dataclass
class TensorSnapshot:
    """Every pointwise tensor at one evaluation point."""

    dim: int
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray
    weyl04: np.ndarray
    cotton: np.ndarray
    cotton_york: np.ndarray | None = None  # dim 3 only
    div_weyl: np.ndarray | None = None  # dim >= 4 only

    def weyl13(self) -> np.ndarray:
        """(1,3) Weyl tensor W^a_{jkl} = g^{am} W_{mjkl} (conformally
        invariant)."""
        return np.einsum("am,mjkl->ajkl", self.g_inv, self.weyl04)

    def check_invariants(self, rtol=1e-9):
        """Verify the algebraic identities every snapshot must satisfy.

        Raises AssertionError with a description on the first failure.
        """
        r = self.riemann
        scale = max(np.abs(r).max(), 1.0)
        assert np.abs(r + r.transpose(1, 0, 2, 3)).max() <= rtol * scale, "R not antisymmetric in (i,j)"
        assert np.abs(r + r.transpose(0, 1, 3, 2)).max() <= rtol * scale, "R not antisymmetric in (k,l)"
        assert np.abs(r - r.transpose(2, 3, 0, 1)).max() <= rtol * scale, "R not pair symmetric"
        bianchi = r + r.transpose(1, 2, 0, 3) + r.transpose(2, 0, 1, 3)
        assert np.abs(bianchi).max() <= rtol * scale, "first Bianchi identity fails"
        c = self.cotton
        cscale = max(np.abs(c).max(), 1.0)
        assert np.abs(c + c.transpose(1, 0, 2)).max() <= rtol * cscale, "Cotton not antisymmetric"
        cyc = c + c.transpose(1, 2, 0) + c.transpose(2, 0, 1)
        assert np.abs(cyc).max() <= rtol * cscale, "Cotton cyclic sum nonzero"
        tr1 = np.einsum("ij,ijk->k", self.g_inv, c)
        tr2 = np.einsum("ik,ijk->j", self.g_inv, c)
        assert np.abs(tr1).max() <= rtol * cscale, "Cotton g^{ij}-trace nonzero"
        assert np.abs(tr2).max() <= rtol * cscale, "Cotton g^{ik}-trace nonzero"
        if self.cotton_york is not None:
            cy = self.cotton_york
            cyscale = max(np.abs(cy).max(), 1.0)
            assert np.abs(cy - cy.T).max() <= rtol * cyscale, "Cotton-York not symmetric"
            assert abs(np.einsum("ij,ij->", self.g_inv, cy)) <= rtol * cyscale, "Cotton-York not traceless"


def compute_snapshot(metric: MetricDef, point) -> TensorSnapshot:
    pl = JetPipeline(metric, point)
    if pl.n < 3:
        raise DimensionError("tensor snapshot needs dim >= 3")
    snap = TensorSnapshot(
        dim=pl.n,
        point=pl.point,
        g=pl.g,
        g_inv=pl.g_inv,
        gamma=pl.gamma(),
        riemann=pl.riemann(),
        ricci=_values(pl.ricci_jets(), (pl.n, pl.n)),
        scalar=pl.scalar_jet().value,
        schouten=_values(pl.schouten_jets(), (pl.n, pl.n)),
        weyl04=pl.weyl(),
        cotton=pl.cotton(),
    )
    if pl.n == 3:
        snap.cotton_york = pl.cotton_york()
    else:
        snap.div_weyl = pl.div_weyl()
    return snap


def _fmt17(x):
    return float(f"{x:.17g}")


def format_json(obj, float_digits=17) -> str:
    """Deterministic JSON with fixed-significant-digit floats."""

    def fmt(x):
        if isinstance(x, float):
            return _RawFloat(f"{x:.{float_digits}g}")
        if isinstance(x, (np.floating,)):
            return _RawFloat(f"{float(x):.{float_digits}g}")
        if isinstance(x, (np.integer,)):
            return int(x)
        if isinstance(x, np.ndarray):
            return fmt(x.tolist())
        if isinstance(x, dict):
            return {k: fmt(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [fmt(v) for v in x]
        return x

    class _RawFloat:
        def __init__(self, text):
            self.text = text

    def raw_encode(x):
        if isinstance(x, _RawFloat):
            return x.text
        if isinstance(x, dict):
            items = ", ".join(f"{json.dumps(k)}: {raw_encode(v)}" for k, v in x.items())
            return "{" + items + "}"
        if isinstance(x, list):
            return "[" + ", ".join(raw_encode(v) for v in x) + "]"
        return json.dumps(x)

    return raw_encode(fmt(obj))


def snapshot_to_json(snap: TensorSnapshot, float_digits=17) -> str:
    doc = {
        "dim": snap.dim,
        "point": snap.point,
        "g": snap.g,
        "gamma": snap.gamma,
        "riemann": snap.riemann,
        "ricci": snap.ricci,
        "scalar": snap.scalar,
        "schouten": snap.schouten,
        "weyl": snap.weyl04,
        "cotton": snap.cotton,
        "cotton_york": snap.cotton_york,
        "div_weyl": snap.div_weyl,
    }
    return format_json(doc, float_digits)
