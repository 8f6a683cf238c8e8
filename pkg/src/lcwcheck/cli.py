"""Command-line front end.

Commands: ``catalog``, ``tensors``, ``check``, ``perturb``, ``weyl-space``.
Metric sources are either a catalog entry name or a path to a metric file
in the format documented in the dsl module.

Exit codes of ``check`` (and ``weyl-space sample/phi``): 0 when the
necessary condition for a limiting Carleman weight passes, 10 when it
fails (no weight exists near the point), 11 when the result is in the
inconclusive band.  Parse errors exit 2, evaluation/domain errors exit 3,
positivity failures of ``perturb`` exit 4.

Identical (command, seed) pairs produce byte-identical JSON.
"""

from __future__ import annotations

import json
import pathlib
import sys

import click
import numpy as np

from . import catalog as cat
from .bivectors import (
    dimension_report,
    operator_from_0_4,
    phi_map,
    random_weyl_operator,
    sample_eigenflag_params,
)
from .dsl import metric_to_text, parse_metric
from .errors import (
    DomainError,
    LcwError,
    NotPositiveDefinite,
    ParseError,
    SingularMetric,
    UnknownEntry,
)
from .obstructions import ObstructionConfig, auto_test, eigenflag_test
from .perturbation import (
    CottonPrescription,
    CurvaturePrescription,
    normal_coordinates,
    prescribe_cotton_york,
    prescribe_curvature,
)
from .pipeline import compute_snapshot, format_json

EXIT_PASSES = 0
EXIT_PARSE = 2
EXIT_MATH = 3
EXIT_POSITIVITY = 4
EXIT_FAILS = 10
EXIT_INCONCLUSIVE = 11

_VERDICT_EXIT = {"passes_necessary": EXIT_PASSES, "fails_lcw_necessary": EXIT_FAILS, "inconclusive": EXIT_INCONCLUSIVE}


def _parse_point(text, dim):
    if not text:
        return np.zeros(dim)
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise ParseError(f"cannot parse point {text!r}; expected a,b,c")
    if len(vals) != dim:
        raise ParseError(f"point has {len(vals)} coordinates, metric dim is {dim}")
    return np.array(vals)


def _load_source(source):
    """Catalog entry name or metric file path -> (entry-or-None, MetricDef-or-None)."""
    path = pathlib.Path(source)
    if path.exists():
        return None, parse_metric(path.read_text())
    try:
        entry = cat.get_entry(source)
    except UnknownEntry:
        raise ParseError(
            f"{source!r} is neither a readable file nor a catalog entry"
        )
    return entry, entry.metric


def _echo_json(doc):
    click.echo(format_json(doc))


def _fmt_table_value(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _echo_matrix(name, mat):
    mat = np.asarray(mat)
    click.echo(f"{name}:")
    if mat.ndim <= 2:
        for row in np.atleast_2d(mat):
            click.echo("  " + "  ".join(f"{v:12.6g}" for v in np.atleast_1d(row)))
    else:
        flat_header = " x ".join(str(s) for s in mat.shape)
        click.echo(f"  ({flat_header} array; use --format json for full output)")
        norm = float(np.linalg.norm(mat))
        click.echo(f"  frobenius norm = {norm:.6g}")


class _Fail(Exception):
    def __init__(self, code, message):
        self.code = code
        self.message = message


def _run(fn):
    try:
        fn()
    except ParseError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_PARSE)
    except (DomainError, SingularMetric) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_MATH)
    except NotPositiveDefinite as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_POSITIVITY)
    except _Fail as e:
        if e.message:
            click.echo(e.message, err=True)
        sys.exit(e.code)
    except LcwError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_MATH)


@click.group()
def main():
    """Curvature tensors and limiting-Carleman-weight obstructions for
    coordinate metrics."""


@main.command("catalog")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
@click.option("--all", "show_all", is_flag=True, help="include optional entries")
def cmd_catalog(fmt, show_all):
    """List built-in geometries."""

    def go():
        rows = []
        for name in cat.list_catalog(include_optional=show_all or True):
            e = cat.get_entry(name)
            if e.optional and not show_all:
                continue
            rows.append(
                {
                    "name": e.name,
                    "dim": e.dim,
                    "kind": "metric" if e.metric is not None else "algebraic",
                    "lcw": e.expected.get("lcw", "unknown"),
                    "optional": e.optional,
                }
            )
        if fmt == "json":
            _echo_json(rows)
        else:
            click.echo(f"{'name':<18} {'dim':<4} {'kind':<10} lcw")
            for r in rows:
                click.echo(f"{r['name']:<18} {r['dim']:<4} {r['kind']:<10} {r['lcw']}")

    _run(go)


_TENSOR_KEYS = (
    "g",
    "gamma",
    "riemann",
    "ricci",
    "scalar",
    "schouten",
    "weyl",
    "cotton",
    "cotton_york",
    "div_weyl",
)


@main.command("tensors")
@click.option("--metric", "source", required=True, help="catalog name or metric file")
@click.option("--point", default="", help="evaluation point a,b,c (default: origin)")
@click.option("--which", default="", help="comma list of tensors (default: all)")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def cmd_tensors(source, point, which, fmt):
    """Evaluate curvature tensors of a metric at a point."""

    def go():
        entry, metric = _load_source(source)
        wanted = [w.strip() for w in which.split(",") if w.strip()] or list(_TENSOR_KEYS)
        for w in wanted:
            if w not in _TENSOR_KEYS:
                raise ParseError(f"unknown tensor {w!r}; choose from {', '.join(_TENSOR_KEYS)}")
        if metric is None:
            doc = _algebraic_tensors(entry)
        else:
            p = _parse_point(point, metric.dim)
            snap = compute_snapshot(metric, p)
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
        out = {k: v for k, v in doc.items() if k in ("dim", "point") or k in wanted}
        if fmt == "json":
            _echo_json(out)
        else:
            click.echo(f"dim = {out['dim']}")
            if "point" in out and out["point"] is not None:
                click.echo("point = " + ", ".join(f"{v:.6g}" for v in out["point"]))
            for k in wanted:
                v = out.get(k)
                if v is None:
                    click.echo(f"{k}: (not defined in this dimension)")
                elif np.isscalar(v):
                    click.echo(f"{k} = {_fmt_table_value(float(v))}")
                else:
                    _echo_matrix(k, v)

    _run(go)


def _algebraic_tensors(entry):
    from .bivectors import ricci_contract

    data = entry.algebraic
    op = operator_from_0_4(data.r4, g=data.g)
    ric = ricci_contract(op)
    scalar = float(np.trace(ric))
    n = data.dim
    schouten = (ric - scalar / (2 * (n - 1)) * np.eye(n)) / (n - 2)
    from .pipeline import kulkarni_nomizu

    weyl = data.r4 - kulkarni_nomizu(schouten, np.eye(n))
    return {
        "dim": n,
        "point": None,
        "g": data.g,
        "gamma": None,
        "riemann": data.r4,
        "ricci": ric,
        "scalar": scalar,
        "schouten": schouten,
        "weyl": weyl,
        "cotton": None,
        "cotton_york": None,
        "div_weyl": None,
    }


@main.command("check")
@click.option("--metric", "source", required=True, help="catalog name or metric file")
@click.option("--point", default="", help="evaluation point (default: origin)")
@click.option(
    "--test",
    "which_test",
    type=click.Choice(["auto", "eigenflag", "cotton-york"]),
    default="auto",
)
@click.option("--tol", type=float, default=None, help="relative tolerance (default 1e-8)")
@click.option("--seed", type=int, default=0, help="seed for the multi-start search")
@click.option("--starts", type=int, default=64)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json")
def cmd_check(source, point, which_test, tol, seed, starts, fmt):
    """Decide the necessary condition for a limiting Carleman weight.

    Exit code 0: passes (no obstruction found); 10: fails (no LCW exists
    near the point); 11: inconclusive."""

    def go():
        config = ObstructionConfig(seed=seed, starts=starts)
        if tol is not None:
            config.tol_rel = tol
        entry, metric = _load_source(source)
        if metric is None:
            data = entry.algebraic
            from .pipeline import kulkarni_nomizu
            from .bivectors import ricci_contract

            op = operator_from_0_4(data.r4, g=data.g)
            ric = ricci_contract(op)
            n = data.dim
            scal = float(np.trace(ric))
            schouten = (ric - scal / (2 * (n - 1)) * np.eye(n)) / (n - 2)
            wop = operator_from_0_4(data.r4 - kulkarni_nomizu(schouten, np.eye(n)))
            report = eigenflag_test(wop, config)
        else:
            p = _parse_point(point, metric.dim)
            if which_test == "auto":
                report = auto_test(metric, p, config)
            elif which_test == "cotton-york":
                from .obstructions import cotton_york_test

                report = cotton_york_test(metric, p, config)
            else:
                snap = compute_snapshot(metric, p)
                wop = operator_from_0_4(snap.weyl04, g=snap.g)
                report = eigenflag_test(wop, config)
        if fmt == "json":
            click.echo(report.to_json())
        else:
            click.echo(f"test      : {report.test}")
            click.echo(f"verdict   : {report.verdict_string}")
            if report.residual is not None:
                click.echo(f"residual  : {report.residual:.6g}")
            if report.det_cy is not None:
                click.echo(f"det CY    : {report.det_cy:.6g}")
            if report.witness is not None:
                click.echo(
                    "witness   : " + ", ".join(f"{v:.6g}" for v in report.witness)
                )
            click.echo(f"note      : {report.note}")
        raise _Fail(_VERDICT_EXIT[report.verdict_string], "")

    _run(go)


@main.command("perturb")
@click.option("--metric", "source", required=True, help="catalog name or metric file")
@click.option("--point", default="", help="center of the bump (default: origin)")
@click.option(
    "--target",
    default="same",
    help="'same', 'random', or a JSON file with {'cy': [[..]]} (dim 3) / "
    "{'weyl': [[..]]} (dim 4, lex-pair operator matrix)",
)
@click.option("--radius", type=float, default=1.0)
@click.option("--amplitude", type=float, default=1e-2, help="size of a random target shift")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json")
def cmd_perturb(source, point, target, radius, amplitude, seed, out_path, fmt):
    """Bump a metric so the curvature (dim >= 4) or Cotton-York tensor
    (dim 3) at the point takes a prescribed value; writes the new metric
    file.  The output metric is expressed in normal coordinates centered at
    the point; evaluate it at the origin."""

    def go():
        entry, metric = _load_source(source)
        if metric is None:
            raise ParseError("perturb needs a coordinate metric, not an algebraic entry")
        p = _parse_point(point, metric.dim)
        n = metric.dim
        rng = np.random.default_rng(seed)

        if target == "same":
            # identity prescription: the metric itself already has the
            # requested tensors, so the output is the input
            _write_metric(metric, out_path)
            _emit_perturb(
                {
                    "unchanged": True,
                    "target_error": 0.0,
                    "evaluation_point": p,
                    "out": str(out_path),
                },
                fmt,
            )
            return

        chart0 = normal_coordinates(metric, p, radius)
        if n == 3:
            cy_here = compute_snapshot(chart0.metric, np.zeros(3)).cotton_york
            if target == "random":
                d = rng.standard_normal((3, 3))
                d = (d + d.T) / 2.0
                d -= np.trace(d) / 3.0 * np.eye(3)
                cy0 = cy_here + amplitude * d / np.linalg.norm(d)
            else:
                doc = json.loads(pathlib.Path(target).read_text())
                cy0 = np.array(doc["cy"], dtype=float)
            res = prescribe_cotton_york(
                CottonPrescription(base=metric, point=p, target_cy=cy0, radius=radius)
            )
        else:
            from .bivectors import CurvatureOperator, operator_to_0_4
            from .pipeline import JetPipeline

            r_here = JetPipeline(chart0.metric, np.zeros(n)).riemann()
            if target == "random":
                # random Weyl shift on top of the current curvature
                wshift = random_weyl_operator(n, rng)
                r0 = r_here + amplitude * operator_to_0_4(wshift)
            else:
                doc = json.loads(pathlib.Path(target).read_text())
                wmat = np.array(doc["weyl"], dtype=float)
                snap = compute_snapshot(chart0.metric, np.zeros(n))
                wtarget = operator_to_0_4(CurvatureOperator(dim=n, mat=wmat))
                r0 = r_here - snap.weyl04 + wtarget
            res = prescribe_curvature(
                CurvaturePrescription(base=metric, point=p, target_r4=r0, radius=radius)
            )
        _write_metric(res.metric, out_path)
        result_doc = {
            "unchanged": res.unchanged,
            "target_error": res.target_error,
            "shift_norm": res.shift_norm,
            "ck_norm_ratio": res.norm_ratio,
            "evaluation_point": res.evaluation_point,
            "out": str(out_path),
            "note": "output metric uses normal coordinates centered at the bump point",
        }
        _emit_perturb(result_doc, fmt)

    _run(go)


def _write_metric(metric, out_path):
    pathlib.Path(out_path).write_text(metric_to_text(metric))


def _emit_perturb(doc, fmt):
    if fmt == "json":
        _echo_json(doc)
    else:
        for k, v in doc.items():
            if isinstance(v, np.ndarray):
                v = ", ".join(f"{x:.6g}" for x in v)
            click.echo(f"{k}: {v}")


@main.command("weyl-space")
@click.option("--dim", "n", type=int, required=True)
@click.argument("subcommand", type=click.Choice(["dims", "sample", "phi"]))
@click.option("--seed", type=int, default=0)
@click.option("--tol", type=float, default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json")
def cmd_weyl_space(n, subcommand, seed, tol, fmt):
    """Dimension arithmetic and random sampling in the space of algebraic
    Weyl operators."""

    def go():
        config = ObstructionConfig(seed=seed)
        if tol is not None:
            config.tol_rel = tol
        if subcommand == "dims":
            doc = dimension_report(n)
            if fmt == "json":
                _echo_json(doc)
            else:
                for k, v in doc.items():
                    click.echo(f"{k}: {_fmt_table_value(v)}")
            return
        rng = np.random.default_rng(seed)
        if subcommand == "sample":
            op = random_weyl_operator(n, rng)
            report = eigenflag_test(op, config)
            doc = {
                "dim": n,
                "kind": "random-weyl-sphere-sample",
                "seed": seed,
                "operator": op.to_json_dict(),
                "report": report.to_json_dict(),
            }
        else:
            params = sample_eigenflag_params(n, rng)
            op = phi_map(params)
            report = eigenflag_test(op, config)
            doc = {
                "dim": n,
                "kind": "flag-parametrization-sample",
                "seed": seed,
                "witness_direction": params.rotation[:, 0],
                "operator": op.to_json_dict(),
                "report": report.to_json_dict(),
            }
        if fmt == "json":
            _echo_json(doc)
        else:
            click.echo(f"verdict: {doc['report']['verdict']}")
        raise _Fail(_VERDICT_EXIT[report.verdict_string], "")

    _run(go)


if __name__ == "__main__":
    main()
