"""Command line front end: ``platekit run|study|mesh-info|export-matrix``."""

from __future__ import annotations

import argparse
import csv
import os
import sys
from contextlib import nullcontext
from pathlib import Path

from .assembly import METHODS, MethodSpec, assemble, expected_blocks, export_matrix
from .mesh import DIAGONALS, build_uniform_square
from .quadrature import TRI_RULES
from .solver import SingularSystemError, solve_saddle
from .study import (
    METHOD_FIELDS,
    REFERENCE_TOLERANCE,
    Solution,
    compare_reference,
    compute_errors,
    manufactured,
    run_convergence,
    write_csv,
)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
CLI_METHODS = tuple(m.replace("_", "-") for m in METHODS)
BOOL_KEYS = ("full_ddiv", "compare_reference")


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def _levels(v) -> list[int]:
    if isinstance(v, list):
        return v
    try:
        return [int(s) for s in str(v).replace(" ", "").split(",") if s]
    except ValueError:
        raise UsageError(f"bad level list {v!r}") from None


def _merge(args: argparse.Namespace) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key, value in vars(args).items():
        if key in ("config", "command", "func"):
            continue
        if value is None or (key in BOOL_KEYS and value is False):
            continue
        cfg[key] = value
    return cfg


def _method(cfg: dict) -> str:
    name = cfg.get("method")
    if name is None:
        raise UsageError("--method is required")
    name = str(name)
    if name not in CLI_METHODS and name not in METHODS:
        raise UsageError(f"unknown method {name!r}; choose from {', '.join(CLI_METHODS)}")
    return name.replace("-", "_")


def _spec(cfg: dict) -> MethodSpec:
    shear = cfg.get("shear_mode", "analytic")
    if shear not in ("analytic", "central"):
        raise UsageError(f"shear mode must be analytic or central, got {shear!r}")
    rule = cfg.get("rhs_rule", "seven_point")
    if rule not in TRI_RULES:
        raise UsageError(f"unknown quadrature rule {rule!r}")
    return MethodSpec(
        _method(cfg),
        full_ddiv=_as_bool(cfg.get("full_ddiv", False)),
        shear_mode=shear,
        rhs_rule=rule,
    )


def _n(cfg: dict) -> int:
    try:
        n = int(cfg.get("n", 1))
    except ValueError:
        raise UsageError(f"--n must be an integer, got {cfg.get('n')!r}") from None
    if n < 1:
        raise UsageError("--n must be at least 1")
    return n


def _diagonal(cfg: dict) -> str:
    d = cfg.get("diagonal", "alternating")
    if d not in DIAGONALS:
        raise UsageError(f"diagonal must be one of {DIAGONALS}")
    return d


def _threads():
    raw = os.environ.get("PLATEKIT_THREADS", "0").strip() or "0"
    try:
        k = int(raw)
    except ValueError:
        raise UsageError(f"PLATEKIT_THREADS must be an integer, got {raw!r}") from None
    if k <= 0:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=k)


# -- commands ---------------------------------------------------------------------


def cmd_run(cfg: dict) -> int:
    spec = _spec(cfg)
    n = _n(cfg)
    mesh = build_uniform_square(n, _diagonal(cfg))
    case = manufactured()
    system = assemble(spec, mesh, case.f, label=f"n={n}")
    report = solve_saddle(system)
    rec = compute_errors(Solution(system, report.x, report), case)
    sizes = system.block_sizes
    names = list(system.blocks)
    print(f"method          {spec.method.replace('_', '-')}" + (" (full element)" if spec.full_ddiv else ""))
    print(f"mesh            n={n}  N={mesh.n_triangles}  h={mesh.h:.6g}")
    print("blocks          " + "  ".join(f"{k}={v}" for k, v in zip(names, sizes)))
    print(f"unknowns        {system.n_unknowns}")
    print(f"solver          {report.method}  residual={report.residual:.3e}")
    for name in METHOD_FIELDS[spec.method]:
        print(f"{name:<16}{rec.get(name):.6e}")
    if cfg.get("csv"):
        with open(cfg["csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "n", "N", "h", *names, "unknowns", "residual", *METHOD_FIELDS[spec.method]])
            w.writerow(
                [
                    spec.method,
                    n,
                    mesh.n_triangles,
                    f"{mesh.h:.5e}",
                    *sizes,
                    system.n_unknowns,
                    f"{report.residual:.5e}",
                    *(f"{rec.get(k):.5e}" for k in METHOD_FIELDS[spec.method]),
                ]
            )
    if cfg.get("matrix"):
        count = export_matrix(system, cfg["matrix"])
        print(f"matrix          {count} entries -> {cfg['matrix']}")
    return EXIT_OK


def cmd_study(cfg: dict) -> int:
    spec = _spec(cfg)
    levels = _levels(cfg.get("levels", ""))
    if len(levels) < 2:
        raise UsageError("a study needs at least two levels")
    try:
        table = run_convergence(spec, levels, diagonal=_diagonal(cfg), progress=_progress)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fields = METHOD_FIELDS[spec.method]
    print("EOC (last pair): " + "  ".join(f"{k}={table.last_eoc(k):.3f}" for k in fields))
    status = EXIT_OK
    compare = _as_bool(cfg.get("compare_reference", False))
    if compare:
        rows = compare_reference(table)
        if spec.method == "mixed_nn" and not spec.full_ddiv:
            print("note: the reference mixed-nn column is matched by the full element (--full-ddiv)")
        if not rows:
            print("no reference values at these levels")
        for c in rows:
            flag = "ok" if c.ok else "DEVIATES"
            print(f"N={c.N:<6d} computed {c.computed:.4e}  reference {c.reference:.3e}  dev {100 * c.deviation:5.2f}%  {flag}")
        if any(not c.ok for c in rows):
            print(f"deviation above {100 * REFERENCE_TOLERANCE:.0f}%", file=sys.stderr)
            status = EXIT_NUMERIC
    csv_path = cfg.get("csv")
    if csv_path:
        write_csv(table, csv_path, with_reference=compare)
        print(f"wrote {csv_path}")
        svg_path = cfg.get("svg") or str(Path(csv_path).with_suffix(".svg"))
    else:
        svg_path = cfg.get("svg")
    if svg_path:
        from .plotting import plot_convergence

        plot_convergence(table, svg_path)
        print(f"wrote {svg_path}")
    return status


def _progress(rec) -> None:
    print(f"N={rec.N:<6d} h={rec.h:.4e}  err_u={rec.err_u:.4e}  unknowns={rec.n_unknowns}  residual={rec.residual:.1e}", flush=True)


def cmd_mesh_info(cfg: dict) -> int:
    n = _n(cfg)
    mesh = build_uniform_square(n, _diagonal(cfg))
    print(f"n={n} diagonal={_diagonal(cfg)}")
    print(f"triangles {mesh.n_triangles}")
    print(f"edges {mesh.n_edges} (interior {mesh.n_interior_edges})")
    print(f"vertices {mesh.n_vertices} (interior {mesh.n_interior_vertices})")
    print(f"h {mesh.h:.6g}")
    if cfg.get("method"):
        spec = _spec(cfg)
        print("expected blocks " + " ".join(str(b) for b in expected_blocks(spec, mesh)))
    if cfg.get("mesh"):
        mesh.save(cfg["mesh"])
        print(f"wrote {cfg['mesh']}")
    return EXIT_OK


def cmd_export_matrix(cfg: dict) -> int:
    spec = _spec(cfg)
    out = cfg.get("out") or cfg.get("matrix")
    if not out:
        raise UsageError("--out is required")
    mesh = build_uniform_square(_n(cfg), _diagonal(cfg))
    system = assemble(spec, mesh, manufactured().f)
    count = export_matrix(system, out)
    print(f"{count} entries, {system.n_unknowns} unknowns -> {out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="platekit", description="Hybrid and mixed plate bending discretizations.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, method=True):
        sp.add_argument("--config", help="file with key = value lines; flags override it")
        if method:
            sp.add_argument("--method", help=", ".join(CLI_METHODS))
            sp.add_argument("--full-ddiv", action="store_true", default=False, help="15-dof tensor element")
            sp.add_argument("--shear-mode", choices=("analytic", "central"))
            sp.add_argument("--rhs-rule", help="triangle rule for the load vector")
        sp.add_argument("--diagonal", choices=DIAGONALS)

    r = sub.add_parser("run", help="solve on one mesh and print a summary")
    common(r)
    r.add_argument("--n", help="cells per side")
    r.add_argument("--csv", help="summary CSV path")
    r.add_argument("--matrix", help="also export the system matrix here")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("study", help="convergence study over doubling levels")
    common(s)
    s.add_argument("--levels", help="comma separated n values, e.g. 2,4,8")
    s.add_argument("--compare-paper", dest="compare_reference", action="store_true", default=False, help="compare err_u with the reference table")
    s.add_argument("--csv", help="CSV path; an SVG plot is written next to it")
    s.add_argument("--svg", help="SVG path (overrides the default next to the CSV)")
    s.set_defaults(func=cmd_study)

    m = sub.add_parser("mesh-info", help="entity counts of the uniform square mesh")
    common(m)
    m.add_argument("--n", help="cells per side")
    m.add_argument("--mesh", help="save the mesh as v/t text lines")
    m.set_defaults(func=cmd_mesh_info)

    e = sub.add_parser("export-matrix", help="write the assembled matrix as row col value lines")
    common(e)
    e.add_argument("--n", help="cells per side")
    e.add_argument("--out", help="output path")
    e.set_defaults(func=cmd_export_matrix)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        cfg = _merge(args)
        with _threads():
            return args.func(cfg)
    except UsageError as exc:
        print(f"platekit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularSystemError, ArithmeticError, RuntimeError) as exc:
        print(f"platekit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
