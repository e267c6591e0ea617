"""Command-line entry point: ``escape-lab {curvature,loop,escape,oracle,all}``.

Exit codes: 0 success, 2 invalid input (config, boundary conditions,
preconditions), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import PreconditionError, cylinder_lower_bound, poly_lower_bound, sigma_upper_bound
from .config import ConfigError, RunConfig, load_config
from .curvature import minimal_dimension_search, ricci_grid, scan_positivity
from .escape import (
    TableTooShort,
    TrendThresholds,
    estimate_escape_rate,
    geometric_ladder,
    orbit_diagnostics,
)
from .geodesic import (
    MinimalLoop,
    RevolutionProfile,
    grid_oracle,
    loop_table,
    minimal_loop,
    radius_cap,
)
from .warp import DomainError, validate_boundary

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class InvalidInput(Exception):
    pass


class NumericFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# artifact writing


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int | np.integer):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Writer:
    """Writes tables and reports stamped with the tool version and config digest."""

    def __init__(self, out_dir: Path, fmt: str, digest: str):
        self.out_dir = out_dir
        self.fmt = fmt
        self.digest = digest
        self.written: list[Path] = []

    @property
    def meta(self) -> dict:
        return {"tool": "escape_lab", "version": __version__, "config": self.digest}

    def table(self, name: str, header: list[str], rows: list[list]) -> Path:
        if self.fmt == "json":
            doc = {"meta": self.meta, "columns": header,
                   "rows": [[_json_safe(float(v)) if isinstance(v, float) else v for v in r] for r in rows]}
            return self.report(name, doc)
        buf = io.StringIO()
        buf.write(f"# escape_lab {__version__} config={self.digest}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        path = self.out_dir / f"{name}.csv"
        _atomic_write(path, buf.getvalue())
        self.written.append(path)
        return path

    def report(self, name: str, doc: dict) -> Path:
        doc = {"meta": self.meta, **{k: v for k, v in doc.items() if k != "meta"}}
        text = json.dumps(_json_safe(doc), sort_keys=True, indent=2) + "\n"
        path = self.out_dir / f"{name}.json"
        _atomic_write(path, text)
        self.written.append(path)
        return path


# ---------------------------------------------------------------------------
# commands


def _validate(cfg: RunConfig) -> None:
    issues = validate_boundary(cfg.manifold)
    if issues:
        raise InvalidInput("boundary conditions: " + "; ".join(str(v) for v in issues))


def cmd_curvature(cfg: RunConfig, out: Writer) -> dict:
    _validate(cfg)
    c = cfg.curvature
    rep = scan_positivity(cfg.manifold, c.r_min, c.r_max, c.n_points)
    ric = ricci_grid(cfg.manifold, rep.grid)
    out.table("curvature", ["r", "ric_H", "ric_U", "ric_X"],
              [[float(r), float(a), float(b), float(x)] for r, a, b, x in zip(rep.grid, *ric)])
    doc = {"p": cfg.manifold.p, "positivity": rep.to_dict()}
    if c.p_search:
        p_star = minimal_dimension_search(cfg.manifold.f, cfg.manifold.h, (c.r_min, c.r_max),
                                          p_max=c.p_max, n_points=c.n_points)
        doc["p_search"] = {"p_star": p_star, "p_max": c.p_max}
    out.report("curvature_report", doc)
    return doc


def _loop_rows(table: list[MinimalLoop]) -> list[list]:
    return [[r.l, r.length, r.max_radius, r.ratio, r.b, r.k] for r in table]


def cmd_loop(cfg: RunConfig, out: Writer) -> list[MinimalLoop]:
    _validate(cfg)
    table = loop_table(cfg.manifold, cfg.ladder, cfg.search)
    out.table("loops", ["l", "length", "max_radius", "ratio", "b", "k"], _loop_rows(table))
    failed = [r for r in table if r.failed]
    if failed:
        raise NumericFailure("; ".join(f"l={r.l}: {r.error}" for r in failed))
    return table


def read_loop_csv(path: Path) -> list[MinimalLoop]:
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(lines)
    need = {"l", "length", "max_radius"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise InvalidInput(f"{path}: expected columns {sorted(need)}")
    rows = []
    try:
        for rec in reader:
            rows.append(MinimalLoop(
                l=int(rec["l"]), length=float(rec["length"]), max_radius=float(rec["max_radius"]),
                b=float(rec["b"]) if rec.get("b") else None,
                k=int(rec["k"]) if rec.get("k") else None,
            ))
    except ValueError as exc:
        raise InvalidInput(f"{path}: {exc}") from exc
    return rows


def cmd_escape(cfg: RunConfig | None, out: Writer, table: list[MinimalLoop] | None = None) -> dict:
    if table is None:
        if cfg is None:
            raise InvalidInput("escape needs --config or --table")
        table = cmd_loop(cfg, out)
    esc = cfg.escape if cfg is not None else None
    thresholds = TrendThresholds(esc.slope, esc.floor) if esc else TrendThresholds()
    spec = cfg.manifold if cfg is not None else None
    est = estimate_escape_rate(table, esc.tail_fraction if esc else 0.5, thresholds, spec=spec)
    diag = orbit_diagnostics(table, esc.epsilon if esc else 0.1,
                             threshold=esc.almost_translation if esc else 1.9, require_pairs=False)
    out.table("orbit_D", ["R", "D", "s", "R_over_s"],
              [[R, D, s, q] for R, D, s, q in zip(diag.R, diag.D, diag.s, diag.ratio_R_over_s)])
    out.table("orbit_almost_translation", ["l", "ratio2l", "flag19"],
              [[a.l, a.ratio, a.flag] for a in diag.almost_translation])
    doc: dict = {"estimate": est.to_dict(), "epsilon": diag.epsilon,
                 "almost_translation_threshold": diag.threshold}
    if spec is not None:
        h = spec.h
        fam = cfg.manifold_doc["h"]["family"]
        if fam == "PolyDecay":
            basic, improved = poly_lower_bound(float(cfg.manifold_doc["h"].get("alpha", 1.0)))
            doc["bounds"] = {"basic": basic, "improved": improved}
        sandwich = []
        if h.is_decreasing_to_zero() or fam == "PositiveLimit":
            for r in table:
                if r.failed:
                    continue
                ub, r_l = sigma_upper_bound(h, r.l, scale=spec.period)
                try:
                    lb = cylinder_lower_bound(r.max_radius, r.l, h, scale=spec.period)
                except PreconditionError:
                    lb = None
                sandwich.append({"l": r.l, "lower": lb, "length": r.length, "upper": ub, "r_l": r_l,
                                 "ok": (lb is None or lb <= r.length) and r.length <= ub + 1e-9})
        doc["sandwich"] = sandwich
    out.report("escape", doc)
    return doc


def cmd_oracle(cfg: RunConfig, out: Writer) -> list[dict]:
    _validate(cfg)
    o = cfg.oracle
    prof = RevolutionProfile(cfg.manifold.h, cfg.manifold.period)
    rows, docs = [], []
    for l in o.l:
        m = minimal_loop(cfg.manifold, l, cfg.search)
        extent = o.t_extent if o.t_extent is not None else radius_cap(cfg.manifold, l)
        extent = min(extent, prof.t_max * (1 - 1e-6)) if math.isfinite(prof.t_max) else extent
        g = grid_oracle(prof, l, extent, o.nt, o.nphi, o.stencil_radius)
        rel = (g.length - m.length) / m.length
        rows.append([l, m.length, g.length, rel, m.max_radius, g.max_radius, extent])
        docs.append({"l": l, "clairaut": m.length, "grid": g.length, "relative_difference": rel})
    out.table("oracle", ["l", "clairaut_length", "grid_length", "rel_diff", "clairaut_radius",
                         "grid_radius", "t_extent"], rows)
    return docs


def cmd_all(cfg: RunConfig, out: Writer) -> None:
    cmd_curvature(cfg, out)
    table = cmd_loop(cfg, out)
    cmd_escape(cfg, out, table=table)
    cmd_oracle(cfg, out)


# ---------------------------------------------------------------------------
# argument handling


def _parse_ladder(text: str) -> list[int]:
    try:
        l0, ratio, count = text.split(":")
        return geometric_ladder(float(l0), float(ratio), int(count))
    except ValueError as exc:
        raise InvalidInput(f"--ladder expects l0:ratio:count, got {text!r}") from exc


def _parse_ls(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise InvalidInput(f"--l expects integers, got {text!r}") from exc
    if not vals or min(vals) < 1:
        raise InvalidInput("--l values must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="escape-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"escape_lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("curvature", "Ricci scan and dimension search"),
                       ("loop", "minimal loop table"),
                       ("escape", "escape-rate estimate and orbit diagnostics"),
                       ("oracle", "grid shortest-path cross-check"),
                       ("all", "full pipeline")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="INI or JSON experiment file")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        p.add_argument("--format", choices=("csv", "json"), help="table format")
        p.add_argument("--threads", type=int, help="worker processes (default: ESCAPE_LAB_THREADS or 1)")
        p.add_argument("--ladder", help="geometric ladder l0:ratio:count")
        p.add_argument("--l", dest="ls", help="explicit winding numbers, comma separated")
        if name == "escape":
            p.add_argument("--table", type=Path, help="loop CSV to analyse instead of recomputing")
    return parser


def _resolve(args) -> tuple[RunConfig | None, Writer]:
    cfg = load_config(args.config) if args.config else None
    if cfg is None and not (args.command == "escape" and args.table):
        raise InvalidInput("--config is required")
    digest = "none"
    fmt, out_dir = "csv", Path("escape_lab_out")
    if cfg is not None:
        if args.ladder:
            cfg = cfg.with_ladder(_parse_ladder(args.ladder))
        if args.ls:
            ls = _parse_ls(args.ls)
            if args.command == "oracle":
                cfg = dataclasses.replace(cfg, oracle=dataclasses.replace(cfg.oracle, l=tuple(ls)))
            else:
                cfg = cfg.with_ladder(sorted(set(ls)))
        threads = args.threads
        if threads is None and os.environ.get("ESCAPE_LAB_THREADS"):
            try:
                threads = int(os.environ["ESCAPE_LAB_THREADS"])
            except ValueError as exc:
                raise InvalidInput("ESCAPE_LAB_THREADS must be an integer") from exc
        if threads is not None:
            if threads < 1:
                raise InvalidInput("--threads must be >= 1")
            cfg = dataclasses.replace(cfg, search=dataclasses.replace(cfg.search, workers=threads))
        digest = cfg.digest()
        fmt, out_dir = cfg.output.format, Path(cfg.output.dir)
    if args.format:
        fmt = args.format
    if args.out:
        out_dir = args.out
    return cfg, Writer(out_dir, fmt, digest)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    # non-finite values are detected explicitly and mapped to exit code 3
    with np.errstate(all="ignore"):
        return _run(args)


def _run(args) -> int:
    try:
        cfg, out = _resolve(args)
        if args.command == "curvature":
            cmd_curvature(cfg, out)
        elif args.command == "loop":
            cmd_loop(cfg, out)
        elif args.command == "escape":
            table = read_loop_csv(args.table) if getattr(args, "table", None) else None
            cmd_escape(cfg, out, table=table)
        elif args.command == "oracle":
            cmd_oracle(cfg, out)
        else:
            cmd_all(cfg, out)
    except (InvalidInput, ConfigError, PreconditionError, TableTooShort) as exc:
        print(f"escape-lab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericFailure, DomainError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"escape-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in out.written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
