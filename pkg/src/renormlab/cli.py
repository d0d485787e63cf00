"""``renormlab`` command line: config parsing, the five subcommands and exit codes.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import conjugacy as qs
from . import markov
from . import scaffold as sc
from .errors import InvalidParameter, InvariantViolation, RenormLabError
from .maps import MapSpec, make_map
from .reports import Report, emit

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3
COMMANDS = ("cascade", "geometry", "markov", "conjugacy", "lemma3")
AUTO_LAMBDA = "feigenbaum"
AUTO_LAMBDA_DEPTH = 12
MARKOV_DEFECT_TOL = 1e-9

_COMMON_KEYS = {"depth", "format", "out"}
_KEYS = {
    "cascade": {"map"},
    "geometry": {"map", "sup_grid", "sup_max_level"},
    "markov": {"map", "word_length", "level_cap", "samples"},
    "conjugacy": {"map", "source_map", "scales", "grid_n", "word_caps", "eps_target", "strict", "defect_samples", "seed"},
    "lemma3": {"t", "K"},
}
_DEFAULT_DEPTH = {"cascade": 10, "geometry": 10, "markov": 8, "conjugacy": 12, "lemma3": None}
_MAX_DEPTH = {
    "cascade": sc.MAX_CASCADE_DEPTH,
    "geometry": sc.MAX_DEPTH,
    "markov": sc.MAX_DEPTH - 1,
    "conjugacy": qs.CONJUGACY_MAX_DEPTH,
    "lemma3": None,
}


class ConfigError(RenormLabError):
    pass


@dataclass
class RunConfig:
    command: str
    depth: int | None
    fmt: str = "json"
    out: str | None = None
    options: dict = field(default_factory=dict)

    def echo(self) -> dict:
        doc = {"depth": self.depth, "format": self.fmt, "out": self.out}
        doc.update(self.options)
        return doc

    def get(self, key, default=None):
        return self.options.get(key, default)


def load_config(command: str, path: str | None, depth: int | None = None, fmt: str | None = None, out: str | None = None) -> RunConfig:
    """Read a JSON config file; explicit flags override its values."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _COMMON_KEYS - _KEYS[command]
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    depth = depth if depth is not None else raw.get("depth", _DEFAULT_DEPTH[command])
    limit = _MAX_DEPTH[command]
    if limit is not None:
        if not isinstance(depth, int) or isinstance(depth, bool) or not 1 <= depth <= limit:
            raise ConfigError(f"{command} depth must be an integer in 1..{limit}, got {depth!r}")
    fmt = fmt or raw.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {fmt!r}")
    options = {k: v for k, v in raw.items() if k not in _COMMON_KEYS}
    return RunConfig(command, depth, fmt, out if out is not None else raw.get("out"), options)


def resolve_map(doc, what: str = "map") -> MapSpec:
    """Map spec from config; ``"lambda": "feigenbaum"`` selects the accumulation parameter."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} must be an object with family, t, lambda and optional a")
    family, t, a = doc.get("family"), doc.get("t"), doc.get("a", 0.0)
    lam = doc.get("lambda", AUTO_LAMBDA)
    if family is None or t is None:
        raise ConfigError(f"{what} needs family and t")
    if lam == AUTO_LAMBDA:
        lam = sc.feigenbaum_parameter(family, t, a, AUTO_LAMBDA_DEPTH).lambda_inf
    return make_map(family, t, lam, a)


def _cascade_params(cfg: RunConfig) -> tuple[str, float, float]:
    doc = cfg.get("map", {"family": "affine", "t": 2.0})
    if not isinstance(doc, dict) or "t" not in doc:
        raise ConfigError("map needs family and t")
    # lambda is irrelevant here; 0.5 only lets make_map validate family, t and a
    spec = make_map(doc.get("family", "affine"), doc["t"], 0.5, doc.get("a", 0.0))
    return spec.family.value, spec.t, spec.a


# -- commands -----------------------------------------------------------------


def cmd_cascade(cfg: RunConfig) -> Report:
    family, t, a = _cascade_params(cfg)
    lams = sc.superstable_cascade(family, t, a, cfg.depth)
    rows = [{"k": k + 1, "lambda_k": lam, "delta_k": None, "alpha_k": None} for k, lam in enumerate(lams)]
    for k in range(1, len(lams) - 1):
        rows[k + 1]["delta_k"] = (lams[k] - lams[k - 1]) / (lams[k + 1] - lams[k])
    lam_inf = sc.aitken(lams) if len(lams) >= 3 else None
    if lam_inf is not None and len(lams) >= 5:
        scaf = sc.build_scaffold(make_map(family, t, lam_inf, a), min(cfg.depth, sc.MAX_DEPTH))
        for k in range(1, scaf.depth):
            rows[k - 1]["alpha_k"] = scaf.I(k).length / scaf.I(k + 1).length
    meta = {
        "depth": cfg.depth,
        "root_tol": 1e-3 * float(np.finfo(float).eps),
        "lambda_inf": lam_inf,
        "lambda_inf_method": "aitken",
        "family": family,
        "t": t,
        "a": a,
    }
    return Report("cascade", cfg.echo(), ("k", "lambda_k", "delta_k", "alpha_k"), rows, meta)


def cmd_geometry(cfg: RunConfig) -> Report:
    spec = resolve_map(cfg.get("map"))
    scaf = sc.build_scaffold(spec, cfg.depth)
    grid = int(cfg.get("sup_grid", 256))
    rep = sc.geometry_report(scaf, grid, cfg.get("sup_max_level"))
    meta = {
        "depth": cfg.depth,
        "map": spec.to_dict(),
        "residual_tol": sc.RESIDUAL_TOL,
        "endpoint_tol": sc.ENDPOINT_TOL,
        "h_grid_cutoff": sc.H_GRID_CUTOFF,
        "sup_grid": grid,
    }
    columns = sc.GeometryReport.CSV_COLUMNS + ("gap_ratio_same_side", "gap_ratio_full_tail")
    return Report("geometry", cfg.echo(), columns, rep.rows, meta, {"summary": rep.summary})


def cmd_markov(cfg: RunConfig) -> Report:
    spec = resolve_map(cfg.get("map"))
    k = int(cfg.get("word_length", 3))
    cap = cfg.get("level_cap")
    samples = int(cfg.get("samples", 9))
    if k < 1:
        raise ConfigError("word_length must be positive")
    part = markov.build_partition(sc.build_scaffold(spec, cfg.depth + 1), cfg.depth)
    branches = markov.branch_rows(part)
    worst = max(branches, key=lambda r: r["markov_defect"])
    if worst["markov_defect"] > MARKOV_DEFECT_TOL:
        raise InvariantViolation(f"Markov property: image of branch {worst['branch']} misses the partition by {worst['markov_defect']:.3g}")
    layers = markov.word_distortions(part, k, cap, samples)
    rows, violations = [], 0
    for length, cyls in layers.items():
        for c in cyls:
            violations += not markov.is_level_monotone(c.word)
            rows.append({"k": length, **c.to_row()})
    if violations:
        raise InvariantViolation(f"level monotonicity: {violations} admissible words decrease in level")
    meta = {
        "depth": cfg.depth,
        "map": spec.to_dict(),
        "word_length": k,
        "level_cap": cap,
        "samples": samples,
        "boundary_tol": markov.BOUNDARY_TOL,
        "markov_defect_tol": MARKOV_DEFECT_TOL,
        "level_monotone_violations": violations,
        "word_counts": {str(n): len(c) for n, c in layers.items()},
    }
    return Report("markov", cfg.echo(), ("k",) + markov.WORD_CSV_COLUMNS, rows, meta, {"branches": branches})


def cmd_conjugacy(cfg: RunConfig) -> Report:
    f = resolve_map(cfg.get("map"))
    g = resolve_map(cfg.get("source_map"), "source_map") if cfg.get("source_map") is not None else f
    scales = cfg.get("scales", [2.0**-10, 2.0**-11, 2.0**-12])
    grid_n = int(cfg.get("grid_n", qs.QS_GRID))
    caps = tuple(int(c) for c in cfg.get("word_caps", qs.WORD_CAPS))
    eps = float(cfg.get("eps_target", qs.DEFAULT_EPS))
    ctx = qs.build_context(f, g, cfg.depth, caps[-1], eps)
    rep = qs.qs_report(ctx, scales, grid_n, caps, strict=bool(cfg.get("strict", False)))
    n_def = int(cfg.get("defect_samples", 0))
    defects = None
    if n_def > 0:
        xs = np.random.default_rng(int(cfg.get("seed", 0))).uniform(-1.0, 1.0, n_def)
        lhs, bound = qs.conjugacy_defects(ctx, xs)
        bad = int(np.sum(lhs > bound))
        defects = {"samples": n_def, "violations": bad, "max_defect": float(lhs.max()), "max_bound": float(bound.max())}
        if bad:
            raise InvariantViolation(f"conjugacy equation: {bad} of {n_def} samples exceed the tracked error bound")
    meta = {
        "depth": cfg.depth,
        "map": f.to_dict(),
        "source_map": g.to_dict(),
        "grid_n": grid_n,
        "word_caps": list(caps),
        "eps_target": eps,
        "boundary_tol": markov.BOUNDARY_TOL,
        "reliability_fraction": qs.RELIABILITY_FRACTION,
        "M_hat": rep.M_hat,
        "all_reliable": rep.all_reliable,
        "conjugacy_defects": defects,
    }
    rows = [r.to_dict() for r in rep.rows]
    columns = qs.QS_CSV_COLUMNS + ("min_increment", "word_cap")
    return Report("conjugacy", cfg.echo(), columns, rows, meta)


def cmd_lemma3(cfg: RunConfig) -> Report:
    t = cfg.get("t", 2.0)
    Ks = cfg.get("K", [0.0])
    Ks = Ks if isinstance(Ks, list) else [Ks]
    try:
        rows = [{"t": float(t), "K": float(K), "lower_bound": sc.lemma3_solve(float(t), float(K))} for K in Ks]
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise ConfigError(f"t and K must be numbers: {exc}") from None
    meta = {"root_tol": 1e-3 * float(np.finfo(float).eps), "equation": "(w+1)(1+K/2) w^(t-1) = 1"}
    return Report("lemma3", cfg.echo(), ("t", "K", "lower_bound"), rows, meta)


HANDLERS = {
    "cascade": cmd_cascade,
    "geometry": cmd_geometry,
    "markov": cmd_markov,
    "conjugacy": cmd_conjugacy,
    "lemma3": cmd_lemma3,
}


# -- entry point ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="renormlab", description="Renormalization diagnostics for unimodal maps.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--depth", type=int, help="override the config depth")
    p.add_argument("--format", choices=("json", "csv"), dest="fmt")
    p.add_argument("--out", help="output path (default: stdout)")
    return p


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, InvariantViolation):
        return EXIT_INVARIANT
    if isinstance(exc, (ConfigError, InvalidParameter)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.depth, args.fmt, args.out)
        report = HANDLERS[args.command](cfg)
        emit(report, cfg.fmt, cfg.out)
    except (RenormLabError, ValueError) as exc:
        code = exit_code(exc) if isinstance(exc, RenormLabError) else EXIT_CONFIG
        kind = {EXIT_CONFIG: "config error", EXIT_NUMERICAL: "numerical failure", EXIT_INVARIANT: "invariant violated"}[code]
        print(f"renormlab {args.command}: {kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
