"""Command-line driver: ``jacobs-ladder <command> [flags]``.

Configuration comes from an optional ``key=value`` file (``--config``) with
flags overriding it. Every command writes plain files under ``--out``;
floats are printed with 17 significant digits so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .generator import (BASE_SYSTEMS, TABULATED_PREFIX, enumerate_paths, make_base,
                        make_system, normalization_factors)
from .harness import SCHEMA, gram_matrix
from .hl_table import CacheError, build_table
from .ladder import (DEFAULT_C0, JacobsLadder, LadderConstants, build_tower,
                     calibrate_c0, smallness_bound)
from .suites import SUITES, SuiteContext, all_passed, run_suites
from .zeta_core import EULER_GAMMA, ZetaEngineConfig, hardy_z


class ConfigError(ValueError):
    """Invalid run configuration; the message names the field (and line)."""


@dataclass(frozen=True)
class RunConfig:
    T: float = 1e4
    k: int = 3
    s: int = 2
    a: float = -1.0
    l: float = 1.0
    base: str = "legendre"
    N: int = 8
    c0: float | str = DEFAULT_C0  # a number or "calibrate"
    quad_abs_tol: float = 1e-9
    rs_correction_order: int = 4
    cache_path: str = "hl_table.csv"
    seed: int = 0

    def validate(self) -> "RunConfig":
        checks = [
            ("k", self.k >= 1, "must be >= 1"),
            ("s", self.s >= 0, "must be >= 0"),
            ("N", self.N >= 0, "must be >= 0"),
            ("l", self.l > 0, "must be > 0"),
            ("T", self.T >= 100, "must be >= 100"),
            ("quad_abs_tol", self.quad_abs_tol > 0, "must be > 0"),
            ("rs_correction_order", 0 <= self.rs_correction_order <= 4, "must be in 0..4"),
            ("base", self.base in BASE_SYSTEMS or self.base.startswith(TABULATED_PREFIX),
             f"must be one of {sorted(BASE_SYSTEMS)} or {TABULATED_PREFIX}<csv>"),
            ("c0", self.c0 == "calibrate" or math.isfinite(self.c0),
             "must be a finite number or 'calibrate'"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{name}={getattr(self, name)!r}: {msg}")
        if not 2 * self.l < smallness_bound(self.T):
            raise ConfigError(f"l={self.l!r}: tower precondition 2l < 0.01 T/ln T "
                              f"= {smallness_bound(self.T):.6g} fails for T={self.T!r}")
        return self


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _TYPES[name]
    if name == "c0":
        return "calibrate" if raw.strip() == "calibrate" else float(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def read_config_file(path: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown field {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: field {key}: cannot parse {value!r}") from None
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for name in _TYPES:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if getattr(args, "path", None) is not None and getattr(args, "s", None) is None:
        values["s"] = len(args.path)
    try:
        cfg = RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    return f"{float(x):.17g}"


def dumps17(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps17(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps17(v, indent, _level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + dumps17(v, indent, _level + 1) for v in seq) \
            + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return json.dumps(str(x))  # strict JSON has no inf/nan
        return fmt(x)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_text(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def path_tag(path) -> str:
    return "-".join(str(p) for p in path) if path else "base"


def base_tag(base: str) -> str:
    if base.startswith(TABULATED_PREFIX):
        return "tabulated"
    return base


def grid(lo: float, hi: float, points: int) -> np.ndarray:
    if points < 1:
        raise ConfigError(f"points={points}: must be >= 1")
    if points == 1:
        return np.array([float(lo)])
    if not hi > lo:
        raise ConfigError(f"grid [{lo}, {hi}] is empty")
    return np.linspace(lo, hi, points)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def make_ladder(cfg: RunConfig, t_max: float) -> JacobsLadder:
    zcfg = ZetaEngineConfig(rs_correction_order=cfg.rs_correction_order)
    cache = cfg.cache_path or None
    table = build_table(t_max, config=zcfg, cache_path=cache, abs_tol=cfg.quad_abs_tol)
    ladder = JacobsLadder(table, LadderConstants(EULER_GAMMA, DEFAULT_C0))
    if cfg.c0 == "calibrate":
        c0 = calibrate_c0(ladder, (1e3, max(cfg.T, 2e3)))
        ladder = JacobsLadder(ladder.table, LadderConstants(EULER_GAMMA, c0))
    elif cfg.c0 != DEFAULT_C0:
        ladder = JacobsLadder(table, LadderConstants(EULER_GAMMA, float(cfg.c0)))
    return ladder


def _coverage(cfg: RunConfig) -> float:
    return max(cfg.T + 2 * cfg.l, 1e4) + 1.0


def cmd_ladder(cfg: RunConfig, args) -> int:
    lo = cfg.T if args.t_min is None else args.t_min
    hi = cfg.T + 2 * cfg.l if args.t_max is None else args.t_max
    t = grid(lo, hi, args.points)
    ladder = make_ladder(cfg, max(_coverage(cfg), float(t.max()) + 1.0))
    if t.min() < ladder.T_lo:
        raise ConfigError(f"t_min={t.min()!r}: the ladder is defined for t >= {ladder.T_lo:.6g}")
    y = np.atleast_1d(ladder.phi1(t))
    zt = np.atleast_1d(ladder.ztilde_sq(t))
    z = np.abs(hardy_z(t, ladder.config))
    rows = ["t,phi1,ztilde_sq,abs_z"]
    rows += [",".join(map(fmt, r)) for r in zip(t, y, zt, z)]
    out = write_text(os.path.join(args.out, "ladder.csv"), "\n".join(rows) + "\n")
    print(out)
    return 0


def cmd_segments(cfg: RunConfig, args) -> int:
    ladder = make_ladder(cfg, _coverage(cfg))
    tower = build_tower(cfg.T, cfg.k, cfg.l, ladder)
    out = write_text(os.path.join(args.out, "tower.json"), dumps17(tower.to_json()) + "\n")
    print(out)
    return 0


def _paths(cfg: RunConfig, args) -> list[tuple]:
    if args.enumerate_all:
        return enumerate_paths(cfg.k, cfg.s)
    path = tuple(args.path) if args.path is not None else (1,) * cfg.s
    if len(path) != cfg.s:
        raise ConfigError(f"path={path_tag(path)}: length {len(path)} differs from s={cfg.s}")
    bad = [p for p in path if not 1 <= p <= cfg.k]
    if bad:
        raise ConfigError(f"path={path_tag(path)}: entries {bad} outside 1..k={cfg.k}")
    return [path]


def cmd_generate(cfg: RunConfig, args) -> int:
    paths = _paths(cfg, args)
    ladder = make_ladder(cfg, _coverage(cfg))
    base = make_base(cfg.base, cfg.a, cfg.l)
    tower = build_tower(cfg.T, cfg.k, cfg.l, ladder)
    t = grid(cfg.a, cfg.a + 2 * cfg.l, args.points)
    for path in paths:
        sys_ = make_system(base, path, cfg.k, cfg.T, ladder, tower)
        vals = sys_.members(cfg.N, t)
        if args.normalize:
            vals = vals * normalization_factors(sys_, cfg.N)
        head = (f"# generated v1 base={cfg.base} path={path_tag(path)} T={fmt(cfg.T)} "
                f"k={cfg.k} a={fmt(cfg.a)} l={fmt(cfg.l)}")
        rows = [head] + [",".join(map(fmt, (ti, *v))) for ti, v in zip(t, vals)]
        name = f"generated_{base_tag(cfg.base)}_{path_tag(path)}.csv"
        print(write_text(os.path.join(args.out, name), "\n".join(rows) + "\n"))
    return 0


def cmd_gram(cfg: RunConfig, args) -> int:
    paths = _paths(cfg, args)
    ladder = make_ladder(cfg, _coverage(cfg))
    base = make_base(cfg.base, cfg.a, cfg.l)
    tower = build_tower(cfg.T, cfg.k, cfg.l, ladder)
    ok = True
    for path in paths:
        sys_ = make_system(base, path, cfg.k, cfg.T, ladder, tower)
        g = gram_matrix(sys_, cfg.N, normalize=args.normalize)
        rep = g.as_report({"path": list(path), "T": cfg.T, "k": cfg.k, "N": cfg.N,
                           "base": cfg.base, "normalized": bool(args.normalize)})
        ok &= bool(rep["pass"])
        name = f"gram_{base_tag(cfg.base)}_{path_tag(path)}.json"
        print(write_text(os.path.join(args.out, name), dumps17(rep) + "\n"))
    return 0 if ok else 1


def cmd_verify(cfg: RunConfig, args) -> int:
    ladder = make_ladder(cfg, _coverage(cfg))
    ctx = SuiteContext(ladder, T=cfg.T, k=cfg.k, s=cfg.s, a=cfg.a, l=cfg.l,
                       base=cfg.base, N=cfg.N, seed=cfg.seed)
    results = run_suites(ctx, args.only)
    failing = []
    for name, reports in results.items():
        write_text(os.path.join(args.out, f"{name}.json"),
                   dumps17({"schema": SCHEMA, "suite": name, "reports": reports}) + "\n")
        for i, rep in enumerate(reports):
            tag = f"{name}[{i}] {rep['kind']}"
            print(f"{'PASS' if rep['pass'] else 'FAIL'} {tag}")
            if not rep["pass"]:
                failing.append(tag)
    if failing:
        print(f"{len(failing)} failing check(s): {', '.join(failing)}", file=sys.stderr)
    return 0 if all_passed(results) else 1


def cmd_calibrate(cfg: RunConfig, args) -> int:
    lo = 1e3 if args.t_min is None else args.t_min
    hi = cfg.T if args.t_max is None else args.t_max
    if not hi > lo:
        raise ConfigError(f"calibration range [{lo}, {hi}] is empty")
    ladder = make_ladder(replace(cfg, c0=DEFAULT_C0), hi + 1.0)
    c0 = calibrate_c0(ladder, (lo, hi))
    rep = {"c0": c0, "T_range": [lo, hi], "reference": DEFAULT_C0}
    print(fmt(c0))
    write_text(os.path.join(args.out, "c0.json"), dumps17(rep) + "\n")
    return 0


COMMANDS = {
    "ladder": cmd_ladder,
    "segments": cmd_segments,
    "generate": cmd_generate,
    "gram": cmd_gram,
    "verify": cmd_verify,
    "calibrate-c0": cmd_calibrate,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _path_arg(text: str) -> tuple:
    if text.strip() == "":
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"path must be comma-separated integers, got {text!r}")


def _list_arg(text: str) -> list:
    return [x for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--T", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--s", type=int)
    common.add_argument("--a", type=float)
    common.add_argument("--l", type=float)
    common.add_argument("--base", help=f"{', '.join(sorted(BASE_SYSTEMS))} or {TABULATED_PREFIX}<csv>")
    common.add_argument("--N", type=int)
    common.add_argument("--c0", type=lambda x: x if x == "calibrate" else float(x),
                        help="additive ladder constant, or 'calibrate'")
    common.add_argument("--quad-abs-tol", dest="quad_abs_tol", type=float)
    common.add_argument("--rs-correction-order", dest="rs_correction_order", type=int)
    common.add_argument("--cache-path", dest="cache_path")
    common.add_argument("--seed", type=int)
    common.add_argument("--path", type=_path_arg, help="index path p1,p2,... (length s)")
    common.add_argument("--normalize", action="store_true")
    common.add_argument("--enumerate-all", action="store_true",
                        help="all k^s paths of generation s")
    common.add_argument("--out", default="results", help="output directory")

    parser = argparse.ArgumentParser(prog="jacobs-ladder", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("ladder", "calibrate-c0"):
            p.add_argument("--t-min", dest="t_min", type=float)
            p.add_argument("--t-max", dest="t_max", type=float)
        if name in ("ladder", "generate"):
            p.add_argument("--points", type=int, default=201)
        if name == "verify":
            p.add_argument("--only", type=_list_arg, help=f"comma list of {sorted(SUITES)}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CacheError as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
