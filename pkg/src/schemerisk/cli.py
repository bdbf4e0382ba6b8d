"""Command-line front end: ``schemerisk {vco-curve,exec-vco,allocate,simulate}``."""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import allocation, montecarlo
from .annuity import DiscountBasis, basis_moments
from .lifetable import LifeTable, LifeTableError, MortalityBasis, load_life_table, pma92c10
from .scheme import (
    SchemeSpec,
    UndefinedVcoError,
    default_n_grid,
    executive_count,
    moments_from_y,
    vco_curve,
)

log = logging.getLogger("schemerisk")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

FLAG_SWITCHES = {"antithetic", "continuous"}


class ConfigError(ValueError):
    pass


def fmt(value) -> str:
    """12 significant digits, locale independent; blanks for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if not math.isfinite(v):
        return ""
    return f"{v:.12g}"


def _json_value(value):
    text = fmt(value)
    if text == "":
        return None
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(text)


def write_table(path: Path, columns: Sequence[str], rows: Sequence[Sequence], out_format: str) -> Path:
    if out_format == "json":
        path = path.with_suffix(".json")
        records = [{c: _json_value(v) for c, v in zip(columns, row)} for row in rows]
        path.write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")
    else:
        path = path.with_suffix(".csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    log.info("wrote %s (%d rows)", path, len(rows))
    return path


def parse_grid(text: str, cast=int) -> list:
    """``"1:10:1,100,500"`` -> sorted unique values; ``a:b:s`` is inclusive of b."""
    values = set()
    for item in filter(None, (part.strip() for part in text.split(","))):
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise ConfigError(f"range {item!r} must be start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0:
                raise ConfigError(f"range {item!r} needs a positive step")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values.update(cast(round(start + i * step, 10)) for i in range(max(count, 0)))
        else:
            values.add(cast(float(item)) if cast is int else cast(item))
    if not values:
        raise ConfigError("empty grid")
    return sorted(values)


def _int_value(text) -> int:
    v = float(text)
    if not v.is_integer():
        raise ConfigError(f"{text!r} is not an integer")
    return int(v)


def parse_bases(ratings: str | None, scenarios: str | None) -> list[MortalityBasis]:
    if scenarios:
        pairs = []
        for item in scenarios.split(","):
            r, _, w = item.partition(":")
            if not w:
                raise ConfigError(f"scenario {item!r} must be rating:weight")
            pairs.append((float(r), float(w)))
        return [MortalityBasis.from_pairs(pairs)]
    values = [float(v) for v in (ratings or "0").split(",") if v.strip()]
    if not values:
        raise ConfigError("no ratings given")
    return [MortalityBasis.two_point(r) for r in values]


def basis_name(basis: MortalityBasis) -> str:
    if basis.is_deterministic and basis.ratings[0] == 0:
        return "r=0"
    if len(basis.scenarios) == 2 and basis.weights == (0.5, 0.5) and basis.ratings[0] == -basis.ratings[1]:
        return f"r={abs(basis.ratings[0]):g}"
    return "mixture:" + ";".join(f"{r:g}@{w:g}" for r, w in basis.scenarios)


def read_benefits(path: str) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise LifeTableError(f"cannot read benefits file: {exc}") from None
    if not rows or "benefit" not in rows[0]:
        raise LifeTableError(f"{path}: expected a 'benefit' column")
    try:
        values = np.array([float(r["benefit"]) for r in rows])
    except ValueError as exc:
        raise LifeTableError(f"{path}: {exc}") from None
    if np.any(values <= 0) or np.any(~np.isfinite(values)):
        raise LifeTableError(f"{path}: benefits must be positive")
    return values


@dataclass
class RunConfig:
    """Validated settings shared by all subcommands."""

    table: LifeTable
    discount: DiscountBasis
    x: float
    ret: float
    bases: list[MortalityBasis]
    out: Path
    out_format: str
    n_grid: list[int] | None = None
    alpha: float | None = None
    k: list[float] = field(default_factory=list)
    benefits: np.ndarray | None = None
    args: argparse.Namespace | None = None
    summary: list[str] = field(default_factory=list)

    def spec(self, n_members: int | None = None, k: float | None = None) -> SchemeSpec:
        if self.benefits is not None:
            return SchemeSpec.explicit(self.benefits, self.x, self.ret)
        if self.alpha is not None:
            kk = k if k is not None else (self.k[0] if self.k else 1.0)
            return SchemeSpec.executive(n_members, self.alpha, kk, self.x, self.ret)
        return SchemeSpec.homogeneous(n_members, 1.0, self.x, self.ret)


def build_config(args: argparse.Namespace) -> RunConfig:
    try:
        discount = DiscountBasis(float(args.delta))
        x, ret = float(args.age), float(args.retire)
        if x > ret:
            raise ConfigError(f"age {x} is after retirement age {ret}")
        bases = parse_bases(args.rating, args.scenarios)
        n_grid = parse_grid(args.n_grid, _int_value) if args.n_grid is not None else None
        if n_grid is not None and n_grid[0] < 1:
            raise ConfigError("N values must be positive")
        alpha = float(args.alpha) if args.alpha is not None else None
        if alpha is not None and not 0 <= alpha <= 1:
            raise ConfigError("alpha must lie in [0, 1]")
        ks = parse_grid(args.k, float) if args.k is not None else []
        if any(k < 1 for k in ks):
            raise ConfigError("k must be >= 1")
        if args.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {args.format!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    table = load_life_table(args.table) if args.table else pma92c10()
    benefits = read_benefits(args.benefits) if getattr(args, "benefits", None) else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return RunConfig(
        table=table, discount=discount, x=x, ret=ret, bases=bases, out=out,
        out_format=args.format, n_grid=n_grid, alpha=alpha, k=ks, benefits=benefits, args=args,
    )


def _curve_note(n: np.ndarray, vco: np.ndarray) -> str:
    picks = [i for i, v in enumerate(n.tolist()) if v in (100, 500)] or [len(n) - 1]
    return ", ".join(f"Vco(N={n[i]}) = {vco[i]:.2%}" for i in picks)


def cmd_vco_curve(cfg: RunConfig) -> list[Path]:
    grid = cfg.n_grid or default_n_grid()
    template = SchemeSpec.homogeneous(1, 1.0, cfg.x, cfg.ret)
    rows = []
    for basis in cfg.bases:
        curve = vco_curve(template, basis, cfg.table, cfg.discount, grid)
        name = basis_name(basis)
        rows += [(name, n, v, s) for n, v, s in curve.rows()]
        cfg.summary.append(f"{name}: " + _curve_note(curve.n, curve.vco) + f"; floor {curve.systematic_vco[0]:.2%}")
    return [write_table(cfg.out / "vco_curve", ["basis", "N", "vco", "systematic_vco"], rows, cfg.out_format)]


def cmd_exec_vco(cfg: RunConfig) -> list[Path]:
    grid = cfg.n_grid or default_n_grid()
    alpha = 0.05 if cfg.alpha is None else cfg.alpha
    ks = cfg.k or [1.0, 2.0, 5.0, 10.0, 20.0]
    exact = not cfg.args.continuous
    rows = []
    for basis in cfg.bases:
        name = basis_name(basis)
        for k in ks:
            template = SchemeSpec.executive(1, alpha, k, cfg.x, cfg.ret)
            curve = vco_curve(template, basis, cfg.table, cfg.discount, grid, exact_headcount=exact)
            for n, v, s in curve.rows():
                n_exec = executive_count(alpha, n) if exact else None
                rows.append((name, alpha, k, n, n_exec, v, s))
            cfg.summary.append(f"{name} k={k:g}: " + _curve_note(curve.n, curve.vco))
    columns = ["basis", "alpha", "k", "N", "n_exec", "vco", "systematic_vco"]
    return [write_table(cfg.out / "exec_vco", columns, rows, cfg.out_format)]


ALLOCATION_COLUMNS = [
    "basis", "N", "alpha", "k", "n_exec", "total_sd", "pi_norm", "pi_exec", "lambda_exec",
    "rho_exec", "systematic_per_norm", "systematic_per_exec", "idiosyncratic_per_norm",
    "idiosyncratic_per_exec", "systematic_total", "degenerate",
]
SHARE_COLUMNS = ["basis", "N", "alpha", "k", "n_exec", "lambda_exec", "rho_exec"]


def cmd_allocate(cfg: RunConfig) -> list[Path]:
    args = cfg.args
    grid = [None] if cfg.benefits is not None else (cfg.n_grid or [100, 500])
    alpha = 0.05 if cfg.alpha is None else cfg.alpha
    k = cfg.k[0] if cfg.k else 5.0
    k_grid = parse_grid(args.k_grid, float) if args.k_grid else list(map(float, range(1, 21)))
    alpha_grid = parse_grid(args.alpha_grid, float) if args.alpha_grid else [i / 100 for i in range(51)]
    if min(k_grid) < 1 or not 0 <= min(alpha_grid) <= max(alpha_grid) <= 1:
        raise ConfigError("k grid must be >= 1 and alpha grid inside [0, 1]")

    report_rows, member_rows, k_rows, a_rows = [], [], [], []
    for basis in cfg.bases:
        name = basis_name(basis)
        y = basis_moments(cfg.table, basis, cfg.discount, cfg.x, cfg.ret)
        for n in grid:
            if cfg.benefits is not None:
                spec = SchemeSpec.explicit(cfg.benefits, cfg.x, cfg.ret)
            else:
                spec = SchemeSpec.executive(n, alpha, k, cfg.x, cfg.ret)
            rep = allocation.allocate(spec, y)
            report_rows.append((
                name, spec.n_members, spec.alpha, spec.k, spec.n_exec, rep.total_sd, rep.pi_norm,
                rep.pi_exec, rep.lambda_exec, rep.rho_exec, rep.systematic_per_norm,
                rep.systematic_per_exec, rep.idiosyncratic_per_norm, rep.idiosyncratic_per_exec,
                spec.total_benefit * math.sqrt(y.cov_pair),
                rep.degenerate,
            ))
            if rep.degenerate:
                cfg.summary.append(f"{name} N={spec.n_members}: no risk to allocate")
            elif rep.lambda_exec is not None:
                cfg.summary.append(
                    f"{name} N={spec.n_members}: SD {rep.total_sd:.4g}, executive share "
                    f"{rep.lambda_exec:.2%} (benefit-weighted {rep.rho_exec:.2%})"
                )
            else:
                cfg.summary.append(f"{name} N={spec.n_members}: SD {rep.total_sd:.4g}")
            if cfg.benefits is not None:
                for i, b in enumerate(spec.benefits):
                    if rep.degenerate:
                        member_rows.append((name, i + 1, b, None, None, None))
                    else:
                        member_rows.append((name, i + 1, b, rep.pi[i], rep.systematic[i], rep.idiosyncratic[i]))
                continue
            for row in allocation.allocation_vs_k_curve(spec, basis, cfg.table, cfg.discount, k_grid):
                k_rows.append((name, row.n_members, row.alpha, row.k, row.n_exec, row.lambda_exec, row.rho_exec))
            for row in allocation.allocation_vs_alpha_curve(spec, basis, cfg.table, cfg.discount, alpha_grid):
                a_rows.append((name, row.n_members, row.alpha, row.k, row.n_exec, row.lambda_exec, row.rho_exec))

    paths = [write_table(cfg.out / "allocation", ALLOCATION_COLUMNS, report_rows, cfg.out_format)]
    if cfg.benefits is not None:
        columns = ["basis", "member", "benefit", "pi", "systematic", "idiosyncratic"]
        paths.append(write_table(cfg.out / "allocation_members", columns, member_rows, cfg.out_format))
    else:
        paths.append(write_table(cfg.out / "allocation_vs_k", SHARE_COLUMNS, k_rows, cfg.out_format))
        paths.append(write_table(cfg.out / "allocation_vs_alpha", SHARE_COLUMNS, a_rows, cfg.out_format))
    return paths


SIMULATION_COLUMNS = ["basis", "N", "quantity", "analytic", "empirical", "se", "z", "within_3se"]


def _compare(analytic: float, empirical: float, se: float) -> tuple[float | None, str]:
    if not (math.isfinite(se) and se > 0):
        if math.isfinite(se) and se == 0 and math.isclose(analytic, empirical, rel_tol=1e-9, abs_tol=1e-12):
            return 0.0, "pass"
        return None, "undefined"
    z = (empirical - analytic) / se
    return z, "pass" if abs(z) <= 3 else "fail"


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    args = cfg.args
    if cfg.benefits is not None:
        n_members = len(cfg.benefits)
    else:
        grid = cfg.n_grid or [100]
        if len(grid) != 1:
            raise ConfigError("simulate takes a single N")
        n_members = grid[0]
    if cfg.alpha is not None and len(cfg.k) > 1:
        raise ConfigError("simulate takes a single k")
    try:
        sim_cfg = montecarlo.SimulationConfig(
            n_paths=_int_value(args.paths), seed=_int_value(args.seed), antithetic=bool(args.antithetic),
            chunk_size=_int_value(args.chunk_size), workers=_int_value(args.workers),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    rows, meta = [], []
    spec = cfg.spec(n_members)
    for i, basis in enumerate(cfg.bases):
        name = basis_name(basis)
        y = basis_moments(cfg.table, basis, cfg.discount, spec.x, spec.ret)
        exact = moments_from_y(spec, y)
        rep = allocation.allocate(spec, y)
        res = montecarlo.simulate(spec, basis, cfg.table, cfg.discount, sim_cfg)
        emp = res.moments
        pairs = [
            ("mean", exact.expected, emp.mean, emp.se_mean),
            ("sd", exact.sd, emp.sd, emp.se_sd),
            ("vco", exact.vco, emp.vco, emp.se_vco),
        ]
        offsets = {"exec": (0, spec.n_exec), "norm": (spec.n_exec, spec.n_members), "all": (0, spec.n_members)}
        for sec_name, est in res.sections.items():
            if rep.degenerate:
                a_cap = a_share = float("nan")
            elif sec_name in offsets:
                lo, hi = offsets[sec_name]
                a_cap = math.fsum(rep.pi[lo:hi])
                a_share = a_cap / rep.total_sd
            else:
                m = int(sec_name.split("_")[1]) - 1
                a_cap = rep.pi[m]
                a_share = a_cap / rep.total_sd
            pairs.append((f"capital_{sec_name}", a_cap, est.capital, est.se_capital))
            pairs.append((f"share_{sec_name}", a_share, est.share, est.se_share))
        flags = []
        for quantity, a, e, se in pairs:
            z, flag = _compare(a, e, se)
            rows.append((name, spec.n_members, quantity, a, e, se, z, flag))
            flags.append(flag)
        cfg.summary.append(
            f"{name} N={spec.n_members}: {flags.count('pass')}/{len(flags)} quantities within 3 SE"
            + (f", {flags.count('fail')} outside" if "fail" in flags else "")
        )
        if args.dump_paths:
            dump = cfg.out / (f"paths_{i}.csv" if len(cfg.bases) > 1 else "paths.csv")
            montecarlo.write_paths_csv(res, dump)
        meta.append({"basis": name, "n_paths": sim_cfg.n_paths, "seed": sim_cfg.seed,
                     "chunk_size": sim_cfg.chunk_size, "antithetic": sim_cfg.antithetic,
                     "generator": "PCG64, SeedSequence(seed) child spawn_key=(chunk,)"})

    paths = [write_table(cfg.out / "simulation", SIMULATION_COLUMNS, rows, cfg.out_format)]
    meta_path = cfg.out / "simulation_meta.json"
    meta_path.write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    return paths + [meta_path]


COMMANDS = {
    "vco-curve": cmd_vco_curve,
    "exec-vco": cmd_exec_vco,
    "allocate": cmd_allocate,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; command-line flags override it")
    common.add_argument("--table", help="life table CSV with header age,qx (default: bundled PMA92C10)")
    common.add_argument("--delta", default="0.04", help="force of interest (default 0.04)")
    common.add_argument("--age", default="40", help="common member age (default 40)")
    common.add_argument("--retire", default="65", help="retirement age (default 65)")
    common.add_argument("--rating", default="0", help="comma list of r; each gives the +/-r two-point basis")
    common.add_argument("--scenarios", help="general basis as rating:weight,... (overrides --rating)")
    common.add_argument("--alpha", help="executive fraction")
    common.add_argument("--k", help="executive benefit multiple(s), comma list or a:b:step")
    common.add_argument("--n-grid", dest="n_grid", help="member counts, e.g. 1:1000:1,1000:10000:100")
    common.add_argument("--benefits", help="CSV with a 'benefit' column (explicit benefit vector)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", default="csv", help="csv or json")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="schemerisk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("vco-curve", parents=[common], help="Vco of a homogeneous scheme against N")
    p = sub.add_parser("exec-vco", parents=[common], help="Vco against N for executive multiples k")
    p.add_argument("--continuous", action="store_true", help="use f(alpha, k) instead of rounded headcounts")
    p = sub.add_parser("allocate", parents=[common], help="Euler allocation report and share curves")
    p.add_argument("--k-grid", dest="k_grid", help="k values for the share-vs-k curve (default 1:20:1)")
    p.add_argument("--alpha-grid", dest="alpha_grid", help="alpha values for the share-vs-alpha curve")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of the analytic values")
    p.add_argument("--paths", default="1000000")
    p.add_argument("--seed", default="0")
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--chunk-size", dest="chunk_size", default=str(montecarlo.DEFAULT_CHUNK))
    p.add_argument("--workers", default="1")
    p.add_argument("--dump-paths", dest="dump_paths", action="store_true", help="write paths.csv")
    return parser


def config_argv(path: str, command: str) -> list[str]:
    """Turn a config file into flags. Keys from [defaults] and [<command>] apply."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if not text.lstrip().startswith("["):
            text = "[defaults]\n" + text
        cp.read_string(text)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    argv = []
    for section in ("defaults", command):
        if not cp.has_section(section):
            continue
        for key, value in cp.items(section):
            flag = "--" + key.replace("_", "-")
            if key.replace("-", "_") in FLAG_SWITCHES or key.replace("_", "-") == "dump-paths":
                if value.strip().lower() in ("1", "true", "yes", "on"):
                    argv.append(flag)
            else:
                argv += [flag, value]
    return argv


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.config:
            extra = config_argv(args.config, args.command)
            args = parser.parse_args([args.command] + extra + argv[1:])
        cfg = build_config(args)
        paths = COMMANDS[args.command](cfg)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"schemerisk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LifeTableError, UndefinedVcoError, OSError) as exc:
        print(f"schemerisk: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"schemerisk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in cfg.summary:
        print(line)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
