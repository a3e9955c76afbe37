"""Command-line front end: ``bcs <command> [flags]``.

Exit codes: 0 success, 1 usage or parameter error, 2 convergence or
accuracy failure. Results are JSON records; curves and ladders are CSV
files with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import asymptotics as asym
from . import fermi_ops as fo
from . import gap_solver as gs
from .errors import (AccuracyError, BCSError, BracketError, ContractError, ConvergenceError,
                     FitError, ParameterError, UnsupportedRegimeError)
from .linear_criterion import critical_temperature
from .potentials import parse_potential

EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE = 0, 1, 2
SCAN_COLUMNS = ("lambda", "mu", "T", "tc", "xi", "e_mu", "b_mu", "drift_tc", "drift_xi",
                "ratio", "flags")


class UsageError(Exception):
    pass


def _num(x) -> str:
    """17 significant digits, stable across runs."""
    if x is None:
        return ""
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return format(float(x), ".17g")


# -- configuration ------------------------------------------------------------

_FLOAT_KEYS = {"mu", "lambda", "temperature", "tol"}
_INT_KEYS = {"ellmax", "n_outer", "n_inner", "budget", "jobs", "max_iter"}
_LIST_KEYS = {"lambda_ladder", "mu_ladder", "T_ladder"}
_STR_KEYS = {"potential", "out", "csv", "out_dir"}
CONFIG_KEYS = _FLOAT_KEYS | _INT_KEYS | _LIST_KEYS | _STR_KEYS


@dataclass
class RunConfig:
    """Run parameters; every field is optional until a command needs it."""

    potential: str | None = None
    mu: float | None = None
    lam: float | None = None
    temperature: float | None = None
    lambda_ladder: list = field(default_factory=list)
    mu_ladder: list = field(default_factory=list)
    T_ladder: list = field(default_factory=list)
    ellmax: int = 8
    n_outer: int = 200
    n_inner: int = 240
    tol: float | None = None
    max_iter: int | None = None
    out: str | None = None
    csv: str | None = None
    out_dir: str | None = None
    budget: int = 100
    jobs: int | None = None

    _ALIAS = {"lambda": "lam"}

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        """Read ``key=value`` lines; ``#`` starts a comment, ladders are comma lists."""
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg.set(key, value)
        return cfg

    def set(self, key: str, value) -> None:
        if key not in CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        try:
            if key in _FLOAT_KEYS:
                value = float(value)
            elif key in _INT_KEYS:
                value = int(value)
            elif key in _LIST_KEYS:
                if isinstance(value, str):
                    value = [float(v) for v in value.split(",") if v.strip()]
                else:
                    value = [float(v) for v in value]
        except ValueError as exc:
            raise UsageError(f"invalid value for {key!r}: {value!r}") from exc
        setattr(self, self._ALIAS.get(key, key), value)

    def emit(self) -> str:
        """Normalised text form: known keys in sorted order, defaults omitted."""
        default = RunConfig()
        lines = []
        for key in sorted(CONFIG_KEYS):
            attr = self._ALIAS.get(key, key)
            val = getattr(self, attr)
            if val == getattr(default, attr):
                continue
            if key in _LIST_KEYS:
                val = ",".join(_num(v) for v in val)
            elif key in _FLOAT_KEYS:
                val = _num(val)
            lines.append(f"{key}={val}")
        return "\n".join(lines) + ("\n" if lines else "")

    def as_dict(self) -> dict:
        """Config keys with their set values (``None`` and empty ladders omitted)."""
        out = {}
        for key in sorted(CONFIG_KEYS):
            val = getattr(self, self._ALIAS.get(key, key))
            if val is not None and val != []:
                out[key] = val
        return out

    # validation helpers
    def need_potential(self):
        if not self.potential:
            raise UsageError("missing key 'potential'")
        try:
            return parse_potential(self.potential)
        except ParameterError as exc:
            raise UsageError(f"invalid value for 'potential': {exc}") from exc

    def need_mu(self) -> float:
        if self.mu is None:
            raise UsageError("missing key 'mu'")
        if not self.mu > 0:
            raise UsageError("mu must be positive")
        return self.mu

    def need_lambda(self) -> float:
        if self.lam is None:
            raise UsageError("missing key 'lambda'")
        if not self.lam > 0:
            raise UsageError("lambda must be positive")
        return self.lam

    def need_temperature(self, allow_zero=True) -> float:
        T = 0.0 if self.temperature is None else self.temperature
        if T < 0 or (not allow_zero and T == 0):
            raise UsageError("temperature must be positive" if not allow_zero
                             else "temperature must be >= 0")
        return T


# -- records ------------------------------------------------------------------

@dataclass
class ResultRecord:
    command: str
    config: dict
    outputs: dict
    files: list
    flags: list
    meta: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _value(x, status="ok"):
    return {"value": x, "status": status}


def _meta(t0):
    return {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "versions": {"bcsgap": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return str(path)


# -- commands -----------------------------------------------------------------

def cmd_tc(cfg: RunConfig):
    V, mu, lam = cfg.need_potential(), cfg.need_mu(), cfg.need_lambda()
    res = critical_temperature(V, mu, lam, tol=cfg.tol or 1e-6, n_outer=cfg.n_outer,
                               n_inner=cfg.n_inner)
    status = "converged" if res.grid_report.get("converged", True) else "grid-unconverged"
    out = {"tc": _value(res.tc, status), "bracket": _value(list(res.bracket), status),
           "channel": _value(res.channel), "monotone": _value(res.monotone)}
    files = []
    if cfg.csv:
        files.append(_write_csv(cfg.csv, ("T", "eigenvalue"), res.eigen_trace))
    return out, files, list(res.flags), status == "converged"


def cmd_emu(cfg: RunConfig):
    V, mu = cfg.need_potential(), cfg.need_mu()
    spec = fo.emu(V, mu, cfg.ellmax)
    status = "ok" if spec.truncation_stable else "truncation-extended"
    out = {"channels": _value([{"ell": ell, "e": e} for ell, e in spec.entries], status),
           "e_mu": _value(spec.e_mu, status), "argmin_ell": _value(spec.argmin_ell, status)}
    files = []
    if cfg.csv:
        files.append(_write_csv(cfg.csv, ("ell", "e"), spec.entries))
    return out, files, [], True


def cmd_bmu(cfg: RunConfig):
    V, mu, lam = cfg.need_potential(), cfg.need_mu(), cfg.need_lambda()
    r = fo.bmu(V, mu, lam, cfg.ellmax)
    out = {k: _value(v, "converged") for k, v in asdict(r).items() if k not in ("mu", "lam")}
    return out, [], [], True


def cmd_mmu(cfg: RunConfig):
    mu = cfg.need_mu()
    T = cfg.need_temperature(allow_zero=False)
    return {"m_mu": _value(fo.mmu(mu, T))}, [], [], True


def _solve(cfg, T):
    V, mu, lam = cfg.need_potential(), cfg.need_mu(), cfg.need_lambda()
    gap = gs.solve_gap(V, mu, lam, T, tol=cfg.tol or 1e-10, max_iter=cfg.max_iter or 20000,
                       n_outer=cfg.n_outer, n_inner=cfg.n_inner)
    return V, mu, lam, gap


def cmd_gap(cfg: RunConfig):
    T = cfg.need_temperature()
    V, mu, lam, gap = _solve(cfg, T)
    state = gs.derive_state(gap)
    status = "converged" if gap.converged else "not-converged"
    out = {"delta_fermi": _value(gap.fermi_value, status), "xi": _value(state.xi, status),
           "gamma_jump": _value(state.gamma_jump, status),
           "free_energy": _value(state.free_energy, status),
           "iterations": _value(gap.iterations), "residual": _value(gap.residual, status)}
    files = []
    if cfg.csv:
        rows = zip(gap.nodes, gap.values, state.alpha, state.gamma)
        files.append(_write_csv(cfg.csv, ("p", "delta", "alpha", "gamma"), rows))
    return out, files, list(gap.flags), gap.converged


def cmd_free_energy(cfg: RunConfig):
    T = cfg.need_temperature()
    V, mu, lam, gap = _solve(cfg, T)
    state = gs.derive_state(gap)
    x = gap.nodes**2 - mu
    if T > 0:
        gamma0 = 1.0 / (np.exp(np.clip(x / T, -700, 700)) + 1.0)
        normal = gs.free_energy((gamma0, np.zeros_like(x)), V, mu, lam, T, grid=gap.grid)
    else:
        normal = 0.0
    status = "converged" if gap.converged else "not-converged"
    out = {"free_energy": _value(state.free_energy, status),
           "normal_free_energy": _value(normal), "difference": _value(state.free_energy - normal,
                                                                        status)}
    return out, [], list(gap.flags), gap.converged


def _scan_point(V, mu, lam, T, cfg):
    flags = []
    tc = xi = e_mu = b = drift_tc = drift_xi = ratio = None
    try:
        tcr = critical_temperature(V, mu, lam, n_outer=cfg.n_outer, n_inner=cfg.n_inner,
                                   tol=cfg.tol or 1e-8)
        tc = tcr.tc
        flags += tcr.flags
        rep = fo.bmu(V, mu, lam, cfg.ellmax)
        e_mu, b = rep.e_mu, rep.b_mu
        try:
            gap = gs.solve_gap(V, mu, lam, T or 0.0, damping=1.0, tol=1e-11,
                               max_iter=cfg.max_iter or 20000, n_outer=cfg.n_outer,
                               n_inner=cfg.n_inner)
            xi = gs.energy_gap(gap)
            flags += gap.flags
            if not gap.converged:
                flags.append("gap not converged")
        except ContractError as exc:
            flags.append(f"gap skipped: {exc}")
        if b < 0 and tc:
            drift_tc = math.log(mu / tc) + math.pi / (2 * math.sqrt(mu) * b)
        if b < 0 and xi:
            drift_xi = math.log(mu / xi) + math.pi / (2 * math.sqrt(mu) * b)
        if tc and xi:
            ratio = xi / tc
    except (UnsupportedRegimeError, BracketError, AccuracyError) as exc:
        flags.append(f"{type(exc).__name__}: {exc}")
    return {"lambda": lam, "mu": mu, "T": T, "tc": tc, "xi": xi, "e_mu": e_mu, "b_mu": b,
            "drift_tc": drift_tc, "drift_xi": drift_xi, "ratio": ratio,
            "flags": ";".join(sorted(set(flags)))}


def _jobs(cfg):
    if cfg.jobs:
        return max(1, cfg.jobs)
    return max(1, int(os.environ.get("BCS_JOBS", "1")))


def cmd_scan(cfg: RunConfig):
    V = cfg.need_potential()
    lams = cfg.lambda_ladder or ([cfg.need_lambda()] if cfg.lam is not None else [])
    mus = cfg.mu_ladder or [cfg.need_mu()]
    temps = cfg.T_ladder or [cfg.temperature]
    if not lams:
        raise UsageError("missing key 'lambda' or 'lambda_ladder'")
    if any(x <= 0 for x in lams):
        raise UsageError("lambda must be positive")
    if any(m <= 0 for m in mus):
        raise UsageError("mu must be positive")
    points = [(mu, lam, T) for mu in mus for lam in lams for T in temps]
    if len(points) > cfg.budget:
        raise UsageError(f"scan has {len(points)} points, budget is {cfg.budget}")
    out_dir = Path(cfg.out_dir or "scan_out")
    marks = out_dir / "points"
    marks.mkdir(parents=True, exist_ok=True)

    def run(idx):
        path = marks / f"{idx:05d}.json"
        if path.exists():
            return
        mu, lam, T = points[idx]
        row = _scan_point(V, mu, lam, T, cfg)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(row, sort_keys=True, default=_json_default), encoding="utf-8")
        tmp.replace(path)

    pending = [i for i in range(len(points)) if not (marks / f"{i:05d}.json").exists()]
    with ThreadPoolExecutor(max_workers=_jobs(cfg)) as pool:
        list(pool.map(run, pending))
    rows = [json.loads((marks / f"{i:05d}.json").read_text(encoding="utf-8"))
            for i in range(len(points))]
    csv_path = _write_csv(out_dir / "scan.csv", SCAN_COLUMNS,
                          ([r[c] for c in SCAN_COLUMNS] for r in rows))
    summary = {"points": len(rows)}
    extrap = {}
    for mu in mus:
        for T in temps:
            sel = [r for r in rows if r["mu"] == mu and r["T"] == T]
            if len(sel) < 3:
                continue
            entry = {}
            for key in ("drift_tc", "drift_xi", "ratio"):
                pts = [(r["lambda"], r[key]) for r in sel if r[key] is not None]
                try:
                    entry[key] = vars(asym.extract_limit(pts))
                except FitError as exc:
                    entry[key] = {"error": str(exc)}
            label = f"mu={_num(mu)}" + ("" if T is None else f",T={_num(T)}")
            extrap[label] = entry
    if extrap:
        summary["extrapolation"] = extrap
        summary["targets"] = {"drift_tc": asym.DRIFT_TC_LIMIT, "drift_xi": asym.DRIFT_XI_LIMIT,
                              "ratio": asym.UNIVERSAL_RATIO}
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    flags = sorted({f for r in rows for f in r["flags"].split(";") if f})
    return ({"points": _value(len(rows)), "extrapolation": _value(extrap)},
            [csv_path, str(summary_path)], flags, True)


COMMANDS = {
    "tc": cmd_tc,
    "gap": cmd_gap,
    "emu": cmd_emu,
    "bmu": cmd_bmu,
    "mmu": cmd_mmu,
    "free-energy": cmd_free_energy,
    "scan": cmd_scan,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bcs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bcs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="file of key=value lines; flags take precedence")
        p.add_argument("--potential")
        p.add_argument("--mu", type=float)
        p.add_argument("--lambda", dest="lambda_", type=float)
        p.add_argument("--temperature", "-T", type=float)
        p.add_argument("--ellmax", type=int)
        p.add_argument("--n-outer", type=int)
        p.add_argument("--n-inner", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--out", help="write the JSON record here instead of stdout")
        p.add_argument("--csv", help="CSV file for curves or traces")
        if name == "scan":
            p.add_argument("--lambda-ladder")
            p.add_argument("--mu-ladder")
            p.add_argument("--T-ladder", dest="T_ladder")
            p.add_argument("--out-dir")
            p.add_argument("--budget", type=int)
            p.add_argument("--jobs", type=int)
    v = sub.add_parser("verify")
    v.add_argument("suite", choices=("fast", "full"))
    v.add_argument("--jobs", type=int)
    v.add_argument("--out")
    return parser


_FLAG_TO_KEY = {"lambda_": "lambda", "n_outer": "n_outer", "n_inner": "n_inner",
                "max_iter": "max_iter", "lambda_ladder": "lambda_ladder",
                "mu_ladder": "mu_ladder", "T_ladder": "T_ladder", "out_dir": "out_dir"}


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        cfg = RunConfig.parse(text)
    for name, value in vars(args).items():
        if name in ("command", "config", "suite") or value is None:
            continue
        cfg.set(_FLAG_TO_KEY.get(name, name), value)
    return cfg


def _emit(record: ResultRecord, path):
    text = record.to_json()
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def run_verify(args) -> int:
    from .verify import run_suite

    t0 = time.perf_counter()
    jobs = args.jobs or int(os.environ.get("BCS_JOBS", "1"))
    checks = run_suite(args.suite, jobs=jobs)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} criteria passed")
    if args.out:
        rec = ResultRecord("verify", {"suite": args.suite},
                           {f"criterion_{c.criterion}": {"measured": c.measured, "target": c.target,
                                                         "tolerance": c.tolerance,
                                                         "status": "pass" if c.passed else "fail"}
                            for c in checks}, [], [], _meta(t0))
        _emit(rec, args.out)
    return EXIT_OK if ok else EXIT_CONVERGENCE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        return run_verify(args)
    t0 = time.perf_counter()
    try:
        cfg = config_from_args(args)
        outputs, files, flags, ok = COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"bcs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, ContractError, UnsupportedRegimeError, FitError) as exc:
        print(f"bcs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, AccuracyError, BracketError) as exc:
        print(f"bcs: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except BCSError as exc:
        print(f"bcs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    record = ResultRecord(args.command, cfg.as_dict(),
                          outputs, files, flags, _meta(t0))
    _emit(record, cfg.out)
    return EXIT_OK if ok else EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
