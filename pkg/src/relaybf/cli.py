"""Seeded Monte Carlo sweeps driven by a JSON config.

Example config::

    {
      "base": {"n_relays": 10, "n_interferers": 2, "p_primary_dbm": 0,
               "p_secondary_dbm": 0, "p_interferer_dbm": -1, "noise_dbm": -20,
               "relay_cap_dbm": 1, "mu": 3, "imperfection_pct": 0},
      "sweep": {"noise_dbm": [-20, -10, 0, 10, 20]},
      "trials": 200, "seed": 1, "mode": "perfect",
      "outputs": {"path": "noise.csv", "format": "csv"}
    }

Usage: ``relaybf run --config noise.json --out noise.csv [--format csv|json]
[--threads N] [--seed S]``.  ``RELAYBF_THREADS`` overrides the worker count.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import rate
from .model import NetworkConfig, derive, generate_channels, make_uncertainty
from .optimizer import BisectionConfig, RobustMode, optimize
from .robust import robust_constants

SWEEPS = ("noise_dbm", "interferer_power_dbm", "relay_cap_dbm", "imperfection_pct")
COLUMNS = ("sweep_value", "trial", "gamma", "sinr_p1", "sinr_p2", "sinr_s1", "sinr_s2",
           "rate_p_min", "rate_s1", "rate_s2", "rank_one_ok", "iterations", "status")
NUMERIC = ("gamma", "sinr_p1", "sinr_p2", "sinr_s1", "sinr_s2", "rate_p_min", "rate_s1",
           "rate_s2", "rank_one_ok", "iterations")
THREADS_ENV = "RELAYBF_THREADS"

# default scenario
BASE_DEFAULTS = {
    "n_relays": 10,
    "n_interferers": 2,
    "p_primary_dbm": 0.0,
    "p_secondary_dbm": 0.0,
    "p_interferer_dbm": -1.0,
    "noise_dbm": -20.0,
    "relay_cap_dbm": 1.0,
    "mu": 3.0,
    "imperfection_pct": 0.0,
}
DEFAULT_TRIALS = 500


class ConfigError(ValueError):
    pass


def dbm_to_linear(x_dbm):
    """10^(x/10); every power shares the milliwatt reference."""
    y = np.power(10.0, np.asarray(x_dbm, dtype=float) / 10.0)
    return float(y) if y.ndim == 0 else y


@dataclass
class ExperimentSpec:
    base: dict = field(default_factory=lambda: dict(BASE_DEFAULTS))
    sweep_name: str = "noise_dbm"
    sweep_values: list = field(default_factory=lambda: [-20.0])
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    mode: str = "perfect"
    out_path: str | None = None
    out_format: str = "csv"
    rel_tol: float = 1e-3

    def __post_init__(self):
        unknown = set(self.base) - set(BASE_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown base fields: {sorted(unknown)}")
        self.base = {**BASE_DEFAULTS, **self.base}
        if self.sweep_name not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}, got {self.sweep_name!r}")
        if not self.sweep_values:
            raise ConfigError("sweep must list at least one value")
        try:
            self.sweep_values = [float(v) for v in self.sweep_values]
            for k in ("n_relays", "n_interferers"):
                self.base[k] = int(self.base[k])
            for k in set(BASE_DEFAULTS) - {"n_relays", "n_interferers"}:
                self.base[k] = float(self.base[k])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric value: {exc}") from None
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.mode not in ("perfect", "robust"):
            raise ConfigError("mode must be 'perfect' or 'robust'")
        if self.out_format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        if self.sweep_name == "imperfection_pct" and self.mode != "robust":
            raise ConfigError("an imperfection sweep needs mode 'robust'")
        try:
            for v in self.sweep_values:
                self.point_config(v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.mode == "robust":
            pcts = self.sweep_values if self.sweep_name == "imperfection_pct" else [self.base["imperfection_pct"]]
            if any(not 0 <= p < 100 for p in pcts):
                raise ConfigError("imperfection_pct must lie in [0, 100)")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {"base", "sweep", "trials", "seed", "mode", "outputs", "rel_tol"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        sweep = d.get("sweep", {"noise_dbm": [BASE_DEFAULTS["noise_dbm"]]})
        if not isinstance(sweep, dict) or len(sweep) != 1:
            raise ConfigError("sweep must hold exactly one of " + ", ".join(SWEEPS))
        (name, values), = sweep.items()
        if not isinstance(values, list):
            raise ConfigError("sweep values must be a list")
        outputs = d.get("outputs", {}) or {}
        if not isinstance(outputs, dict):
            raise ConfigError("outputs must be an object")
        base = d.get("base", {}) or {}
        if not isinstance(base, dict):
            raise ConfigError("base must be an object")
        return cls(base=dict(base), sweep_name=name, sweep_values=values,
                   trials=d.get("trials", DEFAULT_TRIALS), seed=d.get("seed", 0),
                   mode=d.get("mode", "perfect"), out_path=outputs.get("path"),
                   out_format=outputs.get("format", "csv"), rel_tol=float(d.get("rel_tol", 1e-3)))

    def to_dict(self) -> dict:
        return {"base": dict(self.base), "sweep": {self.sweep_name: list(self.sweep_values)},
                "trials": self.trials, "seed": self.seed, "mode": self.mode,
                "outputs": {"path": self.out_path, "format": self.out_format},
                "rel_tol": self.rel_tol}

    def point_params(self, value: float) -> dict:
        b = dict(self.base)
        if self.sweep_name == "noise_dbm":
            b["noise_dbm"] = value
        elif self.sweep_name == "interferer_power_dbm":
            b["p_interferer_dbm"] = value
        elif self.sweep_name == "relay_cap_dbm":
            b["relay_cap_dbm"] = value
        else:
            b["imperfection_pct"] = value
        return b

    def point_config(self, value: float) -> NetworkConfig:
        b = self.point_params(value)
        return NetworkConfig(
            n_relays=b["n_relays"], n_interferers=b["n_interferers"],
            p_primary=dbm_to_linear(b["p_primary_dbm"]),
            p_secondary=dbm_to_linear(b["p_secondary_dbm"]),
            p_interferer=dbm_to_linear(b["p_interferer_dbm"]),
            noise_var=dbm_to_linear(b["noise_dbm"]), mu=b["mu"],
            p_relay_max=dbm_to_linear(b["relay_cap_dbm"]))


def trial_seeds(seed: int, point: int, trial: int):
    """Independent streams for (channels, uncertainty, verification samples)."""
    return np.random.SeedSequence([seed, point, trial]).spawn(3)


def run_trial(spec: ExperimentSpec, point: int, trial: int) -> dict:
    value = spec.sweep_values[point]
    config = spec.point_config(value)
    s_chan, s_unc, s_ver = trial_seeds(spec.seed, point, trial)
    truth = generate_channels(config, s_chan)
    bc = BisectionConfig(rel_tol=spec.rel_tol)
    if spec.mode == "robust":
        rho = spec.point_params(value)["imperfection_pct"] / 100.0
        um = make_uncertainty(truth, config, "fractional", rho, seed=s_unc)
        config = um.apply_to(config)
        dq = derive(config, um.estimates)
        mode = RobustMode(robust_constants(um, config, dq), um.estimates,
                          seed=int(s_ver.generate_state(1)[0]))
        sol = optimize(dq, config, mode, bc)
    else:
        sol = optimize(derive(config, truth), config, "perfect", bc)
    sp, ss = sol.sinr_p, sol.sinr_s
    return {"sweep_value": value, "trial": trial, "gamma": sol.gamma,
            "sinr_p1": float(sp[0]), "sinr_p2": float(sp[1]),
            "sinr_s1": float(ss[0]), "sinr_s2": float(ss[1]),
            "rate_p_min": rate(float(min(sp))), "rate_s1": rate(float(ss[0])),
            "rate_s2": rate(float(ss[1])), "rank_one_ok": int(sol.rank_one_ok),
            "iterations": sol.iterations, "status": sol.status}


def _job(args):
    spec, point, trial = args
    return (point, trial), run_trial(spec, point, trial)


def resolve_threads(requested: int | None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    else:
        n = requested if requested is not None else 1
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def run(spec: ExperimentSpec, threads: int = 1) -> dict:
    """Every (point, trial) row plus per-point mean and standard error rows."""
    jobs = [(spec, p, t) for p in range(len(spec.sweep_values)) for t in range(spec.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            done = dict(ex.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        done = dict(map(_job, jobs))
    rows = [done[k] for k in sorted(done)]
    return {"rows": rows, "aggregates": aggregate(rows, spec)}


def aggregate(rows, spec: ExperimentSpec):
    out = []
    for p, value in enumerate(spec.sweep_values):
        sel = [r for r in rows if r["sweep_value"] == value]
        if not sel:
            continue
        data = np.array([[float(r[c]) for c in NUMERIC] for r in sel])
        mean = data.mean(axis=0)
        se = data.std(axis=0, ddof=1) / np.sqrt(len(sel)) if len(sel) > 1 else np.zeros_like(mean)
        for label, vals in (("mean", mean), ("stderr", se)):
            row = {"sweep_value": value, "trial": label, "status": f"aggregate_n{len(sel)}"}
            row.update({c: float(v) for c, v in zip(NUMERIC, vals)})
            out.append(row)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(COLUMNS)
    for r in result["rows"] + result["aggregates"]:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def to_json(result, spec: ExperimentSpec) -> str:
    meta = spec.to_dict()
    # the destination is not part of the experiment; leaving it out keeps copies identical
    meta["outputs"].pop("path")
    doc = {"spec": meta, "columns": list(COLUMNS),
           "rows": result["rows"], "aggregates": result["aggregates"]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_result(result, spec: ExperimentSpec, path: str, fmt: str):
    text = to_csv(result) if fmt == "csv" else to_json(result, spec)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def load_spec(path: str) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        raw = fh.read()
    try:
        d = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return ExperimentSpec.from_dict(d)


def build_parser():
    ap = argparse.ArgumentParser(prog="relaybf", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a sweep")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output path (overrides outputs.path)")
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--threads", type=int)
    r.add_argument("--seed", type=int)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        spec = load_spec(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.seed is not None:
            spec.seed = args.seed
        if args.format is not None:
            spec.out_format = args.format
        if args.out is not None:
            spec.out_path = args.out
        if not spec.out_path:
            raise ConfigError("no output path (use --out or outputs.path)")
        spec.__post_init__()
        threads = resolve_threads(args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = os.path.dirname(os.path.abspath(spec.out_path))
    if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
        print(f"error: cannot write output: {out_dir} is not a writable directory", file=sys.stderr)
        return 3
    result = run(spec, threads)
    try:
        write_result(result, spec, spec.out_path, spec.out_format)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
