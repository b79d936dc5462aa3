"""Config-driven experiment runner.

Subcommands: sample, pbm, rate-curve, gibbs, maxent, surface-check.
Every run writes one manifest (JSON, keys sorted) plus per-metric CSV
files; identical configs byte-reproduce all CSV bodies. Config values come
from a flat key = value file (via --config) overridden by flags.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 unreliable
estimate (outputs are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .analytic import mu_p, mu_q_beta, thresholds
from .entropy_rate import RateIdentityError
from .maxent import (
    MaxEntInfeasibleError,
    MaxEntUnboundedError,
    Regime,
    solve_nu_star,
)
from .measures import EmpiricalMeasure, Interval, ks_distance
from .rare_event import (
    ConditionalChainConfig,
    ConditioningError,
    conditional_marginals,
    estimate_rare_prob,
    pbm_marginals,
    wls_rate_slope,
)
from .sampling import RngStream, sample_gen_gaussian, sample_surface

EXPERIMENTS = ("sample", "pbm", "rate-curve", "gibbs", "maxent", "surface-check")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_UNRELIABLE = 4


class ConfigError(ValueError):
    pass


class UnreliableResult(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    p: float = 2.0
    q: float = 1.0
    n_list: tuple = (100,)
    beta: float | None = None
    epsilon: float | None = None
    budget: int = 10 ** 4
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1
    method: str = "tilted-is"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.budget < 10 ** 3:
            raise ConfigError("budget must be at least 1000")
        if not self.n_list or any(int(n) < 1 for n in self.n_list):
            raise ConfigError("n_list must hold positive dimensions")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        for name in ("p", "q"):
            v = float(getattr(self, name))
            if math.isnan(v) or v < 1.0:
                raise ConfigError(f"{name} must be >= 1 (or inf)")
            object.__setattr__(self, name, v)
        if self.experiment in ("rate-curve", "gibbs", "maxent"):
            if self.beta is None:
                raise ConfigError(f"{self.experiment} needs beta")
            if not self.q < self.p:
                raise ConfigError(f"{self.experiment} needs q < p")
            if math.isinf(self.p):
                raise ConfigError(f"{self.experiment} needs finite p")
        if self.experiment == "surface-check" and math.isinf(self.p):
            raise ConfigError("surface-check needs finite p")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.method not in ("direct", "tilted-is"):
            raise ConfigError("method must be 'direct' or 'tilted-is'")

    def effective_epsilon(self) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return 0.01 * float(self.beta) if self.experiment == "gibbs" else 0.0

    # -- flat key=value round trip -------------------------------------------

    def serialize(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if value is None:
                text = "none"
            elif key == "n_list":
                text = ",".join(str(int(v)) for v in value)
            elif isinstance(value, float):
                text = "inf" if math.isinf(value) else repr(value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse(text: str) -> "ExperimentConfig":
        return ExperimentConfig(**_parse_flat(text))

    def json_dict(self) -> dict:
        d = asdict(self)
        for name in ("p", "q"):
            d[name] = "inf" if math.isinf(d[name]) else d[name]
        d["n_list"] = list(self.n_list)
        return d

    def content_hash(self) -> str:
        blob = json.dumps(self.json_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _parse_flat(text: str) -> dict:
    """Flat config grammar: one `key = value` per line, `#` comments,
    integers, floats, `inf`, `none`, booleans, and comma-separated int
    lists (for n_list)."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip().strip('"')
        if key == "n_list":
            out[key] = tuple(int(v) for v in value.split(",") if v.strip())
        elif value.lower() == "none":
            out[key] = None
        elif value.lower() == "inf":
            out[key] = math.inf
        elif key in ("budget", "seed", "threads"):
            out[key] = int(value)
        elif key in ("p", "q", "beta", "epsilon"):
            out[key] = float(value)
        else:
            out[key] = value
    return out


# -- output helpers ------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_atomic(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_csv(path: str, header_block: dict, columns: list[str], rows) -> None:
    """CSV with a machine-readable `# key=value` header block and a
    mandatory column-name row; '.' decimal point, UTF-8."""
    lines = [f"# {k}={_fmt(v)}" for k, v in header_block.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


@dataclass
class RunResult:
    config: ExperimentConfig
    manifest: dict
    out_dir: str
    reliable: bool = True
    tables: dict = field(default_factory=dict)

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.out_dir, "manifest.json")


# -- experiment implementations -------------------------------------------------

def _map_entries(cfg: ExperimentConfig, fn):
    """Run fn(index, n) across n_list, optionally in a thread pool; results
    come back in n_list order regardless of completion order."""
    if cfg.threads == 1 or len(cfg.n_list) == 1:
        return [fn(i, n) for i, n in enumerate(cfg.n_list)]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        futures = [pool.submit(fn, i, n) for i, n in enumerate(cfg.n_list)]
        return [f.result() for f in futures]


def _run_sample(cfg: ExperimentConfig, out):
    base = mu_p(cfg.p)

    def entry(i, n):
        draws = sample_gen_gaussian(cfg.p, cfg.budget, RngStream(cfg.seed, i))
        ks = ks_distance(EmpiricalMeasure.from_samples(draws), base)
        name = f"draws_n{n}.csv"
        write_csv(
            os.path.join(out, name),
            {"experiment": "sample", "p": cfg.p, "n": n, "seed": cfg.seed, "stream": i},
            ["value"],
            ([v] for v in draws),
        )
        mhat = float(np.mean(np.abs(draws) ** cfg.p)) if not math.isinf(cfg.p) else float(
            np.max(np.abs(draws))
        )
        return (n, cfg.budget, ks, mhat, name)

    rows = _map_entries(cfg, entry)
    write_csv(
        os.path.join(out, "sample_stats.csv"),
        {"experiment": "sample", "p": cfg.p, "seed": cfg.seed},
        ["n", "draws", "ks_to_base", "m_p_hat", "draws_table"],
        rows,
    )
    tables = {"stats": "sample_stats.csv"}
    tables.update({f"draws_n{r[0]}": r[4] for r in rows})
    return tables, {}, {}, True


def _run_pbm(cfg: ExperimentConfig, out):
    base = mu_p(cfg.p)

    def entry(i, n):
        draws = pbm_marginals(cfg.p, n, 1, cfg.budget, "cone", RngStream(cfg.seed, i))[:, 0]
        ks = ks_distance(EmpiricalMeasure.from_samples(draws), base)
        return (n, cfg.budget, ks)

    rows = _map_entries(cfg, entry)
    write_csv(
        os.path.join(out, "pbm_ks.csv"),
        {"experiment": "pbm", "p": cfg.p, "k": 1, "seed": cfg.seed},
        ["n", "draws", "ks_to_base"],
        rows,
    )
    return {"pbm": "pbm_ks.csv"}, {"p": _json_exp(cfg.p)}, {}, True


def _run_rate_curve(cfg: ExperimentConfig, out):
    interval = Interval(0.0, float(cfg.beta) + cfg.effective_epsilon())
    solution = solve_nu_star(cfg.p, cfg.q, float(cfg.beta))

    def entry(i, n):
        return estimate_rare_prob(
            cfg.p, cfg.q, n, interval, cfg.method, cfg.budget, RngStream(cfg.seed, i)
        )

    estimates = _map_entries(cfg, entry)
    rows = [
        (e.n, e.log_prob, e.std_error, e.ess, e.n_samples, e.method, e.reliable)
        for e in estimates
    ]
    write_csv(
        os.path.join(out, "rate_curve.csv"),
        {
            "experiment": "rate-curve",
            "p": cfg.p,
            "q": cfg.q,
            "interval_lo": interval.lo,
            "interval_hi": interval.hi,
            "seed": cfg.seed,
            "method": cfg.method,
        },
        ["n", "log_prob", "std_error", "ess", "n_samples", "method", "reliable"],
        rows,
    )
    results: dict = {"analytic_rate": solution.rate}
    try:
        fit = wls_rate_slope(estimates)
        results.update(slope=fit.slope, intercept=fit.intercept, slope_se=fit.slope_se)
    except ValueError:
        results.update(slope=None, intercept=None, slope_se=None)
    analytic = solution.to_json_dict()
    analytic["p"] = _json_exp(analytic["p"])
    analytic["q"] = _json_exp(analytic["q"])
    reliable = all(e.reliable for e in estimates)
    return {"rate": "rate_curve.csv"}, analytic, results, reliable


def _run_gibbs(cfg: ExperimentConfig, out):
    eps = cfg.effective_epsilon()
    interval = Interval(0.0, float(cfg.beta) + eps)
    solution = solve_nu_star(cfg.p, cfg.q, float(cfg.beta))
    nu_star = solution.params.reduce() or solution.params
    base = mu_p(cfg.p)
    tables = {}
    stat_rows = []
    for i, n in enumerate(cfg.n_list):
        config = ConditionalChainConfig(n=n, target_interval=interval)
        coords, acc = conditional_marginals(
            cfg.p,
            cfg.q,
            n,
            interval,
            config,
            RngStream(cfg.seed, i),
            keep=cfg.budget,
            coord_indices=(0, n // 2),
        )
        name = f"gibbs_chain_n{n}.csv"
        write_csv(
            os.path.join(out, name),
            {
                "experiment": "gibbs",
                "p": cfg.p,
                "q": cfg.q,
                "n": n,
                "interval_lo": interval.lo,
                "interval_hi": interval.hi,
                "seed": cfg.seed,
                "stream": i,
            },
            ["coord_first", "coord_mid"],
            coords,
        )
        ks_star = ks_distance(EmpiricalMeasure.from_samples(coords[:, 0]), nu_star)
        ks_base = ks_distance(EmpiricalMeasure.from_samples(coords[:, 0]), base)
        pair = _two_sample_ks(coords[:, 0], coords[:, 1])
        stat_rows.append((n, cfg.budget, acc, ks_star, ks_base, pair, name))
        tables[f"chain_n{n}"] = name
    write_csv(
        os.path.join(out, "gibbs_stats.csv"),
        {"experiment": "gibbs", "p": cfg.p, "q": cfg.q, "seed": cfg.seed},
        ["n", "kept", "acceptance", "ks_to_nu_star", "ks_to_base", "ks_coord_pair", "chain_table"],
        stat_rows,
    )
    tables["stats"] = "gibbs_stats.csv"
    analytic = solution.to_json_dict()
    analytic["p"] = _json_exp(analytic["p"])
    analytic["q"] = _json_exp(analytic["q"])
    analytic["interval"] = [interval.lo, interval.hi]
    return tables, analytic, {}, True


def _run_maxent(cfg: ExperimentConfig, out):
    th = thresholds(cfg.p, cfg.q)
    focal = solve_nu_star(cfg.p, cfg.q, float(cfg.beta))
    grid = np.unique(
        np.concatenate(
            [
                np.linspace(0.1 * th.beta_small, 1.15 * th.beta_large, 40),
                [th.beta_small, th.beta_large, float(cfg.beta)],
            ]
        )
    )
    rows = []
    for b in grid:
        s = solve_nu_star(cfg.p, cfg.q, float(b))
        rows.append(
            (
                b,
                s.regime.value,
                s.params.kappa0,
                s.params.kappa_p,
                s.params.kappa_q,
                s.m_p_value,
                s.m_q_value,
                s.rate,
            )
        )
    write_csv(
        os.path.join(out, "maxent_curve.csv"),
        {"experiment": "maxent", "p": cfg.p, "q": cfg.q, "seed": cfg.seed},
        ["beta", "regime", "kappa0", "kappa_p", "kappa_q", "m_p", "m_q", "rate"],
        rows,
    )
    results = focal.to_json_dict()
    results["p"] = _json_exp(results["p"])
    results["q"] = _json_exp(results["q"])
    analytic = {
        "beta_small": th.beta_small,
        "beta_large": th.beta_large,
        "p": _json_exp(cfg.p),
        "q": _json_exp(cfg.q),
    }
    return {"curve": "maxent_curve.csv"}, analytic, results, True


def _run_surface_check(cfg: ExperimentConfig, out):
    def entry(i, n):
        pts, stats = sample_surface(cfg.p, n, cfg.budget, RngStream(cfg.seed, i))
        m = np.array(
            [np.sum(np.abs(pt.coords * n ** (1.0 / cfg.p)) ** (2.0 * cfg.p - 2.0)) / n for pt in pts]
        )
        lo_bound = min(1.0, n ** (1.0 - 2.0 / cfg.p))
        hi_bound = max(1.0, n ** (1.0 - 2.0 / cfg.p))
        ok = (
            stats.span() <= stats.span_bound() + 1e-9
            and float(m.min()) >= lo_bound - 1e-9
            and float(m.max()) <= hi_bound + 1e-9
        )
        return (
            n,
            cfg.budget,
            stats.span(),
            stats.span_bound(),
            float(m.min()),
            float(m.max()),
            lo_bound,
            hi_bound,
            ok,
        )

    rows = _map_entries(cfg, entry)
    write_csv(
        os.path.join(out, "surface_check.csv"),
        {"experiment": "surface-check", "p": cfg.p, "seed": cfg.seed},
        [
            "n",
            "batch",
            "log_w_span",
            "span_bound",
            "m2p2_min",
            "m2p2_max",
            "bound_lo",
            "bound_hi",
            "ok",
        ],
        rows,
    )
    reliable = all(r[-1] for r in rows)
    return {"surface": "surface_check.csv"}, {"p": _json_exp(cfg.p)}, {}, reliable


def _two_sample_ks(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.stats import ks_2samp

    return float(ks_2samp(a, b).statistic)


def _json_exp(v):
    return "inf" if (isinstance(v, float) and math.isinf(v)) else v


_RUNNERS = {
    "sample": _run_sample,
    "pbm": _run_pbm,
    "rate-curve": _run_rate_curve,
    "gibbs": _run_gibbs,
    "maxent": _run_maxent,
    "surface-check": _run_surface_check,
}


def run(config: ExperimentConfig) -> RunResult:
    """Dispatch an experiment, write its CSV tables and single manifest."""
    os.makedirs(config.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    tables, analytic, results, reliable = _RUNNERS[config.experiment](config, config.out_dir)
    manifest = {
        "config": config.json_dict(),
        "config_hash": config.content_hash(),
        "experiment": config.experiment,
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "tables": tables,
        "analytic": analytic,
        "results": results,
    }
    _write_atomic(
        os.path.join(config.out_dir, "manifest.json"),
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
    )
    return RunResult(
        config=config, manifest=manifest, out_dir=config.out_dir, reliable=reliable, tables=tables
    )


# -- argument parsing ------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpsphere",
        description="Experiments on empirical measures of scaled l^p spheres",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None, help="flat key=value config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", type=str, default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--p", type=str, default=None, help="exponent p (accepts 'inf')")
        sp.add_argument("--q", type=str, default=None, help="exponent q (accepts 'inf')")
        sp.add_argument("--n-list", type=str, default=None, help="comma-separated dimensions")
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--epsilon", type=float, default=None)
        sp.add_argument("--budget", type=int, default=None)
        sp.add_argument("--method", type=str, default=None, choices=("direct", "tilted-is"))
    return parser


def _config_from_args(args) -> ExperimentConfig:
    fields: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            fields.update(_parse_flat(fh.read()))
    fields["experiment"] = args.experiment
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "threads": args.threads,
        "beta": args.beta,
        "epsilon": args.epsilon,
        "budget": args.budget,
        "method": args.method,
    }
    if args.p is not None:
        overrides["p"] = math.inf if args.p.lower() == "inf" else float(args.p)
    if args.q is not None:
        overrides["q"] = math.inf if args.q.lower() == "inf" else float(args.q)
    if args.n_list is not None:
        overrides["n_list"] = tuple(int(v) for v in args.n_list.split(",") if v.strip())
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**fields)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
    except (ConfigError, TypeError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(config)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        RateIdentityError,
        MaxEntInfeasibleError,
        MaxEntUnboundedError,
        ConditioningError,
        FloatingPointError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not result.reliable:
        print("warning: unreliable estimate (low effective sample size)", file=sys.stderr)
        return EXIT_UNRELIABLE
    print(result.manifest_path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
