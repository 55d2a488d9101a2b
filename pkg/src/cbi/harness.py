"""Monte Carlo experiments: simulate, estimate, normalize, compare with the limit law.

Each replicate ``i`` draws from its own stream keyed by ``(master_seed, i)`` and
results are gathered by index, so serial and parallel runs give identical
reports.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import _kernels
from .estimate import UndefinedEstimator, cls_errors, wcls
from .limits import LimitKind, LimitLawSpec, sample_mixed_normal, sample_series_C0
from .model import CbiParams, DerivedParams, derive, limit_variances
from .rng import auxiliary_rng, replicate_rng
from .simulate import Scheme, simulate

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentReport",
    "STATISTICS",
    "empirical_charfn",
    "kolmogorov_sf",
    "ks_2samp",
    "ks_test",
    "run_experiment",
]

STATISTICS = (
    "T_B",
    "T_A",
    "pivot_B",
    "pivot_A",
    "C0_B",
    "C0_A",
    "wcls_pivot_B",
    "wcls_pivot_A",
)

MIN_KS_SAMPLE = 100


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def kolmogorov_sf(x: float, terms: int = 40) -> float:
    """Survival function of the Kolmogorov distribution (limit law of ``sqrt(m) D``)."""
    if terms < 10:
        raise ValueError("use at least 10 series terms")
    if x <= 0:
        return 1.0
    k = np.arange(1, terms + 1)
    if x < 1.0:
        # theta-function form converges fast for small x
        cdf = math.sqrt(2 * math.pi) / x * np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * x * x)).sum()
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    signs = np.where(k % 2 == 1, 1.0, -1.0)
    return float(min(1.0, max(0.0, 2.0 * (signs * np.exp(-2.0 * k * k * x * x)).sum())))


def ks_test(sample, cdf):
    """Two-sided one-sample KS statistic and asymptotic p-value; ``cdf`` is a vectorized callable."""
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("KS test needs a nonempty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    D = float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))
    return D, kolmogorov_sf(math.sqrt(m) * D)


def ks_2samp(a, b):
    """Two-sample KS statistic and asymptotic p-value (ties handled exactly)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("KS test needs nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / n
    fb = np.searchsorted(b, grid, side="right") / m
    D = float(np.max(np.abs(fa - fb)))
    return D, kolmogorov_sf(math.sqrt(n * m / (n + m)) * D)


def empirical_charfn(sample, theta_grid) -> np.ndarray:
    """``(1/m) sum_j exp(i theta x_j)`` on each grid point."""
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    out = np.empty(theta.size, dtype=complex)
    for j, t in enumerate(theta):
        tx = t * x
        out[j] = complex(np.cos(tx).mean(), np.sin(tx).mean())
    return out


# ---------------------------------------------------------------------------
# configuration


_CONFIG_FIELDS = {
    "params",
    "n",
    "replicates",
    "master_seed",
    "statistics",
    "scheme",
    "substeps",
    "reference_draws",
    "series_tol",
    "workers",
}


@dataclass(frozen=True)
class ExperimentConfig:
    params: CbiParams
    n: int
    replicates: int
    master_seed: int
    statistics: tuple = STATISTICS
    scheme: str = Scheme.EXACT_CIR.value
    substeps: int = 200
    reference_draws: int = 100_000
    series_tol: float = 1e-4
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "statistics", tuple(self.statistics))
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme).value)
        except ValueError:
            raise ConfigError(f"unknown scheme {self.scheme!r}") from None
        for name in ("n", "replicates", "master_seed", "substeps", "reference_draws", "workers"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.replicates < 1:
            raise ConfigError(f"replicates must be at least 1, got {self.replicates}")
        if self.n < 1:
            raise ConfigError(f"n must be at least 1, got {self.n}")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.substeps < 1 or self.reference_draws < 1 or self.workers < 1:
            raise ConfigError("substeps, reference_draws and workers must be positive")
        if not self.series_tol > 0:
            raise ConfigError("series_tol must be positive")
        unknown = set(self.statistics) - set(STATISTICS)
        if unknown or not self.statistics:
            raise ConfigError(f"statistics must be a nonempty subset of {STATISTICS}, got {self.statistics}")
        d = derive(self.params)
        if not d.B > 0:
            raise ConfigError(f"experiments need a supercritical model (B > 0), got B={d.B}")
        p = self.params
        if self.scheme == Scheme.EXACT_CIR.value and not (p.c > 0 and p.mu.is_zero() and p.nu.is_zero()):
            raise ConfigError("exact_cir needs c > 0 and mu = nu = 0")
        if self.scheme == Scheme.EXACT_PURE_IMMIGRATION.value and not (p.c == 0 and p.mu.is_zero()):
            raise ConfigError("exact_pure_immigration needs c = 0 and mu = 0")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        missing = {"params", "n", "replicates", "master_seed"} - set(d)
        if missing:
            raise ConfigError(f"missing experiment fields: {sorted(missing)}")
        kwargs = dict(d)
        try:
            kwargs["params"] = CbiParams.from_dict(d["params"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid params: {exc}") from exc
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "n": self.n,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "statistics": list(self.statistics),
            "scheme": self.scheme,
            "substeps": self.substeps,
            "reference_draws": self.reference_draws,
            "series_tol": self.series_tol,
            "workers": self.workers,
        }


# ---------------------------------------------------------------------------
# replicates


def _scaled(value, log_factor):
    """``value * exp(log_factor)`` without overflowing the intermediate factor."""
    if value is None:
        return None
    if value == 0:
        return 0.0
    return math.copysign(math.exp(math.log(abs(value)) + log_factor), value)


def _replicate(cfg: ExperimentConfig, d: DerivedParams, index: int) -> dict:
    path = simulate(cfg.params, cfg.n, cfg.scheme, replicate_rng(cfg.master_seed, index), cfg.substeps)
    X = path.values
    n = cfg.n
    B, A = d.B, d.A
    wanted = set(cfg.statistics)
    out = dict.fromkeys(cfg.statistics)
    try:
        err = cls_errors(X, d.rho, d.calA, path.innovations)
        dB, dA = err.B, err.A
    except UndefinedEstimator:
        dB = dA = None
    log_s1 = math.log(_kernels.neumaier_sum(X[:-1] + 1.0))
    log_n = math.log(n)
    log_w = math.log(X[-1]) - B * n if X[-1] > 0 else None
    table = {
        "T_B": (dB, 0.5 * B * n),
        "T_A": (dA, log_n - 0.5 * B * n),
        "pivot_B": (dB, 0.5 * log_s1),
        "pivot_A": (dA, log_n - 0.5 * log_s1),
        "C0_B": (dB, B * n),
        "C0_A": (dA, 0.5 * log_n),
    }
    for name, (value, log_factor) in table.items():
        if name in wanted:
            out[name] = _scaled(value, log_factor)
    if log_w is None:
        # the mixed and series targets are conditioned on the plug-in growth limit
        for name in ("T_B", "T_A", "C0_B"):
            if name in wanted:
                out[name] = None
    if wanted & {"wcls_pivot_B", "wcls_pivot_A"}:
        try:
            B_t, _, A_t = wcls(X, d)
            wB, wA = B_t - B, A_t - A
        except UndefinedEstimator:
            wB = wA = None
        if "wcls_pivot_B" in wanted:
            out["wcls_pivot_B"] = _scaled(wB, 0.5 * log_s1)
        if "wcls_pivot_A" in wanted:
            out["wcls_pivot_A"] = _scaled(wA, log_n - 0.5 * log_s1)
    return {"index": index, "values": out, "w_plug": None if log_w is None else math.exp(log_w)}


def _run_chunk(cfg_dict: dict, indices: list) -> list:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    d = derive(cfg.params)
    return [_replicate(cfg, d, i) for i in indices]


def _worker_count(requested: int) -> int:
    cap = os.environ.get("CBI_THREADS")
    if cap:
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"CBI_THREADS must be an integer, got {cap!r}") from None
    return max(1, requested)


def _gather(cfg: ExperimentConfig) -> list:
    workers = _worker_count(cfg.workers)
    indices = list(range(cfg.replicates))
    if workers == 1 or cfg.replicates < 2 * workers:
        d = derive(cfg.params)
        rows = [_replicate(cfg, d, i) for i in indices]
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        cfg_dict = cfg.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg_dict] * len(chunks), chunks))
        rows = [row for part in parts for row in part]
    rows.sort(key=lambda r: r["index"])
    return rows


# ---------------------------------------------------------------------------
# targets


def _normal_target(var: float):
    if not var > 0:
        return None
    sd = math.sqrt(var)
    return {"law": "normal", "mean": 0.0, "variance": var}, (lambda x: ndtr(np.asarray(x) / sd))


def _targets(cfg: ExperimentConfig, d: DerivedParams) -> dict:
    lv = limit_variances(d)
    normal_var = {
        "pivot_B": lv.cls_B,
        "pivot_A": lv.cls_A,
        "wcls_pivot_B": lv.wcls_B,
        "wcls_pivot_A": lv.wcls_A,
        "C0_A": lv.c0_A if d.C == 0 else 0.0,
    }
    return {name: _normal_target(var) for name, var in normal_var.items()}


def _reference_sample(cfg: ExperimentConfig, d: DerivedParams, name: str, w_plug: np.ndarray):
    """Reference draws for statistics whose limit depends on ``w``; None if degenerate."""
    rng = auxiliary_rng(cfg.master_seed, STATISTICS.index(name))
    if name in ("T_B", "T_A"):
        if d.C == 0:
            return None, None
        spec = LimitLawSpec(LimitKind.MIXED_NORMAL_S, d, w_plug)
        draws = sample_mixed_normal(spec, rng, cfg.reference_draws)[:, 0 if name == "T_B" else 1]
        return {"law": "mixed_normal_S", "component": 0 if name == "T_B" else 1, "w": "plug-in"}, draws
    if name == "C0_B":
        if d.C != 0:
            return None, None
        draws = sample_series_C0(d, cfg.params.nu, w_plug, cfg.series_tol, rng, cfg.reference_draws)
        return {"law": "series_C0", "tol": cfg.series_tol, "w": "plug-in"}, draws
    return None, None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    derived: DerivedParams
    statistics: dict
    runtime_seconds: float = field(default=0.0, compare=False)

    def to_dict(self, include_runtime: bool = True) -> dict:
        out = {
            "config": self.config.to_dict(),
            "derived": self.derived.to_dict(),
            "statistics": self.statistics,
        }
        if include_runtime:
            out["metadata"] = {"runtime_seconds": self.runtime_seconds}
        return out

    def rows(self):
        """``(replicate, statistic, value, defined)`` records for CSV output."""
        for name in self.config.statistics:
            for i, value in enumerate(self.statistics[name]["values"]):
                yield i, name, value, value is not None


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"mean": None, "sd": None}
    return {"mean": float(arr.mean()), "sd": float(arr.std(ddof=1)) if arr.size > 1 else None}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    start = time.perf_counter()
    d = derive(cfg.params)
    rows = _gather(cfg)
    if all(v is None for r in rows for v in r["values"].values()):
        raise ExperimentError("every replicate produced undefined estimators")
    normal_targets = _targets(cfg, d)
    stats = {}
    for name in cfg.statistics:
        values = [r["values"][name] for r in rows]
        defined = np.array([v for v in values if v is not None], dtype=float)
        entry = {
            "values": values,
            "n_defined": int(defined.size),
            "n_undefined": len(values) - int(defined.size),
            "target": None,
            "comparison": None,
            "ks_D": None,
            "ks_p": None,
        }
        entry.update(_summary(defined))
        enough = defined.size >= MIN_KS_SAMPLE
        if name in normal_targets:
            target = normal_targets[name]
            if target is not None:
                entry["target"], cdf = target
                if enough:
                    entry["comparison"] = "one-sample KS"
                    entry["ks_D"], entry["ks_p"] = ks_test(defined, cdf)
        else:
            w_plug = np.array(
                [r["w_plug"] for r in rows if r["values"][name] is not None and r["w_plug"] is not None]
            )
            if w_plug.size:
                target, draws = _reference_sample(cfg, d, name, w_plug)
                if target is not None:
                    target["reference_draws"] = cfg.reference_draws
                    entry["target"] = target
                    if enough:
                        entry["comparison"] = "two-sample KS"
                        entry["ks_D"], entry["ks_p"] = ks_2samp(defined, draws)
        stats[name] = entry
    return ExperimentReport(cfg, d, stats, time.perf_counter() - start)
