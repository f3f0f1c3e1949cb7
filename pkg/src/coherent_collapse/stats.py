"""Ensemble statistics and audit reports shared by the model modules."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps
from scipy.integrate import cumulative_trapezoid, cumulative_simpson

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


class MissingSeriesError(KeyError):
    pass


def stack_series(records: Sequence, name: str) -> np.ndarray:
    """Per-path values of one observable, shape (n_paths, n_times)."""
    if not records:
        raise ValueError("no records")
    n = len(records[0].times)
    rows = []
    for rec in records:
        if name not in rec.series:
            raise MissingSeriesError(f"records lack series {name!r}")
        if len(rec.times) != n or not np.array_equal(rec.times, records[0].times):
            raise ValueError("records have misaligned time grids")
        rows.append(rec.series[name])
    return np.vstack(rows)


def mean_and_se(values: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and standard error; SE is NaN for a single path."""
    values = np.asarray(values)
    n = values.shape[axis]
    mean = values.mean(axis=axis)
    if n < 2:
        return mean, np.full(np.shape(mean), np.nan)
    return mean, values.std(axis=axis, ddof=1) / math.sqrt(n)


def critical_value(n_sigma: float, n_paths: int) -> float:
    """Student-t threshold with the two-sided level of an n_sigma normal cut.

    Small ensembles estimate the standard error poorly; this keeps the false
    alarm rate at the nominal level.  Tends to n_sigma as n_paths grows.
    """
    if n_paths < 2:
        return math.nan
    level = 2 * sps.norm.sf(n_sigma)
    return float(sps.t.isf(level / 2, n_paths - 1))


def cumulative_integral(y: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running trapezoid integral along the last axis, plus an error estimate.

    The estimate is the gap to a cumulative Simpson integral, which bounds
    the trapezoid error up to higher-order terms.
    """
    trap = cumulative_trapezoid(y, t, axis=-1, initial=0.0)
    if len(t) < 3:
        return trap, np.zeros_like(trap)
    simp = cumulative_simpson(y, x=t, axis=-1, initial=0.0)
    return trap, np.abs(trap - simp)


def checkpoint_indices(n_times: int, count: int = 8) -> np.ndarray:
    """Evenly spaced time indices, excluding t = 0."""
    idx = np.unique(np.linspace(0, n_times - 1, count + 1).round().astype(int))
    return idx[idx > 0]


@dataclass
class AuditReport:
    name: str
    verdict: str
    max_deviation_se: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def text(self) -> str:
        dev = self.max_deviation_se
        dev_txt = "n/a" if dev is None or not np.isfinite(dev) else f"{dev:.2f} SE"
        lines = [f"{self.name}: {self.verdict.upper()} (max deviation {dev_txt})"]
        for k, v in self.details.items():
            if isinstance(v, (int, float, str, bool, np.number)):
                lines.append(f"  {k}: {v}")
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def zero_mean_check(name: str, residuals: np.ndarray, times: np.ndarray, *,
                    atol: np.ndarray | float = 0.0, n_sigma: float = 3.0,
                    checkpoints: int = 8, extra: dict | None = None) -> AuditReport:
    """Test that per-path residual processes have zero ensemble mean.

    ``residuals`` has shape (n_paths, n_times).  At each checkpoint the mean
    must lie within ``n_sigma`` standard errors plus ``atol`` (deterministic
    quadrature error) of zero.
    """
    mean, se = mean_and_se(residuals)
    idx = checkpoint_indices(len(times), checkpoints)
    atol = np.broadcast_to(np.asarray(atol, dtype=float), mean.shape)
    m, s, a = np.abs(mean[idx]), se[idx], atol[idx]
    if np.any(np.isnan(s)):
        return AuditReport(name, INCONCLUSIVE, math.nan,
                           {"reason": "single path: no standard error"})
    crit = critical_value(n_sigma, residuals.shape[0])
    ok = m <= crit * s + a
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, np.maximum(m - a, 0.0) / s, np.where(m <= a, 0.0, np.inf))
    details = {"times": times[idx], "mean_residual": mean[idx],
               "standard_error": s, "quadrature_tolerance": a,
               "n_paths": residuals.shape[0], "critical_se": crit}
    if extra:
        details.update(extra)
    return AuditReport(name, PASS if ok.all() else FAIL, float(z.max()), details)
