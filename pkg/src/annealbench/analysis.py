"""Time-to-solution curves, aggregates and log-log scaling fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import InvalidInputError

DEFAULT_TARGET = 0.9


def repetitions(p_gs: float, p_tar: float = DEFAULT_TARGET) -> float:
    """Repetitions ``log(1 - p_tar) / log(1 - p_gs)``, clamped to at least 1."""
    if not 0.0 <= p_gs <= 1.0:
        raise InvalidInputError(f"p_gs={p_gs} outside [0, 1]")
    if not 0.0 < p_tar < 1.0:
        raise InvalidInputError(f"p_tar={p_tar} outside (0, 1)")
    if p_gs == 0.0:
        return math.inf
    if p_gs == 1.0:
        return 1.0
    return max(1.0, math.log1p(-p_tar) / math.log1p(-p_gs))


def tts(T: float, p_gs: float, p_tar: float = DEFAULT_TARGET) -> float:
    return T * repetitions(p_gs, p_tar)


@dataclass
class TtsCurve:
    points: list  # (T, p_gs, s), sorted by T
    p_tar: float = DEFAULT_TARGET
    kind: str = "physical"

    @classmethod
    def from_probabilities(cls, times: Sequence[float], probs: Sequence[float],
                           p_tar: float = DEFAULT_TARGET, kind: str = "physical") -> "TtsCurve":
        pts = sorted((float(T), float(p), tts(T, p, p_tar)) for T, p in zip(times, probs))
        return cls(pts, p_tar, kind)


def optimal_tts(curve: TtsCurve) -> tuple[float, float]:
    """Grid minimum ``(s_opt, T_opt)``; ties go to the smallest ``T``.

    Returns ``(inf, nan)`` when no point is finite.
    """
    best = (math.inf, math.nan)
    for T, _, s in sorted(curve.points):
        if s < best[0]:
            best = (s, T)
    return best


@dataclass(frozen=True)
class Aggregate:
    median: float
    q1: float
    q3: float
    p05: float
    p95: float


def _percentile(ordered: np.ndarray, q: float) -> float:
    # linear interpolation that lets +inf (unsolved instances) propagate
    pos = q / 100.0 * (ordered.size - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, ordered.size - 1)
    frac = pos - lo
    if frac == 0.0 or ordered[lo] == ordered[hi]:
        return float(ordered[lo])
    if math.isinf(ordered[hi]):
        return math.inf
    return float(ordered[lo] + frac * (ordered[hi] - ordered[lo]))


def aggregate(values: Iterable[float]) -> Aggregate:
    """Median, quartiles and 5/95 percentiles (linear interpolation)."""
    arr = np.sort(np.asarray(list(values), dtype=np.float64))
    if arr.size == 0:
        raise InvalidInputError("cannot aggregate an empty sample")
    if np.any(np.isnan(arr)):
        raise InvalidInputError("cannot aggregate NaN values")
    return Aggregate(*(_percentile(arr, q) for q in (50, 25, 75, 5, 95)))


@dataclass(frozen=True)
class FitResult:
    m: float
    c_fit: float
    r_corr: float


def loglog_fit(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Least squares of ``log10 y = m log10 x + c`` over finite pairs."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidInputError("xs and ys differ in length")
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidInputError("log-log fit needs positive values")
    if x.size < 3:
        raise InvalidInputError("log-log fit needs at least three finite points")
    lx, ly = np.log10(x), np.log10(y)
    m, c = np.polyfit(lx, ly, 1)
    if np.ptp(lx) == 0 or np.ptp(ly) == 0:
        r = 0.0
    else:
        r = float(np.clip(np.corrcoef(lx, ly)[0, 1], -1.0, 1.0))
    return FitResult(float(m), float(c), r)


def overhead_ratio(embedded: Mapping[str, float], direct: Mapping[str, float]) -> dict:
    """Per-instance ``s_embedded / s_direct``."""
    if set(embedded) != set(direct):
        missing = sorted(set(embedded) ^ set(direct))
        raise InvalidInputError(f"instance ids do not match: {missing[:5]}")
    return {k: embedded[k] / direct[k] for k in sorted(embedded)}


def size_medians(values_by_size: Mapping[int, Sequence[float]]) -> dict:
    """Median per size, dropping sizes where over half the values are infinite."""
    out = {}
    for n, vals in sorted(values_by_size.items()):
        arr = np.asarray(vals, dtype=np.float64)
        if arr.size == 0 or np.sum(~np.isfinite(arr)) * 2 > arr.size:
            continue
        out[n] = float(np.median(arr))
    return out


# published reference rows (log10 fits over per-size medians)
REFERENCE_FITS = {
    ("square", "maxcut-0.3"): {"m_L": 3.27, "c_L": -2.28, "r_L": 1.00, "m_P": 2.98, "c_P": -0.52, "r_P": 0.99},
    ("square", "maxcut-0.5"): {"m_L": 3.45, "c_L": -2.95, "r_L": 0.99, "m_P": 3.06, "c_P": -0.66, "r_P": 0.99},
    ("square", "gaussian"): {"m_L": 3.00, "c_L": -2.92, "r_L": 0.99, "m_P": 2.70, "c_P": -0.97, "r_P": 0.99},
    ("chimera", "maxcut-0.3"): {"m_L": 2.73, "c_L": -1.59, "r_L": 1.00, "m_P": 2.55, "c_P": -0.57, "r_P": 0.99},
    ("chimera", "maxcut-0.5"): {"m_L": 2.81, "c_L": -1.72, "r_L": 0.99, "m_P": 2.57, "c_P": -0.39, "r_P": 0.99},
    ("chimera", "gaussian"): {"m_L": 2.54, "c_L": -1.95, "r_L": 0.99, "m_P": 2.35, "c_P": -0.84, "r_P": 0.99},
    ("paqo", "maxcut-0.3"): {"m_L": 5.03, "c_L": -7.61, "r_L": 0.99, "m_P": 3.89, "c_P": -1.66, "r_P": 0.99},
    ("paqo", "maxcut-0.5"): {"m_L": 4.31, "c_L": -6.05, "r_L": 0.99, "m_P": 3.80, "c_P": -1.23, "r_P": 0.99},
    ("paqo", "gaussian"): {"m_L": 4.09, "c_L": -7.62, "r_L": 0.98, "m_P": 3.35, "c_P": -2.71, "r_P": 0.99},
}
