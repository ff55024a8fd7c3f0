"""Curve fits, trend tests and intervals used to judge experiment output."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Series:
    x: tuple[float, ...]
    y: tuple[float, ...]
    replicate: int | None = None

    def __post_init__(self) -> None:
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        if len(x) != len(y):
            raise ValueError("x and y lengths differ")
        if len(x) < 3:
            raise ValueError("a series needs at least 3 points")
        if any(b <= a for a, b in zip(x, x[1:])):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def xa(self) -> np.ndarray:
        return np.asarray(self.x)

    @property
    def ya(self) -> np.ndarray:
        return np.asarray(self.y)


@dataclass(frozen=True)
class FitResult:
    kind: str
    coefficients: tuple[float, ...]
    r2: float
    names: tuple[str, ...] = field(default=())

    def __getitem__(self, name: str) -> float:
        return self.coefficients[self.names.index(name)]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.coefficients)) | {"r2": self.r2}


def _r2(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        # constant data: a perfect fit is still a perfect fit
        return 1.0 if ss_res <= 1e-18 * max(1.0, float(np.sum(y ** 2))) else 0.0
    return 1.0 - ss_res / ss_tot


def _lstsq(kind: str, names: tuple[str, ...], design: np.ndarray, y: np.ndarray) -> FitResult:
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError(f"{kind}: degenerate design matrix")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return FitResult(kind, tuple(float(c) for c in coef), _r2(y, design @ coef), names)


def _as_series(s: Series | tuple) -> Series:
    return s if isinstance(s, Series) else Series(*s)


def power_law_fit(s: Series) -> FitResult:
    """y = alpha * x**beta, least squares on log-log; R² is reported in log space."""
    s = _as_series(s)
    x, y = s.xa, s.ya
    if (x <= 0).any() or (y <= 0).any():
        raise ValueError("power-law fit needs positive x and y")
    design = np.column_stack([np.ones_like(x), np.log(x)])
    fit = _lstsq("power", ("log_alpha", "beta"), design, np.log(y))
    log_alpha, beta = fit.coefficients
    return FitResult("power", (math.exp(log_alpha), beta), fit.r2, ("alpha", "beta"))


def inverse_sqrt_fit(s: Series) -> FitResult:
    """y = a + b / sqrt(x)."""
    s = _as_series(s)
    x = s.xa
    if (x <= 0).any():
        raise ValueError("inverse-sqrt fit needs positive x")
    design = np.column_stack([np.ones_like(x), 1.0 / np.sqrt(x)])
    return _lstsq("inverse_sqrt", ("a", "b"), design, s.ya)


def rho_curve_fit(s: Series, kind: str = "random") -> FitResult:
    """Fit over expansion factors.

    kind "random": y = c0 + c1*sqrt(rho) + c2/sqrt(rho);
    kind "gradual": y = c0 + c1/rho.
    """
    s = _as_series(s)
    rho = s.xa
    if (rho < 1).any():
        raise ValueError("expansion factors must be >= 1")
    if kind == "random":
        r = np.sqrt(rho)
        design = np.column_stack([np.ones_like(rho), r, 1.0 / r])
        return _lstsq("rho_random", ("c0", "c1", "c2"), design, s.ya)
    if kind == "gradual":
        design = np.column_stack([np.ones_like(rho), 1.0 / rho])
        return _lstsq("rho_gradual", ("c0", "c1"), design, s.ya)
    raise ValueError(f"unknown rho curve kind {kind!r}")


@dataclass(frozen=True)
class TrendResult:
    s: int
    z: float
    p: float
    trend: str
    alpha: float = 0.05

    @property
    def p_increasing(self) -> float:
        """One-sided p-value against an increasing trend."""
        return float(stats.norm.sf(self.z))

    @property
    def p_decreasing(self) -> float:
        return float(stats.norm.cdf(self.z))


def mann_kendall(y: Sequence[float], alpha: float = 0.05) -> TrendResult:
    """Mann-Kendall trend test, normal approximation with tie and continuity corrections."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 4:
        raise ValueError("Mann-Kendall needs at least 4 values")
    s = int(sum(np.sign(y[i + 1:] - y[i]).sum() for i in range(n - 1)))
    _, ties = np.unique(y, return_counts=True)
    var = (n * (n - 1) * (2 * n + 5) - float(np.sum(ties * (ties - 1) * (2 * ties + 5)))) / 18.0
    if s > 0:
        z = (s - 1) / math.sqrt(var)
    elif s < 0:
        z = (s + 1) / math.sqrt(var)
    else:
        z = 0.0
    p = float(2.0 * stats.norm.sf(abs(z)))
    if p < alpha:
        trend = "increasing" if z > 0 else "decreasing"
    else:
        trend = "none"
    return TrendResult(s, float(z), p, trend, alpha)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError("length mismatch")
    if x.size < 2:
        raise ValueError("need at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance")
    return max(-1.0, min(1.0, float(dx @ dy) / (sx * sy)))


def confidence_interval_90(samples: Sequence[float]) -> tuple[float, float]:
    """(mean, half-width) of the two-sided 90% Student-t interval."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    return mean, float(stats.t.ppf(0.95, x.size - 1)) * sd / math.sqrt(x.size)


def first_zero_crossing(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Where y first drops to zero or below, interpolated linearly; None if it never does."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if y and y[0] <= 0:
        return x[0]
    for (x0, y0), (x1, y1) in zip(zip(x, y), zip(x[1:], y[1:])):
        if y1 <= 0 < y0:
            return x0 + (x1 - x0) * y0 / (y0 - y1)
    return None


def is_concave(y: Sequence[float], tol: float = 0.0) -> bool:
    """Second differences all <= tol (equal grid spacing assumed)."""
    d2 = np.diff(np.asarray(y, dtype=float), 2)
    return bool((d2 <= tol).all())
