"""Quadratic-Gaussian rate-distortion-perception tradeoff.

Unit-variance Gaussian source, squared-error distortion, perfect realism and
a common-randomness budget ``rc`` (bits per symbol, ``math.inf`` allowed).
For a source of variance s^2 pass ``delta / s^2``; rates are unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

INF = math.inf

BISECT_WIDTH = 1e-14
BISECT_MAX_ITER = 60


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianPoint:
    delta: float
    rc: float
    rho: float
    rho_tilde: float
    rate: float


def _check_delta(delta: float) -> None:
    if not (0.0 < delta <= 2.0) or math.isnan(delta):
        raise DomainError(f"distortion must lie in (0, 2], got {delta!r}")


def _check_rc(rc: float) -> None:
    if math.isnan(rc) or rc < 0:
        raise DomainError(f"common randomness rate must be >= 0, got {rc!r}")


def _leak(rc: float) -> float:
    # 2^(-2 rc); exactly zero for the infinite sentinel
    return 0.0 if math.isinf(rc) else 2.0 ** (-2.0 * rc)


def rho_tilde(rho: float, rc: float) -> float:
    """Correlation between the auxiliary variable and the reconstruction."""
    return math.sqrt(1.0 - _leak(rc) * (1.0 - rho * rho))


def _residual(rho: float, delta: float, rc: float) -> float:
    return rho * rho_tilde(rho, rc) - (1.0 - delta / 2.0)


def solve_rho(delta: float, rc: float) -> float:
    """Unique root in [0, 1) of rho * rho_tilde(rho) = 1 - delta/2, by bisection.

    The left side is strictly increasing on [0, 1], from 0 to 1, so the
    bracket [0, 1] is always valid.
    """
    _check_delta(delta)
    _check_rc(rc)
    target = 1.0 - delta / 2.0
    if target == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        if _residual(mid, delta, rc) < 0.0:
            lo = mid
        else:
            hi = mid
    rho = 0.5 * (lo + hi)
    return min(rho, math.nextafter(1.0, 0.0))


def _rate_from_rho(rho: float) -> float:
    return 0.5 * math.log2(1.0 / (1.0 - rho * rho))


def rate(delta: float, rc: float) -> float:
    """Minimum rate (bits/symbol) at distortion ``delta`` with ``rc`` bits of common randomness."""
    return _rate_from_rho(solve_rho(delta, rc))


def point(delta: float, rc: float) -> GaussianPoint:
    rho = solve_rho(delta, rc)
    return GaussianPoint(delta, rc, rho, rho_tilde(rho, rc), _rate_from_rho(rho))


def curve(deltas: Iterable[float], rc: float) -> list[GaussianPoint]:
    deltas = list(deltas)
    for d in deltas:
        _check_delta(d)
    return [point(d, rc) for d in deltas]


def rate_rc_zero(delta: float) -> float:
    """No common randomness: 1/2 log2(2/delta)."""
    _check_delta(delta)
    return 0.5 * math.log2(2.0 / delta)


def rate_rc_inf(delta: float) -> float:
    """Unlimited common randomness: 1/2 log2(1 / (delta (1 - delta/4)))."""
    _check_delta(delta)
    return 0.5 * math.log2(1.0 / (delta * (1.0 - delta / 4.0)))


def rate_classical(delta: float) -> float:
    """Gaussian rate-distortion function without a realism constraint."""
    if not delta > 0:
        raise DomainError(f"distortion must be positive, got {delta!r}")
    return 0.5 * math.log2(1.0 / delta) if delta < 1.0 else 0.0


def fig1_grid() -> list[float]:
    """Distortions 0.02, 0.04, ..., 2.0."""
    return [round(0.02 * k, 10) for k in range(1, 101)]


def fig1_curves(deltas: Iterable[float] | None = None) -> dict[str, list[GaussianPoint]]:
    """The three tradeoff curves: no common randomness, unlimited, and classical.

    The classical curve carries NaN correlations; it has no realism constraint.
    """
    deltas = fig1_grid() if deltas is None else list(deltas)
    classical = [GaussianPoint(d, math.nan, math.nan, math.nan, rate_classical(d)) for d in deltas]
    return {"rc0": curve(deltas, 0.0), "rcinf": curve(deltas, INF), "classical": classical}
