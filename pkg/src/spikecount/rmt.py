"""Analytic machinery for the bulk spectrum of high-dimensional sample covariances.

Everything here is a pure function of the aspect ratio ``c = p/n`` (variables
over observations) and a scalar argument: the Stein loss scale, the forward map
sending a population spike to its limiting sample eigenvalue, the
Marchenko-Pastur law, the detection thresholds above the BBP edge ``1+sqrt(c)``,
and the penalty levels used by the modified information criteria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import NumericError

__all__ = [
    "Regime",
    "MpLaw",
    "ThresholdReport",
    "regime_for",
    "stein_loss",
    "spike_forward",
    "signal_strength",
    "signal_strength_large_c",
    "mp_law",
    "mp_density",
    "mp_cdf",
    "invert_monotone",
    "thresholds",
    "penalty_alpha",
]


class Regime(Enum):
    """Which branch of the criteria applies: c <= 1 or c > 1."""

    SMALL_C = "small_c"
    LARGE_C = "large_c"


def _check_aspect_ratio(c: float) -> float:
    c = float(c)
    if not math.isfinite(c) or c <= 0:
        raise ValueError("aspect ratio c must be a positive finite real")
    return c


def regime_for(c: float) -> Regime:
    """Regime implied by the aspect ratio; never stored, always derived."""
    c = _check_aspect_ratio(c)
    return Regime.SMALL_C if c <= 1.0 else Regime.LARGE_C


def stein_loss(x):
    """Scalar Stein loss ``x - 1 - log(x)`` of ``x`` against 1.

    Nonnegative on (0, inf), strictly decreasing on (0, 1), strictly
    increasing on (1, inf), zero only at ``x = 1``. Accepts scalars or
    arrays; raises for any argument outside the domain.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0) or np.any(~np.isfinite(arr)):
        raise ValueError("stein_loss requires x > 0")
    out = arr - 1.0 - np.log(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def spike_forward(c: float, x):
    """Limiting sample location ``x + c*x/(x-1)`` of a population spike at ``x``.

    Only the branch ``x > 1`` is meaningful here; the map attains its minimum
    ``(1+sqrt(c))**2`` at ``x = 1+sqrt(c)`` and is strictly increasing beyond it.
    """
    c = _check_aspect_ratio(c)
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 1.0):
        raise ValueError("spike_forward requires x > 1")
    out = arr + c * arr / (arr - 1.0)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def signal_strength(c: float, x):
    """Detectability of a spike at ``x`` on the Stein-loss scale (c <= 1 branch).

    Equals ``stein_loss(spike_forward(c, x))``; strictly increasing on
    ``[1+sqrt(c), inf)``, which is the only admitted domain.
    """
    c = _check_aspect_ratio(c)
    edge = 1.0 + math.sqrt(c)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < edge - 1e-12):
        raise ValueError(f"signal_strength requires x >= 1+sqrt(c) = {edge:.6g}")
    # clamp float fuzz at the edge so the composition stays in-domain
    return stein_loss(spike_forward(c, np.maximum(arr, edge)))


def signal_strength_large_c(c: float, x):
    """Detectability scale for the rank-deficient regime (c > 1 branch).

    Equals ``c * stein_loss(spike_forward(c, x) / c)``; strictly increasing on
    ``[1+sqrt(c), inf)``.
    """
    c = _check_aspect_ratio(c)
    if c <= 1.0:
        raise ValueError("signal_strength_large_c requires c > 1")
    edge = 1.0 + math.sqrt(c)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < edge - 1e-12):
        raise ValueError(f"signal_strength_large_c requires x >= 1+sqrt(c) = {edge:.6g}")
    fwd = spike_forward(c, np.maximum(arr, edge))
    return c * stein_loss(fwd / c)


@dataclass(frozen=True)
class MpLaw:
    """Support and point mass of the Marchenko-Pastur law at aspect ratio c."""

    c: float
    a: float
    b: float
    mass_at_zero: float


def mp_law(c: float) -> MpLaw:
    c = _check_aspect_ratio(c)
    sq = math.sqrt(c)
    return MpLaw(c=c, a=(1.0 - sq) ** 2, b=(1.0 + sq) ** 2, mass_at_zero=max(0.0, 1.0 - 1.0 / c))


def mp_density(c: float, x):
    """Marchenko-Pastur density, zero-extended outside the support.

    The point mass at the origin for c > 1 is *not* included; integrating the
    density over the support therefore gives ``min(1, 1/c)``.
    """
    law = mp_law(c)
    scalar = np.asarray(x).ndim == 0
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(arr)
    inside = (arr > law.a) & (arr < law.b)
    xi = arr[inside]
    out[inside] = np.sqrt((law.b - xi) * (xi - law.a)) / (2.0 * np.pi * xi * law.c)
    return float(out[0]) if scalar else out


def mp_cdf(c: float, x: float) -> float:
    """CDF of the Marchenko-Pastur law by adaptive quadrature (diagnostic only)."""
    law = mp_law(c)
    x = float(x)
    if x < 0:
        return 0.0
    if x >= law.b:
        return 1.0
    if x <= law.a:
        return law.mass_at_zero
    val, _ = quad(lambda t: mp_density(c, t), law.a, x, epsabs=1e-8, epsrel=1e-8, limit=200)
    return law.mass_at_zero + val


def invert_monotone(
    f: Callable[[float], float],
    target: float,
    bracket: tuple[float, float],
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Solve ``f(x) = target`` for a strictly monotone f on a bracketing interval.

    Bisection with a secant refinement each iteration; stops once
    ``|f(x) - target| <= tol * max(1, |target|)``. Raises ``NumericError`` if
    the bracket does not enclose the target or the budget is exhausted.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise NumericError(f"invalid bracket [{lo}, {hi}]")
    flo, fhi = f(lo) - target, f(hi) - target
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NumericError(
            f"target {target} not enclosed by f over [{lo}, {hi}] "
            f"(f-target spans [{flo:.6g}, {fhi:.6g}])"
        )
    scale = max(1.0, abs(target))
    x, fx = lo, flo
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        # secant step from the bracket endpoints on alternate iterations; the
        # forced bisection in between guarantees the bracket keeps halving
        if it % 2 and fhi != flo:
            sec = lo - flo * (hi - lo) / (fhi - flo)
            if lo < sec < hi:
                mid = sec
        fx = f(mid) - target
        if abs(fx) <= tol * scale:
            return mid
        if flo * fx < 0:
            hi, fhi = mid, fx
        else:
            lo, flo = mid, fx
        if hi - lo <= tol * max(1.0, abs(mid)):
            return 0.5 * (lo + hi)
        x = mid
    raise NumericError(
        f"no convergence to |f(x)-target| <= {tol:g}*max(1,|target|) "
        f"within {max_iter} iterations (last x={x}, residual={fx:.3g})"
    )


@dataclass(frozen=True)
class ThresholdReport:
    """Detection levels at aspect ratio c.

    ``bbp`` is the edge ``1+sqrt(c)`` below which a spike is invisible,
    ``b`` the bulk upper edge ``(1+sqrt(c))**2``, ``lambda_c`` the level a
    spike must exceed for the classical criterion to be consistent, and
    ``gap`` the excess ``lambda_c - bbp`` (positive for every c).
    """

    c: float
    bbp: float
    b: float
    lambda_c: float
    gap: float


def _solve_on_spike_domain(c: float, g: Callable[[float], float], target: float) -> float:
    """Invert a strictly increasing g on (1+sqrt(c), inf) at ``target``."""
    edge = 1.0 + math.sqrt(c)
    lo = edge + 1e-9
    hi = 10.0 * edge
    for _ in range(200):
        if g(hi) >= target:
            break
        hi *= 2.0
    else:
        raise NumericError(f"could not bracket target {target} while expanding to {hi}")
    return invert_monotone(g, target, (lo, hi))


def thresholds(c: float) -> ThresholdReport:
    """Consistency threshold ``lambda_c`` and its gap above the BBP edge."""
    c = _check_aspect_ratio(c)
    edge = 1.0 + math.sqrt(c)
    if c <= 1.0:
        lam = _solve_on_spike_domain(c, lambda x: signal_strength(c, x), 2.0 * c)
    else:
        lam = _solve_on_spike_domain(c, lambda x: signal_strength_large_c(c, x), 2.0)
    return ThresholdReport(c=c, bbp=edge, b=edge * edge, lambda_c=lam, gap=lam - edge)


def penalty_alpha(c: float, delta: float = 0.0) -> float:
    """Per-parameter penalty level for the modified criteria.

    For c <= 1 this is ``signal_strength(c, 1+sqrt(c)+delta) / c``; for c > 1
    it is ``signal_strength_large_c(c, 1+sqrt(c)+delta)``. Strictly increasing
    in ``delta`` and equal to the classical level 2 at ``delta = gap(c)``.
    ``delta = 0`` is accepted but has only empirical support; the estimator
    catalog flags it as experimental.
    """
    c = _check_aspect_ratio(c)
    delta = float(delta)
    if delta < 0:
        raise ValueError("delta must be >= 0")
    x = 1.0 + math.sqrt(c) + delta
    if c <= 1.0:
        return signal_strength(c, x) / c
    return signal_strength_large_c(c, x)
