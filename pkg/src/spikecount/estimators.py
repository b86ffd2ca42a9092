"""Spike-count selection rules.

One generalized criterion profile covers the whole family: the classical
information criterion is the per-parameter penalty level ``alpha = 2``, the
fixed-gap variants use ``alpha = penalty_alpha(p/n, delta)``, and the
vanishing-gap variants plug in a schedule ``delta_n -> 0``. The consecutive-gap
rule is a separate estimator kind. All selection is the smallest index
attaining the minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DataError
from .rmt import Regime, penalty_alpha, regime_for
from .spectra import Divisor, EigenSpectrum, _usable_count, spectrum_from_data

__all__ = [
    "EstimatorKind",
    "EstimatorSpec",
    "CriterionProfile",
    "SelectionResult",
    "criterion_profile",
    "full_aic_value",
    "select_k",
    "estimate_spikes",
    "py_estimate",
    "default_schedules",
    "default_candidates",
]


class EstimatorKind(Enum):
    AIC = "aic"
    AIC_STAR = "aic_star"
    AIC_DOUBLE_STAR = "aic_double_star"
    PY = "py"


@dataclass(frozen=True)
class EstimatorSpec:
    """Which selection rule to run and its parameters.

    ``delta`` applies to AIC_STAR; ``None`` means "calibrate per (p, n)" and
    must be resolved (by the simulation or calibration layer) before
    estimation. ``delta_schedule``/``dn_schedule`` override the default
    ``n**-0.25`` / ``n**-0.625`` power laws for AIC_DOUBLE_STAR / PY.
    ``candidates`` is the number of models searched (q), or the gap-scan bound
    (s) for PY; ``None`` picks ``min(30, p-2)`` resp. ``min(30, n-3)``.
    """

    kind: EstimatorKind
    delta: float | None = None
    delta_schedule: Callable[[int], float] | None = None
    dn_schedule: Callable[[int], float] | None = None
    candidates: int | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.candidates is not None and self.candidates < 1:
            raise ValueError("candidates must be >= 1")

    @property
    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.kind is EstimatorKind.AIC:
            return "AIC"
        if self.kind is EstimatorKind.AIC_STAR:
            if self.delta is None:
                return "AIC*(calibrated)"
            return f"AIC*(delta={self.delta:g})"
        if self.kind is EstimatorKind.AIC_DOUBLE_STAR:
            return "AIC**"
        return "PY"


@dataclass(frozen=True)
class CriterionProfile:
    """Criterion values for models j = 0 .. len(values)-1 at penalty level alpha."""

    values: np.ndarray
    alpha: float
    regime: Regime

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("profile must be a nonempty 1-d array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile contains non-finite values")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SelectionResult:
    k_hat: int
    profile: CriterionProfile | None = None
    spec: EstimatorSpec | None = None
    saturated: bool = False


def default_candidates(n: int, p: int) -> int:
    """Default model-search bound: min(30, p-2) for p <= n, min(30, n-3) above."""
    if p <= n:
        return max(1, min(30, p - 2))
    return max(1, min(30, n - 3))


def _log_checked(vals: np.ndarray, regime: Regime) -> np.ndarray:
    if np.any(vals <= 0.0):
        raise DataError(
            f"nonpositive eigenvalue where a log is required; the spectrum is "
            f"degenerate for the {regime.name} formulas"
        )
    return np.log(vals)


def profile_parts(
    spectrum: EigenSpectrum, candidates: int, regime: Regime
) -> tuple[np.ndarray, np.ndarray]:
    """Split the criterion into ``base - alpha * pen``.

    ``base[j] = (m-j) * log(mean(vals[j:m])) - sum(log(vals[j:m]))`` and
    ``pen[j] = (m-j-1) * (m-j+2) / (2 * denom)``, where ``(m, denom)`` is
    ``(p, n)`` under SMALL_C and ``(n-1, p)`` under LARGE_C. Splitting lets a
    delta-sweep re-score cached spectra without touching the eigenvalues.
    """
    m = _usable_count(spectrum, regime)
    denom = spectrum.n if regime is Regime.SMALL_C else spectrum.p
    if not 1 <= candidates <= m:
        raise ValueError(f"candidates must be in [1, {m}] for this spectrum, got {candidates}")
    vals = spectrum.values[:m]
    logs = _log_checked(vals, regime)
    tail_sum = np.cumsum(vals[::-1])[::-1]
    tail_log = np.cumsum(logs[::-1])[::-1]
    js = np.arange(candidates)
    counts = m - js
    base = counts * np.log(tail_sum[js] / counts) - tail_log[js]
    pen = (counts - 1) * (counts + 2) / (2.0 * denom)
    return base, pen


def criterion_profile(
    spectrum: EigenSpectrum,
    alpha: float,
    candidates: int | None = None,
    regime: Regime | None = None,
) -> CriterionProfile:
    """Criterion values ``base_j - alpha * pen_j`` for models j = 0..candidates-1.

    With ``alpha = 2`` this is exactly the classical criterion (and its c > 1
    counterpart); the regime defaults to the one implied by p/n.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if regime is None:
        regime = regime_for(spectrum.aspect_ratio)
    if candidates is None:
        candidates = default_candidates(spectrum.n, spectrum.p)
    base, pen = profile_parts(spectrum, candidates, regime)
    return CriterionProfile(values=base - alpha * pen, alpha=float(alpha), regime=regime)


def full_aic_value(spectrum: EigenSpectrum, j: int) -> float:
    """Absolute criterion value of model j on the n*log-likelihood scale (p <= n).

    Satisfies ``profile(alpha=2).values[j] == (value(j) - value(p-1)) / n``.
    """
    n, p = spectrum.n, spectrum.p
    if p > n:
        raise ValueError("full criterion values are defined for the p <= n regime only")
    if not 0 <= j <= p - 1:
        raise ValueError(f"model index j must be in [0, {p - 1}], got {j}")
    vals = spectrum.values
    logs = _log_checked(vals, Regime.SMALL_C)
    lbar = float(np.mean(vals[j:]))
    d_j = (j + 1) * (p + 1 - j / 2.0)
    c_pn = n * p * math.log((n - 1) / n) + n * p * (1.0 + math.log(2.0 * math.pi))
    return float(n * np.sum(logs[:j]) + n * (p - j) * math.log(lbar) + 2.0 * d_j + c_pn)


def select_k(profile: CriterionProfile, spec: EstimatorSpec | None = None) -> SelectionResult:
    """Smallest index attaining the minimum of the profile."""
    return SelectionResult(k_hat=int(np.argmin(profile.values)), profile=profile, spec=spec)


def py_estimate(
    spectrum: EigenSpectrum,
    s: int,
    d_n: float,
    spec: EstimatorSpec | None = None,
) -> SelectionResult:
    """Consecutive-gap rule: smallest j in {1..s} whose next gap drops below d_n.

    The scanned gap for candidate j is ``values[j] - values[j+1]`` (0-based),
    i.e. the gap just past the j-th retained eigenvalue. If no gap qualifies
    the result saturates at s (flagged, not an error). Note the rule cannot
    return 0: under a spikeless spectrum it settles at 1.
    """
    vals = spectrum.values
    if d_n <= 0:
        raise ValueError("d_n must be positive")
    if not 1 <= s <= vals.size - 2:
        raise ValueError(f"need 1 <= s <= p-2 = {vals.size - 2}, got s={s}")
    gaps = vals[1 : s + 1] - vals[2 : s + 2]
    hits = np.nonzero(gaps < d_n)[0]
    if hits.size:
        return SelectionResult(k_hat=int(hits[0]) + 1, spec=spec)
    return SelectionResult(k_hat=s, spec=spec, saturated=True)


def default_schedules(n: int, c_n: float | None = None) -> tuple[float, float]:
    """Default vanishing-gap and gap-threshold schedules ``(n**-0.25, n**-0.625)``.

    Both sequences meet their consistency-rate requirements: the penalty shift
    scales like ``delta_n**2`` near the edge, so ``n**(2/3) * delta_n**2 =
    n**(1/6) -> inf``, while ``d_n`` satisfies ``sqrt(n)*d_n -> 0`` and
    ``n**(2/3)*d_n -> inf``. ``c_n`` is accepted for interface stability; the
    defaults do not depend on it.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    return n ** -0.25, n ** -0.625


def _resolve_alpha(spec: EstimatorSpec, c_n: float, n: int) -> float:
    if spec.kind is EstimatorKind.AIC:
        return 2.0
    if spec.kind is EstimatorKind.AIC_STAR:
        if spec.delta is None:
            raise ValueError(
                "AIC* needs a resolved delta; calibrate first or set delta explicitly"
            )
        return penalty_alpha(c_n, spec.delta)
    if spec.kind is EstimatorKind.AIC_DOUBLE_STAR:
        delta_n = spec.delta_schedule(n) if spec.delta_schedule else default_schedules(n)[0]
        return penalty_alpha(c_n, delta_n)
    raise ValueError(f"no penalty level for estimator kind {spec.kind}")


def estimate_spikes(data, spec: EstimatorSpec) -> SelectionResult:
    """Run a selection rule on a data matrix or a precomputed spectrum.

    Raw data is reduced with the divisor convention the rule was defined
    under (n-1 for the criterion family, n for PY); a supplied spectrum is
    rescaled exactly if its convention differs. The finite-sample ratio p/n
    drives both the regime and the penalty level.
    """
    divisor = Divisor.N if spec.kind is EstimatorKind.PY else Divisor.N_MINUS_1
    if isinstance(data, EigenSpectrum):
        spectrum = data.with_divisor(divisor)
    else:
        spectrum = spectrum_from_data(np.asarray(data, dtype=float), divisor)
    n, p = spectrum.n, spectrum.p
    c_n = p / n

    if spec.kind is EstimatorKind.PY:
        s = spec.candidates if spec.candidates is not None else default_candidates(n, p)
        d_n = spec.dn_schedule(n) if spec.dn_schedule else default_schedules(n)[1]
        return py_estimate(spectrum, s, d_n, spec=spec)

    regime = regime_for(c_n)
    q = spec.candidates if spec.candidates is not None else default_candidates(n, p)
    limit = p - 1 if regime is Regime.SMALL_C else n - 2
    if q > limit:
        raise ValueError(f"candidates={q} exceeds the model-space bound {limit} for this shape")
    alpha = _resolve_alpha(spec, c_n, n)
    profile = criterion_profile(spectrum, alpha, q, regime)
    return select_k(profile, spec=spec)
