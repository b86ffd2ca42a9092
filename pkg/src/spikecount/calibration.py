"""Automatic choice of the gap parameter delta_n from the null model.

The criterion with penalty level alpha(p/n, delta) should almost never report
a spike when there is none. For a given (p, n) the calibrator simulates the
null model once, caches each replication's criterion split into
``base - alpha * pen``, and sweeps delta upward until the sample relative MSE
of the estimate drops below the budget (0.02 by default). Because the selected
index is nonincreasing in the penalty level, the sweep is monotone and a
galloping search plus bisection finds the smallest qualifying grid point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .estimators import default_candidates, profile_parts
from .rmt import penalty_alpha, regime_for
from .rng import TAG_CALIBRATION, derive_key, normals
from .spectra import Divisor, spectrum_from_data

__all__ = ["CalibrationResult", "calibrate_delta"]


@dataclass(frozen=True)
class CalibrationResult:
    p: int
    n: int
    delta_n: float
    srmse_at_delta: float
    replications: int
    grid_step: float
    seed: int


def _null_profile_cache(
    p: int, n: int, replications: int, base_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-replication base terms and the shared penalty weights."""
    regime = regime_for(p / n)
    q = default_candidates(n, p)
    bases = np.empty((replications, q))
    pen = None
    for r in range(replications):
        key = derive_key(base_seed, TAG_CALIBRATION, p, n, r)
        y = normals(key, (n, p))
        spectrum = spectrum_from_data(y, Divisor.N_MINUS_1)
        base, pen = profile_parts(spectrum, q, regime)
        bases[r] = base
    return bases, pen


def calibrate_delta(
    p: int,
    n: int,
    replications: int = 500,
    target: float = 0.02,
    grid_step: float = 0.01,
    base_seed: int = 0,
    delta_max: float = 2.0,
) -> CalibrationResult:
    """Smallest grid delta whose null-model SRMSE meets the target.

    SRMSE here is mean(k_hat**2) over the cached null replications (the k = 0
    convention of :func:`spikecount.simulation.metrics`). Deterministic given
    (p, n, replications, base_seed, grid_step). Raises ``NumericError`` if no
    delta up to ``delta_max`` qualifies.
    """
    if p < 2 or n < 2:
        raise ValueError("need p >= 2 and n >= 2")
    if target <= 0:
        raise ValueError("target must be positive")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    bases, pen = _null_profile_cache(p, n, replications, base_seed)
    c_n = p / n

    evaluated: dict[int, float] = {}

    def srmse_at(idx: int) -> float:
        if idx not in evaluated:
            alpha = penalty_alpha(c_n, idx * grid_step)
            k_hat = np.argmin(bases - alpha * pen, axis=1)
            evaluated[idx] = float(np.mean(k_hat.astype(float) ** 2))
            _assert_monotone(evaluated)
        return evaluated[idx]

    max_idx = int(np.floor(delta_max / grid_step + 1e-9))

    # gallop to the first qualifying index, then bisect for the smallest one
    idx = 0
    if srmse_at(0) > target:
        step = 1
        while True:
            idx = min(idx + step, max_idx)
            if srmse_at(idx) <= target:
                break
            if idx >= max_idx:
                raise NumericError(
                    f"no delta <= {delta_max} meets SRMSE target {target} at "
                    f"(p={p}, n={n}); SRMSE({delta_max}) = {srmse_at(max_idx):.4g}"
                )
            step *= 2
        lo = max(i for i in evaluated if evaluated[i] > target and i < idx)
        hi = idx
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if srmse_at(mid) <= target:
                hi = mid
            else:
                lo = mid
        idx = hi

    return CalibrationResult(
        p=p,
        n=n,
        delta_n=idx * grid_step,
        srmse_at_delta=srmse_at(idx),
        replications=replications,
        grid_step=grid_step,
        seed=base_seed,
    )


def _assert_monotone(evaluated: dict[int, float]) -> None:
    """SRMSE must be nonincreasing in delta on cached spectra; anything else is a bug."""
    items = sorted(evaluated.items())
    for (i, a), (j, b) in zip(items, items[1:]):
        if b > a + 1e-9:
            raise AssertionError(
                f"SRMSE increased along the delta grid: f({i}) = {a} < f({j}) = {b}"
            )
