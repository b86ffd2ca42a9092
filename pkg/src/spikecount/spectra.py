"""Sample covariance construction and symmetric eigenvalue extraction.

The estimators only ever need the descending eigenvalues of the sample
covariance, so this module exposes them as an immutable ``EigenSpectrum``
carrying the sample size and divisor convention they were computed under.
For p > n the nonzero spectrum is obtained from the n-by-n Gram matrix,
which is cheaper and numerically identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import DataError, NumericError
from .rmt import Regime

__all__ = [
    "Divisor",
    "EigenSpectrum",
    "sample_covariance",
    "eigenvalues_descending",
    "spectrum_via_gram",
    "spectrum_from_data",
    "trailing_means",
]

# eigenvalues this far below zero are round-off; anything lower means the
# input was not PSD and must be surfaced
_NEGATIVE_CLIP = 1e-10


class Divisor(Enum):
    """Normalization of the sample covariance: sum of outer products over n-1 or n."""

    N_MINUS_1 = "n-1"
    N = "n"

    def value_for(self, n: int) -> int:
        return n - 1 if self is Divisor.N_MINUS_1 else n


@dataclass(frozen=True)
class EigenSpectrum:
    """Descending sample eigenvalues plus the metadata needed by the criteria."""

    values: np.ndarray
    n: int
    divisor: Divisor = Divisor.N_MINUS_1

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float).copy()
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("spectrum must be a nonempty 1-d array")
        if np.any(np.diff(vals) > 1e-12 * (1.0 + np.abs(vals[:-1]))):
            raise ValueError("eigenvalues must be sorted in descending order")
        if np.any(vals < -_NEGATIVE_CLIP * (1.0 + abs(float(vals[0])))):
            raise NumericError(
                f"eigenvalue {vals.min():.3e} is too negative for a PSD matrix"
            )
        np.clip(vals, 0.0, None, out=vals)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if self.n < 2:
            raise ValueError("sample size n must be >= 2")

    @property
    def p(self) -> int:
        return int(self.values.size)

    @property
    def aspect_ratio(self) -> float:
        return self.p / self.n

    def with_divisor(self, divisor: Divisor) -> "EigenSpectrum":
        """Exact rescaling to the other divisor convention (no recomputation)."""
        if divisor is self.divisor:
            return self
        ratio = self.divisor.value_for(self.n) / divisor.value_for(self.n)
        return replace(self, values=self.values * ratio, divisor=divisor)


def _as_data_matrix(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise DataError("data must be a 2-d matrix with rows = observations")
    n, p = y.shape
    if n < 2 or p < 1:
        raise DataError(f"need n >= 2 observations and p >= 1 variables, got {n}x{p}")
    if not np.all(np.isfinite(y)):
        raise DataError("data matrix contains non-finite entries")
    return y


def sample_covariance(
    y: np.ndarray, divisor: Divisor = Divisor.N_MINUS_1, center: bool = False
) -> np.ndarray:
    """Sample covariance ``Y'Y / divisor`` of an n-by-p data matrix.

    The population mean is assumed zero; pass ``center=True`` to subtract
    column means first (real data). The result is exactly symmetric.
    """
    y = _as_data_matrix(y)
    if center:
        y = y - y.mean(axis=0, keepdims=True)
    s = y.T @ y / divisor.value_for(y.shape[0])
    return 0.5 * (s + s.T)


def eigenvalues_descending(
    s: np.ndarray, n: int, divisor: Divisor = Divisor.N_MINUS_1
) -> EigenSpectrum:
    """Descending eigenvalues of a symmetric PSD matrix.

    ``n`` records the sample size the matrix came from (metadata for the
    criteria); it does not affect the computation.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("covariance matrix must be square")
    scale = max(1.0, float(np.abs(s).max(initial=0.0)))
    if np.abs(s - s.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric within 1e-10 relative tolerance")
    try:
        vals = np.linalg.eigvalsh(s)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigenvalue iteration failed: {exc}") from exc
    return EigenSpectrum(values=vals[::-1], n=n, divisor=divisor)


def spectrum_via_gram(
    y: np.ndarray, divisor: Divisor = Divisor.N_MINUS_1, center: bool = False
) -> EigenSpectrum:
    """Spectrum of the sample covariance via the n-by-n Gram matrix.

    The nonzero eigenvalues of ``Y'Y`` and ``YY'`` coincide, so for p > n this
    avoids the p-by-p eigenproblem; the missing p - n eigenvalues are exact
    zeros.
    """
    y = _as_data_matrix(y)
    if center:
        y = y - y.mean(axis=0, keepdims=True)
    n, p = y.shape
    g = y @ y.T / divisor.value_for(n)
    g = 0.5 * (g + g.T)
    try:
        vals = np.linalg.eigvalsh(g)[::-1]
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigenvalue iteration failed: {exc}") from exc
    vals = np.clip(vals, 0.0, None)
    if p > n:
        vals = np.concatenate([vals, np.zeros(p - n)])
    else:
        vals = vals[:p]
    return EigenSpectrum(values=vals, n=n, divisor=divisor)


def spectrum_from_data(
    y: np.ndarray, divisor: Divisor = Divisor.N_MINUS_1, center: bool = False
) -> EigenSpectrum:
    """Spectrum of the sample covariance, using the Gram route when p > n."""
    y = _as_data_matrix(y)
    n, p = y.shape
    if p > n:
        return spectrum_via_gram(y, divisor, center)
    return eigenvalues_descending(sample_covariance(y, divisor, center), n=n, divisor=divisor)


def _usable_count(spectrum: EigenSpectrum, regime: Regime) -> int:
    """How many leading eigenvalues the regime's formulas may touch."""
    p, n = spectrum.p, spectrum.n
    if regime is Regime.SMALL_C:
        m = p
    else:
        m = n - 1
        if m > p:
            raise ValueError(f"LARGE_C needs at least n-1 = {m} eigenvalues, have {p}")
    if m < 2:
        raise ValueError("empty averaging block: need at least 2 usable eigenvalues")
    return m


def trailing_means(spectrum: EigenSpectrum, regime: Regime) -> np.ndarray:
    """Means of the eigenvalues past index j, for every candidate j.

    Entry j averages ``values[j:p]`` under SMALL_C and ``values[j:n-1]`` under
    LARGE_C (the structurally zero tail never enters). The last entry is the
    singleton mean of the smallest usable eigenvalue. One backward cumulative
    sum, O(p) total.
    """
    m = _usable_count(spectrum, regime)
    vals = spectrum.values[:m]
    tail = np.cumsum(vals[::-1])[::-1]  # tail[j] = sum(vals[j:m])
    return tail / (m - np.arange(m))
