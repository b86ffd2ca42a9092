"""Spiked-Gaussian data generation and the Monte-Carlo comparison harness.

A plan fixes the target aspect ratio, an n-grid (p follows as round(c*n)),
the spike configuration, the estimators to compare, and a base seed. Every
replication draws its own counter-based stream, and all estimators in a
replication score the same spectrum, so comparisons are paired and results
are independent of execution order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import IO, Iterable

import numpy as np

from . import __version__
from .calibration import calibrate_delta
from .errors import ConfigError, SpikecountError
from .estimators import EstimatorKind, EstimatorSpec, estimate_spikes
from .rng import TAG_DATA, derive_key, haar_orthogonal, normals, subkey
from .spectra import Divisor, spectrum_from_data

__all__ = [
    "SpikedPopulation",
    "ExperimentPlan",
    "ReportRow",
    "MonteCarloReport",
    "sample_spiked_gaussian",
    "metrics",
    "run_monte_carlo",
    "preset_plan",
    "preset_names",
    "plan_from_dict",
    "plan_to_dict",
]

DEFAULT_BASE_SEED = 1000003


@dataclass(frozen=True)
class SpikedPopulation:
    """Population covariance diag(spikes..., 1, ..., 1), optionally rotated."""

    p: int
    spikes: tuple[float, ...] = ()
    rotate: bool = False

    def __post_init__(self) -> None:
        spikes = tuple(float(s) for s in self.spikes)
        object.__setattr__(self, "spikes", spikes)
        if any(s <= 1.0 for s in spikes):
            raise ValueError("every spike must exceed the unit bulk level 1")
        if any(a < b for a, b in zip(spikes, spikes[1:])):
            raise ValueError("spikes must be listed in descending order")
        if len(spikes) >= self.p:
            raise ValueError("need k < p")

    @property
    def k(self) -> int:
        return len(self.spikes)


def sample_spiked_gaussian(pop: SpikedPopulation, n: int, key: int) -> np.ndarray:
    """n observations from N(0, Sigma) with the population's spiked Sigma.

    Pure function of (pop, n, key): repeated calls return byte-identical
    matrices. Rows are observations. With ``rotate`` a Haar orthogonal matrix
    drawn from the same stream conjugates Sigma.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    x = normals(key, (n, pop.p))
    if pop.k:
        scale = np.ones(pop.p)
        scale[: pop.k] = np.sqrt(pop.spikes)
        x = x * scale
    if pop.rotate:
        q = haar_orthogonal(subkey(key, 1), pop.p)
        x = x @ q.T
    return x


def metrics(estimates: Iterable[int], k_true: int) -> tuple[float, float, float]:
    """(rmse, accuracy, mean k-hat) of a batch of estimates.

    rmse is the mean of ((k_hat - k)/k)**2; for the null case k = 0, where
    that ratio is undefined, it is the mean of k_hat**2 (squared error about
    zero), keeping the 0.02 calibration budget meaningful.
    """
    est = np.asarray(list(estimates), dtype=float)
    if est.size == 0:
        raise ValueError("need at least one estimate")
    if k_true > 0:
        rmse = float(np.mean(((est - k_true) / k_true) ** 2))
    else:
        rmse = float(np.mean(est**2))
    accuracy = float(np.mean(est == k_true))
    return rmse, accuracy, float(np.mean(est))


@dataclass(frozen=True)
class ExperimentPlan:
    c_target: float
    n_grid: tuple[int, ...]
    spikes: tuple[float, ...]
    replications: int
    estimators: tuple[EstimatorSpec, ...]
    base_seed: int = DEFAULT_BASE_SEED
    rotate: bool = False
    calibration_replications: int = 500
    calibration_target: float = 0.02
    calibration_grid_step: float = 0.01
    name: str | None = None

    def __post_init__(self) -> None:
        if self.c_target <= 0:
            raise ConfigError("c_target must be positive")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.n_grid:
            raise ConfigError("n_grid must be nonempty")
        if not self.estimators:
            raise ConfigError("estimators must be nonempty")
        for n in self.n_grid:
            self.p_for(n)  # validates the 2% rule

    def p_for(self, n: int) -> int:
        """p = round(c_target * n), kept within 2% of the target ratio."""
        p = int(math.floor(self.c_target * n + 0.5))
        if p < 2:
            raise ConfigError(f"n={n} gives p={p} < 2 at c={self.c_target}")
        if abs(p / n - self.c_target) > 0.02 * self.c_target + 1e-12:
            raise ConfigError(
                f"n={n} cannot approximate c={self.c_target} within 2% (p={p})"
            )
        return p

    @property
    def k_true(self) -> int:
        return len(self.spikes)


@dataclass(frozen=True)
class ReportRow:
    n: int
    p: int
    estimator: str
    rmse: float
    accuracy: float
    mean_k_hat: float
    replications: int
    seed: int
    failures: int = 0


_CSV_COLUMNS = (
    "n", "p", "estimator", "rmse", "accuracy", "mean_k_hat",
    "replications", "seed", "failures",
)


@dataclass(frozen=True)
class MonteCarloReport:
    rows: tuple[ReportRow, ...]
    config: dict
    base_seed: int
    k_true: int
    raw_estimates: dict | None = None  # (n, estimator) -> tuple of k-hats; not serialized

    def to_json_doc(self) -> dict:
        return {
            "meta": {
                "tool": "spikecount",
                "version": __version__,
                "config": self.config,
                "base_seed": self.base_seed,
                "k_true": self.k_true,
            },
            "rows": [
                {col: getattr(row, col) for col in _CSV_COLUMNS} for row in self.rows
            ],
        }

    def to_json(self, fh: IO[str]) -> None:
        json.dump(self.to_json_doc(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    @classmethod
    def from_json_doc(cls, doc: dict) -> "MonteCarloReport":
        meta = doc["meta"]
        rows = tuple(ReportRow(**row) for row in doc["rows"])
        return cls(
            rows=rows,
            config=meta["config"],
            base_seed=meta["base_seed"],
            k_true=meta["k_true"],
        )

    def to_csv(self, fh: IO[str]) -> None:
        write_header_comment(fh, self.config, self.base_seed)
        fh.write(",".join(_CSV_COLUMNS) + "\n")
        for row in self.rows:
            cells = [repr(getattr(row, col)) if isinstance(getattr(row, col), float)
                     else str(getattr(row, col)) for col in _CSV_COLUMNS]
            fh.write(",".join(cells) + "\n")


def write_header_comment(fh: IO[str], config: dict, base_seed: int) -> None:
    """Reproducibility header: version, canonical config, base seed. No timestamps."""
    fh.write(f"# spikecount {__version__}\n")
    fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
    fh.write(f"# base_seed: {base_seed}\n")


def _resolve_estimators(
    plan: ExperimentPlan, p: int, n: int
) -> list[EstimatorSpec]:
    """Fill in calibrated deltas for this grid cell, keeping display labels."""
    resolved = []
    for est in plan.estimators:
        if est.kind is EstimatorKind.AIC_STAR and est.delta is None:
            cal = calibrate_delta(
                p,
                n,
                replications=plan.calibration_replications,
                target=plan.calibration_target,
                grid_step=plan.calibration_grid_step,
                base_seed=plan.base_seed,
            )
            resolved.append(replace(est, delta=cal.delta_n, label=est.display_label))
        else:
            resolved.append(est)
    return resolved


def run_monte_carlo(
    plan: ExperimentPlan, threads: int = 1, keep_estimates: bool = False
) -> MonteCarloReport:
    """Execute the plan and aggregate per-(n, estimator) metrics.

    Per replication r of cell n, data comes from the stream keyed by
    (base_seed, TAG_DATA, n, r); every estimator scores that same spectrum.
    Estimator failures are excluded from the metrics and counted per row.
    Results do not depend on ``threads``.
    """
    k_true = plan.k_true
    rows: list[ReportRow] = []
    raw: dict = {}
    for n in plan.n_grid:
        p = plan.p_for(n)
        pop = SpikedPopulation(p=p, spikes=plan.spikes, rotate=plan.rotate)
        resolved = _resolve_estimators(plan, p, n)

        def one_rep(r: int, n: int = n, pop: SpikedPopulation = pop,
                    resolved: list[EstimatorSpec] = resolved) -> list[int | None]:
            y = sample_spiked_gaussian(pop, n, derive_key(plan.base_seed, TAG_DATA, n, r))
            spectrum = spectrum_from_data(y, Divisor.N_MINUS_1)
            out: list[int | None] = []
            for est in resolved:
                try:
                    out.append(estimate_spikes(spectrum, est).k_hat)
                except SpikecountError:
                    out.append(None)
            return out

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                per_rep = list(pool.map(one_rep, range(plan.replications)))
        else:
            per_rep = [one_rep(r) for r in range(plan.replications)]

        for idx, est in enumerate(resolved):
            k_hats = [out[idx] for out in per_rep if out[idx] is not None]
            failures = plan.replications - len(k_hats)
            if not k_hats:
                raise SpikecountError(
                    f"estimator {est.display_label} failed in every replication at n={n}"
                )
            rmse, accuracy, mean_k = metrics(k_hats, k_true)
            rows.append(
                ReportRow(
                    n=n, p=p, estimator=est.display_label,
                    rmse=rmse, accuracy=accuracy, mean_k_hat=mean_k,
                    replications=len(k_hats), seed=plan.base_seed,
                    failures=failures,
                )
            )
            if keep_estimates:
                raw[(n, est.display_label)] = tuple(k_hats)

    return MonteCarloReport(
        rows=tuple(rows),
        config=plan_to_dict(plan),
        base_seed=plan.base_seed,
        k_true=k_true,
        raw_estimates=raw if keep_estimates else None,
    )


# ---------------------------------------------------------------------------
# plan (de)serialization and named presets

_KIND_NAMES = {k.value: k for k in EstimatorKind}


def _estimator_to_dict(est: EstimatorSpec) -> dict:
    d: dict = {"kind": est.kind.value}
    if est.kind is EstimatorKind.AIC_STAR:
        d["delta"] = "calibrated" if est.delta is None else est.delta
    if est.candidates is not None:
        d["candidates"] = est.candidates
    if est.label is not None:
        d["label"] = est.label
    return d


def _estimator_from_dict(d: dict) -> EstimatorSpec:
    if "kind" not in d:
        raise ConfigError("estimator entry needs a 'kind'")
    kind_name = str(d["kind"]).lower().replace("-", "_")
    if kind_name not in _KIND_NAMES:
        raise ConfigError(
            f"unknown estimator kind {d['kind']!r}; choose from {sorted(_KIND_NAMES)}"
        )
    kind = _KIND_NAMES[kind_name]
    delta = d.get("delta")
    if delta == "calibrated":
        delta = None
    elif delta is not None:
        delta = float(delta)
    gamma = d.get("gamma")
    beta = d.get("beta")
    kwargs: dict = {
        "kind": kind,
        "delta": delta,
        "candidates": d.get("candidates"),
        "label": d.get("label"),
    }
    if gamma is not None:
        g = float(gamma)
        kwargs["delta_schedule"] = lambda n, g=g: g * n ** -0.25
    if beta is not None:
        b = float(beta)
        kwargs["dn_schedule"] = lambda n, b=b: b * n ** -0.625
    return EstimatorSpec(**kwargs)


def plan_to_dict(plan: ExperimentPlan) -> dict:
    return {
        "name": plan.name,
        "c_target": plan.c_target,
        "n_grid": list(plan.n_grid),
        "spikes": list(plan.spikes),
        "replications": plan.replications,
        "rotate": plan.rotate,
        "base_seed": plan.base_seed,
        "calibration": {
            "replications": plan.calibration_replications,
            "target": plan.calibration_target,
            "grid_step": plan.calibration_grid_step,
        },
        "estimators": [_estimator_to_dict(e) for e in plan.estimators],
    }


def plan_from_dict(d: dict) -> ExperimentPlan:
    try:
        cal = d.get("calibration", {})
        return ExperimentPlan(
            c_target=float(d["c_target"]),
            n_grid=tuple(int(n) for n in d["n_grid"]),
            spikes=tuple(float(s) for s in d.get("spikes", ())),
            replications=int(d["replications"]),
            estimators=tuple(_estimator_from_dict(e) for e in d["estimators"]),
            base_seed=int(d.get("base_seed", DEFAULT_BASE_SEED)),
            rotate=bool(d.get("rotate", False)),
            calibration_replications=int(cal.get("replications", 500)),
            calibration_target=float(cal.get("target", 0.02)),
            calibration_grid_step=float(cal.get("grid_step", 0.01)),
            name=d.get("name"),
        )
    except KeyError as exc:
        raise ConfigError(f"plan is missing required field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid plan: {exc}") from exc


_SQRT_HALF_SPIKE = 1.0 + math.sqrt(0.5) + 0.5  # ten equal spikes for the zero-gap study

_PRESETS: dict[str, dict] = {
    "model-1": {"c_target": 1.0, "spikes": [4.5, 3.0],
                "estimators": [{"kind": "aic_star", "delta": "calibrated"}]},
    "model-2": {"c_target": 1.0, "spikes": [3.0, 2.3],
                "estimators": [{"kind": "aic_star", "delta": "calibrated"}]},
    "model-a": {"c_target": 1.0, "spikes": [3.5, 2.5],
                "estimators": [{"kind": "aic_star", "delta": "calibrated"}, {"kind": "py"}]},
    "model-b": {"c_target": 1.0, "spikes": [3.0, 2.1],
                "estimators": [{"kind": "aic_star", "delta": "calibrated"}, {"kind": "py"},
                               {"kind": "aic"}]},
    "model-c": {"c_target": 1.0, "spikes": [3.0, 3.0],
                "estimators": [{"kind": "aic_star", "delta": "calibrated"}, {"kind": "py"}]},
    "model-d": {"c_target": 1.0, "spikes": [3.5, 3.5],
                "estimators": [{"kind": "aic_star", "delta": "calibrated"}, {"kind": "aic"}]},
    "model-e": {"c_target": 1.0, "spikes": [4.0, 4.0, 3.5, 3.5, 3.5],
                "estimators": [{"kind": "aic_star", "delta": "calibrated"}, {"kind": "aic"}]},
    "table-2": {"c_target": 0.5, "spikes": [_SQRT_HALF_SPIKE] * 10,
                "n_grid": [100, 200, 400, 800, 1200, 1500, 2000, 2500, 3200],
                "replications": 50,
                "estimators": [{"kind": "aic_star", "delta": 0.0, "label": "AIC*(delta=0)"}]},
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset_plan(
    name: str,
    replications: int | None = None,
    n_grid: tuple[int, ...] | None = None,
    base_seed: int | None = None,
    calibration_replications: int | None = None,
) -> ExperimentPlan:
    """Named experiment plan, with the common knobs overridable."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    d = dict(_PRESETS[name])
    d.setdefault("n_grid", [200, 400, 600, 800])
    d.setdefault("replications", 100)
    d["name"] = name
    if replications is not None:
        d["replications"] = replications
    if n_grid is not None:
        d["n_grid"] = list(n_grid)
    if base_seed is not None:
        d["base_seed"] = base_seed
    plan = plan_from_dict(d)
    if calibration_replications is not None:
        plan = replace(plan, calibration_replications=calibration_replications)
    return plan
