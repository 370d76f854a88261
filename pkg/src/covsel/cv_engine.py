"""Cross-validation splits, risk estimation, and the candidate selector.

A split scheme is expanded into boolean validation masks; for each split,
every candidate is fitted on the training rows and scored on the
validation rows.  The selector picks the candidate with the smallest risk
averaged over splits (unweighted mean), breaking exact ties in favour of
the lowest library index.  When the true covariance matrix is known (in
simulation), the same machinery produces oracle selections from exact
risk differences instead of estimated risks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, EstimationError, SelectionError
from .estimators import CandidateLibrary, EstimatorSpec, apply_library
from .loss_risk import (
    estimate_weight_matrix,
    resolve_constant_scaling,
    row_losses,
    true_risk_difference,
)
from .matrix_core import as_data_matrix, as_square_matrix, is_psd, sample_covariance, scaled_frobenius_sq

__all__ = [
    "VFold",
    "MonteCarloSplit",
    "SingleSplit",
    "SplitScheme",
    "validation_fraction",
    "scheme_description",
    "make_splits",
    "CandidateEvaluation",
    "evaluate_candidates",
    "cv_risk_estimate",
    "CandidateResult",
    "SelectionReport",
    "select",
    "OracleReport",
    "oracle_select_cv",
    "oracle_select_full",
]


@dataclass(frozen=True)
class VFold:
    """Partition into ``folds`` balanced folds; each fold validates once."""

    folds: int
    seed: int = 0


@dataclass(frozen=True)
class MonteCarloSplit:
    """``count`` independent random splits with a fixed validation fraction."""

    count: int
    validation_fraction: float
    seed: int = 0


@dataclass(frozen=True)
class SingleSplit:
    """One random train/validation split."""

    validation_fraction: float
    seed: int = 0


SplitScheme = Union[VFold, MonteCarloSplit, SingleSplit]


def validation_fraction(scheme: SplitScheme) -> float:
    """The validation proportion implied by a scheme."""
    if isinstance(scheme, VFold):
        return 1.0 / scheme.folds
    return scheme.validation_fraction


def scheme_description(scheme: SplitScheme) -> dict:
    if isinstance(scheme, VFold):
        return {"kind": "v_fold", "folds": scheme.folds, "seed": scheme.seed}
    if isinstance(scheme, MonteCarloSplit):
        return {
            "kind": "monte_carlo",
            "count": scheme.count,
            "validation_fraction": scheme.validation_fraction,
            "seed": scheme.seed,
        }
    if isinstance(scheme, SingleSplit):
        return {
            "kind": "single",
            "validation_fraction": scheme.validation_fraction,
            "seed": scheme.seed,
        }
    raise ConfigError(f"unknown split scheme {scheme!r}")


def _random_masks(rng, n: int, fraction: float, count: int) -> list[np.ndarray]:
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"validation fraction must lie in (0, 1), got {fraction}")
    if n * fraction < 1.0:
        raise ConfigError(f"validation fraction {fraction} selects no rows out of {n}")
    n_val = math.ceil(n * fraction)
    if n_val >= n:
        raise ConfigError(f"validation fraction {fraction} leaves no training rows out of {n}")
    masks = []
    for _ in range(count):
        mask = np.zeros(n, dtype=bool)
        mask[rng.permutation(n)[:n_val]] = True
        masks.append(mask)
    return masks


def make_splits(scheme: SplitScheme, n: int) -> list[np.ndarray]:
    """Expand a scheme into boolean validation masks of length ``n``.

    Deterministic in ``(scheme, scheme.seed, n)``.  V-fold masks partition
    the index set with fold sizes balanced within one (the first
    ``n mod V`` folds take the extra observation).
    """
    if n < 2:
        raise ConfigError(f"need at least 2 observations to split, got {n}")
    rng = np.random.default_rng(scheme.seed)
    if isinstance(scheme, VFold):
        if scheme.folds < 2:
            raise ConfigError(f"need at least 2 folds, got {scheme.folds}")
        if scheme.folds > n:
            raise ConfigError(f"cannot make {scheme.folds} folds from {n} observations")
        perm = rng.permutation(n)
        base, extra = divmod(n, scheme.folds)
        masks = []
        start = 0
        for fold in range(scheme.folds):
            size = base + (1 if fold < extra else 0)
            mask = np.zeros(n, dtype=bool)
            mask[perm[start : start + size]] = True
            masks.append(mask)
            start += size
        return masks
    if isinstance(scheme, MonteCarloSplit):
        if scheme.count < 1:
            raise ConfigError(f"need at least one split, got {scheme.count}")
        return _random_masks(rng, n, scheme.validation_fraction, scheme.count)
    if isinstance(scheme, SingleSplit):
        return _random_masks(rng, n, scheme.validation_fraction, 1)
    raise ConfigError(f"unknown split scheme {scheme!r}")


def _fold_scaling(policy: str, train: np.ndarray, dim: int):
    if policy == "weighted":
        return estimate_weight_matrix(train)
    return resolve_constant_scaling(policy, dim)


def _oracle_scaling(policy: str, psi0: np.ndarray):
    if policy == "weighted":
        variances = np.diag(psi0)
        if np.any(variances <= 0.0):
            raise ConfigError("weighted scaling needs strictly positive true variances")
        weights = 1.0 / np.sqrt(np.outer(variances, variances))
        np.fill_diagonal(weights, 1.0 / variances)
        return weights
    return resolve_constant_scaling(policy, psi0.shape[0])


@dataclass
class CandidateEvaluation:
    """Per-candidate, per-split risks from one cross-validation pass.

    Risk arrays have shape ``(K, n_splits)`` and hold NaN for failed
    candidates.  A candidate that fails on any split is excluded outright;
    ``failures`` maps its library index to the first reason seen.
    """

    library: CandidateLibrary
    observation_risks: np.ndarray | None
    matrix_risks: np.ndarray | None
    oracle_diffs: np.ndarray | None
    failures: dict[int, str]
    warnings: tuple[str, ...]
    max_abs_estimate: float

    def _means(self, risks: np.ndarray | None) -> np.ndarray:
        if risks is None:
            raise ConfigError("requested risk flavour was not computed in this pass")
        means = risks.mean(axis=1)
        means[list(self.failures)] = np.nan
        return means

    def mean_observation_risks(self) -> np.ndarray:
        return self._means(self.observation_risks)

    def mean_matrix_risks(self) -> np.ndarray:
        return self._means(self.matrix_risks)

    def mean_oracle_diffs(self) -> np.ndarray:
        return self._means(self.oracle_diffs)


def evaluate_candidates(
    library: CandidateLibrary,
    data,
    splits,
    *,
    scaling: str = "one",
    center: bool = True,
    observation: bool = True,
    matrix: bool = False,
    psi0=None,
) -> CandidateEvaluation:
    """Fit and score every candidate over every split in one pass.

    ``observation`` requests the mean observation-level loss on the
    validation rows; ``matrix`` requests the squared scaled distance to
    the validation sample covariance (constant scaling only).  With
    ``psi0`` given, exact risk differences against it are also recorded
    for each training-fold estimate.

    With ``center=True`` each training fold is column-centered and the
    fold means are subtracted from its validation rows before scoring.
    """
    data = as_data_matrix(data, min_rows=2)
    n, dim = data.shape
    if matrix and scaling == "weighted":
        raise ConfigError("the matrix risk shortcut requires a constant scaling factor")
    if psi0 is not None:
        psi0 = as_square_matrix(psi0)
        if psi0.shape[0] != dim:
            raise ValueError(f"psi0 dimension {psi0.shape[0]} does not match data dimension {dim}")
        oracle_eta = _oracle_scaling(scaling, psi0)

    n_candidates = len(library)
    n_splits = len(splits)
    if n_splits == 0:
        raise ConfigError("at least one split is required")
    obs = np.full((n_candidates, n_splits), np.nan) if observation else None
    mat = np.full((n_candidates, n_splits), np.nan) if matrix else None
    orc = np.full((n_candidates, n_splits), np.nan) if psi0 is not None else None
    failures: dict[int, str] = {}
    warnings: list[str] = []
    max_abs = 0.0
    min_train = n

    for split_idx, mask in enumerate(splits):
        # A split is a validation mask (training = complement) or an
        # explicit (train_mask, validation_mask) pair, which permits
        # overlapping sets in tests.
        if isinstance(mask, tuple):
            train_mask = np.asarray(mask[0], dtype=bool)
            val_mask = np.asarray(mask[1], dtype=bool)
        else:
            val_mask = np.asarray(mask, dtype=bool)
            train_mask = ~val_mask
        if val_mask.shape != (n,) or train_mask.shape != (n,):
            raise ValueError(f"split mask {split_idx} does not match {n} observations")
        train = data[train_mask]
        val = data[val_mask]
        if train.shape[0] == 0 or val.shape[0] == 0:
            raise ConfigError(f"split {split_idx} leaves an empty training or validation set")
        min_train = min(min_train, train.shape[0])
        if center:
            fold_means = train.mean(axis=0, keepdims=True)
            train = train - fold_means
            val = val - fold_means
        eta = _fold_scaling(scaling, train, dim)
        val_cov = sample_covariance(val) if matrix else None
        fits = apply_library(library, train)
        for cand_idx, (estimate, failure) in enumerate(fits):
            if failure is not None:
                failures.setdefault(cand_idx, failure)
                continue
            max_abs = max(max_abs, float(np.max(np.abs(estimate))))
            if obs is not None:
                obs[cand_idx, split_idx] = float(np.mean(row_losses(val, estimate, eta)))
            if mat is not None:
                mat[cand_idx, split_idx] = scaled_frobenius_sq(val_cov - estimate, eta)
            if orc is not None:
                orc[cand_idx, split_idx] = true_risk_difference(estimate, psi0, oracle_eta)

    if min_train < dim:
        warnings.append(
            f"training folds have as few as {min_train} observations for {dim} features; "
            "sample-covariance-based candidates are rank-deficient"
        )
    return CandidateEvaluation(
        library=library,
        observation_risks=obs,
        matrix_risks=mat,
        oracle_diffs=orc,
        failures=failures,
        warnings=tuple(warnings),
        max_abs_estimate=max_abs,
    )


def cv_risk_estimate(spec: EstimatorSpec, data, splits, *, scaling: str = "one", center: bool = True) -> float:
    """Cross-validated observation-level risk of a single candidate."""
    library = CandidateLibrary((spec,))
    ev = evaluate_candidates(library, data, splits, scaling=scaling, center=center)
    if 0 in ev.failures:
        raise EstimationError(f"estimator {spec.id} failed: {ev.failures[0]}")
    return float(ev.mean_observation_risks()[0])


def _argmin_with_ties(values: np.ndarray) -> tuple[int, list[int]]:
    valid = np.flatnonzero(np.isfinite(values))
    if valid.size == 0:
        raise SelectionError("every candidate failed; nothing to select")
    best = float(np.min(values[valid]))
    ties = [int(i) for i in valid if values[i] == best]
    return ties[0], ties


@dataclass
class CandidateResult:
    index: int
    id: str
    family: str
    params: dict
    cv_risk: float | None
    psd: bool | None
    failure: str | None


@dataclass
class SelectionReport:
    """Outcome of one selection run, in library order plus the winner."""

    candidates: list[CandidateResult]
    selected_index: int
    selected_id: str
    tie_ids: tuple[str, ...]
    estimate: np.ndarray
    scheme: dict
    seed: int
    scaling: str
    risk: str
    centered: bool
    n_obs: int
    dim: int
    warnings: tuple[str, ...] = field(default_factory=tuple)


def select(
    library: CandidateLibrary,
    data,
    scheme: SplitScheme,
    *,
    scaling: str = "one",
    risk: str = "observation",
    center: bool = True,
) -> SelectionReport:
    """Cross-validated estimator selection over a candidate library.

    ``risk`` chooses the score driving the argmin: ``"observation"`` is
    the mean observation-level loss on validation rows; ``"matrix"`` is
    the squared distance to the validation sample covariance, which is
    cheaper and (for constant scaling) selects the same candidate.  The
    winning candidate is refitted on the full dataset and the refit is
    included in the report.
    """
    if risk not in ("observation", "matrix"):
        raise ConfigError(f"risk must be 'observation' or 'matrix', got {risk!r}")
    if risk == "matrix" and scaling == "weighted":
        raise ConfigError("matrix risk requires a constant scaling factor; use risk='observation'")
    data = as_data_matrix(data, min_rows=2)
    splits = make_splits(scheme, data.shape[0])
    ev = evaluate_candidates(
        library,
        data,
        splits,
        scaling=scaling,
        center=center,
        observation=risk == "observation",
        matrix=risk == "matrix",
    )
    risks = ev.mean_observation_risks() if risk == "observation" else ev.mean_matrix_risks()

    full = data - data.mean(axis=0, keepdims=True) if center else data
    full_fits = apply_library(library, full)
    failures = dict(ev.failures)
    psd_flags: list[bool | None] = []
    for idx, (estimate, failure) in enumerate(full_fits):
        if failure is not None:
            failures.setdefault(idx, f"full-data fit: {failure}")
            psd_flags.append(None)
        else:
            psd_flags.append(is_psd(estimate))
    risks = risks.copy()
    risks[list(failures)] = np.nan

    selected_index, tie_indices = _argmin_with_ties(risks)
    results = [
        CandidateResult(
            index=idx,
            id=spec.id,
            family=spec.family,
            params={k: v for k, v in spec.params.items() if k != "matrix"},
            cv_risk=None if idx in failures else float(risks[idx]),
            psd=psd_flags[idx],
            failure=failures.get(idx),
        )
        for idx, spec in enumerate(library)
    ]
    return SelectionReport(
        candidates=results,
        selected_index=selected_index,
        selected_id=library[selected_index].id,
        tie_ids=tuple(library[i].id for i in tie_indices),
        estimate=full_fits[selected_index][0],
        scheme=scheme_description(scheme),
        seed=scheme.seed,
        scaling=scaling,
        risk=risk,
        centered=center,
        n_obs=data.shape[0],
        dim=data.shape[1],
        warnings=ev.warnings,
    )


@dataclass
class OracleReport:
    """Exact risk differences against a known covariance matrix.

    ``cv_risk_diffs`` average the training-fold estimates' squared
    distances to the truth across splits; ``full_risk_diffs`` use a single
    fit on the whole dataset.  Either side may be absent depending on
    which oracle was run.  Failed candidates hold None.
    """

    ids: tuple[str, ...]
    cv_risk_diffs: tuple | None = None
    full_risk_diffs: tuple | None = None
    cv_oracle_index: int | None = None
    cv_oracle_id: str | None = None
    full_oracle_index: int | None = None
    full_oracle_id: str | None = None


def oracle_select_cv(
    library: CandidateLibrary,
    data,
    splits,
    psi0,
    *,
    scaling: str = "one",
    center: bool = False,
) -> OracleReport:
    """Oracle selection over training-fold estimates (simulation only)."""
    ev = evaluate_candidates(
        library,
        data,
        splits,
        scaling=scaling,
        center=center,
        observation=False,
        matrix=False,
        psi0=psi0,
    )
    diffs = ev.mean_oracle_diffs()
    index, _ = _argmin_with_ties(diffs)
    return OracleReport(
        ids=library.ids,
        cv_risk_diffs=tuple(None if np.isnan(v) else float(v) for v in diffs),
        cv_oracle_index=index,
        cv_oracle_id=library[index].id,
    )


def oracle_select_full(
    library: CandidateLibrary,
    data,
    psi0,
    *,
    scaling: str = "one",
    center: bool = False,
) -> OracleReport:
    """Oracle selection over full-dataset estimates (simulation only)."""
    data = as_data_matrix(data, min_rows=1)
    psi0 = as_square_matrix(psi0)
    eta = _oracle_scaling(scaling, psi0)
    if center:
        data = data - data.mean(axis=0, keepdims=True)
    diffs = np.full(len(library), np.nan)
    for idx, (estimate, failure) in enumerate(apply_library(library, data)):
        if failure is None:
            diffs[idx] = true_risk_difference(estimate, psi0, eta)
    index, _ = _argmin_with_ties(diffs)
    return OracleReport(
        ids=library.ids,
        full_risk_diffs=tuple(None if np.isnan(v) else float(v) for v in diffs),
        full_oracle_index=index,
        full_oracle_id=library[index].id,
    )
