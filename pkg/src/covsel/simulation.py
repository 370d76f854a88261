"""Covariance models, Gaussian sampling, and the Monte-Carlo experiment runner.

Eight covariance models cover dense, banded, tapered, random-sparse, and
latent-factor structures.  The runner draws mean-zero Gaussian datasets
from each model over a grid of sample sizes and dimension ratios, runs the
cross-validated selector next to the exact oracle selectors, and emits
long-format result rows from which risk-difference ratios and mean norm
errors are summarized.

Seeding: every replication derives independent streams for the model
draw, the data draw, and the CV split from
``SeedSequence([master, model, n, ratio_index, replication, stream])``
with stream tags 0, 1, and 2, so any cell can be reproduced in isolation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cv_engine import MonteCarloSplit, SingleSplit, VFold, evaluate_candidates, make_splits
from .errors import ConfigError, EstimationError
from .estimators import CandidateLibrary, apply_library, default_library, wide_library
from .matrix_core import as_square_matrix, spectral_norm, symmetrize

__all__ = [
    "CovModelSpec",
    "build_model_covariance",
    "sample_gaussian",
    "ExperimentConfig",
    "ResultRow",
    "CellStats",
    "ExperimentResult",
    "expected_row_count",
    "run_experiment",
    "run_monte_carlo",
    "summarize_ratios",
    "BenchmarkResult",
    "run_benchmark",
    "benchmark_table",
    "SELECTED_SUBJECT",
    "CV_ORACLE_SUBJECT",
    "FULL_ORACLE_SUBJECT",
]

logger = logging.getLogger(__name__)

#: Subject labels used in result rows next to individual candidate ids.
SELECTED_SUBJECT = "cvCovEst"
CV_ORACLE_SUBJECT = "cv-oracle"
FULL_ORACLE_SUBJECT = "full-oracle"

_METRICS = ("cv_ratio", "full_ratio", "frobenius", "spectral")


@dataclass(frozen=True)
class CovModelSpec:
    """One covariance model instance: model number, dimension, draw seed.

    Models 1-4, 6, and 7 are deterministic in the dimension; models 5 and
    8 are deterministic in ``(dim, seed)``.
    """

    model: int
    dim: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.model <= 8:
            raise ConfigError(f"model must be in 1..8, got {self.model}")
        if self.dim < 1:
            raise ConfigError(f"dimension must be positive, got {self.dim}")


def _repair_psd(matrix: np.ndarray) -> np.ndarray:
    """Clip the spectrum at 1e-10 when a model matrix is not PD.

    Matrices that are already positive definite are returned untouched so
    their entries stay exactly as constructed.  The clip matters for
    model 3, whose banded construction is indefinite once the dimension
    exceeds 3; the repaired matrix is the covariance actually sampled
    from and benchmarked against.
    """
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if float(eigvals[0]) >= 1e-10:
        return matrix
    clipped = np.maximum(eigvals, 1e-10)
    out = (eigvecs * clipped) @ eigvecs.T
    return 0.5 * (out + out.T)


def build_model_covariance(spec: CovModelSpec) -> np.ndarray:
    """Construct the model covariance matrix.

    1. dense: unit diagonal, 0.5 elsewhere
    2. AR(1): ``0.7 ** |j - l|``
    3. MA(1): AR(1) truncated beyond the first off-diagonal
    4. MA(2): 1 / 0.6 / 0.3 by band, 0 beyond
    5. random sparse: a uniform draw mapped to {1, -1, 0}, crossprod plus
       identity, rescaled to a correlation matrix
    6. Toeplitz: ``0.6 * |j - l| ** -1.3`` off the diagonal
    7. model 6 with alternating off-diagonal signs
    8. three-factor: ``beta @ beta.T + I`` with standard normal loadings

    The result is guaranteed positive definite: a construction with
    negative eigenvalues (model 3 beyond dimension 3) is spectrally
    clipped, see :func:`_repair_psd`.
    """
    dim = spec.dim
    idx = np.arange(dim)
    dist = np.abs(idx[:, None] - idx[None, :])
    if spec.model == 1:
        psi = np.where(dist == 0, 1.0, 0.5)
    elif spec.model == 2:
        psi = 0.7 ** dist.astype(np.float64)
    elif spec.model == 3:
        psi = np.where(dist <= 1, 0.7 ** dist.astype(np.float64), 0.0)
    elif spec.model == 4:
        psi = np.select([dist == 0, dist == 1, dist == 2], [1.0, 0.6, 0.3], default=0.0)
    elif spec.model == 5:
        rng = np.random.default_rng(spec.seed)
        draw = rng.uniform(size=(dim, dim))
        signs = np.where(draw < 0.25, 1.0, np.where(draw < 0.5, -1.0, 0.0))
        gram = signs.T @ signs + np.eye(dim)
        scale = np.sqrt(np.diag(gram))
        psi = gram / np.outer(scale, scale)
        np.fill_diagonal(psi, 1.0)
    elif spec.model in (6, 7):
        psi = np.eye(dim)
        off = dist > 0
        decay = 0.6 * dist[off].astype(np.float64) ** -1.3
        if spec.model == 7:
            decay *= (-1.0) ** dist[off]
        psi[off] = decay
    else:
        rng = np.random.default_rng(spec.seed)
        loadings = rng.standard_normal((dim, 3))
        psi = loadings @ loadings.T + np.eye(dim)
    return _repair_psd(symmetrize(psi))


def sample_gaussian(psi, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` mean-zero Gaussian rows with covariance ``psi``.

    Uses a spectral factorization so positive semi-definite but singular
    matrices sample correctly.  The matrix is symmetrized and eigenvalues
    below 1e-10 are treated as zero; genuinely negative spectra raise.
    """
    if n < 1:
        raise ConfigError(f"need at least one draw, got {n}")
    psi = symmetrize(as_square_matrix(psi))
    try:
        eigvals, eigvecs = np.linalg.eigh(psi)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"factorization of the sampling covariance failed: {exc}") from exc
    tol = 1e-8 * max(float(eigvals[-1]), 1.0)
    if float(eigvals[0]) < -tol:
        raise EstimationError(
            f"sampling covariance is not positive semi-definite (min eigenvalue {eigvals[0]:.3e})"
        )
    eigvals = np.where(eigvals < 1e-10, 0.0, eigvals)
    factor = eigvecs * np.sqrt(eigvals)
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, psi.shape[0])) @ factor.T


# ---------------------------------------------------------------------------
# Experiment configuration and result rows
# ---------------------------------------------------------------------------


def _dim_for(n: int, ratio: float) -> int:
    return int(np.rint(ratio * n))


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid definition for a Monte-Carlo run.

    One cell is a ``(model, n, ratio)`` triple with dimension
    ``round(ratio * n)``.  ``metrics`` picks which result rows are
    emitted; ``selector_risk`` picks the score driving the selector
    (``"matrix"`` and ``"observation"`` select identically under a
    constant scaling factor).  Model matrices for models 5 and 8 are
    redrawn each replication unless ``fix_model`` is set.

    The CV design is V-fold by default; setting ``validation_fraction``
    switches to a single random split, or to ``split_count`` repeated
    random splits when that is also given.
    """

    models: tuple[int, ...]
    sample_sizes: tuple[int, ...]
    ratios: tuple[float, ...]
    replications: int
    folds: int = 5
    validation_fraction: float | None = None
    split_count: int | None = None
    metrics: tuple[str, ...] = _METRICS
    seed: int = 0
    scaling: str = "one"
    selector_risk: str = "matrix"
    center: bool = False
    fix_model: bool = False
    library: CandidateLibrary | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "models", tuple(int(m) for m in self.models))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if not self.models or any(not 1 <= m <= 8 for m in self.models):
            raise ConfigError(f"models must be a nonempty subset of 1..8, got {self.models}")
        if not self.sample_sizes or any(n < 2 for n in self.sample_sizes):
            raise ConfigError("sample sizes must be integers >= 2")
        if not self.ratios or any(r <= 0 for r in self.ratios):
            raise ConfigError("dimension ratios must be positive")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if self.folds < 2:
            raise ConfigError("need at least two folds")
        if self.split_count is not None and self.validation_fraction is None:
            raise ConfigError("split_count requires validation_fraction")
        if self.validation_fraction is not None and not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        if self.split_count is not None and self.split_count < 1:
            raise ConfigError("need at least one split")
        unknown = [m for m in self.metrics if m not in _METRICS]
        if unknown:
            raise ConfigError(f"unknown metrics {unknown}; known: {list(_METRICS)}")
        if not self.metrics:
            raise ConfigError("at least one metric is required")
        if self.scaling not in ("one", "inv_J", "inv_J2"):
            raise ConfigError("simulation runs use a constant scaling factor (one, inv_J, inv_J2)")
        if self.selector_risk not in ("observation", "matrix"):
            raise ConfigError(f"selector_risk must be 'observation' or 'matrix', got {self.selector_risk!r}")
        for n in self.sample_sizes:
            for ratio in self.ratios:
                dim = _dim_for(n, ratio)
                if dim < 2:
                    raise ConfigError(f"cell n={n}, ratio={ratio} yields dimension {dim} < 2")
            if self.validation_fraction is None and self.folds > n:
                raise ConfigError(f"{self.folds}-fold CV impossible with n={n}")
            if self.validation_fraction is not None:
                if n * self.validation_fraction < 1.0:
                    raise ConfigError(f"validation fraction selects no rows for n={n}")
                if math.ceil(n * self.validation_fraction) >= n:
                    raise ConfigError(f"validation fraction leaves no training rows for n={n}")

    def cells(self) -> list[tuple[int, int, int, float, int]]:
        """All (model, n, ratio_index, ratio, dim) grid cells in run order."""
        out = []
        for model in self.models:
            for n in self.sample_sizes:
                for ratio_idx, ratio in enumerate(self.ratios):
                    out.append((model, n, ratio_idx, ratio, _dim_for(n, ratio)))
        return out

    def resolve_library(self) -> CandidateLibrary:
        return self.library if self.library is not None else default_library()

    def scheme(self, seed: int):
        """The CV scheme for one replication, seeded."""
        if self.validation_fraction is None:
            return VFold(self.folds, seed=seed)
        if self.split_count is None:
            return SingleSplit(self.validation_fraction, seed=seed)
        return MonteCarloSplit(self.split_count, self.validation_fraction, seed=seed)

    def validation_proportion(self) -> float:
        return self.validation_fraction if self.validation_fraction is not None else 1.0 / self.folds


@dataclass(frozen=True)
class ResultRow:
    """One long-format result value."""

    model: int
    n: int
    dim: int
    ratio: float
    replication: int
    subject: str
    metric: str
    value: float
    seed: int


@dataclass(frozen=True)
class CellStats:
    """Per-cell side information needed for the finite-sample bound."""

    model: int
    n: int
    dim: int
    ratio: float
    replications: int
    n_candidates: int
    validation_fraction: float
    max_sq_observation: float
    max_abs_estimate: float


@dataclass
class ExperimentResult:
    rows: list[ResultRow]
    cells: list[CellStats]
    config: ExperimentConfig


def _rows_per_replication(metrics, n_candidates: int) -> int:
    count = 0
    if "cv_ratio" in metrics:
        count += n_candidates + 2
    if "full_ratio" in metrics:
        count += n_candidates + 2
    if "frobenius" in metrics:
        count += n_candidates + 1
    if "spectral" in metrics:
        count += n_candidates + 1
    return count


def expected_row_count(config: ExperimentConfig) -> int:
    """Exact number of result rows a clean run will produce."""
    n_candidates = len(config.resolve_library())
    per_rep = _rows_per_replication(config.metrics, n_candidates)
    return len(config.cells()) * config.replications * per_rep


def _stream_seed(master: int, model: int, n: int, ratio_idx: int, rep: int, stream: int) -> int:
    sequence = np.random.SeedSequence([int(master), model, n, ratio_idx, rep, stream])
    return int(sequence.generate_state(1, np.uint64)[0])


def _first_argmin(values: np.ndarray) -> int | None:
    valid = np.flatnonzero(np.isfinite(values))
    if valid.size == 0:
        return None
    best = float(np.min(values[valid]))
    for i in valid:
        if values[i] == best:
            return int(i)
    return None


def _run_cell(config: ExperimentConfig, library: CandidateLibrary, model: int, n: int,
              ratio_idx: int, ratio: float, dim: int) -> tuple[list[ResultRow], CellStats]:
    rows: list[ResultRow] = []
    redrawn = model in (5, 8) and not config.fix_model
    psi0_fixed = None
    max_sq_obs = 0.0
    max_abs_est = 0.0
    want_cv = "cv_ratio" in config.metrics
    want_full = "full_ratio" in config.metrics
    want_frob = "frobenius" in config.metrics
    want_spec = "spectral" in config.metrics
    need_full_fits = want_full or want_frob or want_spec
    observation = config.selector_risk == "observation"

    for rep in range(config.replications):
        if psi0_fixed is not None and not redrawn:
            psi0 = psi0_fixed
        else:
            model_seed = _stream_seed(config.seed, model, n, ratio_idx, rep if redrawn else 0, 0)
            psi0 = build_model_covariance(CovModelSpec(model, dim, model_seed))
            if not redrawn:
                psi0_fixed = psi0
        data_seed = _stream_seed(config.seed, model, n, ratio_idx, rep, 1)
        data = sample_gaussian(psi0, n, data_seed)
        split_seed = _stream_seed(config.seed, model, n, ratio_idx, rep, 2)
        splits = make_splits(config.scheme(split_seed), n)

        ev = evaluate_candidates(
            library,
            data,
            splits,
            scaling=config.scaling,
            center=config.center,
            observation=observation,
            matrix=not observation,
            psi0=psi0,
        )
        selector = ev.mean_observation_risks() if observation else ev.mean_matrix_risks()
        cv_diffs = ev.mean_oracle_diffs()

        full_diffs = np.full(len(library), np.nan)
        frob = np.full(len(library), np.nan)
        spec_norm = np.full(len(library), np.nan)
        failures = dict(ev.failures)
        if need_full_fits:
            for idx, (estimate, failure) in enumerate(apply_library(library, data)):
                if failure is not None:
                    failures.setdefault(idx, f"full-data fit: {failure}")
                    continue
                max_abs_est = max(max_abs_est, float(np.max(np.abs(estimate))))
                residual = estimate - psi0
                full_diffs[idx] = float(np.sum(residual * residual))
                if want_frob:
                    frob[idx] = math.sqrt(max(full_diffs[idx], 0.0))
                if want_spec:
                    spec_norm[idx] = spectral_norm(residual)
        if failures:
            excluded = list(failures)
            selector[excluded] = np.nan
            cv_diffs[excluded] = np.nan
            full_diffs[excluded] = np.nan
            frob[excluded] = np.nan
            spec_norm[excluded] = np.nan
            for idx in excluded:
                logger.warning(
                    "model %d n=%d J=%d rep %d: excluded %s (%s)",
                    model, n, dim, rep, library[idx].id, failures[idx],
                )

        k_hat = _first_argmin(selector)
        if k_hat is None:
            raise EstimationError("every candidate failed in this replication")
        k_tilde = _first_argmin(cv_diffs)
        k_full = _first_argmin(full_diffs) if need_full_fits else None

        max_sq_obs = max(max_sq_obs, float(np.max(data * data)))
        max_abs_est = max(max_abs_est, ev.max_abs_estimate, float(np.max(np.abs(psi0))))

        def emit(subject: str, metric: str, value: float) -> None:
            rows.append(
                ResultRow(
                    model=model, n=n, dim=dim, ratio=ratio, replication=rep,
                    subject=subject, metric=metric, value=float(value), seed=data_seed,
                )
            )

        for idx, spec in enumerate(library):
            if idx in failures:
                continue
            if want_cv:
                emit(spec.id, "cv_risk_diff", cv_diffs[idx])
            if want_full:
                emit(spec.id, "full_risk_diff", full_diffs[idx])
            if want_frob:
                emit(spec.id, "frobenius", frob[idx])
            if want_spec:
                emit(spec.id, "spectral", spec_norm[idx])
        if want_cv:
            emit(SELECTED_SUBJECT, "cv_risk_diff", cv_diffs[k_hat])
            emit(CV_ORACLE_SUBJECT, "cv_risk_diff", cv_diffs[k_tilde])
        if want_full:
            emit(SELECTED_SUBJECT, "full_risk_diff", full_diffs[k_hat])
            emit(FULL_ORACLE_SUBJECT, "full_risk_diff", full_diffs[k_full])
        if want_frob:
            emit(SELECTED_SUBJECT, "frobenius", frob[k_hat])
        if want_spec:
            emit(SELECTED_SUBJECT, "spectral", spec_norm[k_hat])

    stats = CellStats(
        model=model, n=n, dim=dim, ratio=ratio, replications=config.replications,
        n_candidates=len(library), validation_fraction=config.validation_proportion(),
        max_sq_observation=max_sq_obs, max_abs_estimate=max_abs_est,
    )
    return rows, stats


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the full grid; failures skip the affected cell, never the run."""
    library = config.resolve_library()
    rows: list[ResultRow] = []
    cells: list[CellStats] = []
    for model, n, ratio_idx, ratio, dim in config.cells():
        try:
            cell_rows, stats = _run_cell(config, library, model, n, ratio_idx, ratio, dim)
        except Exception:
            logger.exception("cell model=%d n=%d ratio=%s failed; skipping", model, n, ratio)
            continue
        rows.extend(cell_rows)
        cells.append(stats)
    rows.sort(key=lambda r: (r.model, r.n, r.ratio, r.replication, r.subject, r.metric))
    return ExperimentResult(rows=rows, cells=cells, config=config)


def run_monte_carlo(config: ExperimentConfig) -> list[ResultRow]:
    """Long-format result rows for the configured grid."""
    return run_experiment(config).rows


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def _safe_ratio(numerator: float, denominator: float) -> float:
    if denominator == 0.0:
        return 1.0 if numerator == 0.0 else math.inf
    return numerator / denominator


def _cell_key(row: ResultRow) -> tuple:
    return (row.model, row.n, row.dim, row.ratio)


def summarize_ratios(rows, metrics=None) -> dict:
    """Per-cell ratios and mean norms recomputed from long-format rows.

    For risk-difference metrics the summary reports the ratio of
    Monte-Carlo means (selected vs oracle) together with the mean and max
    of the per-replication ratios; for norm metrics it reports the mean
    per subject.  ``metrics``, when given, must all be present in ``rows``.
    """
    by_cell: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        by_cell.setdefault(_cell_key(row), []).append(row)
    present = {row.metric for row in rows}
    if metrics is not None:
        requested = set()
        for metric in metrics:
            if metric == "cv_ratio":
                requested.add("cv_risk_diff")
            elif metric == "full_ratio":
                requested.add("full_risk_diff")
            else:
                requested.add(metric)
        missing = requested - present
        if missing:
            raise ConfigError(f"rows are missing requested metrics: {sorted(missing)}")

    cells = []
    for key in sorted(by_cell):
        model, n, dim, ratio = key
        cell_rows = by_cell[key]
        summary: dict = {"model": model, "n": n, "J": dim, "ratio": ratio}
        summary["replications"] = len({r.replication for r in cell_rows})

        for metric, selected_label, oracle_subject, oracle_label in (
            ("cv_risk_diff", "cv", CV_ORACLE_SUBJECT, "cv"),
            ("full_risk_diff", "full", FULL_ORACLE_SUBJECT, "full"),
        ):
            picked = {r.replication: r.value for r in cell_rows
                      if r.metric == metric and r.subject == SELECTED_SUBJECT}
            oracle = {r.replication: r.value for r in cell_rows
                      if r.metric == metric and r.subject == oracle_subject}
            if not picked or set(picked) != set(oracle):
                continue
            reps = sorted(picked)
            picked_mean = float(np.mean([picked[r] for r in reps]))
            oracle_mean = float(np.mean([oracle[r] for r in reps]))
            per_rep = [_safe_ratio(picked[r], oracle[r]) for r in reps]
            summary[f"{oracle_label}_ratio_of_means"] = _safe_ratio(picked_mean, oracle_mean)
            summary[f"{oracle_label}_ratio_per_replication_mean"] = float(np.mean(per_rep))
            summary[f"{oracle_label}_ratio_per_replication_max"] = float(np.max(per_rep))
            summary[f"{oracle_label}_risk_diff_mean_selected"] = picked_mean
            summary[f"{oracle_label}_risk_diff_mean_oracle"] = oracle_mean

        for metric in ("frobenius", "spectral"):
            metric_rows = [r for r in cell_rows if r.metric == metric]
            if not metric_rows:
                continue
            by_subject: dict[str, list[float]] = {}
            for row in metric_rows:
                by_subject.setdefault(row.subject, []).append(row.value)
            summary[f"mean_{metric}"] = {
                subject: float(np.mean(values)) for subject, values in sorted(by_subject.items())
            }
        cells.append(summary)
    return {"cells": cells}


# ---------------------------------------------------------------------------
# Norm benchmark with per-family tuning
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkResult:
    rows: list[ResultRow]
    table: list[dict]
    config: ExperimentConfig
    procedures: tuple[str, ...]


def _family_grids(library: CandidateLibrary) -> dict[str, list]:
    grids: dict[str, list] = {}
    for spec in library:
        grids.setdefault(spec.family, []).append(spec)
    return grids


def benchmark_table(rows, procedures=None) -> list[dict]:
    """Mean value per (cell, procedure, metric) from benchmark rows."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((_cell_key(row), row.subject, row.metric), []).append(row.value)
    table = []
    for (cell, subject, metric) in sorted(groups, key=lambda k: (k[0], str(k[1]), k[2])):
        if procedures is not None and subject not in procedures:
            continue
        model, n, dim, ratio = cell
        values = groups[(cell, subject, metric)]
        table.append(
            {
                "model": model, "n": n, "J": dim, "ratio": ratio,
                "procedure": subject, "metric": metric,
                "mean": float(np.mean(values)), "replications": len(values),
            }
        )
    return table


def run_benchmark(
    config: ExperimentConfig,
    selection_library: CandidateLibrary | None = None,
    tuning_grids: dict | None = None,
) -> BenchmarkResult:
    """Norm benchmark: the selector against each family tuned on its own.

    The selector picks from ``selection_library`` while each single-family
    procedure picks, with the same CV scheme and risk, from its (usually
    denser) grid in ``tuning_grids``.  Every procedure's winner is then
    refitted on the full dataset and its error norms against the true
    covariance matrix are recorded under the procedure's name.
    """
    for metric in config.metrics:
        if metric not in ("frobenius", "spectral"):
            raise ConfigError(f"benchmark metrics must be frobenius/spectral, got {metric!r}")
    selection_library = selection_library if selection_library is not None else config.resolve_library()
    if tuning_grids is None:
        tuning_grids = _family_grids(wide_library())

    union_specs = list(selection_library)
    index_of = {spec.id: i for i, spec in enumerate(union_specs)}
    for specs in tuning_grids.values():
        for spec in specs:
            if spec.id not in index_of:
                index_of[spec.id] = len(union_specs)
                union_specs.append(spec)
    union = CandidateLibrary(tuple(union_specs))
    groups: dict[str, list[int]] = {SELECTED_SUBJECT: [index_of[s.id] for s in selection_library]}
    for family, specs in tuning_grids.items():
        groups[family] = [index_of[s.id] for s in specs]
    procedures = tuple(groups)

    rows: list[ResultRow] = []
    observation = config.selector_risk == "observation"
    for model, n, ratio_idx, ratio, dim in config.cells():
        redrawn = model in (5, 8) and not config.fix_model
        psi0_fixed = None
        for rep in range(config.replications):
            if psi0_fixed is not None and not redrawn:
                psi0 = psi0_fixed
            else:
                model_seed = _stream_seed(config.seed, model, n, ratio_idx, rep if redrawn else 0, 0)
                psi0 = build_model_covariance(CovModelSpec(model, dim, model_seed))
                if not redrawn:
                    psi0_fixed = psi0
            data_seed = _stream_seed(config.seed, model, n, ratio_idx, rep, 1)
            data = sample_gaussian(psi0, n, data_seed)
            split_seed = _stream_seed(config.seed, model, n, ratio_idx, rep, 2)
            splits = make_splits(config.scheme(split_seed), n)
            ev = evaluate_candidates(
                union, data, splits,
                scaling=config.scaling, center=config.center,
                observation=observation, matrix=not observation,
            )
            selector = ev.mean_observation_risks() if observation else ev.mean_matrix_risks()
            full_fits = apply_library(union, data)
            for procedure, indices in groups.items():
                risks = [
                    (selector[i], i) for i in indices
                    if np.isfinite(selector[i]) and full_fits[i][1] is None
                ]
                if not risks:
                    logger.warning(
                        "model %d n=%d J=%d rep %d: procedure %s has no valid candidate",
                        model, n, dim, rep, procedure,
                    )
                    continue
                best = min(risks, key=lambda pair: (pair[0], indices.index(pair[1])))
                estimate = full_fits[best[1]][0]
                residual = estimate - psi0
                for metric in config.metrics:
                    if metric == "frobenius":
                        value = float(np.linalg.norm(residual))
                    else:
                        value = spectral_norm(residual)
                    rows.append(
                        ResultRow(
                            model=model, n=n, dim=dim, ratio=ratio, replication=rep,
                            subject=procedure, metric=metric, value=value, seed=data_seed,
                        )
                    )
    rows.sort(key=lambda r: (r.model, r.n, r.ratio, r.replication, r.subject, r.metric))
    return BenchmarkResult(
        rows=rows, table=benchmark_table(rows, procedures), config=config, procedures=procedures
    )
