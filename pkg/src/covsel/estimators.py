"""Candidate covariance estimators and the registry that dispatches them.

Every estimator is a deterministic map from a centered data matrix to a
symmetric ``(J, J)`` estimate.  Candidates are declared as
:class:`EstimatorSpec` values (family name plus hyperparameters) and
grouped into an ordered :class:`CandidateLibrary`; the library order is
authoritative for tie-breaking during selection.

The built-in families are: the sample covariance; hard, SCAD, and
adaptive-LASSO entrywise thresholding; banding and tapering; linear
shrinkage towards a scaled identity and towards a dense constant-diagonal,
constant-off-diagonal target; and a low-rank-plus-thresholded-remainder
factor estimator.  New families can be added with
:func:`register_family`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigError, EstimationError
from .matrix_core import (
    as_data_matrix,
    as_square_matrix,
    eigendecompose,
    sample_covariance,
    scaled_frobenius_sq,
)

__all__ = [
    "EstimatorSpec",
    "CandidateLibrary",
    "FitContext",
    "register_family",
    "family_names",
    "apply",
    "apply_library",
    "expand_grid",
    "build_library",
    "default_library",
    "wide_library",
    "light_library",
    "library_preset",
    "hard_threshold",
    "scad_threshold",
    "adaptive_lasso_threshold",
    "band_matrix",
    "taper_weights",
    "threshold_estimate",
    "band_estimate",
    "taper_estimate",
    "ShrinkageComponents",
    "linear_shrinkage_components",
    "linear_shrinkage_estimate",
    "dense_target",
    "dense_shrinkage_estimate",
    "poet_estimate",
]


# ---------------------------------------------------------------------------
# Entrywise transforms of a sample covariance matrix
# ---------------------------------------------------------------------------


def hard_threshold(matrix, threshold: float) -> np.ndarray:
    """Keep entries with ``|s| > threshold``, zero the rest."""
    m = as_square_matrix(matrix)
    return np.where(np.abs(m) > threshold, m, 0.0)


def scad_threshold(matrix, threshold: float, shape: float = 3.7) -> np.ndarray:
    """Smoothly clipped absolute deviation thresholding.

    Soft-thresholds entries up to ``2 * threshold``, interpolates linearly
    up to ``shape * threshold``, and leaves larger entries untouched.
    ``shape`` must exceed 2 (3.7 is the customary default).
    """
    m = as_square_matrix(matrix)
    u, a = float(threshold), float(shape)
    magnitude = np.abs(m)
    soft = np.sign(m) * np.maximum(magnitude - u, 0.0)
    middle = ((a - 1.0) * m - np.sign(m) * a * u) / (a - 2.0)
    return np.where(magnitude <= 2.0 * u, soft, np.where(magnitude <= a * u, middle, m))


def adaptive_lasso_threshold(matrix, threshold: float, exponent: float) -> np.ndarray:
    """Adaptive-LASSO thresholding ``sign(s) * (|s| - u**(e+1) * |s|**-e)_+``.

    With ``exponent = 0`` this is exactly soft thresholding; larger
    exponents shrink small entries harder while leaving large entries
    nearly intact.
    """
    m = as_square_matrix(matrix)
    u, e = float(threshold), float(exponent)
    magnitude = np.abs(m)
    with np.errstate(divide="ignore"):
        borrowed = u ** (e + 1.0) * magnitude ** (-e)
    return np.sign(m) * np.maximum(magnitude - borrowed, 0.0)


def band_matrix(matrix, bands: int) -> np.ndarray:
    """Zero all entries more than ``bands`` positions from the diagonal."""
    m = as_square_matrix(matrix)
    idx = np.arange(m.shape[0])
    distance = np.abs(idx[:, None] - idx[None, :])
    return np.where(distance <= bands, m, 0.0)


def taper_weights(dim: int, bands: int) -> np.ndarray:
    """Tapering weight matrix for an even bandwidth ``bands``.

    Weights are 1 within ``bands / 2`` of the diagonal, decay linearly as
    ``2 - 2*|j - l| / bands`` out to ``bands`` (where they reach 0), and
    are 0 beyond.  The decay is continuous at ``bands / 2`` and the
    ``bands = 2`` case reproduces the bandwidth-1 banding indicator.
    """
    if bands < 2 or bands % 2 != 0:
        raise ConfigError(f"tapering bandwidth must be a positive even integer, got {bands}")
    idx = np.arange(dim)
    distance = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    decay = 2.0 - 2.0 * distance / bands
    weights = np.where(distance <= bands // 2, 1.0, np.where(distance <= bands, decay, 0.0))
    return weights


# ---------------------------------------------------------------------------
# Data-level estimators
# ---------------------------------------------------------------------------


def threshold_estimate(data, rule: str, threshold: float, **extra) -> np.ndarray:
    """Apply an entrywise thresholding rule to the sample covariance."""
    cov = sample_covariance(as_data_matrix(data))
    if rule == "hard":
        _validate_hard({"threshold": threshold, **extra})
        return hard_threshold(cov, threshold)
    if rule == "scad":
        params = {"threshold": threshold, "shape": extra.pop("shape", 3.7), **extra}
        _validate_scad(params)
        return scad_threshold(cov, threshold, params["shape"])
    if rule == "adaptive_lasso":
        params = {"threshold": threshold, **extra}
        _validate_adaptive(params)
        return adaptive_lasso_threshold(cov, threshold, params["exponent"])
    raise ConfigError(f"unknown thresholding rule {rule!r}")


def band_estimate(data, bands: int) -> np.ndarray:
    """Banding estimator: keep the central ``2*bands + 1`` diagonals."""
    _validate_banding({"bands": bands})
    return band_matrix(sample_covariance(as_data_matrix(data)), bands)


def taper_estimate(data, bands: int) -> np.ndarray:
    """Tapering estimator: Hadamard product of the sample covariance and weights."""
    cov = sample_covariance(as_data_matrix(data))
    weights = taper_weights(cov.shape[0], bands)
    out = weights * cov
    out[weights == 0.0] = 0.0
    return out


@dataclass(frozen=True)
class ShrinkageComponents:
    """Plug-in quantities behind the identity-target shrinkage intensity.

    ``target_distance_sq`` is the scaled squared distance between the
    sample covariance and its identity target; ``dispersion_sq`` is the
    (clipped) sampling dispersion of the per-observation outer products;
    ``signal_sq`` is their difference, and ``intensity`` the weight put on
    the target.  By construction ``dispersion_sq + signal_sq`` equals
    ``target_distance_sq`` and the two combination weights sum to one.
    """

    mean_variance: float
    target_distance_sq: float
    dispersion_sq: float
    signal_sq: float
    intensity: float


def _outer_dispersion(data: np.ndarray, cov: np.ndarray) -> float:
    """Mean scaled squared distance of the row outer products from cov."""
    n, dim = data.shape
    row_sq = np.einsum("ij,ij->i", data, data)
    return (float(np.sum(row_sq**2)) - n * float(np.sum(cov * cov))) / (dim * n**2)


def _shrinkage_components(data: np.ndarray, cov: np.ndarray) -> ShrinkageComponents:
    dim = cov.shape[0]
    mean_variance = float(np.trace(cov)) / dim
    d2 = scaled_frobenius_sq(cov - mean_variance * np.eye(dim), 1.0 / dim)
    if d2 <= 0.0:
        # cov is already a multiple of the identity; the intensity is
        # defined as 1 and any combination returns cov unchanged.
        return ShrinkageComponents(mean_variance, 0.0, 0.0, 0.0, 1.0)
    b2 = min(max(_outer_dispersion(data, cov), 0.0), d2)
    return ShrinkageComponents(mean_variance, d2, b2, d2 - b2, b2 / d2)


def linear_shrinkage_components(data) -> ShrinkageComponents:
    """Shrinkage intensity diagnostics for :func:`linear_shrinkage_estimate`."""
    data = as_data_matrix(data)
    return _shrinkage_components(data, sample_covariance(data))


def _identity_shrinkage(data: np.ndarray, cov: np.ndarray) -> np.ndarray:
    parts = _shrinkage_components(data, cov)
    if parts.target_distance_sq <= 0.0:
        return cov.copy()
    dim = cov.shape[0]
    return parts.intensity * parts.mean_variance * np.eye(dim) + (1.0 - parts.intensity) * cov


def linear_shrinkage_estimate(data) -> np.ndarray:
    """Linear shrinkage of the sample covariance towards a scaled identity.

    The shrinkage intensity is the ratio of the (clipped) sampling
    dispersion of the per-observation outer products to the distance
    between the sample covariance and its identity target, the standard
    plug-in recipe for this estimator.
    """
    data = as_data_matrix(data)
    return _identity_shrinkage(data, sample_covariance(data))


def dense_target(cov) -> np.ndarray:
    """Dense shrinkage target: averaged diagonal and averaged off-diagonal."""
    cov = as_square_matrix(cov)
    dim = cov.shape[0]
    if dim < 2:
        raise ConfigError("the dense target needs at least two features")
    diag_avg = float(np.trace(cov)) / dim
    off_avg = (float(np.sum(cov)) - float(np.trace(cov))) / (dim * dim - dim)
    target = np.full((dim, dim), off_avg)
    np.fill_diagonal(target, diag_avg)
    return target


def _dense_shrinkage(data: np.ndarray, cov: np.ndarray) -> np.ndarray:
    dim = cov.shape[0]
    target = dense_target(cov)
    d2 = scaled_frobenius_sq(cov - target, 1.0 / dim)
    if d2 <= 0.0:
        return target
    rho = min(max(_outer_dispersion(data, cov) / d2, 0.0), 1.0)
    return rho * target + (1.0 - rho) * cov


def dense_shrinkage_estimate(data) -> np.ndarray:
    """Linear shrinkage towards a dense target.

    The target has every diagonal entry equal to the average sample
    variance and every off-diagonal entry equal to the average sample
    covariance; the intensity uses the same plug-in recipe as
    :func:`linear_shrinkage_estimate`, clamped to [0, 1].
    """
    data = as_data_matrix(data)
    return _dense_shrinkage(data, sample_covariance(data))


def _poet_from_eig(cov: np.ndarray, eig, factors: int, threshold: float) -> np.ndarray:
    dim = cov.shape[0]
    if not 0 <= factors <= dim:
        raise ConfigError(f"factor count {factors} outside [0, {dim}]")
    if factors == 0:
        low_rank = np.zeros_like(cov)
        residual = cov
    else:
        vecs = eig.eigenvectors[:, :factors]
        low_rank = (vecs * eig.eigenvalues[:factors]) @ vecs.T
        residual = cov - low_rank
    out = low_rank + hard_threshold(residual, threshold)
    out = 0.5 * (out + out.T)
    # The residual's diagonal is kept as-is, so the estimate's diagonal
    # reconstitutes the sample variances exactly.
    np.fill_diagonal(out, np.diag(cov))
    return out


def poet_estimate(data, factors: int, threshold: float) -> np.ndarray:
    """Low-rank spectral part plus hard-thresholded remainder.

    Keeps the leading ``factors`` eigencomponents of the sample covariance
    intact and hard-thresholds the off-diagonal of what is left, while
    preserving the full diagonal.
    """
    _validate_poet({"factors": factors, "threshold": threshold})
    cov = sample_covariance(as_data_matrix(data))
    return _poet_from_eig(cov, eigendecompose(cov), factors, threshold)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


class FitContext:
    """Per-dataset cache of quantities shared across candidate fits."""

    def __init__(self, data) -> None:
        self.data = as_data_matrix(data)

    @cached_property
    def cov(self) -> np.ndarray:
        return sample_covariance(self.data)

    @cached_property
    def eig(self):
        return eigendecompose(self.cov)


def _require_number(params: dict, key: str, minimum=None, strict=False) -> float:
    if key not in params:
        raise ConfigError(f"missing hyperparameter {key!r}")
    value = params[key]
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ConfigError(f"hyperparameter {key!r} must be a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError(f"hyperparameter {key!r} must be finite")
    if minimum is not None and (value < minimum or (strict and value == minimum)):
        bound = ">" if strict else ">="
        raise ConfigError(f"hyperparameter {key!r} must be {bound} {minimum}, got {value}")
    return value


def _require_int(params: dict, key: str, minimum: int = 0) -> int:
    value = _require_number(params, key, minimum=minimum)
    if value != int(value):
        raise ConfigError(f"hyperparameter {key!r} must be an integer, got {value}")
    return int(value)


def _validate_no_params(params: dict) -> dict:
    if params:
        raise ConfigError(f"unexpected hyperparameters: {sorted(params)}")
    return {}


def _validate_hard(params: dict) -> dict:
    out = {"threshold": _require_number(params, "threshold", minimum=0.0)}
    _validate_no_params({k: v for k, v in params.items() if k not in out})
    return out


def _validate_scad(params: dict) -> dict:
    out = {
        "threshold": _require_number(params, "threshold", minimum=0.0),
        "shape": float(params.get("shape", 3.7)),
    }
    if out["shape"] <= 2.0:
        raise ConfigError(f"SCAD shape must exceed 2, got {out['shape']}")
    _validate_no_params({k: v for k, v in params.items() if k not in out})
    return out


def _validate_adaptive(params: dict) -> dict:
    out = {
        "threshold": _require_number(params, "threshold", minimum=0.0),
        "exponent": _require_number(params, "exponent", minimum=0.0),
    }
    _validate_no_params({k: v for k, v in params.items() if k not in out})
    return out


def _validate_banding(params: dict) -> dict:
    out = {"bands": _require_int(params, "bands", minimum=0)}
    _validate_no_params({k: v for k, v in params.items() if k not in out})
    return out


def _validate_tapering(params: dict) -> dict:
    bands = _require_int(params, "bands", minimum=2)
    if bands % 2 != 0:
        raise ConfigError(f"tapering bandwidth must be even, got {bands}")
    out = {"bands": bands}
    _validate_no_params({k: v for k, v in params.items() if k not in out})
    return out


def _validate_poet(params: dict) -> dict:
    out = {
        "factors": _require_int(params, "factors", minimum=0),
        "threshold": _require_number(params, "threshold", minimum=0.0),
    }
    _validate_no_params({k: v for k, v in params.items() if k not in out})
    return out


def _validate_fixed(params: dict) -> dict:
    if set(params) != {"matrix"}:
        raise ConfigError("fixed estimator takes exactly one hyperparameter: 'matrix'")
    matrix = as_square_matrix(params["matrix"])
    if not np.array_equal(matrix, matrix.T):
        raise ConfigError("fixed estimator matrix must be symmetric")
    return {"matrix": matrix}


def _fit_fixed(ctx: FitContext, params: dict) -> np.ndarray:
    matrix = params["matrix"]
    if matrix.shape[0] != ctx.data.shape[1]:
        raise ConfigError(
            f"fixed matrix dimension {matrix.shape[0]} does not match data "
            f"dimension {ctx.data.shape[1]}"
        )
    return matrix.copy()


@dataclass(frozen=True)
class _Family:
    name: str
    fit: Callable[[FitContext, dict], np.ndarray]
    validate: Callable[[dict], dict]
    param_order: tuple[str, ...]


_FAMILIES: dict[str, _Family] = {}


def register_family(name, fit, validate=None, param_order=()) -> None:
    """Register an estimator family.

    ``fit(ctx, params)`` must be a deterministic function of the data in
    ``ctx`` and the validated ``params``, returning a symmetric matrix.
    ``validate(params)`` normalizes hyperparameters (filling defaults) and
    raises :class:`ConfigError` on invalid input.
    """
    if name in _FAMILIES:
        raise ConfigError(f"estimator family {name!r} is already registered")
    _FAMILIES[name] = _Family(
        name=name,
        fit=fit,
        validate=validate if validate is not None else _validate_no_params,
        param_order=tuple(param_order),
    )


def family_names() -> tuple[str, ...]:
    return tuple(_FAMILIES)


register_family("sample_covariance", lambda ctx, p: ctx.cov.copy())
register_family(
    "hard_threshold",
    lambda ctx, p: hard_threshold(ctx.cov, p["threshold"]),
    _validate_hard,
    ("threshold",),
)
register_family(
    "scad_threshold",
    lambda ctx, p: scad_threshold(ctx.cov, p["threshold"], p["shape"]),
    _validate_scad,
    ("threshold", "shape"),
)
register_family(
    "adaptive_lasso",
    lambda ctx, p: adaptive_lasso_threshold(ctx.cov, p["threshold"], p["exponent"]),
    _validate_adaptive,
    ("threshold", "exponent"),
)
register_family(
    "banding",
    lambda ctx, p: band_matrix(ctx.cov, p["bands"]),
    _validate_banding,
    ("bands",),
)


def _fit_tapering(ctx: FitContext, params: dict) -> np.ndarray:
    weights = taper_weights(ctx.cov.shape[0], params["bands"])
    out = weights * ctx.cov
    out[weights == 0.0] = 0.0
    return out


register_family("tapering", _fit_tapering, _validate_tapering, ("bands",))
register_family("linear_shrinkage", lambda ctx, p: _identity_shrinkage(ctx.data, ctx.cov))
register_family("dense_linear_shrinkage", lambda ctx, p: _dense_shrinkage(ctx.data, ctx.cov))
register_family(
    "poet",
    lambda ctx, p: _poet_from_eig(ctx.cov, ctx.eig, p["factors"], p["threshold"]),
    _validate_poet,
    ("factors", "threshold"),
)
register_family("fixed", _fit_fixed, _validate_fixed, ())


def _format_param(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return repr(value)


@dataclass(frozen=True)
class EstimatorSpec:
    """One candidate: an estimator family plus validated hyperparameters.

    The ``id`` is derived from the family and hyperparameters unless given
    explicitly; it is the stable key used in reports and output tables.
    """

    family: str
    params: dict = field(default_factory=dict)
    id: str = ""

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ConfigError(
                f"unknown estimator family {self.family!r}; known: {sorted(_FAMILIES)}"
            )
        family = _FAMILIES[self.family]
        normalized = family.validate(dict(self.params))
        object.__setattr__(self, "params", normalized)
        if not self.id:
            object.__setattr__(self, "id", self._derive_id())

    def _derive_id(self) -> str:
        family = _FAMILIES[self.family]
        if not self.params:
            return self.family
        keys = list(family.param_order) or sorted(self.params)
        if self.family == "fixed":
            digest = hashlib.sha1(self.params["matrix"].tobytes()).hexdigest()[:8]
            return f"fixed({digest})"
        parts = ", ".join(f"{k}={_format_param(self.params[k])}" for k in keys)
        return f"{self.family}({parts})"


@dataclass(frozen=True)
class CandidateLibrary:
    """Ordered collection of candidates; the order breaks risk ties."""

    candidates: tuple[EstimatorSpec, ...]

    def __post_init__(self) -> None:
        candidates = tuple(self.candidates)
        if not candidates:
            raise ConfigError("candidate library must contain at least one estimator")
        object.__setattr__(self, "candidates", candidates)
        seen: set[str] = set()
        for spec in candidates:
            if spec.id in seen:
                raise ConfigError(f"duplicate candidate id {spec.id!r}")
            seen.add(spec.id)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def __getitem__(self, index: int) -> EstimatorSpec:
        return self.candidates[index]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(spec.id for spec in self.candidates)

    def subset_indices(self, predicate) -> tuple[int, ...]:
        return tuple(i for i, spec in enumerate(self.candidates) if predicate(spec))


def apply(spec: EstimatorSpec, data) -> np.ndarray:
    """Fit one candidate on a (centered) data matrix."""
    return apply_with_context(spec, FitContext(data))


def apply_with_context(spec: EstimatorSpec, ctx: FitContext) -> np.ndarray:
    return _FAMILIES[spec.family].fit(ctx, spec.params)


def apply_library(library: CandidateLibrary, data):
    """Fit every candidate on the same data, sharing cached quantities.

    Returns a list of ``(estimate, failure)`` pairs in library order; a
    failed candidate carries ``estimate=None`` and a reason string instead
    of aborting the whole batch.
    """
    ctx = FitContext(data)
    results = []
    for spec in library:
        try:
            results.append((apply_with_context(spec, ctx), None))
        except (ConfigError, EstimationError, FloatingPointError, ValueError) as exc:
            results.append((None, f"{type(exc).__name__}: {exc}"))
        except np.linalg.LinAlgError as exc:
            results.append((None, f"LinAlgError: {exc}"))
    return results


# ---------------------------------------------------------------------------
# Grid expansion and preset libraries
# ---------------------------------------------------------------------------


def expand_grid(family: str, **param_lists) -> list[EstimatorSpec]:
    """Cross-product expansion of per-parameter value lists for one family.

    ``expand_grid("poet", factors=[1, 2], threshold=[0.1])`` yields two
    specs.  Parameters iterate in the family's canonical order with the
    rightmost parameter varying fastest.
    """
    if family not in _FAMILIES:
        raise ConfigError(f"unknown estimator family {family!r}")
    if not param_lists:
        return [EstimatorSpec(family)]
    order = [k for k in _FAMILIES[family].param_order if k in param_lists]
    order += [k for k in sorted(param_lists) if k not in order]
    specs = [{}]
    for key in order:
        values = param_lists[key]
        specs = [{**base, key: value} for base in specs for value in values]
    return [EstimatorSpec(family, params) for params in specs]


def build_library(declaration) -> CandidateLibrary:
    """Build a library from ``{family: {param: [values, ...]}}`` in order."""
    specs: list[EstimatorSpec] = []
    for family, params in declaration.items():
        specs.extend(expand_grid(family, **(params or {})))
    return CandidateLibrary(tuple(specs))


def default_library() -> CandidateLibrary:
    """The standard 73-candidate selection library."""
    tenths = [i / 10 for i in range(1, 11)]
    half = [i / 10 for i in range(1, 6)]
    return build_library(
        {
            "sample_covariance": {},
            "hard_threshold": {"threshold": tenths},
            "scad_threshold": {"threshold": tenths},
            "adaptive_lasso": {"threshold": half, "exponent": half},
            "banding": {"bands": [1, 2, 3, 4, 5]},
            "tapering": {"bands": [2, 4, 6, 8, 10]},
            "linear_shrinkage": {},
            "dense_linear_shrinkage": {},
            "poet": {"factors": [1, 2, 3, 4, 5], "threshold": [0.1, 0.2, 0.3]},
        }
    )


def wide_library() -> CandidateLibrary:
    """Denser per-family grids used to tune each family on its own."""
    twentieths = [i / 20 for i in range(1, 21)]
    tenths = [i / 10 for i in range(1, 11)]
    half = [i / 10 for i in range(1, 6)]
    return build_library(
        {
            "sample_covariance": {},
            "hard_threshold": {"threshold": twentieths},
            "scad_threshold": {"threshold": twentieths},
            "adaptive_lasso": {"threshold": half, "exponent": half},
            "banding": {"bands": list(range(1, 11))},
            "tapering": {"bands": [2, 4, 6, 8, 10]},
            "linear_shrinkage": {},
            "dense_linear_shrinkage": {},
            "poet": {"factors": list(range(1, 11)), "threshold": tenths},
        }
    )


def light_library() -> CandidateLibrary:
    """Reduced grid for wide real datasets (small thresholds, deeper factors)."""
    return build_library(
        {
            "sample_covariance": {},
            "hard_threshold": {"threshold": [i / 20 for i in range(1, 7)]},
            "scad_threshold": {"threshold": [i / 20 for i in range(1, 11)]},
            "adaptive_lasso": {
                "threshold": [i / 10 for i in range(1, 6)],
                "exponent": [i / 10 for i in range(1, 6)],
            },
            "linear_shrinkage": {},
            "dense_linear_shrinkage": {},
            "poet": {
                "factors": list(range(5, 11)),
                "threshold": [i / 20 for i in range(1, 7)],
            },
        }
    )


_PRESETS = {"default": default_library, "wide": wide_library, "light": light_library}


def library_preset(name: str) -> CandidateLibrary:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown library preset {name!r}; known: {sorted(_PRESETS)}") from None
