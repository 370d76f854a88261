import numpy as np
import pytest

from covsel.cv_engine import (
    MonteCarloSplit,
    SingleSplit,
    VFold,
    cv_risk_estimate,
    evaluate_candidates,
    make_splits,
    oracle_select_cv,
    oracle_select_full,
    select,
)
from covsel.errors import ConfigError, SelectionError
from covsel.estimators import CandidateLibrary, EstimatorSpec, build_library
from covsel.loss_risk import validation_risk
from covsel.matrix_core import sample_covariance
from covsel.simulation import CovModelSpec, build_model_covariance, sample_gaussian


def small_library():
    return build_library(
        {
            "sample_covariance": {},
            "hard_threshold": {"threshold": [0.1, 0.3]},
            "scad_threshold": {"threshold": [0.2]},
            "adaptive_lasso": {"threshold": [0.2], "exponent": [0.3]},
            "banding": {"bands": [1, 3]},
            "tapering": {"bands": [2, 6]},
            "linear_shrinkage": {},
            "dense_linear_shrinkage": {},
            "poet": {"factors": [2], "threshold": [0.1]},
        }
    )


def fixed_spec(matrix, id=""):
    return EstimatorSpec("fixed", {"matrix": np.asarray(matrix, dtype=float)}, id=id)


class TestMakeSplits:
    def test_vfold_partition_balanced(self):
        masks = make_splits(VFold(5, seed=1), 100)
        assert len(masks) == 5
        assert all(int(m.sum()) == 20 for m in masks)
        total = np.sum(masks, axis=0)
        assert np.array_equal(total, np.ones(100, dtype=int))

    def test_vfold_remainder_goes_to_first_folds(self):
        masks = make_splits(VFold(5, seed=2), 102)
        sizes = [int(m.sum()) for m in masks]
        assert sizes == [21, 21, 20, 20, 20]
        assert np.array_equal(np.sum(masks, axis=0), np.ones(102, dtype=int))

    def test_single_split_proportion(self):
        masks = make_splits(SingleSplit(0.2, seed=3), 10)
        assert len(masks) == 1
        assert int(masks[0].sum()) == 2

    def test_monte_carlo_count_and_size(self):
        masks = make_splits(MonteCarloSplit(7, 0.25, seed=4), 20)
        assert len(masks) == 7
        assert all(int(m.sum()) == 5 for m in masks)

    def test_determinism(self):
        for scheme in (VFold(4, seed=9), MonteCarloSplit(3, 0.3, seed=9), SingleSplit(0.5, seed=9)):
            first = make_splits(scheme, 23)
            second = make_splits(scheme, 23)
            assert all(np.array_equal(a, b) for a, b in zip(first, second))

    def test_different_seeds_differ(self):
        a = make_splits(VFold(5, seed=1), 50)
        b = make_splits(VFold(5, seed=2), 50)
        assert any(not np.array_equal(x, y) for x, y in zip(a, b))

    def test_errors(self):
        with pytest.raises(ConfigError):
            make_splits(VFold(11, seed=0), 10)
        with pytest.raises(ConfigError):
            make_splits(SingleSplit(0.05, seed=0), 10)  # n * p < 1
        with pytest.raises(ConfigError):
            make_splits(SingleSplit(0.999, seed=0), 3)  # no training rows
        with pytest.raises(ConfigError):
            make_splits(VFold(1, seed=0), 10)


class TestCvRiskEstimate:
    def test_constant_candidate_reduction(self):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(24, 4))
        psi_c = sample_covariance(rng.normal(size=(10, 4)))
        splits = make_splits(VFold(4, seed=5), 24)
        got = cv_risk_estimate(fixed_spec(psi_c), data, splits, center=False)
        expected = np.mean([validation_risk(psi_c, data[mask]) for mask in splits])
        assert got == pytest.approx(expected, rel=1e-12)

    def test_degenerate_full_overlap_split(self):
        # training = validation = the full dataset (test-only split shape)
        rng = np.random.default_rng(1)
        data = rng.normal(size=(12, 3))
        everything = np.ones(12, dtype=bool)
        got = cv_risk_estimate(
            EstimatorSpec("sample_covariance"), data, [(everything, everything)], center=False
        )
        assert got == pytest.approx(validation_risk(sample_covariance(data), data), rel=1e-15)

    def test_failure_propagates(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(10, 3))
        splits = make_splits(VFold(2, seed=0), 10)
        from covsel.errors import EstimationError

        with pytest.raises(EstimationError):
            cv_risk_estimate(EstimatorSpec("poet", {"factors": 99, "threshold": 0.1}), data, splits)


class TestSelect:
    def test_singleton_library(self):
        rng = np.random.default_rng(3)
        data = rng.normal(size=(20, 3))
        report = select(CandidateLibrary((EstimatorSpec("sample_covariance"),)), data, VFold(5, seed=1))
        assert report.selected_id == "sample_covariance"
        assert report.tie_ids == ("sample_covariance",)

    def test_duplicate_candidates_tie_to_lowest_index(self):
        rng = np.random.default_rng(4)
        data = rng.normal(size=(18, 3))
        library = CandidateLibrary(
            (
                EstimatorSpec("linear_shrinkage", id="first_copy"),
                EstimatorSpec("linear_shrinkage", id="second_copy"),
                EstimatorSpec("sample_covariance"),
            )
        )
        report = select(library, data, VFold(3, seed=2))
        risks = {c.id: c.cv_risk for c in report.candidates}
        assert risks["first_copy"] == risks["second_copy"]
        if report.selected_id in ("first_copy", "second_copy"):
            assert report.selected_id == "first_copy"
            assert set(report.tie_ids) >= {"first_copy", "second_copy"}

    def test_selected_risk_is_minimal(self):
        psi0 = build_model_covariance(CovModelSpec(3, 24))
        data = sample_gaussian(psi0, 60, seed=11)
        report = select(small_library(), data, VFold(5, seed=7), center=False)
        selected = next(c for c in report.candidates if c.index == report.selected_index)
        for cand in report.candidates:
            if cand.cv_risk is not None:
                assert selected.cv_risk <= cand.cv_risk

    def test_observation_and_matrix_risks_agree(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            n = int(rng.integers(20, 61))
            dim = int(rng.integers(5, 25))
            data = rng.normal(size=(n, dim)) @ np.diag(rng.uniform(0.5, 2.0, size=dim))
            library = small_library()
            scheme = VFold(5, seed=trial)
            by_obs = select(library, data, scheme, risk="observation")
            by_mat = select(library, data, scheme, risk="matrix")
            assert by_obs.selected_id == by_mat.selected_id
            assert by_obs.tie_ids == by_mat.tie_ids

    def test_library_permutation(self):
        rng = np.random.default_rng(6)
        data = rng.normal(size=(30, 5))
        library = small_library()
        report = select(library, data, VFold(5, seed=3))
        if len(report.tie_ids) == 1:
            reversed_library = CandidateLibrary(tuple(reversed(tuple(library))))
            flipped = select(reversed_library, data, VFold(5, seed=3))
            assert flipped.selected_id == report.selected_id

    def test_determinism(self):
        rng = np.random.default_rng(7)
        data = rng.normal(size=(26, 4))
        first = select(small_library(), data, VFold(5, seed=4))
        second = select(small_library(), data, VFold(5, seed=4))
        assert first.selected_id == second.selected_id
        assert [c.cv_risk for c in first.candidates] == [c.cv_risk for c in second.candidates]
        assert np.array_equal(first.estimate, second.estimate)

    def test_failed_candidates_excluded_and_reported(self):
        rng = np.random.default_rng(8)
        data = rng.normal(size=(14, 3))
        library = CandidateLibrary(
            (
                EstimatorSpec("poet", {"factors": 99, "threshold": 0.1}),
                EstimatorSpec("sample_covariance"),
            )
        )
        report = select(library, data, VFold(2, seed=1))
        assert report.selected_id == "sample_covariance"
        failed = report.candidates[0]
        assert failed.failure is not None and failed.cv_risk is None

    def test_all_failed_raises(self):
        rng = np.random.default_rng(9)
        data = rng.normal(size=(10, 3))
        library = CandidateLibrary((EstimatorSpec("poet", {"factors": 99, "threshold": 0.1}),))
        with pytest.raises(SelectionError):
            select(library, data, VFold(2, seed=1))

    def test_small_training_folds_warn(self):
        rng = np.random.default_rng(10)
        data = rng.normal(size=(10, 12))
        report = select(
            CandidateLibrary((EstimatorSpec("sample_covariance"),)), data, VFold(5, seed=0)
        )
        assert any("fewer observations" in w or "as few as" in w for w in report.warnings)

    def test_weighted_scaling_requires_observation_risk(self):
        rng = np.random.default_rng(11)
        data = rng.normal(size=(20, 3))
        with pytest.raises(ConfigError):
            select(small_library(), data, VFold(4, seed=0), scaling="weighted", risk="matrix")
        report = select(small_library(), data, VFold(4, seed=0), scaling="weighted")
        assert report.selected_id in small_library().ids

    def test_psd_flags_present(self):
        rng = np.random.default_rng(12)
        data = rng.normal(size=(40, 4))
        report = select(small_library(), data, VFold(5, seed=0))
        sample_row = next(c for c in report.candidates if c.id == "sample_covariance")
        assert sample_row.psd is True


class TestOracles:
    def test_perfect_candidate_wins_cv_oracle(self):
        psi0 = build_model_covariance(CovModelSpec(2, 6))
        data = sample_gaussian(psi0, 30, seed=1)
        library = CandidateLibrary(
            (EstimatorSpec("sample_covariance"), fixed_spec(psi0, id="truth"))
        )
        splits = make_splits(VFold(5, seed=2), 30)
        report = oracle_select_cv(library, data, splits, psi0)
        assert report.cv_oracle_id == "truth"
        assert report.cv_risk_diffs[1] == 0.0

    def test_scalar_toy_risk_differences(self):
        psi0 = np.array([[1.0]])
        data = sample_gaussian(psi0, 12, seed=3)
        library = CandidateLibrary(
            (fixed_spec([[1.1]], id="near"), fixed_spec([[2.0]], id="far"))
        )
        splits = make_splits(VFold(3, seed=4), 12)
        cv_report = oracle_select_cv(library, data, splits, psi0)
        assert cv_report.cv_oracle_id == "near"
        assert cv_report.cv_risk_diffs[0] == pytest.approx(0.01, rel=1e-12)
        assert cv_report.cv_risk_diffs[1] == pytest.approx(1.0, rel=1e-12)

        full_report = oracle_select_full(library, data, psi0)
        assert full_report.full_oracle_id == "near"
        assert full_report.full_risk_diffs[0] == pytest.approx(0.01, rel=1e-12)
        assert full_report.full_risk_diffs[1] == pytest.approx(1.0, rel=1e-12)

    def test_singleton_oracle(self):
        psi0 = np.eye(3)
        data = sample_gaussian(psi0, 15, seed=5)
        library = CandidateLibrary((EstimatorSpec("sample_covariance"),))
        splits = make_splits(VFold(3, seed=6), 15)
        report = oracle_select_cv(library, data, splits, psi0)
        assert report.cv_oracle_id == "sample_covariance"
        assert report.cv_risk_diffs[0] > 0.0

    def test_full_risk_shrinks_with_sample_size(self):
        psi0 = build_model_covariance(CovModelSpec(2, 20))
        library = CandidateLibrary((EstimatorSpec("sample_covariance"),))
        means = []
        for n in (50, 100, 200):
            diffs = []
            for rep in range(20):
                data = sample_gaussian(psi0, n, seed=1000 * n + rep)
                report = oracle_select_full(library, data, psi0)
                diffs.append(report.full_risk_diffs[0])
            means.append(np.mean(diffs))
        assert means[0] > means[1] > means[2]


class TestEvaluateCandidates:
    def test_joint_pass_matches_separate_calls(self):
        psi0 = build_model_covariance(CovModelSpec(4, 8))
        data = sample_gaussian(psi0, 32, seed=7)
        library = small_library()
        splits = make_splits(VFold(4, seed=8), 32)
        ev = evaluate_candidates(
            library, data, splits, center=False, observation=True, matrix=True, psi0=psi0
        )
        oracle = oracle_select_cv(library, data, splits, psi0)
        joint = ev.mean_oracle_diffs()
        for idx, value in enumerate(oracle.cv_risk_diffs):
            assert joint[idx] == pytest.approx(value, rel=1e-15)

    def test_mask_shape_validated(self):
        rng = np.random.default_rng(13)
        data = rng.normal(size=(10, 2))
        with pytest.raises(ValueError):
            evaluate_candidates(
                CandidateLibrary((EstimatorSpec("sample_covariance"),)),
                data,
                [np.ones(5, dtype=bool)],
            )
