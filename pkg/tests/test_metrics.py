"""Scoring-rule, baseline, and cross-validation tests."""

import numpy as np
import pytest
from scipy.special import expit

from binarygp.metrics import (baseline_glm, cross_validate, fit_baseline,
                              proper_scores, rmspe)
from binarygp.panel import BinaryPanel, InputDesign, ModelOrder
from binarygp.prediction import MHConfig
from binarygp.estimation import FitOptions


class TestRmspe:
    def test_identical_panels(self):
        p = np.random.default_rng(0).random((4, 3))
        assert rmspe(p, p) == 0.0

    def test_constant_offset(self):
        p = np.full((5, 2), 0.4)
        assert rmspe(p, p + 0.1) == pytest.approx(0.1, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            rmspe(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((6, 4)), rng.random((6, 4))
        base = rmspe(a, b)
        perm = rng.permutation(24)
        assert rmspe(a.ravel()[perm].reshape(6, 4),
                     b.ravel()[perm].reshape(6, 4)) == pytest.approx(base, abs=1e-12)


class TestProperScores:
    def test_perfect_forecast(self):
        y = np.array([1.0, 1.0, 0.0])
        p = np.array([1 - 1e-9, 1 - 1e-9, 1e-9])
        s = proper_scores(y, p)
        assert s["brier"] == pytest.approx(0.0, abs=1e-12)
        assert s["logarithmic"] == pytest.approx(0.0, abs=1e-6)
        assert s["spherical"] == pytest.approx(1.0, abs=1e-9)
        assert s["zero_one"] == 1.0

    def test_uninformative_half(self):
        s = proper_scores(np.array([1.0]), np.array([0.5]))
        assert s["brier"] == pytest.approx(-0.25, abs=1e-12)
        assert s["spherical"] == pytest.approx(0.5 / np.sqrt(0.5), abs=1e-12)
        assert s["logarithmic"] == pytest.approx(np.log(0.5), abs=1e-12)
        # tie at the threshold predicts 1
        assert s["zero_one"] == 1.0
        assert proper_scores(np.array([0.0]), np.array([0.5]))["zero_one"] == 0.0

    def test_propriety_on_grid(self):
        # expected score is maximized at the generating probability
        rng = np.random.default_rng(5)
        true_p = 0.3
        y = (rng.random(200_000) < true_p).astype(float)
        grid = np.linspace(0.05, 0.95, 19)
        for rule in ("brier", "spherical", "logarithmic"):
            values = [proper_scores(y, np.full_like(y, g))[rule] for g in grid]
            best = grid[int(np.argmax(values))]
            assert abs(best - true_p) <= 0.05 + 1e-9

    def test_score_ranges(self):
        rng = np.random.default_rng(6)
        y = rng.integers(0, 2, 500).astype(float)
        p = rng.random(500)
        s = proper_scores(y, p)
        assert -1.0 <= s["brier"] <= 0.0
        assert 0.0 <= s["spherical"] <= 1.0
        assert s["logarithmic"] <= 0.0
        assert 0.0 <= s["zero_one"] <= 1.0


class TestBaselines:
    def _logistic_data(self, seed, n=300, d=2, T=1, beta=None):
        rng = np.random.default_rng(seed)
        sites = rng.random((n, d))
        beta = beta if beta is not None else np.array([0.3, -1.0, 0.8])
        X = np.column_stack([np.ones(n), sites])
        y = np.empty((n, T), dtype=int)
        for t in range(T):
            y[:, t] = rng.random(n) < expit(X @ beta)
        return InputDesign(sites=sites), BinaryPanel(y=y)

    def test_glm_recovers_coefficients(self):
        design, panel = self._logistic_data(seed=7, n=3000)
        bl = fit_baseline(design, panel, kind="glm")
        np.testing.assert_allclose(bl.beta, [0.3, -1.0, 0.8], atol=0.25)

    def test_glm_prediction_constant_over_time(self):
        design, panel = self._logistic_data(seed=8)
        bl = fit_baseline(design, panel, kind="glm")
        pred = bl.predict_new(design, t_out=4)
        assert pred.shape == (design.n, 4)
        assert np.all(pred[:, 0] == pred[:, 1])

    def test_nested_agreement_under_null(self):
        # no AR signal: glm and glm_ts in-sample predictions agree closely
        rng = np.random.default_rng(9)
        n, T = 400, 8
        sites = rng.random((n, 2))
        p = expit(0.2 + 0.5 * sites[:, 0] - 0.4 * sites[:, 1])
        y = (rng.random((n, T)) < p[:, None]).astype(int)
        design, panel = InputDesign(sites=sites), BinaryPanel(y=y)
        panels = baseline_glm(design, panel, ModelOrder(R=1, L=0))
        diff = np.abs(panels["glm"][:, 1:] - panels["glm_ts"][:, 1:])
        assert diff.mean() < 0.02

    def test_glm_ts_beats_glm_on_ar_truth(self):
        # data generated from the glm_ts truth: AR-aware model wins most runs
        wins = 0
        for rep in range(10):
            rng = np.random.default_rng(100 + rep)
            n, T = 150, 12
            sites = rng.random((n, 1))
            y = np.zeros((n, T), dtype=int)
            p_true = np.zeros((n, T))
            prev = np.zeros(n)
            for t in range(T):
                eta = -1.0 + 1.0 * sites[:, 0] + 1.8 * prev
                p_true[:, t] = expit(eta)
                y[:, t] = rng.random(n) < p_true[:, t]
                prev = y[:, t].astype(float)
            design, panel = InputDesign(sites=sites), BinaryPanel(y=y)
            order = ModelOrder(R=1, L=0)
            glm = fit_baseline(design, panel, kind="glm")
            glm_ts = fit_baseline(design, panel, order, kind="glm_ts")
            e_glm = rmspe(p_true, glm.predict_insample(design, panel))
            e_ts = rmspe(p_true, glm_ts.predict_insample(design, panel))
            wins += e_ts < e_glm
        assert wins >= 8

    def test_separation_triggers_ridge_with_warning(self):
        rng = np.random.default_rng(11)
        sites = rng.random((40, 1))
        y = (sites[:, 0] > 0.5).astype(int)[:, None]  # perfectly separable
        with pytest.warns(UserWarning, match="ridge"):
            bl = fit_baseline(InputDesign(sites=sites), BinaryPanel(y=y), kind="glm")
        assert bl.ridge_used
        assert np.all(np.isfinite(bl.beta))

    def test_marginal_forecast_matches_path_simulation(self):
        # the exact lag recursion equals brute-force path means
        rng = np.random.default_rng(21)
        design, panel = self._logistic_data(seed=22, n=60, T=6)
        bl = fit_baseline(design, panel, ModelOrder(R=1, L=0), kind="glm_ts")
        new = InputDesign(sites=rng.random((3, 2)))
        exact = bl.predict_new(new, t_out=5)
        phi = bl.beta[1]
        base = bl.beta[0] + new.sites @ bl.beta[2:4]
        n_paths = 200_000
        paths = np.zeros((n_paths, 3, 5))
        y_prev = np.zeros((n_paths, 3))
        for t in range(5):
            p = expit(base[None, :] + phi * y_prev)
            paths[:, :, t] = p
            y_prev = (rng.random((n_paths, 3)) < p).astype(float)
        np.testing.assert_allclose(exact, paths.mean(axis=0), atol=4e-3)

    def test_predict_conditional_uses_observed_lags(self):
        design, panel = self._logistic_data(seed=23, n=40, T=4)
        bl = fit_baseline(design, panel, ModelOrder(R=1, L=0), kind="glm_ts")
        pred = bl.predict_conditional(design, panel)
        assert pred.shape == (40, 4)
        # manual check at t=2: eta = b0 + b1*y_1 + x'b
        eta2 = bl.beta[0] + bl.beta[1] * panel.y[:, 0] + design.sites @ bl.beta[2:4]
        np.testing.assert_allclose(pred[:, 1], expit(eta2), atol=1e-12)


class TestCrossValidate:
    def _small_problem(self, seed=12):
        rng = np.random.default_rng(seed)
        n, T = 12, 4
        sites = rng.random((n, 2))
        p = expit(0.3 + 0.8 * sites[:, 0] - 0.5 * sites[:, 1])
        y = (rng.random((n, T)) < p[:, None]).astype(int)
        return InputDesign(sites=sites), BinaryPanel(y=y)

    def test_folds_partition_sites(self):
        design, panel = self._small_problem()
        report = cross_validate(
            design, panel, ModelOrder(), folds=3, methods=("glm",), seed=3,
            mh_config=MHConfig(n_samples=20, burn_in=10, thin=1, seed=0),
        )
        all_sites = np.concatenate(report.fold_sites)
        assert sorted(all_sites.tolist()) == list(range(12))
        flat = [s for f in report.fold_sites for s in f]
        assert len(flat) == len(set(flat))  # disjoint

    def test_deterministic_fold_assignment(self):
        design, panel = self._small_problem()
        kwargs = dict(order=ModelOrder(), folds=3, methods=("glm",), seed=5,
                      mh_config=MHConfig(n_samples=10, burn_in=5, thin=1, seed=0))
        a = cross_validate(design, panel, **kwargs)
        b = cross_validate(design, panel, **kwargs)
        assert a.fold_sites == b.fold_sites
        assert a.medians == b.medians

    def test_median_is_middle_order_statistic(self):
        design, panel = self._small_problem(seed=14)
        report = cross_validate(
            design, panel, ModelOrder(), folds=3, methods=("glm",), seed=7,
            mh_config=MHConfig(n_samples=10, burn_in=5, thin=1, seed=0),
        )
        briers = sorted(fs["glm"]["brier"] for fs in report.fold_scores)
        assert report.medians["glm"]["brier"] == pytest.approx(briers[1], abs=1e-12)

    def test_gp_method_runs_and_scores(self):
        design, panel = self._small_problem(seed=15)
        report = cross_validate(
            design, panel, ModelOrder(), folds=2,
            methods=("binarygp", "glm"), seed=9,
            mh_config=MHConfig(n_samples=30, burn_in=20, thin=1, seed=0),
            fit_options=FitOptions(outer_max_iter=3, optimizer_max_evals=60),
        )
        for rule in ("brier", "spherical", "logarithmic", "zero_one"):
            assert np.isfinite(report.medians["binarygp"][rule])

    def test_single_class_fold_flagged(self):
        rng = np.random.default_rng(16)
        sites = rng.random((6, 1))
        y = np.ones((6, 2), dtype=int)
        y[3:] = rng.integers(0, 2, (3, 2))
        report = cross_validate(
            InputDesign(sites=sites), BinaryPanel(y=y), ModelOrder(),
            folds=2, methods=("glm",), seed=1,
            mh_config=MHConfig(n_samples=10, burn_in=5, thin=1, seed=0),
        )
        # scored anyway; flag list is consistent with the data
        for k in report.single_class_folds:
            fold_y = y[report.fold_sites[k]]
            assert fold_y.min() == fold_y.max()
