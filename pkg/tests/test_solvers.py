import json
import math

import numpy as np
import pytest

from isacloc import (
    InsufficientGeometryError,
    MeasurementSet,
    SolverConfig,
    UnderdeterminedError,
    andrews_weight,
    centroid_init,
    difference_gnb_pairs,
    difference_gradient,
    difference_objective,
    difference_ue_pairs,
    fuse,
    irls_gradient,
    irls_objective,
    ls_gradient,
    ls_objective,
    residuals,
    sample_scenario,
    solve_fused,
    solve_irls,
    solve_ls,
    solve_proposed,
    true_bistatic_ranges,
)
from isacloc.solvers import difference_grid_init, grid_search_init, ls_grid_init

TIGHT = SolverConfig(irls_threshold=1e-6, proposed_threshold=1e-6)


def _problem(seed=0, num_gnbs=6, num_ues=6, outlier_max=0.0):
    sc = sample_scenario(num_gnbs, num_ues, outlier_max=outlier_max, rng_seed=seed)
    ranges = true_bistatic_ranges(sc).ranges
    return sc, ranges


def _fd_gradient(objective, x, h=1e-6):
    grad = np.zeros(2)
    for i in range(2):
        step = np.zeros(2)
        step[i] = h
        grad[i] = (objective(x + step) - objective(x - step)) / (2 * h)
    return grad


class TestResiduals:
    def test_zero_at_truth(self):
        sc, ranges = _problem(seed=1)
        e = residuals(ranges, sc.gnb_positions, sc.ue_positions, sc.target)
        assert np.allclose(e, 0.0, atol=1e-9)

    def test_single_biased_measurement(self):
        sc, ranges = _problem(seed=2)
        biased = ranges.copy()
        biased[2, 3] += 5.0
        e = residuals(biased, sc.gnb_positions, sc.ue_positions, sc.target)
        assert e[3] == pytest.approx(5.0 / 6.0)
        assert np.allclose(np.delete(e, 3), 0.0, atol=1e-9)

    def test_matches_loop_oracle(self, rng):
        sc, ranges = _problem(seed=3, outlier_max=8.0)
        x = rng.uniform(-50, 50, 2)
        e = residuals(ranges, sc.gnb_positions, sc.ue_positions, x)
        for k in range(6):
            total = 0.0
            for s in range(6):
                d = math.hypot(*(x - sc.gnb_positions[s])) + math.hypot(*(x - sc.ue_positions[k]))
                total += abs(ranges[s, k] - d)
            assert e[k] == pytest.approx(total / 6.0, rel=1e-12)


class TestAndrewsWeight:
    def test_value_at_threshold(self):
        assert andrews_weight(7.0, 7.0) == pytest.approx(math.sin(1.0))
        assert andrews_weight(7.0, 7.0) == pytest.approx(0.841471, abs=1e-6)

    def test_zero_beyond_threshold(self):
        assert andrews_weight(7.0000001, 7.0) == 0.0
        assert andrews_weight(100.0, 7.0) == 0.0

    def test_limit_at_zero(self):
        assert andrews_weight(0.0, 7.0) == 1.0
        assert andrews_weight(1e-12, 7.0) == pytest.approx(1.0)

    def test_strictly_decreasing_inside(self):
        e = np.linspace(1e-6, 7.0, 500)
        w = andrews_weight(e, 7.0)
        assert (np.diff(w) < 0).all()
        assert (w >= 0).all() and (w <= 1).all()

    def test_equal_residuals_normalize_to_uniform(self):
        w = andrews_weight(np.full(6, 3.0), 7.0)
        normalized = w / w.sum()
        assert np.allclose(normalized, 1.0 / 6.0)


class TestDifferencing:
    def test_counts(self):
        _, ranges = _problem(seed=4, num_gnbs=5, num_ues=4)
        pairs_g, diffs_g = difference_gnb_pairs(ranges)
        pairs_u, diffs_u = difference_ue_pairs(ranges)
        assert len(pairs_g) == 10 and diffs_g.shape == (10, 4)
        assert len(pairs_u) == 6 and diffs_u.shape == (5, 6)

    def test_two_transmitter_arithmetic(self):
        ranges = np.array([[10.0], [14.0]])
        pairs, diffs = difference_gnb_pairs(ranges)
        assert pairs == [(0, 1)]
        assert diffs[0, 0] == 4.0

    @staticmethod
    def _dyadic(rng, size, scale=32.0):
        # Multiples of 2^-20: sums with same-scale values stay exactly
        # representable, so cancellation can be checked bit for bit.
        return np.round(rng.uniform(0, scale, size=size) * 2**20) / 2**20

    def test_per_ue_constant_cancels_bit_identically(self, rng):
        ranges = self._dyadic(rng, (6, 6), scale=400.0)
        _, base = difference_gnb_pairs(ranges)
        shifted = ranges + self._dyadic(rng, 6)[None, :]  # per-UE-link constants
        _, after = difference_gnb_pairs(shifted)
        assert np.array_equal(base, after)

    def test_per_gnb_constant_cancels_bit_identically(self, rng):
        ranges = self._dyadic(rng, (6, 6), scale=400.0)
        _, base = difference_ue_pairs(ranges)
        shifted = ranges + self._dyadic(rng, 6)[:, None]  # per-gNB-link constants
        _, after = difference_ue_pairs(shifted)
        assert np.array_equal(base, after)

    def test_scenario_link_excess_cancels_to_machine_precision(self, rng):
        # Real-valued excesses as produced by scenario synthesis: exact in
        # real arithmetic, rounding-limited in floats.
        _, ranges = _problem(seed=5)
        _, dg_base = difference_gnb_pairs(ranges)
        _, dg_after = difference_gnb_pairs(ranges + rng.uniform(0, 30, 6)[None, :])
        assert np.allclose(dg_base, dg_after, rtol=0, atol=1e-9)
        _, du_base = difference_ue_pairs(ranges)
        _, du_after = difference_ue_pairs(ranges + rng.uniform(0, 30, 6)[:, None])
        assert np.allclose(du_base, du_after, rtol=0, atol=1e-9)

    def test_noise_free_differences_match_geometry(self):
        sc, ranges = _problem(seed=7)
        pairs_g, diffs_g = difference_gnb_pairs(ranges)
        dist_g = np.linalg.norm(sc.target - sc.gnb_positions, axis=1)
        for row, (s, s2) in enumerate(pairs_g):
            expected = dist_g[s2] - dist_g[s]
            assert np.allclose(diffs_g[row, :], expected, atol=1e-9)
        pairs_u, diffs_u = difference_ue_pairs(ranges)
        dist_u = np.linalg.norm(sc.target - sc.ue_positions, axis=1)
        for col, (k, k2) in enumerate(pairs_u):
            expected = dist_u[k] - dist_u[k2]
            assert np.allclose(diffs_u[:, col], expected, atol=1e-9)

    def test_insufficient_geometry(self):
        with pytest.raises(InsufficientGeometryError):
            difference_gnb_pairs(np.ones((1, 4)))
        with pytest.raises(InsufficientGeometryError):
            difference_ue_pairs(np.ones((4, 1)))


class TestGradients:
    def _random_points(self, sc, rng, count):
        points = []
        nodes = np.vstack([sc.gnb_positions, sc.ue_positions])
        while len(points) < count:
            x = rng.uniform(-150, 150, 2)
            if np.linalg.norm(nodes - x, axis=1).min() > 1.0:
                points.append(x)
        return points

    def test_ls_gradient_matches_finite_differences(self, rng):
        sc, ranges = _problem(seed=8, outlier_max=10.0)
        g, u = sc.gnb_positions, sc.ue_positions
        for x in self._random_points(sc, rng, 25):
            analytic = ls_gradient(x, ranges, g, u)
            numeric = _fd_gradient(lambda p: ls_objective(p, ranges, g, u), x)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(analytic)

    def test_irls_gradient_matches_finite_differences(self, rng):
        sc, ranges = _problem(seed=9, outlier_max=10.0)
        g, u = sc.gnb_positions, sc.ue_positions
        weights = rng.uniform(0.1, 1.0, 6)
        weights /= weights.sum()
        for x in self._random_points(sc, rng, 25):
            analytic = irls_gradient(x, ranges, g, u, weights)
            numeric = _fd_gradient(lambda p: irls_objective(p, ranges, g, u, weights), x)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(analytic)

    def test_difference_gradient_matches_finite_differences(self, rng):
        sc, ranges = _problem(seed=10, outlier_max=10.0)
        g, u = sc.gnb_positions, sc.ue_positions
        for x in self._random_points(sc, rng, 25):
            analytic = difference_gradient(x, ranges, g, u)
            numeric = _fd_gradient(lambda p: difference_objective(p, ranges, g, u), x)
            assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(analytic)


class TestSolveLs:
    def test_stays_at_truth(self):
        sc, ranges = _problem(seed=11)
        result = solve_ls(ranges, sc.gnb_positions, sc.ue_positions, TIGHT, init=sc.target)
        assert result.converged
        assert np.linalg.norm(result.estimate - sc.target) < 1e-9

    def test_recovers_truth_from_centroid(self):
        sc, ranges = _problem(seed=12)
        init = centroid_init(sc.gnb_positions, sc.ue_positions)
        result = solve_ls(ranges, sc.gnb_positions, sc.ue_positions, TIGHT, init=init)
        assert result.converged
        assert np.linalg.norm(result.estimate - sc.target) < 1e-3

    def test_underdetermined_rejected(self):
        with pytest.raises(UnderdeterminedError):
            solve_ls(np.ones((1, 2)), np.zeros((1, 2)), np.ones((2, 2)))

    def test_accepts_measurement_set(self):
        sc, _ = _problem(seed=13)
        ms = true_bistatic_ranges(sc)
        result = solve_ls(ms, sc.gnb_positions, sc.ue_positions, TIGHT)
        assert np.linalg.norm(result.estimate - sc.target) < 1e-3


class TestSolveIrls:
    def test_downweights_biased_receiver(self):
        sc, ranges = _problem(seed=14)
        biased = ranges.copy()
        biased[:, 2] += 20.0
        g, u = sc.gnb_positions, sc.ue_positions
        init = ls_grid_init(biased, g, u, 75.0)
        irls = solve_irls(biased, g, u, TIGHT, init=init)
        ls = solve_ls(biased, g, u, TIGHT, init=init)
        assert irls.converged
        assert irls.ue_weights[2] < 0.05
        assert np.isclose(irls.ue_weights.sum(), 1.0)
        err_irls = np.linalg.norm(irls.estimate - sc.target)
        err_ls = np.linalg.norm(ls.estimate - sc.target)
        assert err_irls < err_ls

    def test_weights_on_simplex(self):
        for seed in range(10):
            sc, ranges = _problem(seed=seed, outlier_max=10.0)
            rng = np.random.default_rng(seed)
            noisy = ranges + rng.uniform(-1.5, 1.5, ranges.shape)
            noisy = np.maximum(noisy, 0.0)
            g, u = sc.gnb_positions, sc.ue_positions
            result = solve_irls(noisy, g, u, init=ls_grid_init(noisy, g, u, 75.0))
            assert result.ue_weights.shape == (6,)
            assert np.isclose(result.ue_weights.sum(), 1.0, atol=1e-12)
            assert ((result.ue_weights >= 0) & (result.ue_weights <= 1)).all()

    def test_degenerate_weights_reported_as_divergence(self):
        sc, ranges = _problem(seed=15)
        # All measurements wildly inflated: every residual exceeds e_max at
        # any sensible iterate, so every weight goes to zero.
        result = solve_irls(ranges + 1000.0, sc.gnb_positions, sc.ue_positions,
                            init=sc.target)
        assert not result.converged

    def test_requires_two_receivers(self):
        with pytest.raises(InsufficientGeometryError):
            solve_irls(np.ones((4, 1)), np.zeros((4, 2)), np.ones((1, 2)))


class TestSolveProposed:
    def test_per_link_biases_cancel_exactly(self, rng):
        # Uniform per-side biases on every link: all difference residuals
        # vanish at the truth, so the fit recovers it.
        sc, ranges = _problem(seed=16)
        biased = ranges + 6.0 + 4.0  # same constant on every gNB and UE link
        result = solve_proposed(biased, sc.gnb_positions, sc.ue_positions, TIGHT,
                                init=sc.target + np.array([2.0, -1.0]))
        assert result.converged
        assert np.linalg.norm(result.estimate - sc.target) < 1e-3

    def test_arbitrary_per_link_biases_leave_cancelling_family_unchanged(self, rng):
        dyadic = TestDifferencing._dyadic
        ranges = dyadic(rng, (6, 6), scale=400.0)
        zg = dyadic(rng, 6, scale=25.0)
        zu = dyadic(rng, 6, scale=25.0)
        biased = (ranges + zg[:, None]) + zu[None, :]
        _, dg_base = difference_gnb_pairs(ranges + zg[:, None])
        _, dg_biased = difference_gnb_pairs(biased)
        assert np.array_equal(dg_base, dg_biased)  # UE-side constants invisible
        _, du_base = difference_ue_pairs(ranges + zu[None, :])
        _, du_biased = difference_ue_pairs(biased)
        assert np.array_equal(du_base, du_biased)  # gNB-side constants invisible

    def test_requires_pairs_on_both_sides(self):
        with pytest.raises(InsufficientGeometryError):
            solve_proposed(np.ones((1, 4)), np.zeros((1, 2)), np.ones((4, 2)))
        with pytest.raises(InsufficientGeometryError):
            solve_proposed(np.ones((4, 1)), np.zeros((4, 2)), np.ones((1, 2)))


class TestFusion:
    def _results(self, converged_irls):
        from isacloc import LocalizationResult

        irls = LocalizationResult(np.array([0.0, 0.0]), converged_irls, 10, "irls",
                                  np.full(4, 0.25))
        prop = LocalizationResult(np.array([2.0, 2.0]), True, 20, "proposed")
        return irls, prop

    def test_even_weights_average(self):
        irls, prop = self._results(True)
        fused = fuse(irls, prop, SolverConfig())
        assert np.allclose(fused.estimate, [1.0, 1.0])
        assert fused.converged

    def test_irls_divergence_falls_back(self):
        irls, prop = self._results(False)
        fused = fuse(irls, prop, SolverConfig())
        assert np.allclose(fused.estimate, [2.0, 2.0])

    def test_degenerate_weight_returns_irls(self):
        irls, prop = self._results(True)
        cfg = SolverConfig(fusion_weight_irls=1.0, fusion_weight_proposed=0.0)
        fused = fuse(irls, prop, cfg)
        assert np.allclose(fused.estimate, [0.0, 0.0])

    def test_solve_fused_end_to_end(self):
        sc, ranges = _problem(seed=18)
        result = solve_fused(ranges, sc.gnb_positions, sc.ue_positions, TIGHT,
                             init=sc.target + np.array([1.0, 1.0]))
        assert result.method == "fused"
        assert np.linalg.norm(result.estimate - sc.target) < 1e-2


class TestSolverProperties:
    def test_translation_equivariance(self):
        shift = np.array([1234.5, -987.0])
        sc, ranges = _problem(seed=19, outlier_max=10.0)
        rng = np.random.default_rng(19)
        noisy = np.maximum(ranges + rng.uniform(-1.5, 1.5, ranges.shape), 0.0)
        g, u = sc.gnb_positions, sc.ue_positions
        init = ls_grid_init(noisy, g, u, 75.0)
        for solver in (solve_ls, solve_irls, solve_proposed):
            base = solver(noisy, g, u, TIGHT, init=init)
            moved = solver(noisy, g + shift, u + shift, TIGHT, init=init + shift)
            assert np.allclose(moved.estimate, base.estimate + shift, atol=1e-6)

    def test_monotone_descent_dominates(self):
        violations = {"ls": 0, "proposed": 0}
        trials = 100
        from isacloc import OfdmConfig, synthesize_measurements_model

        config = OfdmConfig(120e3, 792)
        for seed in range(trials):
            sc = sample_scenario(6, 6, outlier_max=10.0, rng_seed=seed)
            ms = synthesize_measurements_model(sc, config, np.random.default_rng(seed))
            g, u = sc.gnb_positions, sc.ue_positions
            trace_ls, trace_pr = [], []
            solve_ls(ms, g, u, init=ls_grid_init(ms, g, u, 75.0), trace=trace_ls)
            solve_proposed(ms, g, u, init=difference_grid_init(ms, g, u, 75.0),
                           trace=trace_pr)
            for method, trace in (("ls", trace_ls), ("proposed", trace_pr)):
                values = np.asarray(trace)
                if (np.diff(values) > 1e-9 * np.abs(values[:-1])).any():
                    violations[method] += 1
        assert violations["ls"] <= trials // 100
        assert violations["proposed"] <= trials // 100

    def test_grid_init_helpers_match_generic_search(self):
        sc, ranges = _problem(seed=20, outlier_max=10.0)
        g, u = sc.gnb_positions, sc.ue_positions
        fast_ls = ls_grid_init(ranges, g, u, 75.0)
        slow_ls = grid_search_init(lambda x: ls_objective(x, ranges, g, u), 75.0)
        assert np.array_equal(fast_ls, slow_ls)
        fast_df = difference_grid_init(ranges, g, u, 75.0)
        slow_df = grid_search_init(lambda x: difference_objective(x, ranges, g, u), 75.0)
        assert np.array_equal(fast_df, slow_df)

    def test_result_serializes_to_json(self):
        sc, ranges = _problem(seed=21)
        result = solve_ls(ranges, sc.gnb_positions, sc.ue_positions, init=sc.target)
        payload = json.loads(result.to_json())
        assert set(payload) == {"method", "estimate", "converged", "iterations", "ue_weights"}
        assert payload["method"] == "ls"
        assert len(payload["estimate"]) == 2


def test_solver_config_validation():
    from isacloc import ConfigurationError

    with pytest.raises(ConfigurationError):
        SolverConfig(ls_step=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(fusion_weight_irls=0.7, fusion_weight_proposed=0.7)
    with pytest.raises(ConfigurationError):
        SolverConfig(max_iterations=0)


def test_measurement_set_and_array_inputs_agree():
    sc, ranges = _problem(seed=22)
    ms = MeasurementSet(ranges=ranges)
    a = solve_ls(ms, sc.gnb_positions, sc.ue_positions, TIGHT, init=sc.target)
    b = solve_ls(ranges, sc.gnb_positions, sc.ue_positions, TIGHT, init=sc.target)
    assert np.array_equal(a.estimate, b.estimate)
