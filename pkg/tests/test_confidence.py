import math

import numpy as np
import pytest
from scipy import stats

from tndsens import (BoundaryCell, InvalidCovariance, InvalidInput, SensitivityParams, bounds_delta,
                     bounds_delta_gamma, ci_bounds_closed, ci_bounds_opt, ci_bounds_oracle, conf_set,
                     max_abs_gauss_quantile, observed_or, simultaneous_level, solve_bounds, validate_table,
                     wald_or_interval)
from tndsens.confidence import cell_correlation
from tndsens.simlab import sample_multinomial_table

from .oracles import max_abs_quantile_identity

COUNTS = (100, 200, 300, 400)
REF_PARAMS = SensitivityParams(0.1, 5, 2)
DRAWS = 200_000


def contains(outer, inner, rel=1e-9):
    return outer.lower <= inner.lower * (1 + rel) and inner.upper <= outer.upper * (1 + rel)


class TestQuantile:
    @pytest.mark.parametrize("alpha", [0.05, 0.5])
    def test_identity_matches_analytic(self, alpha):
        d = max_abs_gauss_quantile(np.eye(4), alpha, draws=10**6, seed=1)
        assert d == pytest.approx(max_abs_quantile_identity(alpha), abs=0.01)

    def test_analytic_values(self):
        # (2 Phi(d) - 1)^4 = 1 - alpha
        for alpha in (0.05, 0.5):
            d = max_abs_quantile_identity(alpha)
            assert (2 * stats.norm.cdf(d) - 1) ** 4 == pytest.approx(1 - alpha, rel=1e-12)

    def test_correlated_pairs_not_larger(self):
        block = np.ones((2, 2))
        omega = np.block([[block, np.zeros((2, 2))], [np.zeros((2, 2)), block]])
        d_pair = max_abs_gauss_quantile(omega, 0.05, DRAWS, seed=2)
        d_id = max_abs_gauss_quantile(np.eye(4), 0.05, DRAWS, seed=2)
        assert d_pair <= d_id

    def test_deterministic(self):
        om = cell_correlation((0.1, 0.2, 0.3, 0.4))
        assert max_abs_gauss_quantile(om, 0.05, 10**4, 3) == max_abs_gauss_quantile(om, 0.05, 10**4, 3)

    @pytest.mark.parametrize("omega", [
        np.array([[1, 0.9, 0.9], [0.9, 1, -0.9], [0.9, -0.9, 1]]),
        np.array([[1, 0.5], [0.4, 1]]),
        np.array([[2, 0], [0, 1]]),
        np.ones(3),
    ])
    def test_invalid(self, omega):
        with pytest.raises(InvalidCovariance):
            max_abs_gauss_quantile(omega, 0.05, 100)

    def test_cell_correlation_is_singular(self):
        om = cell_correlation((0.1, 0.2, 0.3, 0.4))
        assert np.allclose(np.diag(om), 1)
        assert np.linalg.eigvalsh(om).min() > -1e-12
        assert abs(np.linalg.det(om)) < 1e-12


class TestConfSet:
    def test_bracket(self):
        cs = conf_set(COUNTS, 0.05, "N", mc_draws=10**6)
        assert 1.96 <= cs.d_hat <= 2.50
        assert np.all(cs.lower < cs.center) and np.all(cs.center < cs.upper)

    def test_collapse_as_alpha_grows(self):
        widths = [float(np.max(c.upper - c.lower))
                  for c in (conf_set(COUNTS, a, "N", DRAWS) for a in (0.05, 0.5, 0.99, 0.9999))]
        assert widths == sorted(widths, reverse=True)
        assert widths[-1] < 0.1 * widths[0]

    @pytest.mark.parametrize("shape", ["Q", "N", "T"])
    def test_center_inside(self, shape):
        cs = conf_set(COUNTS, 0.05, shape, DRAWS)
        assert cs.contains(cs.center)
        if shape == "Q":
            assert cs.quad_form(cs.center) == 0.0
            assert cs.df == 3 and cs.threshold == pytest.approx(stats.chi2.ppf(0.95, 3))

    @pytest.mark.parametrize("shape", ["Q", "N", "T"])
    def test_monotone_in_alpha(self, shape):
        small = conf_set(COUNTS, 0.01, shape, DRAWS)
        big = conf_set(COUNTS, 0.2, shape, DRAWS)
        for q in big.sample(300, np.random.default_rng(0), boundary=True):
            assert big.contains(q, tol=1e-8)
            assert small.contains(q, tol=1e-8)

    def test_arcsine_clips(self):
        cs = conf_set((1, 1, 1, 997), 0.05, "T", DRAWS)
        assert np.all(cs.lower >= 0) and np.all(cs.upper <= 1)
        assert cs.upper[3] == pytest.approx(1.0) or cs.upper[3] < 1

    def test_errors(self):
        for shape in ("N", "T"):
            with pytest.raises(BoundaryCell):
                conf_set((0, 10, 10, 10), 0.05, shape, 100)
        conf_set((0, 10, 10, 10), 0.05, "Q")
        with pytest.raises(InvalidInput):
            conf_set((0, 0, 0, 0), 0.05, "Q")
        with pytest.raises(InvalidInput):
            conf_set(COUNTS, 0.05, "X")
        with pytest.raises(InvalidInput):
            conf_set(COUNTS, 1.5, "Q")

    def test_ellipse_hull_is_tight(self):
        cs = conf_set(COUNTS, 0.05, "Q")
        lo, hi = cs.hull()
        pts = cs.sample(4000, np.random.default_rng(1))
        assert np.all(pts >= lo - 1e-12) and np.all(pts <= hi + 1e-12)
        assert np.all(hi - pts.max(axis=0) < 0.05 * (hi - lo))
        for q in pts[:50]:
            assert cs.quad_form(q) == pytest.approx(cs.threshold, rel=1e-9)
            assert q.sum() == pytest.approx(1.0, abs=1e-12)


class TestSimultaneousLevel:
    @pytest.mark.parametrize("k, expected", [(1, 0.05), (2, 0.02532), (10, 0.005116)])
    def test_examples(self, k, expected):
        assert simultaneous_level(0.05, k) == pytest.approx(expected, abs=1e-5)

    def test_invalid(self):
        with pytest.raises(InvalidInput):
            simultaneous_level(0.05, 0)
        with pytest.raises(InvalidInput):
            simultaneous_level(0, 2)


class TestClosed:
    def test_no_slack_symmetric(self):
        r = ci_bounds_closed((250, 250, 250, 250), 0.05, (0.0, 1.0), "N", DRAWS)
        assert r.lower < 1.0 < r.upper
        assert r.lower * r.upper == pytest.approx(1.0, rel=1e-9)
        # the set's odds-ratio range is wider than the pointwise Wald interval
        w_lo, w_hi = wald_or_interval(validate_table((250,) * 4, as_counts=True))
        assert r.lower < w_lo and w_hi < r.upper

    def test_contains_point_bounds(self):
        r = ci_bounds_closed(COUNTS, 0.05, (0.1, 2), "N", DRAWS)
        assert r.lower <= 0.523 and r.upper >= 0.835
        ref = bounds_delta_gamma(validate_table(COUNTS), 0.1, 2)
        assert contains(r.interval, ref)

    @pytest.mark.parametrize("shape", ["N", "T"])
    def test_shrinks_with_n(self, shape):
        ref = bounds_delta_gamma(validate_table(COUNTS), 0.1, 2)
        widths = []
        for scale in (100, 10**4, 10**6):
            r = ci_bounds_closed(tuple(c * scale for c in (1, 2, 3, 4)), 0.05, (0.1, 2), shape, DRAWS)
            assert contains(r.interval, ref)
            widths.append(r.interval.log_width)
        assert widths[0] > widths[1] > widths[2]
        slack = [w - ref.log_width for w in widths]
        assert slack[2] < 0.02 * slack[0]

    def test_q_rejected(self):
        with pytest.raises(InvalidInput, match="ci_bounds_opt"):
            ci_bounds_closed(COUNTS, 0.05, (0.1, 2), "Q")

    def test_to_dict(self):
        d = ci_bounds_closed(COUNTS, 0.05, (0.1, 2), "T", DRAWS).to_dict()
        assert d["shape"] == "T" and d["alpha"] == 0.05 and d["n"] == 1000

    def test_wider_for_smaller_alpha(self):
        a = ci_bounds_closed(COUNTS, 0.01, (0.1, 2), "N", DRAWS)
        b = ci_bounds_closed(COUNTS, 0.2, (0.1, 2), "N", DRAWS)
        assert contains(a.interval, b.interval)


class TestOpt:
    counts = tuple(1000 * c for c in (0.1, 0.2, 0.3, 0.4))

    @pytest.mark.parametrize("shape", ["Q", "N", "T"])
    def test_reference_contains_point_and_oracle(self, shape):
        r = ci_bounds_opt(self.counts, 0.05, REF_PARAMS, shape, mc_draws=DRAWS)
        point = solve_bounds(validate_table(self.counts), REF_PARAMS)
        assert contains(r.interval, point)
        samples = 1000 if shape == "Q" else 300
        o = ci_bounds_oracle(r.conf_set, REF_PARAMS, samples=samples, seed=4)
        assert contains(r.interval, o, rel=1e-6)
        # and never beyond the closed-form hull bound
        hull = ci_bounds_closed(self.counts, 0.05, (0.1, 5), "N", DRAWS) if shape != "Q" else None
        if hull is not None and shape == "N":
            assert contains(hull.interval, r.interval)

    def test_alpha_near_one(self):
        counts = tuple(10**6 * c for c in (1, 2, 3, 4))
        r = ci_bounds_opt(counts, 0.999, REF_PARAMS, "Q")
        point = solve_bounds(validate_table(counts), REF_PARAMS)
        assert r.lower == pytest.approx(point.lower, rel=1e-3)
        assert r.upper == pytest.approx(point.upper, rel=1e-3)

    def test_no_slack_or_extremes(self):
        r = ci_bounds_opt(COUNTS, 0.05, (0.0, 1.0, math.inf), "Q")
        cs = r.conf_set
        ors = [observed_or(validate_table(q)) for q in cs.sample(2000, np.random.default_rng(5))]
        assert r.lower <= min(ors) * (1 + 1e-9) and max(ors) <= r.upper * (1 + 1e-9)
        assert r.lower == pytest.approx(min(ors), rel=5e-3)
        assert r.upper == pytest.approx(max(ors), rel=5e-3)

    def test_delta_only(self):
        r = ci_bounds_opt(COUNTS, 0.05, (0.05, math.inf, math.inf), "Q")
        assert contains(r.interval, bounds_delta(validate_table(COUNTS), 0.05))
        o = ci_bounds_oracle(r.conf_set, (0.05, math.inf, math.inf), samples=400, seed=6)
        assert contains(r.interval, o, rel=1e-6)

    def test_q_inside_n_mostly(self):
        truth = validate_table((0.1, 0.2, 0.3, 0.4))
        inside = 0
        for seed in range(20):
            t = sample_multinomial_table(truth, 1000, seed=seed)
            q = ci_bounds_opt(t, 0.05, REF_PARAMS, "Q")
            nn = ci_bounds_opt(t, 0.05, REF_PARAMS, "N", mc_draws=DRAWS, seed=seed)
            inside += contains(nn.interval, q.interval)
        assert inside >= 15
