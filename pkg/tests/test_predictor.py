import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptw.predictor import (
    DegenerateStatsError,
    GaussianStats,
    gaussian_entropy_bits,
    log2_gamma_ratio,
    predict,
    predict_op,
    predict_ss,
    sequential_codelength,
    sequential_log2,
    stats_update,
)

from oracles import density_integral, exact_mean_ssd, posterior_predictive, posterior_predictive_2d


def stats_of(xs):
    return GaussianStats.from_samples(xs)


class TestStatsUpdate:
    def test_single_sample(self):
        s = stats_update(GaussianStats(), 0.0)
        assert (s.count, s.mean, s.ssd) == (1, 0.0, 0.0)

    def test_two_samples(self):
        s = stats_of([1.0, 3.0])
        assert (s.count, s.mean, s.ssd) == (2, 2.0, 2.0)
        assert s.variance == 2.0

    @pytest.mark.parametrize("c", [0.0, -3.5, 1e8])
    def test_constant(self, c):
        s = stats_of([c] * 5)
        assert s.mean == c
        assert s.ssd == 0.0

    def test_value_semantics(self):
        s = stats_of([1.0, 2.0])
        s2 = s.update(5.0)
        assert s.count == 2 and s2.count == 3

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=2, max_size=60))
    def test_matches_exact(self, xs):
        s = stats_of(xs)
        mean, ssd = exact_mean_ssd(xs)
        scale = max(abs(v) for v in xs) or 1.0
        assert s.count == len(xs)
        assert s.mean == pytest.approx(mean, rel=1e-12, abs=1e-14 * scale)
        assert s.ssd == pytest.approx(ssd, rel=1e-12, abs=1e-13 * scale * scale * len(xs))
        assert s.ssd >= 0.0

    def test_large_offset_stable(self):
        rng = np.random.default_rng(3)
        xs = (1e8 + rng.standard_normal(1000)).tolist()
        s = stats_of(xs)
        mean, ssd = exact_mean_ssd(xs)
        assert s.mean == pytest.approx(mean, rel=1e-14)
        assert s.ssd == pytest.approx(ssd, rel=1e-6)


class TestPredictOp:
    def test_at_mean(self):
        lp = predict_op(stats_of([1.0, 3.0]), 2.0)
        assert 2**lp == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-14)
        assert lp == pytest.approx(-1.82574, abs=1e-5)

    def test_one_sd_away(self):
        s = GaussianStats(2, 0.0, 1.0)
        assert 2 ** predict_op(s, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-14)

    def test_variance_floor(self):
        s = stats_of([0.0] * 5)
        lp = predict_op(s, 0.0, floor=1e-6)
        assert lp == pytest.approx(-0.5 * math.log2(2 * math.pi * 1e-6), rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateStatsError):
            predict_op(stats_of([1.0]), 0.0)
        with pytest.raises(DegenerateStatsError):
            predict_ss(GaussianStats(), 0.0)

    def test_bad_floor(self):
        with pytest.raises(ValueError):
            predict_op(stats_of([1.0, 2.0]), 0.0, floor=0.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            predict("kt", stats_of([1.0, 2.0]), 0.0)  # type: ignore[arg-type]


class TestPredictSS:
    def test_two_point_example(self):
        # {-1, 1}: n=2, ssd=2; appending 0 keeps ssd=2
        s = stats_of([-1.0, 1.0])
        got = 2 ** predict_ss(s, 0.0)
        oracle = posterior_predictive(0.0, 2, 0.0, 2.0)
        assert got == pytest.approx(oracle, rel=1e-9)
        # closed form of the same expression: 1 / (2 sqrt 3)
        assert got == pytest.approx(0.28867513459481287, rel=1e-13)

    @pytest.mark.parametrize("n,mean,ssd,x", [(2, 0.0, 2.0, 1.3), (5, 1.0, 3.0, -0.4), (30, -2.0, 80.0, 4.0)])
    def test_matches_joint_posterior(self, n, mean, ssd, x):
        got = 2 ** predict_ss(GaussianStats(n, mean, ssd), x)
        assert got == pytest.approx(posterior_predictive_2d(x, n, mean, ssd), rel=1e-7)

    def test_tails_vanish_monotonically(self):
        s = stats_of([-1.0, 1.0])
        xs = np.linspace(0, 1e4, 2001)
        lp = np.array([predict_ss(s, x) for x in xs])
        assert np.all(np.diff(lp) < 0)
        assert 2 ** predict_ss(s, 1e12) < 1e-20
        assert predict_ss(s, 5.0) == predict_ss(s, -5.0)

    def test_gamma_ratio(self):
        assert log2_gamma_ratio(2) == pytest.approx(math.log2(math.sqrt(math.pi) / 2), rel=1e-14)
        assert log2_gamma_ratio(3) == pytest.approx(math.log2(1 / (math.sqrt(math.pi) / 2)), rel=1e-14)

    def test_constant_data_floor_finite(self):
        s = stats_of([2.0] * 10)
        assert math.isfinite(predict_ss(s, 2.0, floor=1e-8))
        assert math.isfinite(predict_ss(s, 1e6, floor=1e-8))


@pytest.mark.parametrize("kind", ["op", "ss"])
def test_normalization(kind):
    rng = np.random.default_rng(11)
    for _ in range(8):
        n = int(rng.integers(2, 40))
        mean = float(rng.uniform(-5, 5))
        ssd = float(rng.uniform(0.05, 10)) * (n - 1)
        s = GaussianStats(n, mean, ssd)
        total = density_integral(lambda x: predict(kind, s, x), mean, math.sqrt(ssd / n))
        assert total == pytest.approx(1.0, abs=1e-4)


class TestSequential:
    def test_telescoping_ss(self):
        rng = np.random.default_rng(5)
        xs = rng.normal(1.0, 2.0, 300).tolist()
        seq = sequential_log2(xs, "ss")
        scratch = [predict_ss(stats_of(xs[:i]), xs[i]) for i in range(2, len(xs))]
        assert math.fsum(seq) == pytest.approx(math.fsum(scratch), rel=1e-10)
        # joint log2 density in closed form: the A_n^{n/2} factors cancel pairwise
        n = len(xs)
        a2 = stats_of(xs[:2]).ssd
        an = stats_of(xs).ssd
        const = math.fsum(
            0.5 * math.log2(k / (math.pi * (k + 1))) + log2_gamma_ratio(k) for k in range(2, n)
        )
        joint = const + 1.0 * math.log2(a2) - 0.5 * n * math.log2(an)
        assert math.fsum(seq) == pytest.approx(joint, rel=1e-10)

    def test_init_skips_nothing(self):
        xs = [0.1, 0.2, 0.3]
        assert len(sequential_log2(xs, "op")) == 1
        assert len(sequential_log2(xs, "op", init=GaussianStats(2, 0.0, 1.0))) == 3

    def test_codelength_sign(self):
        xs = np.random.default_rng(1).standard_normal(50).tolist()
        assert sequential_codelength(xs) == pytest.approx(-math.fsum(sequential_log2(xs)), rel=1e-12)

    @pytest.mark.parametrize("kind", ["op", "ss"])
    def test_entropy_convergence(self, kind):
        var = 2.5
        xs = np.random.default_rng(8).normal(0, math.sqrt(var), 10_000).tolist()
        per = sequential_codelength(xs, kind) / len(xs)
        assert per == pytest.approx(gaussian_entropy_bits(var), abs=0.05)
