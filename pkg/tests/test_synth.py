import math

import numpy as np
import pytest

from ptw.synth import (
    Gaussian,
    Mixture,
    MixtureSpec,
    SegmentLabel,
    Sinusoid,
    anomaly_mask,
    gen_composite,
    gen_gaussian,
    gen_mixture,
    two_anomaly_stream,
)

N = 100_000


class TestGaussian:
    def test_moments(self):
        x = gen_gaussian(N, 0.0, 4.0, seed=1)
        assert abs(x.mean()) < 0.05
        assert abs(x.var(ddof=1) - 4.0) < 0.1

    def test_single(self):
        x = gen_gaussian(1, 3.0, 2.0, seed=2)
        assert x.shape == (1,) and math.isfinite(x[0])

    def test_deterministic(self):
        assert gen_gaussian(500, seed=7).tobytes() == gen_gaussian(500, seed=7).tobytes()
        assert not np.array_equal(gen_gaussian(500, seed=7), gen_gaussian(500, seed=8))

    def test_rejects(self):
        with pytest.raises(ValueError):
            gen_gaussian(0)
        with pytest.raises(ValueError):
            gen_gaussian(5, 0.0, 0.0)


class TestMixtureSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(weights=(0.5, 0.4), means=(0, 1), variances=(1, 1)),
            dict(weights=(1.2, -0.2), means=(0, 1), variances=(1, 1)),
            dict(weights=(0.5, 0.5), means=(0,), variances=(1, 1)),
            dict(weights=(0.5, 0.5), means=(0, 1), variances=(1, 0)),
            dict(weights=(), means=(), variances=()),
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            MixtureSpec(**kwargs)

    def test_moment_formulas(self):
        s = MixtureSpec()
        assert s.mean() == pytest.approx(0.9 * 800 + 0.1 * 400)
        second = 0.9 * (900 + 800**2) + 0.1 * (400 + 400**2)
        assert s.variance() == pytest.approx(second - s.mean() ** 2)


class TestMixture:
    def test_single_component_equals_gaussian(self):
        spec = MixtureSpec((1.0,), (3.0,), (2.5,))
        x, z = gen_mixture(1000, spec, seed=4)
        assert x.tobytes() == gen_gaussian(1000, 3.0, 2.5, seed=4).tobytes()
        assert not z.any()

    def test_fractions(self):
        _, z = gen_mixture(N, MixtureSpec(), seed=5)
        frac = np.bincount(z, minlength=2) / N
        assert np.all(np.abs(frac - np.array([0.9, 0.1])) < 0.02)

    def test_latent_matches_samples(self):
        x, z = gen_mixture(N, MixtureSpec(), seed=6)
        # components sit 400 ms apart at roughly 30 ms and 20 ms spread
        assert np.all(x[z == 0] > 600) and np.all(x[z == 1] < 600)

    def test_bimodal(self):
        x, _ = gen_mixture(N, MixtureSpec(), seed=7)
        counts, edges = np.histogram(x, bins=100)
        centers = 0.5 * (edges[1:] + edges[:-1])
        lo = counts[np.argmin(np.abs(centers - 400))]
        hi = counts[np.argmin(np.abs(centers - 800))]
        between = counts[(centers > 450) & (centers < 750)]
        assert between.min() < min(lo, hi)

    def test_marginal_moments(self):
        spec = MixtureSpec()
        x, _ = gen_mixture(N, spec, seed=8)
        var = spec.variance()
        se_mean = math.sqrt(var / N)
        assert abs(x.mean() - spec.mean()) < 3 * se_mean
        # standard error of the sample variance: sqrt((m4 - var^2) / n)
        m4 = np.mean((x - x.mean()) ** 4)
        se_var = math.sqrt((m4 - var**2) / N)
        assert abs(x.var(ddof=1) - var) < 3 * se_var

    def test_source_draw(self):
        rng = np.random.default_rng(0)
        assert Mixture().draw(10, rng).shape == (10,)


class TestComposite:
    def test_single_segment(self):
        x, labels = gen_composite([(Gaussian(1.0, 2.0), 300)], seed=3)
        assert x.tobytes() == gen_gaussian(300, 1.0, 2.0, seed=3).tobytes()
        assert labels == []

    def test_two_anomaly_labels(self):
        x, labels = two_anomaly_stream(seed=0)
        assert len(x) == 6800
        assert labels == [SegmentLabel(2000, 2400, "sinusoid"), SegmentLabel(4400, 4800, "low_variance")]
        mask = anomaly_mask(len(x), labels)
        assert mask.sum() == 800 and mask[2000] and not mask[2400]

    def test_sinusoid_segment(self):
        x, _ = two_anomaly_stream(seed=0)
        assert np.allclose(x[2000:2400], Sinusoid(2.0, 50.0).draw(400))

    def test_zero_amplitude(self):
        assert not Sinusoid(amplitude=0.0).draw(77).any()
        x, _ = two_anomaly_stream(seed=1, amplitude=0.0)
        assert not x[2000:2400].any()

    def test_deterministic(self):
        a, la = two_anomaly_stream(seed=9)
        b, lb = two_anomaly_stream(seed=9)
        assert a.tobytes() == b.tobytes() and la == lb

    def test_rejects(self):
        with pytest.raises(ValueError):
            gen_composite([])
        with pytest.raises(ValueError):
            gen_composite([(Gaussian(), 0)])

    def test_label_dict(self):
        assert SegmentLabel(1, 4, "a").to_dict() == {"start": 1, "stop": 4, "label": "a"}
