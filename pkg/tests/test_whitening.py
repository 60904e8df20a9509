import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fbm_seqtest.fbm_sim import (PRIOR_DRAW, SamplePath, draw_observation_batch, fixed_theta,
                                 path_seeds, sample_observation, uniform_grid)
from fbm_seqtest.model import ModelParams, time_change
from fbm_seqtest.whitening import (GridError, kernel, posterior_batch, posterior_trajectory,
                                   whiten, whiten_batch, whitened_drift)

# K_H(1, 0.3) and C_H int_0^1 K_H(1, s) ds, mpmath at 50 digits
KERNEL_REF = {0.3: 0.88592957992396721487, 0.7: 0.97819216544392061015}
INTEGRAL_REF = {0.3: 1.0142818528887818968, 0.7: 0.97482958114635052492}


def whitened_batch(hurst, n_paths, seed, mode, n=512, mu=0.0, sigma=1.0):
    p = ModelParams(mu=mu, sigma=sigma, hurst=hurst)
    t, th, z = draw_observation_batch(p, mode, n, 1.0, path_seeds(seed, n_paths))
    x = whiten_batch(t, z, hurst)
    return p, t, th, x


def within(samples, target, k=3.0):
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - target) < k * se


class TestKernel:
    @pytest.mark.parametrize("h", sorted(KERNEL_REF))
    def test_value(self, h):
        assert kernel(1.0, 0.3, h) == pytest.approx(KERNEL_REF[h], rel=1e-12)

    @pytest.mark.parametrize("h", sorted(INTEGRAL_REF))
    def test_integral_identity(self, h):
        p = ModelParams(0, 1, h)
        val = integrate.quad(lambda s: kernel(1.0, s, h), 0, 1, limit=200)[0]
        assert p.consts.c_h * val == pytest.approx(INTEGRAL_REF[h], rel=1e-8)
        assert whitened_drift(1.0, p) == pytest.approx(INTEGRAL_REF[h], rel=1e-13)

    def test_half_is_one(self):
        s = np.linspace(0.01, 0.99, 9)
        assert np.allclose(kernel(1.0, s, 0.5), 1.0, atol=1e-15)


class TestWhiten:
    def test_half_identity(self):
        p = ModelParams(0.3, 1.0, 0.5)
        sc = sample_observation(p, PRIOR_DRAW, 128, 2.0, seed=1)
        x = whiten(sc.path, p)
        assert np.max(np.abs(x.values - sc.path.values)) <= 1e-12

    @pytest.mark.parametrize("h", [0.3, 0.7])
    def test_linear_path_gives_drift(self, h):
        p = ModelParams(0, 1, h)
        t = uniform_grid(512, 1.0)
        x = whiten_batch(t, 2.0 * t, h)
        assert x[0] == 0.0
        assert np.max(np.abs(x - 2.0 * whitened_drift(t, p))) < 2e-3

    def test_batch_matches_single(self):
        p = ModelParams(0, 1, 0.3)
        t, _, z = draw_observation_batch(p, PRIOR_DRAW, 64, 1.0, path_seeds(2, 3))
        xb = whiten_batch(t, z, 0.3)
        for row, xr in zip(z, xb):
            assert np.allclose(whiten(SamplePath(t, row), p).values, xr, atol=1e-14)

    def test_non_uniform_grid(self):
        t = np.array([0.0, 0.1, 0.3, 0.6])
        with pytest.raises(GridError):
            whiten(SamplePath(t, np.array([0.0, 0.1, 0.2, 0.1])), ModelParams(0, 1, 0.3))


class TestPosterior:
    def test_prior_recovered(self):
        p = ModelParams(0.7, 2.0, 0.3)
        sc = sample_observation(p, PRIOR_DRAW, 64, 1.0, seed=3)
        tr = posterior_trajectory(whiten(sc.path, p), p)
        assert tr.a[0] / tr.b[0] == pytest.approx(0.7, rel=1e-15)
        assert 1.0 / tr.b[0] == pytest.approx(4.0, rel=1e-15)
        assert tr.r[0] == 0.0 and tr.w[0] == 0.0

    def test_half_closed_forms(self):
        p = ModelParams(0.4, 1.0, 0.5)
        sc = sample_observation(p, PRIOR_DRAW, 100, 3.0, seed=4)
        tr = posterior_trajectory(whiten(sc.path, p), p)
        assert np.allclose(tr.b, 1.0 + sc.path.times, rtol=0, atol=1e-15)
        assert np.allclose(tr.a, 0.4 + sc.path.values, rtol=0, atol=1e-12)

    @given(st.floats(0.05, 0.95), st.floats(0.2, 4.0), st.floats(-2, 2))
    def test_deterministic_parts(self, h, sigma, mu):
        p = ModelParams(mu, sigma, h)
        t = uniform_grid(64, 3.0)
        a, b, r, w = posterior_batch(t, np.zeros_like(t), p)
        c = p.consts
        closed = 1 / sigma ** 2 + c.l_h ** 2 * t ** (2 - 2 * h) / (2 - 2 * h)
        assert np.array_equal(b, closed)
        assert np.all(np.diff(b) > 0) and np.all(np.diff(r) > 0)
        assert np.allclose(time_change(r[1:], p), t[1:], rtol=1e-10, atol=0)
        # without observations noise the posterior mean stays at the prior mean
        assert np.allclose(a / b, mu * (1 / sigma ** 2) / b, atol=1e-15)


class TestStatistics:
    """Distributional checks of the whitening; fixed seeds."""

    @pytest.mark.parametrize("h", [0.3, 0.7])
    def test_x_is_brownian(self, h):
        _, t, _, x = whitened_batch(h, 2000, 30, fixed_theta(0.0))
        for tc in (0.25, 0.5, 1.0):
            i = int(round(tc * 512))
            xx = x[:, i] ** 2
            assert within(xx, tc)

    @pytest.mark.parametrize("h", [0.3, 0.7])
    def test_x_drift(self, h):
        p, t, _, x = whitened_batch(h, 2000, 31, fixed_theta(1.5))
        for tc in (0.25, 0.5, 1.0):
            i = int(round(tc * 512))
            assert within(x[:, i], whitened_drift(tc, p, 1.5))

    @pytest.mark.parametrize("h", [0.3, 0.5, 0.7])
    def test_w_increments_under_prior(self, h):
        p, t, _, x = whitened_batch(h, 2000, 32, PRIOR_DRAW)
        _, _, r, w = posterior_batch(t, x, p)
        for i, j in ((128, 0), (256, 128), (512, 256), (512, 64)):
            d = (w[:, i] - w[:, j]) ** 2
            assert within(d, r[i] - r[j])

    @pytest.mark.parametrize("h", [0.3, 0.7])
    def test_w_increments_at_zero_drift(self, h):
        # with theta fixed at 0 (sigma = 1) W is not a Brownian motion:
        # Var(W_ri - W_rj) = ri(1-ri) + rj(1-rj) - 2 rj(1-ri) for rj < ri
        p, t, _, x = whitened_batch(h, 10000, 33, fixed_theta(0.0))
        _, _, r, w = posterior_batch(t, x, p)
        for i, j in ((256, 128), (512, 64)):
            d = (w[:, i] - w[:, j]) ** 2
            exact = r[i] * (1 - r[i]) + r[j] * (1 - r[j]) - 2 * r[j] * (1 - r[i])
            assert within(d, exact)

    def test_posterior_consistency(self):
        p, t, _, x = whitened_batch(0.5, 2000, 34, fixed_theta(1.0), n=400)
        # horizon T = 20 needs its own grid
        t, _, z = draw_observation_batch(p, fixed_theta(1.0), 400, 20.0, path_seeds(34, 2000))
        a, b, _, _ = posterior_batch(t, whiten_batch(t, z, 0.5), p)
        err = (a[:, -1] / b[-1] - 1.0) ** 2
        assert within(err, 1.0 / b[-1])
