import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lprobe.errors import DegenerateProjection, NumericalError
from lprobe.landscape import (
    ProbeConfig,
    eig_index,
    eig_index_curve,
    extremum_count,
    filter_normalize,
    index_from_tvs,
    normalized_tv,
    probe_grid,
    quadratic_loss,
    roughness_index,
    sample_directions,
    slice_2d,
    trajectory_roughness,
)
from lprobe.network import NetworkSpec, filter_layout, init_xavier

profiles = arrays(np.float64, st.integers(3, 60), elements=st.floats(-1e3, 1e3, allow_nan=False))


def _spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + 0.1 * np.eye(n)


class TestProbeConfig:
    @pytest.mark.parametrize("kw", [dict(M=1), dict(m=1), dict(l=0.0), dict(l=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ProbeConfig(**kw)


class TestNormalizedTV:
    def test_monotone_profile(self):
        s = probe_grid(0.5, 40)
        assert normalized_tv(np.exp(s), 0.5) == pytest.approx(1.0)

    def test_centered_parabola(self):
        s = probe_grid(0.01, 100)
        assert normalized_tv(3 * s**2, 0.01) == pytest.approx(1 / 0.01)

    @given(profiles, st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
    def test_affine_invariance(self, f, a, c):
        if np.ptp(f) < 1e-6 * max(1.0, np.abs(f).max()):
            return
        base = normalized_tv(f, 0.3)
        assert normalized_tv(a * f + c, 0.3) == pytest.approx(base, rel=1e-9)
        assert normalized_tv(-f, 0.3) == pytest.approx(base, rel=1e-12)

    @given(profiles)
    def test_lower_bound(self, f):
        if np.ptp(f) == 0:
            return
        l = 0.25
        assert normalized_tv(f, l) * 2 * l >= 1 - 1e-12

    def test_flat_profile(self):
        with pytest.raises(DegenerateProjection):
            normalized_tv(np.ones(5), 1.0)


class TestFilterNormalize:
    def test_block_norms(self, rng):
        spec = NetworkSpec("resnet", 2, 4, 2)
        layout = filter_layout(spec)
        theta = init_xavier(spec, 0) + 0.1 * rng.standard_normal(layout.size)
        d = filter_normalize(rng.standard_normal(layout.size), theta, layout)
        for f in layout.filters:
            blk = slice(f.start, f.stop)
            assert np.linalg.norm(d[blk]) == pytest.approx(np.linalg.norm(theta[blk]))

    def test_zero_filter_stays_zero(self):
        spec = NetworkSpec("resnet", 1, 2, 1)
        layout = filter_layout(spec)
        theta = np.ones(layout.size)
        theta[layout.filters[0].start : layout.filters[0].stop] = 0.0
        d = filter_normalize(np.ones(layout.size), theta, layout)
        assert not np.any(d[layout.filters[0].start : layout.filters[0].stop])

    def test_direction_sign_preserved(self, rng):
        spec = NetworkSpec("fcnet", 1, 3, 1)
        layout = filter_layout(spec)
        raw = rng.standard_normal(layout.size)
        out = filter_normalize(raw, init_xavier(spec, 3) + 0.5, layout)
        assert np.all(np.sign(out) == np.sign(raw))

    def test_length_mismatch(self):
        layout = filter_layout(NetworkSpec("resnet"))
        with pytest.raises(ValueError):
            filter_normalize(np.ones(3), np.ones(3), layout)


class TestRoughnessIndex:
    @pytest.mark.parametrize("l, m", [(0.1, 10), (1.0, 100), (10.0, 10)])
    def test_quadratic_null(self, rng, l, m):
        H = _spd(rng, 6)
        c = rng.standard_normal(6)
        rep = roughness_index(quadratic_loss(H, c), c, None, ProbeConfig(30, l, m, 1))
        assert rep.index == pytest.approx(0.0, abs=1e-12)
        assert rep.mu == pytest.approx(1.0 / l, rel=1e-10)

    def test_quadratic_null_with_filter_normalization(self, rng):
        spec = NetworkSpec("resnet", 1, 3, 1)
        layout = filter_layout(spec)
        c = init_xavier(spec, 0)
        H = _spd(rng, layout.size)
        rep = roughness_index(quadratic_loss(H, c), c, layout, ProbeConfig(20, 0.05, 20, 0))
        assert rep.index < 1e-12

    def test_wrinkled_landscape_is_rough(self):
        fn = lambda b: np.sum(np.atleast_2d(b) ** 2, axis=1) + 0.05 * np.sin(40 * np.atleast_2d(b)[:, 0])
        rep = roughness_index(fn, np.zeros(2), None, ProbeConfig(50, 1.0, 200, 0))
        assert rep.index > 0.05

    def test_matches_manual_route(self, rng):
        H = _spd(rng, 4)
        fn = lambda b: quadratic_loss(H)(b) + np.sin(3 * np.atleast_2d(b)).sum(axis=1)
        theta = rng.standard_normal(4)
        cfg = ProbeConfig(8, 0.3, 12, 5)
        rep = roughness_index(fn, theta, None, cfg)
        Ts = []
        for d in np.random.default_rng(5).standard_normal((8, 4)):
            vals = [fn(theta + s * d)[0] for s in np.linspace(-0.3, 0.3, 13)]
            Ts.append(np.abs(np.diff(vals)).sum() / (0.6 * (max(vals) - min(vals))))
        np.testing.assert_allclose(rep.Ts, Ts, rtol=1e-12)
        assert rep.index == pytest.approx(np.std(Ts) / np.mean(Ts), rel=1e-12)

    def test_flat_directions_excluded(self):
        fn = lambda b: np.atleast_2d(b)[:, 0] ** 2
        dirs = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]])
        rep = roughness_index(fn, np.zeros(2), None, ProbeConfig(3, 1.0, 10, 0), directions=dirs)
        assert rep.excluded == [1]
        assert rep.Ts.size == 2 and rep.summary()["excluded"] == 1

    def test_all_flat(self):
        with pytest.raises(DegenerateProjection):
            roughness_index(lambda b: np.zeros(len(b)), np.zeros(2), None, ProbeConfig(3, 1.0, 5, 0))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss(self):
        fn = lambda b: np.where(np.atleast_2d(b)[:, 0] > 0.5, np.nan, 1.0)
        with pytest.raises(NumericalError):
            roughness_index(fn, np.zeros(1), None, ProbeConfig(2, 100.0, 10, 0))

    def test_threads_preserve_order(self, rng, monkeypatch):
        fn = lambda b: np.cos(3 * np.atleast_2d(b)).sum(axis=1)
        theta = rng.standard_normal(5)
        cfg = ProbeConfig(16, 0.5, 20, 2)
        serial = roughness_index(fn, theta, None, cfg)
        monkeypatch.setenv("LPROBE_THREADS", "4")
        threaded = roughness_index(fn, theta, None, cfg)
        np.testing.assert_array_equal(serial.Ts, threaded.Ts)

    def test_population_std(self):
        mu, sigma, idx = index_from_tvs([1.0, 3.0])
        assert (mu, sigma, idx) == (2.0, 1.0, 0.5)

    def test_directions_seeded(self):
        np.testing.assert_array_equal(sample_directions(4, 3, 9), sample_directions(4, 3, 9))


class TestEigIndex:
    def test_toy_values(self):
        assert eig_index([12.0, 4.0], 2)[0] == pytest.approx(math.log10(48))
        lam = np.linalg.eigvalsh([[1 / 3, 1 / 6], [1 / 6, 2 / 15]])
        assert eig_index(lam, 2)[0] == pytest.approx(-1.778, abs=1e-3)

    def test_truncation(self):
        value, used = eig_index([10.0, 1.0, -1e-9, 0.0], 4)
        assert used == 2 and value == pytest.approx(1.0)

    def test_curve(self):
        assert eig_index_curve([100.0, 10.0, 0.0]) == [(1, 2.0), (2, 3.0)]


class TestSlices:
    def test_quadratic_bowl_symmetric(self):
        fn = quadratic_loss(np.diag([1.0, 2.0, 3.0]))
        sl = slice_2d(fn, np.zeros(3), None, 0, 1.0, 20)
        np.testing.assert_allclose(sl.values, sl.values[::-1, ::-1], rtol=1e-12, atol=1e-15)
        i, j = np.unravel_index(np.argmin(sl.values), sl.values.shape)
        assert (i, j) == (10, 10)

    def test_extremum_count(self):
        s = np.linspace(-1, 1, 21)
        bowl = s[:, None] ** 2 + s[None, :] ** 2
        egg = bowl + 0.3 * np.sin(20 * s)[:, None] * np.sin(20 * s)[None, :]
        assert extremum_count(bowl) == 42
        assert extremum_count(egg) > extremum_count(bowl)

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            slice_2d(quadratic_loss(np.eye(2)), np.zeros(2), None, 0, 1.0, 1)


class TestTrajectory:
    def test_quadratic_minimizer_series_is_zero(self, rng):
        H = _spd(rng, 3)
        c = rng.standard_normal(3)
        series = trajectory_roughness(quadratic_loss(H, c), [(0, c), (10, c)], None, ProbeConfig(10, 0.1, 10, 0))
        assert [e for e, _ in series] == [0, 10]
        assert all(abs(v) < 1e-12 for _, v in series)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_failure_becomes_nan(self):
        fn = lambda b: np.atleast_2d(b)[:, 0] ** 2
        series = trajectory_roughness(fn, [(0, np.ones(2)), (1, np.full(2, np.inf))], None, ProbeConfig(4, 0.1, 10, 0))
        assert np.isfinite(series[0][1]) and np.isnan(series[1][1])
