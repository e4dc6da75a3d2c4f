import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from choquard.bubbles import hls_constant
from choquard.grid import RadialGrid, TensorGrid, integrate, sphere_area
from choquard.riesz import (RadialRiesz, RieszOperator, angular_weight, angular_weight_quadrature,
                            ball_cell_average, cached_generator, cube_pair_average, double_integral_D,
                            hls_ratio, nl_norm)

from conftest import smooth_random


def gaussian_pair(N, mu, a):
    """int int e^{-a|x|^2} e^{-a|y|^2} |x-y|^{-mu} dx dy in closed form."""
    return (np.pi / a) ** N * a ** (mu / 2) * 2 ** (-mu / 2) * gamma((N - mu) / 2) / gamma(N / 2)


def direct_sum(f, grid, op):
    """O(n^{2N}) reference convolution with the operator's own origin value."""
    pts = np.stack([c.ravel() for c in np.meshgrid(*([grid.axis] * grid.N), indexing="ij")], 1)
    fv = f.ravel()
    out = np.empty(len(pts))
    for i in range(0, len(pts), 256):
        d = np.sqrt(((pts[i:i + 256, None, :] - pts[None, :, :]) ** 2).sum(-1))
        with np.errstate(divide="ignore"):
            K = np.where(d > 0, d ** (-op.mu), op.cell_value)
        out[i:i + 256] = K @ fv
    return out.reshape(grid.shape) * grid.dv


@pytest.mark.parametrize("N,n,mu", [(2, 16, 1.0), (3, 16, 1.5)])
def test_convolve_matches_direct_sum(N, n, mu, rng):
    g = TensorGrid(N, n, 1.0)
    op = RieszOperator(g, mu)
    f = rng.standard_normal(g.shape)
    ref = direct_sum(f, g, op)
    assert np.max(np.abs(op.convolve(f) - ref)) < 1e-10 * np.max(np.abs(ref))


def test_zero_maps_to_zero(op3, grid3):
    assert np.all(op3.convolve(np.zeros(grid3.shape)) == 0)
    assert double_integral_D(np.zeros(grid3.shape), op3) == 0
    assert nl_norm(np.zeros(grid3.shape), op3) == 0


def test_spike_reproduces_kernel(op3, grid3):
    f = np.zeros(grid3.shape)
    f[grid3.origin_index] = 1 / grid3.dv
    out = op3.convolve(f)
    r = np.sqrt(grid3.r2())
    far = r > 4 * grid3.h
    rel = np.abs(out[far] * r[far] ** op3.mu - 1)
    assert rel.max() < 1e-2


def test_translation_equivariance(op3, grid3):
    f = np.exp(-30 * grid3.r2())
    s = (2, -3, 1)
    a = op3.convolve(np.roll(f, s, axis=(0, 1, 2)))
    b = np.roll(op3.convolve(f), s, axis=(0, 1, 2))
    # compare away from the wrapped slabs
    core = tuple(slice(4, -4) for _ in range(3))
    assert np.max(np.abs(a[core] - b[core])) < 1e-12 * np.max(np.abs(b))


def test_positivity_and_symmetric_kernel(op3, grid3, rng):
    f = np.abs(rng.standard_normal(grid3.shape))
    assert np.all(op3.convolve(f) > 0)
    a, b = rng.standard_normal((2,) + grid3.shape)
    assert integrate(a * op3.convolve(b), grid3) == pytest.approx(integrate(b * op3.convolve(a), grid3), rel=1e-11)


@pytest.mark.parametrize("N,mu", [(3, 1.0), (4, 2.0), (5, 1.0)])
def test_self_terms(N, mu):
    # the pair average over one cell exceeds 1 (points are at distance < diameter)
    # and is finite; ball average of |x|^{-mu} over an equal-volume ball in closed form
    gal = cube_pair_average(N, mu)
    assert np.isfinite(gal) and gal > 1
    assert cube_pair_average(N, mu, npts=32) == pytest.approx(gal, rel=1e-8)
    rho = (gamma(N / 2 + 1) / np.pi ** (N / 2)) ** (1 / N)
    assert ball_cell_average(N, mu) == pytest.approx(sphere_area(N) * rho ** (N - mu) / (N - mu))


def test_pair_average_monte_carlo():
    rng = np.random.default_rng(5)
    X, Y = rng.random((2, 400000, 3))
    mc = np.mean(np.linalg.norm(X - Y, axis=1) ** -1.0)
    assert cube_pair_average(3, 1.0) == pytest.approx(mc, rel=5e-3)


def test_tensor_gaussian_D():
    g = TensorGrid(3, 32, 2.5)
    op = RieszOperator(g, 1.0)
    f = np.exp(-2 * g.r2())
    got = integrate(f * op.convolve(f), g)
    assert got == pytest.approx(gaussian_pair(3, 1.0, 2.0), rel=5e-3)


@pytest.mark.parametrize("N,mu", [(3, 1.0), (4, 2.0), (5, 3.0)])
def test_radial_gaussian_D(N, mu):
    exact = gaussian_pair(N, mu, 1.0)
    errs = []
    for m in (6000, 12000):
        g = RadialGrid(N, 1e-6, 30.0, m)
        errs.append(abs(RadialRiesz(g, mu).pair_integral(np.exp(-g.r**2)) / exact - 1))
    assert errs[0] < 5e-6
    # second order in the log-spacing
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_backend_agreement():
    # radial Gaussian with width comparable to a solver bubble, default-like tensor grid
    gt = TensorGrid(4, 32, 2.0)
    ut = np.exp(-gt.r2() / (2 * 0.5**2))
    Dt = double_integral_D(ut, RieszOperator(gt, 2.0))
    gr = RadialGrid(4, 1e-6, 30.0, 6000)
    Dr = double_integral_D(np.exp(-gr.r**2 / (2 * 0.5**2)), RadialRiesz(gr, 2.0))
    assert abs(Dt / Dr - 1) < 0.02


def test_angular_weight_closed_form_vs_quadrature():
    for N, mu in [(3, 1.0), (4, 2.0), (5, 3.0), (4, 1.0)]:
        for r, s in [(1.0, 0.3), (0.7, 2.0), (1.0, 0.999), (5.0, 0.01)]:
            assert angular_weight(r, s, N, mu) == pytest.approx(angular_weight_quadrature(r, s, N, mu), rel=1e-9)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.sampled_from([(3, 1.0), (4, 2.0), (5, 3.0), (4, 0.5)]))
def test_angular_weight_symmetric_and_bounded(r, s, Nmu):
    N, mu = Nmu
    if abs(r - s) < 1e-6:
        return
    w = angular_weight(r, s, N, mu)
    assert w == pytest.approx(angular_weight(s, r, N, mu), rel=1e-14)
    assert 0 < w <= sphere_area(N) * abs(r - s) ** (-mu) * (1 + 1e-12)


def test_generator_cache(tmp_path):
    a = cached_generator(4, 2.0, 500, 0.01, cache_dir=tmp_path)
    b = cached_generator(4, 2.0, 500, 0.01, cache_dir=tmp_path)
    assert a.tobytes() == b.tobytes()
    assert len(list(tmp_path.glob("*.json"))) == 1


def test_D_homogeneity(op3, grid3, rng):
    u = smooth_random(grid3, rng)
    q = 5.0
    assert double_integral_D(2 * u, op3) == pytest.approx(2 ** (2 * q) * double_integral_D(u, op3), rel=1e-10)
    assert nl_norm(2 * u, op3) == pytest.approx(2 * nl_norm(u, op3), rel=1e-10)


def test_D_translation_invariance(op3, grid3):
    u = np.exp(-6 * grid3.r2())
    w = np.roll(u, (3, 2, -1), axis=(0, 1, 2))
    assert double_integral_D(w, op3) == pytest.approx(double_integral_D(u, op3), rel=1e-10)


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1))
def test_nl_norm_triangle(seed):
    g = TensorGrid(3, 16, 2.0)
    op = _op16()
    rng = np.random.default_rng(seed)
    u, v = smooth_random(g, rng), smooth_random(g, rng)
    assert nl_norm(u + v, op) <= nl_norm(u, op) + nl_norm(v, op) + 1e-12


_cache = {}


def _op16():
    if "op" not in _cache:
        _cache["op"] = RieszOperator(TensorGrid(3, 16, 2.0), 1.0)
    return _cache["op"]


_rad = {}


def _radial(N, mu):
    if (N, mu) not in _rad:
        _rad[N, mu] = RadialRiesz(RadialGrid(N, 1e-6, 1e6, 4000), mu)
    return _rad[N, mu]


@given(st.lists(st.tuples(st.floats(0.1, 3), st.floats(0.2, 4)), min_size=1, max_size=4),
       st.sampled_from([(4, 2.0), (5, 1.0), (3, 1.0)]))
def test_hls_inequality(terms, Nmu):
    N, mu = Nmu
    op = _radial(N, mu)
    r = op.grid.r
    f = sum(c * np.exp(-(r / w) ** 2) for c, w in terms)
    assert hls_ratio(f, op) <= hls_constant(N, mu) * (1 + 1e-6)


@pytest.mark.parametrize("N,mu", [(4, 2.0), (5, 1.0)])
def test_hls_equality_case(N, mu):
    g = RadialGrid(N, 1e-7, 1e7, 20000)
    op = RadialRiesz(g, mu)
    h = (1 + g.r**2) ** (-(2 * N - mu) / 2)
    assert hls_ratio(h, op) == pytest.approx(hls_constant(N, mu), rel=1e-3)


def test_mu_out_of_range(grid3):
    with pytest.raises(ValueError):
        RieszOperator(grid3, 3.0)
