import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erfc, gammaincc

from crmsbm.ggp import (
    GgpParams,
    expected_atom_count,
    gamma_norm_log,
    laplace_exponent,
    levy_density,
    levy_log_density,
    neglected_tail_mass,
    pochhammer_log,
    sample_total_mass,
    stable_density,
    total_mass_cdf,
    total_mass_log_density,
    total_mass_log_density_at,
    zolotarev_a,
)


def test_params_validation():
    GgpParams(1.0, 0.5, 0.0)  # tau = 0 allowed
    with pytest.raises(ValueError):
        GgpParams(0.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        GgpParams(-1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        GgpParams(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        GgpParams(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GgpParams(1.0, 0.5, -0.1)
    with pytest.raises(ValueError):
        GgpParams(math.inf, 0.5, 1.0)


def test_levy_density_values():
    p = GgpParams(2.0, 0.5, 1.5)
    w = 0.7
    expect = w ** -1.5 * math.exp(-1.5 * w) / math.gamma(0.5)
    assert levy_density(p, w) == pytest.approx(expect, rel=1e-12)
    assert levy_log_density(p, w) == pytest.approx(math.log(expect), rel=1e-12)
    arr = levy_density(p, np.array([0.5, 1.0, 2.0]))
    assert arr.shape == (3,)
    with pytest.raises(ValueError):
        levy_log_density(p, 0.0)


def test_laplace_exponent_values():
    p = GgpParams(2.0, 0.5, 1.0)
    assert laplace_exponent(p, 0.0) == pytest.approx(0.0, abs=1e-14)
    # (2 / 0.5) * ((3 + 1)^0.5 - 1) = 4
    assert laplace_exponent(p, 3.0) == pytest.approx(4.0, rel=1e-14)
    u = np.array([0.1, 1.0, 10.0])
    vals = laplace_exponent(p, u)
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        laplace_exponent(p, -1.0)


def test_zolotarev_a_closed_form_half():
    # sigma = 1/2: A(u) = 1 / (4 cos^2(u/2))
    u = np.linspace(0.05, math.pi - 0.05, 40)
    expect = 1.0 / (4.0 * np.cos(u / 2.0) ** 2)
    got = zolotarev_a(0.5, u)
    np.testing.assert_allclose(got, expect, rtol=1e-12)


def test_zolotarev_a_limit_and_monotone():
    for sigma in (0.3, 0.5, 0.7):
        lim = (1.0 - sigma) * sigma ** (sigma / (1.0 - sigma))
        assert zolotarev_a(sigma, 1e-9) == pytest.approx(lim, rel=1e-6)
        u = np.linspace(1e-4, math.pi - 1e-4, 200)
        assert np.all(np.diff(zolotarev_a(sigma, u)) > 0)


def test_zolotarev_a_domain():
    with pytest.raises(ValueError):
        zolotarev_a(0.5, 0.0)
    with pytest.raises(ValueError):
        zolotarev_a(0.5, math.pi)
    with pytest.raises(ValueError):
        zolotarev_a(1.2, 1.0)


def test_stable_density_closed_form_half():
    x = np.geomspace(0.05, 20.0, 40)
    expect = x ** -1.5 * np.exp(-1.0 / (4.0 * x)) / (2.0 * math.sqrt(math.pi))
    np.testing.assert_allclose(stable_density(0.5, x), expect, rtol=1e-12)
    # the far tail switches to the asymptotic power law
    x_far = np.geomspace(30.0, 1e14, 20)
    expect_far = x_far ** -1.5 * np.exp(-1.0 / (4.0 * x_far)) / (2.0 * math.sqrt(math.pi))
    np.testing.assert_allclose(stable_density(0.5, x_far), expect_far, rtol=1e-8)


def test_stable_density_laplace_transform():
    for sigma in (0.3, 0.7):
        for u in (0.3, 3.0):
            val, _ = integrate.quad(
                lambda x: stable_density(sigma, x) * math.exp(-u * x),
                0, np.inf, limit=400)
            assert val == pytest.approx(math.exp(-u ** sigma), abs=1e-8)


def test_stable_density_edges():
    assert stable_density(0.5, 0.0) == 0.0
    with pytest.raises(ValueError):
        stable_density(0.5, -1.0)
    with pytest.raises(ValueError):
        stable_density(1.5, 1.0)


def test_total_mass_matches_scaled_stable_at_tau_zero():
    # tau = 0: T is the stable law scaled by theta^(1/sigma)
    p = GgpParams(1.0, 0.5, 0.0)
    c = p.theta ** (-1.0 / p.sigma)  # = 1/4
    t = np.geomspace(0.5, 50.0, 15)
    expect = c * (t * c) ** -1.5 * np.exp(-1.0 / (4.0 * t * c)) / (2.0 * math.sqrt(math.pi))
    got = np.exp(total_mass_log_density(p, t))
    np.testing.assert_allclose(got, expect, rtol=1e-10)


@pytest.mark.parametrize("alpha,sigma,tau", [
    (2.0, 0.5, 1.0),
    (5.0, 0.3, 2.0),
    (0.5, 0.7, 0.5),
])
def test_total_mass_laplace_identity(alpha, sigma, tau):
    # int g(t) exp(-u t) dt = exp(-psi(u))
    p = GgpParams(alpha, sigma, tau)
    for u in (0.5, 2.0):
        val, _ = integrate.quad(
            lambda t: math.exp(total_mass_log_density(p, t) - u * t),
            0, np.inf, limit=400)
        assert val == pytest.approx(math.exp(-laplace_exponent(p, u)), abs=1e-6)


def test_total_mass_mean():
    p = GgpParams(2.0, 0.5, 1.0)
    val, _ = integrate.quad(
        lambda t: t * math.exp(total_mass_log_density(p, t)), 0, np.inf, limit=400)
    assert val == pytest.approx(p.mean_total_mass(), rel=1e-6)
    assert GgpParams(1.0, 0.5, 0.0).mean_total_mass() == math.inf


def test_total_mass_ext_integrates_to_marginal():
    p = GgpParams(2.0, 0.5, 1.0)
    for t in (0.4, 1.7, 6.0):
        val, _ = integrate.quad(
            lambda u: math.exp(total_mass_log_density_at(p, t, u)),
            0, math.pi, limit=200)
        assert math.log(val) == pytest.approx(
            total_mass_log_density(p, t), abs=1e-8)


def test_sample_total_mass_deterministic():
    p = GgpParams(2.0, 0.5, 1.0)
    a = sample_total_mass(p, 100, np.random.default_rng(7))
    b = sample_total_mass(p, 100, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_sample_total_mass_moments_and_laplace():
    p = GgpParams(2.0, 0.5, 1.0)
    s = sample_total_mass(p, 100_000, np.random.default_rng(0))
    assert abs(s.mean() - p.mean_total_mass()) < 0.02
    for u in (0.5, 2.0):
        assert abs(np.mean(np.exp(-u * s))
                   - math.exp(-laplace_exponent(p, u))) < 5e-3


def test_sample_total_mass_tau_zero_median():
    # tau = 0, sigma = 1/2: P(T/theta^2 <= m) = erfc(1 / (2 sqrt(m)))
    p = GgpParams(1.0, 0.5, 0.0)
    s = sample_total_mass(p, 100_000, np.random.default_rng(1))
    m = np.median(s) / p.theta ** 2
    assert erfc(1.0 / (2.0 * math.sqrt(m))) == pytest.approx(0.5, abs=0.01)


def test_total_mass_cdf_monotone():
    p = GgpParams(2.0, 0.5, 1.0)
    t = np.geomspace(1e-3, 1e3, 50)
    c = total_mass_cdf(p, t)
    assert np.all(np.diff(c) >= 0)
    assert c[0] < 1e-4 and c[-1] > 1.0 - 1e-4


def test_expected_atom_count():
    # integration by parts: int_eps^inf w^(-1-s) e^(-w) dw
    #   = eps^(-s) e^(-eps) / s - Gamma(1-s) Q(1-s, eps) / s
    p = GgpParams(2.0, 0.5, 1.0)
    eps = 1e-4
    s = p.sigma
    exact = (eps ** -s * math.exp(-eps) / s
             - math.gamma(1.0 - s) * gammaincc(1.0 - s, eps) / s)
    exact *= p.alpha / math.gamma(1.0 - s)
    assert expected_atom_count(p, eps) == pytest.approx(exact, rel=1e-8)
    # tau = 0: alpha eps^(-sigma) / (sigma Gamma(1-sigma))
    p0 = GgpParams(1.5, 0.4, 0.0)
    exact0 = p0.alpha * eps ** -p0.sigma / (p0.sigma * math.gamma(1.0 - p0.sigma))
    assert expected_atom_count(p0, eps) == pytest.approx(exact0, rel=1e-8)
    with pytest.raises(ValueError):
        expected_atom_count(p, 0.0)


def test_neglected_tail_mass_small_eps():
    # leading order alpha eps^(1-sigma) / ((1-sigma) Gamma(1-sigma))
    p = GgpParams(2.0, 0.5, 1.0)
    eps = 1e-8
    lead = p.alpha * eps ** (1.0 - p.sigma) / ((1.0 - p.sigma) * math.gamma(1.0 - p.sigma))
    assert neglected_tail_mass(p, eps) == pytest.approx(lead, rel=1e-4)
    assert neglected_tail_mass(p, 1e-4) < expected_atom_count(p, 1e-4)


def test_pochhammer_log():
    # (0.5)_3 = 0.5 * 1.5 * 2.5 = 1.875
    assert pochhammer_log(0.5, 3) == pytest.approx(math.log(1.875), rel=1e-12)
    assert pochhammer_log(2.0, 0) == 0.0
    with pytest.raises(ValueError):
        pochhammer_log(-1.0, 2)
    with pytest.raises(ValueError):
        pochhammer_log(1.0, -1)


def test_gamma_norm_log():
    assert gamma_norm_log(2.0, 3.0) == pytest.approx(
        math.lgamma(2.0) - 2.0 * math.log(3.0), rel=1e-12)
    with pytest.raises(ValueError):
        gamma_norm_log(0.0, 1.0)
    with pytest.raises(ValueError):
        gamma_norm_log(1.0, 0.0)
