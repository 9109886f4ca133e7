import math

import numpy as np
import pytest

from irsbeam import asymptotics as asy


def test_phase_factor_values():
    assert asy.phase_factor(1) == pytest.approx(2 / math.pi)
    assert asy.phase_factor(2) == pytest.approx(4 / math.pi * math.sin(math.pi / 4))
    assert asy.phase_factor(math.inf) == 1.0
    assert asy.eta(math.inf) == 1.0 and asy.eta_db(math.inf) == 0.0


def test_eta_monotone_to_one():
    vals = [asy.eta(b) for b in range(1, 12)]
    assert np.all(np.diff(vals) > 0) and vals[-1] < 1.0
    assert 1.0 - vals[-1] < 1e-5


@pytest.mark.parametrize("bad", [0, -1, 1.5, None])
def test_bad_bits(bad):
    with pytest.raises(ValueError):
        asy.eta(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        asy.AsymptoticConfig(10, rho_h=0.0)
    with pytest.raises(ValueError):
        asy.AsymptoticConfig(10, trials=0)
    with pytest.raises(ValueError):
        asy.AsymptoticConfig(0)


def test_closed_form_limits():
    cfg = asy.AsymptoticConfig(1, 1, rho_h=2.0, rho_g=0.5)
    assert asy.pr_closed_form(cfg) == pytest.approx(1.0)
    big = asy.AsymptoticConfig(10_000, math.inf)
    assert asy.pr_closed_form(big) / 10_000 ** 2 == pytest.approx(math.pi ** 2 / 16, rel=1e-3)


@pytest.mark.parametrize("bits", [1, 2, 3])
def test_quantization_error_uniform(bits):
    n_levels = 1 << bits
    rng = np.random.default_rng(bits)
    theta = rng.uniform(0.0, 2 * np.pi, 200_000) - 4 * np.pi
    err = asy.quantization_error(theta, bits)
    assert np.all(err >= -np.pi / n_levels - 1e-12) and np.all(err < np.pi / n_levels + 1e-12)
    # mean of exp(j err) of a uniform error is the phase factor
    assert np.mean(np.cos(err)) == pytest.approx(asy.phase_factor(bits), abs=2e-3)
    assert np.var(err) == pytest.approx((2 * np.pi / n_levels) ** 2 / 12, rel=0.02)
    assert np.all(asy.quantization_error(theta, math.inf) == 0)


def test_quantization_error_consistent_with_levels():
    from irsbeam.su_phase import quantize
    theta = np.linspace(-7, 7, 101)
    err = asy.quantization_error(theta, 2)
    assert np.allclose(np.exp(1j * (theta + err)), np.exp(1j * quantize(theta, 2).angles))


def test_monte_carlo_prefix_stability():
    # chunked substreams: a shorter run is a prefix of a longer one
    a = asy.chunk_values(asy.AsymptoticConfig(16, 1, trials=4000, seed=3), 0, asy.CHUNK)[0]
    b = asy.chunk_values(asy.AsymptoticConfig(16, 1, trials=2000, seed=3), 0, asy.CHUNK)[0]
    assert np.array_equal(a, b)
    m1 = asy.monte_carlo_pr(asy.AsymptoticConfig(16, 1, trials=2500, seed=3))
    m2 = asy.monte_carlo_pr(asy.AsymptoticConfig(16, 1, trials=2500, seed=3))
    assert m1 == m2 and m1.trials == 2500


def test_monte_carlo_small_n_exact_mean():
    # N = 1: P_r = |h|^2 |g|^2 with mean rho_h^2 rho_g^2 for any b
    est = asy.monte_carlo_pr(asy.AsymptoticConfig(1, 1, rho_h=1.5, rho_g=0.7, trials=40_000))
    assert abs(est.mean - (1.5 * 0.7) ** 2) < 4 * est.stderr


def test_monte_carlo_errors_returned():
    est, err = asy.monte_carlo_pr(asy.AsymptoticConfig(8, 2, trials=100), return_errors=True)
    assert err.shape == (800,)
    assert np.all(np.abs(err) <= np.pi / 4 + 1e-12)


def test_slope_closed_form_near_two():
    s = asy.power_gain_slope(1, [100, 200, 400, 800], method="closed_form")
    assert 1.95 < s < 2.0
    with pytest.raises(ValueError):
        asy.power_gain_slope(1, [10, 10, 20])
