import numpy as np
import pytest
from scipy.optimize import minimize

from irsbeam.errors import Infeasible, RankDeficient, ZeroChannel
from irsbeam.precoding import Precoder, SinrSpec, mmse, mrt, sinr, zf, zf_power_from_channels


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_spec_validation():
    with pytest.raises(ValueError):
        SinrSpec([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        SinrSpec([0.0], [1.0])
    s = SinrSpec.uniform(3, 10.0, 1e-3)
    assert len(s) == 3 and len(s.subset([0, 2])) == 2


def test_sinr_by_hand():
    h = np.array([[1.0, 0.0], [0.0, 2.0]], dtype=complex)
    w = np.array([[1.0, 0.5], [0.0, 1.0]], dtype=complex)
    s = sinr(h, w, SinrSpec.uniform(2, 1.0, 0.5))
    # user 0: |1|^2 / (|0.5|^2 + 0.5); user 1: |2|^2 / (0 + 0.5)
    assert np.allclose(s, [1.0 / 0.75, 8.0])


def test_mrt(rng):
    h = crandn(rng, 4)
    p = mrt(h, 100.0, 1e-3)
    assert p.total_power == pytest.approx(100.0 * 1e-3 / np.linalg.norm(h) ** 2)
    assert sinr(h, p, SinrSpec.uniform(1, 100.0, 1e-3))[0] == pytest.approx(100.0)
    with pytest.raises(ZeroChannel):
        mrt(np.zeros(3), 1.0, 1.0)


def test_zf_meets_targets_without_interference(rng):
    h = crandn(rng, 3, 5)
    spec = SinrSpec([2.0, 5.0, 10.0], [1.0, 0.5, 2.0])
    pre = zf(h, spec)
    g = np.conj(h) @ pre.w
    assert np.allclose(g - np.diag(np.diag(g)), 0.0, atol=1e-12)
    assert np.allclose(sinr(h, pre, spec), spec.targets, rtol=1e-10)
    assert zf_power_from_channels(h, spec) == pytest.approx(pre.total_power, rel=1e-10)


def test_zf_orthogonal_channels():
    h = np.eye(2, 4, dtype=complex) * np.array([[2.0], [0.5]])
    spec = SinrSpec.uniform(2, 10.0, 1.0)
    assert zf_power_from_channels(h, spec) == pytest.approx(10.0 / 4 + 10.0 / 0.25)


def test_zf_rank_deficient(rng):
    c = crandn(rng, 4)
    spec = SinrSpec.uniform(2, 1.0, 1.0)
    with pytest.raises(RankDeficient):
        zf(np.stack([c, 1j * c]), spec)
    with pytest.raises(RankDeficient):
        zf_power_from_channels(np.stack([c, c]), spec)
    with pytest.raises(RankDeficient):
        zf(crandn(rng, 3, 2), SinrSpec.uniform(3, 1.0, 1.0))


def test_mmse_single_user_is_mrt(rng):
    h = crandn(rng, 1, 4)
    spec = SinrSpec.uniform(1, 20.0, 0.1)
    assert mmse(h, spec).total_power == pytest.approx(mrt(h[0], 20.0, 0.1).total_power, rel=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_mmse_targets_duality_and_zf_bound(seed):
    rng = np.random.default_rng(seed)
    k, m = 3, 4
    h = crandn(rng, k, m)
    spec = SinrSpec(rng.uniform(1.0, 10.0, k), rng.uniform(0.1, 1.0, k))
    pre = mmse(h, spec)
    assert np.allclose(sinr(h, pre, spec), spec.targets, rtol=1e-8)
    # downlink power equals the dual (uplink) power sum at the optimum
    assert pre.total_power == pytest.approx(np.sum(pre.lambdas), rel=1e-8)
    assert pre.total_power <= zf(h, spec).total_power * (1 + 1e-9)
    assert pre.residual < 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_mmse_matches_generic_optimizer(seed):
    # oracle: SLSQP on the raw QCQP, started from the ZF solution
    rng = np.random.default_rng(100 + seed)
    k, m = 2, 3
    h = crandn(rng, k, m)
    spec = SinrSpec.uniform(k, 4.0, 1.0)
    w0 = zf(h, spec).w

    def unpack(x):
        return (x[: m * k] + 1j * x[m * k:]).reshape(m, k)

    cons = [{"type": "ineq",
             "fun": lambda x, i=i: sinr(h, unpack(x), spec)[i] / spec.targets[i] - 1.0}
            for i in range(k)]
    res = minimize(lambda x: np.sum(x ** 2), np.concatenate([w0.real.ravel(), w0.imag.ravel()]),
                   constraints=cons, method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
    # SLSQP may stop on a line-search warning at this precision; judge the point itself
    assert min(c["fun"](res.x) for c in cons) > -1e-7
    assert mmse(h, spec).total_power <= res.fun * (1 + 1e-6)
    assert mmse(h, spec).total_power == pytest.approx(res.fun, rel=1e-4)


def test_mmse_infeasible_for_identical_users(rng):
    c = crandn(rng, 3)
    with pytest.raises(Infeasible):
        mmse(np.stack([c, c]), SinrSpec.uniform(2, 2.0, 1.0))
    with pytest.raises(Infeasible):
        mmse(np.zeros((1, 3)), SinrSpec.uniform(1, 2.0, 1.0))


def test_precoder_from_matrix():
    p = Precoder.from_matrix(np.array([[1.0, 1j], [0.0, 2.0]]))
    assert p.total_power == pytest.approx(6.0)
