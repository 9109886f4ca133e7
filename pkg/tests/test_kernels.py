"""The numba kernels and their numpy fallbacks must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import iid_instance
from irsbeam import _accel, kernels, su_phase as su
from irsbeam.channel import cn, phasor_table

needs_numba = pytest.mark.skipif(not _accel.NUMBA_AVAILABLE, reason="numba not installed")


def _args(seed, n, bits):
    g, h_r, h_d = iid_instance(seed, n)
    q = su.build_quadratic(g, h_r, h_d)
    return q, np.zeros(n, dtype=np.int64), phasor_table(bits)


@needs_numba
@pytest.mark.parametrize("seed", range(6))
def test_su_sweeps_agree(seed):
    n, bits = 5 + seed, 1 + seed % 3
    q, lv, tab = _args(seed, n, bits)
    out = []
    for fn in (kernels.su_sweeps_py, kernels.su_sweeps_jit):
        trace = np.empty(1 + 100 * n)
        res = fn(q.a, q.h_hat, q.constant, lv.copy(), tab, 1e-4, 100, trace)
        out.append((res, trace[:res[4]]))
    (a, ta), (b, tb) = out
    assert np.array_equal(a[0], b[0]) and a[2] == b[2] and a[3] == b[3]
    assert np.allclose(ta, tb, rtol=1e-12)


@needs_numba
def test_cont_sweeps_agree():
    q, _, _ = _args(1, 9, 1)
    u0 = np.ones(9, dtype=complex)
    res = [fn(q.a, q.h_hat, q.constant, u0.copy(), 1e-6, 100, np.empty(901))
           for fn in (kernels.cont_sweeps_py, kernels.cont_sweeps_jit)]
    assert np.allclose(res[0][0], res[1][0], atol=1e-12) and res[0][2] == res[1][2]


@needs_numba
@pytest.mark.parametrize("seed", range(4))
def test_bnb_agree(seed):
    n, bits = 6, 1 + seed % 2
    q, lv, tab = _args(seed, n, bits)
    base = float(np.real(np.trace(q.a))) + q.constant
    inc = su.objective(q, su.PhaseVector(bits, lv))
    a = kernels.bnb_search_py(q.a, q.h_hat, tab, lv.copy(), inc, base, 10**6)
    b = kernels.bnb_search_jit(q.a, q.h_hat, tab, lv.copy(), inc, base, 10**6)
    assert np.array_equal(a[0], b[0]) and a[2] == b[2] and a[3] == b[3]
    assert a[1] == pytest.approx(b[1], rel=1e-12)


@needs_numba
def test_cascade_power_agree():
    rng = np.random.default_rng(0)
    amp = np.abs(cn(rng, (50, 30)))
    err = rng.uniform(-np.pi, np.pi, (50, 30))
    assert np.allclose(kernels.cascade_power_py(amp, err), kernels.cascade_power_jit(amp, err),
                       rtol=1e-12)


@needs_numba
@pytest.mark.parametrize("k, m", [(1, 3), (3, 4), (4, 6)])
def test_mmse_fixed_point_agree(k, m):
    rng = np.random.default_rng(k * m)
    hc = cn(rng, (k, m))
    sigma2, gamma = np.full(k, 0.1), np.full(k, 5.0)
    lam0 = gamma * sigma2 / np.sum(np.abs(hc) ** 2, axis=1)
    a = kernels.mmse_fixed_point_py(hc, sigma2, gamma, lam0.copy(), 1e-12, 500)
    b = kernels.mmse_fixed_point_jit(hc, sigma2, gamma, lam0.copy(), 1e-12, 500)
    assert np.allclose(a[0], b[0], rtol=1e-10) and a[1] == b[1] and a[3] and b[3]


def test_env_flag_selects_fallback():
    code = "from irsbeam import _accel, kernels; print(_accel.USE_NUMBA, " \
           "kernels.su_sweeps is kernels.su_sweeps_py)"
    env = dict(os.environ, IRSBEAM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.split() == ["False", "True"]
