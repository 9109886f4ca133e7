import numpy as np
import pytest

from irsbeam import mu_phase as mu
from irsbeam.channel import ChannelRealization, PhaseVector, cn, default_links, generate, \
    multiuser_geometry
from irsbeam.errors import AllInfeasible, BudgetExceeded, UnsupportedOrder
from irsbeam.precoding import SinrSpec, mmse, sinr, zf


def mu_links():
    return default_links(beta_ai=np.inf, beta_iu=0.0)


def instance(seed, m=4, n=4, users=(1, 2), gamma_db=15.0, bits=1):
    ch = generate(multiuser_geometry(m, n, list(users)), mu_links(), 0, seed)
    spec = SinrSpec.uniform(len(users), 10 ** (gamma_db / 10), 1e-12)
    return mu.MultiuserInstance(ch, spec, bits)


def test_instance_shapes():
    inst = instance(0, m=3, n=8, users=(1, 2))
    assert (inst.m, inst.n, inst.k) == (3, 8, 2)
    assert inst.combined(PhaseVector.zeros(8, 1)).shape == (2, 3)


def test_zf_power_matches_precoder():
    inst = instance(1)
    theta = PhaseVector(1, [0, 1, 1, 0])
    assert mu.zf_power(inst, theta) == pytest.approx(zf(inst.combined(theta), inst.spec).total_power)


def test_zf_power_rank_deficient_is_inf():
    c = cn(np.random.default_rng(0), 3)
    ch = ChannelRealization(g=np.zeros((2, 3), complex), h_d=np.stack([c, c]),
                            h_r=np.ones((2, 2), complex))
    inst = mu.MultiuserInstance(ch, SinrSpec.uniform(2, 1.0, 1.0), 1)
    assert mu.zf_power(inst, PhaseVector.zeros(2, 1)) == np.inf
    p, pre = mu.mmse_power(inst, PhaseVector.zeros(2, 1))
    assert p == np.inf and pre is None
    with pytest.raises(AllInfeasible):
        mu.zf_refinement(inst)


def _brute(inst, kind):
    vals = []
    for theta in mu.all_phase_vectors(inst.n, inst.bits):
        vals.append(mu.zf_power(inst, theta) if kind == "zf" else mu.mmse_power(inst, theta)[0])
    return min(vals)


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_matches_brute_force(seed):
    inst = instance(seed)
    out = mu.exhaustive_optimal(inst, "mmse")
    assert out.objective == pytest.approx(_brute(inst, "mmse"), rel=1e-12)
    assert out.nodes == 2 ** inst.n and len(out.evaluations) == 2 ** inst.n
    assert out.total_power == pytest.approx(out.objective, rel=1e-9)
    assert np.all(sinr(inst.combined(out.theta), out.precoder, inst.spec)
                  >= inst.spec.targets * (1 - 1e-6))
    zf_out = mu.exhaustive_optimal(inst, "zf")
    assert zf_out.objective == pytest.approx(_brute(inst, "zf"), rel=1e-12)
    assert out.objective <= zf_out.objective * (1 + 1e-9)


def test_exhaustive_guard():
    inst = instance(0, n=24)
    with pytest.raises(BudgetExceeded):
        mu.exhaustive_optimal(inst)


@pytest.mark.parametrize("kind", ["zf", "mmse"])
@pytest.mark.parametrize("seed", range(4))
def test_refinement_properties(kind, seed):
    inst = instance(seed, m=4, n=8, users=(1, 2, 3), bits=1 + seed % 2)
    run = mu.zf_refinement if kind == "zf" else mu.mmse_refinement
    out = run(inst)
    tr = np.array(out.objective_trace)
    assert np.all(np.diff(tr) <= 1e-12 * tr[0])
    assert out.converged and out.iterations <= mu.MAX_SWEEPS
    assert out.objective <= min(p for _, p in out.evaluations) * (1 + 1e-12)
    assert np.all(sinr(inst.combined(out.theta), out.precoder, inst.spec)
                  >= inst.spec.targets * (1 - 1e-6))
    if tr[-1] == tr[-1 - inst.n]:
        # coordinate-wise minimum
        for n in range(inst.n):
            for lv in range(1 << inst.bits):
                cand = out.theta.replace(n, lv)
                p = mu.zf_power(inst, cand) if kind == "zf" else mu.mmse_power(inst, cand)[0]
                assert p >= out.objective * (1 - 1e-9)


def test_refinement_fixed_point_at_optimum():
    inst = instance(3)
    best = mu.exhaustive_optimal(inst, "zf")
    out = mu.zf_refinement(inst, best.theta)
    assert out.theta == best.theta and out.iterations == 1


def test_refinement_rejects_bad_inputs():
    inst = instance(0, m=2, users=(1, 2, 3))
    with pytest.raises(ValueError):
        mu.zf_refinement(inst)
    with pytest.raises(ValueError):
        mu.mmse_refinement(instance(0), threshold=0.0)


def test_codebook_select_picks_minimum():
    inst = instance(2, n=8)
    book = mu.hadamard_codebook(8)
    out = mu.codebook_select(inst, book, "mmse")
    powers = [mu.mmse_power(inst, t)[0] for t in book]
    assert out.objective == pytest.approx(min(powers))
    assert out.theta == book[int(np.argmin(powers))]
    with pytest.raises(ValueError):
        mu.codebook_select(inst, [])


def test_no_irs_uses_direct_channels():
    inst = instance(0)
    pre = mu.no_irs(inst)
    assert pre.total_power == pytest.approx(mmse(inst.channels.h_d, inst.spec).total_power)


def test_continuous_zf_refinement_monotone_and_not_worse():
    inst = instance(4, m=4, n=8, users=(1, 2, 3))
    start = PhaseVector.zeros(8, 1)
    ang, trace, conv = mu.continuous_zf_refinement(inst, start)
    assert conv and np.all(np.diff(trace) <= 0)
    disc = mu.zf_refinement(inst, start)
    assert trace[-1] <= disc.objective * (1 + 1e-9)


@pytest.mark.parametrize("order", [1, 2, 4, 8, 12, 16, 20, 24, 32, 40, 48, 64])
def test_hadamard_orthogonal(order):
    h = mu.hadamard_matrix(order)
    assert h.shape == (order, order)
    assert set(np.unique(h)) <= {-1, 1}
    assert np.array_equal(h @ h.T, order * np.eye(order, dtype=int))


@pytest.mark.parametrize("order", [3, 6, 56])
def test_hadamard_unsupported(order):
    with pytest.raises(UnsupportedOrder):
        mu.hadamard_matrix(order)
    book = mu.hadamard_codebook(order, allow_random=True, seed=5)
    assert len(book) == order
    again = mu.hadamard_codebook(order, allow_random=True, seed=5)
    assert all(a == b for a, b in zip(book, again))


def test_hadamard_codebook_levels():
    book = mu.hadamard_codebook(4, bits=2)
    h = mu.hadamard_matrix(4)
    for col, theta in zip(h.T, book):
        assert np.allclose(theta.phasors, col)


def test_all_phase_vectors_count():
    vs = mu.all_phase_vectors(3, 2)
    assert len(vs) == 64 and len({tuple(v.levels) for v in vs}) == 64
