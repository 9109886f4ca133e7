"""Multiuser joint precoding / discrete phase-shift optimisation."""
import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import ChannelRealization, PhaseVector, combined_channels
from .errors import (AllInfeasible, BudgetExceeded, Infeasible, NotConverged, RankDeficient,
                     UnsupportedOrder)
from .outcome import SolveOutcome
from .precoding import SinrSpec, mmse, zf, zf_power_from_channels

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-4
MAX_SWEEPS = 100
EXHAUSTIVE_GUARD = 1 << 20


@dataclass
class MultiuserInstance:
    channels: ChannelRealization
    spec: SinrSpec
    bits: int = 1

    @property
    def m(self):
        return self.channels.g.shape[1]

    @property
    def n(self):
        return self.channels.g.shape[0]

    @property
    def k(self):
        return self.channels.h_d.shape[0]

    def combined(self, theta):
        return combined_channels(self.channels, theta)


# ---------------------------------------------------------------------------
# inner precoding problem
# ---------------------------------------------------------------------------
def zf_power(instance, theta):
    """``tr(P (H^H H)^{-1})`` at ``theta``; ``inf`` when rank(H) < K."""
    if instance.m < instance.k:
        raise ValueError("ZF requires M >= K")
    try:
        return zf_power_from_channels(instance.combined(theta), instance.spec)
    except RankDeficient:
        return np.inf


def mmse_power(instance, theta, lam0=None, tol=1e-10, max_iter=500):
    """Optimal (MMSE) AP power at ``theta`` and its precoder.

    Returns ``(inf, None)`` when the SINR targets cannot be met.
    """
    try:
        pre = mmse(instance.combined(theta), instance.spec, tol=tol, max_iter=max_iter, lam0=lam0)
    except (Infeasible, NotConverged):
        return np.inf, None
    return pre.total_power, pre


def precoder_at(instance, theta, kind):
    h = instance.combined(theta)
    if kind == "zf":
        return zf(h, instance.spec)
    if kind == "mmse":
        return mmse(h, instance.spec)
    raise ValueError(f"unknown precoder kind {kind!r}")


def _finish(instance, out, kind):
    if np.isfinite(out.objective):
        try:
            out.precoder = precoder_at(instance, out.theta, kind)
            out.total_power = out.precoder.total_power
        except (RankDeficient, Infeasible, NotConverged):
            out.total_power = np.inf
    return out


class _Evaluator:
    """Power of a candidate phase vector; MMSE warm-starts from the last success."""

    def __init__(self, instance, kind):
        self.instance = instance
        self.kind = kind
        self.lam = None
        self.log = []

    def __call__(self, theta):
        if self.kind == "zf":
            p = zf_power(self.instance, theta)
        else:
            p, pre = mmse_power(self.instance, theta, lam0=self.lam)
            if pre is not None:
                self.lam = pre.lambdas
        self.log.append((tuple(int(x) for x in theta.levels), p))
        return p


def _pick(values, current, rtol=1e-12):
    # keep the current level if it is a minimiser; else lowest minimising level
    best = np.min(values)
    if not np.isfinite(best):
        return current
    tol = rtol * best
    if values[current] <= best + tol:
        return current
    return int(np.flatnonzero(values <= best + tol)[0])


def _refine(instance, theta0, threshold, max_sweeps, kind):
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    evaluate = _Evaluator(instance, kind)
    theta = PhaseVector(theta0.bits, theta0.levels.copy())
    power = evaluate(theta)
    trace = [power]
    n_levels = theta.n_levels
    sweeps = 0
    converged = False
    seen_finite = np.isfinite(power)
    for _ in range(max_sweeps):
        start = power
        sweeps += 1
        for n in range(instance.n):
            cur = int(theta.levels[n])
            values = np.empty(n_levels)
            for level in range(n_levels):
                values[level] = power if level == cur else evaluate(theta.replace(n, level))
            seen_finite = seen_finite or bool(np.isfinite(values).any())
            new = _pick(values, cur)
            if new != cur:
                theta = theta.replace(n, new)
                power = values[new]
            trace.append(power)
        if not seen_finite:
            raise AllInfeasible("every candidate in the first sweep is infeasible")
        if np.isfinite(start) and start - power <= threshold * start:
            converged = True
            break
    out = SolveOutcome(theta=theta, objective=float(power), iterations=sweeps,
                       objective_trace=trace, converged=converged, evaluations=evaluate.log)
    return _finish(instance, out, kind)


def zf_refinement(instance, theta0=None, threshold=DEFAULT_THRESHOLD, max_sweeps=MAX_SWEEPS):
    """ZF-based successive refinement: per element, the level minimising the
    ZF power with the other elements fixed; sweeps until the fractional
    power decrease over a sweep falls below ``threshold``."""
    if instance.m < instance.k:
        raise ValueError("ZF requires M >= K")
    if theta0 is None:
        theta0 = PhaseVector.zeros(instance.n, instance.bits)
    return _refine(instance, theta0, threshold, max_sweeps, "zf")


def mmse_refinement(instance, theta0=None, threshold=DEFAULT_THRESHOLD, max_sweeps=MAX_SWEEPS):
    """Same sweep as :func:`zf_refinement` with the optimal (MMSE) power."""
    if theta0 is None:
        theta0 = PhaseVector.zeros(instance.n, instance.bits)
    return _refine(instance, theta0, threshold, max_sweeps, "mmse")


def exhaustive_optimal(instance, precoder_kind="mmse", force=False):
    """Minimum AP power over all ``L**N`` phase vectors."""
    n_levels = 1 << instance.bits
    total = n_levels ** instance.n
    if total > EXHAUSTIVE_GUARD and not force:
        raise BudgetExceeded(f"L^N = {total} exceeds the exhaustive-search guard 2^20")
    evaluate = _Evaluator(instance, precoder_kind)
    best, best_levels = np.inf, None
    for levels in itertools.product(range(n_levels), repeat=instance.n):
        theta = PhaseVector(instance.bits, np.array(levels, dtype=np.int64))
        p = evaluate(theta)
        if p < best or best_levels is None:
            best, best_levels = p, theta
    out = SolveOutcome(theta=best_levels, objective=float(best), iterations=1,
                       objective_trace=[best], converged=True, nodes=total,
                       evaluations=evaluate.log)
    return _finish(instance, out, precoder_kind)


def codebook_select(instance, codebook, precoder_kind="mmse"):
    """Best codeword by AP power under the given precoder."""
    if not codebook:
        raise ValueError("empty codebook")
    evaluate = _Evaluator(instance, precoder_kind)
    powers = [evaluate(theta) for theta in codebook]
    i = int(np.argmin(powers))
    if not np.isfinite(powers[i]):
        raise AllInfeasible("every codeword is infeasible")
    out = SolveOutcome(theta=codebook[i], objective=float(powers[i]), iterations=1,
                       objective_trace=[float(powers[i])], converged=True,
                       evaluations=evaluate.log)
    return _finish(instance, out, precoder_kind)


def no_irs(instance):
    """MMSE precoding on the direct channels only (the IRS is absent)."""
    pre = mmse(instance.channels.h_d, instance.spec)
    return pre


# ---------------------------------------------------------------------------
# continuous ZF refinement (source for the quantisation baseline)
# ---------------------------------------------------------------------------
def continuous_zf_refinement(instance, theta0=None, threshold=DEFAULT_THRESHOLD,
                             max_sweeps=MAX_SWEEPS, grid=16):
    """Per-element minimisation of the ZF power over a continuous phase.

    Each element update scans ``grid`` equally spaced angles and polishes
    the best with a bounded scalar search on its neighbouring interval; the
    update is accepted only if it lowers the power. Returns angles, trace
    and convergence flag.
    """
    angles = np.zeros(instance.n) if theta0 is None else (
        theta0.angles.copy() if isinstance(theta0, PhaseVector) else np.asarray(theta0, float).copy())
    spec = instance.spec

    def power(x):
        try:
            return zf_power_from_channels(combined_channels(instance.channels, x), spec)
        except RankDeficient:
            return np.inf

    cur = power(angles)
    trace = [cur]
    step = 2.0 * np.pi / grid
    converged = False
    for _ in range(max_sweeps):
        start = cur
        for n in range(instance.n):
            def f(t, n=n):
                x = angles.copy()
                x[n] = t
                return power(x)
            cand = step * np.arange(grid)
            vals = np.array([f(t) for t in cand])
            j = int(np.argmin(vals))
            best_t, best_v = cand[j], vals[j]
            if np.isfinite(best_v):
                res = minimize_scalar(f, bounds=(best_t - step, best_t + step), method="bounded",
                                      options={"xatol": 1e-8})
                if res.fun < best_v:
                    best_t, best_v = res.x, res.fun
            if best_v < cur:
                angles[n] = np.mod(best_t, 2.0 * np.pi)
                cur = best_v
            trace.append(cur)
        if np.isfinite(start) and start - cur <= threshold * start:
            converged = True
            break
    return angles, trace, converged


# ---------------------------------------------------------------------------
# Hadamard codebook
# ---------------------------------------------------------------------------
def _is_prime(p):
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p ** 0.5) + 1))


def _paley(q):
    # Paley construction I: order q + 1 for prime q = 3 mod 4
    residues = {(x * x) % q for x in range(1, q)}
    chi = np.array([0] + [1 if x in residues else -1 for x in range(1, q)])
    jac = chi[(np.arange(q)[None, :] - np.arange(q)[:, None]) % q]
    s = np.zeros((q + 1, q + 1), dtype=int)
    s[0, 1:] = 1
    s[1:, 0] = -1
    s[1:, 1:] = jac
    return np.eye(q + 1, dtype=int) + s


def hadamard_matrix(n):
    """Hadamard matrix of order n: Sylvester doubling of 1 or of a Paley-I core.

    Raises UnsupportedOrder for orders with no implemented construction.
    """
    if n < 1:
        raise UnsupportedOrder(f"order {n}")
    twos, core = 0, n
    while True:
        base = None
        if core == 1:
            base = np.ones((1, 1), dtype=int)
        elif core % 4 == 0 and _is_prime(core - 1) and (core - 1) % 4 == 3:
            base = _paley(core - 1)
        elif core == 2:
            base = np.array([[1, 1], [1, -1]])
        if base is not None:
            h = base
            for _ in range(twos):
                h = np.block([[h, h], [h, -h]])
            return h
        if core % 2:
            raise UnsupportedOrder(f"no Hadamard construction implemented for order {n}")
        core //= 2
        twos += 1


def hadamard_codebook(n, bits=1, allow_random=False, seed=0):
    """Columns of an order-n Hadamard matrix as phase vectors (+1 -> 0, -1 -> pi).

    With ``allow_random`` an unsupported order falls back to ``n`` seeded
    random +/-1 codewords (logged).
    """
    try:
        h = hadamard_matrix(n)
    except UnsupportedOrder:
        if not allow_random:
            raise
        log.warning("no Hadamard matrix of order %d; using a seeded random +/-1 codebook", n)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
        h = rng.choice(np.array([1, -1]), size=(n, n))
    half = (1 << bits) // 2
    return [PhaseVector(bits, np.where(col > 0, 0, half)) for col in h.T]


def all_phase_vectors(n, bits):
    return [PhaseVector(bits, np.array(lv, dtype=np.int64))
            for lv in itertools.product(range(1 << bits), repeat=n)]
