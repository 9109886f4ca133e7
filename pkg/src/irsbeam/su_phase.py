"""Single-user discrete phase-shift optimisation.

With MRT at the AP the minimum power is ``gamma sigma^2 / ||h||^2``, so the
phase problem is to maximise the combined channel gain

    f(theta) = v^H A v + 2 Re{v^H h_hat} + ||h_d||^2,   v = exp(-j theta),

where ``Phi = diag(h_r^H) G``, ``A = Phi Phi^H`` and ``h_hat = Phi h_d``.
"""
import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import PhaseVector, as_phasors, combined_channel, phasor_table
from .errors import BudgetExceeded
from .linalg import max_eigenvalue_psd
from .outcome import SolveOutcome
from .precoding import mrt

DEFAULT_THRESHOLD = 1e-4
MAX_SWEEPS = 100


@dataclass
class QuadraticForm:
    a: np.ndarray        # (N, N) Hermitian PSD
    h_hat: np.ndarray    # (N,)
    constant: float      # ||h_d||^2
    phi: np.ndarray = None   # (N, M), kept only on request

    @property
    def n(self):
        return self.h_hat.size


def build_quadratic(g, h_r, h_d, keep_phi=False):
    """Quadratic form of the single-user gain for channels ``(G, h_r, h_d)``."""
    g = np.asarray(g, dtype=complex)
    h_r = np.asarray(h_r, dtype=complex).ravel()
    h_d = np.asarray(h_d, dtype=complex).ravel()
    phi = np.conj(h_r)[:, None] * g
    a = phi @ np.conj(phi).T
    a = 0.5 * (a + np.conj(a).T)
    return QuadraticForm(a=a, h_hat=phi @ h_d, constant=float(np.real(np.vdot(h_d, h_d))),
                         phi=phi if keep_phi else None)


def quadratic_for_user(ch, k=0, keep_phi=False):
    return build_quadratic(ch.g, ch.h_r[k], ch.h_d[k], keep_phi=keep_phi)


def objective(q, theta):
    """Channel power gain ``f(theta)``; ``theta`` is a PhaseVector or real angles."""
    u = as_phasors(theta)
    v = np.conj(u)
    val = np.real(np.vdot(v, q.a @ v)) + 2.0 * np.real(np.sum(u * q.h_hat)) + q.constant
    return float(max(val, 0.0))


def upper_bound(q):
    """``N lambda_max(A) + 2 sum |h_hat| + ||h_d||^2``, valid for any unit-modulus v."""
    return q.n * max_eigenvalue_psd(q.a) + 2.0 * float(np.sum(np.abs(q.h_hat))) + q.constant


def element_coefficient(q, theta, n):
    """``zeta_n``: the coefficient of ``exp(j theta_n)`` in ``f`` with the rest fixed."""
    v = np.conj(as_phasors(theta))
    return q.a[n] @ v - q.a[n, n] * v[n] + q.h_hat[n]


def refine_element(q, theta, n):
    """Set ``theta_n`` to the level maximising ``Re{exp(j theta) zeta_n}``.

    The current level is kept when it is (numerically) among the maximisers;
    otherwise the lowest maximising level wins.
    """
    zeta = element_coefficient(q, theta, n)
    scores = np.real(phasor_table(theta.bits) * zeta)
    best = scores.max()
    tol = 1e-13 * abs(zeta)
    if scores[theta.levels[n]] >= best - tol:
        return PhaseVector(theta.bits, theta.levels.copy())
    return theta.replace(n, int(np.flatnonzero(scores >= best - tol)[0]))


def successive_refinement(q, theta0, threshold=DEFAULT_THRESHOLD, max_sweeps=MAX_SWEEPS):
    """Coordinate ascent over elements 1..N, repeated until the fractional
    gain increase over one sweep drops below ``threshold``.

    ``objective_trace`` records the gain after every element update.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    trace = np.empty(1 + max_sweeps * q.n)
    levels, _, sweeps, converged, t = kernels.su_sweeps(
        q.a, q.h_hat, q.constant, theta0.levels.astype(np.int64), phasor_table(theta0.bits),
        float(threshold), int(max_sweeps), trace)
    theta = PhaseVector(theta0.bits, levels)
    return SolveOutcome(theta=theta, objective=objective(q, theta), iterations=int(sweeps),
                        objective_trace=trace[:t].tolist(), converged=bool(converged))


def continuous_refinement(q, theta0, threshold=DEFAULT_THRESHOLD, max_sweeps=MAX_SWEEPS,
                          full_output=False):
    """Coordinate ascent with the unconstrained per-element optimum
    ``theta_n = -arg(zeta_n)``. Returns angles in ``[0, 2 pi)``.

    With ``full_output`` also returns ``(trace, sweeps, converged)``.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    trace = np.empty(1 + max_sweeps * q.n)
    u, _, sweeps, converged, t = kernels.cont_sweeps(
        q.a, q.h_hat, q.constant, as_phasors(theta0).astype(complex), float(threshold),
        int(max_sweeps), trace)
    angles = np.mod(np.angle(u), 2.0 * np.pi)
    if full_output:
        return angles, trace[:t].tolist(), int(sweeps), bool(converged)
    return angles


def quantize(theta_cont, bits):
    """Nearest level in circular distance; exact midpoints round down."""
    n_levels = 1 << bits
    x = np.mod(np.asarray(theta_cont, dtype=float), 2.0 * np.pi) * n_levels / (2.0 * np.pi)
    levels = np.ceil(x - 0.5).astype(np.int64) % n_levels
    return PhaseVector(bits, levels)


def solve_optimal(q, bits, node_budget=50_000_000, force=False, theta0=None):
    """Global maximiser of the gain over all ``2**(bits N)`` phase vectors.

    Branch and bound over phase levels, warm-started from successive
    refinement. Refuses ``N * bits > 30`` unless ``force``.

    Raises
    ------
    BudgetExceeded
        Guard violated, or ``node_budget`` exhausted before optimality was
        proved (the incumbent outcome is attached to the exception).
    """
    if q.n * bits > 30 and not force:
        raise BudgetExceeded(f"N*bits = {q.n * bits} > 30; pass force=True to run anyway")
    start = PhaseVector.zeros(q.n, bits) if theta0 is None else theta0
    warm = successive_refinement(q, start)
    base = float(np.real(np.trace(q.a))) + q.constant
    levels, _, nodes, proved = kernels.bnb_search(
        q.a, q.h_hat, phasor_table(bits), warm.theta.levels.astype(np.int64),
        float(warm.objective), base, int(node_budget))
    theta = PhaseVector(bits, levels)
    out = SolveOutcome(theta=theta, objective=objective(q, theta), iterations=1,
                       objective_trace=[warm.objective, objective(q, theta)],
                       converged=bool(proved), nodes=int(nodes))
    if not proved:
        raise BudgetExceeded(f"node budget {node_budget} exhausted", incumbent=out)
    return out


def mrt_outcome(outcome, ch, gamma, sigma2, k=0):
    """Attach the MRT precoder and its AP power to a single-user outcome."""
    h = combined_channel(ch, outcome.theta, k)
    pre = mrt(h, gamma, sigma2)
    outcome.precoder = pre
    outcome.total_power = pre.total_power
    return outcome


# ---------------------------------------------------------------------------
# explicit ILP (SOS1) form of the single-user problem
# ---------------------------------------------------------------------------
@dataclass
class IlpModel:
    """Linear integer form of the gain maximisation.

    Each element has an SOS1 binary vector ``x_n`` selecting its level and
    each pair ``i < n`` an SOS1 vector ``y_in`` selecting the level of
    ``theta_i - theta_n`` modulo 2 pi, with the wrap binary ``eps_in``:

        a^T (x_i - x_n) + 2 pi eps_in = a^T y_in.

    The objective is linear in ``x`` and ``y``; adding ``offset``
    (``tr A + ||h_d||^2``) gives the gain.
    """

    bits: int
    a: np.ndarray          # level angles
    c: np.ndarray          # cos of levels
    s: np.ndarray          # sin of levels
    pairs: list            # (i, n) with i < n
    x_coef: np.ndarray     # (N, L)
    y_coef: np.ndarray     # (P, L)
    offset: float

    @property
    def n(self):
        return self.x_coef.shape[0]

    def encode(self, theta):
        """Binary assignment ``(x, y, eps)`` representing ``theta``."""
        n_levels = self.a.size
        x = np.zeros((self.n, n_levels), dtype=np.int64)
        x[np.arange(self.n), theta.levels] = 1
        y = np.zeros((len(self.pairs), n_levels), dtype=np.int64)
        eps = np.zeros(len(self.pairs), dtype=np.int64)
        for p, (i, n) in enumerate(self.pairs):
            diff = int(theta.levels[i] - theta.levels[n])
            eps[p] = diff < 0
            y[p, diff % n_levels] = 1
        return x, y, eps

    def decode(self, x):
        return PhaseVector(self.bits, np.argmax(np.asarray(x), axis=1))

    def is_feasible(self, x, y, eps, atol=1e-9):
        x, y, eps = np.asarray(x), np.asarray(y), np.asarray(eps)
        binary = all(np.all((z == 0) | (z == 1)) for z in (x, y, eps))
        sos1 = np.all(x.sum(axis=1) == 1) and np.all(y.sum(axis=1) == 1)
        if not (binary and sos1):
            return False
        for p, (i, n) in enumerate(self.pairs):
            if abs(self.a @ (x[i] - x[n]) + 2.0 * np.pi * eps[p] - self.a @ y[p]) > atol:
                return False
        return True

    def linear_objective(self, x, y):
        return float(np.sum(self.x_coef * x) + np.sum(self.y_coef * y))

    def value(self, x, y):
        return self.linear_objective(x, y) + self.offset

    def milp_arrays(self):
        """Variables ``[x (N L), y (P L), eps (P)]`` and the equality system
        ``(A_eq, b_eq)`` for an off-the-shelf MILP solver (maximisation
        objective ``c``)."""
        n_levels = self.a.size
        nx, ny, ne = self.n * n_levels, len(self.pairs) * n_levels, len(self.pairs)
        nv = nx + ny + ne
        c = np.concatenate([self.x_coef.ravel(), self.y_coef.ravel(), np.zeros(ne)])
        rows, rhs = [], []
        for n in range(self.n):
            r = np.zeros(nv)
            r[n * n_levels:(n + 1) * n_levels] = 1
            rows.append(r)
            rhs.append(1.0)
        for p, (i, n) in enumerate(self.pairs):
            r = np.zeros(nv)
            r[nx + p * n_levels: nx + (p + 1) * n_levels] = 1
            rows.append(r)
            rhs.append(1.0)
            r = np.zeros(nv)
            r[i * n_levels:(i + 1) * n_levels] += self.a
            r[n * n_levels:(n + 1) * n_levels] -= self.a
            r[nx + p * n_levels: nx + (p + 1) * n_levels] -= self.a
            r[nx + ny + p] = 2.0 * np.pi
            rows.append(r)
            rhs.append(0.0)
        a_eq = np.array(rows).reshape(-1, nv)
        return c, a_eq, np.array(rhs)


def build_ilp(q, bits):
    n_levels = 1 << bits
    step = 2.0 * np.pi / n_levels
    a = step * np.arange(n_levels)
    tab = phasor_table(bits)
    c, s = tab.real.copy(), tab.imag.copy()
    hd = q.h_hat
    x_coef = 2.0 * np.abs(hd)[:, None] * (np.cos(np.angle(hd))[:, None] * c[None, :]
                                          - np.sin(np.angle(hd))[:, None] * s[None, :])
    pairs = list(itertools.combinations(range(q.n), 2))
    y_coef = np.zeros((len(pairs), n_levels))
    for p, (i, n) in enumerate(pairs):
        aij = q.a[i, n]
        y_coef[p] = 2.0 * abs(aij) * (np.cos(np.angle(aij)) * c - np.sin(np.angle(aij)) * s)
    offset = float(np.real(np.trace(q.a))) + q.constant
    return IlpModel(bits=bits, a=a, c=c, s=s, pairs=pairs, x_coef=x_coef, y_coef=y_coef,
                    offset=offset)
