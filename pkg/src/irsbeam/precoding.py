"""Transmit precoders for fixed combined channels.

Combined channels are passed as a K x M array whose row k is ``h_k`` (the
column vector with ``h_k^H = h_r,k^H Theta G + h_d,k^H``). Precoder columns
``w[:, k]`` are in sqrt-watts.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import Infeasible, NotConverged, RankDeficient, SingularMatrix, ZeroChannel
from .linalg import hermitian, lu_factor, solve_linear

# dual powers this far above their single-user values are treated as divergent
DIVERGED = 1e12


@dataclass
class SinrSpec:
    targets: np.ndarray       # linear SINR targets gamma_k
    noise_powers: np.ndarray  # sigma_k^2 in watts

    def __post_init__(self):
        self.targets = np.atleast_1d(np.asarray(self.targets, dtype=float))
        self.noise_powers = np.atleast_1d(np.asarray(self.noise_powers, dtype=float))
        if self.targets.shape != self.noise_powers.shape:
            raise ValueError("targets and noise_powers must have equal length")
        if np.any(self.targets <= 0) or np.any(self.noise_powers <= 0):
            raise ValueError("SINR targets and noise powers must be positive")

    @classmethod
    def uniform(cls, k, gamma, sigma2):
        return cls(np.full(k, float(gamma)), np.full(k, float(sigma2)))

    def __len__(self):
        return self.targets.size

    def subset(self, idx):
        return SinrSpec(self.targets[idx], self.noise_powers[idx])


@dataclass
class Precoder:
    w: np.ndarray          # (M, K)
    total_power: float
    lambdas: np.ndarray = None   # MMSE dual variables, when applicable
    iterations: int = 0
    residual: float = 0.0

    @classmethod
    def from_matrix(cls, w, **kw):
        w = np.asarray(w, dtype=complex)
        return cls(w=w, total_power=float(np.sum(np.abs(w) ** 2)), **kw)


def _rows(h):
    h = np.asarray(h, dtype=complex)
    return h[None, :] if h.ndim == 1 else h


def sinr(h, w, spec):
    """Per-user SINR ``|h_k^H w_k|^2 / (sum_{j!=k} |h_k^H w_j|^2 + sigma_k^2)``."""
    hc = _rows(h)
    w = w.w if isinstance(w, Precoder) else np.asarray(w)
    w = w[:, None] if w.ndim == 1 else w
    gains = np.abs(np.conj(hc) @ w) ** 2          # gains[k, j] = |h_k^H w_j|^2
    desired = np.diag(gains)
    interference = gains.sum(axis=1) - desired
    return desired / (interference + spec.noise_powers)


def mrt(h, gamma, sigma2):
    """Maximum-ratio precoder meeting ``SINR = gamma`` with equality."""
    h = np.asarray(h, dtype=complex).ravel()
    norm2 = float(np.real(np.vdot(h, h)))
    if norm2 == 0.0:
        raise ZeroChannel("combined channel is zero")
    p = gamma * sigma2 / norm2
    return Precoder(w=(np.sqrt(p) * h / np.sqrt(norm2))[:, None], total_power=p)


def zf_power_from_channels(h, spec):
    """``tr(P (H^H H)^{-1})`` with ``P = diag(sigma_k^2 gamma_k)``; raises RankDeficient."""
    hc = _rows(h)
    gram = np.conj(hc) @ hc.T                    # (H^H H)(k, j) = h_k^H h_j
    try:
        lu_piv = lu_factor(gram)
    except SingularMatrix as exc:
        raise RankDeficient("combined channel matrix is rank deficient") from exc
    inv = scipy.linalg.lu_solve(lu_piv, np.eye(gram.shape[0], dtype=complex), check_finite=False)
    return float(np.sum(spec.noise_powers * spec.targets * np.real(np.diag(inv))))


def zf(h, spec):
    """Zero-forcing precoder ``W = H (H^H H)^{-1} P^{1/2}`` with ``p_k = sigma_k^2 gamma_k``."""
    hc = _rows(h)
    k, m = hc.shape
    if m < k:
        raise RankDeficient(f"ZF needs M >= K (M={m}, K={k})")
    big_h = hc.T                                   # M x K, columns h_k
    gram = hermitian(big_h) @ big_h
    try:
        x = solve_linear(gram, np.diag(np.sqrt(spec.noise_powers * spec.targets)).astype(complex))
    except SingularMatrix as exc:
        raise RankDeficient("combined channel matrix is rank deficient") from exc
    return Precoder.from_matrix(big_h @ x)


def mmse_initial_lambdas(h, spec):
    hc = _rows(h)
    return spec.targets * spec.noise_powers / np.sum(np.abs(hc) ** 2, axis=1)


def mmse(h, spec, tol=1e-10, max_iter=500, lam0=None):
    """SINR-constrained power-minimising precoder via uplink-downlink duality.

    The dual powers solve the fixed point
    ``lam_k = gamma_k sigma_k^2 / (h_k^H (I + sum_{i!=k} lam_i/sigma_i^2 h_i h_i^H)^{-1} h_k)``;
    the beam directions are the normalised MMSE filters and the downlink
    powers come from the K x K SINR-equality system.

    Raises
    ------
    NotConverged
        Fixed point not reached within ``max_iter``.
    Infeasible
        Negative powers or a singular power-coupling matrix.
    """
    hc = _rows(h)
    k, m = hc.shape
    if np.any(np.sum(np.abs(hc) ** 2, axis=1) == 0):
        raise Infeasible("a user has a zero combined channel")
    lam = mmse_initial_lambdas(hc, spec) if lam0 is None else np.asarray(lam0, dtype=float)
    with np.errstate(all="ignore"):
        lam, iters, residual, ok = kernels.mmse_fixed_point(
            np.ascontiguousarray(hc), spec.noise_powers, spec.targets, lam.copy(), tol, max_iter)
    start = mmse_initial_lambdas(hc, spec)
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0) or np.any(lam > DIVERGED * start):
        # the iteration is monotone from below, so unbounded growth means no fixed point
        raise Infeasible("dual fixed point diverged")
    if not ok:
        raise NotConverged(f"MMSE fixed point not converged after {iters} iterations "
                           f"(residual {residual:.3g})")

    t = np.eye(m) + (hc.T * (lam / spec.noise_powers)) @ np.conj(hc)
    dirs = np.linalg.solve(t, hc.T)                       # columns T^{-1} h_k
    dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
    # fix the phase so that h_k^H w_k is real and non-negative
    inner = np.einsum("km,mk->k", np.conj(hc), dirs)
    dirs *= np.exp(-1j * np.angle(inner))[None, :]

    g = np.abs(np.conj(hc) @ dirs) ** 2                    # g[i, j] = |h_i^H w_j|^2
    q = -g.copy()
    q[np.diag_indices(k)] = np.diag(g) / spec.targets
    try:
        p = np.real(solve_linear(q, spec.noise_powers.astype(complex)))
    except SingularMatrix as exc:
        raise Infeasible("power coupling matrix is singular") from exc
    if np.any(p < 0):
        raise Infeasible("negative power allocation")
    w = dirs * np.sqrt(p)[None, :]
    return Precoder(w=w, total_power=float(np.sum(p)), lambdas=lam, iterations=int(iters),
                    residual=float(residual))
