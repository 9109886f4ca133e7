"""Large-N behaviour of quantised IRS phase shifts (single-antenna AP,
Rayleigh cascaded link, direct link ignored)."""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import cn

CHUNK = 2000


@dataclass(frozen=True)
class AsymptoticConfig:
    n_elements: int
    bits: float = math.inf        # int >= 1, or math.inf for continuous phases
    rho_h: float = 1.0
    rho_g: float = 1.0
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.rho_h <= 0 or self.rho_g <= 0:
            raise ValueError("rho_h and rho_g must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        _check_bits(self.bits)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    trials: int


def _check_bits(bits):
    if bits is None or (not math.isinf(bits) and (bits < 1 or int(bits) != bits)):
        raise ValueError("bits must be a positive integer or inf")


def phase_factor(bits):
    """``E[exp(j err)] = 2^b/pi sin(pi/2^b)`` for a uniform quantisation error."""
    _check_bits(bits)
    if math.isinf(bits):
        return 1.0
    l = 2.0 ** bits
    return l / math.pi * math.sin(math.pi / l)


def eta(bits):
    """Asymptotic received-power ratio of b-bit to continuous phase shifts."""
    return phase_factor(bits) ** 2


def eta_db(bits):
    return 10.0 * math.log10(eta(bits))


def pr_closed_form(cfg):
    """``N r + N(N-1) (pi^2 r / 16) eta(b)`` with ``r = rho_h^2 rho_g^2``."""
    n = cfg.n_elements
    r = (cfg.rho_h * cfg.rho_g) ** 2
    return n * r + n * (n - 1) * (math.pi ** 2 * r / 16.0) * eta(cfg.bits)


def quantization_error(theta_opt, bits):
    """Quantised minus optimal phase, wrapped to ``[-pi/L, pi/L)``.

    Quantisation is to the nearest level (midpoints round down).
    """
    if math.isinf(bits):
        return np.zeros_like(theta_opt)
    l = 2 ** int(bits)
    x = np.mod(theta_opt, 2.0 * np.pi) * l / (2.0 * np.pi)
    q = np.ceil(x - 0.5)
    err = (q - x) * (2.0 * np.pi / l)
    return err


def _draw_chunk(cfg, chunk, size):
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed), spawn_key=(int(chunk),)))
    h = cn(rng, (size, cfg.n_elements), cfg.rho_h ** 2)   # entries of h_r^H
    g = cn(rng, (size, cfg.n_elements), cfg.rho_g ** 2)
    return h, g


def chunk_values(cfg, chunk, size):
    """Per-trial received power ``|sum_n |h_n||g_n| exp(j err_n)|^2`` for one chunk,
    plus the quantisation errors."""
    h, g = _draw_chunk(cfg, chunk, size)
    amp = np.abs(h) * np.abs(g)
    theta_opt = -(np.angle(h) + np.angle(g))
    err = quantization_error(theta_opt, cfg.bits)
    return kernels.cascade_power(np.ascontiguousarray(amp), np.ascontiguousarray(err)), err


def _chunks(trials):
    for c, start in enumerate(range(0, trials, CHUNK)):
        yield c, min(CHUNK, trials - start)


def monte_carlo_pr(cfg, return_errors=False):
    """Monte-Carlo average received power with quantised optimal phases.

    Trials are drawn in fixed-size chunks with per-chunk substreams, so the
    result does not depend on how chunks are scheduled. Sums use
    ``math.fsum``.
    """
    vals, errs = [], []
    for c, size in _chunks(cfg.trials):
        v, e = chunk_values(cfg, c, size)
        vals.append(v)
        if return_errors:
            errs.append(e.ravel())
    v = np.concatenate(vals)
    mean = math.fsum(v) / v.size
    var = math.fsum((v - mean) ** 2) / max(v.size - 1, 1)
    est = MonteCarloEstimate(mean=mean, stderr=math.sqrt(var / v.size), trials=v.size)
    if return_errors:
        return est, np.concatenate(errs)
    return est


def power_gain_slope(bits, n_list, trials=10_000, seed=0, method="monte_carlo", rho_h=1.0,
                     rho_g=1.0):
    """Least-squares slope of ``log P_r`` against ``log N``."""
    n_list = sorted(set(int(n) for n in n_list))
    if len(n_list) < 3:
        raise ValueError("need at least 3 distinct N values")
    pr = []
    for n in n_list:
        cfg = AsymptoticConfig(n, bits, rho_h, rho_g, trials, seed)
        pr.append(pr_closed_form(cfg) if method == "closed_form" else monte_carlo_pr(cfg).mean)
    slope, _ = np.polyfit(np.log(n_list), np.log(pr), 1)
    return float(slope)
