"""Channel model: 3-D AP / IRS / user geometry, path loss and Rician fading.

Conventions
-----------
``g`` is the N x M AP->IRS matrix, ``h_d[k]`` (length M) and ``h_r[k]``
(length N) are stored so that the physical channel rows are their conjugate
transposes, i.e. the combined channel of user k is::

    h_k^H = h_r[k]^H diag(exp(j theta)) g + h_d[k]^H

All powers are in watts internally; dBm only at I/O boundaries.
"""
from dataclasses import dataclass, field

import numpy as np

AP_IRS, AP_USER, IRS_USER = "ap_irs", "ap_user", "irs_user"
LINKS = (AP_IRS, AP_USER, IRS_USER)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(w) + 30.0


@dataclass(frozen=True)
class LinkParams:
    """Large-scale and fading parameters of one link type.

    ``rician_factor`` may be ``math.inf`` for a deterministic LoS link.
    """

    path_loss_exponent: float
    rician_factor: float = 0.0
    reference_loss_db: float = -30.0
    antenna_gain_dbi: float = 0.0

    def __post_init__(self):
        if self.path_loss_exponent < 2:
            raise ValueError("path_loss_exponent must be >= 2")
        if not self.rician_factor >= 0:
            raise ValueError("rician_factor must be >= 0 (inf allowed)")


def default_links(alpha_ai=2.2, alpha_iu=2.8, beta_ai=0.0, beta_iu=np.inf,
                  alpha_au=3.5, beta_au=0.0, c0_db=-30.0, irs_gain_dbi=3.0):
    """Link parameters of the single-user setup; override per scenario.

    The IRS element gain is applied once on each IRS-terminated link.
    """
    return {
        AP_IRS: LinkParams(alpha_ai, beta_ai, c0_db, irs_gain_dbi),
        IRS_USER: LinkParams(alpha_iu, beta_iu, c0_db, irs_gain_dbi),
        AP_USER: LinkParams(alpha_au, beta_au, c0_db, 0.0),
    }


def path_loss_linear(d, p, d0=1.0):
    """Power gain ``C0 (d/d0)^-alpha`` times the configured antenna gain."""
    if np.any(np.asarray(d) <= 0):
        raise ValueError("distance must be positive")
    return (db_to_linear(p.reference_loss_db) * (np.asarray(d) / d0) ** (-p.path_loss_exponent)
            * db_to_linear(p.antenna_gain_dbi))


@dataclass
class Geometry:
    m_antennas: int
    n_elements: int
    n_y: int
    ap_ref_position: tuple
    irs_ref_position: tuple
    user_positions: list
    element_spacing: float = 0.5

    def __post_init__(self):
        if min(self.m_antennas, self.n_elements, self.n_y) < 1:
            raise ValueError("antenna/element counts must be >= 1")
        if self.n_elements % self.n_y:
            raise ValueError(f"n_elements={self.n_elements} is not a multiple of n_y={self.n_y}")
        self.ap_ref_position = np.asarray(self.ap_ref_position, dtype=float)
        self.irs_ref_position = np.asarray(self.irs_ref_position, dtype=float)
        self.user_positions = [np.asarray(u, dtype=float) for u in self.user_positions]

    @property
    def n_z(self):
        return self.n_elements // self.n_y

    @property
    def n_users(self):
        return len(self.user_positions)

    def ap_offsets(self):
        """Antenna offsets from the AP reference, in wavelengths (ULA on x)."""
        m = np.arange(self.m_antennas) * self.element_spacing
        return np.stack([m, np.zeros_like(m), np.zeros_like(m)], axis=1)

    def irs_offsets(self):
        """Element offsets from the IRS reference, in wavelengths (URA in y-z).

        Element ``n = iz * n_y + iy``.
        """
        iz, iy = np.divmod(np.arange(self.n_elements), self.n_y)
        s = self.element_spacing
        return np.stack([np.zeros(self.n_elements), iy * s, iz * s], axis=1)


def _default_n_y(n_elements):
    return 4 if n_elements % 4 == 0 else 1


def single_user_geometry(m_antennas, n_elements, distance, d_x=2.0, d_y=50.0, n_y=None):
    """User on the line parallel to the y-axis at ``(d_x, distance, 0)``."""
    return Geometry(
        m_antennas, n_elements, n_y or _default_n_y(n_elements),
        ap_ref_position=(d_x, 0.0, 0.0),
        irs_ref_position=(0.0, d_y, 0.0),
        user_positions=[(d_x, distance, 0.0)],
    )


def multiuser_positions(d_x=2.0, d_y=50.0, d_irs=2.0, d_ap=50.0, n_near=4, n_far=4):
    """Positions of U1..U8: near users on a half-circle around the IRS, far
    users on a half-circle around the AP (top view, z = 0).

    Angles are ``(i + 1/2) pi / n`` for i = 0..n-1. The near half-circle
    opens towards +x (the IRS front side), the far one towards +y.
    """
    irs = np.array([0.0, d_y, 0.0])
    ap = np.array([d_x, 0.0, 0.0])
    out = []
    for i in range(n_near):
        a = (i + 0.5) * np.pi / n_near - np.pi / 2
        out.append(irs + d_irs * np.array([np.cos(a), np.sin(a), 0.0]))
    for i in range(n_far):
        a = (i + 0.5) * np.pi / n_far
        out.append(ap + d_ap * np.array([np.cos(a), np.sin(a), 0.0]))
    return out


def multiuser_geometry(m_antennas, n_elements, users, d_x=2.0, d_y=50.0, d_irs=2.0,
                       d_ap=50.0, n_y=None):
    """Geometry with the given 1-based user labels (U1..U4 near, U5..U8 far)."""
    pos = multiuser_positions(d_x, d_y, d_irs, d_ap)
    return Geometry(
        m_antennas, n_elements, n_y or _default_n_y(n_elements),
        ap_ref_position=(d_x, 0.0, 0.0),
        irs_ref_position=(0.0, d_y, 0.0),
        user_positions=[pos[u - 1] for u in users],
    )


@dataclass
class ChannelRealization:
    g: np.ndarray      # (N, M)
    h_d: np.ndarray    # (K, M)
    h_r: np.ndarray    # (K, N)

    @property
    def shape(self):
        n, m = self.g.shape
        return m, n, self.h_d.shape[0]


@dataclass(eq=False)
class PhaseVector:
    """Discrete phase shifts ``theta_n = levels[n] * 2 pi / 2**bits``."""

    bits: int
    levels: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        self.levels = np.asarray(self.levels, dtype=np.int64)
        if self.levels.ndim != 1:
            raise ValueError("levels must be 1-D")
        if self.levels.size and (self.levels.min() < 0 or self.levels.max() >= self.n_levels):
            raise ValueError(f"levels must lie in [0, {self.n_levels})")

    @classmethod
    def zeros(cls, n, bits):
        return cls(bits, np.zeros(n, dtype=np.int64))

    @property
    def n_levels(self):
        return 1 << self.bits

    @property
    def step(self):
        return 2.0 * np.pi / self.n_levels

    @property
    def angles(self):
        return self.levels * self.step

    @property
    def phasors(self):
        """``exp(j theta_n)``; unit modulus by construction."""
        return phasor_table(self.bits)[self.levels]

    def __len__(self):
        return self.levels.size

    def __eq__(self, other):
        return (isinstance(other, PhaseVector) and self.bits == other.bits
                and np.array_equal(self.levels, other.levels))

    def __repr__(self):
        return f"PhaseVector(bits={self.bits}, levels={self.levels.tolist()})"

    def replace(self, n, level):
        lv = self.levels.copy()
        lv[n] = level
        return PhaseVector(self.bits, lv)


def phasor_table(bits):
    """``exp(j l 2pi/L)`` for l = 0..L-1, with the exact values at multiples of pi/2."""
    n_levels = 1 << bits
    ang = 2.0 * np.pi * np.arange(n_levels) / n_levels
    tab = np.exp(1j * ang)
    # snap quadrant points so |.| == 1 and the zero components are exact
    for l in range(0, n_levels, max(n_levels // 4, 1)):
        q = (4 * l) // n_levels if n_levels >= 4 else 2 * l
        tab[l] = (1, 1j, -1, -1j)[q % 4]
    return tab


def as_phasors(theta):
    """Unit-modulus vector ``exp(j theta)`` from a PhaseVector or real angles."""
    if isinstance(theta, PhaseVector):
        return theta.phasors
    return np.exp(1j * np.asarray(theta, dtype=float))


def _los_row(direction, offsets):
    # far-field phase of each element relative to the reference, unit magnitude
    return np.exp(2j * np.pi * (offsets @ direction))


def _unit(v):
    return v / np.linalg.norm(v)


def los_components(geometry):
    """Deterministic LoS parts ``(G_los, h_d_los, h_r_los)`` from the geometry."""
    p = geometry.ap_offsets()
    q = geometry.irs_offsets()
    u_ai = _unit(geometry.irs_ref_position - geometry.ap_ref_position)
    # path length AP antenna m -> IRS element n ~ D - <u,p_m> + <u,q_n>
    g_los = np.conj(_los_row(u_ai, q))[:, None] * _los_row(u_ai, p)[None, :]
    h_d_los, h_r_los = [], []
    for user in geometry.user_positions:
        u_au = _unit(user - geometry.ap_ref_position)
        u_iu = _unit(user - geometry.irs_ref_position)
        # stored conjugated: the physical rows are h^H
        h_d_los.append(np.conj(_los_row(u_au, p)))
        h_r_los.append(np.conj(_los_row(u_iu, q)))
    return g_los, np.array(h_d_los).reshape(-1, p.shape[0]), np.array(h_r_los).reshape(-1, q.shape[0])


def link_distances(geometry):
    """Reference-to-reference distances ``(d_AI, d_Au[k], d_Iu[k])``."""
    d_ai = np.linalg.norm(geometry.irs_ref_position - geometry.ap_ref_position)
    d_au = np.array([np.linalg.norm(u - geometry.ap_ref_position) for u in geometry.user_positions])
    d_iu = np.array([np.linalg.norm(u - geometry.irs_ref_position) for u in geometry.user_positions])
    return d_ai, d_au, d_iu


def link_rng(seed, trial, link_id):
    """Independent generator for one (seed, trial, link) triple."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(link_id))))


def cn(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


def rician(los, rician_factor, rng):
    """``sqrt(b/(1+b)) LoS + sqrt(1/(1+b)) NLoS`` with b the Rician factor."""
    if np.isinf(rician_factor):
        return los.astype(complex)
    nlos = cn(rng, los.shape)
    b = float(rician_factor)
    return np.sqrt(b / (1.0 + b)) * los + np.sqrt(1.0 / (1.0 + b)) * nlos


def generate(geometry, links, seed, trial):
    """Draw one channel realization; deterministic in ``(seed, trial)``.

    Link substreams: 0 for G, ``1 + 2k`` for h_d of user k, ``2 + 2k`` for
    h_r of user k, so adding users leaves earlier users' channels intact.
    """
    g_los, hd_los, hr_los = los_components(geometry)
    d_ai, d_au, d_iu = link_distances(geometry)
    g = np.sqrt(path_loss_linear(d_ai, links[AP_IRS])) * rician(
        g_los, links[AP_IRS].rician_factor, link_rng(seed, trial, 0))
    h_d = np.empty_like(hd_los, dtype=complex)
    h_r = np.empty_like(hr_los, dtype=complex)
    for k in range(geometry.n_users):
        h_d[k] = np.sqrt(path_loss_linear(d_au[k], links[AP_USER])) * rician(
            hd_los[k], links[AP_USER].rician_factor, link_rng(seed, trial, 1 + 2 * k))
        h_r[k] = np.sqrt(path_loss_linear(d_iu[k], links[IRS_USER])) * rician(
            hr_los[k], links[IRS_USER].rician_factor, link_rng(seed, trial, 2 + 2 * k))
    return ChannelRealization(g=g, h_d=h_d, h_r=h_r)


def combined_channel(ch, theta, k):
    """Combined channel ``h_k`` with ``h_k^H = h_r,k^H Theta G + h_d,k^H``."""
    u = as_phasors(theta)
    return np.conj((np.conj(ch.h_r[k]) * u) @ ch.g) + ch.h_d[k]


def combined_channels(ch, theta):
    """All users' combined channels as the rows of a K x M array."""
    u = as_phasors(theta)
    return np.conj((np.conj(ch.h_r) * u[None, :]) @ ch.g) + ch.h_d
