"""Random multi-cell channel draws and IRS-assisted composite channels.

Users are indexed network-wide: user ``m`` belongs to cell ``m // K`` and has
local index ``m % K``. Every BTS hears every user, but an IRS only reflects
towards the BTS of its own cell.
"""

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "SystemConfig",
    "NetworkRealization",
    "draw_realization",
    "compose_channel",
    "composite_channels",
    "cascade_columns",
    "crandn",
    "db2lin",
]


def db2lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def crandn(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian samples with variance `var`."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of one multi-cell scenario.

    Powers are linear. ``tx_power`` is the per-user transmit power
    (sigma_k^2), ``noise_var`` the receiver noise variance (sigma_n^2).
    ``noise_mismatch_db`` scales the noise variance the direct objectives
    *assume*; the simulated noise always uses ``noise_var``.
    """

    num_cells: int = 2
    users_per_cell: int = 2
    n_irs: int = 16
    bts_antennas: int = 6
    ue_antennas: int = 1
    rician_factor: float = 10.0
    cross_gain: float = float(10 ** (-0.3))
    tx_power: float = 1.0
    noise_var: float = 10.0
    pilot_len: int = 16
    n_fb: int = 2
    rng_seed: int = 0
    n_alt: int = 3
    codebook: str = "dft"
    pilot_kind: str = "random"
    joint_ls_csi: bool = False
    noise_mismatch_db: float = 0.0

    def __post_init__(self):
        for name in ("num_cells", "users_per_cell", "bts_antennas", "ue_antennas",
                     "pilot_len", "n_alt"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        # n_irs == 0 (no IRS) and n_fb == 0 (no FB rounds) are legitimate
        if self.n_irs < 0:
            raise ValueError(f"n_irs must be >= 0, got {self.n_irs}")
        if self.n_fb < 0:
            raise ValueError(f"n_fb must be >= 0, got {self.n_fb}")
        if self.rician_factor < 0:
            raise ValueError(f"rician_factor must be >= 0, got {self.rician_factor}")
        if not 0.0 < self.cross_gain <= 1.0:
            raise ValueError(f"cross_gain must be in (0, 1], got {self.cross_gain}")
        if not self.tx_power > 0:
            raise ValueError(f"tx_power must be > 0, got {self.tx_power}")
        if not self.noise_var > 0:
            raise ValueError(f"noise_var must be > 0, got {self.noise_var}")
        if self.codebook not in ("dft", "hadamard"):
            raise ValueError(f"codebook must be 'dft' or 'hadamard', got {self.codebook!r}")
        if self.pilot_kind not in ("random", "walsh"):
            raise ValueError(f"pilot_kind must be 'random' or 'walsh', got {self.pilot_kind!r}")

    @property
    def num_users(self):
        return self.num_cells * self.users_per_cell

    @property
    def num_interferers(self):
        """L, the number of other-cell users seen by every BTS."""
        return (self.num_cells - 1) * self.users_per_cell

    @property
    def powers(self):
        return np.full(self.num_users, float(self.tx_power))

    @property
    def assumed_noise_var(self):
        return float(self.noise_var * db2lin(self.noise_mismatch_db))

    def cell_of(self, m):
        return m // self.users_per_cell

    def cell_users(self, c):
        k = self.users_per_cell
        return np.arange(c * k, (c + 1) * k)

    def other_users(self, c):
        return np.setdiff1d(np.arange(self.num_users), self.cell_users(c))

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class NetworkRealization:
    """One draw of every channel in the network.

    Attributes
    ----------
    direct : ndarray, shape (C, U, M_R, N_T)
        ``direct[c, m]`` is the direct channel between UE ``m`` and BTS ``c``.
    ue_to_irs : ndarray, shape (C, U, N_IRS, N_T)
        ``ue_to_irs[c, m]`` is the channel from UE ``m`` to the IRS of cell ``c``.
    bts_to_irs : ndarray, shape (C, N_IRS, M_R)
        ``bts_to_irs[c]`` is H_IR of cell ``c``; the reflected path to the BTS
        is ``bts_to_irs[c].T``.
    """

    direct: np.ndarray
    ue_to_irs: np.ndarray
    bts_to_irs: np.ndarray
    seed: int = field(default=0, compare=False)

    @property
    def num_cells(self):
        return self.direct.shape[0]

    @property
    def num_users(self):
        return self.direct.shape[1]

    @property
    def n_irs(self):
        return self.bts_to_irs.shape[1]


def draw_realization(cfg, seed):
    """Draw all channels of the network, deterministically in `seed`.

    Direct and UE-to-IRS links are iid CN(0, 1) inside a cell and
    CN(0, cross_gain) across cells. The BTS-IRS link is Rician with factor
    ``cfg.rician_factor`` around a rank-one unit-modulus LoS matrix, so every
    entry has unit second moment.
    """
    rng = np.random.default_rng(seed)
    C, U = cfg.num_cells, cfg.num_users
    M, N, NT = cfg.bts_antennas, cfg.n_irs, cfg.ue_antennas

    user_cell = np.arange(U) // cfg.users_per_cell
    gain = np.where(np.arange(C)[:, None] == user_cell[None, :], 1.0, cfg.cross_gain)
    amp = np.sqrt(gain)[:, :, None, None]

    direct = amp * crandn(rng, (C, U, M, NT))
    ue_to_irs = amp * crandn(rng, (C, U, N, NT))

    a = np.exp(2j * np.pi * rng.random((C, N, 1)))
    b = np.exp(2j * np.pi * rng.random((C, 1, M)))
    los = a * b.conj()
    nlos = crandn(rng, (C, N, M))
    beta = float(cfg.rician_factor)
    if np.isinf(beta):
        bts_to_irs = los
    else:
        bts_to_irs = np.sqrt(beta / (1 + beta)) * los + np.sqrt(1 / (1 + beta)) * nlos
    return NetworkRealization(direct, ue_to_irs, bts_to_irs, seed=seed)


def compose_channel(real, c, m, w):
    """Composite channel ``direct[c, m] + H_IR^T diag(w) H_IT`` (M_R x N_T).

    `w` need not be unit-modulus.
    """
    w = np.asarray(w)
    if w.shape != (real.n_irs,):
        raise ValueError(f"w must have shape ({real.n_irs},), got {w.shape}")
    h_ir = real.bts_to_irs[c]
    return real.direct[c, m] + (h_ir.T * w) @ real.ue_to_irs[c, m]


def composite_channels(real, c, w, users=None):
    """Composite channels of `users` (default: all) towards BTS ``c``.

    Returns an array of shape (len(users), M_R, N_T).
    """
    users = np.arange(real.num_users) if users is None else np.asarray(users)
    w = np.asarray(w)
    if w.shape != (real.n_irs,):
        raise ValueError(f"w must have shape ({real.n_irs},), got {w.shape}")
    refl = real.bts_to_irs[c].T * w
    return real.direct[c, users] + np.einsum("mn,unt->umt", refl, real.ue_to_irs[c, users])


def cascade_columns(real, c, users=None):
    """Per-element reflected channels, shape (len(users), N_IRS, M_R, N_T).

    Entry ``[u, j]`` is ``H_IR^T[:, j] H_IT[j, :]``, the channel when only IRS
    element ``j`` reflects with unit gain.
    """
    users = np.arange(real.num_users) if users is None else np.asarray(users)
    h_ir = real.bts_to_irs[c]
    return np.einsum("nm,unt->unmt", h_ir, real.ue_to_irs[c, users])
