"""Pilot sequences and synchronized uplink/downlink training receptions.

All users of all cells transmit their pilots at the same time, so every
received block contains intra-cell users, other-cell interferers and noise.
Downlink blocks use the transposed (reciprocal) composite channels.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .topology import composite_channels, crandn

__all__ = [
    "PilotSet",
    "TrainingRecord",
    "gen_pilots",
    "simulate_ul_training",
    "simulate_ul_sweep",
    "simulate_ul_block",
    "simulate_dl_training",
    "simulate_dl_block",
]


@dataclass(frozen=True)
class PilotSet:
    """Binary pilots of every user.

    Attributes
    ----------
    b : ndarray of {+1, -1}, shape (U, T) or (U, S, T)
        Unscaled sequences; the 3-d form carries one sequence per transmit
        antenna (used for MIMO channel estimation).
    amplitude : ndarray, shape (U,)
        Per-sequence amplitude sigma; each sequence carries power sigma^2.
    direction : {'uplink', 'downlink'}
    """

    b: np.ndarray
    amplitude: np.ndarray
    direction: str = "uplink"

    @property
    def length(self):
        return self.b.shape[-1]

    @property
    def num_users(self):
        return self.b.shape[0]

    def scaled(self, users=None):
        """Pilots multiplied by their amplitude (the b_k of the objectives)."""
        users = slice(None) if users is None else np.asarray(users)
        amp = self.amplitude[users]
        b = self.b[users]
        return b * amp.reshape(amp.shape + (1,) * (b.ndim - amp.ndim))

    def subset(self, users):
        users = np.asarray(users)
        return PilotSet(self.b[users], self.amplitude[users], self.direction)


@dataclass(frozen=True)
class TrainingRecord:
    """Received blocks of one receiver over a codebook sweep.

    ``epochs`` has shape (N+1, M, T) for a BTS (or (N+1, N_T, T) for a UE).
    """

    epochs: np.ndarray
    noise_var: float

    @property
    def length(self):
        return self.epochs.shape[-1]


def gen_pilots(cfg, seed, n_streams=1, direction="uplink", kind=None):
    """iid equiprobable +-1 pilots for all users, deterministic in `seed`.

    With ``kind='walsh'`` rows of a Sylvester-Hadamard matrix are used
    instead, which requires T to be a power of two and at least the total
    number of sequences. With ``n_streams > 1`` each user sends one sequence
    per antenna and its power is split evenly over them.
    """
    kind = cfg.pilot_kind if kind is None else kind
    T, U = cfg.pilot_len, cfg.num_users
    shape = (U, T) if n_streams == 1 else (U, n_streams, T)
    if kind == "random":
        rng = np.random.default_rng(seed)
        b = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    elif kind == "walsh":
        count = U * n_streams
        if T & (T - 1) or T < count:
            raise ValueError(
                f"walsh pilots need T a power of two and T >= {count}, got T={T}"
            )
        b = hadamard(T)[:count].astype(float).reshape(shape)
    else:
        raise ValueError(f"unknown pilot kind {kind!r}")
    amplitude = np.full(U, np.sqrt(cfg.tx_power / n_streams))
    return PilotSet(b, amplitude, direction)


def _tx_blocks(pilots, precoders):
    """Transmitted UL signals, shape (U, N_T, T)."""
    xs = pilots.scaled().conj()
    if xs.ndim == 3:
        if precoders is not None:
            raise ValueError("per-antenna pilots are sent without precoders")
        return xs
    g = np.asarray(precoders)
    if g.ndim != 2 or g.shape[0] != xs.shape[0]:
        raise ValueError(f"precoders must have shape (U, N_T), got {g.shape}")
    return g[:, :, None] * xs[:, None, :]


def _ul_receive(real, c, thetas, x, noise_var, rng):
    """Blocks at BTS ``c`` for each IRS state in `thetas` (E, N)."""
    h = np.stack([composite_channels(real, c, th) for th in thetas])  # (E, U, M, NT)
    y = np.einsum("eumn,unt->emt", h, x)
    if noise_var > 0:
        y = y + crandn(rng, y.shape, noise_var)
    return y


def simulate_ul_training(real, cb, pilots, precoders, cell, seed, noise_var):
    """Codebook sweep as received by BTS `cell`.

    Epoch ``j`` is ``sum_m H_m(theta_j) g_m sigma_m b_m^H + N_j`` with all
    users of the network transmitting and iid CN(0, noise_var) noise.
    """
    rng = np.random.default_rng(seed)
    x = _tx_blocks(pilots, precoders)
    y = _ul_receive(real, cell, cb.thetas, x, noise_var, rng)
    return TrainingRecord(y, float(noise_var))


def simulate_ul_sweep(real, cb, pilots, precoders, seed, noise_var):
    """One synchronized sweep seen by every BTS; independent noise per BTS."""
    rng = np.random.default_rng(seed)
    x = _tx_blocks(pilots, precoders)
    return [
        TrainingRecord(_ul_receive(real, c, cb.thetas, x, noise_var, rng), float(noise_var))
        for c in range(real.num_cells)
    ]


def simulate_ul_block(real, pilots, precoders, irs_states, seed, noise_var):
    """A single UL block per BTS with every IRS fixed; shape (C, M, T)."""
    rng = np.random.default_rng(seed)
    x = _tx_blocks(pilots, precoders)
    w = np.asarray(irs_states)
    return np.stack([
        _ul_receive(real, c, w[c][None, :], x, noise_var, rng)[0]
        for c in range(real.num_cells)
    ])


def _bts_signals(pilots, bts_precoders):
    """DL transmit block of every BTS, shape (C, M, T)."""
    f = np.asarray(bts_precoders)
    C, K = f.shape[:2]
    s = pilots.scaled().conj().reshape(C, K, -1)
    return np.einsum("ckm,ckt->cmt", f, s)


def simulate_dl_block(real, pilots, bts_precoders, irs_states, seed, noise_var):
    """Forward training received by every UE, shape (U, N_T, T).

    BTS ``c`` sends ``sum_k f_{c,k} sigma_k b_{c,k}^H`` where `bts_precoders`
    has shape (C, K, M); UE ``m`` hears every BTS through the transposed
    composite channels, each BTS's path using its own IRS state.
    """
    rng = np.random.default_rng(seed)
    w = np.asarray(irs_states)
    C = real.num_cells
    tx = _bts_signals(pilots, bts_precoders)
    h = np.stack([composite_channels(real, c, w[c]) for c in range(C)])  # (C, U, M, NT)
    y = np.einsum("cumn,cmt->unt", h, tx)
    if noise_var > 0:
        y = y + crandn(rng, y.shape, noise_var)
    return y


def simulate_dl_training(real, pilots, bts_precoders, irs_states, ue, seed, noise_var):
    """Forward training block received by UE `ue`, shape (N_T, T)."""
    rng = np.random.default_rng(seed)
    w = np.asarray(irs_states)
    C = real.num_cells
    tx = _bts_signals(pilots, bts_precoders)
    y = sum(
        composite_channels(real, c, w[c], users=[ue])[0].T @ tx[c] for c in range(C)
    )
    if noise_var > 0:
        y = y + crandn(rng, y.shape, noise_var)
    return y
