"""End-to-end comparison schemes.

Each scheme turns one network realization plus its training data into IRS
weights and filters for every cell, then is scored with the *true* channels.
The UL receive filters ``v_k`` double as DL precoders
``f_k = sigma_k conj(v_k) / ||v_k||`` (reciprocity).

Scheme ids:

========================  =====================================================
``perfect_csi``           true channels of all users, Max-SINR / MMSE
``full_chan_est``         estimated channels of intra- and other-cell users
``partial_chan_est``      estimated intra-cell channels only, interferers ignored
``direct_central``        sample SINR estimate incl. interferer pilots
``direct_decentral``      sample SINR estimate from intra-cell pilots only
``ls_obj``                LS-residual surrogate, no noise variance needed
``random_theta``          random fixed IRS phases, LS filters only
========================  =====================================================
"""

from dataclasses import dataclass, field

import numpy as np

from .airlink import gen_pilots, simulate_dl_block, simulate_ul_block, simulate_ul_sweep
from .codebook import build_codebook, reconstruct_canonical, synthesize_yw
from .filters import CsiEstimate, estimate_csi, ls_filters, mmse_filter
from .objectives import ObjectiveContext, csi_objective, phase_problem, true_sinr
from .phaseopt import OptimizerSettings, ascend, optimize_phases
from .topology import composite_channels, draw_realization

__all__ = [
    "SCHEMES",
    "CSI_SCHEMES",
    "DIRECT_SCHEMES",
    "SchemeResult",
    "TrialSeeds",
    "TrialData",
    "prepare_trial",
    "run_scheme",
    "run_miso_scheme",
    "run_mimo_scheme",
    "max_sinr_alternate",
    "bidirectional_train",
    "ul_rates",
    "dl_rates",
    "dl_precoders",
]

CSI_SCHEMES = ("perfect_csi", "full_chan_est", "partial_chan_est")
DIRECT_SCHEMES = ("direct_central", "direct_decentral", "ls_obj", "random_theta")
SCHEMES = CSI_SCHEMES + DIRECT_SCHEMES


@dataclass
class SchemeResult:
    scheme: str
    per_user_dl_rate: np.ndarray
    dl_sum_rate: float
    per_user_ul_rate: np.ndarray
    ul_sum_rate: float
    training_symbols_used: int
    iterations: int
    flags: dict = field(default_factory=dict)
    w: np.ndarray | None = None

    def metric(self, name):
        if name == "dl_sum":
            return self.dl_sum_rate
        if name == "ul_sum":
            return self.ul_sum_rate
        if name == "ul_per_cell":
            return self.ul_sum_rate / self.w.shape[0]
        raise ValueError(f"unknown metric {name!r}")


@dataclass(frozen=True)
class TrialSeeds:
    """Independent integer seeds for every random ingredient of one trial."""

    channel: int
    ul_pilots: int
    dl_pilots: int
    csi_pilots: int
    sweep_noise: int
    csi_noise: int
    fb_noise: int
    theta: int

    @classmethod
    def from_trial(cls, base_seed, trial):
        ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(trial),))
        return cls(*(int(s) for s in ss.generate_state(8)))


@dataclass
class TrialData:
    """Realization and shared training data of one trial.

    Every scheme run on the same `TrialData` sees the same channels, pilots
    and noise (paired comparison).
    """

    cfg: object
    seeds: TrialSeeds
    real: object
    cb: object
    pilots: object
    sweep: list
    _cache: dict = field(default_factory=dict, repr=False)

    def canonical(self, c):
        key = ("can", c)
        if key not in self._cache:
            self._cache[key] = reconstruct_canonical(self.sweep[c].epochs, self.cb)
        return self._cache[key]

    def csi_training(self):
        """Per-antenna pilots and sweep for MIMO channel estimation."""
        if "csi" not in self._cache:
            cfg = self.cfg
            pil = gen_pilots(cfg, self.seeds.csi_pilots, n_streams=cfg.ue_antennas)
            sweep = simulate_ul_sweep(self.real, self.cb, pil, None, self.seeds.csi_noise,
                                      cfg.noise_var)
            self._cache["csi"] = (pil, sweep)
        return self._cache["csi"]


def initial_precoders(cfg):
    nt = cfg.ue_antennas
    return np.full((cfg.num_users, nt), 1.0 / np.sqrt(nt), dtype=complex)


def prepare_trial(cfg, seeds, real=None):
    if isinstance(seeds, (int, np.integer)):
        seeds = TrialSeeds.from_trial(cfg.rng_seed, seeds)
    if real is None:
        real = draw_realization(cfg, seeds.channel)
    cb = build_codebook(cfg.n_irs, cfg.codebook)
    pilots = gen_pilots(cfg, seeds.ul_pilots)
    sweep = simulate_ul_sweep(real, cb, pilots, initial_precoders(cfg), seeds.sweep_noise,
                              cfg.noise_var)
    return TrialData(cfg, seeds, real, cb, pilots, sweep)


# --------------------------------------------------------------------------
# true-channel evaluation


def dl_precoders(v, powers):
    """``sigma_k conj(v_k) / ||v_k||`` for filters `v` (C, K, M)."""
    v = np.asarray(v)
    amp = np.sqrt(np.asarray(powers, dtype=float)).reshape(v.shape[:2])
    norms = np.linalg.norm(v, axis=-1)
    norms = np.where(norms > 0, norms, 1.0)
    return amp[..., None] * v.conj() / norms[..., None]


def ul_rates(real, cfg, w, v, g):
    """Per-user UL rates with true channels.

    `w` (C, N) IRS weights, `v` (C, K, M) receive filters, `g` (U, N_T)
    UE precoders (normalized here).
    """
    g = np.asarray(g)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    g = g / np.where(norms > 0, norms, 1.0)
    p = cfg.powers
    rates = np.empty(cfg.num_users)
    for c in range(cfg.num_cells):
        h = np.einsum("umt,ut->um", composite_channels(real, c, w[c]), g)
        for k, u in enumerate(cfg.cell_users(c)):
            rates[u] = np.log2(1 + true_sinr(h, v[c, k], u, p, cfg.noise_var))
    return rates


def dl_rates(real, cfg, w, f, g):
    """Per-user DL rates with true reciprocal channels.

    `f` (C, K, M) are the BTS precoders including power, `g` (U, N_T) the
    UE combiners (the UE forms ``g^T y``). Every stream of every BTS other
    than the desired one is interference.
    """
    C, K = cfg.num_cells, cfg.users_per_cell
    h = np.stack([composite_channels(real, c, w[c]) for c in range(C)])  # (C, U, M, NT)
    amp = np.einsum("un,cumn,ckm->cku", np.asarray(g), h, np.asarray(f))
    pw = np.abs(amp) ** 2
    total = pw.sum(axis=(0, 1))
    users = np.arange(cfg.num_users)
    desired = pw[users // K, users % K, users]
    noise = cfg.noise_var * np.sum(np.abs(g) ** 2, axis=1)
    denom = total - desired + noise
    sinr = np.divide(desired, denom, out=np.zeros_like(desired), where=denom > 0)
    return np.log2(1 + sinr)


def _finish(scheme, data, w, v, g_ul, g_dl, training, iterations, flags):
    cfg = data.cfg
    ul = ul_rates(data.real, cfg, w, v, g_ul)
    dl = dl_rates(data.real, cfg, w, dl_precoders(v, cfg.powers), g_dl)
    return SchemeResult(scheme, dl, float(dl.sum()), ul, float(ul.sum()), int(training),
                        int(iterations), flags, w)


# --------------------------------------------------------------------------
# per-cell building blocks


def _scope(cfg, c, scheme):
    own = cfg.cell_users(c)
    if scheme == "partial_chan_est":
        return own
    return np.concatenate([own, cfg.other_users(c)])


def _cell_csi(data, c, scheme, mimo=False):
    """Channel knowledge of BTS ``c`` under a CSI scheme, served users first."""
    users = _scope(data.cfg, c, scheme)
    if scheme == "perfect_csi":
        return CsiEstimate.from_realization(data.real, c, users)
    scope = "intra_only" if scheme == "partial_chan_est" else "all_users"
    if mimo:
        pil, sweep = data.csi_training()
        return estimate_csi(sweep[c], data.cb, pil.scaled(users), users,
                            joint_ls=data.cfg.joint_ls_csi, scope=scope)
    return estimate_csi(data.sweep[c], data.cb, data.pilots.scaled(users), users,
                        joint_ls=data.cfg.joint_ls_csi, scope=scope)


def _csi_context(csi, cfg, g, filters=None):
    d, cas = csi.effective(g[csi.users])
    return ObjectiveContext.from_channels(
        d, cas, cfg.powers[csi.users], cfg.noise_var, n_served=cfg.users_per_cell,
        filters=filters, mode="true_csi" if csi.scope == "true" else "estimated_csi")


def _mmse_filters(csi, cfg, g, w):
    d, cas = csi.effective(g[csi.users])
    h = d + cas @ w
    p = cfg.powers[csi.users]
    return np.stack([mmse_filter(h, p, cfg.noise_var, k) for k in range(cfg.users_per_cell)])


def _direct_context(data, c, scheme):
    """Training-only knowledge of BTS ``c``; interferer pilots only if central."""
    cfg = data.cfg
    y0, y_can = data.canonical(c)
    own = data.pilots.scaled(cfg.cell_users(c))
    if scheme == "direct_central":
        return ObjectiveContext.from_training(
            y0, y_can, own, cfg.assumed_noise_var,
            interferer_pilots=data.pilots.scaled(cfg.other_users(c)))
    if scheme == "direct_decentral":
        return ObjectiveContext.from_training(y0, y_can, own, cfg.assumed_noise_var)
    if scheme == "ls_obj":
        return ObjectiveContext.from_training(y0, y_can, own, mode="ls_residual")
    raise ValueError(f"{scheme!r} has no direct objective")


def _optimize(ctx, settings, rng=None):
    prob = phase_problem(ctx)
    phi, trace = optimize_phases(prob, prob.n, settings, grad=prob.grad, rng=rng)
    return np.exp(1j * phi), trace


def _random_w(data):
    rng = np.random.default_rng(data.seeds.theta)
    return np.exp(2j * np.pi * rng.random((data.cfg.num_cells, data.cfg.n_irs)))


def _ls_cell_filters(y, pilots_own):
    v, used_pinv = ls_filters(y, pilots_own.T)
    return v.T, used_pinv


def _direct_irs_step(data, scheme, settings):
    """Per-cell IRS weights and LS filters from the shared codebook sweep."""
    cfg = data.cfg
    C, K, M = cfg.num_cells, cfg.users_per_cell, cfg.bts_antennas
    w = np.empty((C, cfg.n_irs), dtype=complex)
    v = np.empty((C, K, M), dtype=complex)
    flags = dict(stalled=0, pinv=0)
    iterations = 0
    w_rand = _random_w(data) if scheme == "random_theta" else None
    for c in range(C):
        if scheme == "random_theta":
            w[c] = w_rand[c]
        else:
            w[c], trace = _optimize(_direct_context(data, c, scheme), settings)
            flags["stalled"] += trace.stalled
            iterations += trace.iterations
        y0, y_can = data.canonical(c)
        v[c], used = _ls_cell_filters(synthesize_yw(y0, y_can, w[c]),
                                      data.pilots.scaled(cfg.cell_users(c)))
        flags["pinv"] += used
    return w, v, iterations, flags


# --------------------------------------------------------------------------
# schemes


def run_miso_scheme(scheme, data, settings=OptimizerSettings()):
    """One-shot MISO pipeline: a single UL codebook sweep, then optimization.

    CSI schemes maximize the UL sum rate with MMSE filters inside the
    objective (joint in ``w`` and ``V``); direct schemes maximize their
    training-based objective with LS filters inside it.
    """
    cfg = data.cfg
    if cfg.ue_antennas != 1:
        raise ValueError("run_miso_scheme needs ue_antennas == 1")
    training = cfg.pilot_len * (cfg.n_irs + 1)
    g = np.ones((cfg.num_users, 1), dtype=complex)
    if scheme in CSI_SCHEMES:
        C, K, M = cfg.num_cells, cfg.users_per_cell, cfg.bts_antennas
        w = np.empty((C, cfg.n_irs), dtype=complex)
        v = np.empty((C, K, M), dtype=complex)
        flags = dict(stalled=0)
        iterations = 0
        for c in range(C):
            csi = _cell_csi(data, c, scheme)
            w[c], trace = _optimize(_csi_context(csi, cfg, g), settings)
            v[c] = _mmse_filters(csi, cfg, g, w[c])
            flags["stalled"] += trace.stalled
            iterations += trace.iterations
        return _finish(scheme, data, w, v, g, g, training, iterations, flags)
    if scheme in DIRECT_SCHEMES:
        w, v, iterations, flags = _direct_irs_step(data, scheme, settings)
        return _finish(scheme, data, w, v, g, g, training, iterations, flags)
    raise ValueError(f"unknown scheme {scheme!r}")


def _dl_combiners(csis, cfg, w, v, g_prev):
    """DL MMSE combiners from channel knowledge, returned as UL precoders.

    UE ``u`` accounts for the streams of every BTS whose CSI covers ``u``
    (all BTSs in the full scheme, its own BTS under partial estimation).
    """
    f = dl_precoders(v, cfg.powers)
    nt = cfg.ue_antennas
    g = np.array(g_prev, dtype=complex)
    for u in range(cfg.num_users):
        c_own, k_own = divmod(u, cfg.users_per_cell)
        cov = cfg.noise_var * np.eye(nt, dtype=complex)
        desired = own = None
        for c, csi in enumerate(csis):
            pos = np.flatnonzero(csi.users == u)
            if pos.size == 0:
                continue
            h = csi.composite(w[c])[pos[0]]  # (M, NT)
            a = h.T @ f[c].T  # (NT, K)
            cov += a @ a.conj().T
            if c == c_own:
                desired, own = a[:, k_own], h
        comb = np.linalg.solve(cov, desired) if desired is not None else np.zeros(nt)
        norm = np.linalg.norm(comb)
        if norm > 0 and np.isfinite(norm):
            g[u] = comb.conj() / norm
        elif own is not None and np.linalg.norm(own) > 0:
            # zero filter at the serving BTS: beam along the strongest own mode
            g[u] = np.linalg.svd(own)[2][0].conj()
    return g


def _eigen_precoders(csis, cfg, w, g_prev):
    """Dominant right singular vector of each UE's channel to its own BTS."""
    g = np.array(g_prev, dtype=complex)
    for u in range(cfg.num_users):
        c = cfg.cell_of(u)
        pos = np.flatnonzero(csis[c].users == u)
        h = csis[c].composite(w[c])[pos[0]]
        if np.linalg.norm(h) > 0:
            g[u] = np.linalg.svd(h)[2][0].conj()
    return g


def max_sinr_alternate(csis, cfg, settings=OptimizerSettings(), n_alt=None):
    """CSI-based alternating optimization of IRS weights and filters.

    Starts from the joint (w, MMSE V) optimum for the initial precoders,
    then repeats `n_alt` times: MMSE UL filters for fixed ``w``; DL MMSE
    combiners (used as UL precoders); gradient ascent on ``w`` with the
    filters fixed, started from the current ``w``.

    Returns
    -------
    w : ndarray (C, N)
    v : ndarray (C, K, M)
    g : ndarray (U, N_T)
    info : dict
        ``history`` holds the CSI-evaluated UL sum rate (summed over cells,
        MMSE filters) after the start and after every alternation.
    """
    n_alt = cfg.n_alt if n_alt is None else int(n_alt)
    C = cfg.num_cells
    g = initial_precoders(cfg)
    w = np.empty((C, cfg.n_irs), dtype=complex)
    info = dict(history=[], iterations=0, stalled=0)

    def total():
        return sum(csi_objective(_csi_context(csis[c], cfg, g), w[c]) for c in range(C))

    for c in range(C):
        w[c], trace = _optimize(_csi_context(csis[c], cfg, g), settings)
        info["iterations"] += trace.iterations
        info["stalled"] += trace.stalled
    if cfg.ue_antennas > 1:
        # restart from each UE's strongest own mode, then re-fit w jointly
        g = _eigen_precoders(csis, cfg, w, g)
        for c in range(C):
            prob = phase_problem(_csi_context(csis[c], cfg, g))
            phi, trace = ascend(prob, np.angle(w[c]), settings, grad=prob.grad)
            w[c] = np.exp(1j * phi)
            info["iterations"] += trace.iterations
            info["stalled"] += trace.stalled
    info["history"].append(total())
    for _ in range(n_alt):
        v = np.stack([_mmse_filters(csis[c], cfg, g, w[c]) for c in range(C)])
        if cfg.ue_antennas > 1:
            g = _dl_combiners(csis, cfg, w, v, g)
        for c in range(C):
            prob = phase_problem(_csi_context(csis[c], cfg, g, filters=v[c]))
            phi, trace = ascend(prob, np.angle(w[c]), settings, grad=prob.grad)
            w[c] = np.exp(1j * phi)
            info["iterations"] += trace.iterations
            info["stalled"] += trace.stalled
        info["history"].append(total())
    v = np.stack([_mmse_filters(csis[c], cfg, g, w[c]) for c in range(C)])
    return w, v, g, info


def bidirectional_train(data, scheme, settings=OptimizerSettings()):
    """Synchronized bi-directional training (IRS fixed after the first step).

    1. All UEs send pilots with the initial precoders over the codebook
       sweep; each BTS picks ``w`` and LS filters from its own data.
    2. ``n_fb`` times: every BTS sends ``sum_k conj(v_k)/||v_k|| sigma_k
       b_k^H``; each UE sets ``g = conj(LS filter)``. Then every UE sends
       ``g/||g|| sigma b^H`` and each BTS recomputes its LS filters.

    ``random_theta`` skips the IRS optimization and uses random phases.
    Returns ``(w, v, g, result)``.
    """
    cfg = data.cfg
    real = data.real
    w, v, iterations, flags = _direct_irs_step(data, scheme, settings)
    g = initial_precoders(cfg)
    g_dl = g.copy()
    if cfg.n_fb:
        fwd = gen_pilots(cfg, data.seeds.dl_pilots, direction="downlink")
        fwd_b = fwd.scaled()
        bwd_b = data.pilots.scaled()
        noise = np.random.SeedSequence(data.seeds.fb_noise).spawn(2 * cfg.n_fb)
        for n in range(cfg.n_fb):
            f_unit = dl_precoders(v, np.ones(cfg.num_users))
            y_fwd = simulate_dl_block(real, fwd, f_unit, w, noise[2 * n], cfg.noise_var)
            for u in range(cfg.num_users):
                comb, used = ls_filters(y_fwd[u], fwd_b[u][:, None])
                g_dl[u] = comb[:, 0].conj()
                flags["pinv"] += used
            norms = np.linalg.norm(g_dl, axis=1, keepdims=True)
            g = np.where(norms > 0, g_dl / np.where(norms > 0, norms, 1.0), g)
            y_bwd = simulate_ul_block(real, data.pilots, g, w, noise[2 * n + 1], cfg.noise_var)
            for c in range(cfg.num_cells):
                v[c], used = _ls_cell_filters(y_bwd[c], bwd_b[cfg.cell_users(c)])
                flags["pinv"] += used
    training = cfg.pilot_len * (cfg.n_irs + 1 + 2 * cfg.n_fb)
    result = _finish(scheme, data, w, v, g, g_dl, training, iterations, flags)
    return w, v, g, result


def run_mimo_scheme(scheme, data, settings=OptimizerSettings()):
    """MIMO pipelines: Max-SINR alternation for CSI schemes, bi-directional
    training for the direct ones."""
    cfg = data.cfg
    if scheme in CSI_SCHEMES:
        csis = [_cell_csi(data, c, scheme, mimo=True) for c in range(cfg.num_cells)]
        w, v, g, info = max_sinr_alternate(csis, cfg, settings)
        flags = dict(stalled=info["stalled"])
        return _finish(scheme, data, w, v, g, g, cfg.pilot_len * (cfg.n_irs + 1),
                       info["iterations"], flags)
    if scheme in DIRECT_SCHEMES:
        return bidirectional_train(data, scheme, settings)[3]
    raise ValueError(f"unknown scheme {scheme!r}")


def run_scheme(scheme, real, cfg, seeds, settings=OptimizerSettings(), data=None):
    """Run one scheme on one trial; builds the shared trial data if needed."""
    if data is None:
        data = prepare_trial(cfg, seeds, real=real)
    if cfg.ue_antennas == 1:
        return run_miso_scheme(scheme, data, settings)
    return run_mimo_scheme(scheme, data, settings)
