"""SINR and sum-rate objectives as functions of the IRS weights ``w``.

Two families:

* CSI objectives use (true or estimated) affine channels ``h_s(w) = d_s + C_s w``
  and either MMSE filters optimized inside the objective or fixed filters.
* Direct objectives use only a BTS's reconstructed training blocks and the
  pilots it knows. ``y_w`` is affine in ``w`` and the LS filter is implicit.

Every objective has a gradient with respect to the IRS phases ``phi``
(``w = exp(1j * phi)``). With ``F = dF/d conj(Y)`` the chain rule gives
``dF/dphi_j = -2 Im(w_j <F, dY/dw_j>)``, which is what all ``*_grad``
functions evaluate.
"""

from dataclasses import dataclass

import numpy as np

from .filters import GRAM_COND_LIMIT

__all__ = [
    "ObjectiveContext",
    "true_sinr",
    "sum_rate",
    "direct_sinrs",
    "direct_objective",
    "direct_objective_grad",
    "ls_objective",
    "ls_objective_grad",
    "csi_objective",
    "csi_objective_grad",
    "PhaseProblem",
    "phase_problem",
    "LS_RESIDUAL_FLOOR",
]

LOG2E = 1.0 / np.log(2.0)
LS_RESIDUAL_FLOOR = 1e-12

DIRECT_MODES = ("direct_central", "direct_decentral")
CSI_MODES = ("true_csi", "estimated_csi")


def true_sinr(composites, v, k, powers, noise_var):
    """UL SINR of user `k` with receive filter `v`.

    `composites` has shape (U, M) and lists every user the BTS hears, intra-
    and other-cell alike; all of them except `k` count as interference.
    """
    h = np.asarray(composites)
    v = np.asarray(v)
    p = np.asarray(powers, dtype=float)
    gains = np.abs(h @ v.conj()) ** 2 * p
    signal = gains[k]
    if signal == 0.0:
        return 0.0
    return float(signal / (gains.sum() - signal + noise_var * np.real(np.vdot(v, v))))


def sum_rate(sinrs):
    return float(np.sum(np.log2(1.0 + np.asarray(sinrs, dtype=float))))


@dataclass(frozen=True)
class ObjectiveContext:
    """What one BTS knows when it optimizes its IRS.

    Direct modes hold training data: ``y0`` (M, T), ``y_diff`` (N, M, T)
    with ``y_diff[j] = y_can[j] - y0``, and the amplitude-scaled pilots
    ``pilots`` (K, T) of the served users. The centralized mode also holds
    ``interferer_pilots``; the decentralized and LS modes never have them.

    CSI modes hold affine SIMO channels ``direct`` (S, M) and ``cascade``
    (S, M, N) with the ``n_served`` served users first, their ``powers``,
    and optionally fixed receive ``filters`` (n_served, M).
    """

    mode: str
    noise_var: float | None = None
    y0: np.ndarray | None = None
    y_diff: np.ndarray | None = None
    pilots: np.ndarray | None = None
    interferer_pilots: np.ndarray | None = None
    direct: np.ndarray | None = None
    cascade: np.ndarray | None = None
    powers: np.ndarray | None = None
    n_served: int | None = None
    filters: np.ndarray | None = None

    @classmethod
    def from_training(cls, y0, y_can, pilots, noise_var=None, interferer_pilots=None,
                      mode=None):
        """Direct-mode context; the mode follows from the data if not given."""
        if mode is None:
            mode = "direct_decentral" if interferer_pilots is None else "direct_central"
        if mode not in DIRECT_MODES + ("ls_residual",):
            raise ValueError(f"{mode!r} is not a training-based mode")
        if mode == "direct_central" and interferer_pilots is None:
            raise ValueError("direct_central needs the interferers' pilots")
        if mode != "direct_central" and interferer_pilots is not None:
            raise ValueError(f"{mode} must not be given interferer pilots")
        if mode != "ls_residual" and noise_var is None:
            raise ValueError(f"{mode} needs an assumed noise variance")
        y0 = np.asarray(y0)
        y_can = np.asarray(y_can)
        return cls(mode=mode, noise_var=noise_var, y0=y0, y_diff=y_can - y0,
                   pilots=np.atleast_2d(pilots), interferer_pilots=interferer_pilots)

    @classmethod
    def from_channels(cls, direct, cascade, powers, noise_var, n_served=None,
                      filters=None, mode="true_csi"):
        if mode not in CSI_MODES:
            raise ValueError(f"{mode!r} is not a CSI mode")
        direct = np.asarray(direct)
        n_served = direct.shape[0] if n_served is None else int(n_served)
        return cls(mode=mode, noise_var=float(noise_var), direct=direct,
                   cascade=np.asarray(cascade), powers=np.asarray(powers, dtype=float),
                   n_served=n_served, filters=filters)

    @property
    def n_irs(self):
        if self.y_diff is not None:
            return self.y_diff.shape[0]
        return self.cascade.shape[2]

    def with_filters(self, filters):
        return ObjectiveContext(**{**self.__dict__, "filters": np.asarray(filters)})

    def yw(self, w):
        return self.y0 + np.tensordot(np.asarray(w), self.y_diff, axes=1)

    def known_pilots(self):
        """Pilot columns (T, S), served users first."""
        if self.mode == "direct_central":
            return np.concatenate([self.pilots, self.interferer_pilots]).T
        return self.pilots.T


# --------------------------------------------------------------------------
# direct objectives


def _projection_terms(y, b, n_served):
    """Statistics of the LS fit of every pilot column of `b` onto `y`.

    Returns a dict with the LS filters ``z`` (M, S), cross statistics
    ``p[k, s] = b_k^H P b_s`` (K, S), residuals ``r`` (T, S) and the
    regime: ``'gram'`` (y y^H invertible), ``'tall'`` (y^H y invertible,
    so P = I) or ``'degenerate'``.
    """
    m, t = y.shape
    u = y @ b
    if t >= m:
        gram = y @ y.conj().T
        if np.linalg.cond(gram) < GRAM_COND_LIMIT:
            z = np.linalg.solve(gram, u)
            return dict(regime="gram", gram=gram, z=z, p=u[:, :n_served].conj().T @ z,
                        r=b - y.conj().T @ z)
    else:
        inner = y.conj().T @ y
        if np.linalg.cond(inner) < GRAM_COND_LIMIT:
            s = np.linalg.solve(inner, b)
            z = y @ s
            return dict(regime="tall", s=s, z=z, p=b[:, :n_served].conj().T @ b,
                        r=np.zeros_like(b))
    z = np.linalg.lstsq(y.conj().T, b, rcond=None)[0]
    return dict(regime="degenerate", z=z, p=u[:, :n_served].conj().T @ z,
                r=b - y.conj().T @ z)


def _direct_parts(ctx, w):
    if ctx.mode not in DIRECT_MODES:
        raise ValueError(f"direct objective needs a direct mode, got {ctx.mode!r}")
    y = ctx.yw(w)
    b = ctx.known_pilots()
    t = b.shape[0]
    k = ctx.pilots.shape[0]
    pw = np.sum(np.abs(b) ** 2, axis=0) / t  # sigma_s^2 of every known user
    st = _projection_terms(y, b, k)
    p = st["p"]
    num = np.real(np.diagonal(p)) ** 2 / pw[:k]
    cross = np.abs(p) ** 2 / pw[None, :]
    cross[np.arange(k), np.arange(k)] = 0.0
    q = np.sum(np.abs(st["z"][:, :k]) ** 2, axis=0)
    den = cross.sum(axis=1) + t * t * ctx.noise_var * q
    return y, b, pw, st, num, den


def direct_sinrs(ctx, w):
    """Sample-based SINR estimates gamma_k(w) of the served users."""
    _, _, _, _, num, den = _direct_parts(ctx, w)
    # num == 0 covers the all-zero block, where den vanishes too
    return np.divide(num, den, out=np.zeros_like(num), where=num > 0)


def direct_objective(ctx, w):
    """Estimated sum rate ``sum_k log2(1 + gamma_k(w))`` from training data.

    The decentralized mode counts only intra-cell cross terms; the
    centralized mode adds the terms of the other-cell users.
    """
    return sum_rate(direct_sinrs(ctx, w))


def _phase_grad(psi, w, y_diff):
    c = np.einsum("mt,jmt->j", psi.conj(), y_diff)
    return -2.0 * np.imag(np.asarray(w) * c)


def direct_objective_grad(ctx, w):
    """Gradient of `direct_objective` with respect to the IRS phases."""
    y, b, pw, st, num, den = _direct_parts(ctx, w)
    k = ctx.pilots.shape[0]
    t = b.shape[0]
    gamma = num / den
    c = LOG2E / (1.0 + gamma)
    beta = c * num / den**2
    z = st["z"]
    zk = z[:, :k]
    noise_w = t * t * ctx.noise_var

    if st["regime"] == "gram":
        p = st["p"]
        r = st["r"]
        rk = r[:, :k]
        alpha = c * 2.0 * np.real(np.diagonal(p)) / pw[:k] / den
        wgt = p / pw[None, :]
        wgt[np.arange(k), np.arange(k)] = 0.0
        gram_inv_zk = np.linalg.solve(st["gram"], zk)
        psi = (zk * alpha) @ rk.conj().T
        psi -= zk @ (beta[:, None] * wgt) @ r.conj().T
        psi -= z @ (wgt.conj().T * beta[None, :]) @ rk.conj().T
        psi -= noise_w * ((gram_inv_zk * beta) @ rk.conj().T
                          - (zk * beta) @ gram_inv_zk.conj().T @ y)
        return _phase_grad(psi, w, ctx.y_diff)
    if st["regime"] == "tall":
        s = st["s"][:, :k]
        psi = noise_w * (y @ (s * beta) @ s.conj().T)
        return _phase_grad(psi, w, ctx.y_diff)
    return _fd_grad(lambda ww: direct_objective(ctx, ww), w)


def _ls_parts(ctx, w):
    if ctx.mode != "ls_residual":
        raise ValueError(f"LS objective needs mode 'ls_residual', got {ctx.mode!r}")
    y = ctx.yw(w)
    b = ctx.pilots.T
    st = _projection_terms(y, b, b.shape[1])
    res = np.sum(np.abs(st["r"]) ** 2, axis=0)
    return y, st, res


def ls_objective(ctx, w, full_output=False):
    """``sum_k log2(b_k^H (I - P) b_k)``; to be *minimized*.

    Residuals below ``LS_RESIDUAL_FLOOR`` are clamped to it. With
    ``full_output=True`` the number of clamped users is returned as well.
    """
    _, _, res = _ls_parts(ctx, w)
    clamped = res < LS_RESIDUAL_FLOOR
    value = float(np.sum(np.log2(np.where(clamped, LS_RESIDUAL_FLOOR, res))))
    if full_output:
        return value, int(clamped.sum())
    return value


def ls_objective_grad(ctx, w):
    """Gradient of `ls_objective` with respect to the IRS phases."""
    y, st, res = _ls_parts(ctx, w)
    if st["regime"] == "tall":
        return np.zeros(ctx.n_irs)
    if st["regime"] == "degenerate":
        return _fd_grad(lambda ww: ls_objective(ctx, ww), w)
    coef = np.where(res < LS_RESIDUAL_FLOOR, 0.0, LOG2E / np.maximum(res, LS_RESIDUAL_FLOOR))
    psi = -(st["z"] * coef) @ st["r"].conj().T
    return _phase_grad(psi, w, ctx.y_diff)


# --------------------------------------------------------------------------
# CSI objectives


def _csi_channels(ctx, w):
    if ctx.mode not in CSI_MODES:
        raise ValueError(f"CSI objective needs a CSI mode, got {ctx.mode!r}")
    return ctx.direct + ctx.cascade @ np.asarray(w)  # (S, M)


def csi_sinrs(ctx, w):
    """UL SINRs of the served users from the context's channels.

    Uses MMSE filters unless the context carries fixed ``filters``.
    """
    h = _csi_channels(ctx, w)
    p = ctx.powers
    k = ctx.n_served
    if ctx.filters is not None:
        return np.array([true_sinr(h, ctx.filters[i], i, p, ctx.noise_var) for i in range(k)])
    cov = (h.T * p) @ h.conj() + ctx.noise_var * np.eye(h.shape[1])
    x = np.linalg.solve(cov, h[:k].T)
    q = p[:k] * np.real(np.einsum("km,mk->k", h[:k].conj(), x))
    return q / (1.0 - q)


def csi_objective(ctx, w):
    """UL sum rate of the served users evaluated with the context's channels."""
    return sum_rate(csi_sinrs(ctx, w))


def csi_objective_grad(ctx, w):
    """Gradient of `csi_objective` with respect to the IRS phases."""
    w = np.asarray(w)
    h = _csi_channels(ctx, w)
    p = ctx.powers
    k = ctx.n_served
    if ctx.filters is None:
        hm = h.T  # (M, S)
        cov = (hm * p) @ hm.conj().T + ctx.noise_var * np.eye(hm.shape[0])
        x = np.linalg.solve(cov, hm[:, :k])
        err = 1.0 - p[:k] * np.real(np.einsum("mk,mk->k", hm[:, :k].conj(), x))
        rho = p[:k] / err
        q = hm.conj().T @ x  # (S, K): h_s^H x_k
        beta = -(x * rho) @ q.conj().T * p[None, :]
        beta[:, :k] += x * rho
        beta *= LOG2E
        c = np.einsum("ms,smj->j", beta.conj(), ctx.cascade)
    else:
        v = np.asarray(ctx.filters)
        t = v.conj() @ h.T  # (K, S)
        a = np.abs(t) ** 2
        total = a @ p + ctx.noise_var * np.sum(np.abs(v) ** 2, axis=1)
        interf = total - p[:k] * a[np.arange(k), np.arange(k)]
        mask = np.ones_like(a)
        mask[np.arange(k), np.arange(k)] = 0.0
        # a zero filter gives a constant zero rate
        live = (total > 0) & (interf > 0)
        inv_t = np.divide(1.0, total, out=np.zeros_like(total), where=live)
        inv_i = np.divide(1.0, interf, out=np.zeros_like(interf), where=live)
        omega = LOG2E * p[None, :] * (inv_t[:, None] - mask * inv_i[:, None])
        bh = (omega * t.conj()).T @ v.conj()  # (S, M)
        c = np.einsum("mi,mij->j", bh, ctx.cascade)
    return -2.0 * np.imag(w * c)


# --------------------------------------------------------------------------


def _fd_grad(f, w, step=1e-6):
    phi = np.angle(w)
    g = np.empty(phi.size)
    for j in range(phi.size):
        e = np.zeros(phi.size)
        e[j] = step
        g[j] = (f(np.exp(1j * (phi + e))) - f(np.exp(1j * (phi - e)))) / (2 * step)
    return g


@dataclass(frozen=True)
class PhaseProblem:
    """Maximization problem in the IRS phases for `phaseopt`."""

    value_w: object
    grad_w: object
    n: int
    sign: float = 1.0

    def __call__(self, phi):
        return self.sign * self.value_w(np.exp(1j * np.asarray(phi)))

    def grad(self, phi):
        return self.sign * self.grad_w(np.exp(1j * np.asarray(phi)))


def phase_problem(ctx):
    """Wrap a context as a phase-maximization problem (LS objective negated)."""
    if ctx.mode in DIRECT_MODES:
        return PhaseProblem(lambda w: direct_objective(ctx, w),
                            lambda w: direct_objective_grad(ctx, w), ctx.n_irs)
    if ctx.mode == "ls_residual":
        return PhaseProblem(lambda w: ls_objective(ctx, w),
                            lambda w: ls_objective_grad(ctx, w), ctx.n_irs, sign=-1.0)
    return PhaseProblem(lambda w: csi_objective(ctx, w),
                        lambda w: csi_objective_grad(ctx, w), ctx.n_irs)
