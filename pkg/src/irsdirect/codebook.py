"""IRS training codebooks and canonical-set reconstruction.

A unitary-family codebook switches on every IRS element in every epoch. The
received blocks of the N_IRS + 1 epochs can be linearly recombined into the
blocks that *would* have been received with only one element on (or none),
which is all the direct objectives need.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

__all__ = ["Codebook", "build_codebook", "reconstruct_canonical", "synthesize_yw"]


@dataclass(frozen=True)
class Codebook:
    """Training configurations of the IRS.

    Attributes
    ----------
    kind : {'canonical', 'dft', 'hadamard'}
    A : ndarray or None, shape (N+1, N+1)
        Unnormalized symmetric mixing matrix with ``A @ A.conj() == (N+1) I``
        and all-ones first row and column. ``None`` for the canonical set.
    thetas : ndarray, shape (N+1, N)
        ``thetas[j]`` is the IRS reflection vector used in epoch ``j``.
    """

    kind: str
    A: np.ndarray | None
    thetas: np.ndarray

    @property
    def n_irs(self):
        return self.thetas.shape[1]

    @property
    def n_epochs(self):
        return self.thetas.shape[0]


def build_codebook(n_irs, kind="dft"):
    """Build the N_IRS + 1 epoch training codebook.

    For the unitary kinds, epoch ``j`` uses the conjugate of entries
    ``1..N`` of column ``j`` of `A` (entry 0 belongs to the direct path).

    Raises
    ------
    ValueError
        For an unknown kind, or a Hadamard size that is not a power of two.
    """
    n = int(n_irs)
    if n < 0:
        raise ValueError(f"n_irs must be >= 0, got {n_irs}")
    size = n + 1
    if kind == "canonical":
        thetas = np.vstack([np.eye(n, dtype=complex), np.zeros((1, n), dtype=complex)])
        return Codebook("canonical", None, thetas)
    if kind == "dft":
        idx = np.arange(size)
        A = np.exp(-2j * np.pi * np.outer(idx, idx) / size)
    elif kind == "hadamard":
        if size & (size - 1):
            valid = ", ".join(str(2 ** p - 1) for p in range(1, 8))
            raise ValueError(
                f"no Hadamard matrix of order {size} available (n_irs={n}); "
                f"n_irs + 1 must be a power of two, e.g. n_irs in {{{valid}, ...}}"
            )
        A = hadamard(size).astype(complex)
    else:
        raise ValueError(f"unknown codebook kind {kind!r}")
    thetas = A[1:, :].T.conj().copy()
    return Codebook(kind, A, thetas)


def reconstruct_canonical(y_epochs, cb):
    """Recover direct-only and single-element receptions from a codebook sweep.

    Parameters
    ----------
    y_epochs : array_like, shape (N+1, M, T)
        Received block of every epoch, in codebook order.
    cb : Codebook

    Returns
    -------
    y0 : ndarray, shape (M, T)
        Reception with all IRS elements off.
    y_can : ndarray, shape (N, M, T)
        ``y_can[j]`` is the reception with only element ``j`` on (unit gain).
    """
    y = np.asarray(y_epochs)
    if y.ndim != 3 or y.shape[0] != cb.n_epochs:
        raise ValueError(
            f"expected {cb.n_epochs} epochs of shape (M, T), got array of shape {y.shape}"
        )
    if cb.kind == "canonical":
        return y[-1].copy(), y[:-1].copy()
    mixed = np.einsum("pmt,pq->qmt", y, cb.A) / cb.n_epochs
    y0 = mixed[0]
    return y0, mixed[1:] + y0


def synthesize_yw(y0, y_can, w):
    """Reception for IRS weights `w`, affine in `w`.

    ``y_w = y0 + sum_j w_j (y_can[j] - y0)``.
    """
    w = np.asarray(w)
    y_can = np.asarray(y_can)
    if w.shape != (y_can.shape[0],):
        raise ValueError(f"w must have shape ({y_can.shape[0]},), got {w.shape}")
    return y0 + np.tensordot(w, y_can - y0, axes=1)
