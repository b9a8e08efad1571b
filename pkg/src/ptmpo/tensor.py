"""Dense complex tensor primitives: contraction and truncated SVD.

All tensors are numpy ``complex128`` arrays in row-major (C) order; this
fixes the linear layout used by the file format and by the test oracles.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np


class NumericsError(RuntimeError):
    """Raised when a numeric routine fails (e.g. SVD non-convergence)."""


@dataclass(frozen=True)
class SvdTruncation:
    """Relative singular-value cutoff for all MPO/MPS compressions.

    Singular values ``s_i >= epsrel * s_0`` are kept (ties are kept, not
    dropped, for deterministic behavior across platforms).
    """

    epsrel: float
    max_rank: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.epsrel < 1.0:
            raise ValueError(f"epsrel must be in (0, 1), got {self.epsrel}")
        if self.max_rank is not None and self.max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {self.max_rank}")


def contract(
        a: np.ndarray,
        b: np.ndarray,
        axes: Sequence[Tuple[int, int]],
) -> np.ndarray:
    """Contract tensors ``a`` and ``b`` over the given axis pairs.

    The result carries the unpaired axes of ``a`` followed by those of
    ``b``, in their original order. An empty ``axes`` list yields the
    outer product.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes = list(axes)
    for ia, ib in axes:
        if not -a.ndim <= ia < a.ndim:
            raise IndexError(f"axis {ia} out of range for rank-{a.ndim} tensor")
        if not -b.ndim <= ib < b.ndim:
            raise IndexError(f"axis {ib} out of range for rank-{b.ndim} tensor")
        if a.shape[ia] != b.shape[ib]:
            raise ValueError(
                f"extent mismatch: a.shape[{ia}]={a.shape[ia]} vs "
                f"b.shape[{ib}]={b.shape[ib]}")
    if axes:
        ax_a, ax_b = zip(*axes)
    else:
        ax_a, ax_b = (), ()
    return np.tensordot(a, b, axes=(ax_a, ax_b))


def svd_truncate(
        m: np.ndarray,
        trunc: SvdTruncation,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Rank-revealing truncated SVD of a matrix.

    Returns ``(U, s, V, discarded_weight)`` with ``m ~ U @ diag(s) @ V.conj().T``
    and ``discarded_weight`` the squared Frobenius norm of the dropped part.
    A zero (or empty-rank) matrix yields rank-0 factors.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"svd_truncate requires a rank-2 tensor, got rank {m.ndim}")
    if m.size == 0:
        raise ValueError("svd_truncate: empty matrix")
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericsError("SVD failed to converge") from e
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s >= trunc.epsrel * s[0]))
    if trunc.max_rank is not None:
        rank = min(rank, trunc.max_rank)
    discarded = float(np.sum(s[rank:] ** 2))
    return u[:, :rank], s[:rank], vh[:rank].conj().T, discarded
