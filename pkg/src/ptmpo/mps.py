"""Internal matrix-product-state machinery.

Sites are rank-3 arrays [left-bond, physical, right-bond]. Gauge moves
optionally maintain a list of per-bond cap vectors: a cap on bond b is a
vector that closes the chain built from sites < b, and every transform
of bond b updates it so that (left block) . cap stays invariant:

  * left-to-right QR at site p changes bond p+1 by A -> A R^{-1} Q-side,
    so cap <- R cap;
  * right-to-left truncated SVD at site p absorbs U s leftward, so
    cap <- s^+ U^+ cap (pseudo-inverse over kept singular values).
"""

from typing import List, Optional

import numpy as np

from ptmpo.tensor import SvdTruncation, svd_truncate


def qr_step_l2r(sites: List[np.ndarray], pos: int,
                caps: Optional[List[np.ndarray]] = None) -> None:
    """Left-canonicalize site ``pos``, pushing R into site pos+1."""
    t = sites[pos]
    l, p, r = t.shape
    q, rm = np.linalg.qr(t.reshape(l * p, r))
    k = q.shape[1]
    sites[pos] = q.reshape(l, p, k)
    nxt = sites[pos + 1]
    ln, pn, rn = nxt.shape
    sites[pos + 1] = (rm @ nxt.reshape(ln, pn * rn)).reshape(-1, pn, rn)
    if caps is not None and caps[pos + 1] is not None:
        caps[pos + 1] = rm @ caps[pos + 1]


def svd_step_r2l(sites: List[np.ndarray], pos: int, trunc: SvdTruncation,
                 caps: Optional[List[np.ndarray]] = None) -> float:
    """Right-canonicalize site ``pos`` with truncation, absorbing U s into
    site pos-1. Returns the discarded weight."""
    t = sites[pos]
    l, p, r = t.shape
    u, s, v, discarded = svd_truncate(t.reshape(l, p * r), trunc)
    k = len(s)
    sites[pos] = v.conj().T.reshape(k, p, r)
    us = u * s
    prev = sites[pos - 1]
    lp, pp, rp = prev.shape
    sites[pos - 1] = (prev.reshape(lp * pp, rp) @ us).reshape(lp, pp, k)
    if caps is not None and caps[pos] is not None:
        caps[pos] = (u.conj().T @ caps[pos]) / s
    return discarded


def compress_window(sites: List[np.ndarray], start: int, end: int,
                    trunc: SvdTruncation,
                    caps: Optional[List[np.ndarray]] = None) -> float:
    """One QR sweep left-to-right then one truncated SVD sweep right-to-left
    over sites start..end (inclusive). Leaves the window right-canonical
    (up to site start). Returns accumulated discarded weight."""
    for pos in range(start, end):
        qr_step_l2r(sites, pos, caps)
    discarded = 0.0
    for pos in range(end, start, -1):
        discarded += svd_step_r2l(sites, pos, trunc, caps)
    return discarded


def bond_dimensions(sites: List[np.ndarray]) -> List[int]:
    """Bond extents chi_0 ... chi_L (including both edges)."""
    dims = [sites[0].shape[0]]
    for t in sites:
        dims.append(t.shape[2])
    return dims
