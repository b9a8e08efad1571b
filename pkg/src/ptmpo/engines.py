"""Influence-network contraction engines.

Both engines contract the same discretized influence-functional network.
``tempo_compute`` works row by row, carrying an augmented-density-tensor
MPS over the memory window and yielding dynamics directly.
``pt_tempo_compute`` works column by column and yields a reusable
ProcessTensor in MPO form.

All influence factors are diagonal in the coupling-operator eigenbasis:
with eigenvalues s and a Liouville pair i = (j, j'), the lag-k factor is

    b_k(i_later, i_earlier) = exp(-diff(i_later) * drive_k(i_earlier)),
    diff(i)    = s_j - s_j',
    drive_k(i) = Re(eta_k) diff(i) + 1j Im(eta_k) (s_j + s_j').

drive_k depends on the earlier pair only through (difference, sum) and
the later pair only through its difference, which is what degeneracy
checking exploits: the message bond that carries one pair's identity to
other sites only needs one state per degeneracy group.
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ptmpo.application import Dynamics
from ptmpo.bath import Bath, EtaCoefficients, degeneracy_map, eta_coefficients
from ptmpo.mps import bond_dimensions, compress_window
from ptmpo.operators import unvectorize, vectorize
from ptmpo.process_tensor import ProcessTensor
from ptmpo.system import System, half_propagators
from ptmpo.tensor import NumericsError, SvdTruncation

_EXP_GUARD = 500.0


@dataclass(frozen=True)
class TempoParameters:
    """Discretization and truncation parameters shared by both engines."""

    dt: float
    epsrel: float
    tcut: Optional[float] = None
    max_rank: Optional[int] = None
    degeneracy: bool = True

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.epsrel < 1.0:
            raise ValueError("epsrel must lie in (0, 1)")
        if self.tcut is not None and self.tcut < self.dt:
            raise ValueError("tcut must be at least dt")

    def k_max(self, n_steps: int) -> int:
        """Memory length in steps, capped by the run length."""
        if self.tcut is None:
            return max(n_steps - 1, 0)
        return min(int(math.ceil(self.tcut / self.dt)), max(n_steps - 1, 0))

    def truncation(self) -> SvdTruncation:
        return SvdTruncation(epsrel=self.epsrel, max_rank=self.max_rank)


class _Influence:
    """Precomputed influence factor tables for a bath discretization."""

    def __init__(self, bath: Bath, eta: EtaCoefficients, use_degeneracy: bool):
        s = bath.eigenvalues
        d = len(s)
        self.d2 = d * d
        self.diff = (s[:, None] - s[None, :]).reshape(-1)
        self.ssum = (s[:, None] + s[None, :]).reshape(-1)
        self.eta = eta.values
        if use_degeneracy:
            dm = degeneracy_map(bath.coupling_operator)
            self.west_index = dm.west_index
            self.north_index = dm.north_index
            self.west_vals = np.array(
                [self.diff[g[0]] for g in dm.west_groups])
            self.north_diff = np.array(
                [self.diff[g[0]] for g in dm.north_groups])
            self.north_sum = np.array(
                [self.ssum[g[0]] for g in dm.north_groups])
        else:
            idx = np.arange(self.d2)
            self.west_index = idx
            self.north_index = idx
            self.west_vals = self.diff.copy()
            self.north_diff = self.diff.copy()
            self.north_sum = self.ssum.copy()
        self.n_west = len(self.west_vals)
        self.n_north = len(self.north_diff)

    def _exp(self, exponent: np.ndarray) -> np.ndarray:
        if np.max(exponent.real) > _EXP_GUARD:
            raise NumericsError("influence exponent overflow; "
                                "check eta coefficients / coupling scale")
        return np.exp(exponent)

    def drive(self, k: int, diff: np.ndarray, ssum: np.ndarray) -> np.ndarray:
        eta = self.eta[k]
        return eta.real * diff + 1j * eta.imag * ssum

    def b0(self) -> np.ndarray:
        """Same-step self-influence, one factor per Liouville pair."""
        return self._exp(-self.diff * self.drive(0, self.diff, self.ssum))

    def north_factors(self, k: int) -> np.ndarray:
        """e[i, g] = b_k(later pair i, earlier north-group g)."""
        drv = self.drive(k, self.north_diff, self.north_sum)
        return self._exp(-np.outer(self.diff, drv))

    def west_factors(self, k: int) -> np.ndarray:
        """f[g, i] = b_k(later west-group g, earlier pair i)."""
        drv = self.drive(k, self.diff, self.ssum)
        return self._exp(-np.outer(self.west_vals, drv))


def _basis_superoperator(bath: Bath) -> np.ndarray:
    """U with vec_eig = U vec_orig for rho_eig = P^+ rho P."""
    p = bath.eigenvectors
    return np.kron(p.conj().T, p.T)


# -- PT-TEMPO: column-by-column -------------------------------------------------


def _absorb_with_message(site: np.ndarray, factors: np.ndarray,
                         carry_left: bool, carry_right: bool) -> np.ndarray:
    """Multiply a site by e[i, g], threading the message bond g through
    whichever bonds carry it (g-major ordering)."""
    l, p, r = site.shape
    n_g = factors.shape[1]
    if carry_left and carry_right:
        out = np.zeros((n_g, l, p, n_g, r), dtype=complex)
        for g in range(n_g):
            out[g, :, :, g, :] = site * factors[None, :, g, None]
        return out.reshape(n_g * l, p, n_g * r)
    if carry_left:
        out = np.einsum("ig,lir->glir", factors, site)
        return out.reshape(n_g * l, p, r)
    if carry_right:
        out = np.einsum("ig,lir->ligr", factors, site)
        return out.reshape(l, p, n_g * r)
    raise ValueError("message must attach to at least one bond")


def pt_tempo_compute(bath: Bath, params: TempoParameters, n_steps: int,
                     metadata: Optional[dict] = None) -> ProcessTensor:
    """Contract the influence network column by column into a PT-MPO."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    d = bath.dimension
    d2 = d * d
    k_max = params.k_max(n_steps)
    eta = eta_coefficients(bath, params.dt, k_max)
    infl = _Influence(bath, eta, params.degeneracy)
    trunc = params.truncation()
    b0 = infl.b0()
    n_g = infl.n_north

    # earliest column last: prepend site m, send its north group to
    # sites m+1 .. m+k_end
    sites: List[np.ndarray] = [b0.reshape(1, d2, 1).astype(complex)]
    selector = np.zeros((d2, n_g), dtype=complex)
    selector[np.arange(d2), infl.north_index] = 1.0
    for m in range(n_steps - 2, -1, -1):
        k_end = min(k_max, n_steps - 1 - m)
        for k in range(1, k_end + 1):
            sites[k - 1] = _absorb_with_message(
                sites[k - 1], infl.north_factors(k),
                carry_left=True, carry_right=(k < k_end))
        new = (b0[:, None] * selector).reshape(1, d2, n_g)
        if k_end == 0:
            new = b0.reshape(1, d2, 1)
        sites.insert(0, new)
        compress_window(sites, 0, k_end, trunc)

    # readout caps: fixing any later pair to a diagonal (j, j) makes all of
    # its influence factors exactly 1, so closing remaining sites with the
    # averaged diagonal selector yields the shorter process tensor
    diag_sel = np.zeros(d2)
    diag_sel[np.arange(d) * d + np.arange(d)] = 1.0 / d
    caps = [None] * (n_steps + 1)
    caps[n_steps] = np.ones(1, dtype=complex)
    for n in range(n_steps - 1, -1, -1):
        closed = np.einsum("lir,i->lr", sites[n], diag_sel)
        caps[n] = closed @ caps[n + 1]

    # expand the diagonal physical leg into (input, output) in the original
    # system basis
    u = _basis_superoperator(bath)
    tensors = []
    for t in sites:
        tensors.append(np.einsum("ler,ei,eo->lior", t, u, u.conj()))
    meta = {"engine": "pt_tempo",
            "bath": bath.describe(),
            "dt": params.dt, "epsrel": params.epsrel,
            "tcut": params.tcut, "k_max": k_max,
            "degeneracy": params.degeneracy}
    meta.update(metadata or {})
    return ProcessTensor(tensors, caps, params.dt, meta)


# -- TEMPO: row-by-row -----------------------------------------------------------


def tempo_compute(sys: System, bath: Bath, rho0: np.ndarray,
                  params: TempoParameters, n_steps: int,
                  start_time: float = 0.0) -> Dynamics:
    """Row-by-row contraction yielding the reduced dynamics directly."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rho0 = np.asarray(rho0, dtype=complex)
    if sys.dimension != bath.dimension:
        raise ValueError("system/bath dimension mismatch")
    if rho0.shape != (sys.dimension,) * 2:
        raise ValueError("initial state dimension mismatch")
    if abs(np.trace(rho0) - 1.0) > 1e-10:
        raise ValueError("initial state must have unit trace")
    d = bath.dimension
    d2 = d * d
    dt = params.dt
    k_max = params.k_max(n_steps)
    eta = eta_coefficients(bath, dt, k_max)
    infl = _Influence(bath, eta, params.degeneracy)
    trunc = params.truncation()
    b0 = infl.b0()
    u = _basis_superoperator(bath)
    uh = u.conj().T

    def props_eig(n):
        pre, post = half_propagators(sys, n, dt, start_time)
        return u @ pre @ uh, u @ post @ uh

    times = [start_time]
    states = [rho0.copy()]

    pre_e, post_e = props_eig(0)
    sites = [(b0 * (pre_e @ (u @ vectorize(rho0)))).reshape(1, d2, 1)]
    prev_post = post_e

    def record(n):
        # ones over history legs, newest leg kept, then the post half step
        v = np.ones(1, dtype=complex)
        for t in sites[:-1]:
            v = v @ t.sum(axis=1)
        newest = sites[-1][:, :, 0]
        rho_vec = uh @ (prev_post @ (v @ newest))
        times.append(start_time + (n + 1) * dt)
        states.append(unvectorize(rho_vec))

    record(0)
    n_w = infl.n_west
    for n in range(1, n_steps):
        pre_e, post_e = props_eig(n)
        p_step = pre_e @ prev_post
        prev_post = post_e
        length = len(sites)
        lag_max = min(k_max, length)
        # copy the newest leg onto the bond, then append the new site with
        # the full-step propagator and its same-step self-influence
        newest = sites[-1]
        sites[-1] = newest[:, :, 0, None] * np.eye(d2)[None, :, :]
        new_site = (p_step.T * b0[None, :]).reshape(d2, d2, 1)
        sites.append(new_site)
        top = len(sites) - 1
        # thread the new pair's west group back through the memory window
        if lag_max >= 1:
            for k in range(1, lag_max + 1):
                sites[top - k] = _absorb_with_message(
                    sites[top - k], infl.west_factors(k).T,
                    carry_left=(k < lag_max), carry_right=True)
            sel = np.zeros((d2, n_w), dtype=complex)
            sel[np.arange(d2), infl.west_index] = 1.0
            t = sites[top]
            lt, pt_, rt = t.shape
            sites[top] = (np.einsum("ljr,jg->gljr", t, sel)
                          .reshape(n_w * lt, pt_, rt))
        if len(sites) > k_max + 1:
            summed = sites[0].sum(axis=1)  # (1, r) left edge
            sites[1] = np.einsum("ar,rps->aps", summed, sites[1])
            sites.pop(0)
        compress_window(sites, 0, len(sites) - 1, trunc)
        record(n)
    return Dynamics(times=np.array(times), states=states)
