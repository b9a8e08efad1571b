"""Applying process tensors: reduced dynamics and multi-time correlations.

A run carries a working array with one bond axis per process tensor plus
one system Liouville axis; per step the pre half-propagator, every PT
slot (lazily, innermost first), and the post half-propagator act on it.
States at intermediate times are read out through per-bond caps without
recontracting the network.
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ptmpo.operators import left_super, right_super, trace_vector, unvectorize, vectorize
from ptmpo.process_tensor import ProcessTensor
from ptmpo.system import System, half_propagators


@dataclass
class Dynamics:
    """Times t_0 ... t_N and the reduced states rho(t_n)."""

    times: np.ndarray
    states: List[np.ndarray]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("one state per time required")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")

    @property
    def dimension(self) -> int:
        return self.states[0].shape[0]

    def expectations(self, operator: np.ndarray) -> np.ndarray:
        """Tr[operator rho(t_n)] for every recorded time."""
        operator = np.asarray(operator, dtype=complex)
        return np.array([np.trace(operator @ s) for s in self.states])


@dataclass
class ControlSequence:
    """Superoperator interventions: (step index, placement, d^2 x d^2 matrix).

    Placement "pre" inserts the operation at t_n just before step n's
    evolution; "post" inserts it at t_n just after arriving there.
    """

    entries: List[Tuple[int, str, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        cleaned = []
        for step, placement, op in self.entries:
            if placement not in ("pre", "post"):
                raise ValueError("placement must be 'pre' or 'post'")
            op = np.asarray(op, dtype=complex)
            if not np.all(np.isfinite(op)):
                raise ValueError("control superoperators must be finite")
            cleaned.append((int(step), placement, op))
        self.entries = cleaned

    def add(self, step: int, placement: str, op: np.ndarray):
        self.entries.append((int(step), placement, np.asarray(op, dtype=complex)))
        self.__post_init__()

    def at(self, step: int, placement: str) -> List[np.ndarray]:
        return [op for s, p, op in self.entries
                if s == step and p == placement]


class _Run:
    """Working state threading one or more PTs along the evolution."""

    def __init__(self, pts: List[ProcessTensor], rho0: np.ndarray):
        self.pts = pts
        d = rho0.shape[0]
        self.d2 = d * d
        w = vectorize(np.asarray(rho0, dtype=complex))
        for pt in reversed(pts):
            w = w[None, ...] * pt.initial_bond().reshape(
                (-1,) + (1,) * w.ndim)
        self.w = w  # axes: bond per PT (in pts order), then Liouville

    def apply_super(self, m: np.ndarray):
        self.w = np.einsum("...i,oi->...o", self.w, m)

    def apply_slots(self, n: int):
        for a, pt in enumerate(self.pts):
            w = np.moveaxis(self.w, a, -2)
            w = np.einsum("...li,lior->...ro", w, pt.tensors[n], optimize=True)
            self.w = np.moveaxis(w, -2, a)

    def state_vector(self, n: int) -> np.ndarray:
        v = self.w
        for pt in self.pts:
            v = np.einsum("l...,l->...", v, pt.caps[n])
        return v


def _check_pts(pts, rho0, n_steps):
    d = rho0.shape[0]
    for pt in pts:
        if pt.dimension != d:
            raise ValueError("process tensor / system dimension mismatch")
        if pt.n_steps < n_steps:
            raise ValueError("process tensor shorter than requested run")
    if len({round(pt.dt, 15) for pt in pts}) > 1:
        raise ValueError("process tensors disagree on dt")


def compute_dynamics(sys: System,
                     pts: Union[ProcessTensor, Sequence[ProcessTensor]],
                     rho0: np.ndarray,
                     controls: Optional[ControlSequence] = None,
                     n_steps: Optional[int] = None,
                     start_time: float = 0.0) -> Dynamics:
    """Evolve rho0 under the system and the given environments.

    Multiple PTs are applied lazily per step, first list entry first.
    Controls with placement "post" act before those with placement "pre"
    at the same time point; the recorded state at t_n includes both.
    """
    if isinstance(pts, ProcessTensor):
        pts = [pts]
    pts = list(pts)
    rho0 = np.asarray(rho0, dtype=complex)
    if not pts:
        raise ValueError("at least one process tensor required")
    if n_steps is None:
        n_steps = min(pt.n_steps for pt in pts)
    _check_pts(pts, rho0, n_steps)
    dt = pts[0].dt
    controls = controls or ControlSequence()
    for step, _, _ in controls.entries:
        if not 0 <= step <= n_steps:
            raise ValueError("control step index out of range")

    run = _Run(pts, rho0)
    d = rho0.shape[0]
    times = []
    states = []

    def checkpoint(n):
        for op in controls.at(n, "post"):
            run.apply_super(op)
        for op in controls.at(n, "pre"):
            run.apply_super(op)
        times.append(start_time + n * dt)
        states.append(unvectorize(run.state_vector(n)))

    for n in range(n_steps):
        checkpoint(n)
        pre, post = half_propagators(sys, n, dt, start_time)
        run.apply_super(pre)
        run.apply_slots(n)
        run.apply_super(post)
    checkpoint(n_steps)
    return Dynamics(times=np.array(times), states=states)


def _side_super(op: np.ndarray, side: str) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if side == "left":
        return left_super(op)
    if side == "right":
        return right_super(op)
    raise ValueError("operator side must be 'left' or 'right'")


def compute_correlations_nt(sys: System, pt: ProcessTensor,
                            ops: Sequence[Tuple[np.ndarray, str]],
                            times: Sequence,
                            rho0: np.ndarray,
                            start_time: float = 0.0):
    """n-time correlation functions with a swept final operator time.

    ``ops[i]`` is (matrix, side); ``times[i]`` is its step index, except
    the last entry may be a sequence of step indices, in which case the
    whole sweep is evaluated in a single forward pass and a complex array
    is returned. Within each side, listed operator times must be
    nondecreasing (out-of-time-order requests are rejected).
    """
    if len(ops) != len(times):
        raise ValueError("one time per operator required")
    if len(ops) < 1:
        raise ValueError("at least one operator required")
    n_total = pt.n_steps
    fixed_times = [int(t) for t in times[:-1]]
    last = times[-1]
    sweep = None
    if np.ndim(last) > 0:
        sweep = [int(t) for t in last]
    else:
        sweep = [int(last)]
    all_steps = fixed_times + sweep
    if any(t < 0 or t > n_total for t in all_steps):
        raise ValueError("operator time outside the process tensor range")
    if sweep != sorted(sweep):
        raise ValueError("sweep times must be nondecreasing")
    if fixed_times and min(sweep) < max(fixed_times):
        raise ValueError("swept operator must come last in time")
    # separate time ordering per side; a violation would require an
    # out-of-time-order contraction which this network cannot express
    for side in ("left", "right"):
        seq = [t for (_, s), t in zip(ops, fixed_times + [sweep[0]])
               if s == side]
        if any(b < a for a, b in zip(seq, seq[1:])):
            raise ValueError(
                f"{side}-acting operator times must be nondecreasing")

    rho0 = np.asarray(rho0, dtype=complex)
    _check_pts([pt], rho0, max(all_steps))
    dt = pt.dt
    last_super = _side_super(*ops[-1])
    tr = trace_vector(rho0.shape[0])
    fixed_at = {}
    for (op, side), t in zip(ops[:-1], fixed_times):
        fixed_at.setdefault(t, []).append(_side_super(op, side))

    run = _Run([pt], rho0)
    values = np.zeros(len(sweep), dtype=complex)
    sweep_arr = np.asarray(sweep)
    for n in range(max(all_steps) + 1):
        for op in fixed_at.get(n, []):
            run.apply_super(op)
        hits = np.nonzero(sweep_arr == n)[0]
        if len(hits):
            v = last_super @ run.state_vector(n)
            values[hits] = tr @ v
        if n < max(all_steps):
            pre, post = half_propagators(sys, n, dt, start_time)
            run.apply_super(pre)
            run.apply_slots(n)
            run.apply_super(post)
    if np.ndim(last) == 0:
        return values[0]
    return values


# -- serialization ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dynamics_to_csv(dynamics: Dynamics, path) -> None:
    """time column plus flattened re/im density-matrix entries."""
    d = dynamics.dimension
    header = ["t"]
    for i in range(d):
        for j in range(d):
            header += [f"re_rho_{i}_{j}", f"im_rho_{i}_{j}"]
    lines = [",".join(header)]
    for t, s in zip(dynamics.times, dynamics.states):
        row = [_fmt(t)]
        for i in range(d):
            for j in range(d):
                row += [_fmt(s[i, j].real), _fmt(s[i, j].imag)]
        lines.append(",".join(row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def dynamics_to_json(dynamics: Dynamics, path) -> None:
    data = {
        "times": [float(t) for t in dynamics.times],
        "states": [[[[s[i, j].real, s[i, j].imag]
                     for j in range(dynamics.dimension)]
                    for i in range(dynamics.dimension)]
                   for s in dynamics.states],
    }
    with open(path, "w") as f:
        json.dump(data, f, indent=1)


def correlations_to_csv(step_times: Sequence[float], values: np.ndarray,
                        path) -> None:
    lines = ["t,re,im"]
    for t, v in zip(step_times, np.atleast_1d(values)):
        lines.append(",".join([_fmt(t), _fmt(v.real), _fmt(v.imag)]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
