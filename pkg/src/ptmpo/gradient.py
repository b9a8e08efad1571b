"""Gradients of final-state objectives with respect to control parameters.

One forward pass caches the working state before every half-step
propagator; one backward (transposed) pass caches the derivative of the
objective with respect to the state after it. The derivative with
respect to a propagator is then the join of the two partial
contractions — the network with that propagator omitted.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ptmpo.application import Dynamics
from ptmpo.operators import unvectorize, vectorize
from ptmpo.process_tensor import ProcessTensor
from ptmpo.system import ParameterizedSystem, propagator_derivatives


@dataclass
class LinearObjective:
    """Z = sum_ij A_ij (rho_f)_ij; fidelity to a target uses A = target^T."""

    a: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=complex)
        if not np.all(np.isfinite(self.a)):
            raise ValueError("objective matrix must be finite")

    def value(self, rho_f: np.ndarray) -> float:
        return complex(np.sum(self.a * rho_f)).real

    def gradient(self, rho_f: np.ndarray) -> np.ndarray:
        return self.a


@dataclass
class GeneralObjective:
    """Z = value(rho_f) with user-supplied dZ/drho_f."""

    value_fn: Callable[[np.ndarray], float]
    gradient_fn: Callable[[np.ndarray], np.ndarray]

    def value(self, rho_f: np.ndarray) -> float:
        return float(self.value_fn(rho_f))

    def gradient(self, rho_f: np.ndarray) -> np.ndarray:
        return np.asarray(self.gradient_fn(rho_f), dtype=complex)


@dataclass
class GradientResult:
    dynamics: Dynamics
    dZ_dV: List[np.ndarray]          # one (d^2, d^2) tensor per half step
    dZ_dc: np.ndarray                # (2N, M) real derivatives
    value: float


def _values_array(ps: ParameterizedSystem, values: np.ndarray) -> np.ndarray:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] % 2 != 0:
        raise ValueError("need values for both halves of every step (2N rows)")
    if values.shape[1] != ps.n_params:
        raise ValueError("one column per parameter required")
    return values


def _forward_pass(ps, pt: ProcessTensor, rho0, props, record_states=True):
    """Returns (times, states, pre_inputs, post_inputs, w_final)."""
    n_steps = len(props) // 2
    if pt.n_steps < n_steps:
        raise ValueError("process tensor shorter than the control sequence")
    d = ps.dimension
    if np.asarray(rho0).shape != (d, d) or pt.dimension != d:
        raise ValueError("dimension mismatch")
    w = vectorize(np.asarray(rho0, dtype=complex))[None, :]
    states = []
    pre_in, post_in = [], []
    for n in range(n_steps):
        if record_states:
            states.append(unvectorize(pt.caps[n] @ w))
        pre_in.append(w)
        w = w @ props[2 * n].T
        w = np.einsum("li,lior->ro", w, pt.tensors[n])
        post_in.append(w)
        w = w @ props[2 * n + 1].T
    if record_states:
        states.append(unvectorize(pt.caps[n_steps] @ w))
    return states, pre_in, post_in, w


def forward_backward(ps: ParameterizedSystem, pt: ProcessTensor,
                     rho0: np.ndarray, objective, values: np.ndarray
                     ) -> Tuple[Dynamics, List[np.ndarray]]:
    """Dynamics plus dZ/dV for every half-step propagator."""
    values = _values_array(ps, values)
    props = ps.propagators(values, pt.dt)
    n_steps = len(props) // 2
    states, pre_in, post_in, w_final = _forward_pass(ps, pt, rho0, props)
    times = np.arange(n_steps + 1) * pt.dt
    dynamics = Dynamics(times=times, states=states)

    rho_f = states[-1]
    a = vectorize(objective.gradient(rho_f))
    # backward (transposed, non-conjugated) pass
    g = pt.caps[n_steps][:, None] * a[None, :]
    dZ_dV: List[Optional[np.ndarray]] = [None] * (2 * n_steps)
    for n in range(n_steps - 1, -1, -1):
        # g is dZ/d(state after post half step): join with post input
        dZ_dV[2 * n + 1] = np.einsum("lj,lk->jk", g, post_in[n])
        g = g @ props[2 * n + 1]
        g = np.einsum("ro,lior->li", g, pt.tensors[n])
        dZ_dV[2 * n] = np.einsum("lj,lk->jk", g, pre_in[n])
        g = g @ props[2 * n]
    return dynamics, dZ_dV


def chain_rule(dZ_dV: Sequence[np.ndarray], prop_derivs: np.ndarray) -> np.ndarray:
    """Assemble dZ/dc_a^n from dZ/dV_n and dV_n/dc_a; returns (2N, M) reals."""
    n_half = len(dZ_dV)
    if prop_derivs.shape[0] != n_half:
        raise ValueError("half-step count mismatch")
    out = np.empty((n_half, prop_derivs.shape[1]))
    for n in range(n_half):
        for a in range(prop_derivs.shape[1]):
            out[n, a] = np.sum(dZ_dV[n] * prop_derivs[n, a]).real
    return out


def state_gradient(ps: ParameterizedSystem, pt: ProcessTensor,
                   rho0: np.ndarray, objective, values: np.ndarray
                   ) -> GradientResult:
    values = _values_array(ps, values)
    dynamics, dZ_dV = forward_backward(ps, pt, rho0, objective, values)
    derivs = propagator_derivatives(ps, values, pt.dt)
    dZ_dc = chain_rule(dZ_dV, derivs)
    return GradientResult(dynamics=dynamics, dZ_dV=dZ_dV, dZ_dc=dZ_dc,
                          value=objective.value(dynamics.states[-1]))


def objective_value(ps: ParameterizedSystem, pt: ProcessTensor,
                    rho0: np.ndarray, objective, values: np.ndarray) -> float:
    """Forward-only objective evaluation (used by line searches)."""
    values = _values_array(ps, values)
    props = ps.propagators(values, pt.dt)
    n_steps = len(props) // 2
    _, _, _, w_final = _forward_pass(ps, pt, rho0, props, record_states=False)
    rho_f = unvectorize(pt.caps[n_steps] @ w_final)
    return objective.value(rho_f)


# -- optimizer --------------------------------------------------------------------


def _two_loop(grad, s_hist, y_hist):
    """L-BFGS two-loop recursion returning an ascent direction."""
    q = grad.copy()
    alphas = []
    for s, y in reversed(list(zip(s_hist, y_hist))):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append(a)
        q = q - a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q = q * ((s @ y) / (y @ y))
    for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
        rho = 1.0 / (y @ s)
        b = rho * (y @ q)
        q = q + (a - b) * s
    return q


def optimize_controls(ps: ParameterizedSystem, pt: ProcessTensor,
                      rho0: np.ndarray, objective,
                      initial_values: np.ndarray,
                      bounds: Optional[Sequence[Tuple[float, float]]] = None,
                      budget: int = 50,
                      history_memory: int = 10,
                      ) -> Tuple[np.ndarray, List[dict]]:
    """Projected L-BFGS ascent of the objective within box bounds.

    ``budget`` counts gradient evaluations. Returns the best in-bounds
    values found and a history of (iteration, objective, gradient
    max-norm, parameter snapshot) entries.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    values = _values_array(ps, initial_values).copy()
    shape = values.shape
    if bounds is None:
        bounds = ps.bounds
    if bounds is not None:
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
    else:
        lo = np.full(shape[1], -np.inf)
        hi = np.full(shape[1], np.inf)

    def project(x):
        return np.clip(x.reshape(shape), lo[None, :], hi[None, :]).reshape(-1)

    x = project(values.reshape(-1))
    history: List[dict] = []
    if budget == 0:
        z = objective_value(ps, pt, rho0, objective, x.reshape(shape))
        history.append({"iteration": 0, "objective": z,
                        "gradient_max": None,
                        "values": x.reshape(shape).tolist()})
        return x.reshape(shape), history

    s_hist: List[np.ndarray] = []
    y_hist: List[np.ndarray] = []
    best_x, best_z = x.copy(), -np.inf
    prev_x = prev_g = None
    for it in range(budget):
        res = state_gradient(ps, pt, rho0, objective, x.reshape(shape))
        z, g = res.value, res.dZ_dc.reshape(-1)
        history.append({"iteration": it, "objective": z,
                        "gradient_max": float(np.max(np.abs(g))),
                        "values": x.reshape(shape).tolist()})
        if not (np.isfinite(z) and np.all(np.isfinite(g))):
            history.append({"iteration": it, "aborted": "non-finite objective"})
            break
        if z > best_z:
            best_z, best_x = z, x.copy()
        if prev_x is not None:
            s, y = x - prev_x, g - prev_g
            if (s @ y) < -1e-14 * (np.linalg.norm(s) * np.linalg.norm(y) + 1e-300):
                s_hist.append(s)
                y_hist.append(y)
                if len(s_hist) > history_memory:
                    s_hist.pop(0)
                    y_hist.pop(0)
        prev_x, prev_g = x.copy(), g.copy()
        # projected-gradient stationarity check
        pg = project(x + g) - x
        if np.max(np.abs(pg)) < 1e-12:
            break
        # maximization: feed the two-loop the minimization pair (s, -y)
        direction = _two_loop(g, s_hist, [-y for y in y_hist])
        if direction @ g <= 0.0:
            direction = g
        step = 1.0
        accepted = False
        for _ in range(30):
            cand = project(x + step * direction)
            if np.max(np.abs(cand - x)) == 0.0:
                break
            zc = objective_value(ps, pt, rho0, objective, cand.reshape(shape))
            if np.isfinite(zc) and zc > z:
                x = cand
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # fall back to a projected gradient step
            step = 1.0
            for _ in range(40):
                cand = project(x + step * g)
                zc = objective_value(ps, pt, rho0, objective,
                                     cand.reshape(shape))
                if np.isfinite(zc) and zc > z:
                    x = cand
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
    return best_x.reshape(shape), history


def history_to_json(history: List[dict], path) -> None:
    with open(path, "w") as f:
        json.dump(history, f, indent=1)
