"""System-side descriptions.

Hamiltonians (constant or time dependent), Markovian dissipation
channels, Liouvillians and half-step propagators, parameterized
systems with propagator derivatives, nearest-neighbor chains, and
mean-field ensembles coupled to a classical field.

Vectorization is row-major throughout: vec(A rho B) = (A kron B^T) vec(rho).
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm, expm_frechet

from ptmpo.operators import left_right_super, left_super, right_super

_HERM_TOL = 1e-12


def _as_hermitian(m, what: str = "Hamiltonian") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    if np.max(np.abs(m - m.conj().T)) > _HERM_TOL:
        raise ValueError(f"{what} must be Hermitian")
    return m


class System:
    """Open system descriptor: H(t) plus Lindblad channels (rate, operator)."""

    def __init__(self, hamiltonian, lindblad_channels: Sequence[Tuple[float, np.ndarray]] = ()):
        if callable(hamiltonian):
            self._h_func = hamiltonian
            self._h_const = None
            probe = _as_hermitian(hamiltonian(0.0))
        else:
            self._h_func = None
            self._h_const = _as_hermitian(hamiltonian)
            probe = self._h_const
        self.dimension = probe.shape[0]
        channels = []
        for gamma, op in lindblad_channels:
            if gamma < 0.0:
                raise ValueError("Lindblad rates must be nonnegative")
            op = np.asarray(op, dtype=complex)
            if op.shape != probe.shape:
                raise ValueError("Lindblad operator dimension mismatch")
            channels.append((float(gamma), op))
        self.lindblad_channels = tuple(channels)
        self._prop_cache = {}

    @property
    def time_dependent(self) -> bool:
        return self._h_func is not None

    def hamiltonian(self, t: float) -> np.ndarray:
        if self._h_const is not None:
            return self._h_const
        return _as_hermitian(self._h_func(t))


def _dissipator(gamma: float, op: np.ndarray) -> np.ndarray:
    anti = op.conj().T @ op
    return gamma * (left_right_super(op, op.conj().T)
                    - 0.5 * (left_super(anti) + right_super(anti)))


def liouvillian(sys: System, t: float = 0.0) -> np.ndarray:
    """Lindblad generator acting on vectorized rho:
    -i[H, rho] + sum_k gamma_k (L rho L^+ - 1/2 {L^+L, rho}).
    """
    h = sys.hamiltonian(t)
    lv = -1j * (left_super(h) - right_super(h))
    for gamma, op in sys.lindblad_channels:
        lv = lv + _dissipator(gamma, op)
    return lv


def half_propagators(sys: System, n: int, dt: float,
                     start_time: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Half-step propagators (pre, post) for step n.

    Each is exp(L(t_mid) dt/2) with the generator sampled at the midpoint
    of its half-interval; both dissipation and coherent parts sit in the
    same exponential.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not sys.time_dependent:
        key = dt
        if key not in sys._prop_cache:
            half = expm(liouvillian(sys, start_time) * (dt / 2.0))
            sys._prop_cache[key] = (half, half)
        return sys._prop_cache[key]
    t0 = start_time + n * dt
    pre = expm(liouvillian(sys, t0 + dt / 4.0) * (dt / 2.0))
    post = expm(liouvillian(sys, t0 + 3.0 * dt / 4.0) * (dt / 2.0))
    return pre, post


# -- parameterized systems ----------------------------------------------------

class ParameterizedSystem:
    """Hamiltonian family H(c_0 ... c_{M-1}) with optional box bounds.

    Parameters are piecewise constant per half time step; a full
    evolution over N steps takes a (2N, M) value array. ``derivatives``
    may supply analytic dH/dc_a callables; otherwise a high-order
    central finite difference of the builder is used.
    """

    def __init__(self, builder: Callable[..., np.ndarray], n_params: int,
                 bounds: Optional[Sequence[Tuple[float, float]]] = None,
                 derivatives: Optional[Sequence[Callable[..., np.ndarray]]] = None,
                 lindblad_channels: Sequence[Tuple[float, np.ndarray]] = ()):
        self.builder = builder
        self.n_params = int(n_params)
        if self.n_params < 1:
            raise ValueError("n_params must be >= 1")
        if bounds is not None:
            bounds = [(float(lo), float(hi)) for lo, hi in bounds]
            if len(bounds) != self.n_params:
                raise ValueError("one (lo, hi) pair per parameter required")
            for lo, hi in bounds:
                if lo > hi:
                    raise ValueError("invalid bound pair")
        self.bounds = bounds
        if derivatives is not None and len(derivatives) != self.n_params:
            raise ValueError("one derivative callable per parameter required")
        self.derivatives = derivatives
        probe = _as_hermitian(builder(*([0.0] * self.n_params)))
        self.dimension = probe.shape[0]
        channels = []
        for gamma, op in lindblad_channels:
            if gamma < 0.0:
                raise ValueError("Lindblad rates must be nonnegative")
            channels.append((float(gamma), np.asarray(op, dtype=complex)))
        self.lindblad_channels = tuple(channels)

    def check_bounds(self, values: np.ndarray):
        if self.bounds is None:
            return
        values = np.atleast_2d(values)
        for a, (lo, hi) in enumerate(self.bounds):
            col = values[:, a]
            if np.any(col < lo - 1e-12) or np.any(col > hi + 1e-12):
                raise ValueError(f"parameter {a} out of bounds [{lo}, {hi}]")

    def hamiltonian(self, values: Sequence[float]) -> np.ndarray:
        return _as_hermitian(self.builder(*values))

    def hamiltonian_derivative(self, a: int, values: Sequence[float]) -> np.ndarray:
        if self.derivatives is not None:
            return np.asarray(self.derivatives[a](*values), dtype=complex)
        # 4th-order central difference; exact for builders polynomial in c
        h = 1e-4
        vals = np.array(values, dtype=float)

        def at(delta):
            shifted = vals.copy()
            shifted[a] += delta
            return np.asarray(self.builder(*shifted), dtype=complex)

        return (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h)

    def liouvillian(self, values: Sequence[float]) -> np.ndarray:
        h = self.hamiltonian(values)
        lv = -1j * (left_super(h) - right_super(h))
        for gamma, op in self.lindblad_channels:
            lv = lv + _dissipator(gamma, op)
        return lv

    def liouvillian_derivative(self, a: int, values: Sequence[float]) -> np.ndarray:
        dh = self.hamiltonian_derivative(a, values)
        return -1j * (left_super(dh) - right_super(dh))

    def propagators(self, values: np.ndarray, dt: float) -> List[np.ndarray]:
        """One half-step propagator exp(L(c) dt/2) per row of values."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        self.check_bounds(values)
        return [expm(self.liouvillian(row) * (dt / 2.0)) for row in values]


def propagator_derivatives(ps: ParameterizedSystem, values: np.ndarray,
                           dt: float) -> np.ndarray:
    """d(half-step propagator)/dc_a for every half step and parameter.

    Returns shape (n_half_steps, M, d^2, d^2), computed via the Frechet
    derivative of the matrix exponential.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    ps.check_bounds(values)
    n_half, m = values.shape[0], ps.n_params
    d2 = ps.dimension ** 2
    out = np.zeros((n_half, m, d2, d2), dtype=complex)
    if dt == 0.0:
        return out
    for n, row in enumerate(values):
        arg = ps.liouvillian(row) * (dt / 2.0)
        for a in range(m):
            direction = ps.liouvillian_derivative(a, row) * (dt / 2.0)
            _, frechet = expm_frechet(arg, direction)
            out[n, a] = frechet
    return out


# -- chains ---------------------------------------------------------------------

@dataclass
class SystemChain:
    """Nearest-neighbor chain: per-site terms and per-bond couplings.

    ``bond_hamiltonians[i]`` is the d^2 x d^2 Hermitian coupling between
    sites i and i+1.
    """

    site_dimension: int
    site_hamiltonians: List[np.ndarray]
    bond_hamiltonians: List[np.ndarray]

    def __post_init__(self):
        d = self.site_dimension
        if len(self.site_hamiltonians) < 2:
            raise ValueError("chain length must be >= 2")
        if len(self.bond_hamiltonians) != len(self.site_hamiltonians) - 1:
            raise ValueError("need one bond term per adjacent site pair")
        self.site_hamiltonians = [
            _as_hermitian(h, "site Hamiltonian") for h in self.site_hamiltonians]
        self.bond_hamiltonians = [
            _as_hermitian(h, "bond Hamiltonian") for h in self.bond_hamiltonians]
        for h in self.site_hamiltonians:
            if h.shape[0] != d:
                raise ValueError("site term dimension mismatch")
        for h in self.bond_hamiltonians:
            if h.shape[0] != d * d:
                raise ValueError("bond term dimension mismatch")

    @property
    def length(self) -> int:
        return len(self.site_hamiltonians)


def xy_chain(n_sites: int, epsilon: float = 1.0, coupling: float = 1.0,
             anisotropy: float = 0.0) -> SystemChain:
    """Anisotropic XY chain of spin-1/2 sites:

    H = sum_n epsilon s^z_n
        + sum_n J [(1+eta) s^x_n s^x_{n+1} + (1-eta) s^y_n s^y_{n+1}].
    """
    if n_sites < 2:
        raise ValueError("chain length must be >= 2")
    sx = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
    sy = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
    site = epsilon * sz
    bond = coupling * ((1.0 + anisotropy) * np.kron(sx, sx)
                       + (1.0 - anisotropy) * np.kron(sy, sy))
    return SystemChain(site_dimension=2,
                       site_hamiltonians=[site.copy() for _ in range(n_sites)],
                       bond_hamiltonians=[bond.copy() for _ in range(n_sites - 1)])


# -- mean-field ensembles --------------------------------------------------------

class FieldSystem:
    """A subsystem whose Hamiltonian depends on a classical field value."""

    def __init__(self, hamiltonian: Callable[[float, complex], np.ndarray],
                 expectation_operator: np.ndarray,
                 lindblad_channels: Sequence[Tuple[float, np.ndarray]] = ()):
        self._h_func = hamiltonian
        probe = _as_hermitian(hamiltonian(0.0, 0.0j))
        self.dimension = probe.shape[0]
        self.expectation_operator = np.asarray(expectation_operator, dtype=complex)
        if self.expectation_operator.shape != probe.shape:
            raise ValueError("expectation operator dimension mismatch")
        channels = []
        for gamma, op in lindblad_channels:
            if gamma < 0.0:
                raise ValueError("Lindblad rates must be nonnegative")
            channels.append((float(gamma), np.asarray(op, dtype=complex)))
        self.lindblad_channels = tuple(channels)

    def hamiltonian(self, t: float, field: complex) -> np.ndarray:
        return _as_hermitian(self._h_func(t, field))

    def frozen(self, field_of_t: Callable[[float], complex]) -> System:
        """System with the field replaced by a fixed trajectory."""
        return System(lambda t: self._h_func(t, field_of_t(t)),
                      self.lindblad_channels)


class MeanFieldSystem:
    """One or more field-coupled subsystems plus a field equation of motion.

    ``field_eom(t, field, expectations)`` returns d(field)/dt given the
    per-subsystem expectation values of each ``expectation_operator``.
    """

    def __init__(self, subsystems: Sequence[FieldSystem],
                 field_eom: Callable[[float, complex, Sequence[complex]], complex]):
        if len(subsystems) < 1:
            raise ValueError("at least one subsystem required")
        self.subsystems = list(subsystems)
        self.field_eom = field_eom
