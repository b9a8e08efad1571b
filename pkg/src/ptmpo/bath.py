"""Gaussian bosonic environment characterization.

Spectral density J(w), bath auto-correlation C(t), the discretized
influence-functional coefficients eta_k, per-lag influence tensors, and
degeneracy grouping of the coupling-operator eigenvalues.

The auto-correlation is

    C(t) = int_0^inf dw J(w) [coth(w / 2T) cos(w t) - i sin(w t)],

with coth -> 1 at T = 0. The eta coefficients are double integrals of C
over pairs of time-step windows; swapping integration order gives the
single-frequency-integral forms used below (the independent 2-D
quadrature oracle lives in the tests).
"""

import hashlib
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from ptmpo.tensor import NumericsError

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-10, limit=500)

GROUP_TOL = 1e-12


class QuadratureError(NumericsError):
    """Raised when an adaptive quadrature does not converge."""


# -- spectral densities -------------------------------------------------------

class PowerLawSD:
    """Power-law spectral density J(w) = alpha w^zeta w_c^(1-zeta) f(w/w_c).

    ``cutoff`` selects f: ``exponential`` (exp(-x)), ``gaussian``
    (exp(-x^2)), or ``hard`` (step at w_c). zeta = 1 is Ohmic.
    """

    def __init__(self, alpha: float, zeta: float, omega_c: float,
                 cutoff: str = "exponential"):
        if omega_c <= 0.0:
            raise ValueError("cutoff frequency must be positive")
        if cutoff not in ("exponential", "gaussian", "hard"):
            raise ValueError(f"unknown cutoff type {cutoff!r}")
        self.alpha = float(alpha)
        self.zeta = float(zeta)
        self.omega_c = float(omega_c)
        self.cutoff = cutoff

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < 0.0):
            raise ValueError("spectral density evaluated at negative frequency")
        x = omega / self.omega_c
        with np.errstate(divide="ignore", invalid="ignore"):
            power = np.where(omega > 0.0, omega ** self.zeta, 0.0)
        if self.cutoff == "exponential":
            f = np.exp(-x)
        elif self.cutoff == "gaussian":
            f = np.exp(-x ** 2)
        else:
            f = (omega <= self.omega_c).astype(float)
        result = self.alpha * power * self.omega_c ** (1.0 - self.zeta) * f
        return result if result.ndim else float(result)

    @property
    def support_max(self) -> float:
        """Upper integration limit covering the density to ~1e-16."""
        if self.cutoff == "exponential":
            return self.omega_c * (40.0 + 5.0 * abs(self.zeta))
        if self.cutoff == "gaussian":
            return self.omega_c * 8.0
        return self.omega_c

    def describe(self) -> dict:
        return {"type": "power_law", "alpha": self.alpha, "zeta": self.zeta,
                "omega_c": self.omega_c, "cutoff": self.cutoff}


class CustomSD:
    """Tabulated spectral density with linear interpolation, 0 beyond table."""

    def __init__(self, omegas: Sequence[float], values: Sequence[float]):
        omegas = np.asarray(omegas, dtype=float)
        values = np.asarray(values, dtype=float)
        if omegas.ndim != 1 or omegas.shape != values.shape:
            raise ValueError("omegas and values must be equal-length 1-D arrays")
        if np.any(np.diff(omegas) <= 0.0):
            raise ValueError("table frequencies must be strictly increasing")
        if np.any(omegas < 0.0):
            raise ValueError("table frequencies must be nonnegative")
        if np.any(values < 0.0):
            raise ValueError("spectral density values must be nonnegative")
        self.omegas = omegas
        self.values = values

    @classmethod
    def from_file(cls, path) -> "CustomSD":
        """Read a two-column (frequency, density) text table; '#' comments."""
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] < 2:
            raise ValueError("custom spectral density file needs two columns")
        return cls(data[:, 0], data[:, 1])

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < 0.0):
            raise ValueError("spectral density evaluated at negative frequency")
        result = np.interp(omega, self.omegas, self.values, left=0.0, right=0.0)
        return result if result.ndim else float(result)

    @property
    def support_max(self) -> float:
        return float(self.omegas[-1])

    def describe(self) -> dict:
        return {"type": "custom",
                "digest": hashlib.sha256(
                    self.omegas.tobytes() + self.values.tobytes()).hexdigest()}


def eval_spectral_density(sd, omega: float) -> float:
    """Evaluate J(omega); negative frequencies are rejected."""
    return sd(omega)


# -- bath ---------------------------------------------------------------------

def _coupling_eigensystem(operator: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending, ties in original order) and eigenvectors."""
    operator = np.asarray(operator, dtype=complex)
    offdiag = operator - np.diag(np.diag(operator))
    if np.max(np.abs(offdiag)) <= GROUP_TOL:
        diag = np.real(np.diag(operator))
        order = np.argsort(-diag, kind="stable")
        vecs = np.eye(operator.shape[0], dtype=complex)[:, order]
        return diag[order], vecs
    vals, vecs = np.linalg.eigh(operator)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


class Bath:
    """A bosonic bath: coupling operator, spectral density, temperature."""

    def __init__(self, coupling_operator: np.ndarray, spectral_density,
                 temperature: float = 0.0):
        op = np.asarray(coupling_operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError("coupling operator must be square")
        if op.shape[0] < 2:
            raise ValueError("coupling operator dimension must be >= 2")
        if np.max(np.abs(op - op.conj().T)) > 1e-12:
            raise ValueError("coupling operator must be Hermitian")
        if temperature < 0.0:
            raise ValueError("temperature must be >= 0")
        self.coupling_operator = op
        self.spectral_density = spectral_density
        self.temperature = float(temperature)
        self.eigenvalues, self.eigenvectors = _coupling_eigensystem(op)

    @property
    def dimension(self) -> int:
        return self.coupling_operator.shape[0]

    def describe(self) -> dict:
        return {
            "coupling_digest": hashlib.sha256(
                np.ascontiguousarray(self.coupling_operator).tobytes()
            ).hexdigest(),
            "temperature": self.temperature,
            "spectral_density": self.spectral_density.describe(),
        }


# -- correlation function and derived integrals -------------------------------

def _coth(x: float) -> float:
    if x > 20.0:
        return 1.0
    if x < 1e-4:
        return 1.0 / x + x / 3.0
    return math.cosh(x) / math.sinh(x)


def _quad(f, a, b, **kw):
    opts = dict(_QUAD_OPTS)
    opts.update(kw)
    try:
        val, err = integrate.quad(f, a, b, **opts)
    except Exception as e:
        raise QuadratureError(str(e)) from e
    if not np.isfinite(val):
        raise QuadratureError("quadrature returned non-finite value")
    return val


def _osc_quad(f, a, b, weight: str, wvar: float) -> float:
    """Integral of f(w)*cos(wvar*w) or f(w)*sin(wvar*w) on [a, b]."""
    if wvar == 0.0:
        if weight == "sin":
            return 0.0
        return _quad(f, a, b)
    try:
        val, err = integrate.quad(f, a, b, weight=weight, wvar=wvar,
                                  epsabs=1e-13, epsrel=1e-10, limit=500,
                                  maxp1=200)
    except Exception as e:
        raise QuadratureError(str(e)) from e
    if not np.isfinite(val):
        raise QuadratureError("quadrature returned non-finite value")
    return val


def _thermal_factor(bath: Bath):
    temp = bath.temperature
    j = bath.spectral_density
    if temp == 0.0:
        return lambda w: j(w)
    # w = 0 is a measure-zero sample; the integrands carry their own
    # 1/w^2 guards, so any finite value is acceptable there.
    return lambda w: j(w) * _coth(w / (2.0 * temp)) if w > 0.0 else 0.0


def correlation_function(bath: Bath, t: float) -> complex:
    """Bath auto-correlation C(t); C(-t) = conj(C(t))."""
    t = float(t)
    upper = bath.spectral_density.support_max
    jc = _thermal_factor(bath)
    j = bath.spectral_density
    re = _osc_quad(jc, 0.0, upper, "cos", abs(t))
    im = -_osc_quad(j, 0.0, upper, "sin", abs(t))
    c = complex(re, im)
    return c.conjugate() if t < 0.0 else c


def reorganization_energy(sd) -> float:
    """Reorganization energy lambda = 2 * int_0^inf J(w)/w dw.

    The factor 2 matches the convention of the Ohmic exponential-cutoff
    family where lambda = 2 alpha w_c at zeta = 1.
    """
    if isinstance(sd, PowerLawSD):
        if sd.zeta <= 0.0:
            raise ValueError("reorganization energy diverges for zeta <= 0")
        if sd.cutoff == "exponential":
            return 2.0 * sd.alpha * sd.omega_c * math.gamma(sd.zeta)
    return 2.0 * _quad(lambda w: sd(w) / w if w > 0.0 else 0.0,
                       0.0, sd.support_max)


# -- eta coefficients ---------------------------------------------------------

@dataclass
class EtaCoefficients:
    """Discrete memory kernel: eta_0 ... eta_K for time step dt."""

    dt: float
    values: np.ndarray

    @property
    def k_max(self) -> int:
        return len(self.values) - 1


def _is_zero_coupling(sd) -> bool:
    return isinstance(sd, PowerLawSD) and sd.alpha == 0.0


def eta_coefficients(bath: Bath, dt: float, k_count: int) -> EtaCoefficients:
    """Window double-integrals of C(t): eta_0 (time-ordered, same step)
    and eta_k (full window pairs at lag k) for k = 1 ... k_count.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if k_count < 0:
        raise ValueError("k_count must be >= 0")
    if _is_zero_coupling(bath.spectral_density):
        return EtaCoefficients(dt, np.zeros(k_count + 1, dtype=complex))

    upper = bath.spectral_density.support_max
    jc = _thermal_factor(bath)
    j = bath.spectral_density

    def w2(w):
        return w * w if w > 0.0 else np.inf

    values = np.empty(k_count + 1, dtype=complex)
    # eta_0: int J/w^2 [coth (1 - cos w dt) - i (w dt - sin w dt)]
    re0 = _quad(lambda w: jc(w) * _one_minus_cos(w * dt) / w2(w), 0.0, upper)
    im0 = -_quad(lambda w: j(w) * _x_minus_sin(w * dt) / w2(w), 0.0, upper)
    values[0] = complex(re0, im0)
    # eta_k: int J/w^2 4 sin^2(w dt / 2) [coth cos(w k dt) - i sin(w k dt)]
    for k in range(1, k_count + 1):
        def fre(w):
            return jc(w) * _four_sin_sq(w * dt) / w2(w)

        def fim(w):
            return j(w) * _four_sin_sq(w * dt) / w2(w)

        re = _osc_quad(fre, 0.0, upper, "cos", k * dt)
        im = -_osc_quad(fim, 0.0, upper, "sin", k * dt)
        values[k] = complex(re, im)
    return EtaCoefficients(dt, values)


def _one_minus_cos(x: float) -> float:
    return 2.0 * math.sin(0.5 * x) ** 2


def _four_sin_sq(x: float) -> float:
    return 4.0 * math.sin(0.5 * x) ** 2


def _x_minus_sin(x: float) -> float:
    if abs(x) < 1e-4:
        return x ** 3 / 6.0 - x ** 5 / 120.0
    return x - math.sin(x)


# -- influence tensors --------------------------------------------------------

def influence_values(eigenvalues: np.ndarray, eta_k: complex,
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Per-Liouville-pair factors of the influence exponent.

    Returns ``(diff, drive)`` with ``diff[i] = s_j - s_j'`` and
    ``drive[i] = eta_k s_j - conj(eta_k) s_j'`` for the flattened pair
    ``i = j * d + j'``; the influence entry is ``exp(-diff_later *
    drive_earlier)``.
    """
    s = np.asarray(eigenvalues, dtype=float)
    diff = (s[:, None] - s[None, :]).reshape(-1)
    drive = (eta_k * s[:, None] - np.conj(eta_k) * s[None, :]).reshape(-1)
    return diff, drive


def influence_tensor(bath: Bath, eta: EtaCoefficients, k: int) -> np.ndarray:
    """Influence tensor b_k over Liouville pairs, in the coupling eigenbasis.

    Rank-2, indexed [later pair, earlier pair]. For lag 0 only the
    diagonal is populated (same-step self-interaction); beyond the memory
    range (k > K) the tensor is all ones.
    """
    if k < 0:
        raise ValueError("lag must be >= 0")
    d2 = bath.dimension ** 2
    if k > eta.k_max:
        return np.ones((d2, d2), dtype=complex)
    diff, drive = influence_values(bath.eigenvalues, eta.values[k])
    if k == 0:
        return np.diag(np.exp(-diff * drive))
    return np.exp(-np.outer(diff, drive))


# -- degeneracy checking --------------------------------------------------------

@dataclass
class DegeneracyMap:
    """Grouping of Liouville pairs by coupling eigenvalue structure.

    ``west_groups`` partitions pairs by equal eigenvalue difference;
    ``north_groups`` refines it by equal (difference, sum).
    """

    west_index: np.ndarray     # pair index -> west group id
    north_index: np.ndarray    # pair index -> north group id
    west_groups: List[List[int]] = field(default_factory=list)
    north_groups: List[List[int]] = field(default_factory=list)

    @property
    def n_west(self) -> int:
        return len(self.west_groups)

    @property
    def n_north(self) -> int:
        return len(self.north_groups)


def _cluster_1d(values: np.ndarray, tol: float = GROUP_TOL) -> np.ndarray:
    """Group ids for scalar values within absolute tolerance."""
    order = np.argsort(values, kind="stable")
    ids = np.empty(len(values), dtype=int)
    gid = -1
    prev = None
    for idx in order:
        v = values[idx]
        if prev is None or v - prev > tol:
            gid += 1
        ids[idx] = gid
        prev = v
    return ids


def degeneracy_map(coupling_operator: np.ndarray) -> DegeneracyMap:
    """Group Liouville pairs of a Hermitian coupling operator."""
    s, _ = _coupling_eigensystem(coupling_operator)
    diff = (s[:, None] - s[None, :]).reshape(-1)
    ssum = (s[:, None] + s[None, :]).reshape(-1)
    diff_ids = _cluster_1d(diff)
    sum_ids = _cluster_1d(ssum)
    n_sum = sum_ids.max() + 1
    combo = diff_ids * n_sum + sum_ids
    # compact north ids in first-appearance-by-value order
    _, north_ids = np.unique(combo, return_inverse=True)
    west_groups = [[] for _ in range(diff_ids.max() + 1)]
    for i, g in enumerate(diff_ids):
        west_groups[g].append(i)
    north_groups = [[] for _ in range(north_ids.max() + 1)]
    for i, g in enumerate(north_ids):
        north_groups[g].append(i)
    return DegeneracyMap(west_index=diff_ids, north_index=north_ids,
                         west_groups=west_groups, north_groups=north_groups)
