"""Common operators and Liouville-space (vectorization) helpers.

Density matrices are vectorized row-major: ``vec(rho)[i*d + j] = rho[i, j]``,
so ``vec(A rho B) = (A kron B.T) vec(rho)``.
"""

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)

_NAMED = {
    "sigma_x": SIGMA_X,
    "sigma_y": SIGMA_Y,
    "sigma_z": SIGMA_Z,
    "sigma_plus": SIGMA_PLUS,
    "sigma_minus": SIGMA_MINUS,
}


def named_operator(name: str, dim: int = 2) -> np.ndarray:
    """Resolve an operator shorthand like ``sigma_z`` or ``identity(3)``."""
    name = name.strip()
    if name in _NAMED:
        return _NAMED[name].copy()
    if name.startswith("identity"):
        inner = name[len("identity"):].strip("() ")
        d = int(inner) if inner else dim
        return np.eye(d, dtype=complex)
    raise ValueError(f"unknown operator shorthand: {name!r}")


def spin_dm(direction: str) -> np.ndarray:
    """Qubit density matrix for a pole/equator state, e.g. ``z+`` or ``x-``."""
    vecs = {
        "z+": np.array([1.0, 0.0]),
        "z-": np.array([0.0, 1.0]),
        "x+": np.array([1.0, 1.0]) / np.sqrt(2),
        "x-": np.array([1.0, -1.0]) / np.sqrt(2),
        "y+": np.array([1.0, 1.0j]) / np.sqrt(2),
        "y-": np.array([1.0, -1.0j]) / np.sqrt(2),
    }
    v = vecs[direction].astype(complex)
    return np.outer(v, v.conj())


def left_super(a: np.ndarray) -> np.ndarray:
    """Superoperator for left multiplication: rho -> a rho."""
    a = np.asarray(a, dtype=complex)
    return np.kron(a, np.eye(a.shape[0]))


def right_super(b: np.ndarray) -> np.ndarray:
    """Superoperator for right multiplication: rho -> rho b."""
    b = np.asarray(b, dtype=complex)
    return np.kron(np.eye(b.shape[0]), b.T)


def left_right_super(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator for rho -> a rho b."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex).T)


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvectorize(vec: np.ndarray) -> np.ndarray:
    d = round(np.sqrt(vec.size))
    return np.asarray(vec).reshape(d, d)


def trace_vector(dim: int) -> np.ndarray:
    """Row vector implementing the trace in vectorized form."""
    return np.eye(dim, dtype=complex).reshape(-1)


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and \
        np.max(np.abs(m - m.conj().T)) <= tol * max(1.0, np.max(np.abs(m)))
