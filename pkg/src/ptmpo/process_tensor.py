"""Process tensors in matrix-product-operator form.

A ProcessTensor holds one rank-4 slot tensor per time step, indexed
[left-bond, input-leg (d^2), output-leg (d^2), right-bond], boundary
caps, and optional per-bond readout caps that close the chain after any
number of steps for mid-evolution state readout.

File container "OQPT v1": 8-byte magic ``OQPTMPO1``; 8-byte little-endian
header length; UTF-8 JSON header; per-step complex128 little-endian
tensor payloads (row-major); cap payloads; 4-byte CRC32 of all payload
bytes.
"""

import io
import json
import struct
import zlib
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ptmpo.mps import compress_window, qr_step_l2r, svd_step_r2l
from ptmpo.tensor import SvdTruncation, svd_truncate

MAGIC = b"OQPTMPO1"
FORMAT_VERSION = 1


class FormatError(IOError):
    """Raised on malformed or corrupt process-tensor containers."""


@dataclass
class BondProfile:
    """Per-bond extents chi_0 ... chi_N."""

    extents: List[int]

    def __post_init__(self):
        if any(int(x) < 1 for x in self.extents):
            raise ValueError("bond extents must be positive")
        self.extents = [int(x) for x in self.extents]

    @property
    def max(self) -> int:
        return max(self.extents)


class ProcessTensor:
    """A bare-environment process tensor (no system propagators inside).

    ``caps[n]`` closes the chain after slot n-1 (so ``caps[0]`` closes
    the empty chain and ``caps[N]`` is the final trace cap).
    """

    def __init__(self, tensors: List[np.ndarray], caps: List[np.ndarray],
                 dt: float, metadata: Optional[dict] = None):
        if len(tensors) < 1:
            raise ValueError("a process tensor needs at least one step")
        self.tensors = [np.ascontiguousarray(t, dtype=complex) for t in tensors]
        self.caps = [np.ascontiguousarray(c, dtype=complex) for c in caps]
        self.dt = float(dt)
        self.metadata = dict(metadata or {})
        self._validate()

    def _validate(self):
        n = len(self.tensors)
        if len(self.caps) != n + 1:
            raise ValueError("need one cap per bond (N+1 caps)")
        d2 = self.tensors[0].shape[1]
        d = int(round(d2 ** 0.5))
        if d * d != d2:
            raise ValueError("input leg extent must be a perfect square")
        for i, t in enumerate(self.tensors):
            if t.ndim != 4:
                raise ValueError("slot tensors must be rank 4")
            if t.shape[1] != d2 or t.shape[2] != d2:
                raise ValueError("input/output legs must all have extent d^2")
            if i > 0 and t.shape[0] != self.tensors[i - 1].shape[3]:
                raise ValueError(f"bond mismatch between slots {i-1} and {i}")
        if self.tensors[0].shape[0] != 1:
            raise ValueError("left edge bond must have extent 1")
        for n_, c in enumerate(self.caps):
            want = (self.tensors[n_].shape[0] if n_ < n
                    else self.tensors[-1].shape[3])
            if c.shape != (want,):
                raise ValueError(f"cap {n_} has wrong extent")

    @property
    def n_steps(self) -> int:
        return len(self.tensors)

    @property
    def dimension(self) -> int:
        return int(round(self.tensors[0].shape[1] ** 0.5))

    @property
    def trace_cap(self) -> np.ndarray:
        return self.caps[-1]

    def initial_bond(self) -> np.ndarray:
        """Left-edge boundary vector (extent-1 bond)."""
        return np.ones(1, dtype=complex)

    def apply_slot(self, n: int, w: np.ndarray) -> np.ndarray:
        """Apply slot n to a running (bond, d^2) array."""
        return np.einsum("li,lior->ro", w, self.tensors[n])

    def readout(self, n: int, w: np.ndarray) -> np.ndarray:
        """Close the bond of a running (bond, d^2) array after slot n-1."""
        return self.caps[n] @ w


def trivial_pt(dimension: int, n_steps: int, dt: float) -> ProcessTensor:
    """Bond-1 identity-action process tensor (no environment)."""
    d2 = dimension * dimension
    slot = np.eye(d2, dtype=complex).reshape(1, d2, d2, 1)
    one = np.ones(1, dtype=complex)
    return ProcessTensor([slot.copy() for _ in range(n_steps)],
                         [one.copy() for _ in range(n_steps + 1)], dt,
                         metadata={"kind": "trivial"})


def bond_profile(pt: ProcessTensor) -> BondProfile:
    extents = [pt.tensors[0].shape[0]] + [t.shape[3] for t in pt.tensors]
    return BondProfile(extents)


# -- container I/O ------------------------------------------------------------

def pt_write(pt: ProcessTensor, sink) -> None:
    """Write an OQPT v1 container to a path or binary file object."""
    close = False
    if not hasattr(sink, "write"):
        sink = open(sink, "wb")
        close = True
    try:
        header = {
            "version": FORMAT_VERSION,
            "N": pt.n_steps,
            "d": pt.dimension,
            "dt": pt.dt,
            "bonds": bond_profile(pt).extents,
            "metadata": pt.metadata,
        }
        hbytes = json.dumps(header).encode("utf-8")
        sink.write(MAGIC)
        sink.write(struct.pack("<Q", len(hbytes)))
        sink.write(hbytes)
        crc = 0
        for t in pt.tensors:
            payload = np.ascontiguousarray(t, dtype="<c16").tobytes()
            crc = zlib.crc32(payload, crc)
            sink.write(payload)
        for c in pt.caps:
            payload = np.ascontiguousarray(c, dtype="<c16").tobytes()
            crc = zlib.crc32(payload, crc)
            sink.write(payload)
        sink.write(struct.pack("<I", crc & 0xFFFFFFFF))
    finally:
        if close:
            sink.close()


def _read_exact(source, n: int) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise FormatError("truncated process-tensor container")
    return data


def pt_read(source) -> ProcessTensor:
    """Read an OQPT v1 container from a path or binary file object."""
    close = False
    if not hasattr(source, "read"):
        source = open(source, "rb")
        close = True
    try:
        if _read_exact(source, 8) != MAGIC:
            raise FormatError("bad magic bytes (not an OQPT container)")
        (hlen,) = struct.unpack("<Q", _read_exact(source, 8))
        try:
            header = json.loads(_read_exact(source, hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"bad header: {e}") from e
        if header.get("version") != FORMAT_VERSION:
            raise FormatError(f"unsupported version {header.get('version')!r}")
        n = int(header["N"])
        d = int(header["d"])
        bonds = [int(x) for x in header["bonds"]]
        if len(bonds) != n + 1 or any(b < 1 for b in bonds):
            raise FormatError("inconsistent bond profile in header")
        d2 = d * d
        crc = 0
        tensors = []
        for i in range(n):
            shape = (bonds[i], d2, d2, bonds[i + 1])
            payload = _read_exact(source, 16 * int(np.prod(shape)))
            crc = zlib.crc32(payload, crc)
            tensors.append(np.frombuffer(payload, dtype="<c16").reshape(shape))
        caps = []
        for i in range(n + 1):
            want = bonds[i] if i < n else bonds[n]
            payload = _read_exact(source, 16 * want)
            crc = zlib.crc32(payload, crc)
            caps.append(np.frombuffer(payload, dtype="<c16"))
        (stored,) = struct.unpack("<I", _read_exact(source, 4))
        if stored != (crc & 0xFFFFFFFF):
            raise FormatError("payload checksum mismatch")
        try:
            return ProcessTensor(tensors, caps, float(header["dt"]),
                                 header.get("metadata"))
        except ValueError as e:
            raise FormatError(f"invalid tensor data: {e}") from e
    finally:
        if close:
            source.close()


# -- combination ---------------------------------------------------------------

def pt_combine(a: ProcessTensor, b: ProcessTensor,
               trunc: SvdTruncation) -> ProcessTensor:
    """Combine two process tensors into one carrying both environments.

    Per step, b's output leg feeds a's input leg (b acts first); bond
    spaces become products and are recompressed immediately, with caps
    tracked through every gauge move.
    """
    if a.n_steps != b.n_steps:
        raise ValueError("step-count mismatch")
    if a.dimension != b.dimension:
        raise ValueError("dimension mismatch")
    if abs(a.dt - b.dt) > 1e-15 * max(abs(a.dt), 1.0):
        raise ValueError("time-step mismatch")
    n = a.n_steps
    d2 = a.dimension ** 2

    # Intermediate cuts (input pre-compression, zip-up) use a tighter
    # threshold so only the final canonical sweep truncates at the
    # requested accuracy; zip-up cuts happen against a non-canonical
    # environment and would otherwise dominate the error budget.
    inner = SvdTruncation(epsrel=trunc.epsrel * 0.1, max_rank=trunc.max_rank)

    # Pre-compress each input at the inner truncation so the raw
    # product bonds entering the zip-up stay as narrow as the target
    # accuracy allows.
    def _folded_copy(pt):
        s = [t.reshape(t.shape[0], -1, t.shape[3]).copy() for t in pt.tensors]
        c = [np.array(x, copy=True) for x in pt.caps]
        return s, c

    sa, ca = _folded_copy(a)
    sb, cb = _folded_copy(b)
    if n > 1:
        compress_window(sa, 0, n - 1, inner, ca)
        compress_window(sb, 0, n - 1, inner, cb)
    a_tensors = [t.reshape(t.shape[0], d2, d2, t.shape[2]) for t in sa]
    b_tensors = [t.reshape(t.shape[0], d2, d2, t.shape[2]) for t in sb]

    # Zip-up sweep over the product chain with fused (in, out) physical
    # leg. Product bonds are never materialized on both sides of a site
    # at once: a carry matrix maps the truncated bond back onto the raw
    # (chi_a chi_b) product bond and is folded into the next site before
    # that site is formed.
    sites = []
    caps = [np.kron(ca[0], cb[0])]
    carry3 = None  # [kept, right-bond of a, right-bond of b]
    for i in range(n):
        ta, tb = a_tensors[i], b_tensors[i]
        if carry3 is None:
            # c[(la lb), in, out, (ra rb)] = sum_m ta[la,m,o,ra] tb[lb,i,m,rb]
            c = np.einsum("amor,bims->abiors", ta, tb, optimize=True)
            la, lb, _, _, ra, rb = c.shape
            cur = c.reshape(la * lb, d2 * d2, ra * rb)
        else:
            t1 = np.tensordot(carry3, ta, axes=(1, 0))  # k, lb, m, o, ra
            t2 = np.tensordot(t1, tb, axes=([1, 2], [0, 2]))  # k, o, ra, i, rb
            k0, _, ra, _, rb = t2.shape
            cur = np.ascontiguousarray(t2.transpose(0, 3, 1, 2, 4))
            cur = cur.reshape(k0, d2 * d2, ra * rb)
        l, p, r = cur.shape
        u, s, v, _ = svd_truncate(cur.reshape(l * p, r), inner)
        k = s.size
        sites.append(u.reshape(l, p, k))
        carry = s[:, None] * v.conj().T  # [kept, raw right bond]
        carry3 = carry.reshape(k, ra, rb)
        caps.append(carry @ np.kron(ca[i + 1], cb[i + 1]))
    # full backward truncated sweep to propagate compression globally
    compress_window(sites, 0, n - 1, trunc, caps)
    tensors = []
    for i in range(n):
        l, _, r = sites[i].shape
        tensors.append(sites[i].reshape(l, d2, d2, r))
    meta = {"kind": "combined",
            "parents": [a.metadata, b.metadata],
            "epsrel": trunc.epsrel}
    return ProcessTensor(tensors, caps, a.dt, meta)
