"""Truncated Fock spaces and block-diagonal operators on them.

The truncated space is the direct sum of the n-particle sectors for
n = 0 .. M. Sector n is the n-fold tensor power of a d-dimensional
one-particle space (distinguishable statistics) or its symmetric /
antisymmetric subspace. Sector 0 is the one-dimensional vacuum.

Basis ordering is fixed: sectors ascending, and inside a sector the
lexicographic order of tensor-index tuples (distinguishable) or of sorted
occupation tuples (bosonic: nondecreasing, fermionic: strictly increasing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, combinations_with_replacement, product

import numpy as np
import scipy.linalg

from grandcanon._linalg import max_abs, require_hermitian

STATISTICS = ("distinguishable", "bosonic", "fermionic")
GRAM_SCHMIDT_TOL = 1e-12


@dataclass(frozen=True)
class FockSpaceSpec:
    single_particle_dim: int
    max_sector: int
    statistics: str = "distinguishable"

    def __post_init__(self):
        if self.single_particle_dim < 1:
            raise ValueError("single-particle dimension must be >= 1")
        if self.max_sector < 0:
            raise ValueError("max_sector must be >= 0")
        if self.statistics not in STATISTICS:
            raise ValueError(f"statistics must be one of {STATISTICS}")

    def sector_dim(self, n):
        d = self.single_particle_dim
        if self.statistics == "distinguishable":
            return d**n
        if self.statistics == "bosonic":
            return math.comb(d + n - 1, n)
        return math.comb(d, n) if n <= d else 0

    @property
    def sector_dims(self):
        return [self.sector_dim(n) for n in range(self.max_sector + 1)]

    @property
    def total_dim(self):
        return sum(self.sector_dims)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sector_dims)]).astype(int).tolist()


def sector_labels(spec, n):
    """Ordered basis labels of sector ``n`` (tuples of one-particle indices)."""
    d = spec.single_particle_dim
    if spec.statistics == "distinguishable":
        return list(product(range(d), repeat=n))
    if spec.statistics == "bosonic":
        return list(combinations_with_replacement(range(d), n))
    return list(combinations(range(d), n))


@dataclass(frozen=True)
class FockBasis:
    spec: FockSpaceSpec
    sectors: list
    offsets: list

    def index(self, n, label):
        return self.offsets[n] + self.sectors[n].index(tuple(label))


def build_fock_space(spec):
    sectors = [sector_labels(spec, n) for n in range(spec.max_sector + 1)]
    return FockBasis(spec, sectors, spec.offsets)


def _permutation_sign(t):
    """Sign of the sorting permutation of ``t``; 0 if entries repeat."""
    t = list(t)
    if len(set(t)) < len(t):
        return 0
    sign = 1
    for i in range(len(t)):
        for j in range(i + 1, len(t)):
            if t[i] > t[j]:
                sign = -sign
    return sign


def _gram_schmidt(cols, tol=GRAM_SCHMIDT_TOL):
    basis = []
    for v in cols.T:
        w = v.astype(complex)
        for q in basis:
            w = w - (q.conj() @ w) * q
        norm = np.linalg.norm(w)
        if norm > tol:
            basis.append(w / norm)
    if not basis:
        return np.zeros((cols.shape[0], 0), dtype=complex)
    return np.stack(basis, axis=1)


def symmetrizer(spec, n):
    """Isometry from the (anti)symmetric sector into the full tensor power.

    Returns a ``d**n x sector_dim(n)`` matrix with orthonormal columns. For
    distinguishable statistics it is the identity.
    """
    d = spec.single_particle_dim
    if spec.statistics == "distinguishable":
        return np.eye(d**n, dtype=complex)
    labels = sector_labels(spec, n)
    where = {lab: k for k, lab in enumerate(labels)}
    raw = np.zeros((d**n, len(labels)))
    for flat, t in enumerate(product(range(d), repeat=n)):
        key = tuple(sorted(t))
        if key not in where:
            continue
        raw[flat, where[key]] = 1.0 if spec.statistics == "bosonic" else _permutation_sign(t)
    return _gram_schmidt(raw)


def _apply_local(op, tensor, axes, n):
    """Apply a k-site operator (shape (d,)*2k) to the given tensor axes.

    ``tensor`` has n particle axes followed by one column axis.
    """
    k = len(axes)
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    # tensordot puts the k output legs first; move them back into place.
    return np.moveaxis(out, list(range(k)), list(axes))


def _distinguishable_sector_hamiltonian(h, pair_w, n):
    d = h.shape[0]
    dim = d**n
    if n == 0:
        return np.zeros((1, 1), dtype=complex)
    if d == 1:
        # Single mode: every factor and pair contributes the same scalar.
        return np.array([[n * h[0, 0] + n * (n - 1) / 2 * pair_w[0, 0]]], dtype=complex)
    ident = np.eye(dim, dtype=complex).reshape((d,) * n + (dim,))
    w4 = pair_w.reshape(d, d, d, d)
    acc = np.zeros_like(ident)
    for i in range(n):
        acc += _apply_local(h, ident, (i,), n)
    for i in range(n):
        for k in range(i + 1, n):
            acc += _apply_local(w4, ident, (i, k), n)
    return acc.reshape(dim, dim)


def _check_generators(h, pair_w):
    h = require_hermitian(h, "one-body term")
    d = h.shape[0]
    pair_w = require_hermitian(pair_w, "pair interaction")
    if pair_w.shape != (d * d, d * d):
        raise ValueError(f"pair interaction must be {d * d}x{d * d}")
    w4 = pair_w.reshape(d, d, d, d)
    if max_abs(w4 - w4.transpose(1, 0, 3, 2)) > 1e-10:
        raise ValueError("pair interaction is not symmetric under exchange of the two particles")
    return h, pair_w


def sector_hamiltonian(h, pair_w, n, spec):
    """n-particle Hamiltonian: one-body ``h`` on every factor plus ``pair_w`` on every pair.

    For bosons and fermions the distinguishable operator is compressed onto
    the (anti)symmetric subspace.
    """
    h, pair_w = _check_generators(h, pair_w)
    if h.shape[0] != spec.single_particle_dim:
        raise ValueError("one-body term does not match the single-particle dimension")
    if not 0 <= n <= spec.max_sector:
        raise ValueError(f"sector {n} outside 0..{spec.max_sector}")
    full = _distinguishable_sector_hamiltonian(h, pair_w, n)
    if spec.statistics == "distinguishable" or n == 0:
        return full
    s = symmetrizer(spec, n)
    return s.conj().T @ full @ s


class BlockOperator:
    """Block-diagonal Hermitian operator, one block per particle-number sector."""

    def __init__(self, spec, blocks, check=True):
        self.spec = spec
        self.blocks = [np.asarray(b, dtype=complex) for b in blocks]
        if len(self.blocks) != spec.max_sector + 1:
            raise ValueError(f"expected {spec.max_sector + 1} blocks, got {len(self.blocks)}")
        for n, b in enumerate(self.blocks):
            dim = spec.sector_dim(n)
            if b.shape != (dim, dim):
                raise ValueError(f"block {n} has shape {b.shape}, expected {(dim, dim)}")
            if check and max_abs(b - b.conj().T) > 1e-12:
                raise ValueError(f"block {n} is not Hermitian")

    def _same_spec(self, other):
        if self.spec != other.spec:
            raise ValueError("block operators live on different Fock spaces")

    def __add__(self, other):
        self._same_spec(other)
        return BlockOperator(self.spec, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._same_spec(other)
        return BlockOperator(self.spec, [a - b for a, b in zip(self.blocks, other.blocks)])

    def scaled(self, c):
        return BlockOperator(self.spec, [c * b for b in self.blocks])

    def shifted(self, c):
        """Add ``c * Id``."""
        return BlockOperator(self.spec, [b + c * np.eye(len(b)) for b in self.blocks])

    def to_dense(self):
        nonempty = [b for b in self.blocks if b.size]
        return scipy.linalg.block_diag(*nonempty).astype(complex)

    def eigvalsh(self):
        return np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in self.blocks if b.size]))

    def dump(self):
        """Text dump with full-precision hex floats, one matrix row per line."""
        s = self.spec
        lines = [
            "# block-operator v1",
            f"spec d={s.single_particle_dim} M={s.max_sector} statistics={s.statistics}",
        ]
        for n, b in enumerate(self.blocks):
            lines.append(f"block {n} {b.shape[0]} {b.shape[1]}")
            for row in b:
                lines.append(" ".join(f"{z.real.hex()},{z.imag.hex()}" for z in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text):
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        fields = dict(kv.split("=") for kv in lines[0].split()[1:])
        spec = FockSpaceSpec(int(fields["d"]), int(fields["M"]), fields["statistics"])
        blocks, pos = [], 1
        while pos < len(lines):
            _, _, rows, cols = lines[pos].split()
            rows, cols = int(rows), int(cols)
            data = np.zeros((rows, cols), dtype=complex)
            for r in range(rows):
                entries = lines[pos + 1 + r].split()
                for c, e in enumerate(entries):
                    re, im = e.split(",")
                    data[r, c] = complex(float.fromhex(re), float.fromhex(im))
            blocks.append(data)
            pos += rows + 1
        return cls(spec, blocks, check=False)


def number_operator(spec):
    """Block n is ``n * Id`` on sector n."""
    return BlockOperator(spec, [n * np.eye(spec.sector_dim(n)) for n in range(spec.max_sector + 1)])


def direct_sum_hamiltonian(h, pair_w, spec):
    """Same one-body and pair terms in every sector, n = 0 .. M."""
    h, pair_w = _check_generators(h, pair_w)
    return BlockOperator(
        spec, [sector_hamiltonian(h, pair_w, n, spec) for n in range(spec.max_sector + 1)]
    )


def effective_hamiltonian(H, N, mu):
    """``H - mu N`` blockwise."""
    H._same_spec(N)
    return BlockOperator(H.spec, [a - mu * b for a, b in zip(H.blocks, N.blocks)])


def sector_embedding(spec, n):
    """Isometric inclusion of sector n into the truncated space (total x sector)."""
    emb = np.zeros((spec.total_dim, spec.sector_dim(n)))
    off = spec.offsets[n]
    emb[off:off + spec.sector_dim(n), :] = np.eye(spec.sector_dim(n))
    return emb


@dataclass(frozen=True)
class IdentityReport:
    orthogonality: float
    completeness: float

    @property
    def max_deviation(self):
        return max(self.orthogonality, self.completeness)


def verify_direct_sum(spec):
    """Deviation from ``i_n* i_m = delta_nm Id`` and ``sum_n i_n i_n* = Id``."""
    embs = [sector_embedding(spec, n) for n in range(spec.max_sector + 1)]
    ortho = 0.0
    for n, a in enumerate(embs):
        for m, b in enumerate(embs):
            target = np.eye(a.shape[1]) if n == m else np.zeros((a.shape[1], b.shape[1]))
            ortho = max(ortho, max_abs(a.conj().T @ b - target))
    total = sum(e @ e.conj().T for e in embs)
    return IdentityReport(ortho, max_abs(total - np.eye(spec.total_dim)))


def sector_projector(spec, n):
    e = sector_embedding(spec, n)
    return e @ e.T


def particle_permutation(d, perm):
    """Matrix permuting the tensor factors of ``(C^d)^{\\otimes n}``."""
    n = len(perm)
    dim = d**n
    idx = np.arange(dim).reshape((d,) * n)
    target = np.transpose(idx, perm).reshape(-1)
    p = np.zeros((dim, dim))
    p[np.arange(dim), target] = 1.0
    return p
