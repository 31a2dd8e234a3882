"""Density operators in spectral form.

A state is stored as weights ``alpha_n`` and an orthonormal basis ``e_n``;
expectations are computed from the spectral sum
``sum_n alpha_n <e_n, T e_n>`` rather than from ``trace(rho @ T)``.

Tensor products use S-major indexing: composite index = s * dim_R + r.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from grandcanon._linalg import max_abs, random_unitary, require_hermitian
from grandcanon.seeding import generator

TRACE_TOL = 1e-12
ORTHO_TOL = 1e-12
CLAMP_TOL = 1e-10
DEGENERACY_TOL = 1e-12


class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix with its eigen-decomposition.

    Build one with :meth:`from_matrix` or :meth:`from_spectral`. Eigenvalues
    in ``[-1e-10, 0)`` are clamped to zero and the weights renormalized; more
    negative eigenvalues raise.
    """

    def __init__(self, weights, vectors):
        w = np.asarray(weights, dtype=float).copy()
        v = np.asarray(vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or w.shape != (v.shape[1],):
            raise ValueError("need a full orthonormal basis and one weight per vector")
        if np.any(w < -CLAMP_TOL):
            raise ValueError(f"negative weight {w.min():.3e}: not a density operator")
        w[w < 0] = 0.0
        total = w.sum()
        if abs(total - 1.0) > TRACE_TOL + CLAMP_TOL * len(w):
            raise ValueError(f"weights sum to {total!r}, not 1")
        w = w / total
        if max_abs(v.conj().T @ v - np.eye(v.shape[1])) > ORTHO_TOL * max(1, v.shape[0]):
            raise ValueError("spectral vectors are not orthonormal")
        order = np.argsort(-w, kind="stable")
        self.weights = w[order]
        self.vectors = v[:, order]
        self.weights.setflags(write=False)
        self.vectors.setflags(write=False)
        self._matrix = None

    @classmethod
    def from_spectral(cls, weights, vectors):
        return cls(weights, vectors)

    @classmethod
    def from_matrix(cls, matrix):
        m = require_hermitian(matrix, "density matrix")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL * max(1, len(m)):
            raise ValueError(f"trace is {tr!r}, not 1")
        evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
        return cls(evals, evecs)

    @classmethod
    def pure(cls, psi):
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        # First QR column is psi up to a phase; the rest complete the basis.
        q, _ = np.linalg.qr(np.column_stack([psi, np.eye(len(psi), dtype=complex)]))
        w = np.zeros(len(psi))
        w[0] = 1.0
        return cls(w, q)

    @classmethod
    def maximally_mixed(cls, dim):
        return cls(np.full(dim, 1.0 / dim), np.eye(dim))

    @property
    def dim(self):
        return len(self.weights)

    @property
    def matrix(self):
        if self._matrix is None:
            v = self.vectors
            m = (v * self.weights) @ v.conj().T
            self._matrix = (m + m.conj().T) / 2
            self._matrix.setflags(write=False)
        return self._matrix

    @property
    def rank(self):
        return int(np.count_nonzero(self.weights > DEGENERACY_TOL))

    def purity(self):
        return float(np.sum(self.weights**2))

    def __repr__(self):
        return f"DensityOperator(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True)
class ProductSplit:
    dim_S: int
    dim_R: int

    def __post_init__(self):
        if self.dim_S < 1 or self.dim_R < 1:
            raise ValueError("subsystem dimensions must be >= 1")

    @property
    def dim(self):
        return self.dim_S * self.dim_R


class Expectation(NamedTuple):
    value: float
    absolute_sum: float


def expectation(T, rho):
    """Spectral expectation ``sum_n alpha_n <e_n, T e_n>``.

    Also returns ``sum_n alpha_n |<e_n, T e_n>|``, the absolute series whose
    finiteness defines compatibility of ``rho`` with ``T``.
    """
    T = require_hermitian(T, "observable")
    if T.shape[0] != rho.dim:
        raise ValueError(f"observable has dimension {T.shape[0]}, state has {rho.dim}")
    # Zero-weight vectors contribute nothing to either series.
    support = rho.weights > 0
    v = rho.vectors[:, support]
    w = rho.weights[support]
    diag = np.sum(v.conj() * (T @ v), axis=0).real
    return Expectation(float(np.sum(w * diag)), float(np.sum(w * np.abs(diag))))


def _degenerate_groups(weights, tol=DEGENERACY_TOL):
    groups, start = [], 0
    for k in range(1, len(weights) + 1):
        if k == len(weights) or abs(weights[k] - weights[start]) > tol:
            groups.append(np.arange(start, k))
            start = k
    return groups


def representation_independence_check(rho, T, n_rotations, seed):
    """Largest change of the spectral expectation under random re-representations.

    Each degenerate eigenspace gets an independent Haar-random unitary, which
    also covers the free phases of nondegenerate vectors.
    """
    base = expectation(T, rho).value
    rng = generator(seed)
    groups = _degenerate_groups(rho.weights)
    worst = 0.0
    for _ in range(n_rotations):
        vecs = np.array(rho.vectors)
        for g in groups:
            vecs[:, g] = vecs[:, g] @ random_unitary(len(g), rng)
        rotated = DensityOperator(rho.weights, vecs)
        worst = max(worst, abs(expectation(T, rotated).value - base))
    return worst


def gibbs_state(H, beta):
    """``exp(-beta H) / trace`` built from the spectrum of ``H``.

    The spectrum is shifted by its minimum before exponentiating, which leaves
    the state unchanged and avoids overflow. ``beta = inf`` gives the uniform
    mixture over the ground space.
    """
    H = require_hermitian(H, "Hamiltonian")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    evals, evecs = np.linalg.eigh((H + H.conj().T) / 2)
    gap = evals - evals[0]
    if np.isinf(beta):
        w = (gap <= DEGENERACY_TOL * max(1.0, abs(evals[0]))).astype(float)
    else:
        w = np.exp(-beta * gap)
    return DensityOperator(w / w.sum(), evecs)


def partial_trace(rho, split, keep="S"):
    """Reduced state on S (tracing out R) or on R (tracing out S)."""
    if split.dim != rho.dim:
        raise ValueError(f"split {split.dim_S}x{split.dim_R} does not match dimension {rho.dim}")
    t = np.asarray(rho.matrix).reshape(split.dim_S, split.dim_R, split.dim_S, split.dim_R)
    if keep == "S":
        red = np.einsum("arbr->ab", t)
    elif keep == "R":
        red = np.einsum("sasb->ab", t)
    else:
        raise ValueError("keep must be 'S' or 'R'")
    return DensityOperator.from_matrix(red)


def check_partial_trace_formula(T_S, rho, split):
    """``|E_rho[T_S (x) Id_R] - E_{tr_R rho}[T_S]|`` with both sides in spectral form."""
    T_S = require_hermitian(T_S, "system observable")
    if T_S.shape[0] != split.dim_S:
        raise ValueError("observable does not act on the S factor")
    lhs = expectation(np.kron(T_S, np.eye(split.dim_R)), rho).value
    rhs = expectation(T_S, partial_trace(rho, split, "S")).value
    return abs(lhs - rhs)


def check_additivity(Ts, rho):
    """``|E[sum T_i] - sum E[T_i]|``."""
    if not Ts:
        return 0.0
    total = sum(require_hermitian(T) for T in Ts)
    return abs(expectation(total, rho).value - sum(expectation(T, rho).value for T in Ts))


def random_density(dim, rank, seed):
    """Random state of given rank: flat-Dirichlet weights, Haar eigenbasis."""
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must lie in 1..{dim}")
    rng = generator(seed)
    e = rng.exponential(size=rank)
    w = np.zeros(dim)
    w[:rank] = e / e.sum()
    return DensityOperator(w, random_unitary(dim, rng))


def product_state(rho_S, rho_R):
    return DensityOperator.from_matrix(np.kron(rho_S.matrix, rho_R.matrix))
