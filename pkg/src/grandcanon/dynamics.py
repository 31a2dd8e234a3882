"""Von Neumann propagation, grand-canonical states and functional calculus.

Two propagators are provided. ``exact`` conjugates by
``exp(-i H t / hbar)`` built from the spectrum of ``H``. ``rk4`` integrates
``d rho/dt = -i [H, rho] / hbar`` with classic Runge-Kutta and never
renormalizes, so its trace and positivity drift are visible in the output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from grandcanon import fock
from grandcanon._linalg import max_abs, require_hermitian
from grandcanon.states import DensityOperator, ProductSplit, gibbs_state

RK4_GUARD = 0.1
MAX_PRODUCT_DIM = 256


def matrix_function(T, f):
    """``V f(L) V*`` from the eigendecomposition of Hermitian ``T``."""
    T = require_hermitian(T, "matrix_function argument")
    evals, evecs = np.linalg.eigh((T + T.conj().T) / 2)
    fx = np.asarray(f(evals))
    if fx.shape != evals.shape:
        fx = np.broadcast_to(fx, evals.shape)
    return (evecs * fx) @ evecs.conj().T


def spectral_truncation(m):
    """``x -> x`` on ``[-m, m]`` and 0 outside."""
    return lambda x: np.where(np.abs(x) <= m, x, 0.0)


def check_tensor_functional_calculus(T, dim_R, f):
    """``max |f(T (x) Id_R) - f(T) (x) Id_R|``."""
    T = require_hermitian(T, "system operator")
    if T.shape[0] * dim_R > MAX_PRODUCT_DIM:
        raise ValueError(f"product dimension exceeds {MAX_PRODUCT_DIM}")
    ident = np.eye(dim_R)
    return max_abs(matrix_function(np.kron(T, ident), f) - np.kron(matrix_function(T, f), ident))


@dataclass(frozen=True)
class PropagatorConfig:
    method: str = "exact"
    dt: float = 0.01
    t_final: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.method not in ("exact", "rk4"):
            raise ValueError("method must be 'exact' or 'rk4'")
        if not self.dt > 0 or not self.t_final > 0 or not self.hbar > 0:
            raise ValueError("dt, t_final and hbar must be positive")
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Raw matrices ``rho(t_k)`` at ``t_k = k dt``, k = 0 .. n_steps."""

    times: np.ndarray
    matrices: list
    hamiltonian: np.ndarray

    def states(self):
        """Trajectory as density operators (raises if rk4 drift broke the state)."""
        return [DensityOperator.from_matrix(m) for m in self.matrices]

    def diagnostics(self):
        rows = []
        for t, m in zip(self.times, self.matrices):
            herm = (m + m.conj().T) / 2
            rows.append((
                float(t),
                float(np.trace(m).real),
                float(np.trace(m @ m).real),
                float(np.trace(self.hamiltonian @ m).real),
                float(np.linalg.eigvalsh(herm)[0]),
                max_abs(self.hamiltonian @ m - m @ self.hamiltonian),
            ))
        return rows

    def max_drift(self):
        """Largest entrywise deviation from the initial matrix."""
        return max(max_abs(m - self.matrices[0]) for m in self.matrices)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "trace", "purity", "energy", "min_eig", "commutator_norm"])
            for row in self.diagnostics():
                w.writerow([repr(x) for x in row])


def _dense(H):
    if isinstance(H, fock.BlockOperator):
        return H.to_dense()
    return np.asarray(H, dtype=complex)


def step_unitary(H, dt, hbar=1.0):
    return matrix_function(H, lambda x: np.exp(-1j * x * dt / hbar))


def _rk4_step(H, m, dt, hbar):
    def rhs(r):
        return (-1j / hbar) * (H @ r - r @ H)

    k1 = rhs(m)
    k2 = rhs(m + 0.5 * dt * k1)
    k3 = rhs(m + 0.5 * dt * k2)
    k4 = rhs(m + dt * k3)
    return m + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve(rho0, H_eff, cfg):
    """Trajectory of ``rho0`` under ``H_eff`` sampled at multiples of ``dt``."""
    H = require_hermitian(_dense(H_eff), "effective Hamiltonian")
    if H.shape[0] != rho0.dim:
        raise ValueError(f"Hamiltonian dimension {H.shape[0]} does not match state dimension {rho0.dim}")
    m = np.array(rho0.matrix)
    mats = [m]
    if cfg.method == "exact":
        # Each sample is rotated directly from t = 0 in the eigenbasis so
        # rounding does not accumulate over steps.
        evals, evecs = np.linalg.eigh((H + H.conj().T) / 2)
        m_eig = evecs.conj().T @ m @ evecs
        gaps = evals[:, None] - evals[None, :]
        for k in range(1, cfg.n_steps + 1):
            phase = np.exp(-1j * gaps * (k * cfg.dt / cfg.hbar))
            mats.append(evecs @ (m_eig * phase) @ evecs.conj().T)
    else:
        norm = np.linalg.norm(H, 2)
        if cfg.dt * norm / cfg.hbar > RK4_GUARD:
            raise ValueError(
                f"rk4 step too large: dt*||H||/hbar = {cfg.dt * norm / cfg.hbar:.3g} > {RK4_GUARD};"
                f" use dt <= {RK4_GUARD * cfg.hbar / norm:.3g}"
            )
        for _ in range(cfg.n_steps):
            m = _rk4_step(H, m, cfg.dt, cfg.hbar)
            mats.append(m)
    times = cfg.dt * np.arange(cfg.n_steps + 1)
    return Trajectory(times, mats, H)


def grand_canonical_state(H, N, mu, beta):
    """``exp(-beta (H - mu N)) / Z``."""
    return gibbs_state(fock.effective_hamiltonian(H, N, mu).to_dense(), beta)


def stationarity_check(rho, H_eff):
    """``max |[H_eff, rho]|``."""
    H = _dense(H_eff)
    m = rho.matrix
    return max_abs(H @ m - m @ H)


def born_markov_compare(rho1_0, rho2_0, H_eff_S, cfg, coupling=None):
    """Largest deviation between ``tr_R rho(t)`` and ``rho_1(t)``.

    The product state ``rho1_0 (x) rho2_0`` evolves under ``H_eff_S (x) Id_R``
    (plus ``coupling`` if given, a full-space Hermitian term); its reduction
    to S is compared entrywise with the direct evolution of ``rho1_0``.
    """
    H_S = require_hermitian(_dense(H_eff_S), "effective Hamiltonian")
    split = ProductSplit(rho1_0.dim, rho2_0.dim)
    if split.dim > MAX_PRODUCT_DIM:
        raise ValueError(f"product dimension exceeds {MAX_PRODUCT_DIM}")
    H_T = np.kron(H_S, np.eye(split.dim_R))
    if coupling is not None:
        H_T = H_T + require_hermitian(coupling, "coupling")
    joint = DensityOperator.from_matrix(np.kron(rho1_0.matrix, rho2_0.matrix))
    full = evolve(joint, H_T, cfg)
    direct = evolve(rho1_0, H_S, cfg)
    worst = 0.0
    for m_full, m_s in zip(full.matrices, direct.matrices):
        t = m_full.reshape(split.dim_S, split.dim_R, split.dim_S, split.dim_R)
        worst = max(worst, max_abs(np.einsum("arbr->ab", t) - m_s))
    return worst
