import numpy as np

HERMITIAN_TOL = 1e-10


def max_abs(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def require_hermitian(a, what="operator", tol=HERMITIAN_TOL):
    """Return ``a`` as a square complex array, raising if it is not Hermitian."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {a.shape}")
    if max_abs(a - a.conj().T) > tol:
        raise ValueError(f"non-Hermitian generator: {what} deviates from its adjoint")
    return a.astype(complex)


def random_hermitian(dim, rng, scale=1.0):
    """GUE-like random Hermitian matrix."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (g + g.conj().T) / 2.0


def random_unitary(dim, rng):
    """Haar-random unitary via QR with the phase correction of Mezzadri."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
