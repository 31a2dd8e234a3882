import numpy as np
import pytest

from grandcanon import effective as ef
from grandcanon import fock, states
from grandcanon._linalg import random_hermitian

A, B, N = 0.75, 2.0**-12, 10_000
QUAD = ef.QuadraticCurve(A, B)


@pytest.fixture(scope="module")
def single_mode():
    spec = fock.FockSpaceSpec(1, 1000)
    H = fock.direct_sum_hamiltonian(np.array([[0.5]]), np.array([[0.25]]), spec)
    return spec, H, fock.number_operator(spec)


@pytest.fixture(scope="module")
def sector_states(single_mode):
    spec = single_mode[0]
    ns = np.unique(np.round(np.geomspace(10, 1000, 9)).astype(int))
    return [ef.sector_state(spec, int(n)) for n in ns]


def test_chemical_potential_exact_on_low_degree():
    assert ef.chemical_potential(ef.LinearCurve(1.25), N) == 1.25
    assert ef.chemical_potential(QUAD, N) == A + 2 * B * N
    assert ef.chemical_potential(QUAD, N, h=4) == A + 2 * B * N


def test_tabulated_chemical_potential():
    tab = ef.TabulatedCurve.from_function(QUAD, np.arange(8990, 10011))
    assert abs(ef.chemical_potential(tab, N) - (A + 2 * B * N)) <= 1e-8


def test_tabulated_domain():
    tab = ef.TabulatedCurve.from_function(QUAD, np.arange(9000, 10001))
    with pytest.raises(ValueError, match="domain"):
        ef.chemical_potential(tab, N)
    with pytest.raises(ValueError, match="increasing"):
        ef.TabulatedCurve([0, 2, 1, 3], [0, 0, 0, 0])


def test_taylor_remainder():
    for n_s in (0, 1, 17, 999):
        assert ef.taylor_remainder(ef.LinearCurve(A), N, n_s) == 0.0
        assert ef.taylor_remainder(QUAD, N, n_s) == B * n_s**2
    with pytest.raises(ValueError):
        ef.taylor_remainder(QUAD, N, N)


def test_total_energy_examples():
    spec = fock.FockSpaceSpec(2, 3)
    rng = np.random.default_rng(0)
    w = random_hermitian(4, rng).reshape(2, 2, 2, 2)
    w = ((w + w.transpose(1, 0, 3, 2)) / 2).reshape(4, 4)
    H = fock.direct_sum_hamiltonian(random_hermitian(2, rng), w, spec)
    Nop = fock.number_operator(spec)

    vacuum = ef.sector_state(spec, 0)
    e_t, n_s = ef.total_energy_surrogate(H, vacuum, QUAD, N)
    assert n_s == 0.0 and e_t == QUAD(N)

    rho = states.random_density(spec.total_dim, 5, 4)
    e_h = states.expectation(H.to_dense(), rho).value
    n_avg = states.expectation(Nop.to_dense(), rho).value
    lin = ef.LinearCurve(A)
    e_t, n_s = ef.total_energy_surrogate(H, rho, lin, N)
    assert e_t == pytest.approx(e_h + lin(N) - A * n_avg, rel=1e-14)
    assert n_s == pytest.approx(n_avg)
    e_t, _ = ef.total_energy_surrogate(H, rho, ef.LinearCurve(0.0), N)
    assert e_t == pytest.approx(e_h, abs=1e-14)
    with pytest.raises(ValueError, match="system larger than total"):
        ef.total_energy_surrogate(H, ef.sector_state(spec, 3), QUAD, 3)


def test_quadratic_residual_scan(single_mode, sector_states):
    _, H, Nop = single_mode
    scan = ef.residual_scan(H, Nop, QUAD, N, sector_states)
    assert [r.epsilon for r in scan.rows] == sorted(r.epsilon for r in scan.rows)
    for r in scan.rows:
        assert r.residual == B * round(r.epsilon * N) ** 2
    assert scan.slope == pytest.approx(2.0, abs=1e-3)
    assert "slope=" in scan.summary()


def test_linear_residuals_vanish(single_mode, sector_states):
    _, H, Nop = single_mode
    scan = ef.residual_scan(H, Nop, ef.LinearCurve(A), N, sector_states)
    assert scan.exact and all(r.residual == 0.0 for r in scan.rows)
    assert "slope=exact" in scan.summary()


def test_nonpolynomial_curve_slope(single_mode, sector_states):
    _, H, Nop = single_mode
    tab = ef.TabulatedCurve.from_function(lambda n: 0.3 * n**1.5, np.arange(8900, 10011))
    scan = ef.residual_scan(H, Nop, tab, N, sector_states)
    assert abs(scan.slope - 2.0) <= 0.1


def test_shift_covariance(single_mode, sector_states):
    _, H, Nop = single_mode
    a = ef.residual_scan(H, Nop, QUAD, N, sector_states)
    b = ef.residual_scan(H, Nop, QUAD.shifted(-42.0), N, sector_states)
    for p, q in zip(a.rows, b.rows):
        assert abs(p.residual - q.residual) <= 1e-9


def test_large_epsilon_warns():
    spec = fock.FockSpaceSpec(1, 6)
    H = fock.direct_sum_hamiltonian(np.array([[1.0]]), np.array([[0.0]]), spec)
    sts = [ef.sector_state(spec, n) for n in (1, 3, 6)]
    with pytest.warns(UserWarning, match="not small"):
        scan = ef.residual_scan(H, fock.number_operator(spec), QUAD, 10, sts)
    assert scan.notes


def test_scan_csv(single_mode, sector_states, tmp_path):
    _, H, Nop = single_mode
    scan = ef.residual_scan(H, Nop, QUAD, N, sector_states[:3])
    path = tmp_path / "mu.csv"
    scan.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epsilon,e_total,e_eff,residual" and len(lines) == 4
