import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diqrng import qmath
from diqrng.qmath import (
    PAULI,
    Projector,
    TwoQubitState,
    arm_projector,
    born_probability,
    correlation_matrix,
    fidelity,
    hermitian_eig,
    is_physical,
    linear_polarizer,
    pauli_compose,
    pauli_decompose,
    random_physical_state,
    random_unitary,
)


def random_hermitian_unit_trace(rng):
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h = 0.5 * (g + g.conj().T)
    h = h - np.eye(4) * (np.trace(h).real - 1.0) / 4.0
    return TwoQubitState(h)


def charpoly_roots(a):
    """Oracle: eigenvalues via Newton's identities and companion-matrix roots.

    Builds the characteristic polynomial from traces of powers, then calls
    np.roots.  Entirely independent of the Jacobi rotation path under test.
    """
    p1 = np.trace(a)
    p2 = np.trace(a @ a)
    p3 = np.trace(a @ a @ a)
    p4 = np.trace(a @ a @ a @ a)
    e1 = p1
    e2 = (e1 * p1 - p2) / 2.0
    e3 = (e2 * p1 - e1 * p2 + p3) / 3.0
    e4 = (e3 * p1 - e2 * p2 + e1 * p3 - p4) / 4.0
    coeffs = [1.0, -e1, e2, -e3, e4]
    roots = np.roots([complex(c) for c in coeffs])
    assert np.max(np.abs(roots.imag)) < 1e-7
    return np.sort(roots.real)


class TestJacobiEigensolver:
    def test_matches_charpoly_roots_on_random_hermitian(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            h = 0.5 * (g + g.conj().T)
            w, _ = hermitian_eig(h)
            expected = charpoly_roots(h)
            assert np.max(np.abs(w - expected)) <= 1e-8

    def test_reconstruction_and_unitarity(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            h = 0.5 * (g + g.conj().T)
            w, v = hermitian_eig(h)
            assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) < 1e-10
            assert np.max(np.abs(v.conj().T @ v - np.eye(4))) < 1e-12

    def test_diagonal_and_degenerate(self):
        w, _ = hermitian_eig(np.diag([3.0, -1.0, 2.0, 2.0]))
        assert np.allclose(w, [-1.0, 2.0, 2.0, 3.0])
        w, _ = hermitian_eig(np.eye(3) * 0.5)
        assert np.allclose(w, 0.5)

    def test_three_by_three_real_symmetric(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            g = rng.standard_normal((3, 3))
            h = 0.5 * (g + g.T)
            w, v = hermitian_eig(h)
            assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestPauliDecomposition:
    def test_identity_over_four(self):
        u = pauli_decompose(TwoQubitState.maximally_mixed())
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert np.allclose(u, expected, atol=1e-12)

    def test_singlet_coefficients(self):
        # Oracle: direct 4x4 trace computation, element by element.
        rho = TwoQubitState.singlet()
        expected = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                expected[i, j] = np.trace(
                    np.kron(PAULI[i], PAULI[j]) @ rho.matrix
                ).real
        u = pauli_decompose(rho)
        assert np.allclose(u, expected, atol=1e-12)
        assert u[0, 0] == pytest.approx(1.0)
        assert np.allclose(np.diag(u)[1:], [-1.0, -1.0, -1.0], atol=1e-12)
        off = u.copy()
        off[0, 0] = 0.0
        np.fill_diagonal(off, 0.0)
        assert np.max(np.abs(off)) < 1e-12

    def test_roundtrip_on_random_physical_states(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            rho = random_physical_state(rng)
            back = pauli_compose(pauli_decompose(rho))
            assert np.max(np.abs(back.matrix - rho.matrix)) <= 1e-12

    def test_roundtrip_on_random_hermitian_unit_trace(self):
        # The maps are mutually inverse linear bijections on the whole
        # Hermitian unit-trace space, physical or not.
        rng = np.random.default_rng(11)
        for _ in range(1000):
            rho = random_hermitian_unit_trace(rng)
            back = pauli_compose(pauli_decompose(rho))
            assert np.max(np.abs(back.matrix - rho.matrix)) <= 1e-12

    def test_compose_trivial_and_out_of_range(self):
        u = np.zeros((4, 4))
        u[0, 0] = 1.0
        assert np.allclose(pauli_compose(u).matrix, np.eye(4) / 4.0)
        u[3, 3] = -2.0
        rho = pauli_compose(u)
        report = is_physical(rho)
        assert not report
        assert report.min_eigenvalue < 0

    def test_decompose_rejects_non_hermitian(self):
        bad = TwoQubitState(np.diag([1.0, 0, 0, 0]) + 0.5j * np.eye(4, k=1))
        with pytest.raises(ValueError):
            pauli_decompose(bad)


class TestCorrelationMatrix:
    def test_singlet_is_minus_identity(self):
        c = correlation_matrix(TwoQubitState.singlet())
        assert np.allclose(c, -np.eye(3), atol=1e-12)

    def test_maximally_mixed_is_zero(self):
        assert np.allclose(correlation_matrix(TwoQubitState.maximally_mixed()), 0.0)

    def test_product_hh_state(self):
        c = correlation_matrix(TwoQubitState.basis_state("HH"))
        assert np.allclose(c, np.diag([0.0, 0.0, 1.0]), atol=1e-12)

    def test_singular_values_bounded_for_physical_states(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            c = correlation_matrix(random_physical_state(rng))
            s = np.linalg.svd(c, compute_uv=False)
            assert np.all(s <= 1.0 + 1e-9)

    def test_rejects_nonphysical(self):
        u = np.zeros((4, 4))
        u[0, 0] = 1.0
        u[1, 1] = -2.0
        with pytest.raises(ValueError):
            correlation_matrix(pauli_compose(u))


class TestBornProbability:
    def test_singlet_marginals(self):
        rho = TwoQubitState.singlet()
        p_h = born_probability(rho, arm_projector(linear_polarizer(0.0), 0))
        p_v = born_probability(rho, arm_projector(linear_polarizer(90.0), 0))
        assert p_h == pytest.approx(0.5, abs=1e-12)
        assert p_v == pytest.approx(0.5, abs=1e-12)

    def test_identity_projector(self):
        rng = np.random.default_rng(13)
        eye = Projector(np.eye(4), label="I")
        for _ in range(10):
            assert born_probability(random_physical_state(rng), eye) == pytest.approx(1.0)

    def test_complete_projector_set_sums_to_one(self):
        rng = np.random.default_rng(14)
        basis = [Projector(np.diag([1.0 if i == k else 0.0 for i in range(4)])) for k in range(4)]
        for _ in range(50):
            rho = random_physical_state(rng)
            total = sum(born_probability(rho, p) for p in basis)
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_rejects_non_idempotent(self):
        bad = Projector(0.5 * np.eye(4))
        with pytest.raises(ValueError):
            born_probability(TwoQubitState.singlet(), bad)


class TestIsPhysical:
    def test_accepts_standard_states(self):
        assert is_physical(TwoQubitState.maximally_mixed())
        assert is_physical(TwoQubitState.singlet())

    def test_reports_negative_eigenvalue(self):
        u = np.zeros((4, 4))
        u[0, 0] = 1.0
        u[3, 3] = -2.0
        report = is_physical(pauli_compose(u))
        assert not report.physical
        assert report.min_eigenvalue < -1e-3

    def test_reports_trace_deviation(self):
        report = is_physical(TwoQubitState(np.eye(4) / 2.0))
        assert not report
        assert report.trace_deviation == pytest.approx(1.0)


class TestFidelity:
    def test_self_fidelity_is_one(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            rho = random_physical_state(rng)
            assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)

    def test_singlet_vs_maximally_mixed(self):
        # Closed form for pure-vs-mixed: F = <psi| rho |psi> = 1/4.
        f = fidelity(TwoQubitState.singlet(), TwoQubitState.maximally_mixed())
        assert f == pytest.approx(0.25, abs=1e-10)

    def test_orthogonal_pure_states(self):
        f = fidelity(TwoQubitState.basis_state("HH"), TwoQubitState.basis_state("VV"))
        assert f == pytest.approx(0.0, abs=1e-10)

    def test_symmetry_and_pure_closed_form(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            a = random_physical_state(rng)
            b = qmath.random_pure_state(rng)
            f_ab = fidelity(a, b)
            f_ba = fidelity(b, a)
            assert f_ab == pytest.approx(f_ba, abs=1e-7)
            # Oracle for pure b: F = <psi| a |psi>.
            w, v = hermitian_eig(b.matrix)
            psi = v[:, -1]
            expected = float((psi.conj() @ a.matrix @ psi).real)
            assert f_ab == pytest.approx(expected, abs=1e-7)

    def test_rejects_nonphysical(self):
        with pytest.raises(ValueError):
            fidelity(TwoQubitState(np.eye(4)), TwoQubitState.singlet())


class TestWernerAndSerialization:
    def test_werner_interpolates(self):
        assert np.allclose(
            TwoQubitState.werner(1.0).matrix, TwoQubitState.singlet().matrix
        )
        assert np.allclose(
            TwoQubitState.werner(0.0).matrix, np.eye(4) / 4.0
        )

    def test_json_roundtrip(self):
        rng = np.random.default_rng(17)
        rho = random_physical_state(rng)
        back = TwoQubitState.from_json(rho.to_json())
        assert np.allclose(back.matrix, rho.matrix, atol=1e-15)

    def test_local_unitary_preserves_fidelity_with_self(self):
        rng = np.random.default_rng(18)
        rho = random_physical_state(rng)
        u = np.kron(random_unitary(rng), random_unitary(rng))
        rotated = TwoQubitState(u @ rho.matrix @ u.conj().T)
        assert is_physical(rotated)


@st.composite
def hermitian_states(draw):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    rng = np.random.default_rng(seed)
    return random_hermitian_unit_trace(rng)


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(hermitian_states())
    def test_pauli_maps_are_mutually_inverse(self, rho):
        back = pauli_compose(pauli_decompose(rho))
        assert np.max(np.abs(back.matrix - rho.matrix)) <= 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_eigenvalues_sum_to_trace(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_physical_state(rng)
        w, _ = hermitian_eig(rho.matrix)
        assert math.isclose(float(np.sum(w)), 1.0, abs_tol=1e-10)
        assert w[0] >= -1e-12
