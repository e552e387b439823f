"""Small dense complex linear algebra for two-qubit polarization states.

Everything here is hard-coded to the 4x4 (two-qubit) case.  The basis order is
fixed globally as |HH>, |HV>, |VH>, |VV>, with the first slot belonging to the
heralding arm.  Density matrices are carried by :class:`TwoQubitState`; Pauli
coefficient matrices (4x4) and correlation matrices (3x3) are plain real numpy
arrays.  All operations are pure functions on effectively immutable values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

BASIS_LABELS = ("HH", "HV", "VH", "VV")

#: sigma_0 .. sigma_3 (identity, x, y, z)
PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

DEFAULT_TOL = 1e-9
HERMITICITY_TOL = 1e-12


def _coerce_matrix(matrix, size: int) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.shape != (size, size):
        raise ValueError(f"expected a {size}x{size} matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError("matrix contains non-finite entries")
    return m


@dataclass(frozen=True)
class TwoQubitState:
    """A 4x4 complex matrix in the fixed |HH>,|HV>,|VH>,|VV> basis.

    Construction is permissive on purpose: least-squares tomography can
    legitimately produce non-positive matrices, and they still need a home.
    Use :func:`is_physical` to check trace / hermiticity / positivity.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _coerce_matrix(self.matrix, 4)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    # -- constructors -------------------------------------------------

    @classmethod
    def from_vector(cls, psi) -> "TwoQubitState":
        """Pure state |psi><psi| from a 4-component ket (normalized here)."""
        v = np.asarray(psi, dtype=complex).reshape(4)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot build a state from the zero vector")
        v = v / norm
        return cls(np.outer(v, v.conj()))

    @classmethod
    def singlet(cls) -> "TwoQubitState":
        return cls.from_vector([0.0, 1.0, -1.0, 0.0])

    @classmethod
    def maximally_mixed(cls) -> "TwoQubitState":
        return cls(np.eye(4) / 4.0)

    @classmethod
    def basis_state(cls, label: str) -> "TwoQubitState":
        if label not in BASIS_LABELS:
            raise ValueError(f"unknown basis label {label!r}")
        v = np.zeros(4)
        v[BASIS_LABELS.index(label)] = 1.0
        return cls.from_vector(v)

    @classmethod
    def werner(cls, p: float) -> "TwoQubitState":
        """p * singlet + (1-p) * I/4."""
        if not 0.0 <= p <= 1.0:
            raise ValueError("werner weight must be in [0, 1]")
        return cls(p * cls.singlet().matrix + (1.0 - p) * np.eye(4) / 4.0)

    # -- inspection ---------------------------------------------------

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    # -- serialization ------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {"re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "TwoQubitState":
        data = json.loads(text)
        return cls(np.array(data["re"]) + 1j * np.array(data["im"]))


@dataclass(frozen=True)
class Projector:
    """Hermitian idempotent matrix with a human-readable label.

    Single-qubit projectors are 2x2; joint ones are 4x4.  Use
    :func:`tensor_projector` / :func:`arm_projector` to lift 2x2 ones.
    """

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise ValueError(f"projector must be 2x2 or 4x4, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def idempotency_defect(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m @ m - m)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def ket_polarization(angle_deg: float) -> np.ndarray:
    """Linear-polarization ket cos(a)|H> + sin(a)|V>."""
    a = math.radians(angle_deg)
    return np.array([math.cos(a), math.sin(a)], dtype=complex)


def linear_polarizer(angle_deg: float) -> Projector:
    v = ket_polarization(angle_deg)
    return Projector(np.outer(v, v.conj()), label=f"lin({angle_deg:g})")


def analyzer_operator(angle_deg: float) -> np.ndarray:
    """Two-outcome analyzer A = P(angle) - P(angle + 90); eigenvalues +-1."""
    p_plus = linear_polarizer(angle_deg).matrix
    p_minus = linear_polarizer(angle_deg + 90.0).matrix
    return p_plus - p_minus


def tensor_projector(pa: Projector, pb: Projector) -> Projector:
    if pa.matrix.shape != (2, 2) or pb.matrix.shape != (2, 2):
        raise ValueError("tensor_projector expects two single-qubit projectors")
    return Projector(np.kron(pa.matrix, pb.matrix), label=pa.label + pb.label)


def arm_projector(p: Projector, arm: int) -> Projector:
    """Lift a single-qubit projector onto one arm (0 = heralding, 1 = measured)."""
    if p.matrix.shape != (2, 2):
        raise ValueError("arm_projector expects a single-qubit projector")
    eye = np.eye(2)
    if arm == 0:
        return Projector(np.kron(p.matrix, eye), label=p.label + "*I")
    if arm == 1:
        return Projector(np.kron(eye, p.matrix), label="I*" + p.label)
    raise ValueError("arm must be 0 or 1")


# ---------------------------------------------------------------------------
# Eigen-decomposition: cyclic complex Jacobi on small Hermitian matrices.
# No external solver at this size; validated against characteristic-polynomial
# roots in the test suite.
# ---------------------------------------------------------------------------

def hermitian_eig(mat, tol: float = 1e-12, max_sweeps: int = 50):
    """Eigenvalues (ascending) and eigenvector columns of a Hermitian matrix.

    Cyclic Jacobi with complex rotations.  Converges quadratically; 4x4
    inputs settle below ``tol`` in a handful of sweeps.
    """
    a = np.array(mat, dtype=complex)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError("hermitian_eig expects a square matrix")
    scale = max(1.0, float(np.max(np.abs(a))))
    if float(np.max(np.abs(a - a.conj().T))) > 1e-9 * scale:
        raise ValueError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)

    def off_norm():
        o = a - np.diag(np.diag(a))
        return math.sqrt(float(np.sum(np.abs(o) ** 2)))

    converged = False
    for _ in range(max_sweeps):
        if off_norm() <= tol * scale:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                absb = abs(apq)
                if absb <= (tol * scale) / (100.0 * n * n):
                    continue
                app = a[p, p].real
                aqq = a[q, q].real
                phase = apq / absb
                theta = (aqq - app) / (2.0 * absb)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = phase * (t * c)
                # A <- U^dag A U with U = I except U[p,p]=c, U[p,q]=s,
                # U[q,p]=-conj(s), U[q,q]=c.
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - np.conj(s) * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = np.conj(s) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - np.conj(s) * vq
                v[:, q] = s * vp + c * vq
    else:
        converged = off_norm() <= tol * scale
    if not converged:
        raise RuntimeError(
            f"Jacobi eigensolver did not reach {tol:g} in {max_sweeps} sweeps "
            f"(residual off-diagonal norm {off_norm():.3e})"
        )
    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = hermitian_eig(mat)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


# ---------------------------------------------------------------------------
# Physicality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalityReport:
    physical: bool
    trace_deviation: float
    hermiticity_defect: float
    min_eigenvalue: float

    def __bool__(self) -> bool:
        return self.physical


def is_physical(rho: TwoQubitState, tol: float = DEFAULT_TOL) -> PhysicalityReport:
    """Check trace one, hermiticity, and positive semi-definiteness within tol."""
    tr_dev = abs(rho.trace() - 1.0)
    herm = rho.hermiticity_defect()
    sym = 0.5 * (rho.matrix + rho.matrix.conj().T)
    w, _ = hermitian_eig(sym)
    min_eig = float(w[0])
    ok = tr_dev <= tol and herm <= tol and min_eig >= -tol
    return PhysicalityReport(ok, float(tr_dev), herm, min_eig)


def _require_physical(rho: TwoQubitState, what: str, tol: float = DEFAULT_TOL):
    report = is_physical(rho, tol)
    if not report:
        raise ValueError(
            f"{what} requires a physical state: trace deviation "
            f"{report.trace_deviation:.2e}, hermiticity defect "
            f"{report.hermiticity_defect:.2e}, min eigenvalue "
            f"{report.min_eigenvalue:.2e}"
        )


# ---------------------------------------------------------------------------
# Pauli decomposition / composition and correlation matrix
# ---------------------------------------------------------------------------

def pauli_decompose(rho: TwoQubitState) -> np.ndarray:
    """Coefficients u[i,j] = Tr(rho (sigma_i x sigma_j)), a real 4x4 array."""
    if rho.hermiticity_defect() > HERMITICITY_TOL:
        raise ValueError("pauli_decompose requires a Hermitian matrix")
    if abs(rho.trace() - 1.0) > DEFAULT_TOL:
        raise ValueError("pauli_decompose requires unit trace")
    u = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            op = np.kron(PAULI[i], PAULI[j])
            u[i, j] = np.trace(op @ rho.matrix).real
    return u


def pauli_compose(u) -> TwoQubitState:
    """Assemble rho = (1/4) sum u[i,j] sigma_i x sigma_j.

    Hermitian and unit-trace by construction when u[0,0] == 1; positivity is
    the caller's problem (check with :func:`is_physical`).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (4, 4):
        raise ValueError("pauli coefficients must be a 4x4 real array")
    if abs(u[0, 0] - 1.0) > DEFAULT_TOL:
        raise ValueError("u[0,0] must equal 1 for a unit-trace state")
    m = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            if u[i, j] != 0.0:
                m += u[i, j] * np.kron(PAULI[i], PAULI[j])
    return TwoQubitState(m / 4.0)


def correlation_matrix(rho: TwoQubitState) -> np.ndarray:
    """3x3 block c[i,j] = Tr(rho (sigma_i x sigma_j)), i,j in {x,y,z}."""
    _require_physical(rho, "correlation_matrix")
    return pauli_decompose(rho)[1:, 1:].copy()


def born_probability(rho: TwoQubitState, proj: Projector) -> float:
    """p = Tr(P rho) for an idempotent Hermitian P on the full two-qubit space."""
    if proj.matrix.shape != (4, 4):
        raise ValueError("born_probability needs a two-qubit (4x4) projector")
    if proj.idempotency_defect() > 1e-10:
        raise ValueError(f"projector {proj.label!r} is not idempotent")
    if proj.hermiticity_defect() > 1e-10:
        raise ValueError(f"projector {proj.label!r} is not Hermitian")
    _require_physical(rho, "born_probability")
    p = float(np.trace(proj.matrix @ rho.matrix).real)
    if p < -DEFAULT_TOL or p > 1.0 + DEFAULT_TOL:
        raise ValueError(f"Born probability {p} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def fidelity(a: TwoQubitState, b: TwoQubitState) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2."""
    _require_physical(a, "fidelity")
    _require_physical(b, "fidelity")
    sqrt_a = _psd_sqrt(0.5 * (a.matrix + a.matrix.conj().T))
    inner = sqrt_a @ (0.5 * (b.matrix + b.matrix.conj().T)) @ sqrt_a
    w, _ = hermitian_eig(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None)))) ** 2
    return min(max(f, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Random states (simulation and test helpers)
# ---------------------------------------------------------------------------

def random_physical_state(rng: np.random.Generator, rank: int | None = None) -> TwoQubitState:
    """Ginibre-ensemble density matrix; full rank unless rank is given."""
    k = 4 if rank is None else rank
    if not 1 <= k <= 4:
        raise ValueError("rank must be in 1..4")
    g = rng.standard_normal((4, k)) + 1j * rng.standard_normal((4, k))
    m = g @ g.conj().T
    return TwoQubitState(m / np.trace(m).real)


def random_pure_state(rng: np.random.Generator) -> TwoQubitState:
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    return TwoQubitState.from_vector(v)


def random_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Haar-ish random unitary from the QR of a Ginibre matrix."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
