"""Quantumness certification: CHSH estimates and min-entropy.

Two routes to the Bell parameter are provided.  ``chsh_direct`` works from
coincidence counts the way a polarization experiment does; ``chsh_from_rho``
computes the maximum attainable value for a density matrix from the two
largest singular values of its correlation matrix (the horodecki-singular-
value convention, noted in every report).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qmath import (
    TwoQubitState,
    analyzer_operator,
    correlation_matrix,
    hermitian_eig,
    is_physical,
)

TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)
CLASSICAL_BOUND = 2.0

#: Quad order within one setting pair: N(a,b), N(a_perp,b_perp), N(a,b_perp), N(a_perp,b).
QUAD_ORDER = ("pp", "mm", "pm", "mp")

#: Setting-pair order: (a,b), (a,b'), (a',b), (a',b').
PAIR_ORDER = ("ab", "ab'", "a'b", "a'b'")


@dataclass(frozen=True)
class ChshSettings:
    """Analyzer angles in degrees for the four CHSH measurement bases."""

    a: float = 0.0
    a_prime: float = 45.0
    b: float = 22.5
    b_prime: float = 67.5

    def __post_init__(self):
        for name, angle in self.as_dict().items():
            if not 0.0 <= angle < 180.0:
                raise ValueError(f"analyzer angle {name}={angle} outside [0, 180)")

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "a_prime": self.a_prime,
            "b": self.b,
            "b_prime": self.b_prime,
        }

    def pairs(self):
        """The four (alice, bob) angle pairs in PAIR_ORDER."""
        return (
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        )


def optimal_settings_for_visibility(v: float) -> ChshSettings:
    """Angles maximizing S for the dephased singlet family (correlation
    matrix diag(-v, -v, -1)); reduces to the standard singlet set at v=1 up
    to a local relabeling.  Degenerates at v=0, where no violating settings
    exist."""
    if not 0.0 < v <= 1.0:
        raise ValueError("visibility must be in (0, 1] for optimal settings")
    mu_deg = math.degrees(math.atan(v))
    return ChshSettings(
        a=135.0,
        a_prime=90.0,
        b=mu_deg / 2.0,
        b_prime=(180.0 - mu_deg / 2.0) % 180.0,
    )


@dataclass(frozen=True)
class ChshCounts:
    """Coincidence counts for the four setting pairs.

    ``quads`` has shape (4, 4): rows follow PAIR_ORDER, columns follow
    QUAD_ORDER, i.e. column 0 is N(alpha,beta), column 1 is
    N(alpha_perp,beta_perp), column 2 is N(alpha,beta_perp) and column 3 is
    N(alpha_perp,beta).
    """

    quads: np.ndarray
    settings: ChshSettings = field(default_factory=ChshSettings)

    def __post_init__(self):
        q = np.array(self.quads, dtype=np.int64)
        if q.shape != (4, 4):
            raise ValueError("ChshCounts expects a (4, 4) array of counts")
        if np.any(q < 0):
            raise ValueError("counts must be non-negative")
        if np.any(q.sum(axis=1) <= 0):
            raise ValueError("every setting pair needs a positive total")
        q.flags.writeable = False
        object.__setattr__(self, "quads", q)


@dataclass(frozen=True)
class ChshResult:
    S: float
    stderr: float
    e_values: tuple
    settings: ChshSettings

    @property
    def violates_classical(self) -> bool:
        # Strict inequality: the classical boundary itself is not a violation.
        return abs(self.S) > CLASSICAL_BOUND


@dataclass(frozen=True)
class MinEntropyResult:
    h_inf: float
    p_max: float
    n_bits: int


def correlation_E(quad) -> float:
    """E = (N(a,b) + N(a_perp,b_perp) - N(a,b_perp) - N(a_perp,b)) / total."""
    q = np.asarray(quad, dtype=float).reshape(4)
    if np.any(q < 0):
        raise ValueError("counts must be non-negative")
    total = float(q.sum())
    if total <= 0:
        raise ValueError("correlation_E needs a positive total count")
    return float((q[0] + q[1] - q[2] - q[3]) / total)


def _e_variance(quad) -> float:
    """Poisson error propagation through E for one setting pair."""
    q = np.asarray(quad, dtype=float).reshape(4)
    total = q.sum()
    e = (q[0] + q[1] - q[2] - q[3]) / total
    signs = np.array([1.0, 1.0, -1.0, -1.0])
    return float(np.sum(q * ((signs - e) / total) ** 2))


def chsh_direct(counts: ChshCounts) -> ChshResult:
    """S = E(a,b) - E(a,b') + E(a',b) + E(a',b') from measured quads."""
    e = [correlation_E(counts.quads[i]) for i in range(4)]
    s = e[0] - e[1] + e[2] + e[3]
    var = sum(_e_variance(counts.quads[i]) for i in range(4))
    return ChshResult(
        S=float(s),
        stderr=math.sqrt(var),
        e_values=tuple(e),
        settings=counts.settings,
    )


def predicted_E(rho: TwoQubitState, alpha_deg: float, beta_deg: float) -> float:
    """Analytic E = Tr(rho A(alpha) x A(beta)) for two-outcome analyzers."""
    if not is_physical(rho):
        raise ValueError("predicted_E requires a physical state")
    op = np.kron(analyzer_operator(alpha_deg), analyzer_operator(beta_deg))
    return float(np.trace(op @ rho.matrix).real)


def chsh_predicted(rho: TwoQubitState, settings: ChshSettings) -> float:
    """Noise-free S for given analyzer settings (bridge between source model
    and the direct estimator)."""
    e = [predicted_E(rho, a, b) for a, b in settings.pairs()]
    return e[0] - e[1] + e[2] + e[3]


def chsh_from_rho(rho: TwoQubitState) -> float:
    """Maximum CHSH value for rho: 2 sqrt(s1^2 + s2^2) with s1 >= s2 the two
    largest singular values of the correlation matrix."""
    c = correlation_matrix(rho)  # validates physicality
    w, _ = hermitian_eig(c.T @ c)
    w = np.clip(w, 0.0, None)
    s = 2.0 * math.sqrt(float(w[-1] + w[-2]))
    return min(s, TSIRELSON_BOUND + 1e-9)


def min_entropy(bits) -> MinEntropyResult:
    """Single-bit i.i.d. min-entropy: H_inf = -log2(max(p0, p1)).

    Accepts a BitStream or any 0/1 array.
    """
    if hasattr(bits, "n_bits"):
        n = bits.n_bits
        ones = bits.ones()
    else:
        arr = np.asarray(bits).ravel()
        n = int(arr.size)
        ones = int(np.count_nonzero(arr))
    if n < 1:
        raise ValueError("min_entropy needs at least one bit")
    p_max = max(ones, n - ones) / n
    return MinEntropyResult(h_inf=-math.log2(p_max), p_max=p_max, n_bits=n)
