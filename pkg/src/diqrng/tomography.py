"""Density-matrix estimation from the 16-projector counts.

Three estimators: least-squares inversion (fast, possibly nonphysical),
maximum likelihood on a triangular factorization (always physical), and a
pseudo-Bayesian posterior mean sampled with random-walk Metropolis-Hastings
over a K-component pure-state mixture (always physical, with credible
spreads for any functional of the state).

Likelihood convention: each of the 16 settings is an independent
acquisition of ``acquisition_total`` pairs, so the default log-likelihood
conditions each count on its setting total,

    l(rho) = sum_i [ n_i log p_i + (N_i - n_i) log(1 - p_i) ],

whose maximizer at noise-free frequencies is the generating state (the bare
product of p_i^{n_i} is not stationary at the truth for this projector list,
whose operator sum is far from proportional to the identity).  A "poisson"
switch treats the counts as unconditioned Poisson draws instead.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .qmath import (
    Projector,
    TwoQubitState,
    hermitian_eig,
    is_physical,
    pauli_compose,
)

KWIAT_LABELS = (
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
)

_KET = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0),
    "R": np.array([1.0, -1.0j], dtype=complex) / math.sqrt(2.0),
    "L": np.array([1.0, 1.0j], dtype=complex) / math.sqrt(2.0),
}


@dataclass(frozen=True)
class ProjectorSet:
    """Ordered, informationally complete list of 16 two-qubit projectors."""

    projectors: tuple
    labels: tuple

    def __post_init__(self):
        if len(self.projectors) != 16 or len(self.labels) != 16:
            raise ValueError("a tomography projector set has exactly 16 entries")

    def stack(self) -> np.ndarray:
        return np.stack([p.matrix for p in self.projectors])

    def probabilities(self, rho: TwoQubitState) -> np.ndarray:
        return np.einsum("kij,ji->k", self.stack(), rho.matrix).real

    def born_map_rank(self) -> int:
        """Rank of the map from Pauli coefficients to the 16 probabilities."""
        from .qmath import PAULI

        rows = []
        for proj in self.projectors:
            u = np.empty(16)
            for i in range(4):
                for j in range(4):
                    u[4 * i + j] = np.trace(
                        np.kron(PAULI[i], PAULI[j]) @ proj.matrix
                    ).real
            rows.append(u)
        return int(np.linalg.matrix_rank(np.array(rows), tol=1e-10))


def kwiat_projectors() -> ProjectorSet:
    """The standard 16-setting polarization list (first letter = heralding
    arm analyzer, second = measured arm)."""
    projectors = []
    for label in KWIAT_LABELS:
        ket = np.kron(_KET[label[0]], _KET[label[1]])
        projectors.append(Projector(np.outer(ket, ket.conj()), label=label))
    return ProjectorSet(tuple(projectors), KWIAT_LABELS)


@dataclass(frozen=True)
class TomoCounts:
    counts: np.ndarray
    acquisition_total: float
    labels: tuple = KWIAT_LABELS

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (16,):
            raise ValueError("tomography needs exactly 16 counts")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        if self.acquisition_total <= 0:
            raise ValueError("acquisition_total must be positive")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    def frequencies(self) -> np.ndarray:
        return self.counts / self.acquisition_total

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": list(self.labels),
                "counts": self.counts.tolist(),
                "acquisition_total": self.acquisition_total,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TomoCounts":
        data = json.loads(text)
        return cls(
            counts=np.array(data["counts"]),
            acquisition_total=data["acquisition_total"],
            labels=tuple(data["labels"]),
        )


@dataclass(frozen=True)
class TomoResult:
    rho_est: TwoQubitState
    method: str
    physical: bool
    diagnostics: dict = field(default_factory=dict)
    std_of_functionals: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PosteriorSamples:
    """Thinned post-burn-in parameter vectors with their realized states."""

    samples: np.ndarray  # (R, 9K) parameter vectors
    rho_samples: np.ndarray  # (R, 4, 4) realized density matrices
    acceptance_rate: float
    n_components: int

    @property
    def R(self) -> int:
        return int(self.samples.shape[0])


# ---------------------------------------------------------------------------
# Least-squares inversion
# ---------------------------------------------------------------------------

def _design_matrix(pset: ProjectorSet):
    """p = c0 + B u_free over the 15 free Pauli coefficients."""
    from .qmath import PAULI

    stack = pset.stack()
    c0 = np.array([np.trace(p).real / 4.0 for p in stack])
    columns = []
    for i in range(4):
        for j in range(4):
            if i == j == 0:
                continue
            op = np.kron(PAULI[i], PAULI[j])
            columns.append(
                np.einsum("kij,ji->k", stack, op).real / 4.0
            )
    return c0, np.array(columns).T  # (16,), (16, 15)


def ls_invert(counts: TomoCounts, pset: ProjectorSet | None = None) -> TomoResult:
    """Least-squares inversion of measured frequencies.

    The result is Hermitian with unit trace by construction but has no
    positivity guarantee; the ``physical`` flag says whether it happens to
    be a state.
    """
    pset = pset or kwiat_projectors()
    c0, design = _design_matrix(pset)
    rank = int(np.linalg.matrix_rank(design, tol=1e-10))
    if rank < 15:
        raise ValueError(f"design matrix rank {rank} < 15; projector set incomplete")
    f = counts.frequencies()
    u_free, residuals, *_ = np.linalg.lstsq(design, f - c0, rcond=None)
    u = np.empty((4, 4))
    u[0, 0] = 1.0
    u.flat[1:] = u_free
    rho = pauli_compose(u)
    report = is_physical(rho)
    residual = float(np.linalg.norm(design @ u_free - (f - c0)))
    return TomoResult(
        rho_est=rho,
        method="LS",
        physical=bool(report),
        diagnostics={
            "residual_norm": residual,
            "min_eigenvalue": report.min_eigenvalue,
        },
    )


# ---------------------------------------------------------------------------
# Maximum likelihood on the triangular factorization
# ---------------------------------------------------------------------------

_LOWER_INDICES = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]
_P_CLIP = 1e-12


def _t_from_params(t: np.ndarray) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[np.diag_indices(4)] = t[:4]
    for k, (r, c) in enumerate(_LOWER_INDICES):
        m[r, c] = t[4 + 2 * k] + 1j * t[5 + 2 * k]
    return m


def _rho_from_t(t_mat: np.ndarray):
    gram = t_mat.conj().T @ t_mat
    norm = np.trace(gram).real
    return gram / norm, norm


def _log_likelihood_and_grad(t: np.ndarray, counts, totals, stack, likelihood):
    t_mat = _t_from_params(t)
    rho, norm = _rho_from_t(t_mat)
    probs = np.einsum("kij,ji->k", stack, rho).real
    probs = np.clip(probs, _P_CLIP, 1.0 - _P_CLIP)
    if likelihood == "binomial":
        value = float(np.sum(counts * np.log(probs) + (totals - counts) * np.log1p(-probs)))
        weights = counts / probs - (totals - counts) / (1.0 - probs)
    elif likelihood == "poisson":
        value = float(np.sum(counts * np.log(totals * probs) - totals * probs))
        weights = counts / probs - totals
    else:
        raise ValueError(f"unknown likelihood {likelihood!r}")
    g_op = np.einsum("k,kij->ij", weights, stack)
    m_op = g_op - np.trace(g_op @ rho).real * np.eye(4)
    w_mat = (2.0 / norm) * (t_mat @ m_op)
    grad = np.empty(16)
    grad[:4] = w_mat[np.diag_indices(4)].real
    for k, (r, c) in enumerate(_LOWER_INDICES):
        grad[4 + 2 * k] = w_mat[r, c].real
        grad[5 + 2 * k] = w_mat[r, c].imag
    return value, grad


def _initial_t_params(counts: TomoCounts, pset: ProjectorSet) -> np.ndarray:
    """Start from the least-squares state pushed inside the physical set."""
    rho_ls = ls_invert(counts, pset).rho_est
    sym = 0.5 * (rho_ls.matrix + rho_ls.matrix.conj().T)
    w, v = hermitian_eig(sym)
    w = np.clip(w, 1e-6, None)
    rho0 = (v * w) @ v.conj().T
    rho0 /= np.trace(rho0).real
    # Lower-triangular T with T^dag T = rho0 via a flipped Cholesky.
    flip = np.eye(4)[::-1]
    chol = np.linalg.cholesky(flip @ rho0 @ flip)
    t_mat = (flip @ chol @ flip).conj().T
    t = np.empty(16)
    t[:4] = t_mat[np.diag_indices(4)].real
    for k, (r, c) in enumerate(_LOWER_INDICES):
        t[4 + 2 * k] = t_mat[r, c].real
        t[5 + 2 * k] = t_mat[r, c].imag
    return t


def mle_estimate(
    counts: TomoCounts,
    pset: ProjectorSet | None = None,
    max_iters: int = 20_000,
    tol: float = 1e-10,
    likelihood: str = "binomial",
) -> TomoResult:
    """Gradient ascent with backtracking line search on the 16 triangular
    parameters; the estimate is physical by construction.

    Noise pushes the maximizer onto the positivity boundary, where plain
    ascent is sublinear; boundary cases land around 15k iterations at the
    default tolerance, hence the cap well above the interior-case need.
    """
    pset = pset or kwiat_projectors()
    if int(counts.counts.sum()) == 0:
        raise ValueError("maximum likelihood needs at least one positive count")
    stack = pset.stack()
    n = counts.counts.astype(float)
    totals = np.full(16, float(counts.acquisition_total))
    t = _initial_t_params(counts, pset)
    value, grad = _log_likelihood_and_grad(t, n, totals, stack, likelihood)
    step = 1.0 / (np.linalg.norm(grad) + 1.0)
    prev_t = prev_grad = None
    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        grad_norm2 = float(grad @ grad)
        if math.sqrt(grad_norm2) < 1e-12:
            converged = True
            break
        if prev_t is not None:
            # Barzilai-Borwein step length; plain unit-step ascent crawls on
            # the ill-conditioned landscape near rank-deficient optima.
            dt = t - prev_t
            dg = grad - prev_grad
            denom = abs(float(dt @ dg))
            if denom > 1e-300:
                step = min(max(float(dt @ dt) / denom, 1e-18), 1e8)
        improved = False
        while step > 1e-18:
            candidate = t + step * grad
            cand_value, cand_grad = _log_likelihood_and_grad(
                candidate, n, totals, stack, likelihood
            )
            if cand_value >= value + 1e-4 * step * grad_norm2:
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True  # no ascent direction at float precision
            break
        delta = cand_value - value
        prev_t, prev_grad = t, grad
        t, value, grad = candidate, cand_value, cand_grad
        if delta < tol:
            converged = True
            break
    if not converged:
        raise RuntimeError(
            f"MLE did not converge in {max_iters} iterations "
            f"(log-likelihood {value:.6f}, gradient norm "
            f"{float(np.linalg.norm(grad)):.3e})"
        )
    rho, _ = _rho_from_t(_t_from_params(t))
    rho_state = TwoQubitState(rho)
    return TomoResult(
        rho_est=rho_state,
        method="MLE",
        physical=bool(is_physical(rho_state)),
        diagnostics={
            "iterations": iterations,
            "log_likelihood": value,
            "grad_norm": float(np.linalg.norm(grad)),
            "likelihood": likelihood,
        },
    )


# ---------------------------------------------------------------------------
# Bayesian posterior mean via random-walk Metropolis-Hastings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BayesConfig:
    """Sampler settings.

    The state is a K-component mixture rho(x) = sum w_k |psi_k><psi_k| with
    Dirichlet weights (normalized unit-rate gammas) and Haar-ish pure
    states from normalized complex normal 4-vectors.  All 9K parameters are
    standard normal under the prior; the gamma variables come from the
    inverse-CDF transform of the last coordinate of each component.
    """

    R: int = 5000
    burn_in: int = 2000
    thin: int = 5
    step: float = 0.08
    K: int = 4
    rng_seed: int = 0
    likelihood: str = "binomial"
    adapt: bool = True

    def __post_init__(self):
        if self.R < 100:
            raise ValueError("Bayesian estimation needs R >= 100 samples")
        if self.R < self.burn_in:
            raise ValueError("R must be at least the burn-in length")
        if self.thin < 1 or self.K < 1 or self.step <= 0:
            raise ValueError("thin, K must be >= 1 and step > 0")


def _gamma_from_normal(y: np.ndarray) -> np.ndarray:
    """Unit-rate exponential (Gamma(1)) via the probability transform."""
    y = np.clip(y, -8.0, 8.0)
    survival = 0.5 * np.array([math.erfc(v / math.sqrt(2.0)) for v in y])
    return -np.log(survival)


def _rho_from_vector(x: np.ndarray, k_components: int) -> np.ndarray:
    params = x.reshape(k_components, 9)
    kets = params[:, 0:4] + 1j * params[:, 4:8]
    norms = np.linalg.norm(kets, axis=1)
    norms = np.where(norms < 1e-12, 1e-12, norms)
    kets = kets / norms[:, np.newaxis]
    gammas = _gamma_from_normal(params[:, 8])
    weights = gammas / gammas.sum()
    return np.einsum("k,ki,kj->ij", weights, kets, kets.conj())


def bayesian_estimate(
    counts: TomoCounts,
    pset: ProjectorSet | None = None,
    cfg: BayesConfig | None = None,
    functionals: dict | None = None,
):
    """Posterior mean state and samples; returns (TomoResult, PosteriorSamples).

    ``functionals`` maps names to callables on 4x4 density matrices; their
    posterior means and standard deviations land in
    ``TomoResult.std_of_functionals``.  All-zero counts are treated as an
    empty record (flat likelihood), so the posterior is the prior and the
    sample mean approaches I/4.
    """
    pset = pset or kwiat_projectors()
    cfg = cfg or BayesConfig()
    stack = pset.stack()
    n = counts.counts.astype(float)
    totals = np.full(16, float(counts.acquisition_total))
    empty_record = int(counts.counts.sum()) == 0
    dim = 9 * cfg.K
    rng = np.random.default_rng([int(cfg.rng_seed), 0xBA7E5])

    def log_target(x):
        rho = _rho_from_vector(x, cfg.K)
        if empty_record:
            return -0.5 * float(x @ x), rho
        probs = np.einsum("kij,ji->k", stack, rho).real
        probs = np.clip(probs, _P_CLIP, 1.0 - _P_CLIP)
        if cfg.likelihood == "binomial":
            ll = float(np.sum(n * np.log(probs) + (totals - n) * np.log1p(-probs)))
        elif cfg.likelihood == "poisson":
            ll = float(np.sum(n * np.log(totals * probs) - totals * probs))
        else:
            raise ValueError(f"unknown likelihood {cfg.likelihood!r}")
        return ll - 0.5 * float(x @ x), rho

    x = rng.standard_normal(dim)
    log_p, rho = log_target(x)
    step = cfg.step
    total_steps = cfg.burn_in + cfg.R * cfg.thin
    kept_x = np.empty((cfg.R, dim))
    kept_rho = np.empty((cfg.R, 4, 4), dtype=complex)
    kept = 0
    accepted_post = 0
    window_accepts = 0
    for i in range(total_steps):
        proposal = x + step * rng.standard_normal(dim)
        cand_log_p, cand_rho = log_target(proposal)
        if math.log(rng.random()) < cand_log_p - log_p:
            x, log_p, rho = proposal, cand_log_p, cand_rho
            window_accepts += 1
            if i >= cfg.burn_in:
                accepted_post += 1
        if cfg.adapt and i < cfg.burn_in and (i + 1) % 50 == 0:
            rate = window_accepts / 50.0
            step *= math.exp(0.6 * (rate - 0.3))
            window_accepts = 0
        elif (i + 1) % 50 == 0:
            window_accepts = 0
        if i >= cfg.burn_in and (i - cfg.burn_in) % cfg.thin == cfg.thin - 1:
            kept_x[kept] = x
            kept_rho[kept] = rho
            kept += 1
    acceptance = accepted_post / (cfg.R * cfg.thin)
    diagnostics = {
        "acceptance_rate": acceptance,
        "step_final": step,
        "R": cfg.R,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "K": cfg.K,
        "likelihood": cfg.likelihood,
    }
    if acceptance < 0.01 or acceptance > 0.95:
        warnings.warn(
            f"MCMC acceptance rate {acceptance:.3f} outside [0.01, 0.95]; "
            "posterior summaries may be unreliable",
            stacklevel=2,
        )
    samples = PosteriorSamples(
        samples=kept_x,
        rho_samples=kept_rho,
        acceptance_rate=acceptance,
        n_components=cfg.K,
    )
    rho_mean = TwoQubitState(kept_rho.mean(axis=0))
    std_map = {}
    for name, phi in (functionals or {}).items():
        std_map[name] = posterior_functional(samples, phi)
    result = TomoResult(
        rho_est=rho_mean,
        method="Bayesian",
        physical=bool(is_physical(rho_mean)),
        diagnostics=diagnostics,
        std_of_functionals=std_map,
    )
    return result, samples


def posterior_functional(samples: PosteriorSamples, phi) -> tuple:
    """Posterior mean and standard deviation of a state functional."""
    if samples.R < 2:
        raise ValueError("posterior_functional needs at least 2 samples")
    values = np.array([float(phi(rho)) for rho in samples.rho_samples])
    return float(values.mean()), float(values.std(ddof=1))
