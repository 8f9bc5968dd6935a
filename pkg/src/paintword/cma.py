"""(mu/mu_w, lambda)-CMA-ES with rank-one + rank-mu covariance updates and
cumulative step-size adaptation, written against flat numpy vectors.

The state is an immutable-by-convention dataclass; `cma_ask` is a pure
function of the state (sampling RNG is derived from (seed, generation), so
asking twice without telling returns the identical candidate set), and
`cma_tell` returns a new state. Updates depend on losses only through ranks,
so any strictly monotone transformation of the objective leaves the candidate
sequence unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidConfig, InvalidLoss, NumericalBreakdown

_EIG_FLOOR = 1e-14


@dataclass
class CmaState:
    dim: int
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    path_sigma: np.ndarray
    path_c: np.ndarray
    population_size: int
    parent_count: int
    weights: np.ndarray
    generation: int
    seed: int
    # strategy constants (fixed at init)
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float
    # cached eigendecomposition of cov (refreshed lazily)
    eig_vectors: np.ndarray = None
    eig_values: np.ndarray = None
    eig_generation: int = 0


def default_population_size(dim: int) -> int:
    return 4 + int(np.floor(3 * np.log(dim)))


def cma_init(dim: int, mean0: np.ndarray, sigma0: float,
             population_size: int | None = None, seed: int = 0) -> CmaState:
    if dim < 1:
        raise InvalidConfig("dim must be >= 1")
    if not np.isfinite(sigma0) or sigma0 <= 0:
        raise InvalidConfig("sigma0 must be positive")
    mean0 = np.asarray(mean0, dtype=np.float64).ravel().copy()
    if mean0.size != dim:
        raise InvalidConfig(f"mean0 size {mean0.size} != dim {dim}")
    lam = default_population_size(dim) if population_size is None else int(population_size)
    if lam < 4:
        raise InvalidConfig("population size must be >= 4")
    mu = lam // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / (weights ** 2).sum()
    c_sigma = (mu_eff + 2) / (dim + mu_eff + 5)
    d_sigma = 1 + 2 * max(0.0, np.sqrt((mu_eff - 1) / (dim + 1)) - 1) + c_sigma
    c_c = (4 + mu_eff / dim) / (dim + 4 + 2 * mu_eff / dim)
    c_1 = 2 / ((dim + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((dim + 2) ** 2 + mu_eff))
    chi_n = np.sqrt(dim) * (1 - 1 / (4 * dim) + 1 / (21 * dim ** 2))
    return CmaState(
        dim=dim, mean=mean0, sigma=float(sigma0), cov=np.eye(dim),
        path_sigma=np.zeros(dim), path_c=np.zeros(dim),
        population_size=lam, parent_count=mu, weights=weights,
        generation=0, seed=seed, mu_eff=mu_eff, c_sigma=c_sigma,
        d_sigma=d_sigma, c_c=c_c, c_1=c_1, c_mu=c_mu, chi_n=chi_n,
        eig_vectors=np.eye(dim), eig_values=np.ones(dim), eig_generation=0,
    )


def _eigendecompose(state: CmaState) -> CmaState:
    cov = (state.cov + state.cov.T) / 2.0
    try:
        vals, vecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as e:
        raise NumericalBreakdown(f"covariance eigendecomposition failed: {e}") from e
    if not np.isfinite(vals).all():
        raise NumericalBreakdown("non-finite covariance eigenvalues")
    vals = np.maximum(vals, _EIG_FLOOR)
    return replace(state, cov=(vecs * vals) @ vecs.T, eig_vectors=vecs,
                   eig_values=vals, eig_generation=state.generation)


def _lazy_gap(state: CmaState) -> int:
    # generations between eigendecompositions, per the standard lazy-update rule
    return max(1, int(1.0 / ((state.c_1 + state.c_mu) * state.dim * 10.0)))


def _maybe_refresh_eig(state: CmaState) -> CmaState:
    if state.eig_vectors is None or (state.generation - state.eig_generation) >= _lazy_gap(state):
        return _eigendecompose(state)
    return state


def cma_ask(state: CmaState) -> list[np.ndarray]:
    """Sample the population from N(mean, sigma^2 C); pure in the state."""
    rng = np.random.default_rng([state.seed & 0x7FFFFFFF, state.generation])
    sqrt_vals = np.sqrt(state.eig_values)
    if not np.isfinite(sqrt_vals).all():
        raise NumericalBreakdown("non-finite covariance factor")
    zs = rng.standard_normal((state.population_size, state.dim))
    ys = zs @ (state.eig_vectors * sqrt_vals).T
    return [state.mean + state.sigma * y for y in ys]


def cma_tell(state: CmaState, candidates: list[np.ndarray],
             losses: list[float]) -> CmaState:
    """Standard CMA-ES update; candidates must come from cma_ask(state)."""
    lam, dim = state.population_size, state.dim
    if len(candidates) != lam or len(losses) != lam:
        raise InvalidConfig(f"expected {lam} candidates/losses")
    losses = np.asarray(losses, dtype=np.float64)
    if np.isnan(losses).any():
        raise InvalidLoss("NaN loss passed to cma_tell")

    # overflow inside the update is diagnosed explicitly as NUMERICAL_BREAKDOWN
    with np.errstate(over="ignore", invalid="ignore"):
        order = np.lexsort((np.arange(lam), losses))  # ties broken by index
        mu = state.parent_count
        sel = np.stack([np.asarray(candidates[i], dtype=np.float64)
                        for i in order[:mu]])
        old_mean = state.mean
        new_mean = state.weights @ sel

        y_w = (new_mean - old_mean) / state.sigma
        inv_sqrt = (state.eig_vectors / np.sqrt(state.eig_values)) \
            @ state.eig_vectors.T

        ps = (1 - state.c_sigma) * state.path_sigma + \
            np.sqrt(state.c_sigma * (2 - state.c_sigma) * state.mu_eff) \
            * (inv_sqrt @ y_w)
        ps_norm = np.linalg.norm(ps)
        hsig = float(ps_norm / np.sqrt(
            1 - (1 - state.c_sigma) ** (2 * (state.generation + 1)))
            / state.chi_n < 1.4 + 2 / (dim + 1))
        pc = (1 - state.c_c) * state.path_c + \
            hsig * np.sqrt(state.c_c * (2 - state.c_c) * state.mu_eff) * y_w

        ys = (sel - old_mean) / state.sigma
        rank_mu = (ys.T * state.weights) @ ys
        delta_hsig = (1 - hsig) * state.c_c * (2 - state.c_c)
        cov = (1 - state.c_1 - state.c_mu) * state.cov \
            + state.c_1 * (np.outer(pc, pc) + delta_hsig * state.cov) \
            + state.c_mu * rank_mu
        cov = (cov + cov.T) / 2.0

        sigma = state.sigma * np.exp((state.c_sigma / state.d_sigma)
                                     * (ps_norm / state.chi_n - 1))
    if not np.isfinite(sigma) or sigma <= 0 or not np.isfinite(cov).all():
        raise NumericalBreakdown("step size or covariance became non-finite")

    new = replace(state, mean=new_mean, sigma=float(sigma), cov=cov,
                  path_sigma=ps, path_c=pc, generation=state.generation + 1)
    return _maybe_refresh_eig(new)


def covariance_is_pd(state: CmaState) -> bool:
    try:
        np.linalg.cholesky((state.cov + state.cov.T) / 2.0
                           + _EIG_FLOOR * np.eye(state.dim))
        return True
    except np.linalg.LinAlgError:
        return False
