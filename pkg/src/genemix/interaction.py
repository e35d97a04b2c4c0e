"""Hierarchical interaction layer.

Link functions turn the gene/individual effects into per-locus Beta shape
parameters; the gene-by-individual effect matrix carries a matrix-normal
prior whose right covariance blends a free PD matrix with an environment
similarity kernel.  This module also evaluates the joint log-density of
the interaction block, which serves as the target of the single-worker
transformation-MCMC step.

All positive-definite matrices are carried as lower-triangular Cholesky
factors with positive diagonals.  Proposals whose link exponents leave
[-30, 30], or whose effective right covariance loses positive
definiteness, evaluate to -inf and are thereby rejected upstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betaln

from .data import EnvCovariates

EXP_CLAMP = 30.0

_LOG_2PI = math.log(2.0 * math.pi)

# hyperprior constants: Gamma(shape, rate) on Cholesky diagonals,
# zero-mean normal scales on off-diagonals, u/v, and log(b), log(phi)
GAMMA_SHAPE = 0.01
GAMMA_RATE = 0.01
OFFDIAG_SD = 10.0
UV_SD = 1.0
LOG_SCALE_SD = 10.0


@dataclass(frozen=True)
class InteractionState:
    """All interaction-block parameters.

    ``lam`` is the J x N effect matrix, columns ordered controls then
    cases.  ``mu`` is J x 2 (columns: control, case), ``beta`` is
    D x J x 2.  ``u`` and ``v`` have length L = max loci per gene; gene j
    uses their first L_j entries.
    """

    lam: np.ndarray
    a_chol: np.ndarray
    sigma_chol: np.ndarray
    mu: np.ndarray
    beta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    b: float
    phi: float
    c_alpha: np.ndarray
    d_alpha: np.ndarray
    c_beta: np.ndarray
    d_beta: np.ndarray

    @property
    def n_genes(self) -> int:
        return self.lam.shape[0]

    @property
    def n_individuals(self) -> int:
        return self.lam.shape[1]

    @property
    def env_dim(self) -> int:
        return self.beta.shape[0]

    @property
    def a_matrix(self) -> np.ndarray:
        return self.a_chol @ self.a_chol.T

    @property
    def sigma_matrix(self) -> np.ndarray:
        return self.sigma_chol @ self.sigma_chol.T

    def validate(self) -> None:
        J, N = self.lam.shape
        if self.a_chol.shape != (J, J) or self.sigma_chol.shape != (N, N):
            raise ValueError("covariance factor dimensions inconsistent with lam")
        if self.mu.shape != (J, 2):
            raise ValueError("mu must be (J, 2)")
        if self.beta.shape[1:] != (J, 2):
            raise ValueError("beta must be (D, J, 2)")
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1-D of equal length")
        for name in ("a_chol", "sigma_chol", "c_alpha", "d_alpha", "c_beta", "d_beta"):
            f = getattr(self, name)
            if (np.diag(f) <= 0).any():
                raise ValueError(f"{name} diagonal must be strictly positive")
            if not np.allclose(f, np.tril(f)):
                raise ValueError(f"{name} must be lower triangular")
        if self.b <= 0:
            raise ValueError("b must be positive")
        if self.phi < 0:
            raise ValueError("phi must be nonnegative")


def initial_state(n_genes: int, n_individuals: int, env_dim: int, max_loci: int) -> InteractionState:
    """Prior-centered starting point: zero effects, identity factors, b=phi=1."""
    return InteractionState(
        lam=np.zeros((n_genes, n_individuals)),
        a_chol=np.eye(n_genes),
        sigma_chol=np.eye(n_individuals),
        mu=np.zeros((n_genes, 2)),
        beta=np.zeros((env_dim, n_genes, 2)),
        u=np.zeros(max_loci),
        v=np.zeros(max_loci),
        b=1.0,
        phi=1.0,
        c_alpha=np.eye(n_genes),
        d_alpha=np.eye(2),
        c_beta=np.eye(n_genes),
        d_beta=np.eye(2),
    )


def compute_kernel(env: EnvCovariates, b: float) -> np.ndarray:
    """Environment similarity kernel exp(-b ||E_i - E_j||^2), unit diagonal."""
    if b <= 0:
        raise ValueError("smoothness parameter b must be positive")
    e = env.values
    sq = ((e[:, None, :] - e[None, :, :]) ** 2).sum(axis=2)
    kernel = np.exp(-b * sq)
    np.fill_diagonal(kernel, 1.0)
    return kernel


def effective_right_cov(sigma_chol: np.ndarray, phi: float, kernel: np.ndarray) -> np.ndarray:
    """Right covariance Sigma + phi * kernel of the effect matrix prior."""
    if phi < 0:
        raise ValueError("phi must be nonnegative")
    return sigma_chol @ sigma_chol.T + phi * kernel


def beta_shapes(u_r, v_r, lam_ijk: float, mu_jk: float, beta_jk, env_i):
    """Per-locus Beta shapes (nu1, nu2) from the linear link.

    Returns ``(nu1, nu2, clamped)``; ``clamped`` is True when any exponent
    was truncated to [-30, 30], which the joint density treats as -inf.
    """
    u_r = np.atleast_1d(np.asarray(u_r, dtype=np.float64))
    v_r = np.atleast_1d(np.asarray(v_r, dtype=np.float64))
    shift = float(lam_ijk) + float(mu_jk) + float(np.dot(beta_jk, env_i))
    e1 = u_r + shift
    e2 = v_r + shift
    clamped = bool((np.abs(e1) > EXP_CLAMP).any() or (np.abs(e2) > EXP_CLAMP).any())
    nu1 = np.exp(np.clip(e1, -EXP_CLAMP, EXP_CLAMP))
    nu2 = np.exp(np.clip(e2, -EXP_CLAMP, EXP_CLAMP))
    return nu1, nu2, clamped


def matrix_normal_logpdf(x: np.ndarray, mean: np.ndarray,
                         row_cov: np.ndarray, col_cov: np.ndarray) -> float:
    """Matrix-normal log-density with row covariance and column covariance.

    Equivalent to the multivariate normal on the row-major vectorization
    with covariance kron(row_cov, col_cov).
    """
    try:
        row_chol = np.linalg.cholesky(row_cov)
        col_chol = np.linalg.cholesky(col_cov)
    except np.linalg.LinAlgError:
        raise ValueError("row and column covariances must be positive definite") from None
    return _matrix_normal_logpdf_chol(x, mean, row_chol, col_chol)


def _matrix_normal_logpdf_chol(x: np.ndarray, mean, row_chol: np.ndarray,
                               col_chol: np.ndarray) -> float:
    J, N = x.shape
    dev = x - mean if mean is not None else x
    half = solve_triangular(row_chol, dev, lower=True)
    whitened = solve_triangular(col_chol, half.T, lower=True)
    logdet_row = np.log(np.diag(row_chol)).sum()
    logdet_col = np.log(np.diag(col_chol)).sum()
    return float(
        -0.5 * J * N * _LOG_2PI
        - N * logdet_row
        - J * logdet_col
        - 0.5 * np.sum(whitened * whitened)
    )


def _normal_logpdf_sum(x: np.ndarray, sd: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(-0.5 * x.size * (_LOG_2PI + 2.0 * math.log(sd)) - 0.5 * np.sum(x * x) / sd**2)


def _gamma_logpdf_sum(x: np.ndarray, shape: float, rate: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    if (x <= 0).any():
        return -np.inf
    const = shape * math.log(rate) - math.lgamma(shape)
    return float(x.size * const + (shape - 1.0) * np.sum(np.log(x)) - rate * np.sum(x))


def _lognormal_logpdf(x: float, sd: float) -> float:
    if x <= 0:
        return -np.inf
    lx = math.log(x)
    return -lx - 0.5 * (_LOG_2PI + 2.0 * math.log(sd)) - 0.5 * lx * lx / sd**2


_TRIL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _strict_tril_indices(n: int):
    if n not in _TRIL_CACHE:
        _TRIL_CACHE[n] = np.tril_indices(n, k=-1)
    return _TRIL_CACHE[n]


def log_prior_hyper(state: InteractionState) -> float:
    """Log-density of all hyperpriors (everything except the effect matrix).

    Cholesky diagonals carry Gamma(0.01, 0.01), off-diagonals N(0, 10^2);
    u, v are standard normal; mu and each environment coefficient matrix
    are matrix normal with their own hyper-covariances; b and phi are
    log-normal with log-scale 10.
    """
    total = 0.0
    for name in ("a_chol", "sigma_chol", "c_alpha", "d_alpha", "c_beta", "d_beta"):
        f = getattr(state, name)
        total += _gamma_logpdf_sum(np.diag(f), GAMMA_SHAPE, GAMMA_RATE)
        rows, cols = _strict_tril_indices(f.shape[0])
        total += _normal_logpdf_sum(f[rows, cols], OFFDIAG_SD)
    total += _normal_logpdf_sum(state.u, UV_SD)
    total += _normal_logpdf_sum(state.v, UV_SD)
    if not np.isfinite(total):
        return -np.inf
    total += _matrix_normal_logpdf_chol(state.mu, None, state.c_alpha, state.d_alpha)
    for d in range(state.env_dim):
        total += _matrix_normal_logpdf_chol(state.beta[d], None, state.c_beta, state.d_beta)
    total += _lognormal_logpdf(state.b, LOG_SCALE_SD)
    total += _lognormal_logpdf(state.phi, LOG_SCALE_SD)
    return float(total)


@dataclass(frozen=True)
class G0Stats:
    """Sufficient statistics of the mixture block for the interaction target.

    One entry per gene: ``log_p[j]`` and ``log_q[j]`` are (N, L_j) sums of
    log p* and log(1-p*) over that triplet's distinct vectors; ``tau[j]``
    is the (N,) distinct count.
    """

    log_p: tuple[np.ndarray, ...]
    log_q: tuple[np.ndarray, ...]
    tau: tuple[np.ndarray, ...]


def g0_stats_from_mixtures(mixtures, n_genes: int, n_controls: int,
                           n_individuals: int, loci_per_gene) -> G0Stats:
    """Aggregate per-triplet mixture states into G0 sufficient statistics."""
    log_p = [np.zeros((n_individuals, lj)) for lj in loci_per_gene]
    log_q = [np.zeros((n_individuals, lj)) for lj in loci_per_gene]
    tau = [np.zeros(n_individuals, dtype=np.int64) for _ in range(n_genes)]
    seen = [np.zeros(n_individuals, dtype=bool) for _ in range(n_genes)]
    for st in mixtures:
        i, j, k = st.triplet
        n = i if k == 0 else n_controls + i
        p = st.pstar[:st.tau]
        log_p[j][n] = np.log(p).sum(axis=0)
        log_q[j][n] = np.log1p(-p).sum(axis=0)
        tau[j][n] = st.tau
        seen[j][n] = True
    for j in range(n_genes):
        if not seen[j].all():
            raise ValueError(f"missing mixture state for gene {j}")
    return G0Stats(log_p=tuple(log_p), log_q=tuple(log_q), tau=tuple(tau))


def _link_exponent_base(state: InteractionState, env: EnvCovariates,
                        n_controls: int) -> np.ndarray:
    """(J, N) shared exponent lambda + mu + beta'E per gene and individual."""
    n = state.n_individuals
    kvec = np.zeros(n, dtype=np.int64)
    kvec[n_controls:] = 1
    # beta contribution: sum_d beta[d, j, k_n] * E[n, d]
    bterm = np.einsum("djk,nd->jnk", state.beta, env.values)
    idx = np.arange(n)
    return state.lam + state.mu[:, kvec] + bterm[:, idx, kvec]


def g0_log_density(state: InteractionState, env: EnvCovariates,
                   stats: G0Stats, n_controls: int, loci_per_gene) -> float:
    """Sum of base-measure Beta log-densities at the distinct vectors."""
    base = _link_exponent_base(state, env, n_controls)
    total = 0.0
    for j, lj in enumerate(loci_per_gene):
        e1 = state.u[:lj][None, :] + base[j][:, None]
        e2 = state.v[:lj][None, :] + base[j][:, None]
        if (np.abs(e1) > EXP_CLAMP).any() or (np.abs(e2) > EXP_CLAMP).any():
            return -np.inf
        nu1 = np.exp(e1)
        nu2 = np.exp(e2)
        tau = stats.tau[j][:, None]
        total += float(
            np.sum((nu1 - 1.0) * stats.log_p[j])
            + np.sum((nu2 - 1.0) * stats.log_q[j])
            - np.sum(tau * betaln(nu1, nu2))
        )
    return total


def log_joint_stats(state: InteractionState, env: EnvCovariates, stats: G0Stats,
                    n_controls: int, loci_per_gene,
                    kernel: np.ndarray | None = None) -> float:
    """Interaction-block target: hyperpriors + effect-matrix prior + G0 terms."""
    total = log_prior_hyper(state)
    if not np.isfinite(total):
        return -np.inf
    if kernel is None:
        kernel = compute_kernel(env, state.b)
    right = effective_right_cov(state.sigma_chol, state.phi, kernel)
    try:
        right_chol = np.linalg.cholesky(right)
    except np.linalg.LinAlgError:
        return -np.inf
    total += _matrix_normal_logpdf_chol(state.lam, None, state.a_chol, right_chol)
    total += g0_log_density(state, env, stats, n_controls, loci_per_gene)
    return float(total) if np.isfinite(total) else -np.inf


def log_joint(state: InteractionState, env: EnvCovariates, mixtures,
              n_controls: int, loci_per_gene) -> float:
    """Convenience wrapper building the G0 statistics from mixture states."""
    stats = g0_stats_from_mixtures(
        mixtures, state.n_genes, n_controls, state.n_individuals, loci_per_gene
    )
    return log_joint_stats(state, env, stats, n_controls, loci_per_gene)


# ---------------------------------------------------------------------------
# flat parameter block for the transformation-MCMC step


class StateLayout:
    """Packing of the interaction block into one flat vector.

    Cholesky factors contribute only their lower-triangular entries; the
    ``positive_mask`` marks factor diagonals plus b and phi, the
    coordinates eligible for multiplicative moves.
    """

    _FACTORS = ("a_chol", "sigma_chol", "c_alpha", "d_alpha", "c_beta", "d_beta")

    def __init__(self, n_genes: int, n_individuals: int, env_dim: int, max_loci: int):
        self.n_genes = n_genes
        self.n_individuals = n_individuals
        self.env_dim = env_dim
        self.max_loci = max_loci
        sizes = {
            "lam": n_genes * n_individuals,
            "a_chol": n_genes * (n_genes + 1) // 2,
            "sigma_chol": n_individuals * (n_individuals + 1) // 2,
            "mu": 2 * n_genes,
            "beta": 2 * n_genes * env_dim,
            "u": max_loci,
            "v": max_loci,
            "c_alpha": n_genes * (n_genes + 1) // 2,
            "d_alpha": 3,
            "c_beta": n_genes * (n_genes + 1) // 2,
            "d_beta": 3,
            "b": 1,
            "phi": 1,
        }
        self.slices = {}
        offset = 0
        for name, size in sizes.items():
            self.slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

        self._tril = {
            "a_chol": np.tril_indices(n_genes),
            "sigma_chol": np.tril_indices(n_individuals),
            "c_alpha": np.tril_indices(n_genes),
            "d_alpha": np.tril_indices(2),
            "c_beta": np.tril_indices(n_genes),
            "d_beta": np.tril_indices(2),
        }
        mask = np.zeros(self.size, dtype=bool)
        for name in self._FACTORS:
            rows, cols = self._tril[name]
            diag = np.flatnonzero(rows == cols)
            sl = self.slices[name]
            idx = np.arange(sl.start, sl.stop)
            mask[idx[diag]] = True
        mask[self.slices["b"]] = True
        mask[self.slices["phi"]] = True
        self.positive_mask = mask

    def pack(self, state: InteractionState) -> np.ndarray:
        theta = np.empty(self.size)
        theta[self.slices["lam"]] = state.lam.ravel()
        for name in self._FACTORS:
            rows, cols = self._tril[name]
            theta[self.slices[name]] = getattr(state, name)[rows, cols]
        theta[self.slices["mu"]] = state.mu.ravel()
        theta[self.slices["beta"]] = state.beta.ravel()
        theta[self.slices["u"]] = state.u
        theta[self.slices["v"]] = state.v
        theta[self.slices["b"]] = state.b
        theta[self.slices["phi"]] = state.phi
        return theta

    def unpack(self, theta: np.ndarray) -> InteractionState:
        J, N, D, L = self.n_genes, self.n_individuals, self.env_dim, self.max_loci

        def factor(name, n):
            rows, cols = self._tril[name]
            f = np.zeros((n, n))
            f[rows, cols] = theta[self.slices[name]]
            return f

        return InteractionState(
            lam=theta[self.slices["lam"]].reshape(J, N).copy(),
            a_chol=factor("a_chol", J),
            sigma_chol=factor("sigma_chol", N),
            mu=theta[self.slices["mu"]].reshape(J, 2).copy(),
            beta=theta[self.slices["beta"]].reshape(D, J, 2).copy(),
            u=theta[self.slices["u"]].copy(),
            v=theta[self.slices["v"]].copy(),
            b=float(theta[self.slices["b"]][0]),
            phi=float(theta[self.slices["phi"]][0]),
            c_alpha=factor("c_alpha", J),
            d_alpha=factor("d_alpha", 2),
            c_beta=factor("c_beta", J),
            d_beta=factor("d_beta", 2),
        )
