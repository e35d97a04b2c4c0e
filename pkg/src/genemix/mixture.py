"""Per-triplet Dirichlet-process mixture state and Gibbs full conditionals.

Each (individual, gene, case-status) triplet owns a finite mixture of M
Bernoulli-product components whose frequency vectors are drawn from a
Polya urn with a product-Beta base measure.  The triplet's single genotype
record enters the full conditionals only through the slot it is currently
allocated to; all other slots follow the bare urn dynamics.

Labels are kept compact (0..tau-1) after every configuration update.
All weight computations run in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, logsumexp

from .data import FREQ_EPS


@dataclass(frozen=True)
class BetaHyper:
    """Per-locus Beta shape parameters of the base measure."""

    nu1: np.ndarray
    nu2: np.ndarray

    def __post_init__(self):
        nu1 = np.atleast_1d(np.asarray(self.nu1, dtype=np.float64))
        nu2 = np.atleast_1d(np.asarray(self.nu2, dtype=np.float64))
        if nu1.shape != nu2.shape or nu1.ndim != 1:
            raise ValueError("nu1 and nu2 must be 1-D arrays of equal length")
        if not (np.isfinite(nu1).all() and np.isfinite(nu2).all()):
            raise ValueError("Beta shapes must be finite")
        if (nu1 <= 0).any() or (nu2 <= 0).any():
            raise ValueError("Beta shapes must be strictly positive")
        object.__setattr__(self, "nu1", nu1)
        object.__setattr__(self, "nu2", nu2)

    @property
    def n_loci(self) -> int:
        return len(self.nu1)


@dataclass
class MixtureState:
    """Mutable Gibbs state for one triplet's mixture.

    ``c`` maps each of the M slots to a compact label in 0..tau-1;
    ``pstar`` holds the distinct frequency vectors in its first tau rows;
    ``occupancy`` counts slots per label (first tau entries).  ``z`` is the
    slot holding the triplet's genotype record.
    """

    triplet: tuple[int, int, int]
    M: int
    z: int
    c: np.ndarray
    pstar: np.ndarray
    tau: int
    occupancy: np.ndarray

    @classmethod
    def from_prior(cls, triplet, M: int, alpha: float, hyper: BetaHyper,
                   rng: np.random.Generator) -> "MixtureState":
        """Sequential Polya-urn draw of the full M-slot configuration."""
        L = hyper.n_loci
        c = np.zeros(M, dtype=np.int64)
        pstar = np.zeros((M, L))
        occupancy = np.zeros(M, dtype=np.int64)
        pstar[0] = np.clip(rng.beta(hyper.nu1, hyper.nu2), FREQ_EPS, 1 - FREQ_EPS)
        occupancy[0] = 1
        tau = 1
        for m in range(1, M):
            if rng.random() < alpha / (alpha + m):
                pstar[tau] = np.clip(rng.beta(hyper.nu1, hyper.nu2), FREQ_EPS, 1 - FREQ_EPS)
                c[m] = tau
                occupancy[tau] = 1
                tau += 1
            else:
                prev = int(rng.integers(m))
                c[m] = c[prev]
                occupancy[c[prev]] += 1
        z = int(rng.integers(M))
        return cls(triplet=tuple(triplet), M=M, z=z, c=c, pstar=pstar,
                   tau=tau, occupancy=occupancy)

    @classmethod
    def from_single_draw(cls, triplet, M: int, hyper: BetaHyper,
                         rng: np.random.Generator) -> "MixtureState":
        """All slots tied to one base-measure draw (chain initialization)."""
        L = hyper.n_loci
        pstar = np.zeros((M, L))
        pstar[0] = np.clip(rng.beta(hyper.nu1, hyper.nu2), FREQ_EPS, 1 - FREQ_EPS)
        occupancy = np.zeros(M, dtype=np.int64)
        occupancy[0] = M
        return cls(triplet=tuple(triplet), M=M, z=0, c=np.zeros(M, dtype=np.int64),
                   pstar=pstar, tau=1, occupancy=occupancy)

    def frequencies(self) -> np.ndarray:
        """(M, L) slot-expanded frequency vectors."""
        return self.pstar[self.c]

    def validate(self) -> None:
        if not 0 <= self.z < self.M:
            raise ValueError("allocation out of range")
        if self.c.shape != (self.M,):
            raise ValueError("configuration vector has wrong length")
        labels = np.unique(self.c)
        if not np.array_equal(labels, np.arange(self.tau)):
            raise ValueError("labels not compact 0..tau-1")
        counts = np.bincount(self.c, minlength=self.M)
        if not np.array_equal(counts, self.occupancy):
            raise ValueError("occupancy counts inconsistent with configuration")
        if int(self.occupancy[:self.tau].sum()) != self.M:
            raise ValueError("occupancy must sum to M")
        p = self.pstar[:self.tau]
        if not ((p > 0) & (p < 1)).all():
            raise ValueError("distinct frequencies must lie strictly in (0,1)")


def genotype_log_mass(x, p: float) -> float:
    """Log Bernoulli-pair mass: (x1+x2) log p + (2-x1-x2) log(1-p)."""
    x1, x2 = int(x[0]), int(x[1])
    if x1 not in (0, 1) or x2 not in (0, 1):
        raise ValueError("allele indicators must be 0 or 1")
    if not 0.0 < p < 1.0:
        raise ValueError("frequency must lie strictly in (0,1)")
    n1 = x1 + x2
    return n1 * np.log(p) + (2 - n1) * np.log1p(-p)


def _label_log_likelihoods(state: MixtureState, n1: np.ndarray) -> np.ndarray:
    """Record log-likelihood under each distinct frequency vector."""
    p = state.pstar[:state.tau]
    return np.log(p) @ n1 + np.log1p(-p) @ (2.0 - n1)


def _categorical(logw: np.ndarray, rng: np.random.Generator) -> int:
    logw = logw - logsumexp(logw)
    cdf = np.cumsum(np.exp(logw))
    return int(np.searchsorted(cdf, rng.random() * cdf[-1]))


def sample_allocation(dosages: np.ndarray, state: MixtureState,
                      rng: np.random.Generator) -> int:
    """Draw the allocation slot from its full conditional (uniform 1/M prior).

    ``dosages`` holds the per-locus minor-allele counts (0, 1 or 2) of the
    triplet's genotype record.
    """
    n1 = np.asarray(dosages, dtype=np.float64)
    ll = _label_log_likelihoods(state, n1)
    logw = ll[state.c]
    if not np.isfinite(logw).any():
        raise ValueError("all allocation weights vanished")
    state.z = _categorical(logw, rng)
    return state.z


def polya_urn_log_q0(n1, n2, hyper: BetaHyper, alpha: float) -> float:
    """Log weight of opening a fresh urn label given per-locus allele counts."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n1 = np.asarray(n1, dtype=np.float64)
    n2 = np.asarray(n2, dtype=np.float64)
    if (n1 < 0).any() or (n2 < 0).any():
        raise ValueError("allele counts must be nonnegative")
    return float(
        np.log(alpha)
        + np.sum(betaln(n1 + hyper.nu1, n2 + hyper.nu2) - betaln(hyper.nu1, hyper.nu2))
    )


def polya_urn_q0(n1, n2, hyper: BetaHyper, alpha: float) -> float:
    """alpha times the base-measure predictive mass of the counts."""
    return float(np.exp(polya_urn_log_q0(n1, n2, hyper, alpha)))


def _detach_slot(state: MixtureState, m: int) -> None:
    """Remove slot m from its label, compacting if the label empties."""
    label = int(state.c[m])
    state.c[m] = -1
    state.occupancy[label] -= 1
    if state.occupancy[label] == 0:
        last = state.tau - 1
        if label != last:
            state.pstar[label] = state.pstar[last]
            state.occupancy[label] = state.occupancy[last]
            state.c[state.c == last] = label
        state.occupancy[last] = 0
        state.tau = last


def sample_configuration(m: int, state: MixtureState, dosages: np.ndarray,
                         alpha: float, hyper: BetaHyper,
                         rng: np.random.Generator) -> int:
    """Gibbs update of slot m's label.

    Existing labels weigh occupancy-excluding-m times the record likelihood
    when m is the allocated slot; a fresh label weighs alpha times the
    base-measure predictive.  A fresh label's frequency vector is drawn from
    the per-locus Beta posterior of that slot's counts.  Returns the chosen
    label; labels stay compact.
    """
    occupied = (m == state.z)
    n1 = np.asarray(dosages, dtype=np.float64) if occupied else np.zeros(hyper.n_loci)
    n2 = 2.0 - n1 if occupied else np.zeros(hyper.n_loci)

    _detach_slot(state, m)
    tau = state.tau
    logw = np.empty(tau + 1)
    logw[:tau] = np.log(state.occupancy[:tau].astype(np.float64))
    if occupied:
        logw[:tau] += _label_log_likelihoods(state, n1)
        logw[tau] = polya_urn_log_q0(n1, n2, hyper, alpha)
    else:
        logw[tau] = np.log(alpha)

    choice = _categorical(logw, rng)
    if choice == tau:
        state.pstar[tau] = np.clip(
            rng.beta(n1 + hyper.nu1, n2 + hyper.nu2), FREQ_EPS, 1 - FREQ_EPS
        )
        state.occupancy[tau] = 1
        state.tau = tau + 1
    else:
        state.occupancy[choice] += 1
    state.c[m] = choice
    return choice


def resample_distinct_freqs(state: MixtureState, dosages: np.ndarray,
                            hyper: BetaHyper, rng: np.random.Generator) -> None:
    """Redraw every distinct frequency vector from its Beta full conditional.

    The label holding the allocated slot aggregates the record's counts;
    all other labels carry zero counts and so are refreshed from the prior.
    """
    n1 = np.asarray(dosages, dtype=np.float64)
    data_label = int(state.c[state.z])
    a = np.tile(hyper.nu1, (state.tau, 1))
    b = np.tile(hyper.nu2, (state.tau, 1))
    a[data_label] += n1
    b[data_label] += 2.0 - n1
    state.pstar[:state.tau] = np.clip(rng.beta(a, b), FREQ_EPS, 1 - FREQ_EPS)


def count_distinct(state: MixtureState) -> int:
    """Number of distinct frequency vectors currently in the state."""
    return int(state.tau)


def gibbs_cycle(state: MixtureState, dosages: np.ndarray, alpha: float,
                hyper: BetaHyper, rng: np.random.Generator) -> None:
    """One full sweep: allocation, all M configuration slots, frequencies."""
    sample_allocation(dosages, state, rng)
    for m in range(state.M):
        sample_configuration(m, state, dosages, alpha, hyper, rng)
    resample_distinct_freqs(state, dosages, hyper, rng)
