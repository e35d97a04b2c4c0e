"""Posterior decision machinery.

Per retained snapshot and gene, the central clustering is located among
the control triplets' partitions and among the case triplets' partitions;
the divergence between the two central mixtures drives the gene tests,
both as a set-partition distance and as a Euclidean distance between
logit mean-frequency vectors.  Thresholds come from the 55th percentile
of the matching statistics under a null-model fit, and every null
hypothesis is accepted exactly when its posterior probability reaches
0.5 (ties accept).

The Euclidean tests follow a two-stage rule: plain distances first, the
permutation-minimized distance only to re-examine rejections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._kernels import central_index_from_labels, dhat_labels
from .engine import TraceStore

ACCEPT_PROBABILITY = 0.5


class HypothesisError(ValueError):
    pass


@dataclass(frozen=True)
class ClusteringPartition:
    """Set partition of the M mixture slots, stored as canonical labels.

    Labels are renumbered by first occurrence, so equal partitions have
    equal label vectors.
    """

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-D array")
        canonical = np.empty_like(labels)
        mapping: dict[int, int] = {}
        for idx, lab in enumerate(labels):
            mapping.setdefault(int(lab), len(mapping))
            canonical[idx] = mapping[int(lab)]
        object.__setattr__(self, "labels", canonical)

    @property
    def n_items(self) -> int:
        return self.labels.size

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(np.flatnonzero(self.labels == lab))
            for lab in range(self.n_blocks)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClusteringPartition):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


def partition_of(vectors: np.ndarray) -> ClusteringPartition:
    """Group the M frequency vectors into exact-equality classes."""
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise ValueError("need an (M, L) matrix with M >= 1")
    labels = np.empty(vectors.shape[0], dtype=np.int64)
    seen: list[np.ndarray] = []
    for m, row in enumerate(vectors):
        for lab, ref in enumerate(seen):
            if np.array_equal(row, ref):
                labels[m] = lab
                break
        else:
            labels[m] = len(seen)
            seen.append(row)
    return ClusteringPartition(labels=labels)


def clustering_distance(c1: ClusteringPartition, c2: ClusteringPartition) -> float:
    """max of the two directed mismatch fractions; 0 iff equal, always < 1."""
    if c1.n_items != c2.n_items:
        raise ValueError("partitions must cover the same number of items")
    return float(dhat_labels(c1.labels, c2.labels, c1.n_blocks, c2.n_blocks))


def central_clustering_index(samples, epsilon: float) -> int:
    """Index whose epsilon-neighborhood holds the most sample partitions.

    Ties resolve to the smallest index; the list must be non-empty.
    """
    if len(samples) == 0:
        raise HypothesisError("empty sample list")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    labels = np.stack([s.labels for s in samples])
    n_blocks = np.array([s.n_blocks for s in samples], dtype=np.int64)
    return int(central_index_from_labels(labels, n_blocks, float(epsilon)))


def logit_mean_freqs(vectors: np.ndarray) -> np.ndarray:
    """logit of each component's locus-averaged frequency."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if ((vectors <= 0) | (vectors >= 1)).any():
        raise ValueError("frequencies must lie strictly in (0,1)")
    means = vectors.mean(axis=1)
    return np.log(means / (1.0 - means))


def euclidean_divergence(v1: np.ndarray, v2: np.ndarray) -> float:
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    if v1.shape != v2.shape:
        raise ValueError("vectors must have equal length")
    return float(np.sqrt(np.sum((v1 - v2) ** 2)))


def min_permutation_distance(v1: np.ndarray, v2: np.ndarray) -> float:
    """Euclidean distance minimized over component permutations.

    Solved exactly as a linear assignment on squared-difference costs;
    zero iff the two vectors coincide as multisets.
    """
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    if v1.shape != v2.shape:
        raise ValueError("vectors must have equal length")
    cost = (v1[:, None] - v2[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].sum()))


# ---------------------------------------------------------------------------
# per-snapshot statistic streams


@dataclass(frozen=True)
class StatisticStream:
    """Aligned per-snapshot statistics extracted from a trace.

    ``scalars`` maps hypothesis-statistic names to (S,) arrays;
    ``per_locus[j]`` is the (S, L_j) matrix of per-locus central-clustering
    distances for DPL detection; ``logit_means[j]`` has shape (S, 2, M)
    holding the control/case central logit mean-frequency vectors for the
    permutation-minimized fallback.
    """

    scalars: dict[str, np.ndarray]
    per_locus: tuple[np.ndarray, ...]
    logit_means: tuple[np.ndarray, ...]
    central: np.ndarray
    gene_names: tuple[str, ...]


def _scalar_keys(gene_names, env_dim: int) -> list[str]:
    keys = ["d_star", "d_star_E"]
    keys += [f"d_hat[{g}]" for g in gene_names]
    keys += [f"d_E[{g}]" for g in gene_names]
    for el in range(env_dim):
        for g in gene_names:
            for k in (0, 1):
                keys.append(f"abs_beta[{el + 1},{g},{k}]")
    keys.append("phi")
    for a in range(len(gene_names)):
        for b in range(a + 1, len(gene_names)):
            keys.append(f"abs_A[{gene_names[a]},{gene_names[b]}]")
    return keys


def statistic_stream(trace: TraceStore, central_radius: float | None = None) -> StatisticStream:
    """Compute the full statistic stream of a trace.

    ``central_radius`` fixes the neighborhood radius of the central
    clustering search; by default each (gene, group, snapshot) sample set
    uses the median of its pairwise distances.
    """
    dims = trace.header["dims"]
    n0, n1 = dims["n_controls"], dims["n_cases"]
    J = dims["n_genes"]
    env_dim = dims["env_dim"]
    gene_names = tuple(dims["gene_names"])
    loci = dims["loci_per_gene"]
    M = trace.header["chain"]["M"]
    order = trace.triplets
    # triplet positions per (j, k) in trace order, sorted by individual
    slots: dict[tuple[int, int], list[int]] = {(j, k): [] for j in range(J) for k in (0, 1)}
    for t, (i, j, k) in enumerate(order):
        slots[(j, k)].append(t)
    radius = -1.0 if central_radius is None else float(central_radius)

    keys = _scalar_keys(gene_names, env_dim)
    scalars: dict[str, list[float]] = {key: [] for key in keys}
    per_locus = [[] for _ in range(J)]
    logit_means = [[] for _ in range(J)]
    central = []

    for snap in trace.iter_snapshots():
        d_hats = np.empty(J)
        d_es = np.empty(J)
        snap_central = np.empty((J, 2), dtype=np.int64)
        for j in range(J):
            expanded = {}
            for k, n_k in ((0, n0), (1, n1)):
                idx = slots[(j, k)]
                labels = np.stack([snap.c[t] for t in idx])
                n_blocks = snap.tau[idx]
                pos = int(central_index_from_labels(labels, n_blocks, radius))
                snap_central[j, k] = pos
                t_central = idx[pos]
                expanded[k] = (
                    snap.c[t_central],
                    snap.tau[t_central],
                    snap.pstar[t_central][snap.c[t_central]],   # (M, L_j)
                )
            c0, tau0, p0 = expanded[0]
            c1, tau1, p1 = expanded[1]
            d_hats[j] = dhat_labels(c0, c1, int(tau0), int(tau1))
            v0 = logit_mean_freqs(p0)
            v1 = logit_mean_freqs(p1)
            d_es[j] = euclidean_divergence(v0, v1)
            logit_means[j].append(np.stack([v0, v1]))
            lp0 = np.log(p0 / (1.0 - p0))
            lp1 = np.log(p1 / (1.0 - p1))
            per_locus[j].append(np.sqrt(((lp0 - lp1) ** 2).sum(axis=0)))
            scalars[f"d_hat[{gene_names[j]}]"].append(float(d_hats[j]))
            scalars[f"d_E[{gene_names[j]}]"].append(float(d_es[j]))
        scalars["d_star"].append(float(d_hats.max()))
        scalars["d_star_E"].append(float(d_es.max()))
        for el in range(env_dim):
            for j in range(J):
                for k in (0, 1):
                    scalars[f"abs_beta[{el + 1},{gene_names[j]},{k}]"].append(
                        abs(float(snap.beta[el, j, k]))
                    )
        scalars["phi"].append(float(snap.phi))
        for a in range(J):
            for b in range(a + 1, J):
                scalars[f"abs_A[{gene_names[a]},{gene_names[b]}]"].append(
                    abs(float(snap.a_matrix[a, b]))
                )
        central.append(snap_central)

    if not central:
        raise HypothesisError("empty trace")
    return StatisticStream(
        scalars={key: np.asarray(vals) for key, vals in scalars.items()},
        per_locus=tuple(np.stack(rows) for rows in per_locus),
        logit_means=tuple(np.stack(rows) for rows in logit_means),
        central=np.stack(central),
        gene_names=gene_names,
    )


# ---------------------------------------------------------------------------
# calibration and testing


def nearest_rank_percentile(values: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile: sorted value at index ceil(q * n)."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise HypothesisError("empty statistic stream")
    if not 0 < percentile <= 100:
        raise ValueError("percentile must lie in (0, 100]")
    # round before ceil: 55/100*100 is 55.000...01 in floats
    rank = math.ceil(round(percentile / 100.0 * values.size, 9))
    return float(values[max(rank, 1) - 1])


@dataclass(frozen=True)
class ThresholdSet:
    """Calibrated epsilon per hypothesis statistic, with provenance."""

    epsilons: dict[str, float]
    percentile: float
    null_run: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(eps < 0 for eps in self.epsilons.values()):
            raise ValueError("thresholds must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "percentile": self.percentile,
            "null_run": self.null_run,
            "epsilons": dict(self.epsilons),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ThresholdSet":
        return cls(
            epsilons={k: float(v) for k, v in payload["epsilons"].items()},
            percentile=float(payload["percentile"]),
            null_run=payload.get("null_run", {}),
        )


def calibrate_thresholds(null_trace: TraceStore, percentile: float = 55.0,
                         stream: StatisticStream | None = None) -> ThresholdSet:
    """Set every epsilon to the given percentile of its null-fit posterior."""
    if stream is None:
        stream = statistic_stream(null_trace)
    epsilons = {
        key: nearest_rank_percentile(values, percentile)
        for key, values in stream.scalars.items()
    }
    return ThresholdSet(
        epsilons=epsilons,
        percentile=percentile,
        null_run={"seed": null_trace.header.get("seed"), "path": null_trace.path},
    )


_INTERPRETATIONS = {
    (False, False, False): (
        "No significant genetic or environmental influence detected."
    ),
    (False, False, True): (
        "Genes show no marginal significance; the environment influences "
        "gene-gene interaction but not in a way that causes the disease."
    ),
    (False, True, False): (
        "Genes show no marginal significance; the environment alters some "
        "genes without affecting disease status."
    ),
    (False, True, True): (
        "Genes show no marginal significance; the environment alters some "
        "genes and influences gene-gene interaction, but not in a way that "
        "causes the disease."
    ),
    (True, False, False): (
        "Genes drive the disease with no environmental involvement: a "
        "purely genetic aetiology."
    ),
    (True, False, True): (
        "Gene-gene interaction, adversely affected by the environment, "
        "underlies the disease; marginal environmental effects on genes "
        "are ruled out."
    ),
    (True, True, False): (
        "The environment alters some genes, which in turn cause the "
        "disease; no influence on gene-gene interaction."
    ),
    (True, True, True): (
        "The environment affects both the marginal gene effects and "
        "gene-gene interaction, contributing to the disease."
    ),
}


@dataclass(frozen=True)
class TestReport:
    """Decisions of the full battery.

    ``probabilities[h]`` is the posterior mass of the null region;
    ``accept[h]`` is True when that mass reaches 0.5.  Euclidean
    hypotheses rejected at stage one carry a ``fallback`` entry with the
    permutation-minimized re-test that determined the final decision.
    """

    probabilities: dict[str, float]
    accept: dict[str, bool]
    epsilons: dict[str, float]
    fallback: dict[str, dict]
    interpretation: str
    genes_significant: bool
    beta_significant: bool
    phi_significant: bool

    def table_rows(self) -> list[tuple[str, str, float, float, str]]:
        rows = []
        for key in self.probabilities:
            stat = key if key not in self.fallback else self.fallback[key]["statistic"]
            rows.append((
                f"H0[{key}]",
                stat,
                self.epsilons[key],
                self.probabilities[key],
                "accept" if self.accept[key] else "reject",
            ))
        return rows

    def to_text(self) -> str:
        lines = ["hypothesis battery", "=" * 60]
        for name, stat, eps, prob, decision in self.table_rows():
            lines.append(f"{name:32s} stat={stat:20s} eps={eps:.6g} P={prob:.4f} -> {decision}")
        lines.append("")
        lines.append(f"interpretation: {self.interpretation}")
        return "\n".join(lines) + "\n"


def _decide(prob: float) -> bool:
    """Accept the null iff its posterior probability reaches 0.5."""
    return prob >= ACCEPT_PROBABILITY


def run_test_battery(trace: TraceStore, thresholds: ThresholdSet,
                     stream: StatisticStream | None = None,
                     central_radius: float | None = None) -> TestReport:
    """Evaluate every calibrated hypothesis on a fitted trace.

    Raises HypothesisError when the threshold set and the trace disagree
    on the statistic names (e.g. thresholds calibrated for a different
    number of genes).
    """
    if stream is None:
        stream = statistic_stream(trace, central_radius=central_radius)
    missing = set(thresholds.epsilons) ^ set(stream.scalars)
    if missing:
        raise HypothesisError(
            "threshold/statistic mismatch (differing dimensions?): "
            + ", ".join(sorted(missing))
        )

    probabilities: dict[str, float] = {}
    accept: dict[str, bool] = {}
    fallback: dict[str, dict] = {}
    for key, eps in thresholds.epsilons.items():
        prob = float(np.mean(stream.scalars[key] < eps))
        probabilities[key] = prob
        accept[key] = _decide(prob)

    # two-stage Euclidean rule: re-test rejections with the
    # permutation-minimized distance against the same epsilon
    def _min_perm_series(j: int) -> np.ndarray:
        pairs = stream.logit_means[j]
        return np.array([
            min_permutation_distance(pairs[s, 0], pairs[s, 1])
            for s in range(pairs.shape[0])
        ])

    min_perm: dict[int, np.ndarray] = {}
    for j, gene in enumerate(stream.gene_names):
        key = f"d_E[{gene}]"
        if not accept[key]:
            min_perm[j] = _min_perm_series(j)
            prob = float(np.mean(min_perm[j] < thresholds.epsilons[key]))
            fallback[key] = {"statistic": f"d_E_min[{gene}]", "probability": prob}
            probabilities[key] = prob
            accept[key] = _decide(prob)
    if not accept["d_star_E"]:
        for j in range(len(stream.gene_names)):
            if j not in min_perm:
                min_perm[j] = _min_perm_series(j)
        series = np.max(np.stack([min_perm[j] for j in sorted(min_perm)]), axis=0)
        prob = float(np.mean(series < thresholds.epsilons["d_star_E"]))
        fallback["d_star_E"] = {"statistic": "d_star_E_min", "probability": prob}
        probabilities["d_star_E"] = prob
        accept["d_star_E"] = _decide(prob)

    genes_significant = (not accept["d_star"]) and (not accept["d_star_E"])
    beta_significant = any(
        not accept[key] for key in accept if key.startswith("abs_beta[")
    )
    phi_significant = not accept["phi"]
    return TestReport(
        probabilities=probabilities,
        accept=accept,
        epsilons=dict(thresholds.epsilons),
        fallback=fallback,
        interpretation=_INTERPRETATIONS[(genes_significant, beta_significant, phi_significant)],
        genes_significant=genes_significant,
        beta_significant=beta_significant,
        phi_significant=phi_significant,
    )


# ---------------------------------------------------------------------------
# DPL detection and interaction summaries


@dataclass(frozen=True)
class DplReport:
    """Snapshot-averaged per-locus divergences with top-fraction flags."""

    gene_names: tuple[str, ...]
    distances: tuple[np.ndarray, ...]
    cutoffs: tuple[float, ...]
    flagged: tuple[tuple[int, ...], ...]

    def table_rows(self):
        rows = []
        for j, gene in enumerate(self.gene_names):
            for r, dist in enumerate(self.distances[j]):
                rows.append((gene, r + 1, float(dist), self.cutoffs[j],
                             r in self.flagged[j]))
        return rows


def detect_dpl(trace: TraceStore, top_fraction: float = 0.10,
               stream: StatisticStream | None = None) -> DplReport:
    """Flag loci whose averaged case/control divergence exceeds the
    top-fraction cutoff.

    The cutoff is the largest distance *not* in the top ceil(f * L); flags
    are strictly greater, so constant (e.g. all-zero) distance profiles
    flag nothing and fully distinct profiles flag exactly ceil(f * L) loci.
    """
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must lie in (0, 1]")
    if stream is None:
        stream = statistic_stream(trace)
    distances, cutoffs, flagged = [], [], []
    for j, gene in enumerate(stream.gene_names):
        mean_dist = stream.per_locus[j].mean(axis=0)
        L = mean_dist.size
        k = math.ceil(top_fraction * L)
        desc = np.sort(mean_dist)[::-1]
        cutoff = float(desc[k]) if k < L else 0.0
        distances.append(mean_dist)
        cutoffs.append(cutoff)
        flagged.append(tuple(int(r) for r in np.flatnonzero(mean_dist > cutoff)))
    return DplReport(
        gene_names=stream.gene_names,
        distances=tuple(distances),
        cutoffs=tuple(cutoffs),
        flagged=tuple(flagged),
    )


def gene_gene_correlation_summary(trace: TraceStore) -> np.ndarray:
    """Elementwise posterior median of the correlations implied by A."""
    corrs = []
    for snap in trace.iter_snapshots():
        a = snap.a_matrix
        scale = np.sqrt(np.diag(a))
        corrs.append(a / np.outer(scale, scale))
    if not corrs:
        raise HypothesisError("empty trace")
    out = np.median(np.stack(corrs), axis=0)
    np.fill_diagonal(out, 1.0)
    return out
