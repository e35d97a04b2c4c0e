"""Case-control genotype data: containers, file formats, synthetic generators.

File formats (UTF-8, comma-separated, LF endings):

* Genotype file::

    #genes <J>
    #gene <name> <L_j>        (one line per gene)
    <individual_id>,<k>,<gene>,<locus>,<allele1>,<allele2>

  ``individual_id`` is a global 1-based index over all N = N0 + N1
  individuals, controls (k=0) occupying 1..N0 and cases (k=1) occupying
  N0+1..N.  ``locus`` is 1-based within the gene; alleles are 0/1 minor
  allele indicators for the two chromosomes.

* Environment file::

    #env <D> kinds=<c|b,...>
    <individual_id>,<v1>,...,<vD>

  One row per individual, same global index as the genotype file.
  Binary coordinates (kind ``b``) must take values in {0, 1}.

Writers emit rows in canonical order (k, individual, gene, locus), so
``write(load(f))`` is byte-identical for canonicalized files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

FREQ_EPS = 1e-12

SCENARIOS = {
    # name -> (genetic, environment, gene-gene, gene-environment) effects present
    "gxg_and_gxe": (True, True, True, True),
    "null": (False, False, False, False),
    "env_only": (False, True, False, False),
    "genetic_only": (True, False, True, False),
    "additive_independent": (True, True, False, False),
}


class DataFormatError(ValueError):
    """Malformed input file; the message names the offending line."""


@dataclass(frozen=True)
class GenotypeDataset:
    """Binary minor-allele indicators for a case-control study.

    ``alleles[j]`` has shape (N, L_j, 2) with rows ordered controls then
    cases; values are 0/1.
    """

    n_controls: int
    n_cases: int
    gene_names: tuple[str, ...]
    loci_per_gene: tuple[int, ...]
    alleles: tuple[np.ndarray, ...]
    locus_names: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if self.n_controls < 0 or self.n_cases < 0:
            raise ValueError("negative group size")
        if len(self.gene_names) != len(self.loci_per_gene):
            raise ValueError("gene_names and loci_per_gene length mismatch")
        if len(self.alleles) != self.n_genes:
            raise ValueError("one allele array per gene required")
        n = self.n_individuals
        arrays = []
        for j, (lj, arr) in enumerate(zip(self.loci_per_gene, self.alleles)):
            arr = np.asarray(arr, dtype=np.uint8)
            if arr.shape != (n, lj, 2):
                raise ValueError(
                    f"gene {self.gene_names[j]}: allele array shape {arr.shape}, "
                    f"expected {(n, lj, 2)}"
                )
            if not np.isin(arr, (0, 1)).all():
                raise ValueError(f"gene {self.gene_names[j]}: allele values must be 0 or 1")
            arrays.append(arr)
        object.__setattr__(self, "alleles", tuple(arrays))
        if not self.locus_names:
            names = tuple(
                tuple(f"{g}:{r + 1}" for r in range(lj))
                for g, lj in zip(self.gene_names, self.loci_per_gene)
            )
            object.__setattr__(self, "locus_names", names)
        for j, names in enumerate(self.locus_names):
            if len(names) != self.loci_per_gene[j]:
                raise ValueError(f"gene {self.gene_names[j]}: locus_names length mismatch")

    @property
    def n_genes(self) -> int:
        return len(self.gene_names)

    @property
    def n_individuals(self) -> int:
        return self.n_controls + self.n_cases

    def global_index(self, i: int, k: int) -> int:
        """0-based row for the i-th (0-based) individual of group k."""
        if k not in (0, 1):
            raise ValueError("k must be 0 or 1")
        n_k = self.n_controls if k == 0 else self.n_cases
        if not 0 <= i < n_k:
            raise IndexError(f"individual {i} out of range for group {k}")
        return i if k == 0 else self.n_controls + i

    def x(self, s: int, i: int, j: int, k: int, r: int) -> int:
        """Allele indicator for chromosome s (1 or 2) at locus r (0-based)."""
        if s not in (1, 2):
            raise ValueError("chromosome index s must be 1 or 2")
        return int(self.alleles[j][self.global_index(i, k), r, s - 1])

    def dosage_matrix(self, j: int) -> np.ndarray:
        """(N, L_j) minor-allele counts in {0,1,2}, controls then cases."""
        return self.alleles[j].sum(axis=2, dtype=np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GenotypeDataset):
            return NotImplemented
        return (
            self.n_controls == other.n_controls
            and self.n_cases == other.n_cases
            and self.gene_names == other.gene_names
            and self.loci_per_gene == other.loci_per_gene
            and self.locus_names == other.locus_names
            and all(np.array_equal(a, b) for a, b in zip(self.alleles, other.alleles))
        )


@dataclass(frozen=True)
class EnvCovariates:
    """Environmental covariates, one row per individual (controls then cases)."""

    values: np.ndarray
    kinds: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be (N, D)")
        if values.shape[1] != len(self.kinds):
            raise ValueError("one kind per coordinate required")
        for d, kind in enumerate(self.kinds):
            if kind not in ("continuous", "binary"):
                raise ValueError(f"unknown covariate kind {kind!r}")
            if kind == "binary" and not np.isin(values[:, d], (0.0, 1.0)).all():
                raise ValueError(f"binary coordinate {d} takes values outside {{0,1}}")
        object.__setattr__(self, "values", values)

    @property
    def n_individuals(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EnvCovariates):
            return NotImplemented
        return self.kinds == other.kinds and np.array_equal(self.values, other.values)


# ---------------------------------------------------------------------------
# file I/O


def write_genotypes(dataset: GenotypeDataset, path) -> None:
    lines = [f"#genes {dataset.n_genes}"]
    for name, lj in zip(dataset.gene_names, dataset.loci_per_gene):
        lines.append(f"#gene {name} {lj}")
    for k in (0, 1):
        n_k = dataset.n_controls if k == 0 else dataset.n_cases
        for i in range(n_k):
            n = dataset.global_index(i, k)
            for j, name in enumerate(dataset.gene_names):
                arr = dataset.alleles[j][n]
                for r in range(dataset.loci_per_gene[j]):
                    lines.append(f"{n + 1},{k},{name},{r + 1},{arr[r, 0]},{arr[r, 1]}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_genotypes(path) -> GenotypeDataset:
    """Parse and fully validate a genotype file.

    Raises DataFormatError naming the offending line for malformed rows,
    non-binary allele values, and inconsistent locus coverage.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#genes "):
        raise DataFormatError("line 1: expected '#genes <J>' header")
    try:
        n_genes = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise DataFormatError("line 1: malformed '#genes' header") from None
    if n_genes < 1:
        raise DataFormatError("line 1: need at least one gene")

    gene_names, loci_per_gene = [], []
    for j in range(n_genes):
        lineno = 2 + j
        if lineno - 1 >= len(lines) or not lines[lineno - 1].startswith("#gene "):
            raise DataFormatError(f"line {lineno}: expected '#gene <name> <loci>'")
        parts = lines[lineno - 1].split()
        if len(parts) != 3:
            raise DataFormatError(f"line {lineno}: expected '#gene <name> <loci>'")
        try:
            lj = int(parts[2])
        except ValueError:
            raise DataFormatError(f"line {lineno}: locus count must be an integer") from None
        if lj < 1:
            raise DataFormatError(f"line {lineno}: locus count must be positive")
        gene_names.append(parts[1])
        loci_per_gene.append(lj)
    gene_index = {g: j for j, g in enumerate(gene_names)}
    if len(gene_index) != n_genes:
        raise DataFormatError("duplicate gene name in header")

    # record[(id, k, j, r)] = (a1, a2)
    records: dict[tuple[int, int, int, int], tuple[int, int]] = {}
    for lineno0, line in enumerate(lines[1 + n_genes:], start=2 + n_genes):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise DataFormatError(f"line {lineno0}: expected 6 columns, got {len(parts)}")
        try:
            ind = int(parts[0])
            k = int(parts[1])
            locus = int(parts[3])
        except ValueError:
            raise DataFormatError(f"line {lineno0}: non-integer id/k/locus field") from None
        if parts[2] not in gene_index:
            raise DataFormatError(f"line {lineno0}: unknown gene {parts[2]!r}")
        j = gene_index[parts[2]]
        if k not in (0, 1):
            raise DataFormatError(f"line {lineno0}: case status k must be 0 or 1")
        if not 1 <= locus <= loci_per_gene[j]:
            raise DataFormatError(
                f"line {lineno0}: locus {locus} out of range 1..{loci_per_gene[j]} "
                f"for gene {parts[2]}"
            )
        if parts[4] not in ("0", "1") or parts[5] not in ("0", "1"):
            raise DataFormatError(f"line {lineno0}: non-binary allele value")
        key = (ind, k, j, locus - 1)
        if key in records:
            raise DataFormatError(f"line {lineno0}: duplicate record for {key}")
        records[key] = (int(parts[4]), int(parts[5]))

    if not records:
        raise DataFormatError("no data rows")
    ids_by_k = {0: set(), 1: set()}
    for ind, k, _, _ in records:
        ids_by_k[k].add(ind)
    n0, n1 = len(ids_by_k[0]), len(ids_by_k[1])
    if ids_by_k[0] != set(range(1, n0 + 1)):
        raise DataFormatError("control individual ids must be exactly 1..N0")
    if ids_by_k[1] != set(range(n0 + 1, n0 + n1 + 1)):
        raise DataFormatError("case individual ids must be exactly N0+1..N0+N1")

    n = n0 + n1
    alleles = [np.zeros((n, lj, 2), dtype=np.uint8) for lj in loci_per_gene]
    seen = [np.zeros((n, lj), dtype=bool) for lj in loci_per_gene]
    for (ind, k, j, r), (a1, a2) in records.items():
        row = ind - 1
        alleles[j][row, r, 0] = a1
        alleles[j][row, r, 1] = a2
        seen[j][row, r] = True
    for j, mask in enumerate(seen):
        if not mask.all():
            row, r = np.argwhere(~mask)[0]
            raise DataFormatError(
                f"inconsistent locus count: individual {row + 1}, gene "
                f"{gene_names[j]} is missing locus {r + 1}"
            )

    return GenotypeDataset(
        n_controls=n0,
        n_cases=n1,
        gene_names=tuple(gene_names),
        loci_per_gene=tuple(loci_per_gene),
        alleles=tuple(alleles),
    )


def write_environment(env: EnvCovariates, path) -> None:
    codes = ",".join("c" if kind == "continuous" else "b" for kind in env.kinds)
    lines = [f"#env {env.dim} kinds={codes}"]
    for n in range(env.n_individuals):
        vals = ",".join(repr(float(v)) for v in env.values[n])
        lines.append(f"{n + 1},{vals}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_environment(path, expected_n: int | None = None) -> EnvCovariates:
    """Parse an environment file; ``expected_n`` cross-checks the row count."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#env "):
        raise DataFormatError("line 1: expected '#env <D> kinds=...' header")
    parts = lines[0].split()
    if len(parts) != 3 or not parts[2].startswith("kinds="):
        raise DataFormatError("line 1: expected '#env <D> kinds=...' header")
    try:
        dim = int(parts[1])
    except ValueError:
        raise DataFormatError("line 1: dimension must be an integer") from None
    codes = parts[2][len("kinds="):].split(",")
    if len(codes) != dim or any(c not in ("c", "b") for c in codes):
        raise DataFormatError("line 1: kinds must list 'c' or 'b' per coordinate")
    kinds = tuple("continuous" if c == "c" else "binary" for c in codes)

    rows: dict[int, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != dim + 1:
            raise DataFormatError(f"line {lineno}: expected {dim + 1} columns, got {len(parts)}")
        try:
            ind = int(parts[0])
            vals = np.array([float(v) for v in parts[1:]])
        except ValueError:
            raise DataFormatError(f"line {lineno}: non-numeric cell") from None
        for d, kind in enumerate(kinds):
            if kind == "binary" and vals[d] not in (0.0, 1.0):
                raise DataFormatError(f"line {lineno}: binary coordinate {d + 1} not in {{0,1}}")
        if ind in rows:
            raise DataFormatError(f"line {lineno}: duplicate individual id {ind}")
        rows[ind] = vals
    if not rows:
        raise DataFormatError("no individuals")
    n = len(rows)
    if set(rows) != set(range(1, n + 1)):
        raise DataFormatError("individual ids must be exactly 1..N")
    if expected_n is not None and n != expected_n:
        raise DataFormatError(f"row-count mismatch: environment has {n} individuals, expected {expected_n}")
    values = np.stack([rows[i] for i in range(1, n + 1)])
    return EnvCovariates(values=values, kinds=kinds)


# ---------------------------------------------------------------------------
# synthetic generators


@dataclass(frozen=True)
class Dimensions:
    """Shape of a synthetic dataset."""

    n_controls: int
    n_cases: int
    loci_per_gene: tuple[int, ...]
    env_kinds: tuple[str, ...] = ("binary",)

    @property
    def n_genes(self) -> int:
        return len(self.loci_per_gene)

    @property
    def n_individuals(self) -> int:
        return self.n_controls + self.n_cases


@dataclass(frozen=True)
class NullModelHyper:
    """Prior settings for the null-model generator.

    ``log_nu_override`` bypasses the (u, v, mu, lambda) draws and fixes the
    Beta shapes at (exp(a), exp(b)) for every gene and locus.
    """

    M: int = 30
    alpha: float = 1.5
    u_sd: float = 1.0
    v_sd: float = 1.0
    mu_sd: float = 1.0
    lambda_sd: float = 1.0
    log_nu_override: tuple[float, float] | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def draw_urn_mixture(rng: np.random.Generator, M: int, alpha: float,
                     nu1: np.ndarray, nu2: np.ndarray) -> np.ndarray:
    """Draw M frequency vectors from the Polya-urn prior with Beta base.

    Sequential construction: the m-th vector is a fresh Beta draw with
    probability alpha/(alpha+m-1), otherwise a copy of a uniformly chosen
    predecessor.  Returns an (M, L) array clamped to (0, 1).
    """
    L = len(nu1)
    p = np.empty((M, L))
    p[0] = rng.beta(nu1, nu2)
    for m in range(1, M):
        if rng.random() < alpha / (alpha + m):
            p[m] = rng.beta(nu1, nu2)
        else:
            p[m] = p[rng.integers(m)]
    return np.clip(p, FREQ_EPS, 1.0 - FREQ_EPS)


def _draw_environment(rng: np.random.Generator, n: int, kinds: tuple[str, ...]) -> EnvCovariates:
    cols = []
    for kind in kinds:
        if kind == "binary":
            cols.append(rng.integers(0, 2, size=n).astype(np.float64))
        else:
            cols.append(rng.standard_normal(n))
    return EnvCovariates(values=np.column_stack(cols), kinds=kinds)


def generate_null_dataset(dims: Dimensions, hyper: NullModelHyper, seed: int):
    """Prior-predictive draw from the no-effect model.

    One mixture (M urn vectors) is drawn per gene and shared by every
    individual in both the case and control groups, so case/control
    genotype distributions are identical per gene by construction.
    Allocation probabilities are uniform 1/M.

    Returns ``(GenotypeDataset, EnvCovariates, truth)`` where ``truth``
    records the shared mixture fingerprints and the hypothesis ground truth.
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x6E756C6C)))
    n = dims.n_individuals
    L = max(dims.loci_per_gene)

    if hyper.log_nu_override is not None:
        a, b = hyper.log_nu_override
        nu1_all = np.full(L, np.exp(a))
        nu2_all = np.full(L, np.exp(b))
        mu = np.zeros(dims.n_genes)
        lam = np.zeros(dims.n_genes)
        u = np.full(L, a)
        v = np.full(L, b)
    else:
        u = rng.normal(0.0, hyper.u_sd, size=L)
        v = rng.normal(0.0, hyper.v_sd, size=L)
        mu = rng.normal(0.0, hyper.mu_sd, size=dims.n_genes)
        lam = rng.normal(0.0, hyper.lambda_sd, size=dims.n_genes)
        nu1_all = nu2_all = None

    alleles = []
    fingerprints = {}
    for j, lj in enumerate(dims.loci_per_gene):
        if nu1_all is not None:
            nu1, nu2 = nu1_all[:lj], nu2_all[:lj]
        else:
            nu1 = np.exp(u[:lj] + lam[j] + mu[j])
            nu2 = np.exp(v[:lj] + lam[j] + mu[j])
        mixture = draw_urn_mixture(rng, hyper.M, hyper.alpha, nu1, nu2)
        fingerprints[j] = hashlib.sha1(mixture.tobytes()).hexdigest()
        z = rng.integers(hyper.M, size=n)
        freqs = mixture[z]                      # (N, L_j)
        arr = (rng.random((n, lj, 2)) < freqs[:, :, None]).astype(np.uint8)
        alleles.append(arr)

    dataset = GenotypeDataset(
        n_controls=dims.n_controls,
        n_cases=dims.n_cases,
        gene_names=tuple(f"G{j + 1}" for j in range(dims.n_genes)),
        loci_per_gene=dims.loci_per_gene,
        alleles=tuple(alleles),
    )
    env = _draw_environment(rng, n, dims.env_kinds)
    truth = {
        "generator": "null_model",
        "seed": int(seed),
        "M": hyper.M,
        "alpha": hyper.alpha,
        "case_control_share_mixture": True,
        "mixture_fingerprint_by_gene": {
            dataset.gene_names[j]: {"0": fingerprints[j], "1": fingerprints[j]}
            for j in range(dims.n_genes)
        },
        "hypotheses": {
            "genes_null_true": True,
            "beta_null_true": True,
            "phi_null_true": True,
            "gxg_null_true": True,
        },
    }
    return dataset, env, truth


@dataclass(frozen=True)
class ScenarioConfig:
    """Design of a stratified case-control simulation.

    ``scenario`` selects which effects enter the logistic disease model:
    a genetic score from the DPL dosages, an environmental term, a
    gene-gene product term, and a gene-environment product term.
    ``dpl_positions`` are 0-based locus indices, one per gene.
    """

    scenario: str
    n_individuals: int
    loci_per_gene: tuple[int, ...]
    dpl_positions: tuple[int, ...]
    n_subpopulations: int = 1
    mixing_weights: tuple[float, ...] = (1.0,)
    genetic_effect: float = 2.0
    env_effect: float = 1.0
    gxg_effect: float = 1.0
    gxe_effect: float = 1.0
    baseline: float = 0.0
    freq_spread: float = 0.1
    env_kinds: tuple[str, ...] = ("binary",)
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(
                f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}"
            )
        if self.n_individuals < 2:
            raise ValueError("need at least 2 individuals")
        if len(self.mixing_weights) != self.n_subpopulations:
            raise ValueError("one mixing weight per subpopulation required")
        if any(w < 0 for w in self.mixing_weights):
            raise ValueError("mixing weights must be nonnegative")
        if abs(sum(self.mixing_weights) - 1.0) > 1e-12:
            raise ValueError("mixing weights must sum to 1 within 1e-12")
        if len(self.dpl_positions) != len(self.loci_per_gene):
            raise ValueError("one DPL position per gene required")
        for j, (pos, lj) in enumerate(zip(self.dpl_positions, self.loci_per_gene)):
            if not 0 <= pos < lj:
                raise ValueError(f"dpl position {pos} out of range for gene {j} with {lj} loci")

    @property
    def n_genes(self) -> int:
        return len(self.loci_per_gene)

    def active_effects(self) -> dict[str, float]:
        genetic, environ, gxg, gxe = SCENARIOS[self.scenario]
        return {
            "genetic": self.genetic_effect if genetic else 0.0,
            "environment": self.env_effect if environ else 0.0,
            "gxg": self.gxg_effect if gxg else 0.0,
            "gxe": self.gxe_effect if gxe else 0.0,
        }


def generate_scenario_dataset(cfg: ScenarioConfig):
    """Simulate a stratified case-control genotype study.

    Individuals are assigned to subpopulations by the mixing weights; each
    subpopulation carries its own allele-frequency vectors (anchors spread
    over (0.15, 0.85) plus uniform jitter of width ``freq_spread``).  Disease
    status is Bernoulli with a logistic link on the active effects, using
    centered DPL dosages (dosage - 1).  Returns
    ``(GenotypeDataset, EnvCovariates, truth)`` with individuals reordered
    controls-then-cases.
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(cfg.seed), 0x7363656E)))
    n = cfg.n_individuals
    J = cfg.n_genes
    S = cfg.n_subpopulations
    effects = cfg.active_effects()

    subpop = rng.choice(S, size=n, p=np.asarray(cfg.mixing_weights))
    if S == 1:
        anchors = np.array([0.3])
    else:
        anchors = np.linspace(0.15, 0.85, S)
    freqs = []  # per gene: (S, L_j)
    for lj in cfg.loci_per_gene:
        jitter = rng.uniform(-cfg.freq_spread, cfg.freq_spread, size=(S, lj))
        freqs.append(np.clip(anchors[:, None] + jitter, 0.02, 0.98))

    alleles = [
        (rng.random((n, lj, 2)) < freqs[j][subpop][:, :, None]).astype(np.uint8)
        for j, lj in enumerate(cfg.loci_per_gene)
    ]
    env = _draw_environment(rng, n, cfg.env_kinds)

    dpl_dos = np.stack(
        [alleles[j][:, cfg.dpl_positions[j], :].sum(axis=1) for j in range(J)],
        axis=1,
    ).astype(np.float64)            # (N, J) dosages in {0,1,2}
    centered = dpl_dos - 1.0
    e1 = env.values[:, 0]

    eta = np.full(n, cfg.baseline)
    eta += effects["genetic"] * centered.sum(axis=1)
    eta += effects["environment"] * e1
    if J >= 2 and effects["gxg"]:
        for a in range(J):
            for b in range(a + 1, J):
                eta += effects["gxg"] * centered[:, a] * centered[:, b]
    if effects["gxe"]:
        eta += effects["gxe"] * centered.sum(axis=1) * e1

    status = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
    order = np.concatenate([np.flatnonzero(status == 0), np.flatnonzero(status == 1)])
    n0 = int((status == 0).sum())
    n1 = n - n0
    if n0 == 0 or n1 == 0:
        raise ValueError(
            "scenario produced an empty case or control group; adjust baseline/effects"
        )

    dataset = GenotypeDataset(
        n_controls=n0,
        n_cases=n1,
        gene_names=tuple(f"G{j + 1}" for j in range(J)),
        loci_per_gene=cfg.loci_per_gene,
        alleles=tuple(arr[order] for arr in alleles),
    )
    env = EnvCovariates(values=env.values[order], kinds=env.kinds)

    genotype_affects_status = any(effects[k] != 0.0 for k in ("genetic", "gxg", "gxe"))
    truth = {
        "generator": "scenario",
        "scenario": cfg.scenario,
        "seed": int(cfg.seed),
        "n_controls": n0,
        "n_cases": n1,
        "n_subpopulations": S,
        "mixing_weights": list(cfg.mixing_weights),
        "subpopulation_counts": np.bincount(subpop, minlength=S).tolist(),
        "dpl_positions": list(cfg.dpl_positions),
        "effects": effects,
        "dpl_case_control_differential_is_zero": not genotype_affects_status,
        "hypotheses": {
            "genes_null_true": not genotype_affects_status,
            "beta_null_true": effects["gxe"] == 0.0,
            "phi_null_true": True,
            "gxg_null_true": effects["gxg"] == 0.0,
        },
    }
    return dataset, env, truth
