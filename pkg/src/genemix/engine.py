"""MCMC orchestration: parallel Gibbs sweep, serial TMCMC block, tracing.

Each iteration runs the per-triplet mixture updates (data-parallel over a
deterministic triplet partition), then one transformation-MCMC step over
the flat interaction block in a single worker.  Every random draw comes
from a stream keyed by (seed, purpose, iteration, triplet), so traces are
byte-identical for any worker count and runs resume exactly from
checkpoints.

Trace file layout (little-endian):

* magic ``GENEMIXTRACE1\\n``
* uint64 header length, then that many bytes of JSON (dims, chain
  settings, seed; the worker count is execution detail and is excluded)
* per retained snapshot: uint64 payload length, then
  int64 iteration;
  per triplet in order (k, i, j): int32 tau, int32 c[M],
  float64 pstar[tau * L_j];
  float64 A[J*J], mu[J*2], beta[D*J*2], b, phi.

A sidecar ``<trace>.ckpt.npz`` stores the full sampler state after the
last flushed snapshot, enabling exact resume.
"""

from __future__ import annotations

import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import EnvCovariates, GenotypeDataset
from .interaction import (
    G0Stats,
    InteractionState,
    StateLayout,
    _link_exponent_base,
    compute_kernel,
    initial_state,
    log_joint_stats,
)
from .mixture import MixtureState
from .tmcmc import TmcmcConfig, mh_step

_MAGIC = b"GENEMIXTRACE1\n"


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings.

    ``alpha`` defaults to 10 for ordinary fits; null-calibration runs use
    1.5.  Scale adaptation targets the stated acceptance band during
    burn-in and is frozen afterwards.
    """

    M: int = 30
    alpha: float = 10.0
    iterations: int = 100_000
    burn_in: int = 50_000
    thinning: int = 1
    workers: int = 1
    seed: int = 0
    base_scale: float = 0.05
    # positivity-constrained coordinates take only the (scale-free)
    # multiplicative branch: additive steps on a funnel-collapsed scale
    # parameter sign-flip it into a zero-density region and strangle the
    # whole block's acceptance.  Few of them jump per move.
    move_mix: float = 0.5
    mult_prob: float = 0.1
    # "grouped" runs one TMCMC step per parameter sub-block each
    # iteration; "single" concatenates everything into one block.  The
    # grouped form mixes the small sub-blocks orders of magnitude faster.
    block_mode: str = "grouped"
    adapt_interval: int = 100
    target_acceptance: tuple[float, float] = (0.15, 0.30)
    checkpoint_every: int = 2000

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if self.workers < 1:
            raise ValueError("need at least one worker")
        if self.block_mode not in ("grouped", "single"):
            raise ValueError("block_mode must be 'grouped' or 'single'")

    @property
    def n_snapshots(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


def partition_triplets(n_controls: int, n_cases: int, n_genes: int,
                       workers: int) -> list[list[tuple[int, int, int]]]:
    """Deterministic contiguous split of the (i, j, k) triplets.

    Control triplets are laid out first, then case triplets; each group is
    split contiguously across the workers, so the assignment depends only
    on the dimensions.
    """
    if workers < 1:
        raise ValueError("need at least one worker")
    out: list[list[tuple[int, int, int]]] = [[] for _ in range(workers)]
    for k, n_k in ((0, n_controls), (1, n_cases)):
        triplets = [(i, j, k) for i in range(n_k) for j in range(n_genes)]
        for w, chunk in enumerate(np.array_split(np.arange(len(triplets)), workers)):
            out[w].extend(triplets[int(a)] for a in chunk)
    return out


# ---------------------------------------------------------------------------
# mixture block: per-gene arrays driving the compiled sweep


@dataclass
class MixtureBlock:
    """Array-of-triplets mixture state, grouped by gene.

    Row n of every per-gene array is the global individual index
    (controls then cases).  ``dosages[j]`` is the fixed data unless a
    Geweke harness redraws it.
    """

    n_controls: int
    n_cases: int
    M: int
    loci_per_gene: tuple[int, ...]
    dosages: list[np.ndarray]
    z: list[np.ndarray] = field(default_factory=list)
    c: list[np.ndarray] = field(default_factory=list)
    pstar: list[np.ndarray] = field(default_factory=list)
    occ: list[np.ndarray] = field(default_factory=list)
    tau: list[np.ndarray] = field(default_factory=list)
    s1: list[np.ndarray] = field(default_factory=list)
    s2: list[np.ndarray] = field(default_factory=list)

    @property
    def n_individuals(self) -> int:
        return self.n_controls + self.n_cases

    @property
    def n_genes(self) -> int:
        return len(self.loci_per_gene)

    @classmethod
    def from_dataset(cls, dataset: GenotypeDataset, M: int) -> "MixtureBlock":
        dosages = [dataset.dosage_matrix(j).astype(np.float64)
                   for j in range(dataset.n_genes)]
        return cls(
            n_controls=dataset.n_controls,
            n_cases=dataset.n_cases,
            M=M,
            loci_per_gene=dataset.loci_per_gene,
            dosages=dosages,
        )

    def init_single_draw(self, nu1: list[np.ndarray], nu2: list[np.ndarray], seed: int) -> None:
        """All slots of every triplet tied to one base-measure draw."""
        n = self.n_individuals
        self.z = [np.zeros(n, dtype=np.int64) for _ in self.loci_per_gene]
        self.c = [np.zeros((n, self.M), dtype=np.int64) for _ in self.loci_per_gene]
        self.tau = [np.ones(n, dtype=np.int64) for _ in self.loci_per_gene]
        self.occ = []
        self.pstar = []
        for j, lj in enumerate(self.loci_per_gene):
            occ = np.zeros((n, self.M), dtype=np.int64)
            occ[:, 0] = self.M
            self.occ.append(occ)
            ps = np.zeros((n, self.M, lj))
            for (i, k) in self._individuals():
                row = self.global_index(i, k)
                key = _kernels.derive_key(seed, _kernels.TAG_INIT, 0, k, j, i)
                _kernels.draw_base_vector(nu1[j][row], nu2[j][row], key, ps[row, 0])
            self.pstar.append(ps)
        self.refresh_stats()

    def refresh_stats(self) -> None:
        """Recompute the G0 sufficient statistics from the current state."""
        n = self.n_individuals
        self.s1 = [np.zeros((n, lj)) for lj in self.loci_per_gene]
        self.s2 = [np.zeros((n, lj)) for lj in self.loci_per_gene]
        for j in range(self.n_genes):
            for row in range(n):
                p = self.pstar[j][row, : self.tau[j][row]]
                self.s1[j][row] = np.log(p).sum(axis=0)
                self.s2[j][row] = np.log1p(-p).sum(axis=0)

    def _individuals(self):
        for i in range(self.n_controls):
            yield i, 0
        for i in range(self.n_cases):
            yield i, 1

    def global_index(self, i: int, k: int) -> int:
        return i if k == 0 else self.n_controls + i

    def sweep_chunk(self, chunk, nu1, nu2, alpha: float, iteration: int, seed: int) -> None:
        """Run one Gibbs cycle for every triplet in the chunk."""
        by_gene: dict[int, list[int]] = {}
        for (i, j, k) in chunk:
            by_gene.setdefault(j, []).append(self.global_index(i, k))
        for j, rows in by_gene.items():
            _kernels.sweep_gene_rows(
                self.dosages[j], nu1[j], nu2[j], alpha,
                self.z[j], self.c[j], self.pstar[j], self.occ[j], self.tau[j],
                np.asarray(rows, dtype=np.int64), self.n_controls, j,
                iteration, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF),
                self.s1[j], self.s2[j],
            )

    def sweep(self, chunks, nu1, nu2, alpha: float, iteration: int, seed: int,
              pool: ThreadPoolExecutor | None = None) -> None:
        if pool is None or len(chunks) == 1:
            for chunk in chunks:
                self.sweep_chunk(chunk, nu1, nu2, alpha, iteration, seed)
        else:
            futures = [
                pool.submit(self.sweep_chunk, chunk, nu1, nu2, alpha, iteration, seed)
                for chunk in chunks
            ]
            for fut in futures:
                fut.result()

    def redraw_records(self, iteration: int, seed: int) -> None:
        """Replace every genotype record by a draw from its allocated component."""
        for j in range(self.n_genes):
            for (i, k) in self._individuals():
                n = self.global_index(i, k)
                key = _kernels.derive_key(seed, _kernels.TAG_REDRAW, iteration, k, j, i)
                _kernels.redraw_record(
                    int(self.z[j][n]), self.c[j][n], self.pstar[j][n], key,
                    self.dosages[j][n],
                )

    def g0_stats(self) -> G0Stats:
        """Views of the maintained sufficient statistics."""
        return G0Stats(log_p=tuple(self.s1), log_q=tuple(self.s2), tau=tuple(self.tau))

    def to_mixture_states(self) -> list[MixtureState]:
        states = []
        for j in range(self.n_genes):
            for (i, k) in self._individuals():
                n = self.global_index(i, k)
                states.append(MixtureState(
                    triplet=(i, j, k), M=self.M, z=int(self.z[j][n]),
                    c=self.c[j][n].copy(), pstar=self.pstar[j][n].copy(),
                    tau=int(self.tau[j][n]),
                    occupancy=self.occ[j][n].copy(),
                ))
        return states


# ---------------------------------------------------------------------------
# trace persistence


@dataclass(frozen=True)
class Snapshot:
    """One retained iteration, self-consistent."""

    iteration: int
    tau: np.ndarray                     # (T,) per triplet in trace order
    c: tuple[np.ndarray, ...]           # (M,) labels per triplet
    pstar: tuple[np.ndarray, ...]       # (tau_t, L_j) per triplet
    a_matrix: np.ndarray
    mu: np.ndarray
    beta: np.ndarray
    b: float
    phi: float


def triplet_order(n_controls: int, n_cases: int, n_genes: int):
    """Trace order of triplets: (k, i, j) lexicographic, controls first."""
    order = []
    for k, n_k in ((0, n_controls), (1, n_cases)):
        for i in range(n_k):
            for j in range(n_genes):
                order.append((i, j, k))
    return order


class TraceStore:
    """Append-only snapshot log with a self-describing header."""

    def __init__(self, path, header: dict, mode: str):
        self.path = os.fspath(path)
        self.header = header
        self._mode = mode
        self._fh = None
        self.n_records = 0
        dims = header["dims"]
        self._order = triplet_order(dims["n_controls"], dims["n_cases"], dims["n_genes"])

    # -- writing ---------------------------------------------------------

    @classmethod
    def create(cls, path, header: dict) -> "TraceStore":
        store = cls(path, header, mode="w")
        payload = json.dumps(header, sort_keys=True).encode("utf-8")
        store._fh = open(path, "wb")
        store._fh.write(_MAGIC)
        store._fh.write(struct.pack("<Q", len(payload)))
        store._fh.write(payload)
        store._fh.flush()
        return store

    @classmethod
    def append_to(cls, path, header: dict, n_records: int, offset: int) -> "TraceStore":
        store = cls(path, header, mode="w")
        fh = open(path, "r+b")
        fh.truncate(offset)
        fh.seek(offset)
        store._fh = fh
        store.n_records = n_records
        return store

    def append(self, block: MixtureBlock, state: InteractionState, iteration: int) -> None:
        parts = [struct.pack("<q", iteration)]
        for (i, j, k) in self._order:
            n = block.global_index(i, k)
            tau = int(block.tau[j][n])
            parts.append(struct.pack("<i", tau))
            parts.append(block.c[j][n].astype("<i4").tobytes())
            parts.append(block.pstar[j][n, :tau].astype("<f8").tobytes())
        parts.append(state.a_matrix.astype("<f8").tobytes())
        parts.append(state.mu.astype("<f8").tobytes())
        parts.append(state.beta.astype("<f8").tobytes())
        parts.append(struct.pack("<dd", state.b, state.phi))
        payload = b"".join(parts)
        self._fh.write(struct.pack("<Q", len(payload)))
        self._fh.write(payload)
        self.n_records += 1

    def flush(self) -> int:
        self._fh.flush()
        return self._fh.tell()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # -- reading ---------------------------------------------------------

    @classmethod
    def open(cls, path) -> "TraceStore":
        with open(path, "rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise EngineError(f"{path}: not a genemix trace file")
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen).decode("utf-8"))
            count = 0
            while True:
                raw = fh.read(8)
                if len(raw) < 8:
                    break
                (plen,) = struct.unpack("<Q", raw)
                start = fh.tell()
                fh.seek(plen, 1)
                if fh.tell() - start < plen:
                    break
                count += 1
        store = cls(path, header, mode="r")
        store.n_records = count
        return store

    @property
    def triplets(self):
        return list(self._order)

    def iter_snapshots(self):
        dims = self.header["dims"]
        J = dims["n_genes"]
        D = dims["env_dim"]
        M = self.header["chain"]["M"]
        loci = dims["loci_per_gene"]
        with open(self.path, "rb") as fh:
            fh.seek(len(_MAGIC))
            (hlen,) = struct.unpack("<Q", fh.read(8))
            fh.seek(len(_MAGIC) + 8 + hlen)
            while True:
                raw = fh.read(8)
                if len(raw) < 8:
                    return
                (plen,) = struct.unpack("<Q", raw)
                payload = fh.read(plen)
                if len(payload) < plen:
                    return  # truncated trailing record
                yield self._decode(payload, J, D, M, loci)

    def _decode(self, payload: bytes, J: int, D: int, M: int, loci) -> Snapshot:
        off = 0
        (iteration,) = struct.unpack_from("<q", payload, off)
        off += 8
        taus = np.empty(len(self._order), dtype=np.int64)
        cs, ps = [], []
        for t, (i, j, k) in enumerate(self._order):
            (tau,) = struct.unpack_from("<i", payload, off)
            off += 4
            c = np.frombuffer(payload, dtype="<i4", count=M, offset=off).astype(np.int64)
            off += 4 * M
            lj = loci[j]
            p = np.frombuffer(payload, dtype="<f8", count=tau * lj, offset=off)
            off += 8 * tau * lj
            taus[t] = tau
            cs.append(c)
            ps.append(p.reshape(tau, lj))
        a = np.frombuffer(payload, dtype="<f8", count=J * J, offset=off).reshape(J, J)
        off += 8 * J * J
        mu = np.frombuffer(payload, dtype="<f8", count=2 * J, offset=off).reshape(J, 2)
        off += 16 * J
        beta = np.frombuffer(payload, dtype="<f8", count=2 * D * J, offset=off).reshape(D, J, 2)
        off += 16 * D * J
        b, phi = struct.unpack_from("<dd", payload, off)
        return Snapshot(iteration=int(iteration), tau=taus, c=tuple(cs), pstar=tuple(ps),
                        a_matrix=a, mu=mu, beta=beta, b=float(b), phi=float(phi))

    def load_all(self) -> list[Snapshot]:
        return list(self.iter_snapshots())


def make_header(dataset: GenotypeDataset, env: EnvCovariates, cfg: ChainConfig) -> dict:
    """Trace header; excludes the worker count so traces are
    scheduling-independent at the byte level."""
    return {
        "format": 1,
        "seed": cfg.seed,
        "dims": {
            "n_controls": dataset.n_controls,
            "n_cases": dataset.n_cases,
            "n_genes": dataset.n_genes,
            "loci_per_gene": list(dataset.loci_per_gene),
            "env_dim": env.dim,
            "gene_names": list(dataset.gene_names),
        },
        "chain": {
            "M": cfg.M,
            "alpha": cfg.alpha,
            "iterations": cfg.iterations,
            "burn_in": cfg.burn_in,
            "thinning": cfg.thinning,
            "base_scale": cfg.base_scale,
            "move_mix": cfg.move_mix,
            "mult_prob": cfg.mult_prob,
            "block_mode": cfg.block_mode,
            "adapt_interval": cfg.adapt_interval,
            "target_acceptance": list(cfg.target_acceptance),
        },
    }


# ---------------------------------------------------------------------------
# the chain


@dataclass(frozen=True)
class _BlockGroup:
    name: str
    indices: np.ndarray
    scales: np.ndarray
    positive: np.ndarray
    move_mix: float
    mult_prob: float


def _block_groups(layout: StateLayout, cfg: ChainConfig) -> list[_BlockGroup]:
    """Sub-blocks for the sequential TMCMC steps.

    Positive coordinates carry zero additive scale (multiplicative branch
    only); a sub-block made solely of positive coordinates always takes
    the additive-multiplicative move.
    """
    s = layout.slices

    def span(*names):
        return np.concatenate([np.arange(s[n].start, s[n].stop) for n in names])

    if cfg.block_mode == "single":
        defs = [("block", span(*s.keys()))]
    else:
        defs = [
            ("lam", span("lam")),
            ("sigma", span("sigma_chol")),
            ("gene_factors", span("a_chol", "c_alpha", "d_alpha", "c_beta", "d_beta")),
            ("effects", span("mu", "beta")),
            ("locus", span("u", "v")),
            ("scales", span("b", "phi")),
        ]
    groups = []
    for name, indices in defs:
        positive = layout.positive_mask[indices]
        scales = np.where(positive, 0.0, cfg.base_scale)
        all_positive = bool(positive.all())
        groups.append(_BlockGroup(
            name=name,
            indices=indices,
            scales=scales,
            positive=positive,
            move_mix=0.0 if all_positive else cfg.move_mix,
            mult_prob=0.5 if all_positive else cfg.mult_prob,
        ))
    return groups


def _checkpoint_path(trace_path) -> str:
    return os.fspath(trace_path) + ".ckpt.npz"


def _write_checkpoint(path, block: MixtureBlock, theta: np.ndarray, iteration: int,
                      n_records: int, offset: int, log_scales: np.ndarray,
                      window_accepts: np.ndarray, window_steps: np.ndarray,
                      header_json: str) -> None:
    arrays = {
        "theta": theta,
        "iteration": np.int64(iteration),
        "n_records": np.int64(n_records),
        "offset": np.int64(offset),
        "log_scales": log_scales,
        "window_accepts": window_accepts,
        "window_steps": window_steps,
        "header": np.frombuffer(header_json.encode("utf-8"), dtype=np.uint8),
    }
    for j in range(block.n_genes):
        arrays[f"z_{j}"] = block.z[j]
        arrays[f"c_{j}"] = block.c[j]
        arrays[f"pstar_{j}"] = block.pstar[j]
        arrays[f"occ_{j}"] = block.occ[j]
        arrays[f"tau_{j}"] = block.tau[j]
        arrays[f"dosage_{j}"] = block.dosages[j]
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def run_chain(dataset: GenotypeDataset, env: EnvCovariates, cfg: ChainConfig,
              trace_path, resume: bool = False, stop_after: int | None = None) -> TraceStore:
    """Run (or resume) the full sampler, returning the finished trace.

    ``stop_after`` stops the loop cleanly after that iteration with a
    checkpoint on disk, emulating an interrupted run; resuming then
    reproduces the uninterrupted trace byte for byte.
    """
    if env.n_individuals != dataset.n_individuals:
        raise EngineError(
            f"dimension mismatch: genotype file has {dataset.n_individuals} "
            f"individuals, environment file has {env.n_individuals}"
        )
    J = dataset.n_genes
    N = dataset.n_individuals
    D = env.dim
    L = max(dataset.loci_per_gene)
    n0 = dataset.n_controls
    loci = dataset.loci_per_gene
    layout = StateLayout(J, N, D, L)
    header = make_header(dataset, env, cfg)
    header_json = json.dumps(header, sort_keys=True)
    ckpt_path = _checkpoint_path(trace_path)

    block = MixtureBlock.from_dataset(dataset, cfg.M)
    groups = _block_groups(layout, cfg)
    n_groups = len(groups)
    target_mid = 0.5 * (cfg.target_acceptance[0] + cfg.target_acceptance[1])

    if resume:
        if not os.path.exists(ckpt_path):
            raise EngineError(f"no checkpoint found at {ckpt_path}")
        with np.load(ckpt_path) as ck:
            stored = bytes(ck["header"].tobytes()).decode("utf-8")
            if stored != header_json:
                raise EngineError("checkpoint configuration does not match this run")
            theta = ck["theta"].copy()
            start = int(ck["iteration"])
            n_records = int(ck["n_records"])
            offset = int(ck["offset"])
            log_scales = ck["log_scales"].copy()
            window_accepts = ck["window_accepts"].copy()
            window_steps = ck["window_steps"].copy()
            block.z = [ck[f"z_{j}"].copy() for j in range(J)]
            block.c = [ck[f"c_{j}"].copy() for j in range(J)]
            block.pstar = [ck[f"pstar_{j}"].copy() for j in range(J)]
            block.occ = [ck[f"occ_{j}"].copy() for j in range(J)]
            block.tau = [ck[f"tau_{j}"].copy() for j in range(J)]
            block.dosages = [ck[f"dosage_{j}"].copy() for j in range(J)]
        block.refresh_stats()
        writer = TraceStore.append_to(trace_path, header, n_records, offset)
        state = layout.unpack(theta)
    else:
        state = initial_state(J, N, D, L)
        theta = layout.pack(state)
        nu1, nu2 = _link_shapes(state, env, n0, loci)
        block.init_single_draw(nu1, nu2, cfg.seed)
        start = 0
        log_scales = np.zeros(n_groups)
        window_accepts = np.zeros(n_groups, dtype=np.int64)
        window_steps = np.zeros(n_groups, dtype=np.int64)
        writer = TraceStore.create(trace_path, header)

    kernel_cache: dict[float, np.ndarray] = {}

    def kernel_for(b: float) -> np.ndarray:
        if b not in kernel_cache:
            kernel_cache.clear()
            kernel_cache[b] = compute_kernel(env, b)
        return kernel_cache[b]

    def target(th: np.ndarray) -> float:
        st = layout.unpack(th)
        if st.b <= 0 or st.phi < 0:
            return -np.inf
        return log_joint_stats(st, env, stats, n0, loci, kernel=kernel_for(st.b))

    stats = block.g0_stats()
    current = target(theta)
    if not np.isfinite(current):
        raise EngineError("non-finite joint density at initialization")

    chunks = [c for c in partition_triplets(n0, dataset.n_cases, J, cfg.workers) if c]
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for t in range(start + 1, cfg.iterations + 1):
            state = layout.unpack(theta)
            nu1, nu2 = _link_shapes(state, env, n0, loci)
            block.sweep(chunks, nu1, nu2, cfg.alpha, t, cfg.seed, pool)
            stats = block.g0_stats()
            current = target(theta)

            for g, grp in enumerate(groups):
                move_cfg = TmcmcConfig(
                    scales=grp.scales * np.exp(log_scales[g]),
                    move_mix=grp.move_mix,
                    positive_mask=grp.positive,
                    mult_prob=grp.mult_prob,
                )
                rng = np.random.Generator(np.random.Philox(
                    np.random.SeedSequence((cfg.seed, 0x746D63, t, g))))

                def sub_target(sub, idx=grp.indices):
                    trial = theta.copy()
                    trial[idx] = sub
                    return target(trial)

                sub, accepted, current = mh_step(
                    theta[grp.indices], sub_target, move_cfg, rng, current=current)
                if accepted:
                    theta[grp.indices] = sub
                window_steps[g] += 1
                window_accepts[g] += int(accepted)
                if t <= cfg.burn_in and window_steps[g] >= cfg.adapt_interval:
                    rate = window_accepts[g] / window_steps[g]
                    log_scales[g] += 0.5 * (rate - target_mid)
                    window_accepts[g] = 0
                    window_steps[g] = 0

            if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thinning == 0:
                writer.append(block, layout.unpack(theta), t)

            final = t == cfg.iterations or t == stop_after
            if final or (cfg.checkpoint_every and t % cfg.checkpoint_every == 0):
                offset = writer.flush()
                _write_checkpoint(ckpt_path, block, theta, t, writer.n_records, offset,
                                  log_scales, window_accepts, window_steps, header_json)
            if t == stop_after:
                break
    finally:
        if pool is not None:
            pool.shutdown()
        writer.close()
    return TraceStore.open(trace_path)


def _link_shapes(state: InteractionState, env: EnvCovariates, n_controls: int,
                 loci_per_gene) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-gene (N, L_j) Beta shape arrays from the current interaction state."""
    base = _link_exponent_base(state, env, n_controls)
    nu1 = [np.exp(state.u[:lj][None, :] + base[j][:, None])
           for j, lj in enumerate(loci_per_gene)]
    nu2 = [np.exp(state.v[:lj][None, :] + base[j][:, None])
           for j, lj in enumerate(loci_per_gene)]
    return nu1, nu2


# ---------------------------------------------------------------------------
# summaries


def mc_standard_error(x: np.ndarray) -> float:
    """Batch-means Monte Carlo standard error of the mean."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 2:
        return 0.0
    n_batches = max(2, int(np.sqrt(n)))
    batch = n // n_batches
    if batch < 1:
        return float(np.std(x, ddof=1) / np.sqrt(n))
    means = x[: n_batches * batch].reshape(n_batches, batch).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))


@dataclass(frozen=True)
class StatSummary:
    mean: float
    median: float
    se: float


@dataclass(frozen=True)
class TraceSummary:
    scalars: dict[str, StatSummary]
    tau_hist: dict[str, np.ndarray]
    tau_mode: int

    def to_text(self) -> str:
        lines = ["statistic,mean,median,mc_se"]
        for name, s in self.scalars.items():
            lines.append(f"{name},{s.mean:.6g},{s.median:.6g},{s.se:.6g}")
        lines.append(f"pooled tau mode,{self.tau_mode}")
        return "\n".join(lines) + "\n"


def summarize_trace(trace: TraceStore) -> TraceSummary:
    """Means, medians, MC standard errors, and distinct-count histograms."""
    dims = trace.header["dims"]
    M = trace.header["chain"]["M"]
    J = dims["n_genes"]
    names = dims["gene_names"]
    order = trace.triplets

    series: dict[str, list[float]] = {"phi": [], "b": []}
    for a in range(J):
        for bidx in range(a + 1, J):
            series[f"A[{names[a]},{names[bidx]}]"] = []
    tau_counts = {f"{names[j]},k={k}": np.zeros(M, dtype=np.int64)
                  for j in range(J) for k in (0, 1)}
    pooled = np.zeros(M, dtype=np.int64)
    n_snapshots = 0
    for snap in trace.iter_snapshots():
        n_snapshots += 1
        series["phi"].append(snap.phi)
        series["b"].append(snap.b)
        for a in range(J):
            for bidx in range(a + 1, J):
                series[f"A[{names[a]},{names[bidx]}]"].append(snap.a_matrix[a, bidx])
        for t, (i, j, k) in enumerate(order):
            tau = int(snap.tau[t])
            tau_counts[f"{names[j]},k={k}"][tau - 1] += 1
            pooled[tau - 1] += 1
    if n_snapshots == 0:
        raise EngineError("empty trace")

    scalars = {}
    for name, values in series.items():
        arr = np.asarray(values)
        scalars[name] = StatSummary(
            mean=float(arr.mean()), median=float(np.median(arr)), se=mc_standard_error(arr)
        )
    tau_hist = {name: counts / counts.sum() for name, counts in tau_counts.items()}
    return TraceSummary(
        scalars=scalars,
        tau_hist=tau_hist,
        tau_mode=int(np.argmax(pooled)) + 1,
    )
