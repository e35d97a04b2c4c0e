import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genemix.data import Dimensions, NullModelHyper, generate_null_dataset
from genemix.engine import (
    ChainConfig,
    EngineError,
    MixtureBlock,
    TraceStore,
    make_header,
    mc_standard_error,
    partition_triplets,
    run_chain,
    summarize_trace,
    triplet_order,
)
from genemix.interaction import initial_state


def tiny_dataset(seed=1, n0=5, n1=5, loci=(3, 3), M=5):
    dims = Dimensions(n_controls=n0, n_cases=n1, loci_per_gene=loci)
    return generate_null_dataset(dims, NullModelHyper(M=M, alpha=1.5), seed=seed)


def tiny_config(**overrides):
    base = dict(M=5, alpha=1.5, iterations=240, burn_in=120, thinning=1,
                workers=1, seed=33, checkpoint_every=60)
    base.update(overrides)
    return ChainConfig(**base)


class TestPartitionTriplets:
    def test_single_worker_gets_everything(self):
        parts = partition_triplets(3, 2, 2, 1)
        assert len(parts) == 1
        assert len(parts[0]) == (3 + 2) * 2

    def test_one_triplet_per_worker(self):
        parts = partition_triplets(2, 2, 2, 4)
        assert [len(p) for p in parts] == [2, 2, 2, 2]
        for p in parts:
            ks = [k for (_, _, k) in p]
            assert ks == [0, 1]  # a control chunk then a case chunk

    @settings(max_examples=40, deadline=None)
    @given(n0=st.integers(1, 8), n1=st.integers(1, 8),
           j=st.integers(1, 4), w=st.integers(1, 6))
    def test_partition_is_disjoint_and_exhaustive(self, n0, n1, j, w):
        parts = partition_triplets(n0, n1, j, w)
        assert len(parts) == w
        flat = [t for p in parts for t in p]
        assert len(flat) == len(set(flat)) == (n0 + n1) * j
        expected = {(i, g, k) for k, nk in ((0, n0), (1, n1))
                    for i in range(nk) for g in range(j)}
        assert set(flat) == expected

    def test_controls_precede_cases_contiguously(self):
        parts = partition_triplets(4, 4, 1, 2)
        assert parts[0] == [(0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1)]
        assert parts[1] == [(2, 0, 0), (3, 0, 0), (2, 0, 1), (3, 0, 1)]


class TestRunChain:
    def test_snapshot_count_one_past_burn_in(self, tmp_path):
        ds, env, _ = tiny_dataset()
        cfg = tiny_config(iterations=121, burn_in=120, thinning=1)
        trace = run_chain(ds, env, cfg, tmp_path / "t.bin")
        assert trace.n_records == 1

    def test_snapshot_arithmetic_with_thinning(self, tmp_path):
        ds, env, _ = tiny_dataset()
        cfg = tiny_config(iterations=220, burn_in=100, thinning=7)
        trace = run_chain(ds, env, cfg, tmp_path / "t.bin")
        assert trace.n_records == (220 - 100) // 7
        iters = [s.iteration for s in trace.iter_snapshots()]
        assert iters == list(range(107, 221, 7))

    def test_worker_invariance_bytes(self, tmp_path):
        ds, env, _ = tiny_dataset()
        blobs = []
        for w in (1, 2, 4):
            cfg = tiny_config(workers=w)
            run_chain(ds, env, cfg, tmp_path / f"t{w}.bin")
            blobs.append((tmp_path / f"t{w}.bin").read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]

    def test_resume_reproduces_uninterrupted_bytes(self, tmp_path):
        ds, env, _ = tiny_dataset()
        cfg = tiny_config()
        run_chain(ds, env, cfg, tmp_path / "full.bin")
        run_chain(ds, env, cfg, tmp_path / "part.bin", stop_after=173)
        run_chain(ds, env, cfg, tmp_path / "part.bin", resume=True)
        assert (tmp_path / "full.bin").read_bytes() == (tmp_path / "part.bin").read_bytes()

    def test_resume_rejects_mismatched_config(self, tmp_path):
        ds, env, _ = tiny_dataset()
        run_chain(ds, env, tiny_config(), tmp_path / "t.bin", stop_after=130)
        with pytest.raises(EngineError, match="configuration"):
            run_chain(ds, env, tiny_config(seed=99), tmp_path / "t.bin", resume=True)

    def test_dimension_mismatch_rejected(self, tmp_path):
        ds, env, _ = tiny_dataset()
        ds_small = dataclasses.replace(
            ds, n_cases=ds.n_cases - 1,
            alleles=tuple(a[:-1] for a in ds.alleles),
            locus_names=(),
        )
        with pytest.raises(EngineError, match="dimension mismatch"):
            run_chain(ds_small, env, tiny_config(), tmp_path / "t.bin")

    def test_header_echoes_config_without_workers(self, tmp_path):
        ds, env, _ = tiny_dataset()
        cfg = tiny_config(workers=3)
        trace = run_chain(ds, env, cfg, tmp_path / "t.bin")
        assert trace.header["seed"] == cfg.seed
        assert trace.header["chain"]["M"] == cfg.M
        assert trace.header["chain"]["iterations"] == cfg.iterations
        assert "workers" not in json.dumps(trace.header)

    def test_tau_mode_below_maximum_on_null_data(self, tmp_path):
        ds, env, _ = tiny_dataset(M=8)
        cfg = tiny_config(M=8, iterations=600, burn_in=200)
        trace = run_chain(ds, env, cfg, tmp_path / "t.bin")
        summary = summarize_trace(trace)
        assert summary.tau_mode < 8


class TestTraceStore:
    def test_round_trip_of_snapshots(self, tmp_path):
        ds, env, _ = tiny_dataset()
        cfg = tiny_config()
        trace = run_chain(ds, env, cfg, tmp_path / "t.bin")
        snaps = trace.load_all()
        assert len(snaps) == trace.n_records
        order = triplet_order(ds.n_controls, ds.n_cases, ds.n_genes)
        assert trace.triplets == order
        for snap in snaps[:5]:
            for t, (i, j, k) in enumerate(order):
                tau = snap.tau[t]
                assert 1 <= tau <= cfg.M
                assert snap.c[t].shape == (cfg.M,)
                assert snap.c[t].max() == tau - 1
                assert snap.pstar[t].shape == (tau, ds.loci_per_gene[j])
            assert snap.a_matrix.shape == (2, 2)
            assert np.isfinite(snap.b) and np.isfinite(snap.phi)

    def test_open_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"not a trace")
        with pytest.raises(EngineError, match="not a genemix trace"):
            TraceStore.open(path)

    def test_manual_writer_reader_cycle(self, tmp_path):
        ds, env, _ = tiny_dataset(n0=2, n1=2, loci=(2,), M=3)
        cfg = ChainConfig(M=3, alpha=1.0, iterations=10, burn_in=5, seed=0)
        header = make_header(ds, env, cfg)
        block = MixtureBlock.from_dataset(ds, 3)
        nu = [np.ones((4, 2))]
        block.init_single_draw(nu, nu, seed=0)
        state = initial_state(1, 4, 1, 2)
        writer = TraceStore.create(tmp_path / "m.bin", header)
        writer.append(block, state, iteration=6)
        writer.append(block, state, iteration=7)
        writer.close()
        back = TraceStore.open(tmp_path / "m.bin")
        assert back.n_records == 2
        snaps = back.load_all()
        assert snaps[0].iteration == 6 and snaps[1].iteration == 7
        assert np.allclose(snaps[0].a_matrix, np.eye(1))


class TestSummaries:
    def test_constant_statistic_has_zero_se(self):
        assert mc_standard_error(np.full(500, 3.25)) == 0.0

    def test_iid_injected_series_mean_within_three_se(self):
        rng = np.random.default_rng(0)
        x = rng.normal(2.0, 1.5, size=20_000)
        se = mc_standard_error(x)
        assert se == pytest.approx(1.5 / np.sqrt(x.size), rel=0.25)
        assert abs(x.mean() - 2.0) < 3 * se

    def test_tau_histograms_sum_to_one(self, tmp_path):
        ds, env, _ = tiny_dataset()
        trace = run_chain(ds, env, tiny_config(), tmp_path / "t.bin")
        summary = summarize_trace(trace)
        for hist in summary.tau_hist.values():
            assert hist.sum() == pytest.approx(1.0)
        assert 1 <= summary.tau_mode <= 5

    def test_empty_trace_rejected(self, tmp_path):
        ds, env, _ = tiny_dataset(n0=2, n1=2, loci=(2,), M=3)
        cfg = ChainConfig(M=3, alpha=1.0, iterations=10, burn_in=5, seed=0)
        writer = TraceStore.create(tmp_path / "e.bin", make_header(ds, env, cfg))
        writer.close()
        with pytest.raises(EngineError, match="empty trace"):
            summarize_trace(TraceStore.open(tmp_path / "e.bin"))


class TestGewekeThroughEngine:
    def test_sweep_with_redraw_matches_prior(self):
        # quick engine-level coherence check; the acceptance suite runs the
        # full-size version
        ds, env, _ = tiny_dataset(seed=5)
        block = MixtureBlock.from_dataset(ds, 5)
        nu1 = [np.ones((10, lj)) for lj in ds.loci_per_gene]
        nu2 = [np.ones((10, lj)) for lj in ds.loci_per_gene]
        block.init_single_draw(nu1, nu2, seed=77)
        chunks = [c for c in partition_triplets(5, 5, 2, 1) if c]
        n_iter = 4000
        taus = np.empty(n_iter)
        for t in range(1, n_iter + 1):
            block.sweep(chunks, nu1, nu2, 1.5, t, 77)
            block.redraw_records(t, 77)
            taus[t - 1] = block.tau[0][0]

        rng = np.random.default_rng(7)
        from genemix.mixture import BetaHyper, MixtureState

        hyper = BetaHyper(nu1=np.ones(3), nu2=np.ones(3))
        marg = np.array([MixtureState.from_prior((0, 0, 0), 5, 1.5, hyper, rng).tau
                         for _ in range(n_iter)])
        se = np.hypot(mc_standard_error(taus), mc_standard_error(marg.astype(float)))
        assert abs(taus.mean() - marg.mean()) < 3 * se
