"""Matrix-factorization task: target spectrum, gradients, training loop."""

import numpy as np
import pytest

from muon_lab.matfac import (
    FactorizationConfig,
    build_target,
    init_factors,
    loss_and_grads,
    product_singular_values,
    run_factorization,
    sample_batch,
    survival_probs,
    write_trace_csv,
)
from muon_lab.optim import LrSchedule, MuonState, muon_step
from muon_lab.rng import make_stream
from muon_lab.spectral import effective_rank


def tiny_cfg(**kw):
    base = dict(d=16, rank_capacity=4, kappa=100.0, batch=8, steps=5, seed=0)
    base.update(kw)
    return FactorizationConfig(**base)


class TestConfig:
    def test_defaults(self):
        cfg = FactorizationConfig()
        assert cfg.d == 512
        assert cfg.rank_capacity == 64
        assert cfg.active_rank == 2

    def test_resolved_schedule_is_full_cosine(self):
        sched = tiny_cfg(steps=100).resolved_schedule()
        assert sched.kind == "cosine-tail"
        assert sched.hold_fraction == 0.0
        assert sched.floor_fraction == 0.0
        assert sched.total_steps == 100

    def test_explicit_schedule_wins(self):
        sched = LrSchedule("constant", total_steps=5)
        assert tiny_cfg(schedule=sched).resolved_schedule() is sched

    @pytest.mark.parametrize(
        "kw",
        [
            dict(d=1),
            dict(active_rank=0),
            dict(active_rank=5),  # exceeds rank_capacity=4
            dict(rank_capacity=32),  # exceeds d=16
            dict(kappa=0.5),
            dict(batch=0),
            dict(steps=-1),
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            tiny_cfg(**kw)


class TestTarget:
    def test_spectrum_endpoints_and_condition(self):
        rng = make_stream(0, "t")
        w = build_target(32, 1e4, 10.0, rng)
        sv = np.linalg.svd(w, compute_uv=False)
        assert sv[0] == pytest.approx(10.0, rel=1e-10)
        assert sv[-1] == pytest.approx(10.0 / 1e4, rel=1e-10)
        assert sv[0] / sv[-1] == pytest.approx(1e4, rel=1e-10)

    def test_geometric_decay(self):
        rng = make_stream(1, "t")
        sv = np.linalg.svd(build_target(16, 100.0, 10.0, rng), compute_uv=False)
        ratios = sv[:-1] / sv[1:]
        assert np.allclose(ratios, ratios[0], rtol=1e-8)

    def test_unit_condition_number_is_orthogonal_scaled(self):
        rng = make_stream(2, "t")
        w = build_target(8, 1.0, 3.0, rng)
        assert np.allclose(w @ w.T, 9.0 * np.eye(8), atol=1e-10)


class TestInitFactors:
    def test_column_scales(self):
        cfg = FactorizationConfig(
            d=2000, rank_capacity=8, active_rank=2,
            active_var=1e-4, dormant_var=1e-12, steps=0,
        )
        a, _ = init_factors(cfg, make_stream(0, "i"))
        col_var = (a**2).mean(axis=0)
        assert np.allclose(col_var[:2], 1e-4, rtol=0.2)
        assert np.allclose(col_var[2:], 1e-12, rtol=0.2)

    def test_product_effective_rank_near_active_rank(self):
        cfg = FactorizationConfig(d=256, rank_capacity=16, active_rank=2, steps=0)
        a, b = init_factors(cfg, make_stream(1, "i"))
        erank = effective_rank(a @ b.T)
        assert erank == pytest.approx(2.0, abs=0.5)


class TestSampleBatch:
    def test_targets_consistent(self):
        cfg = tiny_cfg()
        w_star = build_target(cfg.d, cfg.kappa, cfg.sigma_max, make_stream(0, "s"))
        x, y = sample_batch(cfg, w_star, make_stream(1, "s"))
        assert np.array_equal(y, x @ w_star.T)
        assert x.shape == (8, 16)

    def test_no_mask_when_decay_zero(self):
        cfg = tiny_cfg(mask_decay=0.0)
        assert np.allclose(survival_probs(cfg), 1.0)
        w_star = np.eye(cfg.d)
        x, _ = sample_batch(cfg, w_star, make_stream(2, "s"))
        assert np.all(x != 0.0)  # Gaussian draws survive untouched

    def test_survival_fractions_decay(self):
        cfg = FactorizationConfig(d=64, rank_capacity=4, mask_decay=0.05, batch=64)
        w_star = np.eye(64)
        rng = make_stream(3, "s")
        hits = np.zeros(64)
        n = 200
        for _ in range(n):
            x, _ = sample_batch(cfg, w_star, rng)
            hits += (x != 0).mean(axis=0)
        frac = hits / n
        expected = survival_probs(cfg)
        assert np.all(np.abs(frac - expected) < 0.02)


class TestLossAndGrads:
    def test_zero_factors_loss(self):
        cfg = tiny_cfg()
        w_star = build_target(cfg.d, cfg.kappa, cfg.sigma_max, make_stream(0, "l"))
        x, y = sample_batch(cfg, w_star, make_stream(1, "l"))
        a = np.zeros((cfg.d, cfg.rank_capacity))
        b = np.zeros((cfg.d, cfg.rank_capacity))
        loss, ga, gb = loss_and_grads(a, b, x, y)
        assert loss == pytest.approx(float(np.sum(y * y)) / (2 * cfg.batch))
        assert np.array_equal(ga, np.zeros_like(a))
        assert np.array_equal(gb, np.zeros_like(b))

    def test_perfect_factorization_zero_loss(self):
        # full-capacity factors reproducing W* give exactly zero residual
        rng = make_stream(2, "l")
        d = 8
        w_star = build_target(d, 10.0, 2.0, rng)
        u, s, vt = np.linalg.svd(w_star)
        a = u * np.sqrt(s)
        b = vt.T * np.sqrt(s)
        x = rng.standard_normal((5, d))
        y = x @ w_star.T
        loss, ga, gb = loss_and_grads(a, b, x, y)
        assert loss == pytest.approx(0.0, abs=1e-20)
        assert np.allclose(ga, 0.0, atol=1e-12)
        assert np.allclose(gb, 0.0, atol=1e-12)

    def test_matches_central_finite_differences(self):
        cfg = tiny_cfg()
        rng = make_stream(4, "l")
        w_star = build_target(cfg.d, cfg.kappa, cfg.sigma_max, rng)
        a, b = init_factors(cfg, rng)
        a = a + 0.1 * rng.standard_normal(a.shape)
        b = b + 0.1 * rng.standard_normal(b.shape)
        x, y = sample_batch(cfg, w_star, rng)
        _, ga, gb = loss_and_grads(a, b, x, y)
        h = 1e-6
        for _ in range(20):
            da = rng.standard_normal(a.shape)
            da /= np.linalg.norm(da)
            db = rng.standard_normal(b.shape)
            db /= np.linalg.norm(db)
            fd_a = (
                loss_and_grads(a + h * da, b, x, y)[0]
                - loss_and_grads(a - h * da, b, x, y)[0]
            ) / (2 * h)
            fd_b = (
                loss_and_grads(a, b + h * db, x, y)[0]
                - loss_and_grads(a, b - h * db, x, y)[0]
            ) / (2 * h)
            assert abs(fd_a - float(np.sum(ga * da))) <= 1e-6 * max(1.0, abs(fd_a))
            assert abs(fd_b - float(np.sum(gb * db))) <= 1e-6 * max(1.0, abs(fd_b))


class TestProductSpectrum:
    def test_matches_dense_svd(self):
        rng = make_stream(0, "p")
        a = rng.standard_normal((20, 5))
        b = rng.standard_normal((20, 5))
        sv = product_singular_values(a, b)
        dense = np.linalg.svd(a @ b.T, compute_uv=False)[:5]
        assert np.allclose(sv, dense, atol=1e-10)


class TestRunFactorization:
    def test_zero_steps_records_initial_point(self):
        trace = run_factorization(tiny_cfg(steps=0))
        assert trace.steps == [0]
        assert len(trace.losses) == 1
        assert not trace.diverged

    def test_trace_alignment_and_final_step(self):
        trace = run_factorization(tiny_cfg(steps=25), record_every=10)
        assert trace.steps == [0, 10, 20, 25]
        assert len(trace.losses) == len(trace.effective_ranks) == 4

    def test_deterministic(self):
        a = run_factorization(tiny_cfg(steps=10), optimizer="adamw")
        b = run_factorization(tiny_cfg(steps=10), optimizer="adamw")
        assert a.losses == b.losses
        assert a.effective_ranks == b.effective_ranks

    def test_divergence_flagged(self):
        # an absurd learning rate blows the iterates up immediately
        trace = run_factorization(
            tiny_cfg(steps=200), optimizer="adamw", hyper={"eta": 1e6}
        )
        assert trace.diverged
        assert trace.steps[-1] < 200

    def test_muon_update_direction_invariant_to_active_scale(self):
        # at initialization the residual is dominated by the target, so
        # doubling active_var rescales the gradient without rotating the
        # Frobenius-normalized Muon update
        updates = []
        for var in (1e-4, 2e-4):
            cfg = tiny_cfg(d=32, rank_capacity=8, active_var=var)
            rng = make_stream(0, "dir")
            w_star = build_target(cfg.d, cfg.kappa, cfg.sigma_max, rng)
            a, b = init_factors(cfg, rng)
            x, y = sample_batch(cfg, w_star, rng)
            _, ga, _ = loss_and_grads(a, b, x, y)
            s = MuonState.fresh(a.shape, eta=0.01, mu=0.95)
            w_new, _ = muon_step(np.zeros(a.shape), ga, s)
            updates.append(w_new / np.linalg.norm(w_new))
        cosine = float(np.sum(updates[0] * updates[1]))
        assert cosine > 0.99

    def test_rank_at_lookup(self):
        trace = run_factorization(tiny_cfg(steps=20), record_every=5)
        assert trace.rank_at(0) == trace.effective_ranks[0]
        assert trace.rank_at(12) == trace.effective_ranks[2]
        assert trace.rank_at(10_000) == trace.effective_ranks[-1]

    def test_unknown_optimizer(self):
        with pytest.raises(ValueError):
            run_factorization(tiny_cfg(), optimizer="sgd")

    def test_invalid_record_every(self):
        with pytest.raises(ValueError):
            run_factorization(tiny_cfg(), record_every=0)


class TestTraceCsv:
    def test_layout(self, tmp_path):
        trace = run_factorization(tiny_cfg(steps=4), record_every=2)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "step,loss,effective_rank,sigma1"
        assert len(lines) == 1 + len(trace.steps)
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[1]) == trace.losses[0]
