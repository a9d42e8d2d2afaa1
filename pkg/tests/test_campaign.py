import json
from dataclasses import replace

import numpy as np
import pytest

from specloop.campaign import (
    CampaignConfig,
    CampaignError,
    CandidatePolicy,
    GridSpec,
    StrategySpec,
    TruthSpec,
    build_model,
    run_sequential,
    run_static,
    simulate_measurement,
    update_candidate_set,
)
from specloop.presets import DECONVOLUTION_TRUTH, HAMILTONIAN_TRUTH, preset_config
from specloop.remc import SamplerConfig, beta_ladder


def tiny_sampler(**kw):
    defaults = dict(
        ladder=beta_ladder(4, 1e-2), sweeps_burnin=60, sweeps_sample=80, thin=2
    )
    defaults.update(kw)
    return SamplerConfig(**defaults)


def tiny_deconv_config(seed=0, rounds=2, strategy=None):
    return CampaignConfig(
        grid=GridSpec(start=157.0, step=0.25, count=40),
        t_unit=1.0,
        points_per_round=4,
        rounds=rounds,
        truth=DECONVOLUTION_TRUTH,
        candidate_policy=CandidatePolicy(kind="peaks_sliding"),
        strategy=strategy or StrategySpec(kind="parametric"),
        sampler=tiny_sampler(),
        eval_models=("M2", "M3", "M4"),
        seed=seed,
    )


class TestSimulateMeasurement:
    def test_zero_rate_always_zero(self):
        truth = TruthSpec(
            kind="peaks",
            peak_params=DECONVOLUTION_TRUTH.peak_params,
        )
        zero = replace(
            DECONVOLUTION_TRUTH.peak_params, a=(1e-300, 1e-300, 1e-300), background=0.0
        )
        truth = TruthSpec(kind="peaks", peak_params=zero)
        rng = np.random.default_rng(0)
        assert all(simulate_measurement(truth, 150.0, 1.0, rng) == 0 for _ in range(50))

    def test_poisson_mean(self):
        rng = np.random.default_rng(1)
        # rate 4.0 via a single tall narrow peak at its apex
        from specloop.peaks import PeakParams

        truth = TruthSpec(
            kind="peaks",
            peak_params=PeakParams(a=(4.0,), mu=(0.0,), sigma=(1.0,), background=0.0),
        )
        draws = [simulate_measurement(truth, 0.0, 1.0, rng) for _ in range(10_000)]
        assert abs(np.mean(draws) - 4.0) < 4 * (2.0 / 100.0)

    def test_seed_determinism(self):
        a = simulate_measurement(DECONVOLUTION_TRUTH, 161.8, 5.0, np.random.default_rng(3))
        b = simulate_measurement(DECONVOLUTION_TRUTH, 161.8, 5.0, np.random.default_rng(3))
        assert a == b

    def test_exposure_validated(self):
        with pytest.raises(ValueError):
            simulate_measurement(DECONVOLUTION_TRUTH, 161.8, 0.0, np.random.default_rng(0))


class TestCandidateSet:
    def test_single_peak(self):
        assert update_candidate_set(1) == [1, 2]

    def test_three_peaks(self):
        assert update_candidate_set(3) == [2, 3, 4]

    def test_two_peaks(self):
        assert update_candidate_set(2) == [1, 2, 3]

    def test_invalid(self):
        with pytest.raises(ValueError):
            update_candidate_set(0)

    def test_initial_sets(self):
        assert CandidatePolicy(kind="peaks_sliding").initial() == ["M1", "M2"]
        assert CandidatePolicy(kind="fixed_pair").initial() == ["M2", "M3"]
        assert CandidatePolicy(kind="single_model", model="M3").initial() == ["M3"]


class TestBuildModel:
    def test_families(self):
        assert build_model("peaks", "M4").dim == 13
        assert build_model("hamiltonian", "M2").dim == 5
        assert build_model("hamiltonian", "M3").dim == 6
        with pytest.raises(ValueError):
            build_model("hamiltonian", "M4")
        with pytest.raises(ValueError):
            build_model("peaks", "X1")


class TestRunSequential:
    def test_zero_rounds_is_initial_sweep_only(self):
        cfg = tiny_deconv_config(rounds=0)
        hist = run_sequential(cfg)
        assert len(hist.dataset) == cfg.grid.count
        assert hist.t_sum == cfg.grid.count * cfg.t_unit
        assert hist.rounds == []

    def test_round_bookkeeping(self):
        cfg = tiny_deconv_config(seed=2, rounds=2)
        hist = run_sequential(cfg)
        n, k = cfg.grid.count, cfg.points_per_round
        assert len(hist.dataset) == n + 2 * k
        assert hist.t_sum == hist.dataset.total_exposure()
        assert hist.t_sum == cfg.t_sum
        for i, rec in enumerate(hist.rounds, start=1):
            assert rec.index == i
            assert len(rec.selected_x) == k
            assert rec.selected_x == sorted(rec.selected_x)  # ascending sweep
            assert abs(sum(rec.posterior.values()) - 1.0) < 1e-12

    def test_reproducible_bit_exact(self):
        cfg = tiny_deconv_config(seed=5, rounds=2)
        a = run_sequential(cfg)
        b = run_sequential(cfg)
        assert a.dataset.records == b.dataset.records
        for ra, rb in zip(a.rounds, b.rounds):
            assert ra.selected_x == rb.selected_x
            assert ra.log_evidences == rb.log_evidences
            assert ra.map_theta == rb.map_theta

    def test_candidate_set_slides(self):
        cfg = tiny_deconv_config(seed=3, rounds=3)
        hist = run_sequential(cfg)
        assert hist.rounds[0].candidate_ids == ("M1", "M2")
        for prev, cur in zip(hist.rounds, hist.rounds[1:]):
            k_hat = int(prev.best_model[1:])
            expected = ["M1", "M2"] if k_hat == 1 else [f"M{j}" for j in (k_hat - 1, k_hat, k_hat + 1)]
            assert list(cur.candidate_ids) == expected

    def test_rejects_static_strategy(self):
        cfg = tiny_deconv_config(strategy=StrategySpec(kind="static", t_static=1.0))
        with pytest.raises(ValueError):
            run_sequential(cfg)

    def test_gp_strategy_same_schema(self):
        cfg = tiny_deconv_config(seed=4, rounds=1, strategy=StrategySpec(kind="gp"))
        hist = run_sequential(cfg)
        rec = hist.rounds[0]
        assert len(rec.selected_x) == cfg.points_per_round
        assert rec.log_evidences == {}
        assert rec.acquisition is not None
        assert np.all(np.isnan(rec.acquisition.g_second))
        assert len(hist.dataset) == cfg.grid.count + cfg.points_per_round

    def test_single_model_mode_scores_twice(self):
        # fixed-model campaigns set the second-best model to the best one,
        # so both halves select from the same score vector
        cfg = replace(
            tiny_deconv_config(seed=8, rounds=1),
            candidate_policy=CandidatePolicy(kind="single_model", model="M3"),
        )
        hist = run_sequential(cfg)
        rec = hist.rounds[0]
        assert rec.candidate_ids == ("M3",)
        assert rec.best_model == rec.second_model == "M3"
        assert rec.posterior == {"M3": 1.0}
        np.testing.assert_array_equal(rec.acquisition.g_best, rec.acquisition.g_second)

    def test_fixed_pair_hamiltonian_round(self):
        cfg = CampaignConfig(
            grid=GridSpec(start=-30.0, step=1.0, count=50),
            t_unit=6.0,
            points_per_round=4,
            rounds=1,
            truth=HAMILTONIAN_TRUTH,
            candidate_policy=CandidatePolicy(kind="fixed_pair"),
            strategy=StrategySpec(kind="parametric"),
            sampler=tiny_sampler(),
            eval_models=("M2", "M3"),
            seed=12,
        )
        hist = run_sequential(cfg)
        rec = hist.rounds[0]
        assert rec.candidate_ids == ("M2", "M3")
        assert {rec.best_model, rec.second_model} == {"M2", "M3"}
        assert len(hist.dataset) == 50 + 4

    def test_abort_preserves_partial_history(self):
        cfg = replace(
            tiny_deconv_config(seed=6, rounds=2),
            candidate_policy=CandidatePolicy(kind="single_model", model="MX"),
        )
        with pytest.raises(CampaignError) as exc_info:
            run_sequential(cfg)
        hist = exc_info.value.history
        assert len(hist.dataset) == cfg.grid.count  # initial sweep survived
        assert hist.t_sum == cfg.grid.count * cfg.t_unit


class TestRunStatic:
    def test_static_budget_and_single_pass(self):
        cfg = tiny_deconv_config(
            seed=7, rounds=2, strategy=StrategySpec(kind="static", t_static=3.0)
        )
        hist = run_static(cfg)
        assert len(hist.dataset) == cfg.grid.count
        assert hist.t_sum == cfg.grid.count * 3.0
        assert hist.t_sum == cfg.t_sum
        (rec,) = hist.rounds
        assert rec.selected_x == []
        assert set(rec.posterior) == {"M2", "M3", "M4"}

    def test_rejects_non_static(self):
        with pytest.raises(ValueError):
            run_static(tiny_deconv_config())


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(start=0.0, step=0.0, count=10)
        with pytest.raises(ValueError):
            GridSpec(start=0.0, step=1.0, count=1)
        with pytest.raises(ValueError):
            StrategySpec(kind="static")
        with pytest.raises(ValueError):
            CandidatePolicy(kind="single_model")
        with pytest.raises(ValueError):
            tiny_deconv_config(rounds=-1)
        cfg = tiny_deconv_config()
        with pytest.raises(ValueError):
            replace(cfg, points_per_round=5)

    def test_grid_points(self):
        g = GridSpec(start=157.0, step=0.025, count=400)
        pts = g.points()
        assert pts[0] == 157.0
        assert pts[-1] == pytest.approx(157.0 + 0.025 * 399, rel=1e-12)
        assert len(pts) == 400

    def test_json_roundtrip(self):
        for cfg in (
            tiny_deconv_config(seed=9),
            replace(
                preset_config("hamiltonian-desk", seed=3),
                strategy=StrategySpec(kind="static", t_static=18.0),
            ),
        ):
            back = CampaignConfig.from_json(json.loads(json.dumps(cfg.to_json())))
            assert back == cfg

    def test_preset_budgets(self):
        # configured totals for the reference problem settings
        sec3 = preset_config("deconv-sec3")
        assert sec3.t_sum == 2000.0
        sec4 = preset_config("hamiltonian-sec4")
        assert sec4.t_sum == 12000.0
        assert replace(
            sec3, strategy=StrategySpec(kind="static", t_static=5.0)
        ).t_sum == 2000.0
        assert replace(
            sec3, strategy=StrategySpec(kind="static", t_static=15.0)
        ).t_sum == 6000.0
        assert replace(
            sec4, strategy=StrategySpec(kind="static", t_static=90.0)
        ).t_sum == 36000.0

    def test_truth_values(self):
        tv = DECONVOLUTION_TRUTH.true_values()
        assert tv["mu2"] == 161.852
        assert tv["u1"] == pytest.approx(1 / 0.341**2, rel=1e-12)
        hv = HAMILTONIAN_TRUTH.true_values()
        assert hv["delta"] == 7.66
        assert hv["b"] == 0.0
        assert DECONVOLUTION_TRUTH.model_id() == "M3"
        assert HAMILTONIAN_TRUTH.model_id() == "M3"
