import numpy as np
import pytest

from safeqaoa.errors import DegenerateRatioError, DimensionError
from safeqaoa.metrics import (
    RunSummary,
    aggregate,
    approximation_ratio,
    ballpark_cost,
    circular_cosine_similarity,
    first_hit_step,
    read_summary_csv,
    reduction_statistics,
    write_summary_csv,
)
from safeqaoa.problems import EnergyExtremes


def _summary(**kw):
    base = dict(
        run_id="sk-n4-p1-safe-distill-w2-t0.3-i0-rand-0",
        family="sk",
        n_qubits=4,
        depth=1,
        method="safe-distill",
        max_weight=2,
        threshold=0.3,
        instance_index=0,
        init_id="rand-0",
        alpha_step0=0.9,
        alpha_final=0.95,
        alpha_best=0.96,
        tau_099=3,
        n_active=10,
        c_ballpark=30.0,
        reduction_fraction=0.5,
        cost_angle_similarity=0.99,
        degenerate=False,
    )
    base.update(kw)
    return RunSummary(**base)


class TestApproximationRatio:
    def test_ground_state_is_one(self):
        ext = EnergyExtremes(-2.0, 3.0, 0)
        assert approximation_ratio(-2.0, ext) == 1.0

    def test_worst_state_is_zero(self):
        ext = EnergyExtremes(-2.0, 3.0, 0)
        assert approximation_ratio(3.0, ext) == 0.0

    def test_interior_value(self):
        ext = EnergyExtremes(-1.0, 3.0, 0)
        assert approximation_ratio(0.0, ext) == pytest.approx(0.75)

    def test_degenerate_extremes(self):
        with pytest.raises(DegenerateRatioError):
            approximation_ratio(0.0, EnergyExtremes(1.0, 1.0, 0))

    def test_affine_invariance(self, rng):
        for _ in range(20):
            e_min, span = rng.normal(), abs(rng.normal()) + 0.1
            e = e_min + span * rng.random()
            ext = EnergyExtremes(e_min, e_min + span, 0)
            lam = abs(rng.normal()) + 0.5
            scaled = EnergyExtremes(lam * e_min, lam * (e_min + span), 0)
            assert approximation_ratio(lam * e, scaled) == pytest.approx(
                approximation_ratio(e, ext), abs=1e-12
            )


class TestFirstHitStep:
    def test_worked_example(self):
        assert first_hit_step([0.5, 0.9, 0.95, 0.96]) == 3

    def test_best_at_step_zero(self):
        assert first_hit_step([1.0, 0.9, 0.8]) == 0

    def test_constant_trajectory(self):
        assert first_hit_step([0.7, 0.7, 0.7]) == 0

    def test_never_exceeds_argmax(self, rng):
        for _ in range(50):
            traj = rng.random(20)
            assert first_hit_step(traj) <= int(np.argmax(traj))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            first_hit_step([])


class TestBallparkCost:
    def test_product(self):
        assert ballpark_cost(156, 71) == pytest.approx(11076.0)

    def test_zero_tau(self):
        assert ballpark_cost(100, 0) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ballpark_cost(-1, 3)


class TestCircularCosineSimilarity:
    def test_identical(self, rng):
        phi = rng.normal(size=8)
        assert circular_cosine_similarity(phi, phi) == pytest.approx(1.0)

    def test_antipodal(self, rng):
        phi = rng.normal(size=8)
        assert circular_cosine_similarity(phi, phi + np.pi) == pytest.approx(-1.0)

    def test_two_pi_shift(self, rng):
        phi = rng.normal(size=8)
        assert circular_cosine_similarity(phi, phi + 2 * np.pi) == pytest.approx(1.0)

    def test_symmetric_and_bounded(self, rng):
        for _ in range(20):
            a, b = rng.normal(size=5), rng.normal(size=5)
            s = circular_cosine_similarity(a, b)
            assert s == pytest.approx(circular_cosine_similarity(b, a))
            assert -1.0 <= s <= 1.0

    def test_component_shift_invariance(self, rng):
        a, b = rng.normal(size=6), rng.normal(size=6)
        shifted = b.copy()
        shifted[2] += 2 * np.pi
        assert circular_cosine_similarity(a, shifted) == pytest.approx(
            circular_cosine_similarity(a, b)
        )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            circular_cosine_similarity(np.zeros(3), np.zeros(4))


class TestAggregate:
    def test_singleton_cell(self):
        cells = aggregate([_summary()])
        assert len(cells) == 1
        c = cells[0]
        assert c.alpha_final_mean == c.alpha_final_best == 0.95
        assert c.c_ballpark == pytest.approx(10 * 3)
        assert c.c_ballpark_mean_product == pytest.approx(30.0)

    def test_cell_means(self):
        runs = [
            _summary(run_id="a", tau_099=10, n_active=100, c_ballpark=1000.0, alpha_final=0.9),
            _summary(run_id="b", tau_099=20, n_active=50, c_ballpark=1000.0, alpha_final=0.8),
        ]
        c = aggregate(runs)[0]
        assert c.tau_mean == 15.0
        assert c.n_active_mean == 75.0
        assert c.c_ballpark == pytest.approx(75 * 15)
        assert c.c_ballpark_mean_product == pytest.approx(1000.0)
        assert c.alpha_final_best == 0.9

    def test_groups_by_configuration(self):
        runs = [_summary(run_id="a"), _summary(run_id="b", method="exact-only", max_weight=None, threshold=None)]
        assert len(aggregate(runs)) == 2


class TestReductionStatistics:
    def test_directional(self):
        runs = [
            _summary(run_id="e1", method="exact-only", max_weight=None, threshold=None,
                     n_active=100, tau_099=50, c_ballpark=5000.0),
            _summary(run_id="n1", method="safe-nodistill", threshold=None,
                     n_active=100, tau_099=20, c_ballpark=2000.0),
            _summary(run_id="d1", method="safe-distill",
                     n_active=40, tau_099=10, c_ballpark=400.0),
        ]
        stats = reduction_statistics(runs)
        assert stats["parameter_reduction"] == pytest.approx(0.6)
        assert stats["workload_reduction"] == pytest.approx(1 - 400 / 5000)
        assert stats["step_reduction"] == pytest.approx(0.5)

    def test_missing_methods(self):
        stats = reduction_statistics([_summary()])
        assert stats["parameter_reduction"] is None


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        runs = [
            _summary(run_id="a"),
            _summary(run_id="b", method="exact-only", max_weight=None, threshold=None,
                     cost_angle_similarity=None, degenerate=True),
        ]
        path = tmp_path / "summary.csv"
        write_summary_csv(path, runs)
        back = read_summary_csv(path)
        assert [s.to_dict() for s in back] == [s.to_dict() for s in runs]

    def test_write_deterministic(self, tmp_path):
        runs = [_summary(run_id="b"), _summary(run_id="a")]
        write_summary_csv(tmp_path / "one.csv", runs)
        write_summary_csv(tmp_path / "two.csv", list(reversed(runs)))
        assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()
