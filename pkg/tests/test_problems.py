import json

import numpy as np
import pytest

from conftest import dense_sum

from safeqaoa.errors import GuardError, InvalidSizeError, ParameterError
from safeqaoa.problems import (
    EnergyExtremes,
    ProblemInstance,
    brute_force_extremes,
    classical_energy,
    cut_value,
    energy_table,
    generate_grid2d,
    generate_instance,
    generate_maxcut,
    generate_sk,
    grid2d_edges,
)


class TestSk:
    def test_coupling_counts(self):
        assert len(generate_sk(12, 1).couplings) == 66
        assert len(generate_sk(20, 1).couplings) == 190

    def test_no_fields(self):
        assert generate_sk(12, 5).local_fields == {}

    def test_deterministic(self):
        a, b = generate_sk(10, 77), generate_sk(10, 77)
        assert a.couplings == b.couplings

    def test_coupling_scale(self):
        # variance 1/n: sample std over many couplings should sit near 1/sqrt(n)
        inst = generate_sk(24, 3)
        values = np.array(list(inst.couplings.values()))
        assert np.std(values) == pytest.approx(1 / np.sqrt(24), rel=0.25)

    def test_too_small(self):
        with pytest.raises(InvalidSizeError):
            generate_sk(1, 0)


class TestGrid2d:
    @pytest.mark.parametrize(
        "rows,cols,nn,nnn",
        [(3, 4, 17, 12), (4, 4, 24, 18), (4, 5, 31, 24)],
    )
    def test_edge_counts(self, rows, cols, nn, nnn):
        nn_edges, nnn_edges = grid2d_edges(rows, cols)
        assert len(nn_edges) == nn
        assert len(nnn_edges) == nnn
        inst = generate_grid2d(rows, cols, 9)
        assert len(inst.local_fields) == rows * cols
        assert len(inst.couplings) == nn + nnn
        assert len(inst.hamiltonian) == nn + nnn + rows * cols

    def test_field_scale(self):
        inst = generate_grid2d(4, 5, 11)
        fields = np.array(list(inst.local_fields.values()))
        assert np.max(np.abs(fields)) < 0.6  # sigma = 0.1

    def test_degenerate_shape(self):
        with pytest.raises(InvalidSizeError):
            generate_grid2d(1, 5, 0)


class TestMaxcut:
    def test_complete_graph(self):
        inst = generate_maxcut(12, 1.0, 4)
        assert len(inst.couplings) == 66

    def test_unit_couplings_zero_fields(self):
        inst = generate_maxcut(12, 0.3, 4)
        assert all(j == 1.0 for j in inst.couplings.values())
        assert inst.local_fields == {}

    def test_density(self):
        inst = generate_maxcut(12, 0.3, 8)
        assert 5 <= len(inst.couplings) <= 40  # expectation ~19.8

    def test_resamples_degenerate_draws(self):
        # low density at small n forces empty/isolated draws to be retried
        inst = generate_maxcut(4, 0.15, 123)
        degree = [0] * 4
        for i, j in inst.couplings:
            degree[i] += 1
            degree[j] += 1
        assert all(d > 0 for d in degree)
        assert inst.resample_count >= 0

    def test_invalid_probability(self):
        with pytest.raises(ParameterError):
            generate_maxcut(8, 0.0, 1)


class TestBruteForce:
    def test_single_coupling(self):
        inst = ProblemInstance("maxcut", 2, {}, {(0, 1): 1.0}, seed=0)
        ext = brute_force_extremes(inst)
        assert ext.e_min == -1.0 and ext.e_max == 1.0
        assert ext.argmin_bitstring in (1, 2)

    def test_single_field(self):
        inst = ProblemInstance("grid2d", 1, {0: 1.0}, {}, seed=0)
        ext = brute_force_extremes(inst)
        assert ext.e_min == -1.0 and ext.e_max == 1.0
        assert ext.argmin_bitstring == 1

    def test_triangle_maxcut(self):
        inst = ProblemInstance(
            "maxcut", 3, {}, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0}, seed=0
        )
        ext = brute_force_extremes(inst)
        assert ext.e_min == -1.0 and ext.e_max == 3.0

    @pytest.mark.parametrize("family,n", [("sk", 8), ("grid2d", 6), ("maxcut", 8)])
    def test_matches_dense_diagonal(self, family, n):
        inst = generate_instance(family, n, 31, grid_shape=(2, 3))
        diag = np.real(np.diag(dense_sum(inst.hamiltonian)))
        table = energy_table(inst)
        assert np.allclose(diag, table, atol=1e-12)
        ext = brute_force_extremes(inst)
        assert ext.e_min == pytest.approx(diag.min(), abs=1e-12)
        assert ext.e_max == pytest.approx(diag.max(), abs=1e-12)

    def test_guard(self):
        inst = ProblemInstance("sk", 31, {}, {(0, 1): 1.0}, seed=0)
        with pytest.raises(GuardError):
            brute_force_extremes(inst)

    def test_extremes_cached_on_instance(self):
        inst = generate_sk(6, 2)
        ext = inst.energy_extremes()
        assert inst.energy_extremes() is ext


class TestEnergyIdentities:
    def test_pauli_sum_matches_field_formula(self, rng):
        for family in ("sk", "grid2d", "maxcut"):
            inst = generate_instance(family, 9, 17, grid_shape=(3, 3))
            for _ in range(100):
                bits = int(rng.integers(0, 1 << 9))
                direct = classical_energy(inst, bits)
                via_terms = sum(
                    c * (1.0 - 2.0 * ((bin(bits & s.z_mask).count("1")) & 1))
                    for s, c in inst.hamiltonian.terms.items()
                )
                assert direct == pytest.approx(via_terms, abs=1e-12)

    def test_maxcut_cut_identity(self, rng):
        inst = generate_maxcut(10, 0.4, 5)
        n_edges = len(inst.couplings)
        for _ in range(100):
            bits = int(rng.integers(0, 1 << 10))
            assert cut_value(inst, bits) == pytest.approx(
                (n_edges - classical_energy(inst, bits)) / 2
            )

    def test_energy_table_matches_classical(self, rng):
        inst = generate_grid2d(2, 3, 21)
        table = energy_table(inst)
        for bits in range(1 << 6):
            assert table[bits] == pytest.approx(classical_energy(inst, bits), abs=1e-12)


class TestSerialization:
    def test_round_trip(self):
        inst = generate_instance("grid2d", 12, 13)
        inst.energy_extremes()
        text = inst.to_json()
        back = ProblemInstance.from_json(text)
        assert back.to_json() == text
        assert back.couplings == inst.couplings
        assert back.local_fields == inst.local_fields
        assert back.extremes == inst.extremes

    def test_identical_inputs_identical_bytes(self):
        a = generate_instance("maxcut", 12, 40).to_json()
        b = generate_instance("maxcut", 12, 40).to_json()
        assert a == b

    def test_extremes_survive(self):
        inst = generate_sk(6, 3)
        inst.energy_extremes()
        doc = json.loads(inst.to_json())
        assert "extremes" in doc


class TestValidation:
    def test_bad_edge_order(self):
        with pytest.raises(ValueError):
            ProblemInstance("sk", 4, {}, {(2, 1): 1.0}, seed=0)

    def test_extremes_ordering(self):
        with pytest.raises(ValueError):
            EnergyExtremes(1.0, -1.0, 0)

    def test_unknown_family(self):
        with pytest.raises(ParameterError):
            generate_instance("tsp", 8, 0)
