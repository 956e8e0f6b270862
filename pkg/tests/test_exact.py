import numpy as np
import pytest

from conftest import dense_circuit_state

from safeqaoa.ansatz import GateSequence, ParamSet, build_gate_sequence, build_layout
from safeqaoa.errors import GuardError, LayoutError
from safeqaoa.exact import ExactEngine, apply_sequence, exact_energy, prepare_plus
from safeqaoa.pauli import parse
from safeqaoa.problems import ProblemInstance, generate_instance, generate_sk


def _full_params(inst, depth, rng=None, scale=1.0):
    layout = build_layout(inst, depth)
    values = np.zeros(layout.dim) if rng is None else scale * rng.normal(size=layout.dim)
    return ParamSet(layout, values, np.ones(layout.dim, dtype=bool))


class TestPreparePlus:
    def test_single_qubit(self):
        state = prepare_plus(1)
        assert np.allclose(state, [2**-0.5, 2**-0.5])

    def test_two_qubits(self):
        assert np.allclose(prepare_plus(2), [0.5] * 4)

    def test_norm(self):
        state = prepare_plus(10)
        assert np.linalg.norm(state) == pytest.approx(1.0, abs=1e-12)

    def test_guard(self):
        with pytest.raises(GuardError):
            prepare_plus(25)


class TestApplySequence:
    def test_zero_angles_identity(self, rng):
        inst = generate_sk(5, 8)
        params = _full_params(inst, 2)
        gates = build_gate_sequence(params)
        state = prepare_plus(5)
        out = apply_sequence(state, gates, params)
        assert np.allclose(out, state, atol=1e-14)

    def test_single_qubit_closed_form(self):
        # H = Z on one qubit, circuit Z(gamma) then X(beta): <Z> = sin 2g sin 2b
        inst = ProblemInstance("grid2d", 1, {0: 1.0}, {}, seed=0)
        layout = build_layout(inst, 1)
        for gamma, beta in [(0.3, -0.7), (np.pi / 4, np.pi / 4), (1.2, 0.4)]:
            params = ParamSet(layout, np.array([gamma, beta]), np.ones(2, dtype=bool))
            gates = build_gate_sequence(params)
            energy = exact_energy(inst, gates, params)
            assert energy == pytest.approx(np.sin(2 * gamma) * np.sin(2 * beta), abs=1e-12)

    def test_global_phase_invariance(self, rng):
        inst = generate_sk(4, 8)
        params = _full_params(inst, 1, rng)
        gates = build_gate_sequence(params)
        engine = ExactEngine(inst)
        state = apply_sequence(prepare_plus(4), gates, params)
        rotated = np.exp(1j * 0.7) * state
        e1 = float(np.sum(np.abs(state) ** 2 * engine.energies))
        e2 = float(np.sum(np.abs(rotated) ** 2 * engine.energies))
        assert e1 == pytest.approx(e2, abs=1e-13)

    def test_norm_preserved_per_gate(self, rng):
        inst = generate_instance("grid2d", 6, 5, grid_shape=(2, 3))
        params = _full_params(inst, 2, rng)
        gates = build_gate_sequence(params)
        state = prepare_plus(6)
        for generator, k, scale in gates.gates:
            single = GateSequence(6, ((generator, k, scale),))
            state = apply_sequence(state, single, params)
            assert abs(np.linalg.norm(state) - 1.0) < 1e-10

    def test_matches_dense_reference(self, rng):
        for family in ("sk", "maxcut"):
            inst = generate_instance(family, 4, 21)
            params = _full_params(inst, 2, rng)
            gates = build_gate_sequence(params)
            state = apply_sequence(prepare_plus(4), gates, params)
            ref = dense_circuit_state(gates.gates, params.values, 4)
            assert np.allclose(state, ref, atol=1e-12)

    def test_rejects_two_qubit_x(self):
        params = _full_params(generate_sk(3, 1), 1)
        bad = GateSequence(3, ((parse("X0 X1", 3), 0, 1.0),))
        with pytest.raises(LayoutError):
            apply_sequence(prepare_plus(3), bad, params)

    def test_dimension_mismatch(self):
        params = _full_params(generate_sk(3, 1), 1)
        gates = build_gate_sequence(params)
        with pytest.raises(Exception):
            apply_sequence(prepare_plus(4), gates, params)


class TestEnergy:
    def test_zero_params_zero_energy(self):
        for family in ("sk", "grid2d", "maxcut"):
            inst = generate_instance(family, 6, 3, grid_shape=(2, 3))
            params = _full_params(inst, 2)
            gates = build_gate_sequence(params)
            assert exact_energy(inst, gates, params) == pytest.approx(0.0, abs=1e-12)

    def test_energy_sandwich(self, rng):
        inst = generate_instance("sk", 8, 11)
        ext = inst.energy_extremes()
        engine = ExactEngine(inst)
        for _ in range(10):
            params = _full_params(inst, 2, rng)
            gates = build_gate_sequence(params)
            e = engine.energy(gates, params.values)
            assert ext.e_min - 1e-12 <= e <= ext.e_max + 1e-12

    def test_cost_gate_order_immaterial(self, rng):
        # permuting the all-diagonal cost block leaves the state unchanged
        inst = generate_instance("grid2d", 6, 13, grid_shape=(2, 3))
        params = _full_params(inst, 1, rng)
        gates = build_gate_sequence(params)
        n_cost = params.layout.n_cost
        cost, mixer = list(gates.gates[:n_cost]), list(gates.gates[n_cost:])
        perm = rng.permutation(n_cost)
        shuffled = GateSequence(6, tuple(cost[i] for i in perm) + tuple(mixer))
        a = apply_sequence(prepare_plus(6), gates, params)
        b = apply_sequence(prepare_plus(6), shuffled, params)
        assert np.allclose(a, b, atol=1e-12)

    def test_guard(self):
        inst = ProblemInstance("sk", 25, {}, {(0, 1): 0.5}, seed=0)
        with pytest.raises(GuardError):
            ExactEngine(inst)


class TestGradient:
    def test_closed_form_partials(self):
        inst = ProblemInstance("grid2d", 1, {0: 1.0}, {}, seed=0)
        layout = build_layout(inst, 1)
        gamma, beta = 0.4, -0.9
        params = ParamSet(layout, np.array([gamma, beta]), np.ones(2, dtype=bool))
        gates = build_gate_sequence(params)
        engine = ExactEngine(inst)
        _, grad = engine.energy_and_gradient(gates, params.values)
        assert grad[0] == pytest.approx(2 * np.cos(2 * gamma) * np.sin(2 * beta), abs=1e-12)
        assert grad[1] == pytest.approx(2 * np.sin(2 * gamma) * np.cos(2 * beta), abs=1e-12)

    def test_stationary_point(self):
        inst = ProblemInstance("grid2d", 1, {0: 1.0}, {}, seed=0)
        layout = build_layout(inst, 1)
        params = ParamSet(layout, np.array([np.pi / 4, np.pi / 4]), np.ones(2, dtype=bool))
        gates = build_gate_sequence(params)
        _, grad = ExactEngine(inst).energy_and_gradient(gates, params.values)
        assert np.linalg.norm(grad) < 1e-6

    def test_matches_finite_differences(self, rng):
        inst = generate_instance("sk", 8, 19)
        layout = build_layout(inst, 2)
        engine = ExactEngine(inst)
        params = ParamSet(layout, rng.uniform(-1, 1, layout.dim), np.ones(layout.dim, bool))
        gates = build_gate_sequence(params)
        _, grad = engine.energy_and_gradient(gates, params.values)
        step = 1e-5
        for k in rng.choice(layout.dim, size=12, replace=False):
            delta = np.zeros(layout.dim)
            delta[k] = step
            fd = (
                engine.energy(gates, params.values + delta)
                - engine.energy(gates, params.values - delta)
            ) / (2 * step)
            assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-7)

    def test_inactive_entries_zero(self, rng):
        inst = generate_sk(5, 23)
        layout = build_layout(inst, 2)
        mask = rng.random(layout.dim) > 0.5
        params = ParamSet(layout, rng.normal(size=layout.dim), mask)
        gates = build_gate_sequence(params)
        _, grad = ExactEngine(inst).energy_and_gradient(gates, params.values)
        assert np.all(grad[~mask] == 0.0)
