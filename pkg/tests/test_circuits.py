import cmath
import json
import math
from pathlib import Path

import numpy as np
import pytest

from nohidelab import qmath
from nohidelab.circuits import (
    Channel,
    Circuit,
    CircuitParseError,
    Gate,
    circuit_unitary,
    depolarizing_channel,
    gate_matrix,
    parse_circuit,
    render_circuit,
    run_density,
    run_statevector,
    u3_matrix,
)
from nohidelab.qmath import StateVector, kron

from conftest import random_density, random_state

GOLDEN = Path(__file__).parent / "data" / "circuit_grammar_golden.json"


class TestParser:
    def test_minimal_program(self):
        c = parse_circuit("qubits 1\nh 0")
        assert c.num_qubits == 1
        assert c.gates == (Gate("h", (0,)),)

    def test_two_qubit_gates_keep_argument_order(self):
        c = parse_circuit("qubits 3\ncx 0 1\nch 2 1")
        assert c.gates[0] == Gate("cx", (0, 1))
        assert c.gates[1] == Gate("ch", (2, 1))

    def test_index_out_of_range_has_position(self):
        with pytest.raises(CircuitParseError, match="index out of range") as err:
            parse_circuit("qubits 2\ncx 0 2")
        assert err.value.line == 2
        assert err.value.col == 6

    def test_unknown_mnemonic(self):
        with pytest.raises(CircuitParseError, match="unknown mnemonic 'foo'") as err:
            parse_circuit("qubits 1\nfoo 0")
        assert (err.value.line, err.value.col) == (2, 1)

    def test_arity_mismatch(self):
        with pytest.raises(CircuitParseError, match="expects 2 arguments"):
            parse_circuit("qubits 2\ncx 0")
        with pytest.raises(CircuitParseError, match="expects 1 arguments"):
            parse_circuit("qubits 1\nh 0 0")

    def test_malformed_angle(self):
        with pytest.raises(CircuitParseError, match="malformed angle literal 'abc'"):
            parse_circuit("qubits 1\nu3 abc 0 0 0")
        with pytest.raises(CircuitParseError, match="malformed angle literal"):
            parse_circuit("qubits 1\nu3 nan 0 0 0")

    def test_malformed_index(self):
        with pytest.raises(CircuitParseError, match="expected qubit index"):
            parse_circuit("qubits 1\nh 0.5")

    def test_duplicate_index_reported_with_location(self):
        with pytest.raises(CircuitParseError, match="duplicate") as err:
            parse_circuit("qubits 2\nswap 1 1")
        assert err.value.line == 2

    def test_missing_header(self):
        with pytest.raises(CircuitParseError, match="header"):
            parse_circuit("h 0")
        with pytest.raises(CircuitParseError, match="header"):
            parse_circuit("")

    def test_bad_qubit_count(self):
        with pytest.raises(CircuitParseError, match="qubit count"):
            parse_circuit("qubits zero")
        with pytest.raises(CircuitParseError, match="at least 1"):
            parse_circuit("qubits 0")

    def test_golden_grammar_file(self):
        cases = json.loads(GOLDEN.read_text())
        assert len(cases) == 20
        for case in cases:
            c = parse_circuit(case["text"])
            assert c.num_qubits == case["num_qubits"], case["name"]
            got = [[g.kind, list(g.targets), list(g.params)] for g in c.gates]
            assert got == case["gates"], case["name"]

    def test_render_round_trip_on_golden(self):
        cases = json.loads(GOLDEN.read_text())
        for case in cases:
            c = parse_circuit(case["text"])
            again = parse_circuit(render_circuit(c))
            assert again.gates == c.gates, case["name"]
            assert again.num_qubits == c.num_qubits

    def test_render_rejects_raw_unitary(self):
        c = Circuit(1, (Gate("unitary", (0,), matrix=np.eye(2)),))
        with pytest.raises(ValueError, match="no text form"):
            render_circuit(c)


class TestGateMatrix:
    def test_t_gate_diagonal(self):
        m = gate_matrix(Gate("t", (0,)), 1)
        assert np.allclose(m, np.diag([1, cmath.exp(1j * math.pi / 4)]))

    def test_s_gate_diagonal(self):
        m = gate_matrix(Gate("s", (0,)), 1)
        assert np.allclose(m, np.diag([1, 1j]))

    def test_h_embedded_at_qubit1_of_2(self):
        m = gate_matrix(Gate("h", (1,)), 2)
        assert np.abs(m - kron(np.eye(2), qmath.HADAMARD)).max() < 1e-12

    def test_h_embedded_at_qubit0_of_2(self):
        m = gate_matrix(Gate("h", (0,)), 2)
        assert np.abs(m - kron(qmath.HADAMARD, np.eye(2))).max() < 1e-12

    def test_u3_action_on_zero(self):
        theta, phi = 0.7, 1.1
        out = u3_matrix(theta, phi, 0.3) @ np.array([1, 0])
        expected = np.array([math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2)])
        assert np.abs(out - expected).max() < 1e-12

    def test_u3_prepares_sqrt_p_superposition(self):
        # theta = 2 arcsin(sqrt(p)) sends |0> to sqrt(1-p)|0> + sqrt(p)|1>
        for p in (0.0, 0.3, 0.9549150281252627, 1.0):
            theta = 2 * math.asin(math.sqrt(p))
            out = u3_matrix(theta, 0.0, 0.0) @ np.array([1, 0])
            assert np.abs(out - [math.sqrt(1 - p), math.sqrt(p)]).max() < 1e-12

    def test_cx_control_is_first_target(self):
        m = gate_matrix(Gate("cx", (0, 1)), 2)
        expected = np.zeros((4, 4))
        expected[0, 0] = expected[1, 1] = expected[3, 2] = expected[2, 3] = 1
        assert np.abs(m - expected).max() < 1e-12

    def test_cx_reversed_targets(self):
        m = gate_matrix(Gate("cx", (1, 0)), 2)
        expected = np.zeros((4, 4))
        expected[0, 0] = expected[2, 2] = expected[3, 1] = expected[1, 3] = 1
        assert np.abs(m - expected).max() < 1e-12

    def test_embedding_is_unitary(self, rng):
        for kind, arity in (("ch", 2), ("swap", 2), ("y", 1)):
            targets = tuple(int(q) for q in rng.choice(3, size=arity, replace=False))
            assert qmath.is_unitary(gate_matrix(Gate(kind, targets), 3))


class TestStatevectorSim:
    def test_h_on_zero(self):
        out = run_statevector(parse_circuit("qubits 1\nh 0"), StateVector.ket("0"))
        assert np.abs(out.amplitudes - np.array([1, 1]) / math.sqrt(2)).max() < 1e-12

    def test_hths_prep_carries_global_phase(self):
        out = run_statevector(
            parse_circuit("qubits 1\nh 0\nt 0\nh 0\ns 0"), StateVector.ket("0")
        )
        target = np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)])
        phase = cmath.exp(1j * math.pi / 8)
        assert np.abs(out.amplitudes - phase * target).max() < 1e-12
        assert qmath.equal_up_to_global_phase(out.amplitudes, target)

    def test_linearity_on_random_instances(self, rng):
        c = Circuit(2, (Gate("h", (0,)), Gate("cx", (0, 1)), Gate("t", (1,))))
        u = circuit_unitary(c)
        for _ in range(10):
            a = random_state(rng, 2)
            b = random_state(rng, 2)
            alpha = complex(rng.normal(), rng.normal())
            beta = complex(rng.normal(), rng.normal())
            combo = alpha * a.amplitudes + beta * b.amplitudes
            lhs = u @ combo
            rhs = alpha * run_statevector(c, a).amplitudes + beta * run_statevector(c, b).amplitudes
            assert np.abs(lhs - rhs).max() < 1e-10

    def test_norm_preserved(self, rng):
        c = parse_circuit("qubits 3\nh 0\ncx 0 2\nu3 0.3 0.2 0.1 1\nswap 0 1")
        out = run_statevector(c, random_state(rng, 3))
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            run_statevector(parse_circuit("qubits 2\nh 0"), StateVector.ket("0"))


class TestChannels:
    def test_depolarizing_p0_single_kraus(self):
        chan = depolarizing_channel(0.0)
        assert len(chan.kraus_ops) == 1
        assert np.abs(chan.kraus_ops[0] - np.eye(2)).max() < 1e-12

    def test_depolarizing_p1_weights(self):
        chan = depolarizing_channel(1.0)
        assert len(chan.kraus_ops) == 4
        for k in chan.kraus_ops:
            assert np.abs(np.abs(k[np.abs(k) > 1e-12]) - 0.5).max() < 1e-12

    def test_completeness_on_grid(self):
        for k in range(11):
            chan = depolarizing_channel(k / 10)
            total = sum(op.conj().T @ op for op in chan.kraus_ops)
            assert np.abs(total - np.eye(2)).max() < 1e-12

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            depolarizing_channel(1.5)

    def test_rejects_non_cptp(self):
        with pytest.raises(ValueError, match="not trace preserving"):
            Channel((qmath.HADAMARD, qmath.PAULI_X))


class TestDensitySim:
    def test_empty_circuit_identity(self, rng):
        rho = random_density(rng, 2)
        out = run_density(Circuit(2), [], rho)
        assert np.abs(out.matrix - rho.matrix).max() < 1e-12

    def test_full_depolarizing_gives_mixed(self, rng):
        rho = random_density(rng, 1)
        out = run_density(Circuit(1), [(depolarizing_channel(1.0), [0], 0)], rho)
        assert np.abs(out.matrix - np.eye(2) / 2).max() < 1e-12

    def test_partial_depolarizing_eigenvalues(self, rng):
        psi = random_state(rng, 1)
        for p in (0.1, 0.5, 0.9):
            out = run_density(Circuit(1), [(depolarizing_channel(p), [0], 0)], psi.to_density())
            w, _ = qmath.hermitian_eig(out.matrix)
            assert np.abs(w - [1 - p / 2, p / 2]).max() < 1e-10

    def test_matches_statevector_on_projectors(self, rng):
        c = parse_circuit("qubits 2\nh 0\ncx 0 1\ns 1")
        psi = random_state(rng, 2)
        dm = run_density(c, [], psi.to_density())
        sv = run_statevector(c, psi).to_density()
        assert np.abs(dm.matrix - sv.matrix).max() < 1e-10

    def test_channel_preserves_trace_and_hermiticity(self, rng):
        chan = depolarizing_channel(0.37)
        for _ in range(100):
            rho = random_density(rng, 2)
            out = run_density(Circuit(2), [(chan, [int(rng.integers(2))], 0)], rho)
            assert abs(np.trace(out.matrix) - 1) < 1e-10
            assert qmath.is_hermitian(out.matrix, 1e-10)

    def test_channel_position_interleaves_with_gates(self):
        # X before full depolarizing vs after: the mixed state hides the X
        c = Circuit(1, (Gate("x", (0,)),))
        before = run_density(c, [(depolarizing_channel(1.0), [0], 0)], StateVector.ket("0").to_density())
        after = run_density(c, [(depolarizing_channel(1.0), [0], 1)], StateVector.ket("0").to_density())
        assert np.abs(before.matrix - np.eye(2) / 2).max() < 1e-12
        assert np.abs(after.matrix - np.eye(2) / 2).max() < 1e-12

    def test_position_bounds_checked(self, rng):
        with pytest.raises(ValueError, match="bounds"):
            run_density(Circuit(1), [(depolarizing_channel(0.5), [0], 2)], random_density(rng, 1))


def test_gate_validation():
    with pytest.raises(ValueError, match="duplicate"):
        Gate("cx", (1, 1))
    with pytest.raises(ValueError, match="unknown gate kind"):
        Gate("rx", (0,))
    with pytest.raises(ValueError, match="expects 2 targets"):
        Gate("cx", (0,))
    with pytest.raises(ValueError, match="not unitary"):
        Gate("unitary", (0,), matrix=np.ones((2, 2)))
    with pytest.raises(ValueError, match="touches qubit"):
        Circuit(1, (Gate("h", (1,)),))
