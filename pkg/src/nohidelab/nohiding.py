"""Builders and runners for the erasure, recovery, and imperfect-hiding experiments.

The erasure register is (system, ancilla A, ancilla B) = qubits (0, 1, 2).
Bleaching works by preparing the ancillas in |++> and applying a randomizer
that selects one of the Pauli operators on the system per ancilla basis
state; discarding the ancillas then leaves the system maximally mixed.
The decoder CNOT(1,2), H(1), CNOT(1,2) acts on the ancillas alone and moves
the input state onto one wire while pairing the other two into a Bell state
(which wire and which Bell state depend on the randomizer variant).

The imperfect experiment adds a control qubit that dilutes the ancilla
preparation, so the system is only partially bleached: the induced map on
the system mixes the input with I/2 at weight p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import (
    Circuit,
    Gate,
    circuit_unitary,
    depolarizing_channel,
    run_statevector,
)
from .qmath import (
    PAULIS,
    DensityMatrix,
    StateVector,
    fidelity,
    is_unitary,
    kron,
    partial_trace,
    partial_trace_matrix,
    trace_distance,
)
from .tomo import TomoResult, tomo_pipeline

VARIANT_TAGS = ("eq1", "eq2", "eq6")

_BELL_PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)
_BELL_PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


def _anc_proj(out_bits: str, in_bits: str) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[int(out_bits, 2), int(in_bits, 2)] = 1.0
    return m


# Per tag: terms (coefficient, pauli, ancilla-out, ancilla-in), the wire the
# decoder leaves the input state on, and the Bell pair it creates.
_VARIANT_DEFS = {
    "eq1": {
        "terms": [(1, "I", "00", "00"), (1, "X", "01", "01"),
                  (1j, "Y", "10", "10"), (1, "Z", "11", "11")],
        "transfer_qubit": 2,
        "bell_pair": (0, 1),
        "bell_state": _BELL_PHI_PLUS,
    },
    "eq2": {
        "terms": [(1, "I", "01", "00"), (1, "X", "00", "01"),
                  (-1j, "Y", "11", "10"), (-1, "Z", "10", "11")],
        "transfer_qubit": 2,
        "bell_pair": (0, 1),
        "bell_state": _BELL_PSI_PLUS,
    },
    "eq6": {
        "terms": [(1, "I", "00", "00"), (1, "X", "01", "01"),
                  (-1j, "Y", "10", "10"), (1, "Z", "11", "11")],
        "transfer_qubit": 1,
        "bell_pair": (0, 2),
        "bell_state": _BELL_PHI_PLUS,
    },
}

_PAULI_BLOCKS = [
    coeff * PAULIS[name]
    for name in "IXYZ"
    for coeff in (1, -1, 1j, -1j)
]


@dataclass(frozen=True)
class RandomizerVariant:
    """An 8x8 controlled-Pauli bleaching unitary plus its decode targets."""

    tag: str
    matrix: np.ndarray
    transfer_qubit: int
    bell_pair: tuple[int, int]
    bell_state: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.shape != (8, 8):
            raise ValueError("randomizer must be an 8x8 matrix")
        if not is_unitary(m, 1e-10):
            raise ValueError("randomizer is not unitary within tolerance")
        for anc_in in range(4):
            blocks = [
                m[np.ix_([anc_out, anc_out + 4], [anc_in, anc_in + 4])]
                for anc_out in range(4)
            ]
            nonzero = [b for b in blocks if np.abs(b).max() > 1e-12]
            if len(nonzero) != 1 or not _is_signed_pauli(nonzero[0]):
                raise ValueError(
                    f"ancilla input |{anc_in:02b}> does not map through a single "
                    "signed Pauli block"
                )


def _is_signed_pauli(block: np.ndarray) -> bool:
    for p in _PAULI_BLOCKS:
        if np.abs(block - p).max() <= 1e-10:
            return True
    return False


def build_randomizer(tag: str) -> RandomizerVariant:
    if tag not in _VARIANT_DEFS:
        raise ValueError(f"unknown randomizer variant {tag!r}")
    defn = _VARIANT_DEFS[tag]
    m = np.zeros((8, 8), dtype=complex)
    for coeff, pauli, out_bits, in_bits in defn["terms"]:
        m += coeff * kron(PAULIS[pauli], _anc_proj(out_bits, in_bits))
    return RandomizerVariant(
        tag=tag,
        matrix=m,
        transfer_qubit=defn["transfer_qubit"],
        bell_pair=defn["bell_pair"],
        bell_state=defn["bell_state"],
    )


DECODER_GATES = (Gate("cx", (1, 2)), Gate("h", (1,)), Gate("cx", (1, 2)))


def build_erasure_circuit(tag: str) -> Circuit:
    """H on both ancillas, then the randomizer on (system, A, B)."""
    v = build_randomizer(tag)
    return Circuit(3, (
        Gate("h", (1,)),
        Gate("h", (2,)),
        Gate("unitary", (0, 1, 2), matrix=v.matrix),
    ))


def build_full_circuit(tag: str) -> Circuit:
    """Erasure followed by the ancilla-only decoder."""
    return build_erasure_circuit(tag).extended(DECODER_GATES)


def default_input_gates(qubit: int = 0) -> tuple[Gate, ...]:
    """H, T, H, S preparation of cos(pi/8)|0> + sin(pi/8)|1> (up to phase)."""
    return (Gate("h", (qubit,)), Gate("t", (qubit,)),
            Gate("h", (qubit,)), Gate("s", (qubit,)))


def default_input_state() -> StateVector:
    amps = circuit_unitary(Circuit(1, default_input_gates(0)))[:, 0]
    return StateVector(1, amps)


def u3_prep_gate(psi: StateVector, qubit: int = 0) -> Gate:
    """U3 gate preparing the given single-qubit state from |0> up to phase."""
    if psi.num_qubits != 1:
        raise ValueError("u3 preparation needs a single-qubit state")
    a, b = psi.amplitudes
    theta = 2.0 * math.atan2(abs(b), abs(a))
    if abs(a) > 1e-12:
        phi = float(np.angle(b / a)) if abs(b) > 1e-12 else 0.0
    else:
        phi = 0.0
    return Gate("u3", (qubit,), (theta, phi, 0.0))


@dataclass(frozen=True)
class PerfectResult:
    """Exact and tomographic outcomes of one erasure-plus-decode run."""

    variant: str
    input_state: StateVector
    final_state: StateVector
    bell_pair: tuple[int, int]
    transfer_qubit: int
    bell_fidelity: float
    transfer_fidelity: float
    bell_tomo: TomoResult
    transfer_tomo: TomoResult


def run_perfect(
    tag: str,
    psi: StateVector | None = None,
    shots: int | None = None,
    seed: int = 0,
) -> PerfectResult:
    """Run the full recovery circuit and measure both decode products."""
    variant = build_randomizer(tag)
    circuit = build_full_circuit(tag)
    if psi is None:
        psi = default_input_state()
        circuit = Circuit(3, default_input_gates(0) + circuit.gates)
        inp = StateVector.ket("000")
    else:
        inp = psi.tensor(StateVector.ket("00"))
    final = run_statevector(circuit, inp)
    rho = final.to_density()

    bell_target = DensityMatrix(2, np.outer(variant.bell_state, variant.bell_state.conj()))
    psi_target = psi.to_density()
    bell_fid = fidelity(partial_trace(rho, variant.bell_pair), bell_target)
    transfer_fid = fidelity(partial_trace(rho, [variant.transfer_qubit]), psi_target)
    bell_tomo = tomo_pipeline(rho, variant.bell_pair, shots, seed)
    transfer_tomo = tomo_pipeline(rho, [variant.transfer_qubit], shots, seed)
    return PerfectResult(
        variant=tag,
        input_state=psi,
        final_state=final,
        bell_pair=variant.bell_pair,
        transfer_qubit=variant.transfer_qubit,
        bell_fidelity=bell_fid,
        transfer_fidelity=transfer_fid,
        bell_tomo=bell_tomo,
        transfer_tomo=transfer_tomo,
    )


# Imperfect-hiding register: (system, ancilla A, control, ancilla B) before
# the final swaps; afterwards the system sits on wire 1 and the ancillas on
# wires 2 and 3, which is where tomography reads them.
_IMPERFECT_SYSTEM_WIRE = 1
_IMPERFECT_BELL_PAIR = (1, 2)
_IMPERFECT_TRANSFER_WIRE = 3


def _imperfect_core_gates(p: float) -> tuple[Gate, ...]:
    theta = 2.0 * math.asin(math.sqrt(p))
    randomizer = build_randomizer("eq2")
    return (
        Gate("u3", (2,), (theta, 0.0, 0.0)),
        Gate("ch", (2, 1)),
        Gate("ch", (2, 3)),
        Gate("unitary", (0, 1, 3), matrix=randomizer.matrix),
    )


def build_imperfect_circuit(p: float) -> Circuit:
    """Partial bleaching at weight p, decode, and wire swaps for readout."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"bleaching weight p={p!r} outside [0, 1]")
    decoder = (Gate("cx", (1, 3)), Gate("h", (1,)), Gate("cx", (1, 3)))
    swaps = (Gate("swap", (0, 1)), Gate("swap", (0, 2)))
    return Circuit(4, _imperfect_core_gates(p) + decoder + swaps)


def imperfect_channel_images(p: float) -> dict[str, np.ndarray]:
    """System-qubit images of I, X, Y, Z under the pre-decode dilation."""
    circuit = Circuit(4, _imperfect_core_gates(p))
    u = circuit_unitary(circuit)
    env = np.zeros((8, 8), dtype=complex)
    env[0, 0] = 1.0
    images = {}
    for name, pauli in PAULIS.items():
        full = kron(pauli, env)
        images[name] = partial_trace_matrix(u @ full @ u.conj().T, 4, [0])
    return images


def depolarized_images(p: float) -> dict[str, np.ndarray]:
    """The same four Pauli images under the Kraus form of the bleaching map."""
    chan = depolarizing_channel(p)
    return {
        name: sum(k @ pauli @ k.conj().T for k in chan.kraus_ops)
        for name, pauli in PAULIS.items()
    }


@dataclass(frozen=True)
class ExperimentRecord:
    """One sweep entry: exact and tomographic metrics at bleaching weight p."""

    p: float
    bell_fidelity: float
    transfer_fidelity: float
    system_state: DensityMatrix
    trace_distance_to_mixed: float
    fidelity_to_mixed: float
    fidelity_lower_bound: float
    trace_distance_tomo: float
    fidelity_tomo: float
    raw_min_eigenvalue: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p!r} outside [0, 1]")
        for name in ("bell_fidelity", "transfer_fidelity", "fidelity_to_mixed",
                     "fidelity_tomo"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value!r} outside [0, 1]")
        expected = 1.0 - (1.0 - self.p) / 2.0
        if self.fidelity_lower_bound != expected:
            raise ValueError("fidelity_lower_bound must equal 1 - (1-p)/2")


DEFAULT_SWEEP_GRID = tuple(math.sin(k * math.pi / 20.0) ** 2 for k in range(11))


def run_sweep(
    p_values: Sequence[float],
    shots: int | None,
    seed: int = 0,
    psi: StateVector | None = None,
) -> list[ExperimentRecord]:
    """Run the imperfect experiment across p, one derived seed per entry."""
    if psi is None:
        psi = default_input_state()
    mixed = DensityMatrix.maximally_mixed(1)
    psi_target = psi.to_density()
    bell_target = DensityMatrix(2, np.outer(_BELL_PSI_PLUS, _BELL_PSI_PLUS.conj()))
    records = []
    for index, p in enumerate(p_values):
        entry_seed = seed + index
        circuit = build_imperfect_circuit(p)
        inp = psi.tensor(StateVector.ket("000"))
        rho = run_statevector(circuit, inp).to_density()
        system = partial_trace(rho, [_IMPERFECT_SYSTEM_WIRE])
        tomo = tomo_pipeline(rho, [_IMPERFECT_SYSTEM_WIRE], shots, entry_seed)
        records.append(ExperimentRecord(
            p=float(p),
            bell_fidelity=fidelity(partial_trace(rho, _IMPERFECT_BELL_PAIR), bell_target),
            transfer_fidelity=fidelity(
                partial_trace(rho, [_IMPERFECT_TRANSFER_WIRE]), psi_target
            ),
            system_state=system,
            trace_distance_to_mixed=trace_distance(system, mixed),
            fidelity_to_mixed=fidelity(system, mixed),
            fidelity_lower_bound=1.0 - (1.0 - float(p)) / 2.0,
            trace_distance_tomo=trace_distance(tomo.physical, mixed),
            fidelity_tomo=fidelity(tomo.physical, mixed),
            raw_min_eigenvalue=tomo.raw.min_eigenvalue,
            seed=entry_seed,
        ))
    return records


SWEEP_FIELDS = (
    "p",
    "trace_distance_exact",
    "trace_distance_tomo",
    "fidelity_exact",
    "fidelity_tomo",
    "fidelity_bound",
    "raw_min_eigenvalue",
)


def sweep_rows(records: Sequence[ExperimentRecord]) -> list[dict[str, float]]:
    """Records flattened to the sweep serialization schema."""
    return [
        {
            "p": r.p,
            "trace_distance_exact": r.trace_distance_to_mixed,
            "trace_distance_tomo": r.trace_distance_tomo,
            "fidelity_exact": r.fidelity_to_mixed,
            "fidelity_tomo": r.fidelity_tomo,
            "fidelity_bound": r.fidelity_lower_bound,
            "raw_min_eigenvalue": r.raw_min_eigenvalue,
        }
        for r in records
    ]


def bleaching_check(tag: str, psi: StateVector) -> float:
    """Trace distance of the erased system from I/2 (should be 0)."""
    circuit = build_erasure_circuit(tag)
    out = run_statevector(circuit, psi.tensor(StateVector.ket("00")))
    system = partial_trace(out.to_density(), [0])
    return trace_distance(system, DensityMatrix.maximally_mixed(1))


def channel_identity_error(p: float) -> float:
    """Max entrywise gap between the dilated map and its Kraus form."""
    dilated = imperfect_channel_images(p)
    direct = depolarized_images(p)
    return max(float(np.abs(dilated[k] - direct[k]).max()) for k in dilated)


__all__ = [
    "VARIANT_TAGS",
    "RandomizerVariant",
    "build_randomizer",
    "build_erasure_circuit",
    "build_full_circuit",
    "build_imperfect_circuit",
    "default_input_gates",
    "default_input_state",
    "u3_prep_gate",
    "run_perfect",
    "run_sweep",
    "sweep_rows",
    "SWEEP_FIELDS",
    "DEFAULT_SWEEP_GRID",
    "DECODER_GATES",
    "PerfectResult",
    "ExperimentRecord",
    "imperfect_channel_images",
    "depolarized_images",
    "bleaching_check",
    "channel_identity_error",
]
