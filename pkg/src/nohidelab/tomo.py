"""Shot-sampled measurement, Pauli estimation, and linear-inversion tomography.

Randomness contract: measure_shots draws from a PCG64 stream keyed by
(seed, basis), where the basis string maps to a SeedSequence spawn key via
X -> 0, Y -> 1, Z -> 2 per qubit. The same (state, basis, shots, seed)
therefore reproduces counts bit-exactly, and distinct bases of one
tomography run consume independent substreams of the same seed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .qmath import (
    HADAMARD,
    I2,
    PAULIS,
    DensityMatrix,
    fidelity,
    hermitian_eig,
    is_hermitian,
    kron,
    partial_trace,
    trace_distance,
)

BASIS_CHARS = "XYZ"
_S_DAGGER = np.diag([1, -1j]).astype(complex)
# Circuit-order rotations into the measurement basis: X applies H, Y applies
# S^dagger then H, Z measures directly.
_ROTATION = {"X": HADAMARD, "Y": HADAMARD @ _S_DAGGER, "Z": I2}


@dataclass(frozen=True)
class ShotCounts:
    """Outcome histogram of one measurement basis."""

    basis: str
    shots: int
    counts: dict[str, int]

    def __post_init__(self):
        if any(ch not in BASIS_CHARS for ch in self.basis) or not self.basis:
            raise ValueError(f"invalid basis string {self.basis!r}")
        n = len(self.basis)
        for outcome in self.counts:
            if len(outcome) != n or any(ch not in "01" for ch in outcome):
                raise ValueError(f"outcome {outcome!r} does not match basis {self.basis!r}")
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to the shot total")

    def to_json_dict(self) -> dict:
        return {
            "basis": self.basis,
            "shots": self.shots,
            "counts": {k: self.counts[k] for k in sorted(self.counts)},
        }


def _basis_rotation(basis: str) -> np.ndarray:
    rot = _ROTATION[basis[0]]
    for ch in basis[1:]:
        rot = kron(rot, _ROTATION[ch])
    return rot


def born_probabilities(state: DensityMatrix, basis: str) -> np.ndarray:
    """Outcome probabilities after rotating each qubit into `basis`."""
    if len(basis) != state.num_qubits:
        raise ValueError(
            f"basis {basis!r} does not match a {state.num_qubits}-qubit state"
        )
    for ch in basis:
        if ch not in BASIS_CHARS:
            raise ValueError(f"invalid basis character {ch!r}")
    rot = _basis_rotation(basis)
    probs = np.real(np.diag(rot @ state.matrix @ rot.conj().T))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _rng_for(seed: int, basis: str) -> np.random.Generator:
    key = tuple(BASIS_CHARS.index(ch) for ch in basis)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def measure_shots(state: DensityMatrix, basis: str, shots: int, seed: int) -> ShotCounts:
    """Sample i.i.d. outcomes in the given Pauli basis; seed-deterministic."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = born_probabilities(state, basis)
    rng = _rng_for(seed, basis)
    drawn = rng.multinomial(shots, probs)
    n = state.num_qubits
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(drawn) if c > 0}
    return ShotCounts(basis, shots, counts)


def expectation(counts: ShotCounts) -> float:
    """Parity estimator over all measured qubits, in [-1, 1]."""
    if counts.shots == 0:
        raise ValueError("cannot estimate an expectation from zero shots")
    total = 0
    for outcome, c in counts.counts.items():
        total += -c if outcome.count("1") % 2 else c
    return total / counts.shots


def pauli_strings(num_qubits: int) -> list[str]:
    """All non-identity Pauli strings, in lexicographic product order."""
    return [
        "".join(p) for p in itertools.product("IXYZ", repeat=num_qubits)
        if set(p) != {"I"}
    ]


def pauli_matrix(pauli: str) -> np.ndarray:
    m = PAULIS[pauli[0]]
    for ch in pauli[1:]:
        m = kron(m, PAULIS[ch])
    return m


def exact_expectations(state: DensityMatrix) -> dict[str, float]:
    return {
        p: float(np.trace(pauli_matrix(p) @ state.matrix).real)
        for p in pauli_strings(state.num_qubits)
    }


def estimate_expectations(
    counts_by_basis: Mapping[str, ShotCounts], num_qubits: int
) -> dict[str, float]:
    """Estimate every non-identity Pauli from full-basis shot counts.

    A Pauli containing I reuses the measured basis with I replaced by Z and
    takes the parity only over its non-identity positions.
    """
    out: dict[str, float] = {}
    for pauli in pauli_strings(num_qubits):
        meas = pauli.replace("I", "Z")
        sc = counts_by_basis[meas]
        positions = [i for i, ch in enumerate(pauli) if ch != "I"]
        total = 0
        for outcome, c in sc.counts.items():
            parity = sum(outcome[i] == "1" for i in positions) % 2
            total += -c if parity else c
        out[pauli] = total / sc.shots
    return out


@dataclass(frozen=True)
class TomogramRaw:
    """Linear-inversion reconstruction; Hermitian and unit trace, PSD not required."""

    matrix: np.ndarray
    min_eigenvalue: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if not is_hermitian(m, 1e-9):
            raise ValueError("raw tomogram is not Hermitian within tolerance")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"raw tomogram trace {tr!r} differs from 1")

    @property
    def num_qubits(self) -> int:
        return int(round(math.log2(self.matrix.shape[0])))


def reconstruct(expectations: Mapping[str, float], num_qubits: int) -> TomogramRaw:
    """Linear inversion rho = (I + sum <P> P) / 2^n from Pauli expectations."""
    if num_qubits not in (1, 2):
        raise ValueError(f"reconstruction supports 1 or 2 qubits, got {num_qubits}")
    dim = 2 ** num_qubits
    rho = np.eye(dim, dtype=complex)
    for pauli in pauli_strings(num_qubits):
        if pauli not in expectations:
            raise ValueError(f"missing expectation for Pauli {pauli!r}")
        rho = rho + expectations[pauli] * pauli_matrix(pauli)
    rho /= dim
    w, _ = hermitian_eig(rho)
    return TomogramRaw(rho, float(w[-1]))


def project_physical(raw: TomogramRaw) -> DensityMatrix:
    """Closest PSD unit-trace matrix in Frobenius norm.

    Eigenvalue truncation: walk the spectrum from the most negative value,
    zero it, and spread the deficit uniformly over the eigenvalues still in
    play; stop once the smallest survivor stays nonnegative.
    """
    w, v = hermitian_eig(raw.matrix)  # descending
    d = len(w)
    out = np.zeros(d)
    acc = 0.0
    for i in range(d - 1, -1, -1):
        if w[i] + acc / (i + 1) < 0.0:
            acc += w[i]
            out[i] = 0.0
        else:
            out[: i + 1] = w[: i + 1] + acc / (i + 1)
            break
    fixed = v @ np.diag(out.astype(complex)) @ v.conj().T
    fixed = (fixed + fixed.conj().T) / 2.0
    return DensityMatrix(raw.num_qubits, fixed)


class TomoResult(NamedTuple):
    raw: TomogramRaw
    physical: DensityMatrix
    fidelity: float


def tomo_pipeline(
    state: DensityMatrix,
    qubits: Sequence[int],
    shots: int | None,
    seed: int = 0,
) -> TomoResult:
    """Measure, reconstruct, and project the reduced state on `qubits`.

    shots=None is the exact mode: sampling is bypassed and the exact Pauli
    expectations feed the reconstruction directly.
    """
    qubits = list(qubits)
    if not 1 <= len(qubits) <= 2:
        raise ValueError("tomography supports 1 or 2 qubits")
    reduced = partial_trace(state, qubits)
    n = reduced.num_qubits
    if shots is None:
        expectations = exact_expectations(reduced)
    else:
        counts_by_basis = {
            "".join(b): measure_shots(reduced, "".join(b), shots, seed)
            for b in itertools.product(BASIS_CHARS, repeat=n)
        }
        expectations = estimate_expectations(counts_by_basis, n)
    raw = reconstruct(expectations, n)
    physical = project_physical(raw)
    return TomoResult(raw, physical, fidelity(physical, reduced))


def report_dict(result: TomoResult, target: DensityMatrix) -> dict:
    """JSON-ready tomography report against a target state."""
    phys = result.physical
    return {
        "raw_min_eigenvalue": result.raw.min_eigenvalue,
        "fidelity": fidelity(phys, target),
        "trace_distance": trace_distance(phys, target),
        "matrix_re": [[float(x) for x in row] for row in phys.matrix.real],
        "matrix_im": [[float(x) for x in row] for row in phys.matrix.imag],
    }
