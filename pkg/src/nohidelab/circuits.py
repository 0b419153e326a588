"""Circuit IR, text-format parser, and exact state/density simulators.

Text format (UTF-8, one statement per line):

    qubits N            header, required first statement
    h q | x q | y q | z q | s q | t q
    u3 theta phi lambda q      angles in decimal radians
    cx c t | ch c t            control first
    swap a b
    # comment to end of line; blank lines ignored

u3 follows the convention
U3(theta, phi, lam) = [[cos(t/2), -e^{i lam} sin(t/2)],
                       [e^{i phi} sin(t/2), e^{i(phi+lam)} cos(t/2)]].
"""
from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qmath import (
    ATOL,
    HADAMARD,
    I2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    StateVector,
    is_unitary,
)

GATE_ARITY = {
    "h": 1, "x": 1, "y": 1, "z": 1, "s": 1, "t": 1, "u3": 1,
    "cx": 2, "ch": 2, "swap": 2,
}
PARAM_COUNT = {"u3": 3}

_S = np.diag([1, 1j]).astype(complex)
_T = np.diag([1, cmath.exp(1j * math.pi / 4)]).astype(complex)
_CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_CH = np.block([[I2, np.zeros((2, 2))], [np.zeros((2, 2)), HADAMARD]]).astype(complex)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
_FIXED = {"h": HADAMARD, "x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z, "s": _S, "t": _T,
          "cx": _CX, "ch": _CH, "swap": _SWAP}


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, -cmath.exp(1j * lam) * s],
         [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c]],
        dtype=complex,
    )


@dataclass(frozen=True)
class Gate:
    """One gate application; for controlled kinds the control comes first."""

    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()
    matrix: np.ndarray | None = None  # payload for kind "unitary" only

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate qubit index in {self.kind} targets {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError(f"negative qubit index in targets {self.targets}")
        if self.kind == "unitary":
            if self.matrix is None:
                raise ValueError("unitary gate requires a matrix payload")
            m = np.asarray(self.matrix, dtype=complex)
            object.__setattr__(self, "matrix", m)
            dim = 2 ** len(self.targets)
            if m.shape != (dim, dim):
                raise ValueError(
                    f"unitary payload shape {m.shape} does not match {len(self.targets)} targets"
                )
            if not is_unitary(m, ATOL):
                raise ValueError("unitary payload is not unitary within tolerance")
            return
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise ValueError(
                f"gate {self.kind!r} expects {GATE_ARITY[self.kind]} targets, "
                f"got {len(self.targets)}"
            )
        want = PARAM_COUNT.get(self.kind, 0)
        if len(self.params) != want:
            raise ValueError(f"gate {self.kind!r} expects {want} parameters, got {len(self.params)}")

    def local_matrix(self) -> np.ndarray:
        if self.kind == "unitary":
            return self.matrix
        if self.kind == "u3":
            return u3_matrix(*self.params)
        return _FIXED[self.kind]


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        for g in self.gates:
            for t in g.targets:
                if t >= self.num_qubits:
                    raise ValueError(
                        f"gate {g.kind!r} touches qubit {t}, register has {self.num_qubits}"
                    )

    def extended(self, more: Iterable[Gate]) -> "Circuit":
        return Circuit(self.num_qubits, self.gates + tuple(more))


def _embed_matrix(u: np.ndarray, targets: Sequence[int], num_qubits: int) -> np.ndarray:
    """Embed a 2^k operator at the given qubits (qubit 0 = index MSB)."""
    k = len(targets)
    for t in targets:
        if not 0 <= t < num_qubits:
            raise ValueError(f"target {t} out of range for {num_qubits} qubits")
    full = np.zeros((2 ** num_qubits, 2 ** num_qubits), dtype=complex)
    shifts = [num_qubits - 1 - t for t in targets]
    for col in range(2 ** num_qubits):
        j = 0
        for sh in shifts:
            j = (j << 1) | ((col >> sh) & 1)
        base = col
        for sh in shifts:
            base &= ~(1 << sh)
        for i in range(2 ** k):
            row = base
            for t_idx, sh in enumerate(shifts):
                if (i >> (k - 1 - t_idx)) & 1:
                    row |= 1 << sh
            full[row, col] += u[i, j]
    return full


def gate_matrix(g: Gate, num_qubits: int) -> np.ndarray:
    """Full 2^n unitary embedding g at its targets."""
    return _embed_matrix(g.local_matrix(), g.targets, num_qubits)


def circuit_unitary(c: Circuit) -> np.ndarray:
    u = np.eye(2 ** c.num_qubits, dtype=complex)
    for g in c.gates:
        u = gate_matrix(g, c.num_qubits) @ u
    return u


def run_statevector(c: Circuit, input_state: StateVector) -> StateVector:
    """Apply the circuit's gates in sequence to a pure state."""
    if input_state.num_qubits != c.num_qubits:
        raise ValueError(
            f"dimension mismatch: circuit has {c.num_qubits} qubits, "
            f"state has {input_state.num_qubits}"
        )
    psi = input_state.amplitudes.copy()
    for g in c.gates:
        psi = gate_matrix(g, c.num_qubits) @ psi
    return StateVector(c.num_qubits, psi)


@dataclass(frozen=True)
class Channel:
    """Completely positive trace-preserving map as a list of Kraus operators."""

    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        object.__setattr__(self, "kraus_ops", ops)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        for k in ops:
            if k.shape != (dim, dim):
                raise ValueError("Kraus operators must share one square dimension")
        total = sum(k.conj().T @ k for k in ops)
        if np.abs(total - np.eye(dim)).max() > ATOL:
            raise ValueError("channel is not trace preserving: sum K^dag K != I")

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def num_qubits(self) -> int:
        return int(round(math.log2(self.dim)))


def depolarizing_channel(p: float) -> Channel:
    """Single-qubit map mixing the input with I/2 at weight p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing weight p={p!r} outside [0, 1]")
    weights = [(1.0 - 0.75 * p, I2), (p / 4.0, PAULI_X), (p / 4.0, PAULI_Y), (p / 4.0, PAULI_Z)]
    ops = [math.sqrt(w) * op for w, op in weights if w > 0.0]
    return Channel(tuple(ops))


def run_density(
    c: Circuit,
    channels: Sequence[tuple[Channel, Sequence[int], int]],
    input_state: DensityMatrix,
) -> DensityMatrix:
    """Run the circuit on a mixed state, interleaving Kraus channels.

    Each channel entry is (channel, qubit indices, position); position i in
    [0, len(gates)] applies the channel just before gate i (or after the
    last gate when i == len(gates)).
    """
    if input_state.num_qubits != c.num_qubits:
        raise ValueError(
            f"dimension mismatch: circuit has {c.num_qubits} qubits, "
            f"state has {input_state.num_qubits}"
        )
    by_position: dict[int, list[tuple[Channel, tuple[int, ...]]]] = {}
    for chan, qubits, position in channels:
        qubits = tuple(int(q) for q in qubits)
        if not 0 <= position <= len(c.gates):
            raise ValueError(f"channel position {position} outside gate-list bounds")
        if chan.num_qubits != len(qubits):
            raise ValueError("channel dimension does not match its qubit list")
        for q in qubits:
            if not 0 <= q < c.num_qubits:
                raise ValueError(f"channel qubit {q} out of range")
        by_position.setdefault(position, []).append((chan, qubits))

    rho = input_state.matrix.copy()
    for i in range(len(c.gates) + 1):
        for chan, qubits in by_position.get(i, ()):
            ks = [_embed_matrix(k, qubits, c.num_qubits) for k in chan.kraus_ops]
            rho = sum(k @ rho @ k.conj().T for k in ks)
        if i < len(c.gates):
            u = gate_matrix(c.gates[i], c.num_qubits)
            rho = u @ rho @ u.conj().T
    return DensityMatrix(c.num_qubits, rho)


class CircuitParseError(ValueError):
    """Parse failure with 1-based line and column of the offending token."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_TOKEN = re.compile(r"\S+")


def _tokenize(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("#")
        if cut >= 0:
            raw = raw[:cut]
        toks = [(m.group(0), m.start() + 1) for m in _TOKEN.finditer(raw)]
        if toks:
            yield lineno, toks


def _parse_index(tok: str, col: int, lineno: int, num_qubits: int) -> int:
    try:
        value = int(tok, 10)
    except ValueError:
        raise CircuitParseError(f"expected qubit index, got {tok!r}", lineno, col) from None
    if not 0 <= value < num_qubits:
        raise CircuitParseError(
            f"index out of range: qubit {value} in a {num_qubits}-qubit register",
            lineno, col,
        )
    return value


def _parse_angle(tok: str, col: int, lineno: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise CircuitParseError(f"malformed angle literal {tok!r}", lineno, col) from None
    if not math.isfinite(value):
        raise CircuitParseError(f"malformed angle literal {tok!r}", lineno, col)
    return value


def parse_circuit(text: str) -> Circuit:
    """Parse the circuit text format; diagnostics carry line and column."""
    lines = list(_tokenize(text))
    if not lines:
        raise CircuitParseError("empty input: expected a 'qubits N' header", 1, 1)
    lineno, toks = lines[0]
    if toks[0][0] != "qubits":
        raise CircuitParseError(
            f"expected 'qubits N' header, got {toks[0][0]!r}", lineno, toks[0][1]
        )
    if len(toks) != 2:
        col = toks[1][1] if len(toks) > 2 else toks[0][1]
        raise CircuitParseError("header must be exactly 'qubits N'", lineno, col)
    try:
        num_qubits = int(toks[1][0], 10)
    except ValueError:
        raise CircuitParseError(
            f"expected qubit count, got {toks[1][0]!r}", lineno, toks[1][1]
        ) from None
    if num_qubits < 1:
        raise CircuitParseError("qubit count must be at least 1", lineno, toks[1][1])

    gates: list[Gate] = []
    for lineno, toks in lines[1:]:
        mnemonic, col0 = toks[0]
        if mnemonic not in GATE_ARITY:
            raise CircuitParseError(f"unknown mnemonic {mnemonic!r}", lineno, col0)
        n_angles = PARAM_COUNT.get(mnemonic, 0)
        n_idx = GATE_ARITY[mnemonic]
        args = toks[1:]
        if len(args) != n_angles + n_idx:
            where = args[-1][1] if len(args) > n_angles + n_idx else col0
            raise CircuitParseError(
                f"gate {mnemonic!r} expects {n_angles + n_idx} arguments "
                f"({n_angles} angles, {n_idx} qubits), got {len(args)}",
                lineno, where,
            )
        params = tuple(
            _parse_angle(tok, col, lineno) for tok, col in args[:n_angles]
        )
        targets = tuple(
            _parse_index(tok, col, lineno, num_qubits) for tok, col in args[n_angles:]
        )
        try:
            gates.append(Gate(mnemonic, targets, params))
        except ValueError as exc:
            raise CircuitParseError(str(exc), lineno, col0) from None
    return Circuit(num_qubits, tuple(gates))


def render_circuit(c: Circuit) -> str:
    """Inverse of parse_circuit for the text-representable gate kinds."""
    out = [f"qubits {c.num_qubits}"]
    for g in c.gates:
        if g.kind == "unitary":
            raise ValueError("unitary gates have no text form")
        parts = [g.kind] + [repr(p) for p in g.params] + [str(t) for t in g.targets]
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"
