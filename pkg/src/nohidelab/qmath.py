"""Dense complex linear algebra and distance metrics for few-qubit states.

Index convention used everywhere in this package: qubit 0 is the most
significant bit of an amplitude or matrix index, so the basis ket
|b0 b1 ... b_{n-1}> sits at index b0*2^(n-1) + ... + b_{n-1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ATOL = 1e-10
# Eigenvalues in [-EIG_CLAMP, 0) are treated as roundoff and clamped to 0
# when taking matrix square roots; anything below is a genuine error.
EIG_CLAMP = 1e-9
# Positive eigenvalues below this are solver noise on a rank-deficient
# input; sqrt would amplify them to ~1e-8, so they are zeroed instead.
SQRT_FLOOR = 1e-13
JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PAULIS = {"I": I2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; the left factor is the more significant one."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def is_hermitian(m: np.ndarray, tol: float = ATOL) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and np.abs(m - m.conj().T).max() <= tol


def is_unitary(m: np.ndarray, tol: float = ATOL) -> bool:
    m = np.asarray(m)
    if m.shape[0] != m.shape[1]:
        return False
    return np.abs(m.conj().T @ m - np.eye(m.shape[0])).max() <= tol


def is_psd(m: np.ndarray, tol: float = ATOL) -> bool:
    if not is_hermitian(m, tol):
        return False
    eigenvalues, _ = hermitian_eig(m, tol=max(tol, ATOL))
    return eigenvalues[-1] >= -tol


def hermitian_eig(m: np.ndarray, tol: float = EIG_CLAMP) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted in
    descending order and eigenvectors as the columns of a unitary matrix,
    so that m = V diag(w) V^dagger.

    Raises ValueError for input that is not Hermitian within `tol`, naming
    the worst asymmetric entry.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    asym = np.abs(m - m.conj().T)
    worst = float(asym.max()) if m.size else 0.0
    if worst > tol:
        i, j = np.unravel_index(int(asym.argmax()), asym.shape)
        raise ValueError(
            f"matrix is not Hermitian: |m[{i},{j}] - conj(m[{j},{i}])| = {worst:.3e}"
        )

    a = (m + m.conj().T) / 2.0
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 1:
        return np.array([a[0, 0].real]), v

    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = float(np.linalg.norm(a[off_mask]))
        if off < JACOBI_OFF_TOL:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                tau = (a[q, q].real - a[p, p].real) / (2.0 * r)
                sign = 1.0 if tau >= 0 else -1.0
                t = sign / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # Right multiply by J, left multiply by J^dagger, where the
                # (p, q) block of J is [[c, s*phase], [-s*conj(phase), c]].
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * np.conj(phase) * col_q
                a[:, q] = s * phase * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * phase * row_q
                a[q, :] = s * np.conj(phase) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vc_p = v[:, p].copy()
                vc_q = v[:, q].copy()
                v[:, p] = c * vc_p - s * np.conj(phase) * vc_q
                v[:, q] = s * phase * vc_p + c * vc_q
    else:
        raise ArithmeticError("Jacobi eigensolver did not converge in 100 sweeps")

    w = np.diag(a).real.copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix.

    Eigenvalues in [-EIG_CLAMP, 0) are clamped to 0; anything more negative
    is rejected as nonphysical.
    """
    w, v = hermitian_eig(m)
    low = float(w.min())
    if low < -EIG_CLAMP:
        raise ValueError(f"matrix has negative eigenvalue {low:.3e} below clamp threshold")
    w = np.where(w < SQRT_FLOOR, 0.0, w)
    return v @ np.diag(np.sqrt(w)) @ v.conj().T


def proportionality(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> complex | None:
    """Scalar s with a = s*b within tol (relative), or None if no such s."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.shape != b.shape:
        return None
    nb = np.linalg.norm(b)
    na = np.linalg.norm(a)
    if nb == 0.0:
        return 1.0 + 0j if na == 0.0 else None
    s = complex(np.vdot(b, a) / np.vdot(b, b))
    if np.linalg.norm(a - s * b) <= tol * max(na, nb, 1.0):
        return s
    return None


def equal_up_to_global_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    s = proportionality(a, b, tol)
    return s is not None and abs(abs(s) - 1.0) <= tol


@dataclass(frozen=True)
class StateVector:
    """Pure state of an n-qubit register; qubit 0 is the index MSB."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape[0] != 2 ** self.num_qubits:
            raise ValueError(
                f"expected {2 ** self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got {amps.shape[0]}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"state vector norm {norm!r} differs from 1 beyond tolerance")

    @classmethod
    def ket(cls, bits: str) -> "StateVector":
        """Computational basis state |bits>, e.g. ket('010')."""
        n = len(bits)
        amps = np.zeros(2 ** n, dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(n, amps)

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex]) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(math.log2(amps.shape[0])))
        return cls(n, amps)

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(self.num_qubits + other.num_qubits,
                           np.kron(self.amplitudes, other.amplitudes))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state of an n-qubit register: Hermitian, unit trace, PSD."""

    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        dim = 2 ** self.num_qubits
        if m.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
        if not is_hermitian(m, ATOL):
            raise ValueError("density matrix is not Hermitian within tolerance")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > ATOL:
            raise ValueError(f"density matrix trace {tr!r} differs from 1 beyond tolerance")
        w, _ = hermitian_eig(m)
        if float(w.min()) < -EIG_CLAMP:
            raise ValueError(f"density matrix has negative eigenvalue {float(w.min()):.3e}")

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        return state.to_density()

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        dim = 2 ** num_qubits
        return cls(num_qubits, np.eye(dim, dtype=complex) / dim)

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def _require_same_dims(a: DensityMatrix, b: DensityMatrix) -> None:
    if a.num_qubits != b.num_qubits:
        raise ValueError(
            f"dimension mismatch: {a.num_qubits} qubits vs {b.num_qubits} qubits"
        )


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of a - b."""
    _require_same_dims(a, b)
    w, _ = hermitian_eig(a.matrix - b.matrix)
    return float(np.clip(0.5 * np.sum(np.abs(w)), 0.0, 1.0))


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity tr sqrt(sqrt(a) b sqrt(a)), in [0, 1]."""
    _require_same_dims(a, b)
    sa = matrix_sqrt_psd(a.matrix)
    inner = sa @ b.matrix @ sa
    w, _ = hermitian_eig((inner + inner.conj().T) / 2.0)
    w = np.where(w < SQRT_FLOOR, 0.0, w)
    return float(np.clip(np.sum(np.sqrt(w)), 0.0, 1.0))


def partial_trace_matrix(m: np.ndarray, num_qubits: int, keep: Sequence[int]) -> np.ndarray:
    """Partial trace of an arbitrary square operator over the dropped qubits.

    `keep` lists the qubits of the reduced operator in output order.
    """
    keep = list(keep)
    if len(set(keep)) != len(keep):
        raise ValueError(f"duplicate qubit index in keep list {keep}")
    for q in keep:
        if not 0 <= q < num_qubits:
            raise ValueError(f"qubit index {q} out of range for {num_qubits} qubits")
    m = np.asarray(m, dtype=complex)
    t = m.reshape([2] * (2 * num_qubits))
    remaining = list(range(num_qubits))
    for q in sorted(set(range(num_qubits)) - set(keep), reverse=True):
        j = remaining.index(q)
        k = len(remaining)
        t = np.trace(t, axis1=j, axis2=k + j)
        remaining.remove(q)
    perm = [remaining.index(q) for q in keep]
    k = len(keep)
    t = np.transpose(t, perm + [k + p for p in perm])
    return t.reshape(2 ** k, 2 ** k)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on `keep` (in the given order); trace is preserved."""
    reduced = partial_trace_matrix(rho.matrix, rho.num_qubits, keep)
    return DensityMatrix(len(list(keep)), reduced)
