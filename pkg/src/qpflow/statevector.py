"""Statevector simulator over a clock / vector / ancilla register layout.

Conventions, fixed package-wide:

* Qubits are numbered 0..n-1 with qubit 0 the MOST significant bit of the
  flat amplitude index. The clock register occupies qubits [0, n_clock),
  the vector register the next n_vector qubits, and the single ancilla is
  the last (least significant) qubit.
* Reading the clock register as an integer therefore gives the binary
  eigenvalue estimate directly, most significant bit first.
* Operations are functional: they return new StateVector values and never
  mutate their inputs, so states are safe to share across callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_ATOL = 1e-10
UNITARY_ATOL = 1e-10
ZERO_PROBABILITY = 1e-12


class PostSelectionError(ValueError):
    """Post-selected outcome has (near-)zero probability.

    Carries the offending probability as ``probability``.
    """

    def __init__(self, message: str, probability: float):
        super().__init__(message)
        self.probability = probability


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit counts for the clock, vector and ancilla registers."""

    n_clock: int
    n_vector: int
    n_ancilla: int = 1

    def __post_init__(self):
        if self.n_clock < 1 or self.n_vector < 1:
            raise ValueError("clock and vector registers need at least one qubit each")
        if self.n_ancilla != 1:
            raise ValueError("layout uses exactly one ancilla qubit")

    @property
    def n_qubits(self) -> int:
        return self.n_clock + self.n_vector + self.n_ancilla

    @property
    def clock_qubits(self) -> range:
        return range(self.n_clock)

    @property
    def vector_qubits(self) -> range:
        return range(self.n_clock, self.n_clock + self.n_vector)

    @property
    def ancilla_qubit(self) -> int:
        return self.n_qubits - 1

    @property
    def clock_dim(self) -> int:
        return 1 << self.n_clock

    @property
    def vector_dim(self) -> int:
        return 1 << self.n_vector


@dataclass
class StateVector:
    """Amplitudes over the full register, unit norm after every gate."""

    layout: RegisterLayout
    amplitudes: np.ndarray

    def tensor(self) -> np.ndarray:
        """View shaped (clock_dim, vector_dim, 2); shares memory."""
        lay = self.layout
        return self.amplitudes.reshape(lay.clock_dim, lay.vector_dim, 2)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def clock_probabilities(self) -> np.ndarray:
        """Probability of each clock-register value, length clock_dim."""
        t = self.tensor()
        return np.sum(np.abs(t) ** 2, axis=(1, 2))


@dataclass(frozen=True)
class GateOp:
    """A single gate: kind plus whichever parameters that kind uses."""

    kind: str
    targets: tuple[int, ...]
    control: int | None = None
    angle: float | None = None
    matrix: np.ndarray | None = None
    power: int = 1

    def __post_init__(self):
        if self.kind == "controlled_unitary":
            if self.matrix is None:
                raise ValueError("controlled_unitary needs a matrix")
            if self.power < 1:
                raise ValueError("unitary power must be a positive integer")
            dim = 1 << len(self.targets)
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (dim, dim):
                raise ValueError(
                    f"unitary block is {m.shape} but targets span dimension {dim}"
                )
            if np.abs(m.conj().T @ m - np.eye(dim)).max() > UNITARY_ATOL:
                raise ValueError("controlled_unitary block is not unitary")


def hadamard(target: int) -> GateOp:
    return GateOp("hadamard", (target,))


def pauli_x(target: int) -> GateOp:
    return GateOp("pauli_x", (target,))


def phase(target: int, angle: float) -> GateOp:
    return GateOp("phase", (target,), angle=angle)


def controlled_phase(control: int, target: int, angle: float) -> GateOp:
    return GateOp("phase", (target,), control=control, angle=angle)


def swap(a: int, b: int) -> GateOp:
    return GateOp("swap", (a, b))


def controlled_ry(control: int, target: int, angle: float) -> GateOp:
    return GateOp("ry", (target,), control=control, angle=angle)


def controlled_unitary(
    control: int, targets: tuple[int, ...], matrix: np.ndarray, power: int = 1
) -> GateOp:
    return GateOp(
        "controlled_unitary", tuple(targets), control=control, matrix=matrix, power=power
    )


def init_state(layout: RegisterLayout, vector_amplitudes: np.ndarray) -> StateVector:
    """|0..0>_clock (x) |psi>_vector (x) |0>_ancilla from given amplitudes.

    The caller normalizes; a non-unit-norm input is rejected rather than
    silently rescaled.
    """
    psi = np.asarray(vector_amplitudes, dtype=complex)
    if psi.shape != (layout.vector_dim,):
        raise ValueError(
            f"vector amplitudes have length {psi.shape}, expected ({layout.vector_dim},)"
        )
    nrm = np.linalg.norm(psi)
    if nrm == 0.0:
        raise ValueError("vector amplitudes have zero norm")
    if abs(nrm - 1.0) > NORM_ATOL:
        raise ValueError(f"vector amplitudes must have unit norm, got {nrm:.12g}")
    amps = np.zeros(1 << layout.n_qubits, dtype=complex)
    amps.reshape(layout.clock_dim, layout.vector_dim, 2)[0, :, 0] = psi
    return StateVector(layout, amps)


def _check_qubit(layout: RegisterLayout, q: int):
    if not 0 <= q < layout.n_qubits:
        raise ValueError(f"qubit index {q} out of range for {layout.n_qubits} qubits")


def _apply_block(amps: np.ndarray, n: int, targets: tuple[int, ...], u: np.ndarray) -> np.ndarray:
    """Apply unitary ``u`` on the listed target qubits (functional)."""
    k = len(targets)
    t = amps.reshape((2,) * n)
    s = np.moveaxis(t, targets, range(k))
    out = (u @ s.reshape(1 << k, -1)).reshape(s.shape)
    out = np.moveaxis(out, range(k), targets)
    return np.ascontiguousarray(out).reshape(-1)


def _apply_controlled_block(
    amps: np.ndarray, n: int, control: int, targets: tuple[int, ...], u: np.ndarray
) -> np.ndarray:
    """Apply ``u`` on targets within the control-qubit-is-1 subspace."""
    t = np.moveaxis(amps.reshape((2,) * n), control, 0)
    sub_targets = tuple(q if q < control else q - 1 for q in targets)
    branch0 = np.ascontiguousarray(t[0])
    branch1 = _apply_block(
        np.ascontiguousarray(t[1]).reshape(-1), n - 1, sub_targets, u
    ).reshape((2,) * (n - 1))
    out = np.moveaxis(np.stack([branch0, branch1]), 0, control)
    return np.ascontiguousarray(out).reshape(-1)


_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def _ry(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _phase(angle: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, np.exp(1j * angle)]], dtype=complex)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply one gate; linear in the amplitudes and norm preserving."""
    lay = state.layout
    for q in gate.targets:
        _check_qubit(lay, q)
    if gate.control is not None:
        _check_qubit(lay, gate.control)
        if gate.control in gate.targets:
            raise ValueError(f"control qubit {gate.control} is also a target")
    if len(set(gate.targets)) != len(gate.targets):
        raise ValueError(f"duplicate target qubits {gate.targets}")

    n = lay.n_qubits
    amps = state.amplitudes
    if gate.kind == "hadamard":
        u = _H
    elif gate.kind == "pauli_x":
        u = _X
    elif gate.kind == "phase":
        u = _phase(gate.angle)
    elif gate.kind == "ry":
        u = _ry(gate.angle)
    elif gate.kind == "swap":
        a, b = gate.targets
        t = amps.reshape((2,) * n)
        return StateVector(lay, np.ascontiguousarray(np.swapaxes(t, a, b)).reshape(-1))
    elif gate.kind == "controlled_unitary":
        u = np.asarray(gate.matrix, dtype=complex)
        if gate.power != 1:
            u = np.linalg.matrix_power(u, gate.power)
        return StateVector(lay, _apply_controlled_block(amps, n, gate.control, gate.targets, u))
    else:
        raise ValueError(f"unknown gate kind {gate.kind!r}")

    (target,) = gate.targets
    if gate.control is None:
        out = _apply_block(amps, n, (target,), u)
    else:
        out = _apply_controlled_block(amps, n, gate.control, (target,), u)
    return StateVector(lay, out)


def _fourier_kernel(m: int, sign: float) -> np.ndarray:
    idx = np.arange(m)
    return np.exp(sign * 2j * np.pi * np.outer(idx, idx) / m) / math.sqrt(m)


def apply_qft(state: StateVector) -> StateVector:
    """Forward discrete Fourier transform on the clock register index."""
    m = state.layout.clock_dim
    block = state.amplitudes.reshape(m, -1)
    return StateVector(state.layout, (_fourier_kernel(m, +1.0) @ block).reshape(-1))


def apply_inverse_qft(state: StateVector) -> StateVector:
    """Inverse discrete Fourier transform on the clock register index."""
    m = state.layout.clock_dim
    block = state.amplitudes.reshape(m, -1)
    return StateVector(state.layout, (_fourier_kernel(m, -1.0) @ block).reshape(-1))


def measure_qubit(
    state: StateVector,
    qubit: int,
    *,
    post_select: int | None = None,
    seed: int | None = None,
) -> tuple[int, float, StateVector]:
    """Measure one qubit; returns (outcome, probability, collapsed state).

    ``post_select`` forces the outcome deterministically (the default mode
    for the ancilla). Without it a sample is drawn, reproducibly when a
    seed is given.
    """
    lay = state.layout
    _check_qubit(lay, qubit)
    t = np.moveaxis(state.amplitudes.reshape((2,) * lay.n_qubits), qubit, 0)
    p1 = float(np.sum(np.abs(t[1]) ** 2))
    probs = (1.0 - p1, p1)

    if post_select is not None:
        if post_select not in (0, 1):
            raise ValueError("post-selected outcome must be 0 or 1")
        outcome = post_select
        if probs[outcome] <= ZERO_PROBABILITY:
            raise PostSelectionError(
                f"post-selected outcome {outcome} on qubit {qubit} has probability "
                f"{probs[outcome]:.3e}",
                probability=probs[outcome],
            )
    else:
        rng = np.random.default_rng(seed)
        outcome = int(rng.random() < p1)

    collapsed = np.zeros_like(t)
    collapsed[outcome] = t[outcome] / math.sqrt(probs[outcome])
    amps = np.ascontiguousarray(np.moveaxis(collapsed, 0, qubit)).reshape(-1)
    return outcome, probs[outcome], StateVector(lay, amps)


def extract_register(
    state: StateVector, *, clock_value: int = 0, ancilla_value: int = 1
) -> tuple[np.ndarray, float]:
    """Vector-register amplitudes with clock and ancilla bits fixed.

    Returns the renormalized 2^n_vector amplitudes and the norm of the
    raw slice (the amplitude weight sitting in that slice).
    """
    t = state.tensor()
    if not 0 <= clock_value < state.layout.clock_dim:
        raise ValueError(f"clock value {clock_value} out of range")
    raw = t[clock_value, :, ancilla_value]
    nrm = float(np.linalg.norm(raw))
    if nrm <= math.sqrt(ZERO_PROBABILITY):
        raise ValueError(
            f"slice clock={clock_value}, ancilla={ancilla_value} has zero norm ({nrm:.3e})"
        )
    return raw / nrm, nrm
