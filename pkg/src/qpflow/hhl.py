"""HHL linear-system solver on the statevector simulator.

Pipeline for a Hermitian positive-definite system B x = b:

1. prepare_system: pad B to a power-of-two dimension, scale its spectrum
   into the clock register's integer range, cache the controlled-evolution
   powers e^{iBt 2^k}, and fix the rotation constant C. Done once per
   matrix; the prepared system is reused across solves.
2. solve: load |b>, run phase estimation, rotate the ancilla by arcsin(C/m)
   per clock value m, undo phase estimation, post-select the ancilla on
   |1>, read out the vector register, and de-normalize using the known
   ||b|| and the scaling factor.

Eigenvalue scaling prefers an evolution time that lands every eigenvalue
on (or near) a clock integer, falling back to a margin rule that places
the largest eigenvalue just below the top of the clock range.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from . import linalg, statevector as sv

# Scaled eigenvalues within EXACT_ATOL of an integer make phase estimation
# exact to machine precision; within SNAP_ATOL the encoding error is far
# below the clock register's intrinsic resolution, so such a scaling is
# preferred over the generic margin rule when the spectrum permits it.
EXACT_ATOL = 1e-9
SNAP_ATOL = 1e-2
SUPPORT_PROBABILITY = 1e-12


class PrecisionWarning(UserWarning):
    """Spectrum cannot be fully resolved by the configured clock register."""


@dataclass(frozen=True)
class HHLConfig:
    """Tuning knobs for the solver.

    rotation_constant=None selects C automatically: the smallest encoded
    eigenvalue when the encoding is exact, otherwise the smallest clock
    value that can carry solution weight.
    """

    n_clock: int = 4
    rotation_constant: float | None = None
    eigenvalue_margin: float = 0.95
    post_select: bool = True

    def __post_init__(self):
        if self.n_clock < 1:
            raise ValueError("n_clock must be at least 1")
        if not 0.0 < self.eigenvalue_margin < 1.0:
            raise ValueError("eigenvalue_margin must lie in (0, 1)")
        if self.rotation_constant is not None and self.rotation_constant <= 0.0:
            raise ValueError("explicit rotation constant must be positive")


@dataclass(frozen=True)
class PreparedSystem:
    """Everything solve() needs, computed once per matrix."""

    matrix: np.ndarray
    padded_matrix: np.ndarray
    layout: sv.RegisterLayout
    config: HHLConfig
    time_step: float
    scale: float  # encoded eigenvalue = scale * true eigenvalue
    unitary_powers: tuple[np.ndarray, ...]  # e^{iBt 2^k}, k = 0..n_clock-1
    eigenvalues: np.ndarray
    encoded_eigenvalues: np.ndarray
    rotation_constant: float
    exact_encoding: bool
    warning: str | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class HHLSolution:
    solution: np.ndarray
    success_probability: float
    recovered_norm: float
    fidelity_vs_classical: float | None = None
    clock_leakage: float = 0.0


def _choose_scale(
    eigenvalues: np.ndarray, config: HHLConfig
) -> tuple[float, bool, str | None]:
    """Pick the encoded-units scale s so encoded eigenvalues fit [1, M-1].

    Tries integer landings first (strict, then snapped within SNAP_ATOL),
    then the margin rule s = margin*(M-1)/lambda_max, raising the scale when
    that would push the smallest eigenvalue below 1. Returns (scale,
    exact_encoding, warning message or None).
    """
    m_top = (1 << config.n_clock) - 1
    lam_min, lam_max = eigenvalues[0], eigenvalues[-1]
    target = config.eigenvalue_margin * m_top

    for atol in (EXACT_ATOL, SNAP_ATOL):
        for m in range(int(math.floor(target)), 0, -1):
            s = m / lam_max
            enc = eigenvalues * s
            nearest = np.round(enc)
            if np.all(nearest >= 1) and np.all(np.abs(enc - nearest) <= atol):
                return s, bool(atol == EXACT_ATOL), None

    ratio = lam_max / lam_min
    s = target / lam_max
    if lam_min * s >= 1.0:
        return s, False, None
    if ratio <= m_top:
        return 1.0 / lam_min, False, None
    msg = (
        f"eigenvalue spread {ratio:.3g} exceeds clock range 2^{config.n_clock}-1={m_top}; "
        "eigenvalues cannot all be distinctly encoded"
    )
    _warnings.warn(msg, PrecisionWarning, stacklevel=3)
    return s, False, msg


def prepare_system(b_matrix: np.ndarray, config: HHLConfig | None = None) -> PreparedSystem:
    """Validate, pad, scale and cache the evolution operators for B.

    B must be Hermitian positive definite. The padding block is the
    identity and never receives amplitude, so the spectrum scaling uses
    B's own eigenvalues only.
    """
    config = config or HHLConfig()
    b_matrix = linalg.validate_hermitian(b_matrix, "B")
    dec = linalg.hermitian_eigendecomposition(b_matrix)
    bad = dec.eigenvalues[dec.eigenvalues <= 0.0]
    if bad.size:
        raise ValueError(
            "B must be positive definite; offending eigenvalue(s): "
            + ", ".join(f"{v:.6g}" for v in bad)
        )

    n = b_matrix.shape[0]
    n_vector = max(1, math.ceil(math.log2(n)))
    dim = 1 << n_vector
    padded = np.eye(dim, dtype=complex)
    padded[:n, :n] = b_matrix

    scale, exact, warning = _choose_scale(dec.eigenvalues, config)
    m_dim = 1 << config.n_clock
    t = 2.0 * math.pi * scale / m_dim

    pad_dec = linalg.hermitian_eigendecomposition(padded)
    q = pad_dec.eigenvectors
    powers = tuple(
        (q * np.exp(1j * pad_dec.eigenvalues * t * (1 << k))) @ q.conj().T
        for k in range(config.n_clock)
    )

    encoded = dec.eigenvalues * scale
    if config.rotation_constant is not None:
        c = config.rotation_constant
        if c > encoded[0] + EXACT_ATOL:
            raise ValueError(
                f"rotation constant {c:.6g} exceeds smallest encoded eigenvalue "
                f"{encoded[0]:.6g}"
            )
    else:
        c = float(encoded[0]) if exact else min(1.0, float(encoded[0]))

    return PreparedSystem(
        matrix=b_matrix,
        padded_matrix=padded,
        layout=sv.RegisterLayout(config.n_clock, n_vector),
        config=config,
        time_step=t,
        scale=scale,
        unitary_powers=powers,
        eigenvalues=dec.eigenvalues,
        encoded_eigenvalues=encoded,
        rotation_constant=c,
        exact_encoding=exact,
        warning=warning,
    )


def run_qpe(prepared: PreparedSystem, state: sv.StateVector) -> sv.StateVector:
    """Phase estimation: entangle clock values with the eigencomponents.

    Clock qubit k controls the evolution raised to 2^(n_clock-1-k), so the
    clock integer (qubit 0 = most significant) reads the encoded eigenvalue.
    """
    lay = state.layout
    nc = lay.n_clock
    probs = state.clock_probabilities()
    if 1.0 - probs[0] > sv.NORM_ATOL:
        raise ValueError("clock register must start in |0...0>")
    targets = tuple(lay.vector_qubits)
    for k in range(nc):
        state = sv.apply_gate(state, sv.hadamard(k))
    for k in range(nc):
        u = prepared.unitary_powers[nc - 1 - k]
        state = sv.apply_gate(state, sv.controlled_unitary(k, targets, u))
    return sv.apply_inverse_qft(state)


def run_inverse_qpe(prepared: PreparedSystem, state: sv.StateVector) -> sv.StateVector:
    """Exact adjoint of run_qpe; disentangles the clock back to |0...0>."""
    lay = state.layout
    nc = lay.n_clock
    targets = tuple(lay.vector_qubits)
    state = sv.apply_qft(state)
    for k in reversed(range(nc)):
        u = prepared.unitary_powers[nc - 1 - k].conj().T
        state = sv.apply_gate(state, sv.controlled_unitary(k, targets, u))
    for k in reversed(range(nc)):
        state = sv.apply_gate(state, sv.hadamard(k))
    return state


def apply_reciprocal_rotation(
    state: sv.StateVector, prepared: PreparedSystem
) -> sv.StateVector:
    """Rotate the ancilla by sin(theta/2) = C/m for each clock value m >= 1.

    Clock value 0 is left untouched (prepare_system guarantees it never
    carries solution weight). Raises when C exceeds the smallest clock
    value that actually holds amplitude, since C/m > 1 is not a rotation.
    """
    c = prepared.rotation_constant
    probs = state.clock_probabilities()
    supported = np.flatnonzero(probs[1:] > SUPPORT_PROBABILITY) + 1
    if supported.size and c > supported[0] + EXACT_ATOL:
        raise ValueError(
            f"rotation constant {c:.6g} exceeds smallest populated clock value "
            f"{supported[0]} (amplitude C/m would exceed 1)"
        )
    t = state.tensor().copy()
    for m in range(1, state.layout.clock_dim):
        if c > m:
            continue  # unpopulated by the check above; leave the branch alone
        sin_half = c / m
        cos_half = math.sqrt(1.0 - sin_half * sin_half)
        a0 = t[m, :, 0].copy()
        a1 = t[m, :, 1].copy()
        t[m, :, 0] = cos_half * a0 - sin_half * a1
        t[m, :, 1] = sin_half * a0 + cos_half * a1
    return sv.StateVector(state.layout, t.reshape(-1))


def clock_leakage(state: sv.StateVector) -> float:
    """Probability mass with the clock register outside |0...0>."""
    probs = state.clock_probabilities()
    return float(probs[1:].sum())


def solve(
    prepared: PreparedSystem,
    b: np.ndarray,
    *,
    diagnostics: bool = True,
    seed: int | None = None,
) -> HHLSolution:
    """Solve B x = b through the full circuit and de-normalize the readout.

    The returned solution satisfies B x ~ b up to the encoding precision;
    when ``diagnostics`` is set the fidelity against the direct classical
    solve is attached. With config.post_select=False the ancilla is sampled
    (repeat-until-success, reproducible via ``seed``) instead of being
    post-selected deterministically; the accepted state is identical.
    """
    b = np.asarray(b, dtype=complex)
    n = prepared.dimension
    if b.shape != (n,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({n},)")
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        raise ValueError("right-hand side is zero")

    lay = prepared.layout
    padded_b = np.zeros(lay.vector_dim, dtype=complex)
    padded_b[:n] = b / b_norm

    state = sv.init_state(lay, padded_b)
    state = run_qpe(prepared, state)
    state = apply_reciprocal_rotation(state, prepared)
    state = run_inverse_qpe(prepared, state)

    if prepared.config.post_select:
        _, success_probability, state = sv.measure_qubit(
            state, lay.ancilla_qubit, post_select=1
        )
    else:
        rng = np.random.default_rng(seed)
        for _ in range(10_000):
            outcome, p, collapsed = sv.measure_qubit(
                state, lay.ancilla_qubit, seed=int(rng.integers(2**63))
            )
            if outcome == 1:
                success_probability, state = p, collapsed
                break
        else:
            raise RuntimeError("ancilla never measured |1> in 10000 shots")
    vec, slice_norm = sv.extract_register(state)
    leakage = max(0.0, 1.0 - slice_norm * slice_norm)

    raw = vec * slice_norm * math.sqrt(success_probability)
    x_padded = raw * b_norm * prepared.scale / prepared.rotation_constant
    pad_tail = np.abs(x_padded[n:])
    if pad_tail.size and pad_tail.max() > 1e-10:
        raise AssertionError(
            f"padding entries carry amplitude {pad_tail.max():.3e}; expected zero"
        )
    x = x_padded[:n]
    if np.abs(x.imag).max(initial=0.0) <= 1e-10 * max(1.0, np.abs(x).max()):
        x = x.real.copy()

    fidelity = None
    if diagnostics:
        x_direct = linalg.solve_direct(prepared.matrix, b)
        denom = np.linalg.norm(x) * np.linalg.norm(x_direct)
        if denom > 0.0:
            fidelity = float(abs(np.vdot(x, x_direct)) / denom)

    return HHLSolution(
        solution=x,
        success_probability=float(success_probability),
        recovered_norm=float(np.linalg.norm(x)),
        fidelity_vs_classical=fidelity,
        clock_leakage=leakage,
    )
