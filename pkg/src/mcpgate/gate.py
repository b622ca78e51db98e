"""Multiplex-controlled phase gate: scheduling, ideal action and fidelity."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encodings import MAX_TRUNCATION_LOSS, EncodedQubitSpec, build_state, vacuum
from .model import SystemParams, dispersive_frame_energies
from .operators import DensityMatrix, HilbertLayout, LayoutError, PureState, tensor_states

__all__ = [
    "GateSchedule",
    "LogicalRegister",
    "InvalidScheduleError",
    "EncodingViolationError",
    "NumericalCorruptionError",
    "matched_couplings",
    "schedule",
    "ideal_mcp_output",
    "phase_identity_check",
    "fidelity",
    "toffoli_from_mcp",
    "mcp_truth_table",
    "unrotate",
]


class InvalidScheduleError(ValueError):
    pass


class EncodingViolationError(ValueError):
    def __init__(self, residual: float):
        super().__init__(f"state leaves the encoded subspace (residual {residual:.3e})")
        self.residual = residual


class NumericalCorruptionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GateSchedule:
    k: int
    s: int
    lam: float
    Omega_p: float
    gate_time: float
    lambda_signs: tuple[int, ...] = ()


def matched_couplings(delta: Sequence[float], g1: float) -> list[float]:
    """Couplings giving equal ``g_j^2/|Delta_j|`` across cavities, anchored at ``g1``."""
    delta = [float(d) for d in delta]
    if any(d == 0 for d in delta):
        raise ZeroDivisionError("zero detuning")
    return [g1 * math.sqrt(abs(d) / abs(delta[0])) for d in delta]


def schedule(lam: float, k: int, s: int, signs: Sequence[int] = ()) -> GateSchedule:
    """Gate time and drive strength from ``lam*t = 2k pi`` and ``Omega_p*t = s pi``."""
    if lam <= 0:
        raise InvalidScheduleError(f"lambda must be positive, got {lam}")
    if int(k) != k or k < 1:
        raise InvalidScheduleError(f"k must be a positive integer, got {k}")
    if int(s) != s or s < 1 or s % 2 == 0:
        raise InvalidScheduleError(f"s must be a positive odd integer, got {s}")
    k, s = int(k), int(s)
    gate_time = 2 * k * math.pi / lam
    omega = s * lam / (2 * k)
    return GateSchedule(k, s, lam, omega, gate_time, tuple(int(np.sign(x)) for x in signs))


class LogicalRegister:
    """``n`` photonic qubits sharing one encoding.

    Cavity label 0 is the vacuum (logical 1); label 1 is ``|phi>`` (logical 0).
    """

    def __init__(self, n_qubits: int, encoding: EncodedQubitSpec, max_loss: float = MAX_TRUNCATION_LOSS):
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        self.n_qubits = n_qubits
        self.encoding = encoding
        self.phi = build_state(encoding, max_loss)
        self.vac = vacuum(encoding.n_trunc)
        self._basis_cache: dict[int, np.ndarray] = {}

    def __repr__(self):
        return f"LogicalRegister({self.n_qubits}, {self.encoding.label()})"

    @property
    def n_trunc(self) -> int:
        return self.encoding.n_trunc

    def layout(self, coupler_levels: int = 2) -> HilbertLayout:
        return HilbertLayout((coupler_levels,) + (self.n_trunc,) * self.n_qubits)

    def all_labels(self) -> list[tuple[int, ...]]:
        return list(itertools.product((0, 1), repeat=self.n_qubits))

    def cavity_state(self, labels: Sequence[int]) -> PureState:
        if len(labels) != self.n_qubits:
            raise ValueError(f"expected {self.n_qubits} labels, got {len(labels)}")
        return tensor_states([self.phi if l else self.vac for l in labels])

    def basis_state(self, labels: Sequence[int], coupler_levels: int = 2) -> PureState:
        """Coupler in ``|g>`` times the cavity product state for ``labels``."""
        g = PureState.basis(HilbertLayout((coupler_levels,)), (0,))
        cav = self.cavity_state(labels)
        return PureState(self.layout(coupler_levels), np.kron(g.amplitudes, cav.amplitudes))

    def uniform_state(self, coupler_levels: int = 2) -> PureState:
        """Normalized equal-weight sum over all ``2^n`` encoded product states."""
        amps = sum(self.basis_state(l, coupler_levels).amplitudes for l in self.all_labels())
        return PureState(self.layout(coupler_levels), amps).normalized()

    def basis_matrix(self, coupler_levels: int = 2) -> np.ndarray:
        key = coupler_levels
        if key not in self._basis_cache:
            self._basis_cache[key] = np.column_stack(
                [self.basis_state(l, coupler_levels).amplitudes for l in self.all_labels()]
            )
        return self._basis_cache[key]

    @staticmethod
    def logical_bits(labels: Sequence[int]) -> tuple[int, ...]:
        return tuple(1 - l for l in labels)


def _project(state: PureState, register: LogicalRegister) -> tuple[np.ndarray, float]:
    levels = state.layout.subsystem_dims[0]
    if state.layout != register.layout(levels):
        raise LayoutError(f"state layout {state.layout} does not match register {register.layout(levels)}")
    basis = register.basis_matrix(levels)
    # least squares = Gram-inverse projection; handles quasi-orthogonal encodings
    coeffs, *_ = np.linalg.lstsq(basis, state.amplitudes, rcond=None)
    residual = float(np.linalg.norm(state.amplitudes - basis @ coeffs))
    return coeffs, residual


def ideal_mcp_output(state: PureState, register: LogicalRegister, tol: float = 1e-8) -> PureState:
    """Flip the sign of the all-vacuum component; leave every other product state alone."""
    coeffs, residual = _project(state, register)
    if residual > tol:
        raise EncodingViolationError(residual)
    coeffs = coeffs.copy()
    coeffs[0] = -coeffs[0]  # labels are ordered with (0, ..., 0) first
    basis = register.basis_matrix(state.layout.subsystem_dims[0])
    return PureState(state.layout, basis @ coeffs)


def phase_identity_check(states: Sequence[PureState], k: int, signs: Sequence[int]) -> float:
    """Max deviation of ``exp(i sum_j (+-2k pi) n_j)|l_1..l_n> - |l_1..l_n>`` over ``states``.

    The states live on cavity-only layouts; ``signs[j]`` is the sign of ``lambda_j``.
    """
    worst = 0.0
    for st in states:
        dims = st.layout.subsystem_dims
        if len(signs) != len(dims):
            raise ValueError(f"need {len(dims)} signs, got {len(signs)}")
        photons = np.unravel_index(np.arange(st.layout.total_dim), dims)
        phase = sum(np.sign(sj) * 2 * k * math.pi * nj for sj, nj in zip(signs, photons))
        out = np.exp(1j * phase) * st.amplitudes
        worst = max(worst, float(np.max(np.abs(out - st.amplitudes))))
    return worst


def fidelity(rho: DensityMatrix | PureState, psi_ideal: PureState) -> float:
    """``sqrt(<psi_id|rho|psi_id>)``; for a pure state this is ``|<psi_id|psi>|``."""
    if rho.layout != psi_ideal.layout:
        raise LayoutError(f"layout mismatch: {rho.layout} vs {psi_ideal.layout}")
    v = psi_ideal.amplitudes
    if isinstance(rho, PureState):
        val = abs(np.vdot(v, rho.amplitudes)) ** 2
    else:
        val = float(np.real(np.vdot(v, rho.matrix @ v)))
    if val < -1e-10:
        raise NumericalCorruptionError(f"<psi|rho|psi> = {val:.3e} is negative")
    return float(min(1.0, math.sqrt(max(val, 0.0))))


def unrotate(state: PureState, params: SystemParams, t: float) -> PureState:
    """Undo the dispersive rotating frame and drop the common phase ``exp(i sum lambda_j t/2)``."""
    h0 = dispersive_frame_energies(params, state.layout)
    common = sum(params.dispersive_shifts) * t / 2
    return PureState(state.layout, np.exp(-1j * (h0 * t + common)) * state.amplitudes)


def mcp_truth_table(bits: Sequence[int]) -> int:
    """Sign applied by the MCP gate to logical basis state ``bits``."""
    return -1 if all(bits) else 1


def toffoli_from_mcp(bits: Sequence[int]) -> tuple[int, ...]:
    """Hadamard on the target, MCP phase, Hadamard on the target (logical level)."""
    n = len(bits)
    if n < 1 or any(b not in (0, 1) for b in bits):
        raise ValueError(f"bad logical labels {bits}")
    psi = np.zeros(2**n)
    psi[int("".join(map(str, bits)), 2)] = 1.0
    had = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    h_target = np.kron(np.eye(2 ** (n - 1)), had)
    phases = np.array([mcp_truth_table(b) for b in itertools.product((0, 1), repeat=n)])
    out = h_target @ (phases * (h_target @ psi))
    idx = int(np.argmax(np.abs(out)))
    if abs(abs(out[idx]) - 1) > 1e-12:
        raise ArithmeticError("Toffoli construction left the computational basis")
    return tuple(int(c) for c in format(idx, f"0{n}b"))
