"""Schrodinger and Lindblad propagation with drift monitoring (hbar = 1).

Three integrators are available:

``rk4``
    fixed-step classical Runge-Kutta in the interaction picture; the step
    must resolve the fastest rotation frequency of the Hamiltonian.
``adaptive``
    scipy's DOP853 with absolute/relative tolerances.
``frame``
    exact propagation in a rotating frame where the Hamiltonian is static.
    Pure states are propagated by one eigendecomposition.  Density matrices
    use a symmetric (Strang) split between the exact unitary step and the
    dissipator, which commutes with the frame rotation.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .model import G, E, F, SystemParams, TimeDependentHamiltonian
from .operators import (
    DensityMatrix,
    LayoutError,
    PureState,
    SparseOperator,
    annihilation,
    coupler_transition,
    embed,
)

log = logging.getLogger(__name__)

__all__ = [
    "IntegratorConfig",
    "EvolutionResult",
    "IntegrationError",
    "StepSizeError",
    "CollapseChannel",
    "collapse_operators",
    "evolve_pure",
    "evolve_lindblad",
    "expectation",
]

METHODS = ("rk4", "adaptive", "frame")


class IntegrationError(RuntimeError):
    pass


class StepSizeError(IntegrationError):
    pass


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``dt`` is the fixed step for ``rk4`` and the split step for ``frame``
    Lindblad runs; ``None`` picks a default from the Hamiltonian.  The rk4
    step may not exceed ``1/(steps_per_rotation * nu_max)``.
    """

    method: str = "rk4"
    dt: float | None = None
    atol: float = 1e-10
    rtol: float = 1e-10
    max_steps: int = 50_000_000
    monitor_interval: int = 1000
    steps_per_rotation: int = 20
    norm_tol: float = 1e-6
    trace_tol: float = 1e-6
    # frame-split default step, in units of 1/nu_max
    split_step_factor: float = 8.0
    sample_interval: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator {self.method!r}; expected one of {METHODS}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.atol <= 0 or self.rtol <= 0:
            raise ValueError("tolerances must be positive")
        if self.monitor_interval < 1:
            raise ValueError("monitor_interval must be >= 1")


@dataclass
class EvolutionResult:
    final_state: PureState | DensityMatrix
    norm_drift: float = 0.0
    trace_drift: float = 0.0
    hermiticity_drift: float = 0.0
    min_eigenvalue: float | None = None
    steps: int = 0
    method: str = ""
    wall_time: float = 0.0
    times: list[float] = field(default_factory=list)
    samples: dict[str, list[complex]] = field(default_factory=dict)

    @property
    def drift(self) -> float:
        return max(self.norm_drift, self.trace_drift)


@dataclass(frozen=True)
class CollapseChannel:
    """``rate * L[op]``.  ``local``/``subsystem`` optionally record that ``op``
    is ``local`` embedded on one subsystem, which lets the dissipator act on
    slices of the density matrix."""

    rate: float
    op: SparseOperator
    label: str = ""
    local: SparseOperator | None = None
    subsystem: int | None = None

    @classmethod
    def embedded(cls, rate: float, local: SparseOperator, subsystem: int, layout, label: str = ""):
        return cls(rate, embed(local, subsystem, layout), label, local, subsystem)


def collapse_operators(params: SystemParams, layout) -> list[CollapseChannel]:
    """Cavity decay, coupler relaxation and dephasing channels with nonzero rate."""
    levels = layout.subsystem_dims[0]
    out = []
    for j, kappa in enumerate(params.kappa, start=1):
        if kappa:
            out.append(CollapseChannel.embedded(kappa, annihilation(layout.subsystem_dims[j]), j, layout,
                                                f"kappa{j}"))

    out_c = [(params.gamma_eg, E, G, "gamma_eg"), (params.gamma_e_phi, E, E, "gamma_e_phi")]
    if levels >= 3:
        out_c += [
            (params.gamma_fe, F, E, "gamma_fe"),
            (params.gamma_fg, F, G, "gamma_fg"),
            (params.gamma_f_phi, F, F, "gamma_f_phi"),
        ]
    for rate, frm, to, label in out_c:
        if rate:
            out.append(CollapseChannel.embedded(rate, coupler_transition(levels, frm, to), 0, layout, label))
    return out


def expectation(op: SparseOperator, state: PureState | DensityMatrix) -> complex:
    """``<psi|op|psi>`` or ``tr(op rho)``."""
    if op.layout != state.layout:
        raise LayoutError(f"layout mismatch: {op.layout} vs {state.layout}")
    if isinstance(state, PureState):
        return complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))
    # tr(A rho) = sum_ij A_ij rho_ji
    coo = op.matrix.tocoo()
    return complex(np.sum(coo.data * state.matrix[coo.col, coo.row]))


def _rk4_step_limit(H: TimeDependentHamiltonian, cfg: IntegratorConfig) -> float:
    nu = H.max_frequency
    return math.inf if nu == 0 else 1.0 / (cfg.steps_per_rotation * nu)


def _rk4_dt(H: TimeDependentHamiltonian, cfg: IntegratorConfig, t_final: float,
            extra_scale: float = 0.0) -> float:
    limit = _rk4_step_limit(H, cfg)
    if cfg.dt is not None:
        if cfg.dt > limit * (1 + 1e-12):
            raise StepSizeError(
                f"dt={cfg.dt:.3e} exceeds 1/({cfg.steps_per_rotation} nu_max) = {limit:.3e}"
            )
        return cfg.dt
    scale = max(H.max_frequency, H.norm_bound(), extra_scale)
    return t_final if scale == 0 else 1.0 / (cfg.steps_per_rotation * scale)


def _n_steps(t_final: float, dt: float, cfg: IntegratorConfig) -> int:
    n = max(1, math.ceil(t_final / dt - 1e-9))
    if n > cfg.max_steps:
        raise StepSizeError(f"{n} steps needed, max_steps={cfg.max_steps}")
    return n


def _sampler(observables: Mapping[str, SparseOperator] | None):
    observables = dict(observables or {})

    def sample(result: EvolutionResult, t: float, state_vec=None, rho=None):
        result.times.append(t)
        for name, op in observables.items():
            if state_vec is not None:
                v = complex(np.vdot(state_vec, op.matrix @ state_vec))
            else:
                coo = op.matrix.tocoo()
                v = complex(np.sum(coo.data * rho[coo.col, coo.row]))
            result.samples.setdefault(name, []).append(v)

    return sample if observables else None


def _pure_frame(H: TimeDependentHamiltonian):
    """Static frame and eigensystem of ``H``, memoized on the Hamiltonian."""
    cached = getattr(H, "_pure_frame_cache", None)
    if cached is None:
        frame = H.static_frame()
        evals, evecs = scipy.linalg.eigh(frame.generator.toarray())
        cached = (frame, evals, evecs)
        H._pure_frame_cache = cached
    return cached


def evolve_pure(psi0: PureState, H: TimeDependentHamiltonian, t_final: float,
                cfg: IntegratorConfig = IntegratorConfig(),
                observables: Mapping[str, SparseOperator] | None = None) -> EvolutionResult:
    """Solve ``d psi/dt = -i H(t) psi`` from 0 to ``t_final``."""
    if psi0.layout != H.layout:
        raise LayoutError(f"state layout {psi0.layout} does not match Hamiltonian {H.layout}")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    start = time.perf_counter()
    sample = _sampler(observables)
    result = EvolutionResult(final_state=psi0, method=cfg.method)
    y = np.array(psi0.amplitudes, dtype=complex)
    norm0 = np.linalg.norm(y)

    if cfg.method == "frame":
        frame, evals, evecs = _pure_frame(H)
        coeffs = evecs.conj().T @ y

        def at(t):
            return frame.to_interaction(t) * (evecs @ (np.exp(-1j * evals * t) * coeffs))

        if sample:
            n = max(1, cfg.sample_interval or 1)
            for t in np.linspace(0.0, t_final, n + 1):
                sample(result, float(t), state_vec=at(t))
        y = at(t_final)
        result.steps = 1
        result.norm_drift = abs(np.linalg.norm(y) - norm0)
    elif cfg.method == "adaptive":
        sol = solve_ivp(lambda t, v: -1j * (H.matrix(t) @ v), (0.0, t_final), y, method="DOP853",
                        rtol=cfg.rtol, atol=cfg.atol,
                        max_step=(math.pi / H.max_frequency) if H.max_frequency else math.inf)
        if not sol.success:
            raise IntegrationError(sol.message)
        y = sol.y[:, -1]
        result.steps = int(sol.t.size - 1)
        result.norm_drift = float(np.max(np.abs(np.linalg.norm(sol.y, axis=0) - norm0)))
        if sample:
            for k in range(sol.t.size):
                sample(result, float(sol.t[k]), state_vec=sol.y[:, k])
    else:
        dt = _rk4_dt(H, cfg, t_final)
        n = _n_steps(t_final, dt, cfg)
        h = t_final / n
        if sample:
            sample(result, 0.0, state_vec=y)
        h_next = H.matrix(0.0)
        drift = 0.0
        for step in range(n):
            t = step * h
            h0 = h_next
            hm = H.matrix(t + h / 2)
            h_next = H.matrix(t + h)
            k1 = -1j * (h0 @ y)
            k2 = -1j * (hm @ (y + 0.5 * h * k1))
            k3 = -1j * (hm @ (y + 0.5 * h * k2))
            k4 = -1j * (h_next @ (y + h * k3))
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if (step + 1) % cfg.monitor_interval == 0 or step + 1 == n:
                drift = max(drift, abs(np.linalg.norm(y) - norm0))
                if drift > cfg.norm_tol:
                    raise IntegrationError(f"norm drift {drift:.3e} at t={t + h:.6e} exceeds {cfg.norm_tol:g}")
            if sample and cfg.sample_interval and (step + 1) % cfg.sample_interval == 0:
                sample(result, t + h, state_vec=y)
        result.steps = n
        result.norm_drift = drift

    if result.norm_drift > cfg.norm_tol:
        raise IntegrationError(f"norm drift {result.norm_drift:.3e} exceeds {cfg.norm_tol:g}")
    result.final_state = PureState(psi0.layout, y)
    result.wall_time = time.perf_counter() - start
    return result


class _Dissipator:
    def __init__(self, channels: Sequence[CollapseChannel]):
        self.ops = [(c.rate, c.op.matrix) for c in channels]
        n = channels[0].op.dim if channels else 0
        acc = sp.csr_matrix((n, n), dtype=complex)
        for rate, c in self.ops:
            acc = acc + rate * (c.conj().T @ c)
        self.decay = acc.tocsr()
        # -(G rho + rho G)/2 with diagonal G = sum rate c^+ c is an elementwise product
        self._anti = None
        if n and self.decay.nnz == np.count_nonzero(self.decay.diagonal()):
            gd = self.decay.diagonal().real
            self._anti = -0.5 * (gd[:, None] + gd[None, :])
        self._dims = channels[0].op.layout.subsystem_dims if channels else ()
        self._sliced = []
        self._general = []
        for ch in channels:
            if ch.local is not None:
                coo = ch.local.matrix.tocoo()
                self._sliced.append((ch.rate, ch.subsystem, list(zip(coo.row, coo.col, coo.data))))
            else:
                self._general.append((ch.rate, ch.op.matrix))

    def jumps(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho)
        k = len(self._dims)
        if self._sliced:
            r = rho.reshape(self._dims * 2)
            o = out.reshape(self._dims * 2)
            for rate, sub, entries in self._sliced:
                # c rho c^+ on the (ket, bra) axes of one subsystem, element by element of c
                rv = np.moveaxis(r, (sub, k + sub), (0, 1))
                ov = np.moveaxis(o, (sub, k + sub), (0, 1))
                for ri, ci, vi in entries:
                    for rj, cj, vj in entries:
                        ov[ri, rj] += (rate * vi * np.conj(vj)) * rv[ci, cj]
        for rate, c in self._general:
            # c rho c^+ = c (c rho)^+ for Hermitian rho
            out += rate * np.asarray(c @ np.ascontiguousarray(np.asarray(c @ rho).conj().T))
        return out

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        if self._anti is not None:
            return self._anti * rho + self.jumps(rho)
        m = -0.5 * np.asarray(self.decay @ rho)
        return m + m.conj().T + self.jumps(rho)


def _lindblad_rhs(hm: sp.csr_matrix, diss: _Dissipator, rho: np.ndarray) -> np.ndarray:
    m = -1j * np.asarray(hm @ rho)
    if diss.ops:
        m -= 0.5 * np.asarray(diss.decay @ rho)
        return m + m.conj().T + diss.jumps(rho)
    return m + m.conj().T


def _validate_channels(channels: Sequence[CollapseChannel], layout):
    for ch in channels:
        if ch.rate < 0:
            raise InvalidParameterError(f"negative rate {ch.rate} for channel {ch.label or ch.op}")
        if ch.op.layout != layout:
            raise LayoutError(f"collapse operator {ch.label!r} has layout {ch.op.layout}")


def evolve_lindblad(rho0: DensityMatrix, H: TimeDependentHamiltonian, params: SystemParams | None,
                    t_final: float, cfg: IntegratorConfig = IntegratorConfig(),
                    collapse: Sequence[CollapseChannel] | None = None,
                    observables: Mapping[str, SparseOperator] | None = None) -> EvolutionResult:
    """Propagate ``d rho/dt = -i[H, rho] + sum_k rate_k L[c_k] rho``.

    Channels come from ``params`` unless ``collapse`` is given explicitly.
    """
    if rho0.layout != H.layout:
        raise LayoutError(f"state layout {rho0.layout} does not match Hamiltonian {H.layout}")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    if collapse is None:
        if params is None:
            raise ValueError("need params or explicit collapse channels")
        collapse = collapse_operators(params, rho0.layout)
    _validate_channels(collapse, rho0.layout)
    channels = [c for c in collapse if c.rate > 0]
    diss = _Dissipator(channels)
    start = time.perf_counter()
    sample = _sampler(observables)
    result = EvolutionResult(final_state=rho0, method=cfg.method)
    rho = np.array(rho0.matrix, dtype=complex)
    tr0 = np.trace(rho).real
    trace_drift = 0.0
    herm_drift = 0.0

    def monitor(rho, t):
        nonlocal trace_drift, herm_drift
        trace_drift = max(trace_drift, abs(np.trace(rho).real - tr0))
        herm_drift = max(herm_drift, float(np.max(np.abs(rho - rho.conj().T))))
        if trace_drift > cfg.trace_tol:
            raise IntegrationError(f"trace drift {trace_drift:.3e} at t={t:.6e} exceeds {cfg.trace_tol:g}")

    if cfg.method == "frame":
        frame = H.static_frame([c.op for c in channels])
        evals, evecs = scipy.linalg.eigh(frame.generator.toarray())
        if channels:
            dt = cfg.dt or min(
                cfg.split_step_factor / max(H.max_frequency, H.norm_bound(), 1.0 / t_final),
                # the RK4 dissipator sub-step must also resolve the fastest decay
                1.0 / (cfg.steps_per_rotation * float(abs(diss.decay).max())),
            )
            n = _n_steps(t_final, dt, cfg)
        else:
            n = 1
        h = t_final / n
        u = (evecs * np.exp(-1j * evals * h)) @ evecs.conj().T
        u_dag = u.conj().T

        def diss_step(rho, tau):
            k1 = diss(rho)
            k2 = diss(rho + 0.5 * tau * k1)
            k3 = diss(rho + 0.5 * tau * k2)
            k4 = diss(rho + tau * k3)
            return rho + (tau / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

        def to_interaction(rho, t):
            ph = frame.to_interaction(t)
            return ph[:, None] * rho * ph.conj()[None, :]

        if sample:
            sample(result, 0.0, rho=rho)
        if channels:
            rho = diss_step(rho, 0.5 * h)
        for step in range(n):
            rho = u @ rho @ u_dag
            t = (step + 1) * h
            checkpoint = (step + 1) % cfg.monitor_interval == 0 or step + 1 == n
            sampled = sample and cfg.sample_interval and (step + 1) % cfg.sample_interval == 0
            if channels:
                # adjacent half-steps of consecutive Strang steps merge into one full step
                rho = diss_step(rho, 0.5 * h if checkpoint or sampled else h)
            if checkpoint:
                monitor(rho, t)
            if sampled:
                sample(result, t, rho=to_interaction(rho, t))
            if channels and (checkpoint or sampled) and step + 1 < n:
                rho = diss_step(rho, 0.5 * h)
        rho = to_interaction(rho, t_final)
        result.steps = n
    elif cfg.method == "adaptive":
        d = rho.shape[0]

        def f(t, v):
            return _lindblad_rhs(H.matrix(t), diss, v.reshape(d, d)).reshape(-1)

        sol = solve_ivp(f, (0.0, t_final), rho.reshape(-1), method="DOP853", rtol=cfg.rtol, atol=cfg.atol,
                        max_step=(math.pi / H.max_frequency) if H.max_frequency else math.inf)
        if not sol.success:
            raise IntegrationError(sol.message)
        for k in range(sol.t.size):
            r = sol.y[:, k].reshape(d, d)
            monitor(r, sol.t[k])
            if sample:
                sample(result, float(sol.t[k]), rho=r)
        rho = sol.y[:, -1].reshape(d, d)
        result.steps = int(sol.t.size - 1)
    else:
        dt = _rk4_dt(H, cfg, t_final, float(abs(diss.decay).max()) if channels else 0.0)
        n = _n_steps(t_final, dt, cfg)
        h = t_final / n
        if sample:
            sample(result, 0.0, rho=rho)
        h_next = H.matrix(0.0)
        for step in range(n):
            t = step * h
            h0 = h_next
            hm = H.matrix(t + h / 2)
            h_next = H.matrix(t + h)
            k1 = _lindblad_rhs(h0, diss, rho)
            k2 = _lindblad_rhs(hm, diss, rho + 0.5 * h * k1)
            k3 = _lindblad_rhs(hm, diss, rho + 0.5 * h * k2)
            k4 = _lindblad_rhs(h_next, diss, rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if (step + 1) % cfg.monitor_interval == 0 or step + 1 == n:
                monitor(rho, t + h)
            if sample and cfg.sample_interval and (step + 1) % cfg.sample_interval == 0:
                sample(result, t + h, rho=rho)
        result.steps = n

    monitor(rho, t_final)
    result.trace_drift = trace_drift
    result.hermiticity_drift = herm_drift
    if rho.shape[0] <= 100:
        result.min_eigenvalue = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    result.final_state = DensityMatrix(rho0.layout, rho)
    result.wall_time = time.perf_counter() - start
    return result
