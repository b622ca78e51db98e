"""Coupler-cavity Hamiltonians and the dispersive-regime bookkeeping.

All frequencies are angular (rad/s).  Hamiltonians are kept symbolic: a list
of operator terms, each multiplied by ``exp(i(nu t + phase))`` and paired with
its Hermitian conjugate, so they can be evaluated exactly at any time.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import lsqr

from .operators import (
    HilbertLayout,
    LayoutError,
    SparseOperator,
    annihilation,
    coupler_transition,
    creation,
    embed,
)

log = logging.getLogger(__name__)

__all__ = [
    "SystemParams",
    "HamiltonianTerm",
    "TimeDependentHamiltonian",
    "StaticFrame",
    "FrameError",
    "UnsupportedModelError",
    "InvalidParameterError",
    "CROSSTALK_PAIRS",
    "ideal_hamiltonian",
    "perturbation_hamiltonian",
    "crosstalk_hamiltonian",
    "effective_hamiltonian",
    "dispersive_frame_energies",
    "pulse_frequency",
    "validate_dispersive_regime",
    "DispersiveCheck",
    "DispersiveReport",
]

G, E, F = 0, 1, 2
CROSSTALK_PAIRS = ((1, 2), (2, 3), (1, 3))


class UnsupportedModelError(ValueError):
    pass


class InvalidParameterError(ValueError):
    pass


class FrameError(ValueError):
    """No diagonal frame makes the Hamiltonian time independent."""


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters, all in angular-frequency units.

    Cavity indices in ``g_cross`` keys are 1-based, matching the usual
    labelling ``g_12, g_23, g_13``.  Detunings are derived, never stored.
    """

    n_cavities: int
    omega_eg: float
    omega_c: tuple[float, ...]
    g: tuple[float, ...]
    omega_fe: float = 0.0
    omega_fg: float = 0.0
    g_prime: tuple[float, ...] = ()
    g_cross: dict = field(default_factory=dict)
    Omega_p: float = 0.0
    Omega_p_prime: float = 0.0
    phi: float = 0.0
    kappa: tuple[float, ...] = ()
    gamma_eg: float = 0.0
    gamma_fe: float = 0.0
    gamma_fg: float = 0.0
    gamma_e_phi: float = 0.0
    gamma_f_phi: float = 0.0
    coupler_levels: int = 2

    def __post_init__(self):
        n = self.n_cavities
        if n < 1:
            raise InvalidParameterError("need at least one cavity")
        fix = object.__setattr__
        fix(self, "omega_c", tuple(float(x) for x in self.omega_c))
        fix(self, "g", tuple(float(x) for x in self.g))
        fix(self, "g_prime", tuple(float(x) for x in self.g_prime) or (0.0,) * n)
        fix(self, "kappa", tuple(float(x) for x in self.kappa) or (0.0,) * n)
        fix(self, "g_cross", {tuple(k): float(v) for k, v in dict(self.g_cross).items()})
        for name in ("omega_c", "g", "g_prime", "kappa"):
            if len(getattr(self, name)) != n:
                raise InvalidParameterError(f"{name} needs {n} entries, got {len(getattr(self, name))}")
        if self.coupler_levels not in (2, 3):
            raise InvalidParameterError(f"coupler_levels must be 2 or 3, got {self.coupler_levels}")
        if self.omega_eg <= 0 or any(w <= 0 for w in self.omega_c):
            raise InvalidParameterError("frequencies must be positive")
        nonneg = dict(
            g=self.g, g_prime=self.g_prime, kappa=self.kappa, g_cross=tuple(self.g_cross.values()),
            Omega_p=(self.Omega_p,), Omega_p_prime=(self.Omega_p_prime,),
            gamma_eg=(self.gamma_eg,), gamma_fe=(self.gamma_fe,), gamma_fg=(self.gamma_fg,),
            gamma_e_phi=(self.gamma_e_phi,), gamma_f_phi=(self.gamma_f_phi,),
        )
        for name, vals in nonneg.items():
            if any(v < 0 for v in vals):
                raise InvalidParameterError(f"{name} must be non-negative, got {vals}")
        for k, l in self.g_cross:
            if not (1 <= k <= n and 1 <= l <= n and k != l):
                raise InvalidParameterError(f"bad crosstalk pair {(k, l)} for {n} cavities")
        if self.coupler_levels == 3:
            if self.omega_fe <= 0 or self.omega_fg <= 0:
                raise InvalidParameterError("a 3-level coupler needs omega_fe and omega_fg > 0")
            if not math.isclose(self.omega_fg, self.omega_eg + self.omega_fe, rel_tol=1e-9):
                raise InvalidParameterError("ladder inconsistency: omega_fg != omega_eg + omega_fe")

    @property
    def delta(self) -> tuple[float, ...]:
        return tuple(self.omega_eg - w for w in self.omega_c)

    @property
    def delta_prime(self) -> tuple[float, ...]:
        return tuple(self.omega_fe - w for w in self.omega_c)

    def delta_cross(self, k: int, l: int) -> float:
        return self.omega_c[k - 1] - self.omega_c[l - 1]

    @property
    def dispersive_shifts(self) -> tuple[float, ...]:
        """``lambda_j = g_j^2 / Delta_j`` (signed)."""
        out = []
        for gj, dj in zip(self.g, self.delta):
            if dj == 0:
                raise ZeroDivisionError("zero detuning between coupler and cavity")
            out.append(gj**2 / dj)
        return tuple(out)

    def layout(self, n_trunc: int | Sequence[int] = 10) -> HilbertLayout:
        return HilbertLayout.cavities(self.coupler_levels, n_trunc, self.n_cavities)

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class HamiltonianTerm:
    """``op * exp(i(frequency*t + phase)) + h.c.``"""

    op: SparseOperator
    frequency: float
    phase: float = 0.0
    label: str = ""


@dataclass(frozen=True)
class StaticFrame:
    """Diagonal frame ``D`` with ``H_I(t) = exp(iDt) (H_R - D) exp(-iDt)``.

    ``H_R`` is time independent, so ``psi_I(t) = exp(iDt) exp(-i H_R t) psi_I(0)``.
    """

    energies: np.ndarray
    generator: sp.csr_matrix

    def to_interaction(self, t: float) -> np.ndarray:
        return np.exp(1j * self.energies * t)


class TimeDependentHamiltonian:
    def __init__(self, layout: HilbertLayout, terms: Sequence[HamiltonianTerm] = ()):
        for term in terms:
            if term.op.layout != layout:
                raise LayoutError(f"term {term.label!r} lives on {term.op.layout}, expected {layout}")
        self.layout = layout
        self.terms = tuple(t for t in terms if t.op.nnz)
        self._compiled = None

    def __repr__(self):
        return f"TimeDependentHamiltonian({self.layout.subsystem_dims}, {len(self.terms)} terms)"

    def __add__(self, other: "TimeDependentHamiltonian") -> "TimeDependentHamiltonian":
        if other.layout != self.layout:
            raise LayoutError("layout mismatch")
        return TimeDependentHamiltonian(self.layout, self.terms + other.terms)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency for t in self.terms])

    @property
    def max_frequency(self) -> float:
        return float(np.max(np.abs(self.frequencies))) if self.terms else 0.0

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm of ``H(t)`` for all ``t``."""
        total = 0.0
        for term in self.terms:
            a = abs(term.op.matrix)
            total += 2 * math.sqrt(float(abs(a.sum(axis=0)).max()) * float(abs(a.sum(axis=1)).max()))
        return total

    def _compile(self):
        if self._compiled is None:
            n = self.layout.total_dim
            mats = [t.op.matrix.tocoo() for t in self.terms]
            mats += [t.op.matrix.conj().T.tocoo() for t in self.terms]
            keys = [m.row.astype(np.int64) * n + m.col for m in mats]
            pattern = np.unique(np.concatenate(keys)) if keys else np.zeros(0, np.int64)
            stack = np.zeros((len(mats), pattern.size), dtype=complex)
            for i, (m, k) in enumerate(zip(mats, keys)):
                np.add.at(stack[i], np.searchsorted(pattern, k), m.data)
            rows, cols = np.divmod(pattern, n)
            indptr = np.searchsorted(rows, np.arange(n + 1))
            self._compiled = (stack, cols.astype(np.int32), indptr.astype(np.int32))
        return self._compiled

    def coefficients(self, t: float) -> np.ndarray:
        c = np.array([np.exp(1j * (term.frequency * t + term.phase)) for term in self.terms], dtype=complex)
        return np.concatenate([c, c.conj()])

    def matrix(self, t: float) -> sp.csr_matrix:
        """``H(t)`` as a CSR matrix (fast path for integrators)."""
        n = self.layout.total_dim
        if not self.terms:
            return sp.csr_matrix((n, n), dtype=complex)
        stack, indices, indptr = self._compile()
        data = self.coefficients(t) @ stack
        return sp.csr_matrix((data, indices, indptr), shape=(n, n))

    def evaluate(self, t: float) -> SparseOperator:
        return SparseOperator(self.layout, self.matrix(t))

    def static_frame(self, collapse: Sequence[SparseOperator] = (), tol: float = 1e-9) -> StaticFrame:
        """Find diagonal energies ``D`` with ``D_r - D_c = nu`` on every term entry.

        Each collapse operator must also be an eigenoperator of ``[D, .]`` so
        the dissipator is unchanged by the frame; their shared frequencies are
        solved for together with the component offsets.
        """
        n = self.layout.total_dim
        edges_r, edges_c, edges_nu = [], [], []
        for term in self.terms:
            coo = term.op.matrix.tocoo()
            edges_r.append(coo.row)
            edges_c.append(coo.col)
            edges_nu.append(np.full(coo.nnz, term.frequency))
        r = np.concatenate(edges_r) if edges_r else np.zeros(0, int)
        c = np.concatenate(edges_c) if edges_c else np.zeros(0, int)
        nu = np.concatenate(edges_nu) if edges_nu else np.zeros(0)

        graph = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
        ncomp, comp = connected_components(graph, directed=False)
        energy = np.full(n, np.nan)
        # adjacency with signed frequencies: D[r] = D[c] + nu
        adj = [[] for _ in range(n)]
        for ri, ci, vi in zip(r.tolist(), c.tolist(), nu.tolist()):
            adj[ci].append((ri, vi))
            adj[ri].append((ci, -vi))
        for root in range(n):
            if not np.isnan(energy[root]):
                continue
            energy[root] = 0.0
            stack = [root]
            while stack:
                u = stack.pop()
                for v, w in adj[u]:
                    if np.isnan(energy[v]):
                        energy[v] = energy[u] + w
                        stack.append(v)
        scale = max(1.0, float(np.max(np.abs(nu))) if nu.size else 1.0)
        if r.size and np.max(np.abs(energy[r] - energy[c] - nu)) > tol * scale:
            raise FrameError("term frequencies are not differences of basis-state energies")

        if collapse:
            # unknowns: one offset per component, one frequency per collapse operator
            rows, cols, vals, rhs = [], [], [], []
            eq = 0
            for k, op in enumerate(collapse):
                coo = op.matrix.tocoo()
                for ri, ci in zip(coo.row, coo.col):
                    if comp[ri] != comp[ci]:
                        rows += [eq, eq]
                        cols += [comp[ri], comp[ci]]
                        vals += [1.0, -1.0]
                    rows.append(eq)
                    cols.append(ncomp + k)
                    vals.append(-1.0)
                    rhs.append(energy[ci] - energy[ri])
                    eq += 1
            if eq:
                a = sp.csr_matrix((vals, (rows, cols)), shape=(eq, ncomp + len(collapse)))
                sol = lsqr(a, np.array(rhs), atol=1e-15, btol=1e-15, iter_lim=20000)[0]
                energy = energy + sol[:ncomp][comp]
                resid = a @ sol - np.array(rhs)
                if np.max(np.abs(resid)) > tol * scale:
                    raise FrameError("collapse operators are not eigenoperators of any static frame")

        static = sp.csr_matrix((n, n), dtype=complex)
        for term in self.terms:
            m = term.op.matrix * np.exp(1j * term.phase)
            static = static + m + m.conj().T
        generator = (sp.diags(energy.astype(complex)) + static).tocsr()
        return StaticFrame(energies=energy, generator=generator)


def _coupler_op(layout: HilbertLayout, from_level: int, to_level: int) -> SparseOperator:
    return embed(coupler_transition(layout.subsystem_dims[0], from_level, to_level), 0, layout)


def _cavity_op(layout: HilbertLayout, j: int, op) -> SparseOperator:
    """Embed a single-mode operator factory ``op(dim)`` on cavity ``j`` (1-based)."""
    return embed(op(layout.subsystem_dims[j]), j, layout)


def _check_layout(params: SystemParams, layout: HilbertLayout | None, n_trunc) -> HilbertLayout:
    layout = layout or params.layout(n_trunc)
    if layout.n_subsystems != params.n_cavities + 1:
        raise LayoutError(f"layout {layout.subsystem_dims} does not fit {params.n_cavities} cavities")
    if layout.subsystem_dims[0] < params.coupler_levels:
        raise LayoutError("layout has fewer coupler levels than the parameters require")
    return layout


def ideal_hamiltonian(params: SystemParams, omega_p: float, layout: HilbertLayout | None = None,
                      n_trunc=10) -> TimeDependentHamiltonian:
    """Cavities and pulse on the g-e transition, interaction picture."""
    layout = _check_layout(params, layout, n_trunc)
    eg = _coupler_op(layout, G, E)
    terms = []
    for j in range(1, params.n_cavities + 1):
        if params.g[j - 1]:
            op = params.g[j - 1] * (_cavity_op(layout, j, annihilation) @ eg)
            terms.append(HamiltonianTerm(op, params.delta[j - 1], 0.0, f"g{j}"))
    if params.Omega_p:
        terms.append(HamiltonianTerm(params.Omega_p * eg, params.omega_eg - omega_p, -params.phi, "pulse"))
    return TimeDependentHamiltonian(layout, terms)


def crosstalk_hamiltonian(params: SystemParams, layout: HilbertLayout | None = None,
                          n_trunc=10) -> TimeDependentHamiltonian:
    """Direct cavity-cavity hopping ``g_kl exp(i Delta_kl t) a_k^+ a_l + h.c.``"""
    layout = _check_layout(params, layout, n_trunc)
    terms = []
    for (k, l), gkl in sorted(params.g_cross.items()):
        if gkl:
            op = gkl * (_cavity_op(layout, k, creation) @ _cavity_op(layout, l, annihilation))
            terms.append(HamiltonianTerm(op, params.delta_cross(k, l), 0.0, f"g{k}{l}"))
    return TimeDependentHamiltonian(layout, terms)


def perturbation_hamiltonian(params: SystemParams, omega_p: float, layout: HilbertLayout | None = None,
                             n_trunc=10) -> TimeDependentHamiltonian:
    """Unwanted e-f couplings of cavities and pulse, plus inter-cavity crosstalk."""
    if params.coupler_levels != 3:
        raise UnsupportedModelError("the e-f perturbation needs a 3-level coupler")
    layout = _check_layout(params, layout, n_trunc)
    fe = _coupler_op(layout, E, F)
    terms = []
    for j in range(1, params.n_cavities + 1):
        if params.g_prime[j - 1]:
            op = params.g_prime[j - 1] * (_cavity_op(layout, j, annihilation) @ fe)
            terms.append(HamiltonianTerm(op, params.delta_prime[j - 1], 0.0, f"g'{j}"))
    if params.Omega_p_prime:
        terms.append(HamiltonianTerm(params.Omega_p_prime * fe, params.omega_fe - omega_p, -params.phi, "pulse'"))
    return TimeDependentHamiltonian(layout, terms) + crosstalk_hamiltonian(params, layout)


def _photon_grid(layout: HilbertLayout) -> np.ndarray:
    """Photon numbers ``n_j`` of every basis state, shape ``(n_cavities, dim)``."""
    grids = np.unravel_index(np.arange(layout.total_dim), layout.subsystem_dims)
    return np.array(grids[1:])


def effective_hamiltonian(params: SystemParams, layout: HilbertLayout | None = None,
                          n_trunc=10) -> TimeDependentHamiltonian:
    """Pulse-only dispersive model in the frame rotating with the dispersive shifts.

    Every photon-number sector sees ``Omega_p exp(-i phi) exp(2i sum_j lambda_j n_j t) |e><g| + h.c.``;
    sectors with equal rotation frequency share one term.
    """
    layout = _check_layout(params, layout, n_trunc)
    lam = np.array(params.dispersive_shifts)
    if not params.Omega_p:
        return TimeDependentHamiltonian(layout, [])
    levels = np.unravel_index(np.arange(layout.total_dim), layout.subsystem_dims)
    photons = np.array(levels[1:])
    freq = 2.0 * lam @ photons
    ground = np.flatnonzero(levels[0] == G)
    excited = ground + int(np.prod(layout.subsystem_dims[1:]))  # same photons, coupler in e
    scale = max(1.0, float(np.max(np.abs(freq))))
    keys = np.round(freq[ground] / scale, 12)
    terms = []
    n = layout.total_dim
    for key in np.unique(keys):
        sel = ground[keys == key]
        m = sp.csr_matrix((np.full(sel.size, params.Omega_p, dtype=complex), (excited[keys == key], sel)),
                          shape=(n, n))
        terms.append(HamiltonianTerm(SparseOperator(layout, m), float(freq[sel[0]]), -params.phi,
                                     f"sector nu={freq[sel[0]]:.6g}"))
    return TimeDependentHamiltonian(layout, terms)


def dispersive_frame_energies(params: SystemParams, layout: HilbertLayout) -> np.ndarray:
    """Diagonal of ``H0 = sum_j lambda_j (n_j + 1/2) sigma_z`` (sigma_z = |e><e| - |g><g|)."""
    lam = np.array(params.dispersive_shifts)
    levels = np.unravel_index(np.arange(layout.total_dim), layout.subsystem_dims)
    sz = np.where(levels[0] == E, 1.0, np.where(levels[0] == G, -1.0, 0.0))
    return (lam @ (np.array(levels[1:]) + 0.5)) * sz


def pulse_frequency(params: SystemParams) -> float:
    """Drive frequency ``omega_eg + sum_j g_j^2/Delta_j`` that makes the vacuum sector resonant."""
    return params.omega_eg + sum(params.dispersive_shifts)


@dataclass(frozen=True)
class DispersiveCheck:
    name: str
    ratio: float
    passed: bool


@dataclass(frozen=True)
class DispersiveReport:
    checks: tuple[DispersiveCheck, ...]
    mean_photon_numbers: tuple[float, ...]
    ratio_floor: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def ratio(self, name: str) -> float:
        for c in self.checks:
            if c.name == name:
                return c.ratio
        raise KeyError(name)


def _ratio(num: float, den: float) -> float:
    return math.inf if den == 0 else num / den


def validate_dispersive_regime(params: SystemParams, encodings: Sequence = (), ratio_floor: float = 10.0
                               ) -> DispersiveReport:
    """Ratios (left side / right side) of the dispersive-regime inequalities.

    Never raises; failing checks are logged as warnings.
    """
    from .encodings import orthogonality_report

    delta = params.delta
    checks = []
    for j, (gj, dj) in enumerate(zip(params.g, delta), start=1):
        checks.append(("|Delta_%d|/g_%d" % (j, j), _ratio(abs(dj), gj)))
    for j, k in itertools.combinations(range(params.n_cavities), 2):
        dj, dk = delta[j], delta[k]
        if dj == 0 or dk == 0:
            lhs = 0.0
        else:
            lhs = abs(dj - dk) / (abs(1 / dj) + abs(1 / dk))
        checks.append((f"cavity-cavity {j + 1}{k + 1}", _ratio(lhs, params.g[j] * params.g[k])))
    for j, dj in enumerate(delta, start=1):
        checks.append((f"|Delta_{j}|/Omega_p", _ratio(abs(dj), params.Omega_p)))

    nbar: list[float] = []
    if encodings:
        if len(encodings) == 1:
            encodings = list(encodings) * params.n_cavities
        nbar = [orthogonality_report(s).mean_photon_number for s in encodings]
        lam = [gj**2 / dj if dj else math.inf for gj, dj in zip(params.g, delta)]
        for j, (lj, nj) in enumerate(zip(lam, nbar), start=1):
            checks.append((f"2|lambda_{j}|nbar_{j}/Omega_p", _ratio(2 * abs(lj) * nj, params.Omega_p)))

    out = tuple(DispersiveCheck(name, ratio, ratio >= ratio_floor) for name, ratio in checks)
    for c in out:
        if not c.passed:
            log.warning("dispersive condition %s has ratio %.3g < %g", c.name, c.ratio, ratio_floor)
    return DispersiveReport(out, tuple(nbar), ratio_floor)
