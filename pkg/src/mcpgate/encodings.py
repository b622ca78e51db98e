"""Bosonic logical states and their overlap with the cavity vacuum.

Every encoding is generated from its Fock-basis series.  The series is
first evaluated on an extended support large enough to hold essentially all
of the state's weight; that exact normalization gives the vacuum overlap
and the mass lost when the state is cut to ``n_trunc`` levels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma, log
from typing import Sequence

import numpy as np

from .operators import HilbertLayout, LayoutError, PureState

__all__ = [
    "EncodedQubitSpec",
    "OrthogonalityReport",
    "TruncationError",
    "InvalidParameterError",
    "KINDS",
    "build_state",
    "vacuum",
    "overlap",
    "orthogonality_report",
    "mean_photon_number",
    "printed_cat_normalization",
    "fock_coefficients",
]

KINDS = ("fock", "fock_superposition", "cat_odd", "multi_cat", "coherent", "squeezed_vacuum")
DEFAULT_THRESHOLD = 1e-2
MAX_TRUNCATION_LOSS = 1e-6


class TruncationError(ValueError):
    def __init__(self, lost_mass: float, n_trunc: int):
        super().__init__(f"truncation at {n_trunc} levels discards weight {lost_mass:.3e}")
        self.lost_mass = lost_mass
        self.n_trunc = n_trunc


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class EncodedQubitSpec:
    """The non-vacuum logical state ``|phi>`` of one photonic qubit.

    Only the parameters relevant to ``kind`` are read: ``m`` for ``fock``,
    ``coefficients`` (indexed by photon number) for ``fock_superposition``,
    ``alpha`` for the cat and coherent kinds, ``r``/``theta`` for
    ``squeezed_vacuum``.
    """

    kind: str
    n_trunc: int = 10
    m: int = 1
    coefficients: tuple[complex, ...] = ()
    alpha: complex = 1.0
    r: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown encoding kind {self.kind!r}; expected one of {KINDS}")
        if self.n_trunc < 2:
            raise InvalidParameterError("n_trunc must be >= 2")
        object.__setattr__(self, "coefficients", tuple(complex(c) for c in self.coefficients))
        if self.kind == "fock" and self.m < 0:
            raise InvalidParameterError("Fock level must be >= 0")
        if self.kind == "fock_superposition" and not any(self.coefficients):
            raise InvalidParameterError("fock_superposition needs a nonzero coefficient list")
        if self.kind == "squeezed_vacuum" and self.r < 0:
            raise InvalidParameterError(f"squeezing r must be >= 0, got {self.r}")

    @classmethod
    def fock(cls, m: int = 1, n_trunc: int = 10):
        return cls("fock", n_trunc=n_trunc, m=m)

    @classmethod
    def fock_superposition(cls, coefficients: Sequence[complex], n_trunc: int = 10):
        return cls("fock_superposition", n_trunc=n_trunc, coefficients=tuple(coefficients))

    @classmethod
    def cat_odd(cls, alpha: complex = 1.0, n_trunc: int = 10):
        return cls("cat_odd", n_trunc=n_trunc, alpha=alpha)

    @classmethod
    def multi_cat(cls, alpha: complex = 1.0, n_trunc: int = 10):
        return cls("multi_cat", n_trunc=n_trunc, alpha=alpha)

    @classmethod
    def coherent(cls, alpha: complex = 1.0, n_trunc: int = 10):
        return cls("coherent", n_trunc=n_trunc, alpha=alpha)

    @classmethod
    def squeezed_vacuum(cls, r: float, theta: float = 0.0, n_trunc: int = 10):
        return cls("squeezed_vacuum", n_trunc=n_trunc, r=r, theta=theta)

    def with_truncation(self, n_trunc: int) -> "EncodedQubitSpec":
        return EncodedQubitSpec(self.kind, n_trunc, self.m, self.coefficients, self.alpha, self.r, self.theta)

    def label(self) -> str:
        if self.kind == "fock":
            return f"fock(m={self.m})"
        if self.kind == "fock_superposition":
            return "fock_superposition(" + ",".join(f"{c:.4g}" for c in self.coefficients) + ")"
        if self.kind == "squeezed_vacuum":
            return f"squeezed_vacuum(r={self.r:g},theta={self.theta:g})"
        return f"{self.kind}(alpha={complex(self.alpha):g})"


@dataclass(frozen=True)
class OrthogonalityReport:
    spec: EncodedQubitSpec
    overlap_magnitude: float
    threshold: float
    passed: bool
    mean_photon_number: float
    lost_mass: float
    notes: tuple[str, ...] = field(default=())


def printed_cat_normalization(alpha: complex) -> float:
    """Cat prefactor ``1/sqrt(2(1 + exp(-2|alpha|^2)))`` as quoted for the odd cat.

    This is the even-cat value; ``build_state`` renormalizes numerically,
    which yields the exact odd-cat factor ``1/sqrt(2(1 - exp(-2|alpha|^2)))``.
    """
    return 1.0 / np.sqrt(2.0 * (1.0 + np.exp(-2.0 * abs(alpha) ** 2)))


def _coherent_series(alpha: complex, size: int) -> np.ndarray:
    n = np.arange(size)
    a = complex(alpha)
    if a == 0:
        out = np.zeros(size, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -abs(a) ** 2 / 2 + n * log(abs(a)) - 0.5 * np.array([lgamma(k + 1) for k in n])
    # powers of the unit phase by repeated products: exact for +-1 and +-i
    phase = np.cumprod(np.concatenate(([1.0 + 0j], np.full(size - 1, a / abs(a)))))
    return np.exp(logmag) * phase


def _squeezed_series(r: float, theta: float, size: int) -> np.ndarray:
    out = np.zeros(size, dtype=complex)
    if r == 0:
        out[0] = 1.0
        return out
    t = np.tanh(r)
    m = np.arange((size + 1) // 2)
    logmag = (
        -0.5 * np.log(np.cosh(r))
        + m * np.log(t)
        + 0.5 * np.array([lgamma(2 * k + 1) for k in m])
        - m * log(2.0)
        - np.array([lgamma(k + 1) for k in m])
    )
    out[0::2] = np.exp(logmag) * (-np.exp(1j * theta)) ** m
    return out


def _series(spec: EncodedQubitSpec, size: int) -> np.ndarray:
    """Unnormalized Fock amplitudes ``c_0 .. c_{size-1}``."""
    k = spec.kind
    if k == "fock":
        out = np.zeros(size, dtype=complex)
        if spec.m < size:
            out[spec.m] = 1.0
        return out
    if k == "fock_superposition":
        out = np.zeros(size, dtype=complex)
        c = np.asarray(spec.coefficients, dtype=complex)[:size]
        out[: c.size] = c
        return out
    if k == "coherent":
        return _coherent_series(spec.alpha, size)
    if k == "cat_odd":
        a = complex(spec.alpha)
        return printed_cat_normalization(a) * (_coherent_series(a, size) - _coherent_series(-a, size))
    if k == "multi_cat":
        a = complex(spec.alpha)
        return (
            _coherent_series(a, size)
            - _coherent_series(-a, size)
            + _coherent_series(1j * a, size)
            - _coherent_series(-1j * a, size)
        )
    return _squeezed_series(spec.r, spec.theta, size)


def _support_size(spec: EncodedQubitSpec) -> int:
    """Fock support that captures the series to double precision."""
    if spec.kind == "fock":
        return max(spec.n_trunc, spec.m + 1)
    if spec.kind == "fock_superposition":
        return max(spec.n_trunc, len(spec.coefficients))
    size = max(spec.n_trunc, 64)
    while True:
        c = _series(spec, size)
        w = np.abs(c) ** 2
        if w[size // 2:].sum() <= 1e-20 * w.sum() or size > 1 << 16:
            return size
        size *= 2


def fock_coefficients(spec: EncodedQubitSpec) -> np.ndarray:
    """Exactly normalized Fock amplitudes on the full (untruncated) support."""
    c = _series(spec, _support_size(spec))
    norm = np.linalg.norm(c)
    if norm == 0:
        raise InvalidParameterError(f"{spec.label()} has zero norm")
    return c / norm


def _truncation_loss(spec: EncodedQubitSpec) -> tuple[np.ndarray, float]:
    full = fock_coefficients(spec)
    kept = full[: spec.n_trunc]
    lost = max(0.0, 1.0 - float(np.sum(np.abs(kept) ** 2)))
    return kept, lost


def build_state(spec: EncodedQubitSpec, max_loss: float = MAX_TRUNCATION_LOSS) -> PureState:
    """Normalized single-cavity state for ``spec`` on ``n_trunc`` levels.

    Raises
    ------
    TruncationError
        if more than ``max_loss`` of the state's weight lies above the cutoff.
    """
    kept, lost = _truncation_loss(spec)
    if lost > max_loss:
        raise TruncationError(lost, spec.n_trunc)
    return PureState(HilbertLayout((spec.n_trunc,)), kept / np.linalg.norm(kept))


def vacuum(n_trunc: int) -> PureState:
    return PureState.basis(HilbertLayout((n_trunc,)), (0,))


def overlap(a: PureState, b: PureState) -> complex:
    """Inner product ``<a|b>``."""
    if a.layout != b.layout:
        raise LayoutError(f"layout mismatch: {a.layout} vs {b.layout}")
    return a.inner(b)


def mean_photon_number(state: PureState) -> float:
    if state.layout.n_subsystems != 1:
        raise LayoutError("mean_photon_number expects a single-mode state")
    p = np.abs(state.amplitudes) ** 2
    return float(np.dot(np.arange(p.size), p) / p.sum())


def orthogonality_report(spec: EncodedQubitSpec, threshold: float = DEFAULT_THRESHOLD) -> OrthogonalityReport:
    """Vacuum overlap ``|<0|phi>|`` against ``threshold``, plus mean photon number.

    The overlap is taken from the exactly normalized series, so it does not
    depend on the truncation; the weight lost at ``spec.n_trunc`` is reported
    alongside.
    """
    full = fock_coefficients(spec)
    ov = float(abs(full[0]))
    p = np.abs(full) ** 2
    nbar = float(np.dot(np.arange(p.size), p))
    lost = max(0.0, 1.0 - float(p[: spec.n_trunc].sum()))
    notes = []
    if lost > MAX_TRUNCATION_LOSS:
        notes.append(f"truncation at {spec.n_trunc} levels discards {lost:.2e} of the weight")
    return OrthogonalityReport(spec, ov, threshold, ov <= threshold, nbar, lost, tuple(notes))
