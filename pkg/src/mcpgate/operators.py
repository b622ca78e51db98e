"""Sparse operator algebra over truncated tensor-product Hilbert spaces.

Subsystem 0 is the coupler; subsystems 1..n are the cavities, each truncated
to a finite number of Fock levels.  Operators are stored as CSR matrices,
density matrices as dense arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "HilbertLayout",
    "SparseOperator",
    "PureState",
    "DensityMatrix",
    "LayoutError",
    "InvalidDimensionError",
    "InvalidLevelError",
    "annihilation",
    "creation",
    "number",
    "coupler_transition",
    "embed",
    "apply",
    "sandwich",
    "tensor_states",
]


class LayoutError(ValueError):
    """Operands live on incompatible Hilbert layouts."""


class InvalidDimensionError(ValueError):
    pass


class InvalidLevelError(IndexError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered subsystem dimensions: coupler first, then each cavity."""

    subsystem_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.subsystem_dims)
        if not dims:
            raise InvalidDimensionError("layout needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise InvalidDimensionError(f"every subsystem dimension must be >= 2, got {dims}")
        object.__setattr__(self, "subsystem_dims", dims)

    @classmethod
    def cavities(cls, coupler_levels: int, n_trunc: int | Sequence[int], n_cavities: int | None = None):
        if isinstance(n_trunc, int):
            if n_cavities is None:
                raise ValueError("n_cavities required with a scalar truncation")
            n_trunc = [n_trunc] * n_cavities
        return cls((coupler_levels, *n_trunc))

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.subsystem_dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.subsystem_dims)

    def pack(self, indices: Sequence[int]) -> int:
        if len(indices) != self.n_subsystems:
            raise LayoutError(f"expected {self.n_subsystems} indices, got {len(indices)}")
        for i, d in zip(indices, self.subsystem_dims):
            if not 0 <= i < d:
                raise InvalidLevelError(f"index {i} out of range for subsystem of dim {d}")
        return int(np.ravel_multi_index(tuple(indices), self.subsystem_dims))

    def unpack(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.total_dim:
            raise InvalidLevelError(f"global index {index} out of range [0, {self.total_dim})")
        return tuple(int(i) for i in np.unravel_index(index, self.subsystem_dims))

    def level_grid(self, subsystem: int) -> np.ndarray:
        """Level of ``subsystem`` for every global basis index."""
        return np.unravel_index(np.arange(self.total_dim), self.subsystem_dims)[subsystem]


@dataclass(frozen=True, eq=False)
class SparseOperator:
    layout: HilbertLayout
    matrix: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise LayoutError(f"matrix shape {m.shape} does not match layout dim {n}")
        m.eliminate_zeros()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, layout: HilbertLayout) -> "SparseOperator":
        return cls(layout, sp.identity(layout.total_dim, dtype=complex, format="csr"))

    @classmethod
    def zero(cls, layout: HilbertLayout) -> "SparseOperator":
        return cls(layout, sp.csr_matrix((layout.total_dim, layout.total_dim), dtype=complex))

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def entries(self) -> dict[tuple[int, int], complex]:
        coo = self.matrix.tocoo()
        return {(int(r), int(c)): complex(v) for r, c, v in zip(coo.row, coo.col, coo.data)}

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.layout, self.matrix.conj().T)

    dag = adjoint

    def _check(self, other: "SparseOperator"):
        if other.layout != self.layout:
            raise LayoutError(f"layout mismatch: {self.layout} vs {other.layout}")

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            self._check(other)
            return SparseOperator(self.layout, self.matrix @ other.matrix)
        if isinstance(other, PureState):
            return apply(self, other)
        return NotImplemented

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.layout, self.matrix - other.matrix)

    def __neg__(self) -> "SparseOperator":
        return SparseOperator(self.layout, -self.matrix)

    def __mul__(self, scalar) -> "SparseOperator":
        if not np.isscalar(scalar):
            return NotImplemented
        return SparseOperator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def commutator(self, other: "SparseOperator") -> "SparseOperator":
        return self @ other - other @ self

    def max_abs_diff(self, other: "SparseOperator") -> float:
        self._check(other)
        d = (self.matrix - other.matrix).tocoo()
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0


@dataclass(frozen=True, eq=False)
class PureState:
    layout: HilbertLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if a.size != self.layout.total_dim:
            raise LayoutError(f"{a.size} amplitudes for layout dim {self.layout.total_dim}")
        object.__setattr__(self, "amplitudes", _frozen(a))

    @classmethod
    def basis(cls, layout: HilbertLayout, levels: Sequence[int]) -> "PureState":
        a = np.zeros(layout.total_dim, dtype=complex)
        a[layout.pack(levels)] = 1.0
        return cls(layout, a)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        return PureState(self.layout, self.amplitudes / self.norm())

    def inner(self, other: "PureState") -> complex:
        """``<self|other>``."""
        if other.layout != self.layout:
            raise LayoutError(f"layout mismatch: {self.layout} vs {other.layout}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __add__(self, other: "PureState") -> "PureState":
        if other.layout != self.layout:
            raise LayoutError("layout mismatch")
        return PureState(self.layout, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "PureState") -> "PureState":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "PureState":
        return PureState(self.layout, self.amplitudes * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    layout: HilbertLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = self.matrix.toarray() if sp.issparse(self.matrix) else np.array(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise LayoutError(f"matrix shape {m.shape} does not match layout dim {n}")
        object.__setattr__(self, "matrix", _frozen(m.astype(complex, copy=False)))

    @classmethod
    def maximally_mixed(cls, layout: HilbertLayout) -> "DensityMatrix":
        return cls(layout, np.eye(layout.total_dim, dtype=complex) / layout.total_dim)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])


def annihilation(dim: int) -> SparseOperator:
    """Truncated bosonic lowering operator, ``<m-1|a|m> = sqrt(m)``."""
    if dim < 2:
        raise InvalidDimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    m = sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, shape=(dim, dim), format="csr")
    return SparseOperator(HilbertLayout((dim,)), m)


def creation(dim: int) -> SparseOperator:
    return annihilation(dim).adjoint()


def number(dim: int) -> SparseOperator:
    if dim < 2:
        raise InvalidDimensionError(f"number operator needs dim >= 2, got {dim}")
    return SparseOperator(HilbertLayout((dim,)), sp.diags(np.arange(dim, dtype=float), 0, format="csr"))


def coupler_transition(levels: int, from_level: int, to_level: int) -> SparseOperator:
    """Matrix unit ``|to><from|`` on a coupler with ``levels`` levels."""
    if levels < 2:
        raise InvalidDimensionError(f"coupler needs >= 2 levels, got {levels}")
    for lv in (from_level, to_level):
        if not 0 <= lv < levels:
            raise InvalidLevelError(f"level {lv} out of range for a {levels}-level coupler")
    m = sp.csr_matrix(([1.0], ([to_level], [from_level])), shape=(levels, levels), dtype=complex)
    return SparseOperator(HilbertLayout((levels,)), m)


def embed(op: SparseOperator, subsystem: int, layout: HilbertLayout) -> SparseOperator:
    """Lift a single-subsystem operator to ``I x ... x op x ... x I``."""
    if not 0 <= subsystem < layout.n_subsystems:
        raise LayoutError(f"subsystem {subsystem} not in layout {layout.subsystem_dims}")
    if op.dim != layout.subsystem_dims[subsystem]:
        raise LayoutError(
            f"operator of dim {op.dim} cannot act on subsystem {subsystem} "
            f"of dim {layout.subsystem_dims[subsystem]}"
        )
    left = int(np.prod(layout.subsystem_dims[:subsystem]))
    right = int(np.prod(layout.subsystem_dims[subsystem + 1:]))
    factors = []
    if left > 1:
        factors.append(sp.identity(left, dtype=complex, format="csr"))
    factors.append(op.matrix)
    if right > 1:
        factors.append(sp.identity(right, dtype=complex, format="csr"))
    m = reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)
    return SparseOperator(layout, m)


def apply(op: SparseOperator, state: PureState) -> PureState:
    if op.layout != state.layout:
        raise LayoutError(f"layout mismatch: {op.layout} vs {state.layout}")
    return PureState(state.layout, op.matrix @ state.amplitudes)


def sandwich(op: SparseOperator, rho: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Return the raw products ``(op @ rho, rho @ op)``; no normalization."""
    if op.layout != rho.layout:
        raise LayoutError(f"layout mismatch: {op.layout} vs {rho.layout}")
    left = np.asarray(op.matrix @ rho.matrix)
    right = np.asarray((op.matrix.T @ rho.matrix.T).T)
    return left, right


def tensor_states(states: Sequence[PureState]) -> PureState:
    """Kronecker product of single-subsystem states, in order."""
    dims = []
    amps = np.ones(1, dtype=complex)
    for s in states:
        dims.extend(s.layout.subsystem_dims)
        amps = np.kron(amps, s.amplitudes)
    return PureState(HilbertLayout(tuple(dims)), amps)
