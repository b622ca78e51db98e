"""Property-based checks of the structural invariants."""
import math

import numpy as np
import scipy.sparse as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mcpgate.encodings import EncodedQubitSpec, build_state, fock_coefficients, orthogonality_report
from mcpgate.gate import LogicalRegister, ideal_mcp_output, schedule
from mcpgate.model import SystemParams, ideal_hamiltonian, perturbation_hamiltonian, pulse_frequency
from mcpgate.operators import HilbertLayout, PureState, SparseOperator, embed

GHZ = 2 * math.pi * 1e9

dims = st.lists(st.integers(2, 5), min_size=1, max_size=4).map(tuple)


@st.composite
def layout_and_index(draw):
    lay = HilbertLayout(draw(dims))
    return lay, draw(st.integers(0, lay.total_dim - 1))


@st.composite
def random_operator(draw, layout, density=0.3):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n = layout.total_dim
    m = sp.random(n, n, density=density, random_state=rng, format="csr", dtype=float)
    m = m + 1j * sp.random(n, n, density=density, random_state=rng, format="csr", dtype=float)
    return SparseOperator(layout, m)


@given(layout_and_index())
def test_layout_round_trip(case):
    lay, idx = case
    assert lay.pack(lay.unpack(idx)) == idx


@given(st.data())
@settings(max_examples=40)
def test_operator_algebra(data):
    lay = HilbertLayout(data.draw(st.lists(st.integers(2, 3), min_size=1, max_size=3).map(tuple)))
    a, b, c = (data.draw(random_operator(lay)) for _ in range(3))
    assert a.adjoint().adjoint().max_abs_diff(a) == 0.0
    assert ((a @ b) @ c).max_abs_diff(a @ (b @ c)) < 1e-12
    assert (a @ b).adjoint().max_abs_diff(b.adjoint() @ a.adjoint()) < 1e-12


@given(st.data())
@settings(max_examples=40)
def test_embed_preserves_structure(data):
    dims_ = data.draw(st.lists(st.integers(2, 4), min_size=1, max_size=3).map(tuple))
    lay = HilbertLayout(dims_)
    j = data.draw(st.integers(0, len(dims_) - 1))
    local = HilbertLayout((dims_[j],))
    x, y = data.draw(random_operator(local, 0.6)), data.draw(random_operator(local, 0.6))
    ex, ey = embed(x, j, lay), embed(y, j, lay)
    assert embed(x.adjoint(), j, lay).max_abs_diff(ex.adjoint()) < 1e-14
    assert embed(x @ y, j, lay).max_abs_diff(ex @ ey) < 1e-12


encodings = st.one_of(
    st.builds(EncodedQubitSpec.fock, st.integers(1, 6), st.just(12)),
    st.builds(EncodedQubitSpec.cat_odd, st.floats(0.2, 2.0), st.just(30)),
    st.builds(EncodedQubitSpec.multi_cat, st.floats(0.2, 2.0), st.just(30)),
    st.builds(EncodedQubitSpec.coherent, st.floats(0.0, 2.0), st.just(30)),
    st.builds(EncodedQubitSpec.squeezed_vacuum, st.floats(0.0, 1.0), st.floats(0, 2 * math.pi), st.just(40)),
)


@given(encodings)
@settings(max_examples=60)
def test_encoding_normalized(spec):
    psi = build_state(spec, max_loss=1e-4)
    assert abs(psi.norm() - 1) < 1e-10


@given(st.floats(0.2, 2.0), st.sampled_from(["cat_odd", "multi_cat"]))
def test_odd_cats_have_odd_support(alpha, kind):
    c = fock_coefficients(EncodedQubitSpec(kind, n_trunc=30, alpha=alpha))
    assert np.all(c[0::2] == 0)
    assert orthogonality_report(EncodedQubitSpec(kind, n_trunc=30, alpha=alpha)).overlap_magnitude == 0.0


@given(encodings)
@settings(max_examples=40)
def test_vacuum_overlap_converged_in_truncation(spec):
    a = orthogonality_report(spec).overlap_magnitude
    b = orthogonality_report(spec.with_truncation(2 * spec.n_trunc)).overlap_magnitude
    assert abs(a - b) < 1e-8


@given(st.floats(0.0, 2.0), st.floats(0.0, 2 * math.pi))
def test_squeezed_vacuum_overlap_ignores_theta(r, theta):
    a = orthogonality_report(EncodedQubitSpec.squeezed_vacuum(r, 0.0, 40)).overlap_magnitude
    b = orthogonality_report(EncodedQubitSpec.squeezed_vacuum(r, theta, 40)).overlap_magnitude
    assert abs(a - b) < 1e-14
    assert abs(a - 1 / math.sqrt(math.cosh(r))) < 1e-12


@st.composite
def systems(draw):
    n = draw(st.integers(1, 2))
    weg = 6.5 * GHZ
    deltas = [draw(st.floats(0.5, 3.0)) * GHZ * draw(st.sampled_from([1, -1])) for _ in range(n)]
    assume(all(weg - d > 0 for d in deltas))
    g = [draw(st.floats(0.01, 0.2)) * GHZ for _ in range(n)]
    cross = {(1, 2): draw(st.floats(0, 5e-3)) * GHZ} if n == 2 else {}
    return SystemParams(n, weg, tuple(weg - d for d in deltas), tuple(g), omega_fe=7 * GHZ,
                        omega_fg=13.5 * GHZ, g_prime=tuple(g), g_cross=cross,
                        Omega_p=draw(st.floats(0, 0.01)) * GHZ, Omega_p_prime=1e-3 * GHZ,
                        phi=draw(st.floats(0, 2 * math.pi)), coupler_levels=3)


@given(systems(), st.floats(0, 1e-6))
@settings(max_examples=40, deadline=None)
def test_hamiltonian_hermitian(p, t):
    lay = p.layout(3)
    wp = pulse_frequency(p)
    m = (ideal_hamiltonian(p, wp, lay) + perturbation_hamiltonian(p, wp, lay)).matrix(t)
    assert abs(m - m.conj().T).max() <= 1e-12 * max(1.0, abs(m).max())


@given(systems(), st.floats(0.1, 10.0))
@settings(max_examples=40, deadline=None)
def test_pulse_frequency_scale_invariance(p, c):
    """Scaling every frequency by c scales omega_p by c."""
    q = p.replace(omega_eg=c * p.omega_eg, omega_c=tuple(c * w for w in p.omega_c), g=tuple(c * x for x in p.g),
                  omega_fe=c * p.omega_fe, omega_fg=c * p.omega_fg)
    assert math.isclose(pulse_frequency(q), c * pulse_frequency(p), rel_tol=1e-12)


@given(st.floats(1e3, 1e9), st.integers(1, 20), st.integers(0, 10).map(lambda x: 2 * x + 1))
def test_schedule_equalities(lam, k, s):
    sch = schedule(lam, k, s)
    assert math.isclose(sch.lam * sch.gate_time, 2 * k * math.pi, rel_tol=1e-12)
    assert math.isclose(sch.Omega_p * sch.gate_time, s * math.pi, rel_tol=1e-12)


@given(st.lists(st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False),
                min_size=8, max_size=8))
@settings(max_examples=40)
def test_ideal_output_involution(coeffs):
    c = np.array(coeffs)
    assume(np.linalg.norm(c) > 1e-3)
    reg = LogicalRegister(3, EncodedQubitSpec.cat_odd(1.0, 8), max_loss=1e-3)
    psi = PureState(reg.layout(), reg.basis_matrix() @ c).normalized()
    once = ideal_mcp_output(psi, reg)
    assert abs(once.norm() - 1) < 1e-12
    assert np.max(np.abs(ideal_mcp_output(once, reg).amplitudes - psi.amplitudes)) < 1e-12
