import itertools
import math

import numpy as np
import pytest

from conftest import GHZ, MHZ
from mcpgate.encodings import EncodedQubitSpec
from mcpgate.gate import (
    EncodingViolationError,
    InvalidScheduleError,
    LogicalRegister,
    NumericalCorruptionError,
    fidelity,
    ideal_mcp_output,
    matched_couplings,
    mcp_truth_table,
    phase_identity_check,
    schedule,
    toffoli_from_mcp,
)
from mcpgate.operators import DensityMatrix, HilbertLayout, LayoutError, PureState, tensor_states
from mcpgate.encodings import build_state

CAT = EncodedQubitSpec.cat_odd(1.0, 10)


def test_matched_couplings():
    assert matched_couplings([1.0, 1.0, 1.0], 0.2) == pytest.approx([0.2, 0.2, 0.2])
    g = matched_couplings([2.0 * GHZ, 2.78 * GHZ, 3.5 * GHZ], 0.123 * GHZ)
    assert [x / GHZ for x in g] == pytest.approx([0.123, 0.145, 0.163], abs=5e-4)
    d = [3.0, 5.0, 7.0]
    g = matched_couplings(d, 0.5)
    assert g[1] == pytest.approx(math.sqrt(d[1] / d[0]) * 0.5)
    assert g[2] == pytest.approx(math.sqrt(d[2] / d[0]) * 0.5)
    with pytest.raises(ZeroDivisionError):
        matched_couplings([1.0, 0.0], 0.1)


def test_schedule_table1_values():
    sch = schedule(7.56 * MHZ, 2, 1)
    assert sch.Omega_p / MHZ == pytest.approx(1.89, abs=5e-3)
    assert sch.gate_time * 1e6 == pytest.approx(0.26, abs=5e-3)
    one = schedule(3.0, 1, 1)
    assert one.Omega_p == pytest.approx(1.5) and one.gate_time == pytest.approx(2 * math.pi / 3.0)


@pytest.mark.parametrize("lam,k,s", [(1.0, 1, 3), (4.7e7, 2, 1), (2.2e6, 5, 7)])
def test_schedule_equalities(lam, k, s):
    sch = schedule(lam, k, s)
    assert sch.lam * sch.gate_time == pytest.approx(2 * k * math.pi, rel=1e-12)
    assert sch.Omega_p * sch.gate_time == pytest.approx(s * math.pi, rel=1e-12)
    assert sch.Omega_p == pytest.approx(s / (2 * k) * lam, rel=1e-12)


@pytest.mark.parametrize("k,s", [(2, 2), (1, 0), (0, 1), (1.5, 1), (1, -1)])
def test_schedule_rejects(k, s):
    with pytest.raises(InvalidScheduleError):
        schedule(1.0, k, s)
    with pytest.raises(InvalidScheduleError):
        schedule(-1.0, 1, 1)


def test_ideal_output_examples():
    reg = LogicalRegister(3, CAT)
    vac = reg.basis_state((0, 0, 0))
    assert np.allclose(ideal_mcp_output(vac, reg).amplitudes, -vac.amplitudes, atol=1e-12)
    full = reg.basis_state((1, 1, 1))
    assert np.allclose(ideal_mcp_output(full, reg).amplitudes, full.amplitudes, atol=1e-12)
    uni = reg.uniform_state()
    expected = sum((-1 if l == (0, 0, 0) else 1) * reg.basis_state(l).amplitudes for l in reg.all_labels())
    expected /= math.sqrt(8)
    assert np.allclose(ideal_mcp_output(uni, reg).amplitudes, expected, atol=1e-12)


@pytest.mark.parametrize("enc", [CAT, EncodedQubitSpec.fock(1, 3), EncodedQubitSpec.coherent(2.0, 24)])
def test_ideal_output_involution_and_norm(enc, rng):
    reg = LogicalRegister(2, enc)
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi = PureState(reg.layout(), reg.basis_matrix() @ c).normalized()
    once = ideal_mcp_output(psi, reg)
    if enc.kind != "coherent":
        # the coherent basis is only quasi-orthogonal, so a sign flip moves the norm slightly
        assert abs(once.norm() - 1) < 1e-12
    twice = ideal_mcp_output(once, reg)
    assert np.allclose(twice.amplitudes, psi.amplitudes, atol=1e-10)


def test_ideal_output_rejects_leakage():
    reg = LogicalRegister(2, EncodedQubitSpec.fock(1, 3))
    lay = reg.layout()
    bad = PureState.basis(lay, (1, 0, 0))
    with pytest.raises(EncodingViolationError) as info:
        ideal_mcp_output(bad, reg)
    assert info.value.residual == pytest.approx(1.0)
    with pytest.raises(LayoutError):
        ideal_mcp_output(PureState.basis(HilbertLayout((2, 3)), (0, 0)), reg)


def test_phase_identity_cat():
    phi = build_state(CAT)
    vac = PureState.basis(phi.layout, (0,))
    state = tensor_states([vac, phi, phi])
    assert phase_identity_check([state], 2, (1, 1, 1)) < 1e-12


def test_phase_identity_seven_combinations():
    phi = build_state(CAT)
    vac = PureState.basis(phi.layout, (0,))
    states = [tensor_states([phi if b else vac for b in bits])
              for bits in itertools.product((0, 1), repeat=3) if any(bits)]
    assert len(states) == 7
    for signs in [(1, 1, 1), (-1, 1, -1)]:
        assert phase_identity_check(states, 2, signs) < 1e-12


def test_phase_identity_fock_any_k():
    lay = HilbertLayout((6, 6))
    for k in (1, 3, 7):
        for m in itertools.product(range(6), repeat=2):
            assert phase_identity_check([PureState.basis(lay, m)], k, (1, -1)) < 1e-11
    with pytest.raises(ValueError):
        phase_identity_check([PureState.basis(lay, (1, 1))], 1, (1,))


def test_phase_identity_detects_half_integer_k():
    phi = build_state(CAT)
    assert phase_identity_check([phi], 0.25, (1,)) > 0.1


def test_fidelity_examples(rng):
    lay = HilbertLayout((2, 3))
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi = PureState(lay, v).normalized()
    assert fidelity(psi.to_density(), psi) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)
    a, b = PureState.basis(lay, (0, 0)), PureState.basis(lay, (1, 2))
    assert fidelity(b.to_density(), a) == 0.0
    assert fidelity(DensityMatrix.maximally_mixed(lay), psi) == pytest.approx(1 / math.sqrt(6), abs=1e-12)


def test_fidelity_clamps_and_errors():
    lay = HilbertLayout((2,))
    psi = PureState.basis(lay, (0,))
    tiny = DensityMatrix(lay, np.diag([-1e-12, 1.0]).astype(complex))
    assert fidelity(tiny, psi) == 0.0
    bad = DensityMatrix(lay, np.diag([-1e-3, 1.0]).astype(complex))
    with pytest.raises(NumericalCorruptionError):
        fidelity(bad, psi)
    with pytest.raises(LayoutError):
        fidelity(PureState.basis(HilbertLayout((3,)), (0,)), psi)


def test_truth_table_and_toffoli():
    assert toffoli_from_mcp((1, 1, 0)) == (1, 1, 1)
    assert toffoli_from_mcp((1, 1, 1)) == (1, 1, 0)
    assert toffoli_from_mcp((1, 0, 0)) == (1, 0, 0)
    assert toffoli_from_mcp((1, 0, 1)) == (1, 0, 1)
    for n in range(1, 5):
        for bits in itertools.product((0, 1), repeat=n):
            flip = all(bits[:-1])
            expected = bits[:-1] + ((1 - bits[-1]) if flip else bits[-1],)
            assert toffoli_from_mcp(bits) == expected
            assert mcp_truth_table(bits) == (-1 if all(bits) else 1)
    with pytest.raises(ValueError):
        toffoli_from_mcp((2, 0))


def test_register_labels():
    reg = LogicalRegister(3, CAT)
    assert reg.all_labels()[0] == (0, 0, 0)
    assert LogicalRegister.logical_bits((0, 1, 0)) == (1, 0, 1)
    assert reg.uniform_state().norm() == pytest.approx(1.0)
    assert reg.layout(3).subsystem_dims == (3, 10, 10, 10)
    with pytest.raises(ValueError):
        LogicalRegister(0, CAT)
