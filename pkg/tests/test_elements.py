import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import photon_states, qubits
from oamtransfer.elements import (
    compose,
    dove_prism,
    hologram_analyze,
    hologram_generate,
    hwp,
    mirror,
    pbs_filter,
    phase,
    polarizer,
    qplate,
    qwp,
    smf,
)
from oamtransfer.errors import PreconditionError, TruncationError
from oamtransfer.hilbert import OAM_STATES, POL_STATES, PhotonState, make_source_state, overlap

s = 1 / np.sqrt(2)


def pol_of(state, m=0):
    return np.array([state.amplitude("H", m), state.amplitude("V", m)])


def same_up_to_phase(a, b, tol=1e-10):
    return abs(abs(np.vdot(a, b)) - np.linalg.norm(a) * np.linalg.norm(b)) < tol


# -- waveplates ----------------------------------------------------------------


@pytest.mark.parametrize("theta", [0, 0.3, np.pi / 8, np.pi / 4, 1.9])
def test_hwp_is_reflection_about_axis(theta):
    out = pol_of(hwp(theta).apply(make_source_state([np.cos(theta), np.sin(theta)])))
    assert np.allclose(out, [np.cos(theta), np.sin(theta)])
    perp = [-np.sin(theta), np.cos(theta)]
    assert np.allclose(pol_of(hwp(theta).apply(make_source_state(perp))), -np.array(perp))


@pytest.mark.parametrize("theta", [0, 0.3, np.pi / 4, 2.2])
def test_qwp_delays_slow_axis_by_quarter_wave(theta):
    fast = [np.cos(theta), np.sin(theta)]
    slow = [-np.sin(theta), np.cos(theta)]
    assert np.allclose(pol_of(qwp(theta).apply(make_source_state(fast))), fast)
    assert np.allclose(pol_of(qwp(theta).apply(make_source_state(slow))), -1j * np.array(slow))


def test_qwp_pair_maps_linear_to_circular_with_common_phase():
    pair = compose(qwp(0.0), qwp(np.pi / 4))
    h = pol_of(pair.apply(make_source_state(POL_STATES["H"])))
    v = pol_of(pair.apply(make_source_state(POL_STATES["V"])))
    ph = np.vdot(POL_STATES["L"], h)
    assert abs(abs(ph) - 1) < 1e-12
    assert np.allclose(h, ph * POL_STATES["L"])
    assert np.allclose(v, ph * POL_STATES["R"])


def test_qwp_90_sends_circular_to_diagonal():
    q = qwp(np.pi / 2)
    assert same_up_to_phase(pol_of(q.apply(make_source_state(POL_STATES["R"]))), POL_STATES["A"])
    assert same_up_to_phase(pol_of(q.apply(make_source_state(POL_STATES["L"]))), POL_STATES["D"])


# -- q-plate ---------------------------------------------------------------------


def _circular_at(pol, m):
    amps = np.zeros((3, 2, 13), dtype=complex)
    amps[0, :, 6 + m] = POL_STATES[pol]
    return PhotonState(amps)


@pytest.mark.parametrize("m", [-2, 0, 3])
def test_qplate_full_conversion_rule(m):
    out = qplate(1).apply(_circular_at("L", m))
    assert np.allclose(pol_of(out, m + 2), 1j * POL_STATES["R"])
    assert out.m_weights()[m + 2] == pytest.approx(1)
    out = qplate(1).apply(_circular_at("R", m))
    assert np.allclose(pol_of(out, m - 2), 1j * POL_STATES["L"])


def test_half_charge_plate_shifts_by_one():
    out = qplate(0.5).apply(_circular_at("L", 0))
    assert out.m_weights()[1] == pytest.approx(1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_conversion_fraction_is_sin2_half_delta(delta):
    out = qplate(1, delta).apply(_circular_at("L", 0))
    assert out.m_weights()[2] == pytest.approx(np.sin(delta / 2) ** 2, abs=1e-12)
    assert out.m_weights()[0] == pytest.approx(np.cos(delta / 2) ** 2, abs=1e-12)


def test_cascade_with_handedness_flip_climbs_to_four():
    out = compose(qplate(1), hwp(0.0), qplate(1)).apply(_circular_at("L", 0))
    assert out.m_weights()[4] == pytest.approx(1)


def test_qplate_adjoint_is_negative_retardation():
    a = qplate(1, 2.1).adjoint().matrix(8)
    b = qplate(1, -2.1).matrix(8)
    assert np.allclose(a, b)


def test_truncation_overflow_detected():
    with pytest.raises(TruncationError):
        qplate(1).apply(_circular_at("L", 5))
    # R at the top rung moves down and is fine
    qplate(1).apply(_circular_at("R", 6))


# -- unitarity and filters -------------------------------------------------------------

UNITARIES = [
    qplate(1),
    qplate(1, 1.3),
    qplate(0.5, 2.0),
    hwp(0.4),
    qwp(1.1),
    phase(0.9),
    dove_prism(0.37),
    mirror(),
    compose(qwp(0.0), qwp(np.pi / 4), qplate(1)),
]


@pytest.mark.parametrize("element", UNITARIES, ids=lambda e: e.name)
def test_unitary_matrices(element):
    # the ladder is truncated, so only inputs that stay inside it are checked
    m_ext = 9
    op = element.local_matrix(m_ext)
    n = 2 * m_ext + 1
    keep = [p * n + k for p in range(2) for k in range(n) if abs(k - m_ext) <= m_ext - element.reach]
    cols = op[:, keep]
    assert np.allclose(cols.conj().T @ cols, np.eye(len(keep)), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(photon_states(), st.sampled_from(UNITARIES))
def test_unitaries_preserve_norm_and_inner_products(state, element):
    out = element.apply(state)
    assert out.norm2 == pytest.approx(state.norm2, abs=1e-12)
    back = element.adjoint().apply(out)
    assert np.allclose(back.amplitudes, state.amplitudes, atol=1e-12)


FILTERS = [polarizer("H"), polarizer("L"), smf(), pbs_filter("reflect_V"), hologram_analyze("h", 2)]


@settings(max_examples=100, deadline=None)
@given(photon_states(), st.sampled_from(FILTERS))
def test_filters_never_increase_norm(state, element):
    assert element.apply(state).norm2 <= state.norm2 + 1e-12


@pytest.mark.parametrize("label", list(POL_STATES))
def test_polarizer_is_projector(label):
    m = polarizer(label).matrix(6)
    assert np.allclose(m @ m, m)
    assert np.allclose(m, m.conj().T)


def test_polarizer_accepts_vector():
    out = polarizer([s, s]).apply(make_source_state(POL_STATES["H"]))
    assert out.norm2 == pytest.approx(0.5)


def test_smf_keeps_only_m0():
    amps = np.zeros((3, 2, 13), dtype=complex)
    amps[0, 0, 6] = 0.6
    amps[0, 0, 8] = 0.8
    assert smf().apply(PhotonState(amps)).norm2 == pytest.approx(0.36)


# -- holograms -------------------------------------------------------------------


@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("label", list(OAM_STATES))
def test_hologram_generate_analyze_adjoint(label, order):
    gen = hologram_generate(label, order)
    ana = hologram_analyze(label, order)
    for m_ext in (order, order + 3):
        assert np.allclose(ana.builder(m_ext), gen.builder(m_ext).conj().T)
    src = make_source_state([0.6, 0.8])
    made = gen.apply(src)
    back = ana.apply(made)
    assert back.norm2 == pytest.approx(1)
    assert overlap(back, src) == pytest.approx(1)
    # projections onto the other cardinals follow the qubit overlaps
    for other in OAM_STATES:
        p = hologram_analyze(other, order).apply(made).norm2
        assert p == pytest.approx(abs(np.vdot(OAM_STATES[other], OAM_STATES[label])) ** 2, abs=1e-12)


def test_hologram_efficiency_scales_probability():
    made = hologram_generate("l", 2, efficiency=0.3).apply(make_source_state([1, 0]))
    assert made.norm2 == pytest.approx(0.3)
    assert hologram_analyze("l", 2, efficiency=0.5).apply(made).norm2 == pytest.approx(0.15)


def test_hologram_invert_swaps_sign():
    made = hologram_generate("l", 2).apply(make_source_state([1, 0]))
    assert hologram_analyze("r", 2, invert=True).apply(made).norm2 == pytest.approx(1)


def test_hologram_generation_needs_m0_input():
    with pytest.raises(PreconditionError):
        hologram_generate("h", 2).apply(PhotonState.basis("H", 2))


def test_hologram_rejects_bad_efficiency():
    with pytest.raises(ValueError):
        hologram_generate("h", 2, efficiency=1.5)


# -- Dove prisms -----------------------------------------------------------------


def _oam_block(op, m_max, ms):
    idx = [m + m_max for m in ms]
    return op[np.ix_(idx, idx)]


@pytest.mark.parametrize("alpha", [0.0, 0.3, np.pi / 8])
def test_dove_twice_is_identity(alpha):
    d = dove_prism(alpha).matrix(6)
    assert np.allclose(d @ d, np.eye(d.shape[0]))


def test_dove_pair_is_sigma_z_on_m2():
    op = compose(dove_prism(np.pi / 8), dove_prism(0.0)).local_matrix(6)
    oam = op[:13, :13]  # H block, polarization untouched
    block = _oam_block(oam, 6, [2, -2])
    sigma_z = np.diag([1, -1])
    g = block[0, 0]
    assert abs(abs(g) - 1) < 1e-10
    assert np.max(np.abs(block - g * sigma_z)) < 1e-10
    assert g == pytest.approx(-1j)


def test_pi16_pair_gives_relative_sigma_z():
    arm_a = compose(dove_prism(-np.pi / 16), mirror()).local_matrix(6)[:13, :13]
    arm_b = compose(dove_prism(np.pi / 16), phase(np.pi / 2), mirror()).local_matrix(6)[:13, :13]
    rel = _oam_block(arm_a.conj().T @ arm_b, 6, [2, -2])
    assert np.allclose(rel, np.diag([1, -1]), atol=1e-12)


def test_mirror_flips_oam():
    out = mirror().apply(PhotonState.basis("V", 3))
    assert out.amplitude("V", -3) == pytest.approx(1)
    assert mirror().flips_oam and dove_prism(0.1).flips_oam and not hwp(0).flips_oam


@settings(max_examples=100, deadline=None)
@given(photon_states(), st.lists(st.sampled_from(UNITARIES), min_size=1, max_size=2))
def test_compose_matches_sequential(state, elems):
    seq = state
    for e in elems:
        seq = e.apply(seq)
    assert np.allclose(compose(*elems).apply(state).amplitudes, seq.amplitudes, atol=1e-12)


@given(qubits())
@settings(max_examples=20, deadline=None)
def test_element_path_restriction(q):
    amps = np.zeros((3, 2, 13), dtype=complex)
    amps[1, :, 6] = q * s
    amps[2, :, 6] = q * s
    out = hwp(np.pi / 4).apply(PhotonState(amps), path="arm_b")
    assert np.allclose(out.amplitudes[1, :, 6], q * s)
    assert np.allclose(out.amplitudes[2, :, 6], q[::-1] * s)
