import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qtp import statekit as sk
from qtp.errors import InvalidAngleError

angles = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)


def random_state(rng):
    h = complex(rng.normal(), rng.normal())
    v = complex(rng.normal(), rng.normal())
    return sk.PureState.normalized(h, v)


@st.composite
def states(draw):
    theta = draw(st.floats(0.0, math.pi / 2))
    a = draw(st.floats(-math.pi, math.pi))
    b = draw(st.floats(-math.pi, math.pi))
    return sk.PureState(math.cos(theta) * cmath.exp(1j * a), math.sin(theta) * cmath.exp(1j * b))


def test_basis_states():
    assert sk.bit_state(0) == sk.H
    assert sk.bit_state(1) == sk.V
    assert sk.fidelity(sk.H, sk.V) == 0.0
    with pytest.raises(ValueError):
        sk.bit_state(2)


def test_norm_is_enforced():
    with pytest.raises(ValueError):
        sk.PureState(1.0, 1.0)
    s = sk.PureState.normalized(3, 4j)
    assert s.amp_h == pytest.approx(0.6)
    assert s.amp_v == pytest.approx(0.8j)
    with pytest.raises(ValueError):
        sk.PureState.normalized(0, 0)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_angles_rejected(bad):
    with pytest.raises(InvalidAngleError):
        sk.rotate(sk.H, bad)
    with pytest.raises(InvalidAngleError):
        sk.state_from_angle(bad)


def test_rotation_maps_h_to_angle_state():
    for phi in np.linspace(-3, 3, 13):
        assert sk.same_state(sk.rotate(sk.H, phi), sk.state_from_angle(phi))
    # quarter turn swaps H and V
    assert sk.same_state(sk.rotate(sk.H, math.pi / 2), sk.V)


@given(states(), angles)
def test_rotation_preserves_norm(s, phi):
    r = sk.rotate(s, phi)
    assert abs(abs(r.amp_h) ** 2 + abs(r.amp_v) ** 2 - 1.0) <= 1e-12


@given(states(), states(), angles)
def test_rotation_preserves_inner_product(a, b, phi):
    before = sk.inner(a, b)
    after = sk.inner(sk.rotate(a, phi), sk.rotate(b, phi))
    assert abs(before - after) <= 1e-12


@given(states(), angles, angles)
def test_additive_and_commuting(s, a, b):
    ab = sk.rotate(sk.rotate(s, a), b)
    ba = sk.rotate(sk.rotate(s, b), a)
    direct = sk.rotate(s, a + b)
    for x in (ba, direct):
        assert abs(ab.amp_h - x.amp_h) <= 1e-12
        assert abs(ab.amp_v - x.amp_v) <= 1e-12


@given(states(), angles)
def test_inverse(s, phi):
    back = sk.rotate(sk.rotate(s, phi), -phi)
    assert abs(back.amp_h - s.amp_h) <= 1e-12
    assert abs(back.amp_v - s.amp_v) <= 1e-12


@given(states(), angles, angles)
def test_telescoping(s, a, b):
    # +A, +B, -A, -B returns the input
    out = s
    for phi in (a, b, -a, -b):
        out = sk.rotate(out, phi)
    assert sk.fidelity(out, s) >= 1 - 1e-12


def test_born_probabilities():
    assert sk.born_p0(sk.H, 0.0) == 1.0
    assert sk.born_p0(sk.V, 0.0) == 0.0
    assert sk.born_p0(sk.state_from_angle(math.pi / 4), 0.0) == pytest.approx(0.5, abs=1e-15)
    assert sk.born_p0(sk.state_from_angle(math.pi / 3), 0.0) == pytest.approx(0.25, abs=1e-15)


def test_measure_threshold_and_collapse():
    s = sk.state_from_angle(math.pi / 3)  # p0 = 1/4
    bit, post = sk.measure(s, 0.0, 0.2499)
    assert bit == 0 and post == sk.state_from_angle(0.0)
    bit, post = sk.measure(s, 0.0, 0.2501)
    assert bit == 1 and sk.same_state(post, sk.V)
    # certain outcomes never flip
    assert sk.measure(sk.H, 0.0, 0.999999)[0] == 0
    assert sk.measure(sk.V, 0.0, 0.0)[0] == 1
    with pytest.raises(ValueError):
        sk.measure(s, 0.0, 1.0)


def test_measure_in_rotated_basis():
    b = 0.7
    bit, post = sk.measure(sk.state_from_angle(b), b, 0.5)
    assert bit == 0 and sk.same_state(post, sk.state_from_angle(b))
    bit, post = sk.measure(sk.state_from_angle(b + math.pi / 2), b, 0.5)
    assert bit == 1


def test_born_frequency_small_sample():
    rng = np.random.default_rng(3)
    s = sk.state_from_angle(math.pi / 4)
    n = 20_000
    zeros = sum(sk.measure(s, 0.0, u)[0] == 0 for u in rng.random(n))
    assert abs(zeros / n - 0.5) <= 4 * math.sqrt(0.25 / n)


def test_fidelity_ignores_global_phase():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = random_state(rng)
        t = sk.PureState(s.amp_h * cmath.exp(1.3j), s.amp_v * cmath.exp(1.3j))
        assert sk.same_state(s, t)
        assert 0.0 <= sk.fidelity(s, random_state(rng)) <= 1.0
