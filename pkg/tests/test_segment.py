import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sddehopf.functionals import LinearFunctionalSpec, point_delay
from sddehopf.segment import OutOfWindow, SegmentBuffer, apply_functional


def test_constant_history_samples_constant():
    buf = SegmentBuffer.constant(3.25, r=1.0)
    for th in (-1.0, -0.7, -0.123, 0.0):
        assert buf.sample(th) == pytest.approx(3.25)


def test_linear_history_exact():
    # linear interpolation reproduces linear data exactly, including between grid points
    th = np.linspace(-1.0, 0.0, 11)
    buf = SegmentBuffer(th, 2.0 * th + 0.5)
    for q in (-0.95, -0.5, -0.333, 0.0):
        assert buf.sample(q) == pytest.approx(2.0 * q + 0.5, abs=1e-15)


def test_fast_cosine_refinement_second_order():
    # sampling error of cos(w theta) halves twice per grid doubling
    w = 11.0
    errs = []
    for n in (64, 128, 256):
        buf = SegmentBuffer.from_function(lambda t: np.cos(w * t), 1.0, n)
        q = np.linspace(-1.0, 0.0, 1009)
        errs.append(np.max(np.abs(buf.sample(q) - np.cos(w * q))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)


def test_grid_exactness_bit_exact():
    rng = np.random.default_rng(7)
    th = np.linspace(-1.0, 0.0, 33)
    vals = rng.standard_normal(33)
    buf = SegmentBuffer(th, vals)
    out = buf.sample(th)
    assert np.array_equal(out, vals)


def test_out_of_window_raises():
    buf = SegmentBuffer.constant(1.0, r=1.0)
    with pytest.raises(OutOfWindow):
        buf.sample(-1.5)
    with pytest.raises(OutOfWindow):
        buf.sample(0.5)


def test_apply_functional_point_mass_on_constant():
    buf = SegmentBuffer.constant(2.0, r=1.0)
    spec = point_delay(-np.pi / 2, -1.0)
    assert apply_functional(spec, buf, 1) == pytest.approx(-np.pi)


def test_apply_functional_cubic_point_mass():
    gamma_c = 0.75
    buf = SegmentBuffer.constant(-2.0, r=1.0)
    spec = point_delay(gamma_c, -1.0)
    assert apply_functional(spec, buf, 3) == pytest.approx(gamma_c * (-2.0) ** 3)


def test_apply_functional_zero_measure():
    buf = SegmentBuffer.from_function(lambda t: np.sin(3 * t), 1.0, 100)
    assert apply_functional(LinearFunctionalSpec.zero(1.0), buf, 1) == 0.0
    assert apply_functional(LinearFunctionalSpec.zero(1.0), buf, 3) == 0.0


@given(
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
    w1=st.floats(-2, 2),
    w2=st.floats(-2, 2),
)
@settings(max_examples=40)
def test_functional_linearity_on_buffer(a, b, w1, w2):
    s1 = LinearFunctionalSpec(1.0, point_masses=((-1.0, w1), (-0.3, 0.5)))
    s2 = LinearFunctionalSpec(1.0, point_masses=((-0.6, w2),))
    buf = SegmentBuffer.from_function(lambda t: np.cos(2.7 * t) - t, 1.0, 64)
    from sddehopf.functionals import combine

    lhs = apply_functional(combine(a, s1, b, s2), buf, 1)
    rhs = a * apply_functional(s1, buf, 1) + b * apply_functional(s2, buf, 1)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_sup_norm_constant_and_ramp():
    assert SegmentBuffer.constant(-4.0, r=1.0).sup_norm() == pytest.approx(4.0)
    th = np.linspace(-1.0, 0.0, 101)
    ramp = SegmentBuffer(th, th + 1.0)  # 0 at -r, 1 at 0
    assert ramp.sup_norm() == pytest.approx(1.0)


def test_sup_norm_of_critical_plane_segment():
    # |Phi z| has sup <= ||z||_2, with equality once the window covers a full
    # phase period (r * omega >= 2 pi)
    omega, r = 7.0, 1.0
    z = np.array([0.6, -1.1])
    nz = np.hypot(*z)
    n = 4096
    th = np.linspace(-r, 0.0, n + 1)
    buf = SegmentBuffer(th, z[0] * np.cos(omega * th) + z[1] * np.sin(omega * th))
    s = buf.sup_norm()
    assert s <= nz + 1e-12
    assert s >= nz - 5.0 / n
