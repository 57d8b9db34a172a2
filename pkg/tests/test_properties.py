import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trionwg import (
    Branch,
    DensityMatrix4,
    LaserField,
    Map2D,
    build_liouvillian,
    load_profile,
    scattering_rate,
    steady_state,
    switching_contrast,
    transition_energy,
)

PARAMS, DEVICE = load_profile("paper-2017")

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(delta=st.floats(min_value=0, max_value=1e-3, allow_nan=False),
       omega=st.floats(min_value=0, max_value=1e10, allow_nan=False))
@settings(deadline=None, max_examples=50)
def test_scattering_rate_even_and_peaked(delta, omega):
    w_plus = scattering_rate(omega, delta, PARAMS)
    w_minus = scattering_rate(omega, -delta, PARAMS)
    w_zero = scattering_rate(omega, 0.0, PARAMS)
    assert w_plus == w_minus
    assert 0 <= w_plus <= w_zero
    assert scattering_rate(omega, 2 * delta, PARAMS) <= w_plus


@given(raw=st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=4,
                    max_size=4))
@settings(deadline=None, max_examples=50)
def test_populations_simplex_round_trip(raw):
    p = np.array(raw) / sum(raw)
    rho = DensityMatrix4.from_populations(p)
    assert rho.populations == pytest.approx(p, rel=1e-12)
    assert sum(rho.populations) == pytest.approx(1.0, abs=1e-12)


@given(t_on=st.floats(min_value=1e-3, max_value=0.999),
       t_off=st.floats(min_value=1e-3, max_value=0.999))
@settings(deadline=None, max_examples=100)
def test_switching_contrast_reciprocal(t_on, t_off):
    forward = switching_contrast(t_on, t_off, 1.0)
    backward = switching_contrast(t_off, t_on, 1.0)
    assert forward > 0
    assert forward * backward == pytest.approx(1.0, rel=1e-9)
    assert (forward >= 1) == (t_off <= t_on)


@given(v=st.floats(min_value=0.972, max_value=1.128),
       rabi=st.floats(min_value=0.0, max_value=5e9),
       offset=st.floats(min_value=-2e-5, max_value=2e-5))
@settings(deadline=None, max_examples=25)
def test_steady_state_physical_across_plateau(v, rabi, offset):
    energy = transition_energy(DEVICE, PARAMS, v, Branch.BLUE) + offset
    lasers = [LaserField(energy=energy, rabi=rabi)] if rabi > 0 else []
    rho = steady_state(build_liouvillian(PARAMS, DEVICE, v, lasers))
    pops = rho.populations
    assert sum(pops) == pytest.approx(1.0, abs=1e-9)
    assert min(pops) >= -1e-10


@given(values=st.lists(st.floats(min_value=0, max_value=10.0), min_size=6,
                       max_size=6))
@settings(deadline=None, max_examples=50)
def test_map_csv_round_trip(values, tmp_path_factory):
    x = np.array([1.0, 2.0, 3.0])
    y = np.array([-1.0, 1.0])
    m = Map2D(x, y, np.array(values).reshape(2, 3), label="intensity",
              metadata={"kind": "test"})
    path = tmp_path_factory.mktemp("maps") / "m.csv"
    m.to_csv(path)
    back = Map2D.from_csv(path)
    assert np.array_equal(back.x_axis, m.x_axis)
    assert np.array_equal(back.y_axis, m.y_axis)
    assert np.array_equal(back.values, m.values)
