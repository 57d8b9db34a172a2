import json

import numpy as np
import pytest

from trionwg import (
    Branch,
    ChargeState,
    DensityMatrix4,
    DeviceModel,
    HBAR_EVS,
    LaserField,
    Map2D,
    MU_B_EV_PER_T,
    OutsidePlateauError,
    PositivityError,
    SystemParams,
    charge_state,
    cotunneling_rate,
    device_model_from_json,
    device_model_to_json,
    parameter_hash,
    replace_device,
    replace_params,
    system_params_from_json,
    system_params_to_json,
    transition_energy,
    zeeman_splitting,
)


def test_default_rate_hierarchy(params):
    assert params.gamma_vertical / params.gamma_diagonal == pytest.approx(100, rel=0.10)
    assert params.gamma_diagonal * params.t1_spin == pytest.approx(50, rel=0.20)


def test_linewidth_consistency(params):
    hbar_gamma = HBAR_EVS * params.gamma_vertical
    assert 7.4e-6 / 9 == pytest.approx(hbar_gamma, rel=0.15)


def test_transition_energy_reference_point(params, device):
    p0 = replace_params(params, b_field_z=0.0)
    for branch in Branch:
        assert transition_energy(device, p0, device.v0, branch) == device.e0


def test_transition_energy_lever_arm(params, device):
    p0 = replace_params(params, b_field_z=0.0)
    e = transition_energy(device, p0, device.v0 + 0.018, Branch.BLUE)
    assert e - device.e0 == pytest.approx(7.4e-6, rel=1e-9)


def test_transition_energy_affine_slope(params, device):
    vs = np.linspace(0.9, 1.2, 7)
    es = np.array([transition_energy(device, params, v, Branch.RED) for v in vs])
    slopes = np.diff(es) / np.diff(vs)
    assert slopes == pytest.approx(device.lever_arm, rel=1e-9)


def test_zeeman_splitting_calibration(params):
    assert params.b_field_z == 0.55
    split = zeeman_splitting(params)
    assert split == pytest.approx(params.g_transition * MU_B_EV_PER_T * 0.55)
    assert split == pytest.approx(40.0e-6, abs=0.05e-6)


def test_branch_splitting_independent_of_voltage(params, device):
    for v in (0.98, 1.05, 1.12):
        d = (transition_energy(device, params, v, Branch.BLUE)
             - transition_energy(device, params, v, Branch.RED))
        assert d == pytest.approx(zeeman_splitting(params), rel=1e-12)


def test_cotunneling_edge_and_centre(device):
    edge = cotunneling_rate(device, device.v_plateau_low)
    assert edge == pytest.approx(device.kappa_cot_max, rel=1e-6)
    centre = cotunneling_rate(device, device.plateau_center)
    assert centre < 1e-3 * device.kappa_cot_max


def test_cotunneling_symmetry(device):
    lo, hi = device.v_plateau_low, device.v_plateau_high
    for off in np.linspace(0.0, (hi - lo) / 2, 9):
        assert cotunneling_rate(device, lo + off) == pytest.approx(
            cotunneling_rate(device, hi - off), rel=1e-9)


def test_cotunneling_monotone_from_edges(device):
    vs = np.linspace(device.v_plateau_low, device.plateau_center, 40)
    ks = [cotunneling_rate(device, v) for v in vs]
    assert all(a >= b for a, b in zip(ks, ks[1:]))
    assert max(ks) == ks[0]


def test_cotunneling_outside_plateau(device):
    with pytest.raises(OutsidePlateauError):
        cotunneling_rate(device, device.v_plateau_low - 1e-6)


def test_charge_state_regions(device):
    assert charge_state(device, device.v_plateau_low - 0.01) is ChargeState.EMPTY
    assert charge_state(device, device.plateau_center) is ChargeState.ONE_ELECTRON
    assert charge_state(device, device.v_plateau_high + 0.01) is ChargeState.TWO_ELECTRON
    assert charge_state(device, device.v_plateau_low) is ChargeState.ONE_ELECTRON
    assert charge_state(device, device.v_plateau_high) is ChargeState.ONE_ELECTRON


@pytest.mark.parametrize("changes", [
    {"gamma_vertical": 0.0},
    {"t1_spin": -1.0},
    {"beta_blue": 1.2},
    {"eta_red": -0.1},
    {"t0_background": 0.0},
])
def test_params_validation(params, changes):
    with pytest.raises(ValueError):
        replace_params(params, **changes)


def test_device_validation(device):
    with pytest.raises(ValueError):
        replace_device(device, v_plateau_low=device.v_plateau_high + 0.1)
    with pytest.raises(ValueError):
        replace_device(device, w_cot=0.0)


def test_laser_field_validation():
    with pytest.raises(ValueError):
        LaserField(energy=0.0, rabi=1e8)
    with pytest.raises(ValueError):
        LaserField(energy=1.3, rabi=-1e8)
    with pytest.raises(ValueError):
        LaserField(energy=1.3, rabi=1e8, coupling_cutoff=0.0)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix4(np.diag([0.6, 0.6, 0.0, 0.0]))
    bad = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    bad[0, 1] = 1.0
    with pytest.raises(ValueError):
        DensityMatrix4(bad)
    with pytest.raises(PositivityError):
        DensityMatrix4(np.diag([1.2, -0.2, 0.0, 0.0]))


def test_density_matrix_constructors():
    mixed = DensityMatrix4.mixed_ground()
    assert mixed.populations == pytest.approx([0.5, 0.5, 0.0, 0.0])
    pure = DensityMatrix4.pure(2)
    assert pure.population(2) == 1.0
    rho = DensityMatrix4.from_populations([0.1, 0.2, 0.3, 0.4])
    assert rho.populations == pytest.approx([0.1, 0.2, 0.3, 0.4])


def test_map2d_shape_and_monotonicity():
    with pytest.raises(ValueError):
        Map2D(np.array([1.0, 2.0]), np.array([1.0]), np.zeros((2, 2)), "z")
    with pytest.raises(ValueError):
        Map2D(np.array([1.0, 1.0]), np.array([1.0]), np.zeros((1, 2)), "z")


def test_map2d_csv_round_trip(tmp_path):
    m = Map2D(np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2]),
              np.arange(6.0).reshape(2, 3) / 7, "intensity")
    path = tmp_path / "m.csv"
    m.to_csv(path)
    back = Map2D.from_csv(path, label="intensity")
    assert np.array_equal(back.x_axis, m.x_axis)
    assert np.array_equal(back.y_axis, m.y_axis)
    assert np.array_equal(back.values, m.values)


def test_params_json_round_trip(params):
    doc = system_params_to_json(params, {"t1_spin": "time-resolved measurement"})
    assert doc["t1_spin"]["unit"] == "s"
    assert doc["t1_spin"]["provenance"] == "time-resolved measurement"
    assert system_params_from_json(doc) == params


def test_device_json_round_trip(device):
    doc = device_model_to_json(device)
    assert device_model_from_json(doc) == device


def test_json_rejects_unknown_and_missing(params):
    doc = system_params_to_json(params)
    doc["bogus"] = {"value": 1.0, "unit": "1", "provenance": ""}
    with pytest.raises(ValueError, match="unknown"):
        system_params_from_json(doc)
    del doc["bogus"]
    del doc["t1_spin"]
    with pytest.raises(ValueError, match="missing"):
        system_params_from_json(doc)


def test_parameter_hash_sensitivity(params, device):
    h0 = parameter_hash(params, device)
    assert h0 == parameter_hash(params, device)
    assert h0 != parameter_hash(replace_params(params, t1_spin=1e-6), device)
    assert h0 != parameter_hash(params, replace_device(device, w_cot=0.01))
