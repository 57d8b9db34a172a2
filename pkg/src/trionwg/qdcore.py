"""Domain types and the static device model for a charged quantum dot coupled
to a nanophotonic waveguide.

Basis ordering used everywhere: index 0 |up> and 1 |down> are the electron
spin ground states, 2 |Up> and 3 |Down> are the trion states.  The
spin-preserving ("vertical") transitions |up>-|Up> and |down>-|Down> are
labelled by :class:`Branch`: BLUE is the higher-energy line at positive
magnetic field, RED the lower one.  Spin-flipping ("diagonal") decay channels
|Up>->|down> and |Down>->|up> carry no label; they appear only as rates.

All value objects are immutable; operations on them are pure functions.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .constants import HBAR_EVS, MU_B_EV_PER_T
from .errors import OutsidePlateauError, PositivityError

__all__ = [
    "STATE_UP",
    "STATE_DOWN",
    "STATE_TRION_UP",
    "STATE_TRION_DOWN",
    "Branch",
    "Port",
    "ChargeState",
    "SystemParams",
    "DeviceModel",
    "LaserField",
    "DensityMatrix4",
    "Map2D",
    "zeeman_splitting",
    "transition_energy",
    "cotunneling_rate",
    "charge_state",
    "system_params_to_json",
    "system_params_from_json",
    "device_model_to_json",
    "device_model_from_json",
    "parameter_hash",
]

STATE_UP = 0
STATE_DOWN = 1
STATE_TRION_UP = 2
STATE_TRION_DOWN = 3

_HERM_TOL = 1e-10
_TRACE_TOL = 1e-9
_EIG_TOL = -1e-10


class Branch(str, Enum):
    """Vertical optical transition label."""

    BLUE = "blue"
    RED = "red"


class Port(str, Enum):
    """Where a laser enters the device."""

    TOP_ILLUMINATION = "top_illumination"
    WAVEGUIDE_LEFT = "waveguide_left"


class ChargeState(str, Enum):
    EMPTY = "empty"
    ONE_ELECTRON = "one_electron"
    TWO_ELECTRON = "two_electron"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class SystemParams:
    """Rates and couplings of the four-level system.

    Parameters
    ----------
    gamma_vertical : float
        Spin-preserving radiative decay rate of each trion state, 1/s.
    gamma_diagonal : float
        Spin-flipping decay rate of each trion state, 1/s.
    t1_spin : float
        Ground-state spin relaxation time deep in the plateau, s.
    gamma_dephasing : float
        Pure dephasing rate of every optical coherence, 1/s.
    sigma_spectral_diffusion : float
        Standard deviation of the quasi-static transition-energy noise, eV.
    beta_blue, beta_red : float
        Waveguide coupling fraction of each branch, in [0, 1].
    eta_blue, eta_red : float
        Detection efficiency for photons scattered from each branch, >= 0.
    b_field_z : float
        Magnetic field along the growth axis, T.
    g_transition : float
        Effective g-factor of the optical transition splitting.
    g_electron : float
        Electron g-factor; rotating-frame bookkeeping only, not observable.
    t0_background : float
        Far-detuned waveguide transmission, in (0, 1].
    """

    gamma_vertical: float
    gamma_diagonal: float
    t1_spin: float
    gamma_dephasing: float = 0.0
    sigma_spectral_diffusion: float = 0.0
    beta_blue: float = 0.5
    beta_red: float = 0.5
    eta_blue: float = 1.0
    eta_red: float = 1.0
    b_field_z: float = 0.0
    g_transition: float = 1.2564
    g_electron: float = 0.0
    t0_background: float = 1.0

    def __post_init__(self) -> None:
        _require(self.gamma_vertical > 0, "gamma_vertical must be > 0")
        _require(self.gamma_diagonal > 0, "gamma_diagonal must be > 0")
        _require(self.t1_spin > 0, "t1_spin must be > 0")
        _require(self.gamma_dephasing >= 0, "gamma_dephasing must be >= 0")
        _require(self.sigma_spectral_diffusion >= 0, "sigma_spectral_diffusion must be >= 0")
        for name in ("beta_blue", "beta_red"):
            v = getattr(self, name)
            _require(0.0 <= v <= 1.0, f"{name} must lie in [0, 1]")
        for name in ("eta_blue", "eta_red"):
            _require(getattr(self, name) >= 0, f"{name} must be >= 0")
        _require(self.b_field_z >= 0, "b_field_z must be >= 0")
        _require(0.0 < self.t0_background <= 1.0, "t0_background must lie in (0, 1]")


@dataclass(frozen=True)
class DeviceModel:
    """Static electrostatic model of the diode-embedded dot.

    ``e0`` is the bare transition energy (eV) at reference voltage ``v0``;
    the Stark shift is linear with slope ``lever_arm`` (eV/V).  The
    one-electron charge plateau spans ``[v_plateau_low, v_plateau_high]``
    (boundaries included); co-tunneling with the back contact randomizes the
    spin near the plateau edges with peak rate ``kappa_cot_max`` (1/s) and
    voltage decay width ``w_cot`` (V).  When a second colour illuminates the
    device, screening rigidly shifts the whole single-colour response by
    ``two_color_voltage_shift`` (V).
    """

    e0: float
    v0: float
    lever_arm: float
    v_plateau_low: float
    v_plateau_high: float
    kappa_cot_max: float
    w_cot: float
    two_color_voltage_shift: float = 0.0

    def __post_init__(self) -> None:
        _require(self.e0 > 0, "e0 must be > 0")
        _require(self.lever_arm != 0, "lever_arm must be nonzero")
        _require(self.v_plateau_low < self.v_plateau_high, "plateau window must be non-empty")
        _require(self.kappa_cot_max >= 0, "kappa_cot_max must be >= 0")
        _require(self.w_cot > 0, "w_cot must be > 0")

    @property
    def plateau_center(self) -> float:
        return 0.5 * (self.v_plateau_low + self.v_plateau_high)


@dataclass(frozen=True)
class LaserField:
    """A single narrow-band laser.

    ``coupling_cutoff`` is the maximum detuning (eV) at which the laser
    coherently drives a transition; ``None`` means the solver default of
    20 * hbar * gamma_vertical.
    """

    energy: float
    rabi: float
    port: Port = Port.TOP_ILLUMINATION
    coupling_cutoff: float | None = None

    def __post_init__(self) -> None:
        _require(self.energy > 0, "laser energy must be > 0")
        _require(self.rabi >= 0, "rabi must be >= 0")
        if self.coupling_cutoff is not None:
            _require(self.coupling_cutoff > 0, "coupling_cutoff must be > 0")


class DensityMatrix4:
    """Validated 4x4 density matrix in the fixed basis.

    Construction checks Hermiticity (1e-10), unit trace (1e-9) and
    positivity (eigenvalues >= -1e-10).  The wrapped array is read-only.
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix: np.ndarray) -> None:
        m = np.array(matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > _HERM_TOL:
            raise ValueError("density matrix is not Hermitian within 1e-10")
        tr = m.trace()
        if abs(tr - 1.0) > _TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1 beyond 1e-9")
        eig = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if eig.min() < _EIG_TOL:
            raise PositivityError(f"density matrix eigenvalue {eig.min():.3e} below {_EIG_TOL}")
        m.setflags(write=False)
        self._matrix = m

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def populations(self) -> np.ndarray:
        return self._matrix.diagonal().real.copy()

    def population(self, state: int) -> float:
        return float(self._matrix[state, state].real)

    @classmethod
    def from_populations(cls, populations) -> "DensityMatrix4":
        p = np.asarray(populations, dtype=float)
        if p.shape != (4,):
            raise ValueError("expected four populations")
        return cls(np.diag(p).astype(complex))

    @classmethod
    def mixed_ground(cls) -> "DensityMatrix4":
        return cls.from_populations([0.5, 0.5, 0.0, 0.0])

    @classmethod
    def pure(cls, state: int) -> "DensityMatrix4":
        p = np.zeros(4)
        p[state] = 1.0
        return cls.from_populations(p)

    def __repr__(self) -> str:
        pops = ", ".join(f"{p:.6f}" for p in self.populations)
        return f"DensityMatrix4(populations=[{pops}])"


@dataclass(frozen=True)
class Map2D:
    """A labelled 2-D scan: ``values[i, j]`` belongs to ``(y_axis[i], x_axis[j])``.

    Axes must be strictly monotone.  ``metadata`` carries at least the
    parameter hash and the seed (None for deterministic scans).
    """

    x_axis: np.ndarray
    y_axis: np.ndarray
    values: np.ndarray
    label: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        x = np.array(self.x_axis, dtype=float)
        y = np.array(self.y_axis, dtype=float)
        v = np.array(self.values, dtype=float)
        if v.shape != (y.size, x.size):
            raise ValueError(f"values shape {v.shape} does not match |y|x|x| = ({y.size}, {x.size})")
        for name, ax in (("x_axis", x), ("y_axis", y)):
            if ax.size > 1:
                d = np.diff(ax)
                if not (np.all(d > 0) or np.all(d < 0)):
                    raise ValueError(f"{name} must be strictly monotone")
        for arr in (x, y, v):
            arr.setflags(write=False)
        object.__setattr__(self, "x_axis", x)
        object.__setattr__(self, "y_axis", y)
        object.__setattr__(self, "values", v)

    def to_csv(self, path: str | Path) -> None:
        """Write the grid: first row x-axis, first column y-axis, corner empty."""
        lines = ["," + ",".join(repr(float(x)) for x in self.x_axis)]
        for yval, row in zip(self.y_axis, self.values):
            lines.append(repr(float(yval)) + "," + ",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path, label: str = "", metadata: dict | None = None) -> "Map2D":
        rows = [line.split(",") for line in Path(path).read_text().strip().splitlines()]
        x = np.array([float(v) for v in rows[0][1:]])
        y = np.array([float(r[0]) for r in rows[1:]])
        vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(x, y, vals, label, dict(metadata or {}))

    def metadata_document(self) -> dict:
        return {"label": self.label,
                "x_axis": {"min": float(self.x_axis.min()), "max": float(self.x_axis.max()),
                           "num": int(self.x_axis.size)},
                "y_axis": {"min": float(self.y_axis.min()), "max": float(self.y_axis.max()),
                           "num": int(self.y_axis.size)},
                **self.metadata}


# ---------------------------------------------------------------------------
# device operations

def zeeman_splitting(params: SystemParams) -> float:
    """Optical transition splitting g_transition * mu_B * B_z, eV."""
    return params.g_transition * MU_B_EV_PER_T * params.b_field_z


def transition_energy(device: DeviceModel, params: SystemParams, v: float,
                      branch: Branch) -> float:
    """Stark-shifted energy of a vertical transition at gate voltage ``v``.

    e0 + lever_arm * (v - v0) plus (BLUE) or minus (RED) half the Zeeman
    splitting.  Defined at any voltage, also outside the plateau.
    """
    e = device.e0 + device.lever_arm * (v - device.v0)
    half = 0.5 * zeeman_splitting(params)
    return e + half if branch is Branch.BLUE else e - half


def charge_state(device: DeviceModel, v: float) -> ChargeState:
    """Charge occupation at gate voltage ``v``; boundaries count as one electron."""
    if v < device.v_plateau_low:
        return ChargeState.EMPTY
    if v > device.v_plateau_high:
        return ChargeState.TWO_ELECTRON
    return ChargeState.ONE_ELECTRON


def cotunneling_rate(device: DeviceModel, v: float) -> float:
    """Spin-randomizing co-tunneling rate inside the plateau, 1/s.

    Double-exponential profile peaked at the plateau edges,
    kappa_cot_max * [exp(-(v - v_low)/w) + exp(-(v_high - v)/w)], clamped to
    kappa_cot_max.  The functional form is a smooth reconstruction of
    edge-dominated co-tunneling; its two shape parameters are fit degrees of
    freedom, not measured quantities.

    Raises
    ------
    OutsidePlateauError
        If ``v`` lies outside the one-electron plateau.
    """
    if charge_state(device, v) is not ChargeState.ONE_ELECTRON:
        raise OutsidePlateauError(
            f"v = {v} V outside the one-electron plateau "
            f"[{device.v_plateau_low}, {device.v_plateau_high}] V")
    k = device.kappa_cot_max * (np.exp(-(v - device.v_plateau_low) / device.w_cot)
                                + np.exp(-(device.v_plateau_high - v) / device.w_cot))
    return float(min(k, device.kappa_cot_max))


# ---------------------------------------------------------------------------
# JSON serialization with per-entry provenance

_PARAM_UNITS = {
    "gamma_vertical": "1/s",
    "gamma_diagonal": "1/s",
    "t1_spin": "s",
    "gamma_dephasing": "1/s",
    "sigma_spectral_diffusion": "eV",
    "beta_blue": "1",
    "beta_red": "1",
    "eta_blue": "1",
    "eta_red": "1",
    "b_field_z": "T",
    "g_transition": "1",
    "g_electron": "1",
    "t0_background": "1",
}

_DEVICE_UNITS = {
    "e0": "eV",
    "v0": "V",
    "lever_arm": "eV/V",
    "v_plateau_low": "V",
    "v_plateau_high": "V",
    "kappa_cot_max": "1/s",
    "w_cot": "V",
    "two_color_voltage_shift": "V",
}


def _to_json(obj, units: dict, provenance: dict | None) -> dict:
    provenance = provenance or {}
    doc = {}
    for f in fields(obj):
        doc[f.name] = {"value": getattr(obj, f.name),
                       "unit": units[f.name],
                       "provenance": provenance.get(f.name, "")}
    return doc


def _from_json(doc: dict, units: dict, cls):
    unknown = set(doc) - set(units)
    if unknown:
        raise ValueError(f"unknown fields in document: {sorted(unknown)}")
    missing = set(units) - set(doc)
    if missing:
        raise ValueError(f"missing fields in document: {sorted(missing)}")
    kwargs = {}
    for name in units:
        entry = doc[name]
        if not isinstance(entry, dict) or "value" not in entry:
            raise ValueError(f"field {name!r} must be an object with a 'value' key")
        kwargs[name] = entry["value"]
    return cls(**kwargs)


def system_params_to_json(params: SystemParams, provenance: dict | None = None) -> dict:
    return _to_json(params, _PARAM_UNITS, provenance)


def system_params_from_json(doc: dict) -> SystemParams:
    return _from_json(doc, _PARAM_UNITS, SystemParams)


def device_model_to_json(device: DeviceModel, provenance: dict | None = None) -> dict:
    return _to_json(device, _DEVICE_UNITS, provenance)


def device_model_from_json(doc: dict) -> DeviceModel:
    return _from_json(doc, _DEVICE_UNITS, DeviceModel)


def parameter_hash(params: SystemParams, device: DeviceModel) -> str:
    """Canonical SHA-256 over all parameter and device fields."""
    payload = {"params": {f.name: getattr(params, f.name) for f in fields(params)},
               "device": {f.name: getattr(device, f.name) for f in fields(device)}}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def replace_params(params: SystemParams, **changes) -> SystemParams:
    """dataclasses.replace with field-name validation."""
    return replace(params, **changes)


def replace_device(device: DeviceModel, **changes) -> DeviceModel:
    return replace(device, **changes)
