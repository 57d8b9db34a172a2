"""Observables of the driven quantum dot: resonance-fluorescence maps,
waveguide transmission spectra, pump-probe switching cycles, fidelity and
contrast extraction, and the energy-per-switch bookkeeping.

Conventions: energies in eV, rates in 1/s, times in s.  Detected intensities
carry an arbitrary global calibration (only ratios are physical).  Slow
charge noise enters every observable as a quasi-static Gaussian distribution
of the transition energy, averaged by Gauss-Hermite quadrature; which laser
addresses which transition is decided at the distribution centre so the
routing cannot flip between quadrature nodes.

Port semantics: lasers on the top-illumination port drive the dot (they
enter the Liouvillian); lasers on the waveguide port are weak transmission
probes, never enter the Liouvillian, and must satisfy the weak-field
threshold rabi**2/Gamma' < 0.1*gamma_vertical.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import roots_hermite

from .constants import HBAR_EVS, PACKAGE_VERSION
from .errors import (
    CycleConvergenceError,
    IncompatibleFramesError,
    QuadratureConvergenceError,
)
from .liouville import (
    TRACE_INDICES,
    effective_cutoff,
    frames_compatible,
    laser_assignments,
    lindblad_batch,
    propagator_with_average,
    rate_batch,
    rate_steady_populations_batch,
    steady_populations_batch,
    steady_state,
    build_liouvillian,
    propagate,
    expm_batch,
)
from .qdcore import (
    Branch,
    ChargeState,
    DensityMatrix4,
    DeviceModel,
    LaserField,
    Map2D,
    Port,
    STATE_DOWN,
    STATE_UP,
    SystemParams,
    charge_state,
    cotunneling_rate,
    device_model_to_json,
    parameter_hash,
    system_params_to_json,
    transition_energy,
    zeeman_splitting,
)

__all__ = [
    "PulseStep",
    "PulseSequence",
    "TransmissionSpectrum",
    "CycleResult",
    "sd_offsets",
    "rf_intensity",
    "plateau_map",
    "two_color_map",
    "transmission_amplitude",
    "transmission_observed",
    "spin_dependent_transmission",
    "pump_probe_cycle",
    "transmission_plateau_map",
    "preparation_fidelity",
    "fidelity_from_intensity_ratio",
    "t1_recovery_experiment",
    "switching_contrast",
    "switching_energy",
    "photons_per_scattering_cycle",
]

_CYCLE_TOL = 1e-8
_SOLVE_CHUNK = 32768  # (pixel, node) pairs per batched linear solve

SpinLabel = Literal["up", "down"]
_TARGET_STATE = {"up": STATE_UP, "down": STATE_DOWN}
# optical pumping of one vertical transition shelves the opposite spin
_SHELVED = {Branch.BLUE: "down", Branch.RED: "up"}


# ---------------------------------------------------------------------------
# sequences and spectra

@dataclass(frozen=True)
class PulseStep:
    """One segment of a pulse cycle.

    Zero-duration steps are allowed and skipped during propagation, so a
    sequence template can switch individual pulses off without being
    rebuilt.  ``record=True`` marks the probe window whose time-averaged
    transmission is reported.
    """

    duration: float
    lasers: tuple[LaserField, ...] = ()
    record: bool = False

    def __post_init__(self) -> None:
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError("step duration must be finite and >= 0")
        object.__setattr__(self, "lasers", tuple(self.lasers))

    def drive_lasers(self) -> tuple[LaserField, ...]:
        return tuple(l for l in self.lasers
                     if l.port is Port.TOP_ILLUMINATION and l.rabi > 0)

    def probe_lasers(self) -> tuple[LaserField, ...]:
        return tuple(l for l in self.lasers
                     if l.port is Port.WAVEGUIDE_LEFT and l.rabi > 0)


@dataclass(frozen=True)
class PulseSequence:
    """Cycled pulse program; ``repetitions`` caps the cycles spent reaching
    the periodic steady state."""

    steps: tuple[PulseStep, ...]
    repetitions: int = 256

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("sequence needs at least one step")
        if not any(s.record for s in self.steps):
            raise ValueError("sequence needs at least one recorded step")
        if sum(s.duration for s in self.steps) <= 0:
            raise ValueError("total sequence duration must be > 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.steps)


@dataclass(frozen=True)
class TransmissionSpectrum:
    """Probe transmission against detuning from the undiffused resonance."""

    detuning: np.ndarray
    transmission: np.ndarray
    contrast: float
    fwhm: float
    t0_background: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        d = np.array(self.detuning, dtype=float)
        t = np.array(self.transmission, dtype=float)
        if d.ndim != 1 or d.shape != t.shape:
            raise ValueError("detuning and transmission must be equal-length 1-d arrays")
        if np.any(np.diff(d) <= 0):
            raise ValueError("detuning axis must be strictly increasing")
        if t.min() < -1e-12 or t.max() > self.t0_background * (1 + 1e-6):
            raise ValueError("transmission outside [0, t0_background]")
        d.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "detuning", d)
        object.__setattr__(self, "transmission", t)

    def to_map(self) -> Map2D:
        return Map2D(self.detuning, np.array([0.0]),
                     self.transmission[None, :], label="transmission",
                     metadata=dict(self.metadata))

    def to_csv(self, path) -> None:
        self.to_map().to_csv(path)

    def metadata_document(self) -> dict:
        doc = dict(self.metadata)
        doc.update({"label": "transmission", "contrast": self.contrast,
                    "fwhm_ev": self.fwhm, "t0_background": self.t0_background,
                    "points": int(self.detuning.size),
                    "artifact_version": PACKAGE_VERSION})
        return doc


@dataclass(frozen=True)
class CycleResult:
    """Periodic-steady-cycle output: a sampled population trajectory plus
    the averaged probe transmission of every recorded window."""

    times: np.ndarray
    populations: np.ndarray
    probe_transmission: tuple[float, ...]
    cycles_run: int


# ---------------------------------------------------------------------------
# quadrature over the quasi-static transition-energy distribution

def sd_offsets(sigma: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes and weights for averaging over a zero-mean
    Gaussian transition-energy offset of width ``sigma`` (eV)."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if nodes < 1:
        raise ValueError("need at least one quadrature node")
    if sigma == 0:
        return np.zeros(1), np.ones(1)
    x, w = roots_hermite(nodes)
    return sigma * math.sqrt(2.0) * x, w / math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# resonance fluorescence

def rf_intensity(rho: DensityMatrix4, params: SystemParams) -> float:
    """Detected photon rate: eta-weighted radiative decay of each trion.

    The diagonal-decay contribution (weaker by gamma_diagonal/gamma_vertical)
    is neglected.
    """
    p = rho.populations
    return params.gamma_vertical * (params.eta_blue * p[2] + params.eta_red * p[3])


def _row_intensities(params: SystemParams, device: DeviceModel, v: float,
                     energies: np.ndarray, scanned: LaserField,
                     fixed: tuple[LaserField, ...], offsets: np.ndarray,
                     weights: np.ndarray, method: str) -> np.ndarray:
    """Steady-state RF intensity along one voltage row of a map.

    Pixels are grouped by which transition the scanned laser addresses;
    each group is solved as one batch over (pixel, quadrature node).  Groups
    where two distinct lasers land on the same transition have no common
    rotating frame and fall back to the rate-equation path, where scattering
    rates add incoherently.
    """
    if charge_state(device, v) is not ChargeState.ONE_ELECTRON:
        return np.zeros(energies.size)
    kappa = cotunneling_rate(device, v)
    etrans = {b: transition_energy(device, params, v, b) for b in Branch}

    active = {}
    cut = effective_cutoff(scanned, params)
    for b in Branch:
        if scanned.rabi > 0:
            active[b] = np.abs(energies - etrans[b]) <= cut
        else:
            active[b] = np.zeros(energies.size, dtype=bool)

    fixed_drives = []  # (branch, rabi, detuning)
    fixed_per_branch = {b: 0 for b in Branch}
    for laser in fixed:
        if laser.rabi <= 0:
            continue
        fcut = effective_cutoff(laser, params)
        for b in Branch:
            det = laser.energy - etrans[b]
            if abs(det) <= fcut:
                fixed_drives.append((b, laser.rabi, det))
                fixed_per_branch[b] += 1

    out = np.zeros(energies.size)
    pattern = active[Branch.BLUE].astype(int) + 2 * active[Branch.RED].astype(int)
    for code in np.unique(pattern):
        idx = np.nonzero(pattern == code)[0]
        scanned_branches = [b for k, b in enumerate(Branch) if code >> k & 1]
        if not scanned_branches and not fixed_drives:
            continue  # no coupling: dark pixel stays exactly 0
        coherent = all(fixed_per_branch[b] + (b in scanned_branches) <= 1
                       for b in Branch)
        use_rate = method == "rate" or not coherent
        chunk = max(1, _SOLVE_CHUNK // offsets.size)
        for lo in range(0, idx.size, chunk):
            sub = idx[lo:lo + chunk]
            drives = [(b, r, np.full(sub.size, d)) for b, r, d in fixed_drives]
            drives += [(b, scanned.rabi, energies[sub] - etrans[b])
                       for b in scanned_branches]
            if use_rate:
                pops = rate_steady_populations_batch(
                    rate_batch(params, kappa, drives, offsets))
            else:
                pops = steady_populations_batch(
                    lindblad_batch(params, kappa, drives, offsets))
            pops = pops.reshape(sub.size, offsets.size, 4)
            pbar = np.tensordot(pops, weights, axes=(1, 0))
            vals = params.gamma_vertical * (params.eta_blue * pbar[:, 2]
                                            + params.eta_red * pbar[:, 3])
            out[sub] = np.maximum(vals, 0.0)
    return out


def _map_rows(voltages: np.ndarray, row_fn, threads: int) -> np.ndarray:
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1:
        rows = [row_fn(v) for v in voltages]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row_fn, voltages))
    return np.stack(rows)


def _map_metadata(params: SystemParams, device: DeviceModel, **extra) -> dict:
    doc = {"parameters": system_params_to_json(params),
           "device": device_model_to_json(device),
           "parameter_hash": parameter_hash(params, device),
           "artifact_version": PACKAGE_VERSION}
    doc.update(extra)
    return doc


def plateau_map(params: SystemParams, device: DeviceModel,
                laser_template: LaserField, energy_grid: np.ndarray,
                voltage_grid: np.ndarray, *, sd_nodes: int = 256,
                method: str = "lindblad", threads: int = 1) -> Map2D:
    """Steady-state RF intensity over (laser energy x gate voltage).

    One laser of the template's strength is scanned across ``energy_grid``
    at every voltage; rows outside the one-electron plateau are 0.  At zero
    field the map is a single resonance line; at finite field the line
    splits and the centre of the plateau dims through spin pumping while
    the co-tunneling edges stay bright.
    """
    energies = _checked_grid(energy_grid, "energy_grid")
    voltages = _checked_grid(voltage_grid, "voltage_grid")
    if method not in ("lindblad", "rate"):
        raise ValueError(f"unknown method {method!r}")
    offsets, weights = sd_offsets(params.sigma_spectral_diffusion, sd_nodes)

    def row(v: float) -> np.ndarray:
        return _row_intensities(params, device, v, energies, laser_template,
                                (), offsets, weights, method)

    values = _map_rows(voltages, row, threads)
    meta = _map_metadata(params, device, sd_nodes=sd_nodes, method=method,
                         kind="rf_plateau_map")
    return Map2D(energies, voltages, values, label="rf_intensity", metadata=meta)


def two_color_map(params: SystemParams, device: DeviceModel,
                  fixed_laser: LaserField, scanned_template: LaserField,
                  energy_grid: np.ndarray, voltage_grid: np.ndarray, *,
                  sd_nodes: int = 256, method: str = "lindblad",
                  threads: int = 1) -> Map2D:
    """RF map with a second, fixed-energy laser always on.

    Charge screening by the extra field rigidly shifts the whole response
    along the voltage axis by ``device.two_color_voltage_shift``: every row
    is evaluated at ``v - shift``, plateau window and co-tunneling profile
    included.  Where both lasers hit their respective transitions the
    spin-pumping of each is cancelled by the other and a bright
    double-resonance spot appears.
    """
    energies = _checked_grid(energy_grid, "energy_grid")
    voltages = _checked_grid(voltage_grid, "voltage_grid")
    if method not in ("lindblad", "rate"):
        raise ValueError(f"unknown method {method!r}")
    offsets, weights = sd_offsets(params.sigma_spectral_diffusion, sd_nodes)
    shift = device.two_color_voltage_shift

    def row(v: float) -> np.ndarray:
        return _row_intensities(params, device, v - shift, energies,
                                scanned_template, (fixed_laser,), offsets,
                                weights, method)

    values = _map_rows(voltages, row, threads)
    meta = _map_metadata(params, device, sd_nodes=sd_nodes, method=method,
                         kind="rf_two_color_map", voltage_shift=shift,
                         fixed_laser_energy=fixed_laser.energy,
                         fixed_laser_rabi=fixed_laser.rabi)
    return Map2D(energies, voltages, values, label="rf_intensity", metadata=meta)


def _checked_grid(grid, name: str) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array")
    if g.size > 1 and np.any(np.diff(g) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return g


# ---------------------------------------------------------------------------
# waveguide transmission

def transmission_amplitude(delta, beta: float, params: SystemParams):
    """Weak-field transmission amplitude past a two-level scatterer.

    t(Delta) = 1 - beta*(Gamma_tot/2) / (Gamma_tot/2 + gamma_dephasing
    + i*Delta/hbar) with Gamma_tot the total radiative rate; ``delta`` in eV.
    Vectorized over ``delta``.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    lam = 0.5 * (params.gamma_vertical + params.gamma_diagonal)
    lamp = lam + params.gamma_dephasing
    dw = np.asarray(delta, dtype=float) / HBAR_EVS
    t = 1.0 - beta * lam / (lamp + 1j * dw)
    return t if np.ndim(delta) else complex(t)


def _observed_transmission(delta: np.ndarray, beta: float, params: SystemParams,
                           *, start_nodes: int = 128, max_nodes: int = 32768,
                           tol: float = 1e-6) -> np.ndarray:
    """Quasi-static average of |t|^2 over the transition-energy distribution.

    Gauss-Hermite quadrature with node doubling; converged when doubling
    changes no point by more than ``tol``.
    """
    d = np.asarray(delta, dtype=float)
    t0 = params.t0_background
    sigma = params.sigma_spectral_diffusion
    if sigma == 0.0:
        return t0 * np.abs(transmission_amplitude(d, beta, params)) ** 2
    n = max(32, start_nodes)
    prev = None
    while n <= max_nodes:
        off, w = sd_offsets(sigma, n)
        cur = t0 * (np.abs(transmission_amplitude(d[..., None] - off,
                                                  beta, params)) ** 2 @ w)
        if prev is not None and np.max(np.abs(cur - prev)) <= tol:
            return cur
        prev = cur
        n *= 2
    raise QuadratureConvergenceError(
        f"transmission quadrature not converged to {tol:g} at {max_nodes} nodes")


def _half_crossings(x: np.ndarray, y: np.ndarray, level: float,
                    i_ext: int) -> float:
    """Full width of the feature around index ``i_ext`` at ``level``
    (linear interpolation); nan when either flank misses the level."""
    left = right = math.nan
    for i in range(i_ext, 0, -1):
        y1, y0 = y[i], y[i - 1]
        if (y0 - level) * (y1 - level) <= 0 and y0 != y1:
            left = x[i - 1] + (level - y0) / (y1 - y0) * (x[i] - x[i - 1])
            break
    for i in range(i_ext, y.size - 1):
        y0, y1 = y[i], y[i + 1]
        if (y0 - level) * (y1 - level) <= 0 and y0 != y1:
            right = x[i] + (level - y0) / (y1 - y0) * (x[i + 1] - x[i])
            break
    return right - left if math.isfinite(left) and math.isfinite(right) else math.nan


def transmission_observed(delta_grid, beta: float,
                          params: SystemParams) -> TransmissionSpectrum:
    """Observed transmission dip including slow spectral wandering.

    Contrast is 1 - min(T)/t0_background; the full width at half depth is
    interpolated from the grid (nan when the dip is not resolved).
    """
    d = _checked_grid(delta_grid, "delta_grid")
    t = _observed_transmission(d, beta, params)
    t = np.minimum(np.maximum(t, 0.0), params.t0_background)
    i_min = int(np.argmin(t))
    contrast = 1.0 - t[i_min] / params.t0_background
    half_level = params.t0_background - 0.5 * (params.t0_background - t[i_min])
    fwhm = _half_crossings(d, t, half_level, i_min)
    meta = {"parameters": system_params_to_json(params),
            "beta": beta, "parameter_hash": None,
            "artifact_version": PACKAGE_VERSION, "kind": "transmission_spectrum"}
    return TransmissionSpectrum(d, t, contrast, fwhm, params.t0_background, meta)


def spin_dependent_transmission(ground_populations, probe_delta_blue,
                                params: SystemParams):
    """Probe transmission for a given ground-spin mixture.

    T = p_up*T_blue(Delta) + p_down*T_red(Delta + Delta_Z) + (1 - p_up -
    p_down)*t0_background, where Delta is the probe detuning from the blue
    transition and each line is the spectrally averaged dip of its branch.
    Any trion occupancy is treated as transparent background.  Vectorized
    over ``probe_delta_blue``.
    """
    p_up, p_down = float(ground_populations[0]), float(ground_populations[1])
    if p_up < -1e-9 or p_down < -1e-9 or p_up + p_down > 1 + 1e-9:
        raise ValueError("ground populations must be >= 0 and sum to <= 1")
    d = np.asarray(probe_delta_blue, dtype=float)
    dz = zeeman_splitting(params)
    t_blue = _observed_transmission(d, params.beta_blue, params)
    t_red = _observed_transmission(d + dz, params.beta_red, params)
    rest = max(0.0, 1.0 - p_up - p_down)
    t = p_up * t_blue + p_down * t_red + rest * params.t0_background
    return t if np.ndim(probe_delta_blue) else float(t)


# ---------------------------------------------------------------------------
# pulsed cycles

def _check_probe_weak(lasers, params: SystemParams) -> None:
    gp = params.gamma_vertical + params.gamma_diagonal + 2 * params.gamma_dephasing
    for laser in lasers:
        if laser.rabi ** 2 / gp >= 0.1 * params.gamma_vertical:
            raise ValueError(
                "probe exceeds the weak-field threshold rabi**2/Gamma' < "
                "0.1*gamma_vertical; lower its rabi or use it as a pump")


def _step_generators(params: SystemParams, device: DeviceModel, v: float,
                     seq: PulseSequence, offsets: np.ndarray, method: str):
    """Per-step generator stacks over quadrature nodes.

    Returns (steps, dim) where steps is a list of (duration, generators,
    probe_lasers) for the nonzero-duration steps and generators has shape
    (n_nodes, dim, dim).
    """
    kappa = cotunneling_rate(device, v)
    steps = []
    for step in seq.steps:
        _check_probe_weak(step.probe_lasers(), params)
        if step.duration == 0:
            continue
        if step.record and len(step.probe_lasers()) != 1:
            raise ValueError("a recorded step must carry exactly one "
                             "waveguide-port probe laser")
        asg = laser_assignments(params, device, v, list(step.drive_lasers()))
        drives = [(a.branch, a.rabi, np.array([a.detuning])) for a in asg]
        if method == "lindblad":
            if not frames_compatible(asg):
                raise IncompatibleFramesError(
                    "two lasers drive the same vertical transition within "
                    "one step; use method='rate'")
            gens = lindblad_batch(params, kappa, drives, offsets)
        else:
            gens = rate_batch(params, kappa, drives, offsets)
        steps.append((step.duration, gens, step))
    dim = 16 if method == "lindblad" else 4
    return steps, dim


def _cycle_fixed_point(steps, dim: int, max_cycles: int):
    """Iterate the composed cycle propagator from the thermal ground mixture
    until the cycle-start state moves by less than the convergence
    tolerance; returns (state (n_nodes, dim), cycles_run)."""
    props = [expm_batch(gens * dur) for dur, gens, _ in steps]
    cycle = props[0]
    for p in props[1:]:
        cycle = p @ cycle
    n_nodes = cycle.shape[0]
    if dim == 16:
        x = np.zeros((n_nodes, 16), dtype=complex)
        x[:, 0] = x[:, 5] = 0.5
    else:
        x = np.zeros((n_nodes, 4))
        x[:, 0] = x[:, 1] = 0.5
    for cyc in range(1, max_cycles + 1):
        xn = (cycle @ x[..., None])[..., 0]
        delta = np.abs(xn - x).max()
        x = xn
        if delta < _CYCLE_TOL:
            return x, cyc
    raise CycleConvergenceError(
        f"cycle-start populations still change by {delta:.2e} after "
        f"{max_cycles} repetitions")


def _populations_from_state(x: np.ndarray, dim: int) -> np.ndarray:
    if dim == 16:
        return np.maximum(x[..., TRACE_INDICES].real, 0.0)
    return np.maximum(x.real, 0.0)


def pump_probe_cycle(seq: PulseSequence, params: SystemParams,
                     device: DeviceModel, v: float, *, sd_nodes: int = 64,
                     method: str = "lindblad",
                     samples_per_step: int = 25) -> CycleResult:
    """Drive the dot through the pulse cycle until it is periodic, then
    report the population trajectory and each recorded window's probe
    transmission.

    Top-port lasers enter the propagator of their step; the waveguide-port
    probe never does.  A recorded step must carry exactly one probe laser;
    its transmission is the spin-dependent dip evaluated at the
    node-averaged populations, time-averaged over the window by the exact
    integral of the propagator (linear observables commute with both
    averages).
    """
    if method not in ("lindblad", "rate"):
        raise ValueError(f"unknown method {method!r}")
    if samples_per_step < 2:
        raise ValueError("samples_per_step must be >= 2")
    offsets, weights = sd_offsets(params.sigma_spectral_diffusion, sd_nodes)
    steps, dim = _step_generators(params, device, v, seq, offsets, method)
    x0, cycles = _cycle_fixed_point(steps, dim, seq.repetitions)

    e_blue = transition_energy(device, params, v, Branch.BLUE)
    times, traj, transmissions = [], [], []
    t_start = 0.0
    x = x0
    for dur, gens, step in steps:
        dt = dur / samples_per_step
        prop_dt = expm_batch(gens * dt)
        states = [x]
        for _ in range(samples_per_step):
            states.append((prop_dt @ states[-1][..., None])[..., 0])
        seg = np.stack(states[:-1])  # endpoint belongs to the next step
        pops = _populations_from_state(seg, dim)  # (samples, nodes, 4)
        traj.append(np.tensordot(pops, weights, axes=(1, 0)))
        times.append(t_start + dt * np.arange(samples_per_step))
        if step.record:
            _, avg = propagator_with_average(gens, dur)
            x_avg = (avg @ x[..., None])[..., 0]
            p = np.tensordot(_populations_from_state(x_avg, dim), weights,
                             axes=(0, 0))
            delta = step.probe_lasers()[0].energy - e_blue
            transmissions.append(float(spin_dependent_transmission(
                (p[0], p[1]), delta, params)))
        x = states[-1]
        t_start += dur
    return CycleResult(np.concatenate(times), np.concatenate(traj),
                       tuple(transmissions), cycles)


def transmission_plateau_map(params: SystemParams, device: DeviceModel,
                             seq_template: PulseSequence,
                             energy_grid: np.ndarray,
                             voltage_grid: np.ndarray, *, sd_nodes: int = 64,
                             method: str = "rate", threads: int = 1) -> Map2D:
    """Probe transmission over (probe energy x gate voltage) under a pulse
    cycle.

    The probe never enters the dynamics, so one periodic cycle per voltage
    serves every probe energy of that row; the recorded window's averaged
    populations are read out through the spin-dependent line shapes.  Rows
    outside the one-electron plateau have no scatterer and sit at
    t0_background.  The first recorded step is reported.
    """
    energies = _checked_grid(energy_grid, "energy_grid")
    voltages = _checked_grid(voltage_grid, "voltage_grid")
    if method not in ("lindblad", "rate"):
        raise ValueError(f"unknown method {method!r}")
    offsets, weights = sd_offsets(params.sigma_spectral_diffusion, sd_nodes)

    def row(v: float) -> np.ndarray:
        if charge_state(device, v) is not ChargeState.ONE_ELECTRON:
            return np.full(energies.size, params.t0_background)
        steps, dim = _step_generators(params, device, v, seq_template,
                                      offsets, method)
        x, _ = _cycle_fixed_point(steps, dim, seq_template.repetitions)
        p = None
        for dur, gens, step in steps:
            if step.record:
                _, avg = propagator_with_average(gens, dur)
                x_avg = (avg @ x[..., None])[..., 0]
                p = np.tensordot(_populations_from_state(x_avg, dim),
                                 weights, axes=(0, 0))
                break
            x = (expm_batch(gens * dur) @ x[..., None])[..., 0]
        delta = energies - transition_energy(device, params, v, Branch.BLUE)
        t = spin_dependent_transmission((p[0], p[1]), delta, params)
        return np.minimum(t, params.t0_background)

    values = _map_rows(voltages, row, threads)
    meta = _map_metadata(params, device, sd_nodes=sd_nodes, method=method,
                         kind="transmission_plateau_map")
    return Map2D(energies, voltages, values, label="transmission", metadata=meta)


# ---------------------------------------------------------------------------
# fidelity, recovery, switching figures of merit

def preparation_fidelity(rho: DensityMatrix4, target: SpinLabel) -> float:
    """Occupancy of the targeted ground spin state."""
    if target not in _TARGET_STATE:
        raise ValueError("target must be 'up' or 'down'")
    return rho.population(_TARGET_STATE[target])


def fidelity_from_intensity_ratio(i_center: float, i_edge: float) -> float:
    """Preparation fidelity inferred from the RF plateau contrast.

    Assumes the plateau edge hosts an equal spin mixture, so the pumped
    centre intensity relates to the residual bright-state population by
    F = 1 - i_center/(2*i_edge).
    """
    if i_edge <= 0:
        raise ValueError("edge intensity must be > 0")
    if i_center < 0:
        raise ValueError("centre intensity must be >= 0")
    if i_center > 2 * i_edge:
        raise ValueError("centre intensity above twice the edge intensity "
                         "is inconsistent with the equal-mixture edge")
    return min(1.0, max(0.0, 1.0 - i_center / (2.0 * i_edge)))


def t1_recovery_experiment(params: SystemParams, device: DeviceModel,
                           v: float, pump: LaserField,
                           delays) -> list[tuple[float, float]]:
    """Pump-delay-probe spin relaxation curve.

    Pumps to the optical steady state, waits in the dark for each delay and
    reports the repumped population 1 - p_target(tau).  The curve relaxes
    exponentially towards the 1/2 mixture with 1/T1_eff = 1/t1_spin +
    kappa(v).
    """
    taus = np.asarray(delays, dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise ValueError("delays must be a non-empty 1-d array")
    if taus.min() < 0:
        raise ValueError("delays must be >= 0")
    pumped = build_liouvillian(params, device, v, [pump])
    branches = {a.branch for a in pumped.assignments}
    if len(branches) != 1:
        raise ValueError("pump must address exactly one vertical transition "
                         "at this voltage")
    target = _SHELVED[branches.pop()]
    state = _TARGET_STATE[target]
    rho0 = steady_state(pumped)
    dark = build_liouvillian(params, device, v, [])
    out = []
    for tau in taus:
        rho = propagate(dark, rho0, float(tau))
        out.append((float(tau), 1.0 - rho.population(state)))
    return out


def switching_contrast(t_on: float, t_off: float, t0: float) -> float:
    """Ratio of dip contrasts between the scattering ('off') and the
    transparent ('on') spin preparations; infinite when the 'on' dip
    vanishes."""
    if t0 <= 0:
        raise ValueError("t0 must be > 0")
    if not (0 < t_on <= t0 and 0 < t_off <= t0):
        raise ValueError("transmissions must lie in (0, t0]")
    c_on = (t0 - t_on) / t0
    c_off = (t0 - t_off) / t0
    if c_on == 0:
        return math.inf
    return c_off / c_on


def photons_per_scattering_cycle(params: SystemParams) -> float:
    """Mean photons scattered before a diagonal decay flips the spin."""
    return params.gamma_vertical / params.gamma_diagonal


def switching_energy(pump_power: float, pump_duration: float,
                     photons_per_cycle: float) -> float:
    """Optical energy spent per switched photon (J)."""
    if pump_power < 0:
        raise ValueError("pump power must be >= 0")
    if pump_duration <= 0 or photons_per_cycle <= 0:
        raise ValueError("pump duration and photons per cycle must be > 0")
    return pump_power * pump_duration / photons_per_cycle
