"""Command-line front end.

Every experiment is a subcommand driven by a single JSON configuration
file; outputs (CSV, JSON, PNG figures) land in one output directory next to
a manifest naming all artifacts, the fully resolved configuration and the
tool version.  Exit codes: 0 success, 1 configuration or validation error,
2 solver error.  Environment overrides are limited to TRIONWG_OUTPUT_DIR
and TRIONWG_THREADS; command-line flags beat both.
"""
from __future__ import annotations

import argparse
import json
import os
import pathlib
import sys

import jsonschema
import numpy as np

from . import estimate as es
from . import plotting, spectro
from .constants import PACKAGE_VERSION
from .errors import SimulationError
from .profiles import PROFILE_DEFAULT, load_profile
from .qdcore import (
    Branch,
    LaserField,
    Port,
    device_model_from_json,
    parameter_hash,
    replace_device,
    replace_params,
    system_params_from_json,
    transition_energy,
)

SUBCOMMANDS = ("plateau-map", "two-color-map", "transmission",
               "transmission-map", "pump-probe", "t1-recovery", "fit",
               "switch-energy")

# ---------------------------------------------------------------------------
# configuration schema

_GRID = {
    "type": "object",
    "required": ["start", "stop", "points"],
    "properties": {"start": {"type": "number"},
                   "stop": {"type": "number"},
                   "points": {"type": "integer", "minimum": 1}},
    "additionalProperties": False,
}
_ENERGY = {"oneOf": [{"type": "number"}, {"enum": ["blue", "red"]}]}
_LASER = {
    "type": "object",
    "required": ["energy", "rabi"],
    "properties": {"energy": _ENERGY,
                   "offset": {"type": "number"},
                   "rabi": {"type": "number", "minimum": 0},
                   "port": {"enum": ["top", "waveguide"]},
                   "coupling_cutoff": {"type": "number"}},
    "additionalProperties": False,
}
_STEP = {
    "type": "object",
    "required": ["duration_s"],
    "properties": {"duration_s": {"type": "number", "minimum": 0},
                   "lasers": {"type": "array", "items": _LASER},
                   "record": {"type": "boolean"}},
    "additionalProperties": False,
}
_SEQUENCE = {
    "type": "object",
    "required": ["steps"],
    "properties": {"steps": {"type": "array", "items": _STEP, "minItems": 1},
                   "repetitions": {"type": "integer", "minimum": 1}},
    "additionalProperties": False,
}
_VOLTAGE = {"oneOf": [{"type": "number"}, {"const": "plateau-center"}]}
_METHOD = {"enum": ["lindblad", "rate"]}
_FREE_PARAM = {
    "type": "object",
    "required": ["name", "initial", "low", "high"],
    "properties": {"name": {"type": "string"}, "initial": {"type": "number"},
                   "low": {"type": "number"}, "high": {"type": "number"}},
    "additionalProperties": False,
}

_BLOCKS = {
    "plateau-map": ("plateau_map", {
        "type": "object",
        "required": ["energy_grid", "voltage_grid", "rabi"],
        "properties": {"energy_grid": _GRID, "voltage_grid": _GRID,
                       "rabi": {"type": "number", "exclusiveMinimum": 0},
                       "sd_nodes": {"type": "integer", "minimum": 1},
                       "method": _METHOD},
        "additionalProperties": False,
    }),
    "two-color-map": ("two_color_map", {
        "type": "object",
        "required": ["energy_grid", "voltage_grid", "rabi", "fixed_laser"],
        "properties": {"energy_grid": _GRID, "voltage_grid": _GRID,
                       "rabi": {"type": "number", "exclusiveMinimum": 0},
                       "fixed_laser": _LASER,
                       "sd_nodes": {"type": "integer", "minimum": 1},
                       "method": _METHOD},
        "additionalProperties": False,
    }),
    "transmission": ("transmission", {
        "type": "object",
        "required": ["delta_grid"],
        "properties": {"delta_grid": _GRID,
                       "beta": {"type": "number", "minimum": 0, "maximum": 1}},
        "additionalProperties": False,
    }),
    "transmission-map": ("transmission_map", {
        "type": "object",
        "required": ["energy_grid", "voltage_grid", "sequence"],
        "properties": {"energy_grid": _GRID, "voltage_grid": _GRID,
                       "sequence": _SEQUENCE,
                       "sd_nodes": {"type": "integer", "minimum": 1},
                       "method": _METHOD},
        "additionalProperties": False,
    }),
    "pump-probe": ("pump_probe", {
        "type": "object",
        "required": ["voltage", "sequence"],
        "properties": {"voltage": _VOLTAGE, "sequence": _SEQUENCE,
                       "sd_nodes": {"type": "integer", "minimum": 1},
                       "samples_per_step": {"type": "integer", "minimum": 2},
                       "method": _METHOD},
        "additionalProperties": False,
    }),
    "t1-recovery": ("t1_recovery", {
        "type": "object",
        "required": ["voltage", "pump", "delays"],
        "properties": {"voltage": _VOLTAGE, "pump": _LASER,
                       "delays": _GRID,
                       "noise_sigma": {"type": "number", "minimum": 0}},
        "additionalProperties": False,
    }),
    "fit": ("fit", {
        "type": "object",
        "required": ["model", "free"],
        "properties": {
            "dataset_file": {"type": "string"},
            "synth": {
                "type": "object",
                "required": ["truth", "x_grid", "noise_sigma"],
                "properties": {"truth": {"type": "object"}, "x_grid": _GRID,
                               "noise_sigma": {"type": "number", "minimum": 0}},
                "additionalProperties": False,
            },
            "model": {"enum": sorted(es.MODELS)},
            "free": {"type": "array", "items": _FREE_PARAM, "minItems": 0},
            "fixed": {"type": "object"},
            "with_context": {"type": "boolean"},
            "bootstrap": {
                "type": "object",
                "required": ["n_resamples"],
                "properties": {"n_resamples": {"type": "integer", "minimum": 50},
                               "seed": {"type": "integer"}},
                "additionalProperties": False,
            },
        },
        "oneOf": [{"required": ["dataset_file"]}, {"required": ["synth"]}],
        "additionalProperties": False,
    }),
    "switch-energy": ("switch_energy", {
        "type": "object",
        "required": ["pump_power_watts", "pump_duration_s"],
        "properties": {"pump_power_watts": {"type": "number", "minimum": 0},
                       "pump_duration_s": {"type": "number", "exclusiveMinimum": 0},
                       "photons_per_cycle": {"type": ["number", "null"],
                                             "exclusiveMinimum": 0}},
        "additionalProperties": False,
    }),
}


def _config_schema(subcommand: str) -> dict:
    block_key, block_schema = _BLOCKS[subcommand]
    return {
        "type": "object",
        "required": [block_key],
        "properties": {
            "profile": {"type": "string"},
            "parameter_file": {"type": "string"},
            "device_file": {"type": "string"},
            "param_overrides": {"type": "object"},
            "device_overrides": {"type": "object"},
            "output_dir": {"type": "string"},
            "seed": {"type": "integer"},
            "threads": {"type": "integer", "minimum": 1},
            block_key: block_schema,
        },
        "additionalProperties": False,
    }


# ---------------------------------------------------------------------------
# resolution helpers

def _load_config(path: str, subcommand: str) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    jsonschema.validate(cfg, _config_schema(subcommand))
    return cfg


def _resolve_physics(cfg: dict):
    params, device = load_profile(cfg.get("profile", PROFILE_DEFAULT))
    if "parameter_file" in cfg:
        with open(cfg["parameter_file"]) as fh:
            params = system_params_from_json(json.load(fh))
    if "device_file" in cfg:
        with open(cfg["device_file"]) as fh:
            device = device_model_from_json(json.load(fh))
    if cfg.get("param_overrides"):
        params = replace_params(params, **cfg["param_overrides"])
    if cfg.get("device_overrides"):
        device = replace_device(device, **cfg["device_overrides"])
    return params, device


def _grid(spec: dict) -> np.ndarray:
    return np.linspace(spec["start"], spec["stop"], spec["points"])


def _voltage(spec, device) -> float:
    return device.plateau_center if spec == "plateau-center" else float(spec)


def _laser(spec: dict, params, device, v_ref: float) -> LaserField:
    energy = spec["energy"]
    if energy == "blue":
        energy = transition_energy(device, params, v_ref, Branch.BLUE)
    elif energy == "red":
        energy = transition_energy(device, params, v_ref, Branch.RED)
    energy += spec.get("offset", 0.0)
    port = Port.WAVEGUIDE_LEFT if spec.get("port") == "waveguide" else Port.TOP_ILLUMINATION
    return LaserField(energy=energy, rabi=spec["rabi"], port=port,
                      coupling_cutoff=spec.get("coupling_cutoff"))


def _sequence(spec: dict, params, device, v_ref: float) -> spectro.PulseSequence:
    steps = []
    for s in spec["steps"]:
        lasers = tuple(_laser(l, params, device, v_ref)
                       for l in s.get("lasers", []))
        steps.append(spectro.PulseStep(s["duration_s"], lasers,
                                       s.get("record", False)))
    return spectro.PulseSequence(tuple(steps),
                                 repetitions=spec.get("repetitions", 256))


class _Run:
    """Collects artifact names under the output directory for the manifest."""

    def __init__(self, outdir: str):
        self.dir = pathlib.Path(outdir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def path(self, name: str) -> pathlib.Path:
        self.artifacts.append(name)
        return self.dir / name

    def write_json(self, name: str, doc: dict) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _write_map(run: _Run, stem: str, map2d) -> None:
    map2d.to_csv(run.path(stem + ".csv"))
    run.write_json(stem + ".meta.json", map2d.metadata_document())
    plotting.save_map_png(map2d, run.path(stem + ".png"))


# ---------------------------------------------------------------------------
# subcommand bodies

def _cmd_plateau_map(cfg, params, device, threads, seed, run):
    b = cfg["plateau_map"]
    energies, voltages = _grid(b["energy_grid"]), _grid(b["voltage_grid"])
    template = LaserField(energy=float(energies[0]), rabi=b["rabi"])
    m = spectro.plateau_map(params, device, template, energies, voltages,
                            sd_nodes=b.get("sd_nodes", 256),
                            method=b.get("method", "lindblad"), threads=threads)
    _write_map(run, "plateau_map", m)


def _cmd_two_color_map(cfg, params, device, threads, seed, run):
    b = cfg["two_color_map"]
    energies, voltages = _grid(b["energy_grid"]), _grid(b["voltage_grid"])
    fixed = _laser(b["fixed_laser"], params, device, device.plateau_center)
    template = LaserField(energy=float(energies[0]), rabi=b["rabi"])
    m = spectro.two_color_map(params, device, fixed, template, energies,
                              voltages, sd_nodes=b.get("sd_nodes", 256),
                              method=b.get("method", "lindblad"),
                              threads=threads)
    _write_map(run, "two_color_map", m)


def _cmd_transmission(cfg, params, device, threads, seed, run):
    b = cfg["transmission"]
    spec = spectro.transmission_observed(_grid(b["delta_grid"]),
                                         b.get("beta", params.beta_blue), params)
    spec.to_csv(run.path("transmission.csv"))
    run.write_json("transmission.meta.json", spec.metadata_document())
    plotting.save_spectrum_png(spec, run.path("transmission.png"))
    print(f"contrast: {spec.contrast:.4f}")
    print(f"fwhm: {spec.fwhm * 1e6:.3f} ueV")


def _cmd_transmission_map(cfg, params, device, threads, seed, run):
    b = cfg["transmission_map"]
    energies, voltages = _grid(b["energy_grid"]), _grid(b["voltage_grid"])
    seq = _sequence(b["sequence"], params, device, device.plateau_center)
    m = spectro.transmission_plateau_map(params, device, seq, energies,
                                         voltages,
                                         sd_nodes=b.get("sd_nodes", 64),
                                         method=b.get("method", "rate"),
                                         threads=threads)
    _write_map(run, "transmission_map", m)


def _cmd_pump_probe(cfg, params, device, threads, seed, run):
    b = cfg["pump_probe"]
    v = _voltage(b["voltage"], device)
    seq = _sequence(b["sequence"], params, device, v)
    res = spectro.pump_probe_cycle(seq, params, device, v,
                                   sd_nodes=b.get("sd_nodes", 64),
                                   method=b.get("method", "lindblad"),
                                   samples_per_step=b.get("samples_per_step", 25))
    with open(run.path("trajectory.csv"), "w", newline="") as fh:
        fh.write("time_s,p_up,p_down,p_trion_up,p_trion_down\n")
        for t, p in zip(res.times, res.populations):
            fh.write(",".join(repr(float(x)) for x in (t, *p)) + "\n")
    run.write_json("pump_probe.json", {
        "probe_transmission": list(res.probe_transmission),
        "t0_background": params.t0_background,
        "normalized": [t / params.t0_background for t in res.probe_transmission],
        "cycles_run": res.cycles_run,
        "voltage": v,
    })
    plotting.save_trajectory_png(res, run.path("trajectory.png"))
    for k, t in enumerate(res.probe_transmission):
        print(f"probe window {k}: T/T0 = {t / params.t0_background:.4f}")


def _cmd_t1_recovery(cfg, params, device, threads, seed, run):
    b = cfg["t1_recovery"]
    v = _voltage(b["voltage"], device)
    pump = _laser(b["pump"], params, device, v)
    points = spectro.t1_recovery_experiment(params, device, v, pump,
                                            _grid(b["delays"]))
    x = np.array([t for t, _ in points])
    y = np.array([s for _, s in points])
    noise = b.get("noise_sigma", 0.0)
    if noise > 0:
        rng = np.random.default_rng(seed)
        y = y * (1.0 + noise * rng.standard_normal(y.size))
    ds = es.Dataset(x, y, None, {"noise_sigma": noise, "seed": seed})
    es.dataset_to_csv(ds, run.path("recovery.csv"))
    span = float(x.max())
    problem = es.FitProblem(ds, "recovery", (
        es.FitParameter("t1", span / 4, span / 1e3, span * 10),
        es.FitParameter("a", 0.5, 1e-3, 1.0),
        es.FitParameter("b", 0.4, 1e-3, 1.0)))
    result = es.fit(problem)
    run.write_json("recovery_fit.json", es.fit_result_to_json(result))
    curve_x = np.linspace(x.min(), x.max(), 400)
    curve_y = es.MODELS["recovery"](curve_x, result.values, None)
    plotting.save_dataset_png(ds, run.path("recovery.png"), (curve_x, curve_y))
    print(f"fitted t1: {result.values['t1'] * 1e6:.4f} us")


def _cmd_fit(cfg, params, device, threads, seed, run):
    b = cfg["fit"]
    context = es.ModelContext(params, device) if b.get("with_context") else None
    if "dataset_file" in b:
        ds = es.dataset_from_csv(b["dataset_file"])
    else:
        s = b["synth"]
        ds = es.synth_dataset(b["model"], s["truth"], _grid(s["x_grid"]),
                              s["noise_sigma"], seed, context)
    free = tuple(es.FitParameter(p["name"], p["initial"], p["low"], p["high"])
                 for p in b["free"])
    problem = es.FitProblem(ds, b["model"], free, dict(b.get("fixed", {})),
                            context)
    run.write_json("problem.json", es.fit_problem_to_json(problem))
    result = es.fit(problem)
    bootstrap = None
    if "bootstrap" in b:
        bootstrap = es.bootstrap_uncertainty(problem, result,
                                             b["bootstrap"]["n_resamples"],
                                             b["bootstrap"].get("seed", seed),
                                             threads=threads)
    run.write_json("fit_result.json", es.fit_result_to_json(result, bootstrap))
    curve_y = es.evaluate_model(problem, result.values)
    plotting.save_dataset_png(ds, run.path("fit.png"), (ds.x, curve_y))
    for name, value in result.values.items():
        print(f"{name} = {value:.6g}")


def _cmd_switch_energy(cfg, params, device, threads, seed, run):
    b = cfg["switch_energy"]
    photons = b.get("photons_per_cycle")
    if photons is None:
        photons = spectro.photons_per_scattering_cycle(params)
    cycle_energy = b["pump_power_watts"] * b["pump_duration_s"]
    per_photon = spectro.switching_energy(b["pump_power_watts"],
                                          b["pump_duration_s"], photons)
    run.write_json("switch_energy.json", {
        "pump_power_watts": b["pump_power_watts"],
        "pump_duration_s": b["pump_duration_s"],
        "photons_per_cycle": photons,
        "energy_per_cycle_joules": cycle_energy,
        "energy_per_photon_joules": per_photon,
    })
    print(f"energy per pump cycle: {cycle_energy * 1e15:.4g} fJ")
    print(f"energy per switched photon: {per_photon * 1e15:.4g} fJ")


_COMMANDS = {
    "plateau-map": _cmd_plateau_map,
    "two-color-map": _cmd_two_color_map,
    "transmission": _cmd_transmission,
    "transmission-map": _cmd_transmission_map,
    "pump-probe": _cmd_pump_probe,
    "t1-recovery": _cmd_t1_recovery,
    "fit": _cmd_fit,
    "switch-energy": _cmd_switch_energy,
}


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trionwg",
        description="Simulated spectroscopy of a waveguide-coupled charged "
                    "quantum dot")
    parser.add_argument("--version", action="version", version=PACKAGE_VERSION)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--check", action="store_true",
                       help="validate the configuration and exit")
        p.add_argument("--output-dir", help="override the output directory")
        p.add_argument("--threads", type=int, help="override the thread count")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    try:
        cfg = _load_config(args.config, args.subcommand)
        params, device = _resolve_physics(cfg)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "(top level)"
        print(f"configuration error: {exc.message} at {path}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    if args.check:
        print("configuration OK")
        return 0

    outdir = (args.output_dir or os.environ.get("TRIONWG_OUTPUT_DIR")
              or cfg.get("output_dir") or "trionwg-output")
    threads = args.threads or _int_env("TRIONWG_THREADS") or cfg.get("threads", 1)
    seed = cfg.get("seed", 0)
    if threads < 1:
        print("configuration error: thread count must be >= 1", file=sys.stderr)
        return 1

    run = _Run(outdir)
    try:
        _COMMANDS[args.subcommand](cfg, params, device, threads, seed, run)
    except SimulationError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1

    resolved = dict(cfg)
    resolved.update({"output_dir": str(outdir), "threads": threads, "seed": seed})
    run.write_json("manifest.json", {
        "subcommand": args.subcommand,
        "version": PACKAGE_VERSION,
        "parameter_hash": parameter_hash(params, device),
        "config": resolved,
        "artifacts": sorted(set(run.artifacts) - {"manifest.json"}),
    })
    return 0


def _int_env(name: str):
    raw = os.environ.get(name)
    return int(raw) if raw else None


if __name__ == "__main__":
    sys.exit(main())
