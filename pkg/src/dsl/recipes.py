"""One canned run configuration per published figure panel."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .config import OPTIMAL, RunConfig, parse_config, to_ini

# Columns shared by every CSV the CLI writes.
ROW_COLUMNS = (
    "N",
    "drive_ratio",
    "detuning_ratio",
    "subsystem",
    "quantity",
    "arg1",
    "arg2",
    "value",
    "residual",
    "cutoff_used",
    "seed",
    "reason",
    "config_hash",
    "version",
)


@dataclass(frozen=True)
class Recipe:
    name: str
    panel: str
    description: str
    config: RunConfig
    quantities: tuple  # values of the `quantity` column the run produces
    columns: tuple = ROW_COLUMNS

    def ini(self) -> str:
        return to_ini(self.config)


def _cfg(command, out, **kw) -> RunConfig:
    return RunConfig(command=command, out=f"results/{out}", **kw)


SWEEP_N = (7.0, 25.0, 56.0)
SCALING_N = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 48.0, 56.0)
DRIVES = tuple(round(0.02 * k, 10) for k in range(1, 41))  # 0.02 .. 0.8


def figure_recipes() -> dict:
    """Manifest of recipes keyed by name, e.g. ``fig1a`` or ``figS4c``."""
    r = []

    def add(name, panel, description, config, quantities):
        r.append(Recipe(name, panel, description, config, tuple(quantities)))

    # Figure 1: on resonance
    for key, sub in zip("abc", ("whole", "field", "qubit")):
        add(f"fig1{key}", f"1{key}", f"On-resonance Q_{sub} versus drive for several N",
            _cfg("qfi-sweep", f"fig1{key}", N=SWEEP_N, drive=DRIVES, subsystems=(sub,)), ["qfi"])
    for key, drive in zip("def", (0.4, 0.5, 0.6)):
        add(f"fig1{key}", f"1{key}", f"On-resonance field Wigner function, N = 56, drive {drive} g",
            _cfg("wigner", f"fig1{key}", N=(56.0,), drive=(drive,), points=161, half_width=8.0), ["wigner"])
    for key, comp in zip("ghi", "xyz"):
        add(f"fig1{key}", f"1{key}", f"On-resonance qubit <sigma_{comp}> versus drive",
            _cfg("bloch-sweep", f"fig1{key}", N=SWEEP_N, drive=DRIVES), [f"s{comp}"])

    # Figure 2: on-resonance optima and scaling
    on_opt = dict(N=SCALING_N, detuning=(0.0,))
    add("fig2a", "2a", "On-resonance optimal drive versus N for each subsystem",
        _cfg("optimize", "fig2a", **on_opt), ["drive_opt", "qfi_opt"])
    add("fig2b", "2b", "On-resonance qubit maximum QFI versus N with A N^B + C fit over N > 20",
        _cfg("scaling", "fig2b", **on_opt, subsystems=("qubit",), fit_n_min=20.0), ["drive_opt", "qfi_opt", "fit"])
    add("fig2c", "2c", "On-resonance whole and field maximum QFI versus N with fit over N > 20",
        _cfg("scaling", "fig2c", **on_opt, subsystems=("whole", "field"), fit_n_min=20.0),
        ["drive_opt", "qfi_opt", "fit"])

    # Figure 3: off resonance at the field-optimal detuning
    off = dict(detuning=OPTIMAL, optimal_subsystem="field")
    for key, sub in zip("abc", ("whole", "field", "qubit")):
        add(f"fig3{key}", f"3{key}", f"Off-resonance Q_{sub} versus drive at the field-optimal detuning",
            _cfg("qfi-sweep", f"fig3{key}", N=SWEEP_N, drive=DRIVES, subsystems=(sub,), **off),
            ["detuning_opt", "qfi"])
    for key, drive in zip("def", (0.35, 0.4, 0.45)):
        add(f"fig3{key}", f"3{key}", f"Off-resonance field Wigner function, N = 56, drive {drive} g",
            _cfg("wigner", f"fig3{key}", N=(56.0,), drive=(drive,), points=161, half_width=8.0, **off),
            ["detuning_opt", "wigner"])
    for key, comp in zip("ghi", "xyz"):
        add(f"fig3{key}", f"3{key}", f"Off-resonance qubit <sigma_{comp}> versus drive",
            _cfg("bloch-sweep", f"fig3{key}", N=SWEEP_N, drive=DRIVES, **off), ["detuning_opt", f"s{comp}"])

    # Figure 4: joint optimization over drive and detuning
    joint = dict(N=SCALING_N, detuning=OPTIMAL)
    add("fig4a", "4a", "Off-resonance optimal drive versus N", _cfg("optimize", "fig4a", **joint),
        ["drive_opt", "detuning_opt", "qfi_opt"])
    add("fig4b", "4b", "Off-resonance optimal detuning versus N", _cfg("optimize", "fig4b", **joint),
        ["drive_opt", "detuning_opt", "qfi_opt"])
    add("fig4c", "4c", "Off-resonance optimized maximum QFI versus N with fit over N > 20",
        _cfg("scaling", "fig4c", **joint, fit_n_min=20.0), ["drive_opt", "detuning_opt", "qfi_opt", "fit"])

    # Figure 5: Bayesian estimation against the quantum Cramer-Rao bound
    bayes_n = (10.0, 15.0, 20.0, 25.0, 30.0)
    add("fig5a", "5a", "On resonance: Var of the MAP estimate and 1/(M g^2 Q_whole) versus N",
        _cfg("bayes", "fig5a", N=bayes_n, drive=OPTIMAL, detuning=(0.0,)), ["variance", "qcrb", "estimate"])
    add("fig5b", "5b", "Off resonance: Var of the MAP estimate and 1/(M g^2 Q_whole) versus N",
        _cfg("bayes", "fig5b", N=bayes_n, drive=OPTIMAL, detuning=OPTIMAL), ["variance", "qcrb", "estimate"])

    # S1: entanglement and purity
    add("figS1a", "S1a", "On-resonance log negativity versus drive", _cfg("diagnostics", "figS1a", N=SWEEP_N, drive=DRIVES),
        ["log_negativity"])
    add("figS1b", "S1b", "On-resonance purity versus drive", _cfg("diagnostics", "figS1b", N=SWEEP_N, drive=DRIVES),
        ["purity"])
    add("figS1c", "S1c", "Off-resonance log negativity versus N at the joint optimum",
        _cfg("diagnostics", "figS1c", N=SCALING_N, drive=OPTIMAL, detuning=OPTIMAL), ["log_negativity"])
    add("figS1d", "S1d", "Off-resonance purity versus N at the joint optimum",
        _cfg("diagnostics", "figS1d", N=SCALING_N, drive=OPTIMAL, detuning=OPTIMAL), ["purity"])

    # S2: homodyne angle
    angles = tuple(round(k * 3.141592653589793 / 64, 12) for k in range(64))
    ratios = tuple(float(r) for r in range(6, 17))
    add("figS2a", "S2a", "Off resonance, g/kappa = 10: homodyne CFI versus angle",
        _cfg("homodyne", "figS2a", N=(25.0,), drive=OPTIMAL, detuning=OPTIMAL, angles=angles), ["cfi_angle", "angle_opt"])
    add("figS2b", "S2b", "On resonance, g/kappa = 10: homodyne CFI versus angle",
        _cfg("homodyne", "figS2b", N=(25.0,), drive=OPTIMAL, detuning=(0.0,), angles=angles), ["cfi_angle", "angle_opt"])
    add("figS2c", "S2c", "Off resonance: optimal homodyne angle versus g/kappa",
        _cfg("homodyne", "figS2c", N=tuple(0.25 * r * r for r in ratios), drive=OPTIMAL, detuning=OPTIMAL), ["angle_opt"])
    add("figS2d", "S2d", "On resonance: optimal homodyne angle versus g/kappa",
        _cfg("homodyne", "figS2d", N=tuple(0.25 * r * r for r in ratios), drive=OPTIMAL, detuning=(0.0,)), ["angle_opt"])

    # S3: performance ratios (off resonance; the on-resonance curves use detuning = 0)
    ratio_n = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    add("figS3a", "S3a", "Homodyne performance F_field / Q_whole versus N",
        _cfg("homodyne", "figS3a", N=ratio_n, drive=OPTIMAL, detuning=OPTIMAL), ["angle_opt", "cfi", "ratio"])
    add("figS3b", "S3b", "Heterodyne performance F_field / Q_whole versus N",
        _cfg("heterodyne", "figS3b", N=ratio_n, drive=OPTIMAL, detuning=OPTIMAL), ["cfi", "ratio"])

    # S4: binning and simulated records
    s4 = dict(N=(20.0,), drive=OPTIMAL, detuning=(0.0,), experiments=False)
    add("figS4a", "S4a", "Homodyne density at the optimal angle",
        _cfg("bayes", "figS4a", **s4), ["pdf"])
    add("figS4b", "S4b", "Bin probabilities of the homodyne density",
        _cfg("bayes", "figS4b", **s4), ["bin_prob"])
    for key, m in zip("cdef", (10, 100, 1000, 10000)):
        add(f"figS4{key}", f"S4{key}", f"Simulated bin counts for M = {m}",
            _cfg("bayes", f"figS4{key}", **s4, record_shots=(m,)), ["count"])

    return {rec.name: rec for rec in r}


def recipe_roundtrips(rec: Recipe) -> bool:
    return parse_config(rec.ini(), source=rec.name) == rec.config


def quick(rec: Recipe, **changes) -> RunConfig:
    """Recipe config with selected fields replaced (for smoke tests and demos)."""
    return dataclasses.replace(rec.config, **changes)
