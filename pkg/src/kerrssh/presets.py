"""Ready-made configurations for the reference operating points.

All presets are dimensionless (``g = 1``) and written in the drive frame
(``drive_freq = 0``), so ``omega`` fields are detunings.

``dispersive``
    Dispersive chain with ``Delta = 50``, ``delta = 63`` for sweeping ``r``
    directly through :class:`~kerrssh.linearize.SqueezeParams`.
``topological``
    The same chain with losses ``0.01`` and a Kerr cavity tuned so that a
    0.135 W drive (``kappa / 2 pi = 1 MHz``, ``omega_d / 2 pi = 1.9e14 Hz``)
    puts both Kerr sites at ``r = 0.9`` on the lower branch.  The absolute scale
    ``g / 2 pi = 100 MHz`` is an assumption needed only for the power axis.
``undriven``
    The topological chain with the drive switched off.
``bistable``
    Nearly decoupled Kerr cavities whose cubic is ``4x^3 - 12x^2 + 9.01x - E^2``.
``monostable``
    A strongly coupled symmetric chain with a single steady state.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .model import ChainConfig, detunings, rabi_amplitudes, save_config
from .steadystate import (build_cubic_reduction, complete_from_driven, newton_refine,
                          solve_cubic, stability_check)

BIG_DELTA = 50.0
SMALL_DELTA = 63.0
LOSS = 0.01
DESIGN_R = 0.9
DESIGN_POWER = 0.135  # W
G_SI = 2 * math.pi * 1e8
DRIVE_FREQ_SI = 2 * math.pi * 1.9e14


def driven_detuning_for(r: float, xi: float) -> float:
    """Bare Kerr detuning whose real steady state at squeezing ``r`` has frequency ``xi``."""
    return xi * (3 * math.exp(2 * r) - math.exp(-2 * r)) / 2


def kerr_energy_for(r: float, delta_a: float) -> float:
    """``|U| |a_s|^2`` giving squeezing ``r`` at bare detuning ``delta_a``."""
    q = math.exp(4 * r)
    return delta_a * (q - 1) / (6 * q - 2)


def edge_detuning(r: float, big_delta=BIG_DELTA, small_delta=SMALL_DELTA) -> float:
    from .linearize import edge_rule_detuning

    return edge_rule_detuning(big_delta, small_delta, r)


def dispersive_chain(r_design: float, n_b=6, big_delta=BIG_DELTA, small_delta=SMALL_DELTA,
                     loss=LOSS, kerr_u=-1.0, drive=0.0) -> ChainConfig:
    omega_a = np.full(n_b + 1, small_delta)
    omega_a[[0, -1]] = edge_detuning(r_design, big_delta, small_delta)
    omega_a[2:n_b - 1:2] = driven_detuning_for(r_design, small_delta)
    return ChainConfig(n_b=n_b, omega_b=big_delta, omega_a=omega_a, kerr_u=kerr_u, g=1.0,
                       gamma=loss, kappa=loss, drive_freq=0.0, drive_amp=drive,
                       g_si=G_SI, drive_freq_si=DRIVE_FREQ_SI)


def dispersive_config(r: float) -> ChainConfig:
    return dispersive_chain(r)


def rabi_for_squeezing(config: ChainConfig, r: float) -> float:
    """Drive amplitude at which the symmetric six-mode chain has squeezing ``r``."""
    red = build_cubic_reduction(config)
    delta_a = float(detunings(config).delta_a[2])
    u = kerr_energy_for(r, delta_a)
    x = u / abs(config.kerr_u)
    return abs(red.response + 2 * config.kerr_u * x) * math.sqrt(x)


def state_for_squeezing(config: ChainConfig, r: float):
    """``(config, state)`` with the drive set so that both Kerr sites reach ``r``."""
    E = rabi_for_squeezing(config, r)
    cfg = config.replace(drive_amp=E)
    red = build_cubic_reduction(cfg)
    target = kerr_energy_for(r, float(detunings(cfg).delta_a[2])) / abs(cfg.kerr_u)
    root = min(solve_cubic(red, E), key=lambda c: abs(c.x - target))
    guess = complete_from_driven(cfg, np.full(cfg.index.driven.size, red.amplitude(root.x)))
    ss = newton_refine(cfg, guess)
    ss.stable, _ = stability_check(cfg, None, ss)
    return cfg, ss


def topological_config(r_design=DESIGN_R, power=DESIGN_POWER) -> ChainConfig:
    base = dispersive_chain(r_design)
    E = float(rabi_amplitudes(base, power)[0])
    red = build_cubic_reduction(base)
    u = kerr_energy_for(r_design, float(detunings(base).delta_a[2]))
    # (D + 2U x) a = -iE with x = u/|U| fixes |U| for the requested power
    kerr = abs(red.response - 2 * u) ** 2 * u / E ** 2
    return base.replace(kerr_u=-kerr, drive_amp=E)


def power_for_rabi(config: ChainConfig, rabi: float) -> float:
    """Inverse of the power-to-Rabi conversion on the first Kerr site."""
    unit = float(rabi_amplitudes(config, 1.0)[0])
    if unit == 0:
        raise PreconditionError("zero port decay: power does not reach the cavity")
    return (rabi / unit) ** 2


def bistable_config() -> ChainConfig:
    return ChainConfig(n_b=6, omega_b=3.0, omega_a=3.0, kerr_u=-1.0, g=1e-8, gamma=0.1,
                       kappa=0.1, drive_freq=0.0, drive_amp=1.0)


def monostable_config() -> ChainConfig:
    return ChainConfig(n_b=6, omega_b=1.0, omega_a=[2.0, 1.5, -1.0, 1.2, -1.0, 1.5, 2.0],
                       kerr_u=-0.2, g=1.0, gamma=0.2, kappa=0.3, drive_freq=0.0, drive_amp=0.8)


PRESETS = {
    "dispersive": lambda: dispersive_config(1.0),
    "topological": topological_config,
    "undriven": lambda: topological_config().replace(drive_amp=0.0),
    "bistable": bistable_config,
    "monostable": monostable_config,
}


def write_presets(directory) -> list[Path]:
    out = []
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, make in PRESETS.items():
        path = directory / f"{name}.json"
        save_config(make(), path)
        out.append(path)
    return out
