"""Numerical BCS gap equation, critical temperature and weak-coupling asymptotics."""

from .asymptotics import asymptotic_report, extract_limit, predict_tc, predict_xi
from .fermi_ops import bmu, born_a0, emu, mmu, mtilde, vmu_channel_eigenvalue, wmu_swave
from .gap_solver import derive_state, energy_gap, free_energy, solve_gap
from .linear_criterion import critical_temperature, lowest_eigenvalue_KV
from .numerics import bisect_monotone, build_fermi_grid, lowest_eigenpair
from .potentials import CATALOG, RadialPotential, parse_potential

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "RadialPotential",
    "asymptotic_report",
    "bisect_monotone",
    "bmu",
    "born_a0",
    "build_fermi_grid",
    "critical_temperature",
    "derive_state",
    "emu",
    "energy_gap",
    "extract_limit",
    "free_energy",
    "lowest_eigenpair",
    "lowest_eigenvalue_KV",
    "mmu",
    "mtilde",
    "parse_potential",
    "predict_tc",
    "predict_xi",
    "solve_gap",
    "vmu_channel_eigenvalue",
    "wmu_swave",
]
