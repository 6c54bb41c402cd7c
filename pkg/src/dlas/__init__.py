"""Diffusion-limited annihilating systems: simulation, tracer couplings,
exact oracles and stochastic-order checks."""
from __future__ import annotations

from .graph import Graph, build_graph, build_interval, build_path, build_star
from .instructions import InitialCondition, InitialSpec, make_instructions
from .engine import simulate
from .tracer import run_coupled
from .oracle import ExactDistribution, enumerate_exact
from .orders import EmpiricalSample, icx_dominates, sd_dominates

__version__ = "0.1.0"

__all__ = ["Graph", "build_graph", "build_interval", "build_path", "build_star",
           "InitialCondition", "InitialSpec", "make_instructions", "simulate", "run_coupled",
           "ExactDistribution", "enumerate_exact", "EmpiricalSample", "icx_dominates",
           "sd_dominates"]
