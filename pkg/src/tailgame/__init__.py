"""Equilibria of multiplayer repeated games with tail objectives.

Modules
-------
core         game specs, lasso plays, strategy profiles
objectives   payoff automata (Büchi, co-Büchi, parity, limsup-mean) and built-ins
oneshot      one-shot minmax brackets, Nash equilibria, finitistic approximations
solver       zero-sum values, punishments and best responses
martin       value ledgers and the auxiliary perfect-information game
equilibrium  target-play search, grim trigger assembly, audited certificates
cli          the ``eqcli`` command line

Set ``TAILGAME_NUMBA=0`` to run the pure-numpy kernels instead of the
compiled ones.
"""

import logging

from .core import FiniteSupportProfile, GameSpec, GameSpecError, LassoPlay, MixedAction, StageProfile, make_game
from .equilibrium import (EquilibriumCertificate, SearchFailure, audit_equilibrium, build_equilibrium,
                          find_target_play)
from .objectives import PayoffAutomaton, evaluate_lasso, objective_from_descriptor, tail_check
from .oneshot import NormalFormGame, minmax_classical, minmax_finitistic_bracket, nash_equilibrium
from .solver import best_response, build_concurrent_game, punishment_profile, solve_values
from .specfile import bundled_spec, parse_spec, read_spec

logging.getLogger(__name__).addHandler(logging.NullHandler())

__version__ = "0.1.0"

__all__ = [
    "FiniteSupportProfile", "GameSpec", "GameSpecError", "LassoPlay", "MixedAction", "StageProfile", "make_game",
    "EquilibriumCertificate", "SearchFailure", "audit_equilibrium", "build_equilibrium", "find_target_play",
    "PayoffAutomaton", "evaluate_lasso", "objective_from_descriptor", "tail_check",
    "NormalFormGame", "minmax_classical", "minmax_finitistic_bracket", "nash_equilibrium",
    "best_response", "build_concurrent_game", "punishment_profile", "solve_values",
    "bundled_spec", "parse_spec", "read_spec",
]
