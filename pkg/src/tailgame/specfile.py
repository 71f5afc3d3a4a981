"""Game-spec files: JSON text with strict field checking and located diagnostics.

Numbers are parsed as :class:`decimal.Decimal` so that the same file reads
identically on every platform; they are converted where the model needs
floats.

Schema (top level)::

    {
      "version": 1,
      "name": "voorneveld",
      "n_players": 20,
      "actions": ["0", "1"]            # shared, or one list per player
      "defaults": "0",                 # shared, or one label per player
      "tail_default": "0",             # action of the players beyond n_players
      "eps": 0.05,                     # shared, or one per player
      "objectives": {...}              # one descriptor, or one per player
    }

Objective descriptors are documented in :mod:`tailgame.objectives`.
"""

from __future__ import annotations

import json
import logging
import warnings
from decimal import Decimal
from importlib import resources

from .core import GameSpec, GameSpecError, make_game

log = logging.getLogger(__name__)

SPEC_VERSION = 1
TOP_KEYS = {"version", "name", "description", "n_players", "actions", "defaults", "tail_default", "eps",
            "objectives"}


class SpecError(ValueError):
    """Invalid spec text; ``where`` locates the problem (``line:col`` or a field path)."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def _plain(x):
    """Decimals to floats/ints and everything else to JSON-like builtins."""
    if isinstance(x, Decimal):
        return int(x) if x == x.to_integral_value() and "." not in str(x) and "E" not in str(x).upper() else float(x)
    if isinstance(x, list):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    return x


def _labels(x):
    """Action labels are strings; bare numbers in the file are accepted and stringified."""
    if isinstance(x, list):
        return [_labels(v) for v in x]
    if isinstance(x, Decimal):
        return str(x)
    return x


def load_json(text: str):
    try:
        return json.loads(text, parse_float=Decimal, parse_int=Decimal)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None


def parse_spec(text: str, strict: bool = True) -> GameSpec:
    """Parse and validate a game-spec document."""
    raw = load_json(text)
    if not isinstance(raw, dict):
        raise SpecError("top level must be an object", "$")
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        if strict:
            raise SpecError(f"unknown fields {unknown}", "$")
        warnings.warn(f"ignoring unknown spec fields {unknown}")
        raw = {k: v for k, v in raw.items() if k in TOP_KEYS}
    version = raw.get("version", Decimal(SPEC_VERSION))
    if version != SPEC_VERSION:
        raise SpecError(f"unsupported version {version}", "$.version")
    data = dict(raw)
    for key in ("actions", "defaults", "tail_default"):
        if key in data:
            data[key] = _labels(data[key])
    for key in ("n_players", "eps", "objectives", "name"):
        if key in data:
            data[key] = _plain(data[key])
    if "n_players" in data and not isinstance(data["n_players"], int):
        raise SpecError("must be an integer", "$.n_players")
    try:
        return make_game(data)
    except GameSpecError as exc:
        raise SpecError(str(exc), "$") from None


def read_spec(path, strict: bool = True) -> GameSpec:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_spec(text, strict)
    except SpecError as exc:
        raise SpecError(str(exc), str(path)) from None


def bundled_spec_text(name: str) -> str:
    """Text of a spec shipped with the package (``voorneveld.json``, ``matching_pennies.json``)."""
    return resources.files("tailgame").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def bundled_spec(name: str) -> GameSpec:
    return parse_spec(bundled_spec_text(name))
