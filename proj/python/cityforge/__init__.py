"""Python access to the cityforge core: parse, score, execute and edit city programs.

Programs are accepted as JSON text or as already-decoded Python objects and
returned as decoded JSON.
"""

import json

from . import _cityforge
from ._cityforge import CityforgeError, density_score, format_accuracy, verbs

__all__ = [
    "CityforgeError",
    "apply_edit",
    "check_format",
    "collision_rate",
    "coverage",
    "density_score",
    "error_code",
    "execute",
    "format_accuracy",
    "load_block",
    "load_building",
    "overlap_fraction",
    "scene_metrics",
    "score",
    "verbs",
]


def _text(program):
    return program if isinstance(program, str) else json.dumps(program)


def _buildings(buildings):
    return {k: _text(v) for k, v in (buildings or {}).items()}


def error_code(err):
    """Stable code name ("BadPolygon", ...) of a CityforgeError."""
    return err.args[0] if err.args else None


def load_block(program):
    return json.loads(_cityforge.canonicalize_block(_text(program)))


def load_building(program):
    return json.loads(_cityforge.canonicalize_building(_text(program)))


def check_format(program, kind="block"):
    return _cityforge.check_format(_text(program), kind)


def coverage(program):
    return _cityforge.coverage(_text(program))


def overlap_fraction(program, buildings_only=False):
    return _cityforge.overlap_fraction(_text(program), buildings_only)


def collision_rate(program):
    return _cityforge.collision_rate(_text(program))


def score(program, prompt="", band=(0.5, 0.8)):
    """Spatial reward with the offline stub standing in for the semantic scorer."""
    return _cityforge.score(_text(program), prompt, band[0], band[1])


def execute(block, buildings=None, format="glb", seed=0, floor_height=3.0):
    """GLB bytes or OBJ text for the assembled scene."""
    return _cityforge.execute(_text(block), _buildings(buildings), format, seed, floor_height)


def scene_metrics(block, buildings=None, seed=0):
    return _cityforge.scene_metrics(_text(block), _buildings(buildings), seed)


def apply_edit(block, command, buildings=None, allow_move=False):
    """Returns {"block", "buildings", "diff", "warnings"} with programs decoded."""
    r = _cityforge.apply_edit(_text(block), _buildings(buildings), command, allow_move)
    return {
        "block": json.loads(r["block"]),
        "buildings": {k: json.loads(v) for k, v in r["buildings"].items()},
        "diff": json.loads(r["diff"]),
        "warnings": list(r["warnings"]),
    }
