"""JSON schemas for the file-based inputs of the command-line tool."""
from __future__ import annotations

import jsonschema

_rate = {"anyOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]}
_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}

DISTRIBUTION = {
    "type": "object",
    "properties": {"alphabet": {"type": "integer", "minimum": 1}, "mass": _vector},
    "required": ["mass"],
}
ROWS = {"type": "object", "properties": {"rows": _matrix}, "required": ["rows"]}

TRIPLE = {
    "type": "object",
    "properties": {"source": DISTRIBUTION, "forward": ROWS, "synthesis": ROWS},
    "required": ["source", "forward", "synthesis"],
}

REGION_QUERY = {
    "type": "object",
    "properties": {
        "source": DISTRIBUTION,
        "distortion": ROWS,
        "delta": {"type": "number", "minimum": 0},
        "rc": _rate,
        "rate": {"type": "number", "minimum": 0},
        "aux_size": {"type": "integer", "minimum": 1},
        "n_starts": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "deltas": {"type": "array", "items": {"type": "number", "minimum": 0}},
    },
    "required": ["source", "distortion", "delta", "rc"],
}

SIM_CONFIG = {
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "rate": {"type": "number", "minimum": 0},
        "rc": {"type": "number", "minimum": 0},
        "slack": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
        "mc_samples": {"type": "integer", "minimum": 0},
        "tv_samples": {"type": "integer", "minimum": 1},
        "triple": TRIPLE,
        "distortion": ROWS,
    },
    "required": ["n", "rate", "rc", "slack", "triple"],
}

UPGRADE_INPUT = {
    "type": "object",
    "properties": {"target": DISTRIBUTION, "decoder": ROWS, "weights": DISTRIBUTION},
    "required": ["target", "decoder", "weights"],
}


class SchemaError(ValueError):
    pass


def validate(obj, schema, what: str) -> None:
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{what}: {path}: {e.message}")
        raise SchemaError("\n".join(lines))
