"""Versioned JSON model files.

Layout (format version 1)::

    {
      "format_version": 1,
      "spec": {"trunk": {"layers": [[in, out, act], ...]}, "head": {...}, "n_heads": n},
      "provenance": {"config_hash": "<sha256>", "seed": 0, "task_ids": [...]},
      "trunk": [w, ...],
      "heads": [[w, ...], ...]
    }

Numbers are written with 17 significant digits, which is enough for every
float64 to parse back to the same bits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .composite import CompositeParams, CompositeSpec

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The file is not a well-formed model document."""


class UnsupportedVersionError(ModelFormatError):
    def __init__(self, found):
        self.found = found
        super().__init__(f"unsupported model format version {found!r} (this reader handles {FORMAT_VERSION})")


@dataclass
class ModelFile:
    spec: CompositeSpec
    params: CompositeParams
    provenance: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ModelFile):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.provenance == other.provenance
            and self.params.trunk.tobytes() == other.params.trunk.tobytes()
            and self.params.heads.shape == other.params.heads.shape
            and self.params.heads.tobytes() == other.params.heads.tobytes()
        )


def _number(v: float) -> str:
    text = format(v, ".17g")
    # "-0" would parse as the integer 0 and lose its sign
    return text if any(c in text for c in ".en") else text + ".0"


def _numbers(values) -> str:
    return "[" + ", ".join(_number(float(v)) for v in values) + "]"


def dumps(model: ModelFile) -> str:
    model.params.check(model.spec)
    flat = model.params.flatten()
    if not np.all(np.isfinite(flat)):
        raise ValueError("model parameters must be finite")
    head_rows = ",\n    ".join(_numbers(row) for row in model.params.heads)
    return (
        "{\n"
        f'  "format_version": {FORMAT_VERSION},\n'
        f'  "spec": {json.dumps(model.spec.to_dict(), sort_keys=True)},\n'
        f'  "provenance": {json.dumps(model.provenance, sort_keys=True)},\n'
        f'  "trunk": {_numbers(model.params.trunk)},\n'
        f'  "heads": [\n    {head_rows}\n  ]\n'
        "}\n"
    )


def loads(text: str) -> ModelFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(version)
    missing = [k for k in ("spec", "trunk", "heads") if k not in doc]
    if missing:
        raise ModelFormatError(f"missing field(s): {', '.join(missing)}")
    try:
        spec = CompositeSpec.from_dict(doc["spec"])
        params = CompositeParams(
            np.array(doc["trunk"], dtype=float), np.array(doc["heads"], dtype=float).reshape(spec.n_heads, -1)
        )
        params.check(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model content: {exc}") from None
    if not all(math.isfinite(v) for v in params.flatten()):
        raise ModelFormatError("model parameters must be finite")
    provenance = doc.get("provenance", {})
    if not isinstance(provenance, dict):
        raise ModelFormatError("provenance must be an object")
    return ModelFile(spec, params, provenance)


def save_model(path: str | Path, model: ModelFile) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path: str | Path) -> ModelFile:
    return loads(Path(path).read_text(encoding="utf-8"))
