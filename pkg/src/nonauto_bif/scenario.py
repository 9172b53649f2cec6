"""Scenario files: JSON documents describing a field and the settings of one run.

A scenario reference is either a path or the bare name of a bundled scenario
(``example1``, ``example2``, ...).  Every diagnostic raised while loading is a
:class:`ConfigError` carrying ``source:line:column``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import ConfigError
from .expr import ExprError, parse_expr
from .field_model import CoefficientFunction, Family, FieldSpec

__all__ = ["Scenario", "load_scenario", "parse_scenario", "bundled_scenarios", "schema",
           "SCHEMA_NAME"]

SCHEMA_NAME = "scenario.schema.json"
_PACKAGE = "nonauto_bif"


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files(_PACKAGE).joinpath(SCHEMA_NAME).read_text("utf-8"))


def bundled_scenarios() -> list:
    folder = resources.files(_PACKAGE).joinpath("scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


@dataclass(frozen=True)
class Scenario:
    name: str
    source: str
    sha256: str
    field: FieldSpec
    mu_grid: Optional[tuple]
    run: dict

    def field_at(self, mu: Optional[float]) -> FieldSpec:
        return self.field if mu is None else self.field.with_mu(mu)


# -- locating problems in the source text -------------------------------------------

def _line_col(text: str, pos: int) -> tuple:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _key_offset(text: str, path) -> int:
    """Best-effort character offset of the value at ``path`` (keys looked up in order)."""
    pos = 0
    for key in path:
        if not isinstance(key, str):
            continue
        m = re.compile(r'"%s"\s*:\s*' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = m.end()
    return pos


def _where(source: str, text: str, path, extra: int = 0) -> str:
    line, col = _line_col(text, _key_offset(text, path) + extra)
    pointer = "/".join(str(p) for p in path) or "<root>"
    return f"{source}:{line}:{col} ({pointer})"


# -- building library objects --------------------------------------------------------

def _parse(block: dict, key: str, source: str, text: str):
    src = block[key]
    try:
        return parse_expr(src)
    except ExprError as exc:
        # +1 skips the opening quote of the JSON string
        raise ConfigError(f"bad expression {src!r}: {exc}",
                          where=_where(source, text, ["field", key], 1 + exc.offset)) from None


def _mu_grid(spec) -> Optional[tuple]:
    if spec is None:
        return None
    if isinstance(spec, list):
        grid = [float(v) for v in spec]
    else:
        start, stop, step = spec["start"], spec["stop"], spec["step"]
        if stop <= start:
            raise ConfigError("mu_grid stop must exceed start", where="field/mu_grid")
        count = int(round((stop - start) / step))
        grid = [round(start + k * step, 12) for k in range(count + 1)]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("mu_grid must be strictly increasing with at least two points",
                          where="field/mu_grid")
    return tuple(grid)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, where=f"{source}:{exc.lineno}:{exc.colno}") from None
    error = jsonschema.exceptions.best_match(
        jsonschema.Draft202012Validator(schema()).iter_errors(data))
    if error is not None:
        raise ConfigError(error.message, where=_where(source, text, list(error.absolute_path)))

    block = data["field"]
    parsed = {k: _parse(block, k, source, text)
              for k in ("f", "F", "g", "h", "phi", "psi_or_r", "G") if k in block}
    try:
        coef = {k: CoefficientFunction(parsed[k], parsed.get("F") if k == "f" else None)
                for k in ("f", "g", "h") if k in parsed}
        field = FieldSpec(Family(block["family"]), m=block.get("m", 1), n=block.get("n", 1),
                          mu=block.get("mu", 0.0), phi=parsed.get("phi"),
                          psi_or_r=parsed.get("psi_or_r"), G=parsed.get("G"), **coef)
    except ValueError as exc:
        raise ConfigError(str(exc), where=_where(source, text, ["field"])) from None
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return Scenario(data["name"], source, digest, field, _mu_grid(block.get("mu_grid")),
                    dict(data.get("run", {})))


def _decode(raw: bytes, source: str) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"not UTF-8 ({exc.reason})", where=f"{source}:byte {exc.start}") from None


def _read(ref: str) -> tuple:
    path = Path(ref)
    if path.is_file():
        return str(path), _decode(path.read_bytes(), str(path))
    name = path.name[:-5] if path.name.endswith(".json") else path.name
    if path.parent == Path(".") and name in bundled_scenarios():
        bundled = resources.files(_PACKAGE).joinpath("scenarios", name + ".json")
        return f"{name}.json", _decode(bundled.read_bytes(), name)
    raise ConfigError(f"no such scenario file or bundled scenario "
                      f"(bundled: {', '.join(bundled_scenarios())})", where=ref)


def load_scenario(ref: str) -> Scenario:
    source, text = _read(ref)
    return parse_scenario(text, source)
