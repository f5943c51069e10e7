"""Run configuration: YAML schema, strict validation, canonical hashing.

One human-readable file drives a batch run.  Unknown keys are rejected
everywhere so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

import yaml

from .errors import ConfigError
from .model import FluidModel, GeneratorFamily, StateSpace

_MODEL_KEYS = {"states", "v", "bound_K", "generator"}
_GENERATOR_KEYS = {
    "kind", "matrix", "breakpoints", "matrices", "base",
    "fourier_terms", "poly_terms",
}
_FOURIER_KEYS = {"coef", "omega", "phase"}
_POLY_KEYS = {"coef", "degree"}
_NUMERICS_KEYS = {
    "ds", "da", "eta", "s_max", "seed", "horizon",
    "check_resolution", "validation_horizon",
}
_FACTORIZE_KEYS = {"c"}
_PASSAGE_KEYS = {"c", "level", "sign", "laplace", "s_window", "boundary", "target"}
_BOUNDARY_KEYS = {"kind", "target", "s", "values", "eta"}
_SIMULATE_KEYS = {"level", "sign", "start_state", "s0", "n", "discount", "target"}
_VERIFY_KEYS = {"n_mc", "n_jumps", "n_random", "seed"}
_TOP_KEYS = {"model", "numerics", "factorize", "passage", "simulate", "verify"}

_NUMERICS_DEFAULTS = {
    "ds": None, "da": None, "eta": None, "s_max": None, "seed": 0,
    "horizon": None, "check_resolution": 1e-3, "validation_horizon": 20.0,
}


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class Config:
    raw: dict
    model: FluidModel
    numerics: dict
    sections: dict

    @property
    def seed(self) -> int:
        return int(self.numerics["seed"])

    def section(self, name: str) -> dict:
        if name not in self.sections or self.sections[name] is None:
            raise ConfigError(f"config has no '{name}' section for this command")
        return self.sections[name]

    def sha256(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=str).encode()
        ).hexdigest()


def _build_family(spec: dict, bound_K: float | None) -> GeneratorFamily:
    _require_keys(spec, _GENERATOR_KEYS, "model.generator")
    kind = spec.get("kind")
    if kind == "constant":
        if "matrix" not in spec:
            raise ConfigError("constant generator needs 'matrix'")
        return GeneratorFamily.constant(spec["matrix"], bound_K=bound_K)
    if kind == "piecewise_constant":
        if "breakpoints" not in spec or "matrices" not in spec:
            raise ConfigError("piecewise generator needs 'breakpoints' and 'matrices'")
        return GeneratorFamily.piecewise_constant(
            spec["breakpoints"], spec["matrices"], bound_K=bound_K
        )
    if kind == "fourier_polynomial":
        if "base" not in spec:
            raise ConfigError("fourier_polynomial generator needs 'base'")
        fts = []
        for term in spec.get("fourier_terms", []) or []:
            _require_keys(term, _FOURIER_KEYS, "fourier term")
            fts.append((term["coef"], term["omega"], term.get("phase", 0.0)))
        pts = []
        for term in spec.get("poly_terms", []) or []:
            _require_keys(term, _POLY_KEYS, "poly term")
            pts.append((term["coef"], term["degree"]))
        return GeneratorFamily.fourier_polynomial(
            spec["base"], fourier_terms=fts, poly_terms=pts, bound_K=bound_K
        )
    raise ConfigError(f"unknown generator kind {kind!r}")


def parse_config(raw: dict) -> Config:
    _require_keys(raw, _TOP_KEYS, "config")
    if "model" not in raw:
        raise ConfigError("config needs a 'model' section")
    msec = raw["model"]
    _require_keys(msec, _MODEL_KEYS, "model")
    for key in ("states", "v", "generator"):
        if key not in msec:
            raise ConfigError(f"model section needs '{key}'")
    try:
        space = StateSpace(msec["states"], msec["v"])
        family = _build_family(msec["generator"], msec.get("bound_K"))
        model = FluidModel(space, family)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid model: {exc}") from exc

    numerics = dict(_NUMERICS_DEFAULTS)
    if raw.get("numerics"):
        _require_keys(raw["numerics"], _NUMERICS_KEYS, "numerics")
        numerics.update(raw["numerics"])

    sections = {}
    for name, keys in (
        ("factorize", _FACTORIZE_KEYS),
        ("passage", _PASSAGE_KEYS),
        ("simulate", _SIMULATE_KEYS),
        ("verify", _VERIFY_KEYS),
    ):
        if name in raw and raw[name] is not None:
            _require_keys(raw[name], keys, name)
            sections[name] = dict(raw[name])
    if "passage" in sections and "boundary" in sections["passage"]:
        _require_keys(sections["passage"]["boundary"], _BOUNDARY_KEYS,
                      "passage.boundary")
    return Config(raw=raw, model=model, numerics=numerics, sections=sections)


def load_config(path: str, overrides: list[str] | None = None) -> Config:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a YAML mapping")
    for item in overrides or []:
        raw = _apply_override(raw, item)
    return parse_config(raw)


def _apply_override(raw: dict, item: str) -> dict:
    """Apply one ``section.key=value`` command-line override."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    dotted, value = item.split("=", 1)
    keys = dotted.split(".")
    parsed: Any = yaml.safe_load(value)
    node = raw
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = parsed
    return raw


def config_roundtrip(cfg: Config) -> Config:
    """parse(serialize(cfg)); identity on the raw mapping by construction."""
    text = yaml.safe_dump(cfg.raw, sort_keys=True)
    return parse_config(yaml.safe_load(text))
