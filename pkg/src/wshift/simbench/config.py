"""Run-configuration loading and schema validation."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from ..errors import ConfigError
from .dgp import dgp_from_dict
from .engine import MonteCarloConfig
from .truth import DEFAULT_DRAWS


def schema() -> dict:
    return json.loads(resources.files("wshift").joinpath("data/config.schema.json").read_text())


def bundled_configs() -> dict:
    """Name -> path of every experiment config shipped with the package."""
    root = resources.files("wshift").joinpath("data/configs")
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def load_run_config(source) -> dict:
    """Parse (if given a path) and validate a run config; unknown keys are errors, ``_``-keys are comments."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists() and str(source) in bundled_configs():
            path = bundled_configs()[str(source)]
        try:
            obj = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {source}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    else:
        obj = dict(source)
    try:
        jsonschema.validate(obj, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return obj


def study_configs(cfg: dict) -> list[MonteCarloConfig]:
    """One :class:`MonteCarloConfig` per entry of ``sizes``."""
    for key in ("dgp", "estimators", "sizes"):
        if key not in cfg:
            raise ConfigError(f"simulate config needs {key!r}")
    dgp = dgp_from_dict(cfg["dgp"])
    common = dict(dgp=dgp, estimators=tuple(cfg["estimators"]), g=cfg.get("g", "response"), R=cfg.get("R", 100),
                  base_seed=cfg.get("base_seed", cfg.get("seed", 0)), level=cfg.get("level", 0.95),
                  truth_draws=cfg.get("truth_draws", DEFAULT_DRAWS), truth_seed=cfg.get("truth_seed", 0))
    out = []
    for size in cfg["sizes"]:
        if dgp.kind == "covariate_shift" and "n" not in size:
            raise ConfigError("covariate-shift sizes need n and m")
        if dgp.kind == "mar" and "N" not in size:
            raise ConfigError("missing-data sizes need N")
        out.append(MonteCarloConfig(**common, **size))
    return out
