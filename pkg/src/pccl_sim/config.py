"""Default parameters, loaded from the packaged ``defaults.json``.

Set ``PCCL_SIM_CONFIG`` to a JSON file to override any subset of keys.
"""

from __future__ import annotations

import json
import os
from importlib import resources

from .cost_model import CostParams

ENV_VAR = "PCCL_SIM_CONFIG"


class ConfigError(ValueError):
    pass


def load_defaults(path: str | None = None) -> dict:
    cfg = json.loads(resources.files("pccl_sim").joinpath("data/defaults.json").read_text())
    override = path or os.environ.get(ENV_VAR)
    if override:
        try:
            with open(override) as f:
                extra = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"{override}: {e}") from e
        unknown = set(extra) - set(cfg)
        if unknown:
            raise ConfigError(f"{override}: unknown keys {sorted(unknown)}")
        cfg.update(extra)
    return cfg


def params_from_config(cfg: dict) -> CostParams:
    return CostParams(
        alpha=cfg["alpha_s"],
        beta=cfg["beta_s_per_byte"],
        reconf_delay=cfg["reconf_delay_s"],
        disconnect_penalty=cfg["disconnect_penalty_s"],
        directed_edge_capacity=cfg["directed_edge_capacity"],
    )
