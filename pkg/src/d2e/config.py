"""Flat key=value run configuration.

The config file format is one `key = value` pair per line (# comments),
with dotted section prefixes (igmm.*, rgp.*, planner.*, train.*, run.*).
Unknown keys are rejected; types are coerced against the schema derived
from the dataclass defaults.  Command-line overrides win over file values,
and the D2E_SEED environment variable wins over both for the seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

import numpy as np

from .errors import MissingRequired, TypeMismatch, UnknownKey
from .igmm import IgmmConfig, TemperatureSchedule
from .planner import PlannerConfig
from .rgp import RgpConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    env: str
    igmm: IgmmConfig
    rgp: RgpConfig
    planner: PlannerConfig
    train: TrainConfig
    out_dir: str

    @property
    def seed(self) -> int:
        return self.train.seed


_SECTIONS = {
    "igmm": IgmmConfig,
    "rgp": RgpConfig,
    "planner": PlannerConfig,
    "train": TrainConfig,
}

_RUN_KEYS = {"run.env": str, "run.out_dir": str}

# knobs whose value feeds env/agent wiring rather than a dataclass field
_DERIVED_BY_ENV = ("igmm.obs_dim", "igmm.encoder_kind", "rgp.exo_dim", "rgp.action_dim")


def _schema() -> dict[str, type]:
    schema: dict[str, type] = dict(_RUN_KEYS)
    for section, cls in _SECTIONS.items():
        for f in fields(cls):
            if section == "igmm" and f.name == "temperature":
                # the annealing schedule expands into three scalar knobs
                schema[f"{section}.temperature_initial"] = float
                schema[f"{section}.temperature_floor"] = float
                schema[f"{section}.temperature_decay"] = float
                continue
            # annotations are strings under future-imports; use the default's type
            schema[f"{section}.{f.name}"] = type(getattr(cls(), f.name))
    return schema


def _coerce(key: str, raw: str, target: type):
    raw = raw.strip()
    try:
        if target is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if target is int:
            if "." in raw:
                raise ValueError(raw)
            return int(raw)
        if target is float:
            return float(raw)
        if target is str:
            return raw
    except ValueError as exc:
        raise TypeMismatch(f"{key}: cannot coerce {raw!r} to {target.__name__}") from exc
    raise TypeMismatch(f"{key}: unsupported type {target}")


def parse_config(path: str | None, overrides: list[str] | None = None) -> RunConfig:
    """Strict parse of the key=value file plus `k=v` override strings."""
    schema = _schema()
    values: dict[str, object] = {}

    def ingest(line: str, where: str):
        line = line.split("#", 1)[0].strip()
        if not line:
            return
        if "=" not in line:
            raise TypeMismatch(f"{where}: expected key=value, got {line!r}")
        key, raw = [part.strip() for part in line.split("=", 1)]
        if key not in schema:
            raise UnknownKey(f"{where}: unknown key {key!r}")
        values[key] = _coerce(key, raw, schema[key])

    if path is not None:
        if not os.path.exists(path):
            raise MissingRequired(f"config file not found: {path}")
        with open(path) as f:
            for ln, line in enumerate(f, 1):
                ingest(line, f"{path}:{ln}")
    for ov in overrides or []:
        ingest(ov, "--set")

    env_seed = os.environ.get("D2E_SEED")
    if env_seed is not None:
        values["train.seed"] = _coerce("train.seed", env_seed, int)

    env_name = str(values.get("run.env", "pendulum"))
    out_dir = str(values.get("run.out_dir", "out"))

    def build(section: str, cls, extra: dict):
        kwargs = dict(extra)
        for f in fields(cls):
            key = f"{section}.{f.name}"
            if section == "igmm" and f.name == "temperature":
                kwargs["temperature"] = TemperatureSchedule(
                    initial=float(values.get("igmm.temperature_initial", 1.0)),
                    floor=float(values.get("igmm.temperature_floor", 0.3)),
                    decay=float(values.get("igmm.temperature_decay", 0.999)),
                )
                continue
            if key in values:
                kwargs[f.name] = values[key]
        return cls(**kwargs)

    from .envs import make_env

    probe = make_env(env_name)
    igmm_extra = {
        "obs_dim": probe.obs_dim,
        "encoder_kind": "conv" if getattr(probe, "obs_kind", "vector") == "image"
        or env_name == "dotchaser" else "mlp",
    }
    igmm = build("igmm", IgmmConfig, igmm_extra)
    rgp_extra = {"exo_dim": igmm.latent_dim, "action_dim": probe.action_dim}
    rgp = build("rgp", RgpConfig, rgp_extra)
    if rgp.layer_dim != igmm.latent_dim:
        rgp_extra["layer_dim"] = igmm.latent_dim
        rgp = build("rgp", RgpConfig, rgp_extra)
    planner = build("planner", PlannerConfig, {})
    train = build("train", TrainConfig, {})
    return RunConfig(env=env_name, igmm=igmm, rgp=rgp, planner=planner,
                     train=train, out_dir=out_dir)


def config_echo(config: RunConfig) -> str:
    """Effective configuration as reparseable key=value text."""
    lines = [f"run.env = {config.env}", f"run.out_dir = {config.out_dir}"]
    for section, obj in (("igmm", config.igmm), ("rgp", config.rgp),
                         ("planner", config.planner), ("train", config.train)):
        for f in fields(obj):
            v = getattr(obj, f.name)
            if section == "igmm" and f.name == "temperature":
                lines.append(f"igmm.temperature_initial = {v.initial}")
                lines.append(f"igmm.temperature_floor = {v.floor}")
                lines.append(f"igmm.temperature_decay = {v.decay}")
                continue
            lines.append(f"{section}.{f.name} = {v}")
    return "\n".join(lines) + "\n"
