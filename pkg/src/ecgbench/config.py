"""Pipeline configuration: INI file, CLI overrides and a resolved snapshot."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .models import ForestConfig, LinearConfig, MlpConfig
from .pipeline import ProcessConfig
from .synth import FieldWeekConfig

SNAPSHOT_NAME = "config.ini"

# INI section -> (attribute on PipelineConfig, {ini key: dataclass field})
_SECTIONS = {
    "synth": ("synth", {"subjects": "n_subjects", "days": "n_days"}),
    "process": ("process", {}),
    "forest": ("forest", {}),
    "linear": ("linear", {}),
    "mlp": ("mlp", {}),
}


@dataclass
class PipelineConfig:
    seed: int = 0
    input: Optional[str] = None
    out: Optional[str] = None
    synth: FieldWeekConfig = field(default_factory=FieldWeekConfig)
    process: ProcessConfig = field(default_factory=ProcessConfig)
    schema: str = "selected"
    target_per_subject: Optional[int] = 50000
    scenarios: tuple = ("S1",)
    classifiers: tuple = ("forest",)
    fusion: int = 5
    forest: ForestConfig = field(default_factory=ForestConfig)
    linear: LinearConfig = field(default_factory=LinearConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)

    def __post_init__(self):
        if self.schema not in ("selected", "full"):
            raise ValueError("schema must be 'selected' or 'full'")
        if not 1 <= int(self.fusion) <= 5:
            raise ValueError("fusion must be in 1..5")
        for c in self.classifiers:
            if c not in ("forest", "linear", "mlp"):
                raise ValueError(f"unknown classifier {c!r}")

    def classifier_config(self, kind: str):
        return replace(getattr(self, kind), seed=self.seed)

    @property
    def fusion_levels(self) -> tuple:
        return tuple(range(1, int(self.fusion) + 1))


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep "C" distinct from "c"
    return parser


def _parse_value(text: str, current):
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        return tuple(int(v) if v.strip().lstrip("-").isdigit() else v.strip()
                     for v in text.split(",") if v.strip())
    if current is None:
        for cast in (int, float):
            try:
                return cast(text)
            except ValueError:
                pass
    return text


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    return str(v)


def _update(obj, values: dict, aliases: dict):
    names = {f.name: f for f in fields(obj)}
    changes = {}
    for key, text in values.items():
        name = aliases.get(key, key)
        if name not in names or name == "seed":
            raise ValueError(f"unknown setting {key!r}")
        default = getattr(obj, name)
        if default is None:
            default = names[name].default
        changes[name] = _parse_value(text, default)
    return replace(obj, **changes) if changes else obj


def load_config(path: Optional[str] = None, text: Optional[str] = None) -> PipelineConfig:
    """Read an INI config; unknown sections or keys are errors."""
    cfg = PipelineConfig()
    parser = _parser()
    if path is not None:
        with open(path) as fh:
            parser.read_file(fh)
    elif text is not None:
        parser.read_string(text)
    else:
        return cfg
    for section in parser.sections():
        values = dict(parser.items(section))
        if section == "run":
            for key, raw in values.items():
                if key == "seed":
                    cfg.seed = int(raw)
                elif key in ("input", "out"):
                    setattr(cfg, key, None if raw.strip().lower() == "none" else raw.strip())
                else:
                    raise ValueError(f"unknown setting [run] {key}")
        elif section in ("features", "evaluate"):
            for key, raw in values.items():
                if key == "schema":
                    cfg.schema = raw.strip()
                elif key == "target_per_subject":
                    cfg.target_per_subject = _parse_value(raw, 0)
                elif key == "scenario":
                    cfg.scenarios = tuple(v.strip() for v in raw.split(",") if v.strip())
                elif key == "classifier":
                    cfg.classifiers = tuple(v.strip() for v in raw.split(",") if v.strip())
                elif key == "fusion":
                    cfg.fusion = int(raw)
                else:
                    raise ValueError(f"unknown setting [{section}] {key}")
        elif section in _SECTIONS:
            attr, aliases = _SECTIONS[section]
            setattr(cfg, attr, _update(getattr(cfg, attr), values, aliases))
        else:
            raise ValueError(f"unknown config section [{section}]")
    cfg.__post_init__()
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    """Deterministic INI text of every resolved setting (the run snapshot)."""
    parser = _parser()
    parser["run"] = {"seed": str(cfg.seed), "input": _format_value(cfg.input),
                     "out": _format_value(cfg.out)}
    parser["features"] = {"schema": cfg.schema,
                          "target_per_subject": _format_value(cfg.target_per_subject)}
    parser["evaluate"] = {"scenario": ",".join(cfg.scenarios),
                          "classifier": ",".join(cfg.classifiers), "fusion": str(cfg.fusion)}
    for section, (attr, aliases) in _SECTIONS.items():
        back = {v: k for k, v in aliases.items()}
        obj = getattr(cfg, attr)
        parser[section] = {back.get(f.name, f.name): _format_value(getattr(obj, f.name))
                           for f in fields(obj) if f.name != "seed"}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def resolve(cfg: PipelineConfig) -> PipelineConfig:
    """Propagate the master seed into the synth section."""
    cfg.synth = replace(cfg.synth, seed=cfg.seed)
    return cfg
