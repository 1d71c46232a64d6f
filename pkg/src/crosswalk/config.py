"""Sectioned key=value configuration covering every tunable parameter.

Any field may be omitted (defaults apply), unknown sections or keys are
rejected, and a parsed configuration always re-serialises to one canonical
text whose hash stamps every output artifact.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
from dataclasses import dataclass, field

from .env import ScenarioConfig
from .evaluate import SuiteConfig
from .pedestrian import PedParams
from .training import TrainConfig


class ConfigError(ValueError):
    pass


SECTION_TYPES = {
    "pedestrian": PedParams,
    "scenario": ScenarioConfig,
    "training": TrainConfig,
    "suite": SuiteConfig,
}


@dataclass
class ToolkitConfig:
    pedestrian: PedParams = field(default_factory=PedParams)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)

    def section(self, name: str):
        return getattr(self, name)

    def to_text(self) -> str:
        """Canonical serialisation: fixed section order, declaration-order
        keys, shortest-round-trip floats."""
        out = io.StringIO()
        for name in SECTION_TYPES:
            out.write(f"[{name}]\n")
            obj = self.section(name)
            for f in dataclasses.fields(obj):
                out.write(f"{f.name} = {_format_value(getattr(obj, f.name))}\n")
            out.write("\n")
        return out.getvalue()

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str) -> "ToolkitConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise ConfigError(f"cannot parse config: {err}") from err
        sections = {}
        for section in parser.sections():
            if section not in SECTION_TYPES:
                raise ConfigError(f"unknown section [{section}]")
            target = SECTION_TYPES[section]
            known = {f.name: f for f in dataclasses.fields(target)}
            kwargs = {}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                default = getattr(target(), key)
                try:
                    kwargs[key] = _parse_value(raw, default)
                except (TypeError, ValueError) as err:
                    raise ConfigError(
                        f"bad value for {key!r} in [{section}]: {err}") from err
            try:
                sections[section] = target(**kwargs)
            except ValueError as err:
                raise ConfigError(f"invalid [{section}]: {err}") from err
        return cls(**sections)

    @classmethod
    def load(cls, path) -> "ToolkitConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected boolean, got {raw!r}")
    if isinstance(default, tuple):
        parts = [p for p in raw.replace(",", " ").split() if p]
        if len(parts) != len(default):
            raise ValueError(f"expected {len(default)} numbers, got {len(parts)}")
        return tuple(float(p) for p in parts)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, int):
        value = float(raw)
        if value != int(value):
            raise ValueError(f"expected integer, got {raw!r}")
        return int(value)
    return raw
