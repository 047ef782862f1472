"""INI configuration and run manifests.

A file has a ``[link]`` section with :class:`LinkConfig` field names and a
``[sim]`` section with :class:`SimConfig` field names. A written manifest is
itself a valid configuration: its ``[manifest]`` section is ignored on load.
"""

from __future__ import annotations

import configparser
import dataclasses
import datetime as _dt
import math
from importlib import resources
from pathlib import Path

from . import __version__
from .link_analysis import LinkConfig, LinkConfigError
from .particle_sim import SimConfig, SimConfigError

LINK_SECTION = "link"
SIM_SECTION = "sim"
MANIFEST_SECTION = "manifest"


class ConfigError(ValueError):
    pass


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)
    return parse


def _bits(text: str) -> tuple[int, ...]:
    parts = text.replace(",", " ").split()
    if any(p not in ("0", "1") for p in parts):
        raise ValueError(f"expected space-separated 0/1 bits, got {text!r}")
    return tuple(int(p) for p in parts)


def _boolean(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _integer(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


_LINK_FIELDS = {
    "d_sd": float, "d_sr": float, "r_r": float, "r_d": float, "diffusion": float,
    "kon_r": float, "koff_r": float, "kon_d": float, "koff_d": float,
    "bit_interval": float, "n_a": float, "n_b": float, "p0": float, "prefix": _bits,
    "tau_r": _optional(_integer), "tau_d": _optional(_integer), "budget": _optional(float),
    "kernel": str, "tol": float, "relay_history": str,
}
_SIM_FIELDS = {
    "dt": float, "snapshots": _integer, "seed": _integer, "boundary_rule": str,
    "desorb_placement": str, "desorb_offset": _optional(float), "opaque_bodies": _boolean,
    "engine": str, "reference_molecules": _integer, "workers": _optional(_integer),
    "debug": _boolean,
}


def _line_of(path: str, section: str, key: str) -> int | None:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError:
        return None
    current = None
    for no, line in enumerate(lines, 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and "=" in s and s.split("=", 1)[0].strip() == key:
            return no
    return None


def _where(source: str, section: str, key: str | None = None) -> str:
    loc = source
    if key is not None:
        line = _line_of(source, section, key)
        loc += f":{line}" if line else ""
        return f"{loc}: [{section}] {key}"
    return f"{loc}: [{section}]"


def _parse_section(parser, section, fields, source) -> dict:
    if not parser.has_section(section):
        return {}
    out = {}
    for key, raw in parser.items(section):
        if key not in fields:
            raise ConfigError(f"{_where(source, section, key)}: unknown field "
                              f"(expected one of {', '.join(sorted(fields))})")
        try:
            out[key] = fields[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{_where(source, section, key)}: {exc}") from None
    return out


def parse_config(text: str, source: str = "<string>", link_overrides: dict | None = None,
                 sim_overrides: dict | None = None) -> SimConfig:
    """Parse INI text into a :class:`SimConfig` (whose ``link`` holds the link parameters)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = set(parser.sections()) - {LINK_SECTION, SIM_SECTION, MANIFEST_SECTION}
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
    link_kw = _parse_section(parser, LINK_SECTION, _LINK_FIELDS, source)
    sim_kw = _parse_section(parser, SIM_SECTION, _SIM_FIELDS, source)
    link_kw.update(link_overrides or {})
    sim_kw.update(sim_overrides or {})
    try:
        link = LinkConfig(**link_kw)
    except (LinkConfigError, ValueError) as exc:
        raise ConfigError(f"{_where(source, LINK_SECTION)}: {exc}") from None
    try:
        return SimConfig(link=link, **sim_kw)
    except (SimConfigError, ValueError) as exc:
        raise ConfigError(f"{_where(source, SIM_SECTION)}: {exc}") from None


def load_config(path: str | None = None, link_overrides: dict | None = None,
                sim_overrides: dict | None = None) -> SimConfig:
    """Load ``path``; without a path the packaged defaults are used."""
    if path is None:
        return parse_config(default_config_text(), "<default.ini>", link_overrides, sim_overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    return parse_config(text, str(path), link_overrides, sim_overrides)


def default_config_text() -> str:
    return resources.files("dfrelay.data").joinpath("default.ini").read_text()


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    if isinstance(value, float):
        if math.isfinite(value) and value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def dump_config(sim: SimConfig, manifest: dict | None = None) -> str:
    """Serialize every resolved parameter; ``manifest`` entries go into ``[manifest]``."""
    lines = []
    if manifest:
        lines.append(f"[{MANIFEST_SECTION}]")
        lines += [f"{k} = {v}" for k, v in manifest.items()]
        lines.append("")
    lines.append(f"[{LINK_SECTION}]")
    for f in dataclasses.fields(sim.link):
        lines.append(f"{f.name} = {_format(getattr(sim.link, f.name))}")
    lines.append("")
    lines.append(f"[{SIM_SECTION}]")
    for f in dataclasses.fields(sim):
        if f.name != "link":
            lines.append(f"{f.name} = {_format(getattr(sim, f.name))}")
    return "\n".join(lines) + "\n"


def write_manifest(path, sim: SimConfig, command: str, outputs: list[str],
                   started: _dt.datetime) -> None:
    meta = {
        "tool": f"dfrelay {__version__}",
        "command": command,
        "seed": sim.seed,
        "started": started.isoformat(timespec="seconds"),
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": ", ".join(outputs),
    }
    Path(path).write_text(dump_config(sim, meta))
