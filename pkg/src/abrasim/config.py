"""Scenario and sweep files.

The format is line oriented::

    # comment
    [section]
    key = value

Every error names the file line it came from.  Sections and keys:

``[scenario]``  variant, mss, transfer_bytes, t_end, seed, rwnd,
                initial_cwnd, restart_cwnd, restore_ssthresh
``[rto]``       policy, initial, floor, ceiling
``[route]``     base_delay, delay_jitter, random_loss_prob, outage_rate,
                outage_min, outage_max, scripted_outages (``start-end, ...``),
                scripted_losses (``data:SEQ, ack:ACK, ...``)
``[sweep]``     axes, variants, seeds (``1-20`` or ``1, 4, 9``)
``[axis.NAME]`` levels, plus mapping overrides (``rate_per_level``, ``ref``)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Optional

from .cc import Variant, initial_state
from .experiment import AXES, DEFAULT_LEVELS, DEFAULT_MAPPINGS, DEFAULT_SEEDS, Scenario, build_sweep
from .netsim import RouteSchedule
from .rto import BackoffPolicy


class ConfigFileError(ValueError):
    def __init__(self, source: str, line: Optional[int], message: str):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Entry:
    value: str
    line: int


class ConfigFile:
    def __init__(self, sections: dict[str, dict[str, Entry]], source: str = "<config>"):
        self.sections = sections
        self.source = source

    def error(self, section: str, key: str, message: str) -> ConfigFileError:
        entry = self.sections.get(section, {}).get(key)
        return ConfigFileError(self.source, entry.line if entry else None, f"[{section}] {key}: {message}")

    def get(self, section: str, key: str, convert: Callable[[str], Any], default: Any = None) -> Any:
        entry = self.sections.get(section, {}).get(key)
        if entry is None or entry.value == "":
            return default
        try:
            return convert(entry.value)
        except (ValueError, TypeError) as exc:
            raise ConfigFileError(self.source, entry.line, f"[{section}] {key}: {exc}") from None


_SECTION = re.compile(r"^\[([A-Za-z0-9_.\-]+)\]$")
_KEY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")

KNOWN_KEYS = {
    "scenario": {
        "variant", "mss", "transfer_bytes", "t_end", "seed", "rwnd",
        "initial_cwnd", "restart_cwnd", "restore_ssthresh",
    },
    "rto": {"policy", "initial", "floor", "ceiling"},
    "route": {
        "base_delay", "delay_jitter", "random_loss_prob", "outage_rate",
        "outage_min", "outage_max", "scripted_outages", "scripted_losses",
    },
    "sweep": {"axes", "variants", "seeds"},
}
AXIS_KEYS = {"levels", "rate_per_level", "ref"}


def parse_config(text: str, source: str = "<config>") -> ConfigFile:
    sections: dict[str, dict[str, Entry]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            current = m.group(1)
            if current not in KNOWN_KEYS and not (
                current.startswith("axis.") and current[5:] in AXES
            ):
                raise ConfigFileError(source, lineno, f"unknown section [{current}]")
            if current in sections:
                raise ConfigFileError(source, lineno, f"duplicate section [{current}]")
            sections[current] = {}
            continue
        m = _KEY.match(line)
        if not m:
            raise ConfigFileError(source, lineno, f"expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ConfigFileError(source, lineno, "key outside of any [section]")
        key, value = m.group(1), m.group(2).strip()
        allowed = AXIS_KEYS if current.startswith("axis.") else KNOWN_KEYS[current]
        if key not in allowed:
            raise ConfigFileError(source, lineno, f"unknown key {key!r} in [{current}]")
        if key in sections[current]:
            raise ConfigFileError(source, lineno, f"duplicate key {key!r}")
        sections[current][key] = Entry(value, lineno)
    return ConfigFile(sections, source)


def load_config(path: str | Path) -> ConfigFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(str(path), None, f"cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


# -- value converters -----------------------------------------------------------


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _list(s: str) -> list[str]:
    return [p.strip() for p in s.split(",") if p.strip()]


def _int_list(s: str) -> list[int]:
    out: list[int] = []
    for part in _list(s):
        if re.fullmatch(r"-?\d+-\d+", part):
            lo, hi = part.rsplit("-", 1)
            if int(hi) < int(lo):
                raise ValueError(f"empty range {part!r}")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(s: str) -> list[float]:
    return [float(p) for p in _list(s)]


def _outages(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in _list(s):
        start, sep, end = part.partition("-")
        if not sep:
            raise ValueError(f"outage {part!r} must look like start-end")
        out.append((float(start), float(end)))
    return tuple(out)


def _losses(s: str) -> tuple[tuple[str, int], ...]:
    out = []
    for part in _list(s):
        direction, sep, key = part.partition(":")
        if not sep or direction.strip() not in ("data", "ack"):
            raise ValueError(f"loss {part!r} must look like data:SEQ or ack:ACK")
        out.append((direction.strip(), int(key)))
    return tuple(out)


def _positive(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def inner(s: str) -> Any:
        v = convert(s)
        if v <= 0:
            raise ValueError(f"must be positive, got {s!r}")
        return v

    return inner


# -- builders -------------------------------------------------------------------


def scenario_from_config(cfg: ConfigFile, base: Optional[Scenario] = None) -> Scenario:
    base = base or Scenario()
    r = base.route
    values = dict(
        base_delay=cfg.get("route", "base_delay", float, r.base_delay),
        delay_jitter=cfg.get("route", "delay_jitter", float, r.delay_jitter),
        random_loss_prob=cfg.get("route", "random_loss_prob", float, r.random_loss_prob),
        outage_rate=cfg.get("route", "outage_rate", float, r.outage_rate),
        outage_duration=(
            cfg.get("route", "outage_min", float, r.outage_duration[0]),
            cfg.get("route", "outage_max", float, r.outage_duration[1]),
        ),
        scripted_outages=cfg.get("route", "scripted_outages", _outages, r.scripted_outages),
        scripted_losses=cfg.get("route", "scripted_losses", _losses, r.scripted_losses),
    )
    try:
        route = RouteSchedule(**values)
    except ValueError as exc:
        raise ConfigFileError(cfg.source, _first_line(cfg, "route"), f"[route] {exc}") from None
    scenario = replace(
        base,
        variant=cfg.get("scenario", "variant", Variant, base.variant),
        mss=cfg.get("scenario", "mss", _positive(int), base.mss),
        transfer_bytes=cfg.get("scenario", "transfer_bytes", _positive(int), base.transfer_bytes),
        t_end=cfg.get("scenario", "t_end", _positive(float), base.t_end),
        seed=cfg.get("scenario", "seed", int, base.seed),
        rwnd=cfg.get("scenario", "rwnd", _positive(int), base.rwnd),
        initial_cwnd=cfg.get("scenario", "initial_cwnd", int, base.initial_cwnd),
        restart_cwnd=cfg.get("scenario", "restart_cwnd", int, base.restart_cwnd),
        restore_ssthresh=cfg.get("scenario", "restore_ssthresh", _bool, base.restore_ssthresh),
        policy=cfg.get("rto", "policy", BackoffPolicy, base.policy),
        initial_rto=cfg.get("rto", "initial", _positive(float), base.initial_rto),
        rto_floor=cfg.get("rto", "floor", _positive(float), base.rto_floor),
        rto_ceiling=cfg.get("rto", "ceiling", _positive(float), base.rto_ceiling),
        route=route,
    )
    try:
        scenario.to_config()
        initial_state(scenario.mss, scenario.initial_cwnd)
    except ValueError as exc:
        raise ConfigFileError(cfg.source, _first_line(cfg, "scenario"), str(exc)) from None
    return scenario


def _first_line(cfg: ConfigFile, section: str) -> Optional[int]:
    entries = cfg.sections.get(section)
    return min((e.line for e in entries.values()), default=None) if entries else None


def sweep_from_config(cfg: ConfigFile, base: Optional[Scenario] = None) -> list[Scenario]:
    base = scenario_from_config(cfg, base)
    axes = cfg.get("sweep", "axes", _list, ["speed"])
    for axis in axes:
        if axis not in AXES:
            raise cfg.error("sweep", "axes", f"unknown axis {axis!r}")
    variants = cfg.get("sweep", "variants", lambda s: [Variant(v) for v in _list(s)], list(Variant))
    seeds = cfg.get("sweep", "seeds", _int_list, list(DEFAULT_SEEDS))
    scenarios: list[Scenario] = []
    for axis in axes:
        section = f"axis.{axis}"
        levels = cfg.get(section, "levels", _float_list, list(DEFAULT_LEVELS[axis]))
        mapping = dict(DEFAULT_MAPPINGS[axis])
        for key in ("rate_per_level", "ref"):
            if key in cfg.sections.get(section, {}):
                if key not in mapping:
                    raise cfg.error(section, key, f"not a mapping parameter of axis {axis!r}")
                mapping[key] = cfg.get(section, key, _positive(float))
        try:
            scenarios += build_sweep(axis, levels, variants, seeds, base, {axis: mapping})
        except ValueError as exc:
            raise cfg.error(section, "levels", str(exc)) from None
    return scenarios


def defaults_text() -> str:
    """A complete config file holding every default value."""
    s = Scenario()
    r = s.route
    opt = lambda v: "" if v is None else v  # noqa: E731
    return f"""\
# abrasim defaults; blank values mean "derived" (see comments)
[scenario]
variant = {s.variant.value}
mss = {s.mss}
transfer_bytes = {s.transfer_bytes}
t_end = {s.t_end}
seed = {s.seed}
rwnd = {s.rwnd}
# blank: min(4*mss, max(2*mss, 4380))
initial_cwnd = {opt(s.initial_cwnd)}
# blank: one mss
restart_cwnd = {opt(s.restart_cwnd)}
restore_ssthresh = {str(s.restore_ssthresh).lower()}

[rto]
# blank: abra for abra-newreno, exponential otherwise
policy = {opt(s.policy)}
initial = {s.initial_rto}
floor = {s.rto_floor}
ceiling = {s.rto_ceiling}

[route]
base_delay = {r.base_delay}
delay_jitter = {r.delay_jitter}
random_loss_prob = {r.random_loss_prob}
outage_rate = {r.outage_rate}
outage_min = {r.outage_duration[0]}
outage_max = {r.outage_duration[1]}
scripted_outages =
scripted_losses =

[sweep]
axes = speed
variants = {", ".join(v.value for v in Variant)}
seeds = {DEFAULT_SEEDS[0]}-{DEFAULT_SEEDS[-1]}

[axis.speed]
levels = {", ".join(f"{x:g}" for x in DEFAULT_LEVELS["speed"])}
rate_per_level = {DEFAULT_MAPPINGS["speed"]["rate_per_level"]}

[axis.nodes]
levels = {", ".join(f"{x:g}" for x in DEFAULT_LEVELS["nodes"])}
ref = {DEFAULT_MAPPINGS["nodes"]["ref"]}

[axis.pause]
levels = {", ".join(f"{x:g}" for x in DEFAULT_LEVELS["pause"])}
ref = {DEFAULT_MAPPINGS["pause"]["ref"]}
"""
