"""Readers for dataset CSVs, population specs and scenario files."""
from __future__ import annotations

import configparser
import csv
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .simulation import ScenarioConfig, preset
from .survival import (
    NO_CENSORING,
    CensoringSpec,
    DiscreteLaw,
    ExponentialLaw,
    FinitePopulation,
    SurvivalData,
)

DATASET_COLUMNS = ("id", "time", "event", "group", "stratum")


class InputError(ValueError):
    """Malformed input file; the message names the offending line where possible."""


def _parse_time(text: str, line: int) -> float:
    try:
        t = float(text)
    except ValueError:
        raise InputError(f"line {line}: invalid time {text!r}") from None
    if not math.isfinite(t) or t < 0:
        raise InputError(f"line {line}: invalid time {text!r} (must be finite and >= 0)")
    return t


def _parse_flag(text: str, name: str, line: int) -> int:
    text = text.strip()
    if text not in ("0", "1"):
        raise InputError(f"line {line}: {name} must be 0 or 1, got {text!r}")
    return int(text)


def read_dataset(path) -> SurvivalData:
    """Read ``id,time,event,group[,stratum]`` rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise InputError("line 1: empty file") from None
        if tuple(header) not in (DATASET_COLUMNS, DATASET_COLUMNS[:4]):
            raise InputError(f"line 1: header must be {','.join(DATASET_COLUMNS)} (stratum optional)")
        has_stratum = len(header) == 5
        times, events, groups, strata = [], [], [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"line {line}: expected {len(header)} fields, got {len(row)}")
            times.append(_parse_time(row[1].strip(), line))
            events.append(_parse_flag(row[2], "event", line))
            groups.append(_parse_flag(row[3], "group", line))
            if has_stratum and row[4].strip():
                try:
                    s = int(row[4])
                except ValueError:
                    raise InputError(f"line {line}: stratum must be an integer, got {row[4]!r}") from None
                if s < 0:
                    raise InputError(f"line {line}: stratum must be >= 0")
                strata.append(s)
            else:
                strata.append(0)
    if not times:
        raise InputError("empty dataset")
    return SurvivalData.from_arrays(times, events, groups, strata)


def write_dataset(data: SurvivalData, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DATASET_COLUMNS)
        for i, (t, e, g, s) in enumerate(zip(data.time, data.event, data.group, data.stratum)):
            w.writerow([i, repr(float(t)), int(e), int(g), int(s)])


# -- population specs --------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_law(text: str):
    """``none``, ``exponential <scale>`` or ``discrete v:p v:p ...`` (v may be ``inf``)."""
    parts = text.split()
    if not parts:
        raise InputError("empty censoring law")
    kind = parts[0].lower()
    if kind == "none":
        return NO_CENSORING
    if kind == "exponential" and len(parts) == 2:
        return ExponentialLaw(float(parts[1]))
    if kind == "discrete" and len(parts) > 1:
        values, probs = [], []
        for item in " ".join(parts[1:]).replace(",", " ").split():
            v, _, p = item.partition(":")
            values.append(float(v))
            probs.append(float(p))
        return DiscreteLaw(tuple(values), tuple(probs))
    raise InputError(f"cannot parse censoring law {text!r}")


def _bundled(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    candidate = resources.files("randlogrank") / "data" / p.name
    if candidate.is_file():
        return Path(str(candidate))
    raise InputError(f"no such file: {path}")


def resolve_input(path) -> Path:
    """A real path, or the name of a file bundled with the package."""
    return _bundled(path)


def read_population(path) -> FinitePopulation:
    """Parse an INI-style population spec.

    ::

        [population]
        times = 1, 2, 2, 5
        p1 = 0.5
        treated = discrete 1.5:0.4 inf:0.6
        control = exponential 1.0
        strata = 0, 0, 1, 1        ; optional
        [stratum.1]                ; optional per-stratum overrides
        p1 = 0.3
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(resolve_input(path)) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise InputError(f"malformed population spec: {exc}") from None
    if not cp.has_section("population"):
        raise InputError("population spec needs a [population] section")
    sec = cp["population"]
    try:
        times = np.array(_floats(sec["times"]))
        p1 = float(sec.get("p1", "0.5"))
        treated = parse_law(sec.get("treated", "none"))
        control = parse_law(sec.get("control", "none"))
        strata = np.array(_floats(sec["strata"]), dtype=np.int64) if "strata" in sec else None
        base = CensoringSpec(treated, control)
        labels = sorted(set(strata.tolist())) if strata is not None else [0]
        if len(labels) == 1 and not any(s.startswith("stratum.") for s in cp.sections()):
            return FinitePopulation(times, p1, base, strata)
        p1s, cens = {}, {}
        for s in labels:
            name = f"stratum.{s}"
            over = cp[name] if cp.has_section(name) else {}
            p1s[s] = float(over.get("p1", p1))
            cens[s] = CensoringSpec(
                parse_law(over["treated"]) if "treated" in over else treated,
                parse_law(over["control"]) if "control" in over else control,
            )
        return FinitePopulation(times, p1s, cens, strata)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed population spec: {exc}") from None


# -- scenario files ----------------------------------------------------------

_INT_KEYS = {"n", "reps", "seed", "iz", "ic"}
_FLOAT_KEYS = {"rho", "theta"}
_BOOL_KEYS = {"strata"}
_STR_KEYS = {"case", "mode", "censoring"}


def read_scenario(path) -> ScenarioConfig:
    """Flat ``key = value`` file; an optional ``preset`` key supplies defaults."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string("[scenario]\n" + text)
    except configparser.Error as exc:
        raise InputError(f"malformed scenario file: {exc}") from None
    sec = cp["scenario"]
    values = {}
    try:
        for key, raw in sec.items():
            if key == "preset":
                continue
            if key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            elif key in _BOOL_KEYS:
                values[key] = sec.getboolean(key)
            elif key in _STR_KEYS:
                values[key] = raw.strip()
            else:
                raise InputError(f"unknown scenario key {key!r}")
        if "preset" in sec:
            return preset(sec["preset"], **values)
        return ScenarioConfig(**values)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed scenario file: {exc}") from None
