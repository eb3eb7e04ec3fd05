"""Scenario files: a sectioned ``key = value`` format read with configparser.

Grammar
-------
One ``[section]`` per parameter block; ``#`` or ``;`` start comments. All
values are SI. Keys marked as frequencies accept three spellings: the bare
name or a ``_rads`` suffix (rad/s), or a ``_hz`` suffix (converted by 2 pi).
Lists are comma separated. See ``SCHEMA`` for the accepted keys.

=============  ==============================================================
section        keys
=============  ==============================================================
system         type (vibrational | torsional | rotational | beams-demo), name
cavity         L, omega0*, gamma0*, detuning*, and one of drive or power
mechanical     inertia or mass, omega_m*, gamma_m*, temperature, torque
coupling       g (explicit coupling), l (torsional OAM exchange)
lattice        l, w0, trap_l or R, wavelength
body           eps_r, volume
initial        coord, momentum, alpha_re, alpha_im
beam           l (list), p, w0, wavelength, grid, extent, z, plate_step
run            duration, dt, seed, stride, n_traj, backend
analysis       spectrum, discard, band_low*, band_high*, sweep_powers,
               sweep_seeds, departure_bins
=============  ==============================================================

(* frequency keys)
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field

from .beams import LGModeSpec, RingLattice
from .coupling import (CavityParams, DielectricBody, MechanicalParams, drive_from_power, rotational_coupling,
                       torsional_coupling, vibrational_coupling)

SYSTEMS = ("vibrational", "torsional", "rotational", "beams-demo")
BACKENDS = ("auto", "numba", "numpy")


@dataclass(frozen=True)
class Key:
    kind: str  # float, int, str, bool, floats, ints
    check: str = "any"  # any, pos, nonneg, ge1, frac
    freq: bool = False
    choices: tuple = ()


_F = Key("float")
_POS = Key("float", "pos")
_NONNEG = Key("float", "nonneg")
_FREQ = Key("float", freq=True)
_FREQ_POS = Key("float", "pos", freq=True)
_FREQ_NONNEG = Key("float", "nonneg", freq=True)

SCHEMA: dict[str, dict[str, Key]] = {
    "system": {"type": Key("str", choices=SYSTEMS), "name": Key("str")},
    "cavity": {"L": _POS, "omega0": _FREQ_POS, "gamma0": _FREQ_NONNEG, "detuning": _FREQ,
               "drive": _NONNEG, "power": _NONNEG},
    "mechanical": {"inertia": _POS, "mass": _POS, "omega_m": _FREQ_NONNEG, "gamma_m": _FREQ_NONNEG,
                   "temperature": _NONNEG, "torque": _F},
    "coupling": {"g": _F, "l": Key("int")},
    "lattice": {"l": Key("int", "ge1"), "w0": _POS, "trap_l": Key("int"), "R": _NONNEG, "wavelength": _POS},
    "body": {"eps_r": Key("float", "ge1"), "volume": _POS},
    "initial": {"coord": _F, "momentum": _F, "alpha_re": _F, "alpha_im": _F},
    "beam": {"l": Key("ints"), "p": Key("int", "nonneg"), "w0": _POS, "wavelength": _POS,
             "grid": Key("int", "ge1"), "extent": _POS, "z": _F, "plate_step": _F},
    "run": {"duration": _POS, "dt": _POS, "seed": Key("int", "nonneg"), "stride": Key("int", "ge1"),
            "n_traj": Key("int", "ge1"), "backend": Key("str", choices=BACKENDS)},
    "analysis": {"spectrum": Key("bool"), "discard": Key("float", "frac"), "band_low": _FREQ_NONNEG,
                 "band_high": _FREQ_POS, "sweep_powers": Key("floats", "pos"), "sweep_seeds": Key("ints", "nonneg"),
                 "departure_bins": _POS},
}

REQUIRED_SECTIONS = {
    "vibrational": ("cavity", "mechanical", "run"),
    "torsional": ("cavity", "mechanical", "coupling", "run"),
    "rotational": ("cavity", "mechanical", "lattice", "run"),
    "beams-demo": ("beam",),
}

REQUIRED_KEYS = {
    "system": ("type",),
    "cavity": ("L", "omega0", "gamma0"),
    "mechanical": ("gamma_m",),
    "lattice": ("l", "w0"),
    "body": ("eps_r", "volume"),
    "beam": ("l", "w0", "wavelength"),
    "run": ("duration",),
}


@dataclass(frozen=True)
class Issue:
    line: int | None
    section: str
    key: str | None
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line else "override" if self.line == 0 else "file"
        name = f"[{self.section}] {self.key}" if self.key else f"[{self.section}]"
        return f"{where}: {name}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, issues: list[Issue]):
        self.issues = list(issues)
        super().__init__("invalid scenario:\n" + "\n".join(f"  {i}" for i in self.issues))


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; frequencies are stored in rad/s under their bare key names."""

    system: str
    values: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def has(self, section: str) -> bool:
        return section in self.values

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed", 0))

    def serialize(self) -> str:
        return serialize_scenario(self)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    # -- physical objects --------------------------------------------------

    def cavity(self) -> CavityParams:
        c = self.values["cavity"]
        gamma0 = c["gamma0"]
        drive = c.get("drive", 0.0)
        if "power" in c:
            drive = drive_from_power(c["power"], gamma0, c["omega0"])
        return CavityParams(c["L"], c["omega0"], gamma0, c.get("detuning", 0.0), drive)

    def mechanical(self) -> MechanicalParams:
        m = self.values["mechanical"]
        return MechanicalParams(self.system, m.get("inertia", m.get("mass")), m.get("omega_m", 0.0), m["gamma_m"],
                                m.get("temperature", 0.0), m.get("torque", 0.0))

    def lattice(self) -> RingLattice:
        lat = self.values["lattice"]
        wavelength = lat.get("wavelength") or self.cavity().wavelength
        k_p = 2.0 * math.pi / wavelength
        if "trap_l" in lat:
            return RingLattice.from_trap(lat["l"], lat["trap_l"], lat["w0"], k_p)
        return RingLattice(lat["l"], lat["R"], lat["w0"], k_p)

    def body(self) -> DielectricBody | None:
        if "body" not in self.values:
            return None
        b = self.values["body"]
        lat = self.lattice()
        return DielectricBody(b["eps_r"], b["volume"], R=lat.R)

    def coupling_constant(self) -> float:
        """Coupling used by the equations of motion (units depend on the system)."""
        explicit = self.get("coupling", "g")
        if explicit is not None:
            return float(explicit)
        cav = self.cavity()
        if self.system == "vibrational":
            return vibrational_coupling(cav)
        if self.system == "torsional":
            return torsional_coupling(self.get("coupling", "l"), cav.L)
        lat = self.lattice()
        return rotational_coupling(lat.l, self.body(), lat.R, lat.w0, cav.L, cav.omega0)

    def beam_modes(self) -> list[LGModeSpec]:
        b = self.values["beam"]
        return [LGModeSpec(l, b.get("p", 0), b["w0"], b["wavelength"]) for l in b["l"]]

    def initial(self):
        """(coord, momentum, alpha) from [initial], or None where unspecified."""
        i = self.values.get("initial", {})
        alpha = None
        if "alpha_re" in i or "alpha_im" in i:
            alpha = complex(i.get("alpha_re", 0.0), i.get("alpha_im", 0.0))
        return i.get("coord"), i.get("momentum"), alpha


def _line_index(text: str) -> dict:
    """Map (section, raw key) and (section, None) to 1-based line numbers."""
    out = {}
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), n)
    return out


def _convert(raw: str, key: Key):
    raw = raw.strip()
    if key.kind == "float":
        return float(raw)
    if key.kind == "int":
        try:
            return int(raw)
        except ValueError:
            v = float(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if key.kind == "bool":
        states = configparser.ConfigParser.BOOLEAN_STATES
        if raw.lower() not in states:
            raise ValueError(f"expected a boolean, got {raw!r}")
        return states[raw.lower()]
    if key.kind in ("floats", "ints"):
        items = [s for s in re.split(r"[,\s]+", raw) if s]
        if not items:
            raise ValueError("empty list")
        conv = Key(key.kind[:-1])
        return tuple(_convert(s, conv) for s in items)
    if key.choices and raw not in key.choices:
        raise ValueError(f"must be one of {', '.join(key.choices)}, got {raw!r}")
    return raw


def _check(value, key: Key) -> str | None:
    vals = value if isinstance(value, tuple) else (value,)
    for v in vals:
        if isinstance(v, float) and not math.isfinite(v):
            return f"must be finite, got {v}"
        if key.check == "pos" and not v > 0:
            return f"must be > 0, got {v}"
        if key.check == "nonneg" and v < 0:
            return f"must be >= 0, got {v}"
        if key.check == "ge1" and v < 1:
            return f"must be >= 1, got {v}"
        if key.check == "frac" and not 0 <= v < 1:
            return f"must lie in [0, 1), got {v}"
    return None


def _resolve_key(section: str, raw_key: str):
    """Return (canonical key, Key spec, factor to rad/s) or None for unknown keys."""
    keys = SCHEMA[section]
    if raw_key in keys:
        return raw_key, keys[raw_key], 1.0
    for suffix, factor in (("_rads", 1.0), ("_hz", 2.0 * math.pi)):
        if raw_key.endswith(suffix):
            base = raw_key[: -len(suffix)]
            if base in keys and keys[base].freq:
                return base, keys[base], factor
    return None


def parse_scenario(text: str, overrides: dict | None = None) -> Scenario:
    """Parse and validate scenario text, collecting every problem before raising.

    ``overrides`` maps ``"section.key"`` to a raw string value and is applied
    before validation.
    """
    lines = _line_index(text)
    issues: list[Issue] = []
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ScenarioError([Issue(line, getattr(exc, "section", "?") or "?", None, str(exc).splitlines()[0])])
    override_keys = set()
    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            issues.append(Issue(0, "?", dotted, "override must look like section.key=value"))
            continue
        sec, k = dotted.split(".", 1)
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, k, str(raw))
        override_keys.add((sec, k))

    def loc(sec, k=None):
        return 0 if (sec, k) in override_keys else lines.get((sec, k), lines.get((sec, None)))

    values: dict[str, dict] = {}
    bad: set = set()  # keys that were given but rejected; not reported again as missing
    for sec in cp.sections():
        if sec not in SCHEMA:
            issues.append(Issue(loc(sec), sec, None, f"unknown section; expected one of {', '.join(SCHEMA)}"))
            continue
        block = values.setdefault(sec, {})
        for raw_key, raw in cp.items(sec):
            resolved = _resolve_key(sec, raw_key)
            if resolved is None:
                issues.append(Issue(loc(sec, raw_key), sec, raw_key, "unknown key"))
                continue
            name, spec, factor = resolved
            if name in block:
                issues.append(Issue(loc(sec, raw_key), sec, raw_key, f"duplicates {name}"))
                continue
            try:
                v = _convert(raw, spec)
            except ValueError as exc:
                issues.append(Issue(loc(sec, raw_key), sec, raw_key, str(exc)))
                bad.add((sec, name))
                continue
            if factor != 1.0:
                v = v * factor
            problem = _check(v, spec)
            if problem:
                issues.append(Issue(loc(sec, raw_key), sec, name, problem))
                bad.add((sec, name))
                continue
            block[name] = v

    system = values.get("system", {}).get("type")
    for sec, keys in REQUIRED_KEYS.items():
        if sec in values or sec == "system":
            for k in keys:
                if k not in values.get(sec, {}) and (sec, k) not in bad:
                    issues.append(Issue(loc(sec), sec, k, "required key missing"))
    if system in REQUIRED_SECTIONS:
        for sec in REQUIRED_SECTIONS[system]:
            if sec not in values:
                issues.append(Issue(None, sec, None, f"section required for a {system} scenario"))
        issues.extend(i for i in _cross_checks(system, values, loc) if (i.section, i.key) not in bad)
    if issues:
        raise ScenarioError(issues)
    scenario = Scenario(system, values)
    issues = _build_checks(scenario)
    if issues:
        raise ScenarioError(issues)
    return scenario


def _build_checks(s: Scenario) -> list[Issue]:
    """Construct the physical objects so their own invariants are enforced."""
    out = []
    builders = {"beams-demo": [("beam", s.beam_modes)]}.get(
        s.system, [("cavity", s.cavity), ("mechanical", s.mechanical)])
    if s.system == "rotational":
        builders += [("lattice", s.lattice), ("body", s.body), ("coupling", s.coupling_constant)]
    for sec, build in builders:
        try:
            build()
        except (ValueError, KeyError, TypeError) as exc:
            out.append(Issue(None, sec, None, str(exc)))
    return out


def _cross_checks(system: str, v: dict, loc) -> list[Issue]:
    out = []
    mech = v.get("mechanical", {})
    cav = v.get("cavity", {})
    if system != "beams-demo":
        if ("inertia" in mech) == ("mass" in mech):
            out.append(Issue(loc("mechanical"), "mechanical", "inertia", "give exactly one of inertia or mass"))
        if "drive" in cav and "power" in cav:
            out.append(Issue(loc("cavity", "power"), "cavity", "power", "give either drive or power, not both"))
    if system in ("vibrational", "torsional") and "mechanical" in v and "omega_m" not in mech:
        out.append(Issue(loc("mechanical"), "mechanical", "omega_m", "required key missing"))
    if system == "torsional" and "coupling" in v and not ({"g", "l"} & set(v["coupling"])):
        out.append(Issue(loc("coupling"), "coupling", "l", "give l (OAM exchanged) or an explicit g"))
    if system == "rotational":
        lat = v.get("lattice", {})
        if "lattice" in v and ("trap_l" in lat) == ("R" in lat):
            out.append(Issue(loc("lattice"), "lattice", "R", "give exactly one of R or trap_l"))
        if "g" not in v.get("coupling", {}) and "body" not in v:
            out.append(Issue(None, "body", None, "rotational coupling needs [coupling] g or a [body] block"))
        if mech.get("gamma_m", 1.0) == 0:
            out.append(Issue(loc("mechanical", "gamma_m"), "mechanical", "gamma_m",
                             "a damped rotor is required for a steady rotation rate"))
    band = v.get("analysis", {})
    if "band_low" in band and "band_high" in band and band["band_low"] >= band["band_high"]:
        out.append(Issue(loc("analysis", "band_high"), "analysis", "band_high", "must exceed band_low"))
    powers = band.get("sweep_powers")
    if powers and any(b <= a for a, b in zip(powers, powers[1:])):
        out.append(Issue(loc("analysis", "sweep_powers"), "analysis", "sweep_powers", "must be strictly ascending"))
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_scenario(s: Scenario) -> str:
    """Canonical text: schema order, rad/s frequencies, shortest round-trip floats."""
    parts = []
    for sec, keys in SCHEMA.items():
        if sec not in s.values:
            continue
        parts.append(f"[{sec}]")
        block = s.values[sec]
        for k in keys:
            if k in block:
                parts.append(f"{k} = {_fmt(block[k])}")
        parts.append("")
    return "\n".join(parts)
