"""Experiment configuration files.

Format: one ``key = value`` per line, ``# comments``, and ``[section]``
headers. Keys before the first header are run-level settings. Lists are
comma separated. Every key is checked against :data:`SCHEMA`; unknown keys,
bad values and violated invariants are reported with their line numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

EXPERIMENTS = (
    "geometry-verify", "stvr-scan", "fock-check", "states-check", "mu-scan", "gc-evolve", "full-suite",
)
DEFAULT_SEED = 2024


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` holds ``(line, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(f"line {ln}: {msg}" if ln else msg for ln, msg in self.problems))


def _int(s):
    return int(s)


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _floats(s):
    return [_float(x) for x in s.split(",") if x.strip()]


def _str(s):
    if not s:
        raise ValueError("must not be empty")
    return s


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return s
    return parse


def _cases(s):
    out = []
    for item in s.split(","):
        d, m = item.strip().lower().split("x")
        out.append((int(d), int(m)))
    return out


# section -> key -> (parser, default)
SCHEMA = {
    "": {
        "experiment": (_choice(*EXPERIMENTS), "full-suite"),
        "master_seed": (_int, DEFAULT_SEED),
        "output_dir": (_str, "grandcanon-out"),
    },
    "geometry": {
        "radius": (_float, 1.0),
        "deltas": (_floats, [0.01, 0.05, 0.1]),
        "samples": (_int, 5_000_000),
        "box_side": (_float, 2.0),
        "polytope_facets": (_int, 12),
        "bound_fraction": (_float, 0.05),
        "bound_points": (_int, 5),
        "bound_samples": (_int, 1_000_000),
        "steiner_eps": (_float, 0.05),
    },
    "stvr": {
        "radius": (_float, 10.0),
        "clearance": (_float, 1.0),
        "density": (_float, 1.0),
        "delta_S": (_float, 1.0),
        "v0": (_float, 1.0),
        "w0": (_float, 1.0),
        "deltas": (_floats, [0.1, 0.2, 0.4, 0.8]),
        "trials": (_int, 32),
        "min_exponent": (_float, 1.8),
    },
    "fock": {
        "cases": (_cases, [(2, 4), (3, 3)]),
    },
    "states": {
        "dim_S": (_int, 12),
        "dim_R": (_int, 8),
        "instances": (_int, 100),
        "rotations": (_int, 20),
    },
    "effective": {
        "a": (_float, 0.75),
        "b": (_float, 2.0**-12),
        "N_total": (_int, 10_000),
        "eps_min": (_float, 1e-3),
        "eps_max": (_float, 1e-1),
        "points": (_int, 9),
    },
    "dynamics": {
        "single_particle_dim": (_int, 2),
        "max_sector": (_int, 3),
        "mu": (_float, 0.3),
        "beta": (_float, 1.0),
        "dt": (_float, 0.01),
        "t_final": (_float, 10.0),
        "rk4_dt": (_float, 1e-3),
        "instances": (_int, 10),
        "coupling": (_float, 0.1),
    },
}


@dataclass
class ExperimentConfig:
    experiment: str = "full-suite"
    master_seed: int = DEFAULT_SEED
    output_dir: str = "grandcanon-out"
    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.sections[section]


def defaults():
    cfg = ExperimentConfig()
    cfg.sections = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items() if s}
    return cfg


def parse(text):
    """Parse config text; raises :class:`ConfigError` listing every problem."""
    cfg = defaults()
    problems = []
    section = ""
    seen = set()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                problems.append((ln, f"malformed section header {line!r}"))
                continue
            section = line[1:-1].strip()
            if section not in SCHEMA or not section:
                problems.append((ln, f"unknown section [{section}]"))
            continue
        if "=" not in line:
            problems.append((ln, f"expected 'key = value', got {line!r}"))
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        if section not in SCHEMA:
            continue
        if key not in SCHEMA[section]:
            where = f"[{section}]" if section else "top level"
            problems.append((ln, f"unknown key {key!r} in {where}"))
            continue
        if (section, key) in seen:
            problems.append((ln, f"duplicate key {key!r}"))
            continue
        seen.add((section, key))
        parser = SCHEMA[section][key][0]
        try:
            parsed = parser(value)
        except (ValueError, TypeError) as exc:
            problems.append((ln, f"{key}: invalid value {value!r} ({exc})"))
            continue
        cfg.lines[(section, key)] = ln
        if section:
            cfg.sections[section][key] = parsed
        else:
            setattr(cfg, key, parsed)
    if problems:
        raise ConfigError(problems)
    validate(cfg)
    return cfg


def load(path):
    with open(path) as fh:
        return parse(fh.read())


def validate(cfg):
    """Check cross-field invariants before anything runs."""
    problems = []

    def bad(section, key, msg):
        problems.append((cfg.lines.get((section, key), 0), msg))

    g = cfg["geometry"]
    if g["radius"] <= 0:
        bad("geometry", "radius", "invariant violated: ball radius must be positive")
    for d in g["deltas"]:
        if not 0 < d < g["radius"]:
            bad("geometry", "deltas", f"invariant violated: corridor half-width {d} must lie in (0, inradius={g['radius']})")
    if g["box_side"] <= 0:
        bad("geometry", "box_side", "invariant violated: box side must be positive")
    if not 0 < g["bound_fraction"] < 1:
        bad("geometry", "bound_fraction", "invariant violated: bound_fraction must lie in (0, 1)")
    for key in ("samples", "bound_samples", "bound_points"):
        if g[key] < 1:
            bad("geometry", key, f"{key} must be >= 1")
    if g["polytope_facets"] < 4:
        bad("geometry", "polytope_facets", "a bounded 3-d polytope needs at least 4 facets")
    if g["steiner_eps"] <= 0:
        bad("geometry", "steiner_eps", "steiner_eps must be positive")

    s = cfg["stvr"]
    deltas = s["deltas"]
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        bad("stvr", "deltas", "invariant violated: deltas must be strictly ascending")
    for d in deltas:
        if not 0 < d < s["radius"]:
            bad("stvr", "deltas", f"invariant violated: corridor half-width {d} must lie in (0, inradius={s['radius']})")
        elif d >= s["clearance"]:
            bad("stvr", "deltas", f"invariant violated: delta {d} must stay below the box clearance {s['clearance']}")
    for key in ("radius", "clearance", "delta_S", "w0"):
        if s[key] <= 0:
            bad("stvr", key, f"{key} must be positive")
    if s["density"] <= 0:
        bad("stvr", "density", "density must be positive")
    if s["trials"] < 2:
        bad("stvr", "trials", "need at least 2 trials for standard errors")

    for d, m in cfg["fock"]["cases"]:
        if d < 1 or m < 0:
            bad("fock", "cases", f"invalid case {d}x{m}")

    st = cfg["states"]
    for key in ("dim_S", "dim_R", "instances", "rotations"):
        if st[key] < 1:
            bad("states", key, f"{key} must be >= 1")

    e = cfg["effective"]
    if not 0 < e["eps_min"] < e["eps_max"] < 1:
        bad("effective", "eps_max", "invariant violated: need 0 < eps_min < eps_max < 1")
    if e["points"] < 3:
        bad("effective", "points", "need at least 3 scan points")
    if e["N_total"] < 2:
        bad("effective", "N_total", "N_total must be >= 2")
    elif e["eps_max"] * e["N_total"] >= e["N_total"] - 1:
        bad("effective", "eps_max", "invariant violated: system must stay smaller than the total")

    dy = cfg["dynamics"]
    if dy["single_particle_dim"] < 1 or dy["max_sector"] < 0:
        bad("dynamics", "max_sector", "invalid Fock truncation")
    if dy["beta"] < 0:
        bad("dynamics", "beta", "beta must be nonnegative")
    for key in ("dt", "t_final", "rk4_dt"):
        if dy[key] <= 0:
            bad("dynamics", key, f"{key} must be positive")
    if dy["dt"] > dy["t_final"] or dy["rk4_dt"] > dy["t_final"]:
        bad("dynamics", "dt", "invariant violated: dt must not exceed t_final")
    if dy["instances"] < 1:
        bad("dynamics", "instances", "instances must be >= 1")

    if problems:
        raise ConfigError(problems)
    return cfg
