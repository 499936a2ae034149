"""Experiment configuration: a YAML file validated against a fixed schema.

Every section and key is optional; an empty file gives the desk scenario
(M = N1 = N2 = 3, K = 16, R_s = 5 bps/Hz, gamma = 1, sigma2 = -90 dBm,
the default link geometry) and the ``SweepK`` scenario with the AO policy
on seed 0. Unknown keys are rejected with the line they appear on.

Units: distances in meters, angles in multiples of pi, noise power either
``sigma2_dbm`` or ``sigma2_w``, rates in bps/Hz, SNR linear.

Example::

    scenario: SweepK
    policies: [AO, LowComplexity, RandomBeam]
    seeds: {start: 0, count: 20}
    sweep: {K: [4, 8, 16, 32]}
    system: {M: 3, N1: 3, N2: 3, R_s: 5.0, gamma: 1.0, sigma2_dbm: -90}
    geometry:
      kappa: 1.0
      links:
        h1: {distance: 1000, aoa: 0.8, aod: 0.6}
    solver: {tol: 1.0e-7}
"""

import math
from dataclasses import dataclass, field

import yaml

from ..ao import AOSettings
from ..channels import LINKS, Link, LinkGeometry
from ..detmax import SolveSettings
from ..sdr import RandomizationSettings
from ..types import SystemConfig

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "parse_config_text",
           "SCENARIOS", "POLICIES", "dbm_to_watts"]

SCENARIOS = ("SweepK", "SweepRate", "Convergence", "RankTable", "MPCheck")
POLICIES = ("AO", "LowComplexity", "RandomBeam", "NoRIS", "RandomInit", "GridSearchAO", "PureAssist")

_SCHEMA = {
    "scenario": None,
    "policies": None,
    "seeds": None,
    "sweep": {"K": None, "R_s": None},
    "system": {k: None for k in ("M", "N1", "N2", "K", "L", "alpha", "sigma2_dbm",
                                  "sigma2_w", "R_s", "gamma")},
    "geometry": {
        "beta_db": None, "gamma_e": None, "spacing_ratio": None, "random_angles": None,
        "kappa": None,
        "links": {name: {"distance": None, "kappa": None, "aoa": None, "aod": None}
                  for name in LINKS},
    },
    "solver": {k: None for k in ("barrier_mu", "tol", "max_newton", "linesearch_beta")},
    "ao": {k: None for k in ("max_outer", "power_rel_tol", "grid_resolution",
                             "infeasible_retries")},
    "randomization": {"num_candidates": None},
    "blocked_direct": None,
    "colocated": None,
    "limits": {"max_K": None, "max_antennas": None},
    "mp": {k: None for k in ("P", "K", "trials", "quad_points")},
    "output": None,
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class ExperimentConfig:
    scenario: str = "SweepK"
    policies: tuple = ("AO",)
    seeds: tuple = (0,)
    sweep_values: tuple = ()
    system: SystemConfig = field(default_factory=SystemConfig)
    geometry: LinkGeometry = field(default_factory=LinkGeometry)
    solver: SolveSettings = field(default_factory=SolveSettings)
    ao: AOSettings = field(default_factory=AOSettings)
    randomization: RandomizationSettings = field(default_factory=RandomizationSettings)
    blocked_direct: bool = False
    colocated: bool = False
    max_K: int = 64
    max_antennas: int = 8
    mp_P: tuple = (1e-3,)
    mp_K: tuple = (0, 64, 256)
    mp_trials: int = 200
    mp_quad_points: int = 200
    output: str = "results"

    @property
    def sweep_name(self):
        return {"SweepRate": "R_s"}.get(self.scenario, "K")

    def points(self):
        """System configurations of the sweep, in file order."""
        if not self.sweep_values:
            return [self.system]
        return [self.system.replace(**{self.sweep_name: v}) for v in self.sweep_values]


def _line_map(text):
    """Map each key path to its 1-based line in the source."""
    lines = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for knode, vnode in node.value:
                key = knode.value
                lines[path + (key,)] = knode.start_mark.line + 1
                walk(vnode, path + (key,))

    root = yaml.compose(text)
    if root is not None:
        walk(root, ())
    return lines


def _check_keys(data, schema, path, lines):
    if not isinstance(data, dict):
        where = ".".join(path) or "top level"
        line = lines.get(path)
        raise ConfigError(f"{'line %d: ' % line if line else ''}{where} must be a mapping")
    for key, value in data.items():
        if key not in schema:
            line = lines.get(path + (key,))
            section = ".".join(path) or "top level"
            allowed = ", ".join(sorted(schema))
            raise ConfigError(
                f"{'line %d: ' % line if line else ''}unknown key {key!r} in {section} "
                f"(allowed: {allowed})"
            )
        if schema[key] is not None and value is not None:
            _check_keys(value, schema[key], path + (key,), lines)


def _seeds(value):
    if value is None:
        return (0,)
    if isinstance(value, int):
        return (value,)
    if isinstance(value, dict):
        extra = set(value) - {"start", "count"}
        if extra:
            raise ConfigError(f"seeds accepts only start/count, got {sorted(extra)}")
        start, count = int(value.get("start", 0)), int(value.get("count", 1))
        return tuple(range(start, start + count))
    if isinstance(value, list):
        return tuple(int(s) for s in value)
    raise ConfigError("seeds must be an integer, a list, or {start, count}")


def _angle(v):
    return math.pi * float(v)


def _kappa(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", ".inf"):
        return math.inf
    return float(v)


def _build(data, lines):
    cfg = ExperimentConfig()
    scenario = data.get("scenario", "SweepK")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    cfg.scenario = scenario

    policies = data.get("policies", ["AO"])
    if isinstance(policies, str):
        policies = [p.strip() for p in policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICIES]
    if bad:
        raise ConfigError(f"unknown policies {bad}; choose from {POLICIES}")
    if not policies:
        raise ConfigError("policies must be nonempty")
    cfg.policies = tuple(policies)

    cfg.seeds = _seeds(data.get("seeds"))
    if not cfg.seeds:
        raise ConfigError("seeds must be nonempty")

    sysd = dict(data.get("system") or {})
    if "sigma2_dbm" in sysd and "sigma2_w" in sysd:
        raise ConfigError("give either sigma2_dbm or sigma2_w, not both")
    if "sigma2_dbm" in sysd:
        sysd["sigma2"] = dbm_to_watts(float(sysd.pop("sigma2_dbm")))
    elif "sigma2_w" in sysd:
        sysd["sigma2"] = float(sysd.pop("sigma2_w"))
    cfg.system = SystemConfig(**sysd)

    sweep = data.get("sweep") or {}
    if len(sweep) > 1:
        raise ConfigError("sweep takes a single parameter")
    if sweep:
        (name, values), = sweep.items()
        expected = {"SweepK": "K", "SweepRate": "R_s"}.get(scenario)
        if name != expected:
            raise ConfigError(f"scenario {scenario} sweeps {expected!r}, not {name!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep values must be a nonempty list")
        cfg.sweep_values = tuple(values)

    geo = dict(data.get("geometry") or {})
    links = dict(LinkGeometry().links)
    if "kappa" in geo:
        k = _kappa(geo.pop("kappa"))
        links = {n: Link(l.distance, k, l.aoa, l.aod) for n, l in links.items()}
    for name, spec in (geo.pop("links", None) or {}).items():
        base = links[name]
        spec = spec or {}
        links[name] = Link(
            float(spec.get("distance", base.distance)),
            _kappa(spec["kappa"]) if "kappa" in spec else base.kappa,
            _angle(spec["aoa"]) if "aoa" in spec else base.aoa,
            _angle(spec["aod"]) if "aod" in spec else base.aod,
        )
    cfg.geometry = LinkGeometry(links=links, **geo)

    cfg.solver = SolveSettings(**(data.get("solver") or {}))
    cfg.ao = AOSettings(**(data.get("ao") or {}), solver=cfg.solver)
    cfg.randomization = RandomizationSettings(**(data.get("randomization") or {}))
    cfg.blocked_direct = bool(data.get("blocked_direct", False))
    cfg.colocated = bool(data.get("colocated", False))
    limits = data.get("limits") or {}
    cfg.max_K = int(limits.get("max_K", 64))
    cfg.max_antennas = int(limits.get("max_antennas", 8))
    mp = data.get("mp") or {}
    as_tuple = lambda v: tuple(v) if isinstance(v, (list, tuple)) else (v,)
    cfg.mp_P = tuple(float(p) for p in as_tuple(mp.get("P", cfg.mp_P)))
    cfg.mp_K = tuple(int(k) for k in as_tuple(mp.get("K", cfg.mp_K)))
    cfg.mp_trials = int(mp.get("trials", cfg.mp_trials))
    cfg.mp_quad_points = int(mp.get("quad_points", cfg.mp_quad_points))
    cfg.output = str(data.get("output", cfg.output))

    for point in cfg.points():
        if point.K > cfg.max_K:
            raise ConfigError(f"K = {point.K} exceeds the configured ceiling max_K = {cfg.max_K}")
        if max(point.M, point.N1, point.N2) > cfg.max_antennas:
            raise ConfigError(f"antenna counts exceed max_antennas = {cfg.max_antennas}")
    if cfg.colocated and cfg.system.N1 != cfg.system.N2:
        raise ConfigError("colocated receivers need N1 == N2")
    return cfg


def parse_config_text(text):
    """Parse and validate configuration text; raises :class:`ConfigError`."""
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    if data is None:
        data = {}
    _check_keys(data, _SCHEMA, (), lines)
    try:
        return _build(data, lines)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path):
    """Read and validate an experiment configuration file."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text)
