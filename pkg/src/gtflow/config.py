"""Experiment configuration: JSON schema, validation, and builders.

A config is one JSON object with a mandatory top-level ``seed`` and optional
sections, every field defaulted. Unknown sections or keys are hard errors
(anti-typo), and validation reports every violation at once rather than the
first. The normalized form (defaults filled in) round-trips: parse, echo,
parse again yields the identical structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .cost import QuadraticCost, SvmHingeCost
from .engine import SolverConfig
from .graph import SwitchingSchedule, SwitchMode, make_khop_ring
from .nonlinear import (LinkNonlinearity, identity, log_quantizer, saturation,
                        uniform_quantizer)
from .svmlab import (LabeledDataset, Partition, dataset_from_csv, feature_map,
                     generate_ellipse_data, partition)

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_preset",
           "preset_names"]


class ConfigError(ValueError):
    """Carries every validation violation found in one pass."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


_BOOL = ("bool", lambda v: isinstance(v, bool))
_INT = ("integer", lambda v: isinstance(v, int) and not isinstance(v, bool))
_NUM = ("number", lambda v: isinstance(v, (int, float)) and not isinstance(v, bool))
_STR = ("string", lambda v: isinstance(v, str))
_LIST = ("list of numbers", lambda v: isinstance(v, list)
         and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v))

_NONLIN_KEYS = {"kind": _STR, "rho": _NUM, "limit": _NUM}

SCHEMA = {
    "data": {
        "kind": (_STR, "ellipse"),
        "n_points": (_INT, 200),
        "radius": (_NUM, 0.8),
        "margin_gap": (_NUM, 0.3),
        "seed": (_INT, None),
        "path": (_STR, None),
    },
    "partition": {
        "n_agents": (_INT, 5),
        "mode": (_STR, "stratified"),
        "seed": (_INT, None),
    },
    "network": {
        "khop": (_INT, 2),
        "total_weight": (_NUM, 0.8),
        "switch_period": (_NUM, 0.001),
        "switch_mode": (_STR, "permute"),
        "directed": (_BOOL, False),
        "seed": (_INT, None),
    },
    "cost": {
        "kind": (_STR, "svm"),
        "C": (_NUM, 1.0),
        "mu": (_NUM, 2.0),
        "eps_nu": (_NUM, 1e-6),
        "regularizer_mode": (_STR, "matched"),
        "oracle_tol": (_NUM, 1e-6),
        "m": (_INT, 2),
        "curvature_scale": (_NUM, 1.0),
    },
    "solver": {
        "alpha": (_NUM, 6.0),
        "eta": (_NUM, 0.001),
        "t_end": (_NUM, 80.0),
        "method": (_STR, "rk4"),
        "y_init": (_STR, "gradient"),
        "sample_stride": (_INT, 100),
    },
    "outputs": {
        "plots": (_BOOL, True),
    },
    "sweep": {
        "mode": (_STR, "spectral"),
        "axes": (("object", lambda v: isinstance(v, dict)), {}),
        "t_end": (_NUM, 60.0),
    },
}

_ENUMS = {
    ("data", "kind"): ("ellipse", "csv"),
    ("partition", "mode"): ("stratified", "contiguous"),
    ("network", "switch_mode"): ("fixed", "permute"),
    ("cost", "kind"): ("svm", "quadratic"),
    ("cost", "regularizer_mode"): ("matched", "literal"),
    ("solver", "method"): ("euler", "rk4"),
    ("solver", "y_init"): ("gradient", "zero"),
    ("sweep", "mode"): ("spectral", "dynamics"),
}

_SWEEP_AXES = ("alpha", "rho", "khop", "eta")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully-defaulted configuration."""

    seed: int
    sections: dict
    description: str = ""

    def __getitem__(self, name: str) -> dict:
        return self.sections[name]

    def normalized(self) -> dict:
        out: dict = {"seed": self.seed}
        if self.description:
            out["description"] = self.description
        for name, body in self.sections.items():
            out[name] = dict(body)
        return out

    def to_json(self) -> str:
        return json.dumps(self.normalized(), indent=2, sort_keys=True) + "\n"

    # derived seeds: stable offsets keep sections independently reproducible
    def section_seed(self, section: str, offset: int) -> int:
        explicit = self.sections.get(section, {}).get("seed")
        return int(explicit) if explicit is not None else int(self.seed) + offset


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON config, applying defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError([f"not valid JSON: {err}"]) from err
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])

    problems: list[str] = []
    if "seed" not in raw:
        problems.append("top-level 'seed' is mandatory")
    elif not _INT[1](raw["seed"]):
        problems.append("'seed' must be an integer")
    description = raw.get("description", "")
    if not isinstance(description, str):
        problems.append("'description' must be a string")
        description = ""

    nonlin_raw = raw.get("nonlinearity", {})
    sections: dict = {}
    for name, keys in SCHEMA.items():
        body = raw.get(name, {})
        if not isinstance(body, dict):
            problems.append(f"section '{name}' must be an object")
            body = {}
        filled = {}
        for key, ((type_name, ok), default) in keys.items():
            if key in body:
                value = body[key]
                if value is not None and not ok(value):
                    problems.append(f"{name}.{key} must be a {type_name}")
                    value = default
            else:
                value = default
            filled[key] = value
        for key in body:
            if key not in keys:
                problems.append(f"unknown key {name}.{key}")
        sections[name] = filled

    sections["nonlinearity"] = _validate_nonlinearity(nonlin_raw, problems)

    for name in raw:
        if name not in SCHEMA and name not in ("seed", "description", "nonlinearity"):
            problems.append(f"unknown section '{name}'")

    for (sec, key), allowed in _ENUMS.items():
        val = sections[sec][key]
        if val not in allowed:
            problems.append(f"{sec}.{key} must be one of {allowed}, got {val!r}")

    _validate_values(sections, problems)

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(int(raw["seed"]), sections, description)


def _validate_nonlinearity(raw, problems) -> dict:
    if not isinstance(raw, dict):
        problems.append("section 'nonlinearity' must be an object")
        raw = {}
    # flat spec {kind, ...} applies to both lines; {x: {...}, y: {...}} splits
    if "x" in raw or "y" in raw:
        parts = {"x": raw.get("x", {"kind": "identity"}),
                 "y": raw.get("y", {"kind": "identity"})}
        for key in raw:
            if key not in ("x", "y"):
                problems.append(f"unknown key nonlinearity.{key}")
    else:
        parts = {"x": raw or {"kind": "identity"},
                 "y": raw or {"kind": "identity"}}
    out = {}
    for line, spec in parts.items():
        if not isinstance(spec, dict):
            problems.append(f"nonlinearity.{line} must be an object")
            spec = {"kind": "identity"}
        filled = {"kind": spec.get("kind", "identity")}
        for key, (type_name, ok) in _NONLIN_KEYS.items():
            if key == "kind":
                continue
            if key in spec:
                if not ok(spec[key]):
                    problems.append(f"nonlinearity.{line}.{key} must be a {type_name}")
                else:
                    filled[key] = spec[key]
        for key in spec:
            if key not in _NONLIN_KEYS:
                problems.append(f"unknown key nonlinearity.{line}.{key}")
        if filled["kind"] not in ("identity", "log_quantizer", "uniform_quantizer", "saturation"):
            problems.append(f"nonlinearity.{line}.kind must be one of "
                            "('identity', 'log_quantizer', 'uniform_quantizer', "
                            f"'saturation'), got {filled['kind']!r}")
        out[line] = filled
    return out


def _validate_values(sections, problems):
    data, net, cost, solver = (sections[k] for k in ("data", "network", "cost", "solver"))
    if data["kind"] == "ellipse":
        if not (0 < data["radius"] < 1):
            problems.append("data.radius must lie in (0, 1)")
        if data["margin_gap"] < 0:
            problems.append("data.margin_gap must be non-negative")
        if data["n_points"] < 2:
            problems.append("data.n_points must be at least 2")
    if data["kind"] == "csv" and not data["path"]:
        problems.append("data.path is required when data.kind is 'csv'")
    if sections["partition"]["n_agents"] < 1:
        problems.append("partition.n_agents must be positive")
    if not (0 < net["total_weight"] < 1):
        problems.append("network.total_weight must lie in (0, 1)")
    if net["khop"] < 1:
        problems.append("network.khop must be at least 1")
    if net["switch_period"] <= 0:
        problems.append("network.switch_period must be positive")
    if solver["alpha"] <= 0:
        problems.append("solver.alpha must be positive")
    if solver["eta"] <= 0:
        problems.append("solver.eta must be positive")
    if solver["t_end"] <= 0:
        problems.append("solver.t_end must be positive")
    if solver["sample_stride"] < 1:
        problems.append("solver.sample_stride must be at least 1")
    if cost["C"] <= 0 or cost["mu"] <= 0 or cost["eps_nu"] < 0:
        problems.append("cost requires C > 0, mu > 0, eps_nu >= 0")
    for axis, values in sections["sweep"]["axes"].items():
        if axis not in _SWEEP_AXES:
            problems.append(f"sweep axis {axis!r} not in {_SWEEP_AXES}")
        elif not _LIST[1](values) or not values:
            problems.append(f"sweep.axes.{axis} must be a non-empty list of numbers")


# ------------------------------------------------------------------ builders

def build_nonlinearity(spec: dict) -> LinkNonlinearity:
    kind = spec["kind"]
    if kind == "identity":
        return identity()
    if kind == "log_quantizer":
        return log_quantizer(float(spec.get("rho", 1.0)))
    if kind == "uniform_quantizer":
        return uniform_quantizer(float(spec.get("rho", 1.0)))
    return saturation(float(spec.get("limit", 1.0)))


def build_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    data = cfg["data"]
    if data["kind"] == "csv":
        with open(data["path"], encoding="utf-8") as fh:
            return dataset_from_csv(fh.read())
    return generate_ellipse_data(
        data["n_points"],
        cfg.section_seed("data", 1),
        radius=data["radius"],
        margin_gap=data["margin_gap"],
    )


def build_partition(cfg: ExperimentConfig, data: LabeledDataset) -> Partition:
    part = cfg["partition"]
    return partition(data, part["n_agents"], part["mode"], cfg.section_seed("partition", 2))


def build_schedule(cfg: ExperimentConfig, khop: int | None = None) -> SwitchingSchedule:
    net = cfg["network"]
    base = make_khop_ring(cfg["partition"]["n_agents"], khop or net["khop"],
                          net["total_weight"], directed=net["directed"])
    return SwitchingSchedule(base, net["switch_period"],
                             rng_seed=cfg.section_seed("network", 3),
                             mode=SwitchMode(net["switch_mode"]))


def build_solver(cfg: ExperimentConfig, schedule: SwitchingSchedule,
                 alpha: float | None = None, eta: float | None = None,
                 rho: float | None = None,
                 t_end: float | None = None) -> SolverConfig:
    solver = cfg["solver"]
    nl_cfg = cfg.sections["nonlinearity"]
    g_x, g_y = build_nonlinearity(nl_cfg["x"]), build_nonlinearity(nl_cfg["y"])
    if rho is not None:
        g_x = _with_rho(nl_cfg["x"], rho)
        g_y = _with_rho(nl_cfg["y"], rho)
    return SolverConfig(
        alpha=alpha if alpha is not None else solver["alpha"],
        eta=eta if eta is not None else solver["eta"],
        t_end=t_end if t_end is not None else solver["t_end"],
        schedule_x=schedule,
        g_x=g_x,
        g_y=g_y,
        method=solver["method"],
        y_init=solver["y_init"],
        sample_stride=solver["sample_stride"],
    )


def _with_rho(spec: dict, rho: float) -> LinkNonlinearity:
    if spec["kind"] in ("log_quantizer", "uniform_quantizer"):
        return build_nonlinearity({**spec, "rho": rho})
    return build_nonlinearity(spec)


def build_quadratic_costs(cfg: ExperimentConfig) -> list[QuadraticCost]:
    n = cfg["partition"]["n_agents"]
    m = cfg["cost"]["m"]
    scale = cfg["cost"]["curvature_scale"]
    rng = np.random.default_rng(cfg.section_seed("cost", 4))
    costs = []
    for _ in range(n):
        diag = rng.uniform(0.3, 1.0, size=m) * scale
        costs.append(QuadraticCost(np.diag(diag), rng.normal(size=m)))
    return costs


def build_svm_costs(cfg: ExperimentConfig, data: LabeledDataset,
                    part: Partition) -> list[SvmHingeCost]:
    cost = cfg["cost"]
    feats = feature_map(data.points)
    return [
        SvmHingeCost(feats[list(idx)], data.labels[list(idx)],
                     C=cost["C"], mu=cost["mu"], eps_nu=cost["eps_nu"])
        for idx in part.agents
    ]


# ------------------------------------------------------------------- presets

def preset_names() -> list[str]:
    root = resources.files("gtflow").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> str:
    path = resources.files("gtflow").joinpath("presets", f"{name}.json")
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError([f"unknown preset {name!r}; available: {preset_names()}"])
