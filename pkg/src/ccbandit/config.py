"""Experiment configuration files: parsing, validation and the bundled presets.

A config is one YAML (or JSON) mapping::

    name: my-experiment
    instance:
      context_probs: [0.4, 0.6]
      rewards: [["4/15", "8/15", "4/5"], ["2/15", "4/15", "2/5"]]   # or "jk/(JK)" with num_actions
      costs: unit                                                  # or a J x K matrix
      reward_family: bernoulli                                     # or deterministic
    rhos: [0.39, 0.4, 0.41]
    horizons: [1000, 2000]
    checkpoints: {start: 250, factor: 2}                           # optional; or an explicit list
    policies:
      - ALP
      - {name: UCB-EALP2, label: UCB-EALP2-known, options: {t1: known, delta: 0.1}}
    runs: 500
    seed: 7
    benchmark: lp                                                  # or dp (tiny unit-cost instances)
    reward_measure: realized                                       # or expected
    bounds: false
    output: {path: results.csv, format: csv}

Numbers may be written as rational strings such as ``"4/15"``.  Errors are
raised as :class:`ConfigError` carrying the field path and source line.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ._validation import as_fraction
from .core import ProblemInstance
from .dp import MAX_CELLS
from .policies import REGISTRY, Policy, PolicyConfigError, make_policy
from .policies.base import EpisodeSpec
from .policies.estimators import HorizonWarning

__all__ = [
    "ConfigError",
    "PolicySpec",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "list_presets",
    "preset_path",
]

_TOP_KEYS = {
    "name", "description", "instance", "rhos", "horizons", "checkpoints", "policies", "runs", "seed",
    "benchmark", "reward_measure", "bounds", "output",
}
_INSTANCE_KEYS = {"context_probs", "rewards", "costs", "reward_family", "num_actions"}


class ConfigError(ValueError):
    """Invalid configuration, located by field path and (when known) source line."""

    def __init__(self, message: str, path: tuple = (), line: int | None = None, source: str | None = None):
        self.message = message
        self.path = path
        self.line = line
        self.source = source
        super().__init__(str(self))

    def __str__(self) -> str:
        where = ".".join(str(p) for p in self.path) or "<root>"
        loc = f"{self.source or '<config>'}"
        if self.line is not None:
            loc += f":{self.line}"
        return f"{loc}: {where}: {self.message}"


@dataclass(frozen=True)
class PolicySpec:
    name: str
    label: str
    options: dict = field(default_factory=dict)

    def build(self) -> Policy:
        return make_policy(self.name, **self.options)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    instance: ProblemInstance
    rhos: tuple[Fraction, ...]
    horizons: tuple[int, ...]
    policies: tuple[PolicySpec, ...]
    runs: int
    seed: int
    checkpoints: tuple[int, ...] | dict | None = None
    benchmark: str = "lp"
    reward_measure: str = "realized"
    bounds: bool = False
    output_path: str | None = None
    output_format: str = "csv"
    description: str = ""

    def checkpoints_for(self, T: int) -> list[int]:
        """Checkpoint horizons below T (T itself is always measured)."""
        cp = self.checkpoints
        if cp is None:
            return []
        if isinstance(cp, dict):
            out, x = [], cp["start"]
            while x < T:
                out.append(x)
                x *= cp["factor"]
            return out
        return [c for c in cp if c < T]

    def budget(self, rho: Fraction, T: int) -> Fraction:
        return rho * T


# -- YAML with line numbers ---------------------------------------------------


def _construct(node: yaml.Node, path: tuple, lines: dict, loader: yaml.SafeLoader) -> Any:
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = loader.construct_object(k, deep=True)
            lines[path + (key,)] = k.start_mark.line + 1
            out[key] = _construct(v, path + (key,), lines, loader)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, path + (i,), lines, loader) for i, v in enumerate(node.value)]
    return loader.construct_object(node, deep=True)


def _load_text(text: str, source: str | None) -> tuple[Any, dict]:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"not valid YAML/JSON: {getattr(exc, 'problem', exc)}", (), mark.line + 1 if mark else None, source) from None
    if node is None:
        raise ConfigError("empty config", (), None, source)
    lines: dict = {}
    return _construct(node, (), lines, yaml.SafeLoader("")), lines


# -- validation -----------------------------------------------------------------


class _Ctx:
    def __init__(self, lines: dict, source: str | None):
        self.lines = lines
        self.source = source

    def err(self, msg: str, *path) -> ConfigError:
        line = None
        for i in range(len(path), -1, -1):
            if path[:i] in self.lines:
                line = self.lines[path[:i]]
                break
        return ConfigError(msg, tuple(path), line, self.source)


def _int(ctx: _Ctx, v, path: tuple, minimum: int = 0) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ctx.err(f"expected an integer, got {v!r}", *path)
    if v < minimum:
        raise ctx.err(f"must be >= {minimum}, got {v}", *path)
    return v


def _frac(ctx: _Ctx, v, path: tuple) -> Fraction:
    if isinstance(v, bool):
        raise ctx.err(f"expected a number, got {v!r}", *path)
    try:
        return as_fraction(v)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ctx.err(f"expected a number or rational string like '4/15', got {v!r}", *path) from None


def _list(ctx: _Ctx, v, path: tuple, nonempty: bool = True) -> list:
    if not isinstance(v, list):
        raise ctx.err(f"expected a list, got {type(v).__name__}", *path)
    if nonempty and not v:
        raise ctx.err("must not be empty", *path)
    return v


def _matrix(ctx: _Ctx, v, path: tuple) -> list[list[Fraction]]:
    rows = _list(ctx, v, path)
    return [[_frac(ctx, x, path + (i, k)) for k, x in enumerate(_list(ctx, row, path + (i,)))] for i, row in enumerate(rows)]


def _instance(ctx: _Ctx, raw) -> ProblemInstance:
    p = ("instance",)
    if not isinstance(raw, dict):
        raise ctx.err("expected a mapping", *p)
    for k in raw:
        if k not in _INSTANCE_KEYS:
            raise ctx.err(f"unknown key; allowed: {', '.join(sorted(_INSTANCE_KEYS))}", *p, k)
    for k in ("context_probs", "rewards"):
        if k not in raw:
            raise ctx.err("missing required field", *p, k)
    pi = [_frac(ctx, x, p + ("context_probs", i)) for i, x in enumerate(_list(ctx, raw["context_probs"], p + ("context_probs",)))]
    rewards = raw["rewards"]
    if not isinstance(rewards, str):
        rewards = _matrix(ctx, rewards, p + ("rewards",))
    costs = raw.get("costs", "unit")
    if not isinstance(costs, str):
        costs = _matrix(ctx, costs, p + ("costs",))
    num_actions = raw.get("num_actions")
    if num_actions is not None:
        num_actions = _int(ctx, num_actions, p + ("num_actions",), 1)
    family = raw.get("reward_family", "bernoulli")
    if family not in ("bernoulli", "deterministic"):
        raise ctx.err(f"must be 'bernoulli' or 'deterministic', got {family!r}", *p, "reward_family")
    try:
        return ProblemInstance.create(pi, rewards, costs, family, num_actions)
    except ValueError as exc:
        field_ = "rewards" if "reward" in str(exc) or "generator" in str(exc) else "costs" if "cost" in str(exc) else "context_probs"
        raise ctx.err(str(exc), *p, field_) from None


def _policies(ctx: _Ctx, raw) -> tuple[PolicySpec, ...]:
    items = _list(ctx, raw, ("policies",))
    out = []
    labels = set()
    for i, item in enumerate(items):
        path = ("policies", i)
        if isinstance(item, str):
            name, label, options = item, item, {}
        elif isinstance(item, dict):
            extra = set(item) - {"name", "label", "options"}
            if extra:
                raise ctx.err(f"unknown key(s) {sorted(extra)}; allowed: name, label, options", *path)
            if "name" not in item:
                raise ctx.err("missing policy name", *path)
            name = item["name"]
            label = item.get("label", name)
            options = item.get("options") or {}
            if not isinstance(options, dict):
                raise ctx.err("options must be a mapping", *path, "options")
        else:
            raise ctx.err("expected a policy name or a mapping with 'name'", *path)
        if not isinstance(name, str) or name.lower() not in {k.lower() for k in REGISTRY}:
            raise ctx.err(f"unknown policy {name!r}; known: {', '.join(REGISTRY)}", *path)
        if label in labels:
            raise ctx.err(f"duplicate policy label {label!r}; give one a distinct 'label'", *path)
        labels.add(label)
        spec = PolicySpec(name, str(label), dict(options))
        try:
            spec.build()
        except PolicyConfigError as exc:
            raise ctx.err(str(exc), *path) from None
        out.append(spec)
    return tuple(out)


def _checkpoints(ctx: _Ctx, raw):
    if raw is None:
        return None
    if isinstance(raw, dict):
        extra = set(raw) - {"start", "factor"}
        if extra or "start" not in raw:
            raise ctx.err("expected {start: int, factor: int}", "checkpoints")
        start = _int(ctx, raw["start"], ("checkpoints", "start"), 1)
        factor = _int(ctx, raw.get("factor", 2), ("checkpoints", "factor"), 2)
        return {"start": start, "factor": factor}
    return tuple(sorted({_int(ctx, x, ("checkpoints", i), 1) for i, x in enumerate(_list(ctx, raw, ("checkpoints",)))}))


def _check_compat(ctx: _Ctx, cfg: ExperimentConfig) -> None:
    """Dry-reset every policy at every (rho, T) so incompatibilities surface before running."""
    inst = cfg.instance
    if cfg.benchmark == "dp" or any(p.name.lower() == "dp" for p in cfg.policies):
        if not inst.is_unit_cost:
            raise ctx.err("the DP oracle needs unit costs", "benchmark")
        for T in cfg.horizons:
            for rho in cfg.rhos:
                cells = (T + 1) * (int(rho * T) + 1)
                if cells > MAX_CELLS:
                    raise ctx.err(f"DP table for T={T}, rho={rho} has {cells} cells (limit {MAX_CELLS})", "benchmark")
    for i, ps in enumerate(cfg.policies):
        pol = ps.build()
        try:
            pol.check_instance(inst)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HorizonWarning)
                for T in cfg.horizons:
                    for rho in cfg.rhos:
                        pol.reset(EpisodeSpec.build(inst, T, cfg.budget(rho, T)), 1)
        except (PolicyConfigError, ValueError) as exc:
            raise ctx.err(str(exc), "policies", i) from None


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    """Parse and fully validate a config document."""
    raw, lines = _load_text(text, source)
    ctx = _Ctx(lines, source)
    if not isinstance(raw, dict):
        raise ctx.err("top level must be a mapping")
    for k in raw:
        if k not in _TOP_KEYS:
            raise ctx.err(f"unknown key; allowed: {', '.join(sorted(_TOP_KEYS))}", k)
    for k in ("instance", "rhos", "horizons", "policies", "runs"):
        if k not in raw:
            raise ctx.err("missing required field", k)
    instance = _instance(ctx, raw["instance"])
    rhos = tuple(_frac(ctx, x, ("rhos", i)) for i, x in enumerate(_list(ctx, raw["rhos"], ("rhos",))))
    for i, r in enumerate(rhos):
        if r < 0:
            raise ctx.err("budget ratio must be >= 0", "rhos", i)
    horizons = tuple(_int(ctx, x, ("horizons", i), 1) for i, x in enumerate(_list(ctx, raw["horizons"], ("horizons",))))
    policies = _policies(ctx, raw["policies"])
    runs = _int(ctx, raw["runs"], ("runs",), 2)
    seed = _int(ctx, raw.get("seed", 0), ("seed",), 0)
    benchmark = raw.get("benchmark", "lp")
    if benchmark not in ("lp", "dp"):
        raise ctx.err(f"must be 'lp' or 'dp', got {benchmark!r}", "benchmark")
    measure = raw.get("reward_measure", "realized")
    if measure not in ("realized", "expected"):
        raise ctx.err(f"must be 'realized' or 'expected', got {measure!r}", "reward_measure")
    bounds = raw.get("bounds", False)
    if not isinstance(bounds, bool):
        raise ctx.err("must be true or false", "bounds")
    if bounds and not instance.is_unit_cost:
        raise ctx.err("bound constants are defined for unit-cost instances only", "bounds")
    out = raw.get("output") or {}
    if not isinstance(out, dict) or set(out) - {"path", "format"}:
        raise ctx.err("expected {path: ..., format: csv|json}", "output")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ctx.err(f"must be 'csv' or 'json', got {fmt!r}", "output", "format")
    cfg = ExperimentConfig(
        name=str(raw.get("name", Path(source).stem if source else "experiment")),
        instance=instance,
        rhos=rhos,
        horizons=horizons,
        policies=policies,
        runs=runs,
        seed=seed,
        checkpoints=_checkpoints(ctx, raw.get("checkpoints")),
        benchmark=benchmark,
        reward_measure=measure,
        bounds=bounds,
        output_path=out.get("path"),
        output_format=fmt,
        description=str(raw.get("description", "")),
    )
    _check_compat(ctx, cfg)
    return cfg


# -- presets ----------------------------------------------------------------------


def _preset_dir():
    return resources.files("ccbandit") / "presets"


def list_presets() -> dict[str, str]:
    """Preset name -> one-line description."""
    out = {}
    for entry in sorted(_preset_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".yaml"):
            data = yaml.safe_load(entry.read_text())
            out[entry.name[:-5]] = str(data.get("description", "")).strip()
    return out


def preset_path(name: str):
    entry = _preset_dir() / f"{name}.yaml"
    if not entry.is_file():
        raise ConfigError(f"no such config file or preset {name!r}; presets: {', '.join(list_presets())}")
    return entry


def load_config(ref: str | Path) -> ExperimentConfig:
    """Load a config from a file path, or a bundled preset by name."""
    p = Path(ref)
    if p.is_file():
        return parse_config(p.read_text(), str(p))
    entry = preset_path(str(ref))
    return parse_config(entry.read_text(), f"preset:{ref}")
