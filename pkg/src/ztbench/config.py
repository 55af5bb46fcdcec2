"""Run configuration: dataclass tree, JSON load/dump, and flag overrides.

A config file is a JSON object with up to four sections::

    {"run": {...}, "generator": {...}, "policy": {...}, "baseline_rules": {...}}

Missing keys take their defaults; unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Optional

from .policy import ENGINES, BaselineRules, PolicyConfig
from .scenarios import GeneratorConfig
from .trust import AdaptationParams, ConfigError, TrustWeights


@dataclass(frozen=True)
class RunConfig:
    runs: int = 30
    events_per_run: int = 5000
    base_seed: int = 42
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    baseline_rules: BaselineRules = field(default_factory=BaselineRules)
    engines: tuple = ENGINES

    def __post_init__(self):
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs!r}")
        if not isinstance(self.events_per_run, int) or self.events_per_run < 1:
            raise ConfigError(f"events_per_run must be >= 1, got {self.events_per_run!r}")
        if not self.engines or any(e not in ENGINES for e in self.engines):
            raise ConfigError(f"engines must be a non-empty subset of {ENGINES}")
        object.__setattr__(self, "engines", tuple(e for e in ENGINES if e in self.engines))

    def seed_for(self, run_index: int) -> int:
        return self.base_seed + run_index


# --- dict conversion ----------------------------------------------------------------

def _plain(v: Any) -> Any:
    if isinstance(v, (frozenset, set)):
        return sorted(_plain(x) for x in v)
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, Mapping):
        return {str(k): _plain(x) for k, x in v.items()}
    if hasattr(v, "__dataclass_fields__"):
        return {f.name: _plain(getattr(v, f.name)) for f in fields(v)}
    return v


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "run": {"runs": cfg.runs, "events_per_run": cfg.events_per_run,
                "base_seed": cfg.base_seed, "engines": list(cfg.engines)},
        "generator": _plain(cfg.generator),
        "policy": _plain(cfg.policy),
        "baseline_rules": _plain(cfg.baseline_rules),
    }


def _check_keys(section: str, data: Mapping, allowed) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")


def _build(cls, section: str, data: Mapping, convert: Optional[dict] = None):
    names = [f.name for f in fields(cls)]
    _check_keys(section, data, names)
    kw = {}
    for k, v in data.items():
        fn = (convert or {}).get(k)
        kw[k] = fn(v) if fn else v
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _pairs(v):
    return tuple(tuple(x) for x in v)


def generator_from_dict(d: Mapping) -> GeneratorConfig:
    return _build(GeneratorConfig, "generator", d, {
        "service_zones": _pairs, "benign_anomaly": tuple, "attack_anomaly": tuple,
        "secondary_anomaly": tuple, "laundering_anomaly": tuple, "scenario_mix": dict})


def policy_from_dict(d: Mapping) -> PolicyConfig:
    return _build(PolicyConfig, "policy", d, {
        "weights": lambda w: _build(TrustWeights, "policy.weights", w),
        "adaptation": lambda a: _build(AdaptationParams, "policy.adaptation", a),
        "fts_weights": tuple, "band_thresholds": tuple,
        "service_overrides": lambda m: {int(k): tuple(v) for k, v in m.items()}})


def rules_from_dict(d: Mapping) -> BaselineRules:
    return _build(BaselineRules, "baseline_rules", d, {
        "blocked_regions": lambda v: frozenset(int(x) for x in v),
        "stepup_rules": lambda v: frozenset((int(a), int(b)) for a, b in v)})


def config_from_dict(d: Mapping) -> RunConfig:
    _check_keys("config", d, ("run", "generator", "policy", "baseline_rules"))
    run = dict(d.get("run", {}))
    _check_keys("run", run, ("runs", "events_per_run", "base_seed", "engines"))
    if "engines" in run:
        run["engines"] = tuple(run["engines"])
    return RunConfig(
        generator=generator_from_dict(d.get("generator", {})),
        policy=policy_from_dict(d.get("policy", {})),
        baseline_rules=rules_from_dict(d.get("baseline_rules", {})),
        **run)


def load_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """Read a JSON config (or defaults) and apply non-None run-level overrides."""
    data: Mapping = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = config_from_dict(data)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides) if overrides else cfg
