"""Run configuration: JSON loading, schema validation and object construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .engine import AgentConfig, CriticConfig
from .game import GameSpec, validate
from .intrusion import IntrusionConfig, build_game, initial_strategies
from .planner import DEFAULT_NODE_BUDGET, ConstantStrategy, ObservationStrategy

SCHEMAS = {
    "simulate": "run_config.schema.json",
    "oracle-diff": "oracle_diff.schema.json",
    "berk-check": "berk_check.schema.json",
    "game": "game_spec.schema.json",
}


class ConfigError(ValueError):
    pass


def load_schema(kind: str) -> dict:
    text = resources.files("colearn").joinpath("schemas", SCHEMAS[kind]).read_text()
    return json.loads(text)


def check(doc: dict, kind: str | None = None) -> dict:
    """Validate ``doc`` against the schema named by ``kind`` (or its own ``kind`` field)."""
    kind = kind or (doc.get("kind") if isinstance(doc, dict) else None)
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown config kind {kind!r}; expected one of {sorted(SCHEMAS)}")
    try:
        jsonschema.validate(doc, load_schema(kind))
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{kind} config invalid at {where}: {e.message}") from None
    return doc


def load(path: str | Path, kind: str | None = None) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return check(doc, kind)


def game_from_dict(d: dict) -> GameSpec:
    check(d, "game")
    try:
        spec = GameSpec.from_dict(d)
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(f"bad GameSpec: {e}") from None
    problems = validate(spec)
    if problems:
        raise ConfigError("GameSpec fails validation: " + "; ".join(problems[:5]))
    return spec


@dataclass
class RunSetup:
    spec: GameSpec
    agents: list[AgentConfig]
    base: tuple
    T: int
    seeds: list[int]
    learner: int
    node_budget: int
    output: str | None = None


def _agent(d: dict) -> AgentConfig:
    kw = dict(d)
    if "critic" in kw:
        kw["critic"] = CriticConfig(**kw["critic"])
    for key in ("conjectures", "prior", "strategy"):
        if key in kw:
            kw[key] = tuple(kw[key])
    return AgentConfig(**kw)


def build_run(doc: dict, paper_scale: bool = False) -> RunSetup:
    """Turn a validated simulate config into engine inputs."""
    check(doc, "simulate")
    game = doc["game"]
    paper_scale = paper_scale or doc.get("paper_scale", False)
    if game["type"] == "intrusion":
        params = dict(game.get("intrusion", {}))
        try:
            icfg = IntrusionConfig.paper_scale(**params) if paper_scale else IntrusionConfig(**params)
        except ValueError as e:
            raise ConfigError(f"intrusion config: {e}") from None
        spec = build_game(icfg)
        base = initial_strategies(icfg)
    else:
        if "spec" in game:
            spec = game_from_dict(game["spec"])
        elif "path" in game:
            try:
                spec = game_from_dict(json.loads(Path(game["path"]).read_text()))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read game {game['path']}: {e}") from None
        else:
            raise ConfigError("custom game needs 'spec' or 'path'")
        base = None
    if "base_strategies" in doc:
        try:
            base = tuple(ConstantStrategy(p) for p in doc["base_strategies"])
        except ValueError as e:
            raise ConfigError(f"base_strategies: {e}") from None
    if base is None:
        base = tuple(ConstantStrategy(np.full(a, 1.0 / a)) for a in spec.actions)
    for k in (0, 1):
        if base[k].probs.size != spec.actions[k]:
            raise ConfigError(f"base strategy {k} has the wrong number of actions")
    agents = [_agent(a) for a in doc["agents"]]
    for k, a in enumerate(agents):
        if a.prior is not None and len(a.prior) != len(a.conjectures):
            raise ConfigError(f"agent {k}: prior length must match conjectures")
        if a.strategy is not None and len(a.strategy) != spec.actions[k if a.mode == "fixed" else 1 - k]:
            raise ConfigError(f"agent {k}: strategy has the wrong number of actions")
    return RunSetup(spec, agents, base, int(doc["T"]), list(doc["seeds"]),
                    int(doc.get("learner", 0)), int(doc.get("node_budget", DEFAULT_NODE_BUDGET)),
                    doc.get("output"))


def berk_inputs(doc: dict):
    """``(spec, conjectures, profile, posteriors, tolerance)`` from a berk-check config."""
    check(doc, "berk-check")
    spec = game_from_dict(doc["game"])
    try:
        conj = [[ObservationStrategy(t) for t in doc["conjectures"][k]] for k in (0, 1)]
        profile = [ObservationStrategy(t) for t in doc["profile"]]
    except ValueError as e:
        raise ConfigError(str(e)) from None
    for k in (0, 1):
        opp = 1 - k
        if profile[k].table.shape != (spec.num_obs[k], spec.actions[k]):
            raise ConfigError(f"profile[{k}] must be {spec.num_obs[k]}x{spec.actions[k]}")
        for c in conj[k]:
            if c.table.shape != (spec.num_obs[opp], spec.actions[opp]):
                raise ConfigError(f"conjectures[{k}] tables must be {spec.num_obs[opp]}x{spec.actions[opp]}")
        if len(doc["posteriors"][k]) != len(conj[k]):
            raise ConfigError(f"posteriors[{k}] must have one weight per conjecture")
        if abs(sum(doc["posteriors"][k]) - 1.0) > 1e-9:
            raise ConfigError(f"posteriors[{k}] must sum to 1")
    return spec, conj, profile, doc["posteriors"], float(doc.get("tolerance", 1e-6))


def intrusion_run(T: int = 200, seeds=range(20), **intrusion) -> dict:
    """The default intrusion experiment: learning defender, l_A = 1 attacker."""
    return {
        "kind": "simulate",
        "game": {"type": "intrusion", "intrusion": dict(intrusion)},
        "agents": [
            {"mode": "col", "lookahead": 1, "conjectures": [1, 2], "sampling": "sample"},
            {"mode": "col", "lookahead": 1, "conjectures": [1], "informed": True},
        ],
        "learner": 0,
        "T": T,
        "seeds": list(seeds),
    }


def agent_to_dict(a: AgentConfig) -> dict:
    d = {}
    for f in fields(a):
        v = getattr(a, f.name)
        if f.name == "critic":
            v = {"kind": v.kind, "samples": v.samples, "horizon": v.horizon}
        elif isinstance(v, tuple):
            v = list(v)
        if v is not None:
            d[f.name] = v
    return d
