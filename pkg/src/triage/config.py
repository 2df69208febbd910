"""Run configuration: one INI document with a section per module.

Every value is JSON-encoded, so lists, floats and ``null`` round-trip
exactly. Precedence is defaults < config file < command-line flags.

Example::

    [costs]
    c_L = 1.0
    c_S = 3.0
    c_H = 15.0

    [pilot]
    p_hat_threshold = 0.56
"""

from __future__ import annotations

import configparser
import io
import json
from dataclasses import dataclass, field, fields, replace

from .codehealth import WeightConfig
from .costmodel import CostParams
from .errors import ConfigurationError, TriageError
from .evaluation import EvalConfig, PilotConfig
from .outcomes import AsymmetryParams
from .router import DEFAULT_THRESHOLDS, ClassifierParams, check_thresholds


@dataclass(frozen=True)
class Config:
    weights: WeightConfig = field(default_factory=WeightConfig)
    thresholds: tuple = DEFAULT_THRESHOLDS
    costs: CostParams = field(default_factory=CostParams)
    classifier: ClassifierParams = field(default_factory=ClassifierParams)
    pilot: PilotConfig = field(default_factory=PilotConfig)
    coverage_edges: tuple = (0.3, 0.7)
    folds: int = 5
    caliper: float | None = None
    asymmetry: AsymmetryParams = field(default_factory=AsymmetryParams)
    n_runs: int = 3
    seed: int = 0

    def eval_config(self) -> EvalConfig:
        return EvalConfig(coverage_edges=self.coverage_edges, folds=self.folds,
                          caliper=self.caliper, seed=self.seed, thresholds=self.thresholds,
                          classifier=self.classifier,
                          pilot=replace(self.pilot, thresholds=self.thresholds))


def _dump_value(value) -> str:
    if isinstance(value, tuple):
        value = list(value)
    return json.dumps(value, sort_keys=True)


def dumps(cfg: Config) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["general"] = {"seed": _dump_value(cfg.seed)}
    parser["codehealth"] = {
        "weights": _dump_value(cfg.weights.as_dict()["weights"]),
        "knees": _dump_value(cfg.weights.as_dict()["knees"]),
    }
    parser["router"] = {"thresholds": _dump_value(cfg.thresholds)}
    parser["router"].update({f.name: _dump_value(getattr(cfg.classifier, f.name))
                             for f in fields(ClassifierParams)})
    parser["costs"] = {k: _dump_value(v) for k, v in
                       zip(("c_L", "c_S", "c_H"), cfg.costs.as_tuple())}
    parser["pilot"] = {f.name: _dump_value(getattr(cfg.pilot, f.name))
                       for f in fields(PilotConfig) if f.name != "thresholds"}
    parser["evaluation"] = {"coverage_edges": _dump_value(cfg.coverage_edges),
                            "folds": _dump_value(cfg.folds),
                            "caliper": _dump_value(cfg.caliper)}
    parser["outcomes"] = {f.name: _dump_value(getattr(cfg.asymmetry, f.name))
                          for f in fields(AsymmetryParams)}
    parser["outcomes"]["n_runs"] = _dump_value(cfg.n_runs)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def loads(text: str, base: Config | None = None) -> Config:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable config: {exc}") from None
    cfg = base or Config()

    def section(name: str) -> dict:
        if name not in parser:
            return {}
        out = {}
        for key, raw in parser[name].items():
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                raise ConfigurationError(f"[{name}] {key}: value {raw!r} is not JSON") from None
            out[key] = tuple(value) if isinstance(value, list) else value
        return out

    known = {"general", "codehealth", "router", "costs", "pilot", "evaluation", "outcomes"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    try:
        general = section("general")
        updates = {}
        if "seed" in general:
            updates["seed"] = int(general.pop("seed"))
        _reject_extra("general", general, set())

        ch = section("codehealth")
        if ch:
            current = cfg.weights.as_dict()
            weights = {**current["weights"], **dict(ch.pop("weights", {}))}
            knees = {**current["knees"], **dict(ch.pop("knees", {}))}
            _reject_extra("codehealth", ch, set())
            updates["weights"] = WeightConfig.from_dict({"weights": weights, "knees": knees})

        router = section("router")
        if "thresholds" in router:
            updates["thresholds"] = check_thresholds(router.pop("thresholds"))
        cls_fields = {f.name for f in fields(ClassifierParams)}
        _reject_extra("router", router, cls_fields)
        if router:
            updates["classifier"] = replace(cfg.classifier, **router)

        costs = section("costs")
        _reject_extra("costs", costs, {"c_L", "c_S", "c_H"})
        if costs:
            updates["costs"] = replace(cfg.costs, **{k: float(v) for k, v in costs.items()})

        pilot = section("pilot")
        _reject_extra("pilot", pilot, {f.name for f in fields(PilotConfig)} - {"thresholds"})
        if pilot:
            updates["pilot"] = replace(cfg.pilot, **pilot)

        ev = section("evaluation")
        _reject_extra("evaluation", ev, {"coverage_edges", "folds", "caliper"})
        updates.update(ev)

        out = section("outcomes")
        if "n_runs" in out:
            updates["n_runs"] = int(out.pop("n_runs"))
        _reject_extra("outcomes", out, {f.name for f in fields(AsymmetryParams)})
        if out:
            updates["asymmetry"] = replace(cfg.asymmetry, **out)
        return replace(cfg, **updates)
    except ConfigurationError:
        raise
    except (TriageError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid config: {exc}") from None


def _reject_extra(section: str, values: dict, allowed: set) -> None:
    extra = set(values) - allowed
    if extra:
        raise ConfigurationError(f"[{section}] unknown keys: {sorted(extra)}")


def load(path, base: Config | None = None) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read(), base)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
