"""JSON descriptors for sets, functionals and experiment configs.

Parsing is strict: unknown fields raise :class:`ValidationError`.  The
config hash is the SHA-256 of the canonical serialization (sorted keys, no
whitespace), so it does not depend on field order.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .flow import FlowOptions
from .functionals import (Busemann, Distance, DistanceToSet, Displacement, Indicator,
                          SquaredDistance, WeightedSum)
from .geometry import (Ball, ConvexSet, Segment, Singleton, Space, SublevelSet, Subtree,
                       space_from_json)
from .ppa import StepSchedule, StopRule
from .resolvent import ResolventOptions

ALGORITHMS = ("ppa", "flow", "both")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def _fields(obj, where: str, required=(), optional=()):
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ValidationError(f"{where}: missing fields {missing}")


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {v!r}")
    return float(v)


def point_from_json(space: Space, obj, where: str = "point"):
    try:
        return space.payload_from_json(obj)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def set_from_json(space: Space, obj) -> ConvexSet:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("set descriptor needs a 'kind'")
    kind = obj["kind"]
    if kind == "singleton":
        _fields(obj, "singleton", ("kind", "point"))
        return Singleton(space, point_from_json(space, obj["point"]))
    if kind == "segment":
        _fields(obj, "segment", ("kind", "a", "b"))
        return Segment(space, point_from_json(space, obj["a"]), point_from_json(space, obj["b"]))
    if kind == "ball":
        _fields(obj, "ball", ("kind", "center", "radius"))
        return Ball(space, point_from_json(space, obj["center"]), _number(obj["radius"], "radius"))
    if kind == "sublevel":
        _fields(obj, "sublevel", ("kind", "functional", "level", "minimizer"))
        return SublevelSet(functional_from_json(space, obj["functional"]),
                           _number(obj["level"], "level"), point_from_json(space, obj["minimizer"]))
    if kind == "subtree":
        _fields(obj, "subtree", ("kind", "vertices"))
        return Subtree(space, tuple(str(v) for v in obj["vertices"]))
    raise ValidationError(f"unknown set kind {kind!r}")


_META = ("known_minimizer", "known_infimum")


def _meta(space, obj):
    out = {}
    if "known_minimizer" in obj:
        out["known_minimizer"] = point_from_json(space, obj["known_minimizer"], "known_minimizer")
    if "known_infimum" in obj:
        out["known_infimum"] = _number(obj["known_infimum"], "known_infimum")
    return out


def functional_from_json(space: Space, obj):
    """Build a functional from its descriptor (the inverse of ``to_json``)."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("functional descriptor needs a 'kind'")
    kind = obj["kind"]
    if kind in ("squared_distance", "distance"):
        _fields(obj, kind, ("kind", "anchor"), ("weight",) + _META)
        cls = SquaredDistance if kind == "squared_distance" else Distance
        return cls(space, point_from_json(space, obj["anchor"], "anchor"),
                   weight=_number(obj.get("weight", 1.0), "weight"), **_meta(space, obj))
    if kind in ("distance_to_set", "indicator"):
        _fields(obj, kind, ("kind", "set"), _META)
        cls = DistanceToSet if kind == "distance_to_set" else Indicator
        return cls(set_from_json(space, obj["set"]), **_meta(space, obj))
    if kind == "busemann":
        _fields(obj, kind, ("kind", "origin", "direction"), _META)
        ray = space.make_ray(point_from_json(space, obj["origin"], "origin"), obj["direction"])
        return Busemann(space, ray, **_meta(space, obj))
    if kind == "displacement":
        _fields(obj, kind, ("kind", "isometry"), _META)
        return Displacement(space, space.make_isometry(obj["isometry"]), **_meta(space, obj))
    if kind == "weighted_sum":
        _fields(obj, kind, ("kind", "terms"), _META)
        if not isinstance(obj["terms"], list):
            raise ValidationError("weighted_sum terms must be a list")
        terms = []
        for i, t in enumerate(obj["terms"]):
            _fields(t, f"term {i}", ("functional",), ("weight",))
            terms.append((_number(t.get("weight", 1.0), f"term {i} weight"),
                          functional_from_json(space, t["functional"])))
        return WeightedSum(space, terms, **_meta(space, obj))
    raise ValidationError(f"unknown functional kind {kind!r}")


def schedule_from_json(obj) -> StepSchedule:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("schedule needs a 'kind'")
    kind = obj["kind"]
    if kind == "explicit":
        _fields(obj, "schedule", ("kind", "values"))
        if not isinstance(obj["values"], list):
            raise ValidationError("explicit schedule values must be a list")
        return StepSchedule.explicit([_number(v, "schedule value") for v in obj["values"]])
    if kind == "polynomial":
        _fields(obj, "schedule", ("kind", "c", "p"))
        return StepSchedule.polynomial(_number(obj["c"], "c"), _number(obj["p"], "p"))
    if kind in ("constant", "harmonic"):
        _fields(obj, "schedule", ("kind", "c"))
        return StepSchedule(kind, c=_number(obj["c"], "c"))
    raise ValidationError(f"unknown schedule kind {kind!r}")


def stop_from_json(obj) -> StopRule:
    _fields(obj, "stop", (), ("max_iterations", "step_distance_below", "value_gap_below"))
    kw = dict(obj)
    if "max_iterations" in kw:
        if isinstance(kw["max_iterations"], bool) or not isinstance(kw["max_iterations"], int):
            raise ValidationError("max_iterations must be an integer")
    return StopRule(**kw)


def resolvent_from_json(obj) -> ResolventOptions:
    _fields(obj, "resolvent", (), ("strategy", "inner_tolerance", "max_inner_iterations",
                                   "grid_resolution"))
    return ResolventOptions(**obj)


def flow_options_from_json(obj, resolvent: ResolventOptions) -> FlowOptions:
    _fields(obj, "flow", (), ("doubling_tolerance", "max_doublings", "initial_n"))
    return FlowOptions(resolvent=resolvent, **obj)


@dataclass
class ExperimentConfig:
    raw: dict
    space: Space
    functional: object
    algorithm: str
    schedule: StepSchedule | None
    lambda_grid: list | None
    start: object
    stop: StopRule
    resolvent: ResolventOptions
    flow: FlowOptions
    seed: int
    output: str | None

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


CONFIG_FIELDS = ("space", "functional", "algorithm", "start", "seed")
CONFIG_OPTIONAL = ("schedule", "lambda_grid", "stop", "resolvent", "flow", "output")


def config_from_json(obj, base_dir: str | None = None) -> ExperimentConfig:
    """Validate and build an experiment config.

    Raises
    ------
    ValidationError
        Unknown or missing fields, or any descriptor failing its checks.
    """
    _fields(obj, "config", CONFIG_FIELDS, CONFIG_OPTIONAL)
    seed = obj["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    algorithm = obj["algorithm"]
    if algorithm not in ALGORITHMS:
        raise ValidationError(f"algorithm must be one of {ALGORITHMS}")
    space = space_from_json(obj["space"], base_dir=base_dir)
    f = functional_from_json(space, obj["functional"])
    start = point_from_json(space, obj["start"], "start")
    schedule = grid = None
    if algorithm in ("ppa", "both"):
        if "schedule" not in obj:
            raise ValidationError("ppa runs need a schedule")
        schedule = schedule_from_json(obj["schedule"])
    if algorithm in ("flow", "both"):
        if "lambda_grid" not in obj or not isinstance(obj["lambda_grid"], list):
            raise ValidationError("flow runs need a lambda_grid list")
        grid = [_number(v, "lambda_grid") for v in obj["lambda_grid"]]
    ropts = resolvent_from_json(obj.get("resolvent", {}))
    return ExperimentConfig(
        raw=obj, space=space, functional=f, algorithm=algorithm, schedule=schedule,
        lambda_grid=grid, start=start, stop=stop_from_json(obj.get("stop", {})),
        resolvent=ropts, flow=flow_options_from_json(obj.get("flow", {}), ropts),
        seed=seed, output=obj.get("output"))


def load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"file {path!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def load_config(path: str) -> ExperimentConfig:
    return config_from_json(load_json(path), base_dir=os.path.dirname(os.path.abspath(path)))


def load_points(space: Space, path: str):
    """Points file: a JSON list of payloads, or ``{"points": [...], "weights": [...]}``."""
    obj = load_json(path)
    weights = None
    if isinstance(obj, dict):
        _fields(obj, "points file", ("points",), ("weights",))
        weights = obj.get("weights")
        obj = obj["points"]
    if not isinstance(obj, list) or not obj:
        raise ValidationError("points file must hold a nonempty list of points")
    pts = [point_from_json(space, p, f"point {i}") for i, p in enumerate(obj)]
    if weights is not None:
        if not isinstance(weights, list) or len(weights) != len(pts):
            raise ValidationError("weights must be a list matching the points")
        weights = [_number(w, "weight") for w in weights]
        if any(not w > 0 for w in weights):
            raise ValidationError("weights must be positive")
    return pts, weights


def write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
