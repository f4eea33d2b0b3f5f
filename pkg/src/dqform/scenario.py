"""Scenario files: schema, validation, serialization, presets.

A scenario is a YAML document (schema_version 1) describing one closed-loop
simulation: formation kind, duration and step, controller variant, noise,
gain tables, piecewise-linear reference scripts, and initial offsets.
Units are meters, seconds, and degrees for angles in files (radians
internally). Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import jsonschema
import numpy as np
import yaml

from .gains import GainSchedule2R, GainSchedule3R
from .noise import NoiseParams

SCHEMA_VERSION = 1

ScalarKnots = tuple[tuple[float, float], ...]
VectorKnots = tuple[tuple[float, tuple[float, float, float]], ...]


class ScenarioError(ValueError):
    """Validation failure with per-field diagnostics."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {e}" for e in self.errors))


_KNOTS = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "prefixItems": [{"type": "number"}, {"type": "number"}],
        "minItems": 2,
        "maxItems": 2,
    },
}
_VEC3 = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 3,
    "maxItems": 3,
}
_VEC_KNOTS = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "prefixItems": [{"type": "number"}, _VEC3],
        "minItems": 2,
        "maxItems": 2,
    },
}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

_GAINS_2R_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "d_min": _POSITIVE, "d_max": _POSITIVE,
        "kp1": _POSITIVE, "ki1": _POSITIVE, "kp2": _POSITIVE, "ki2": _POSITIVE,
        "k_v_p": _POSITIVE, "k_v_i": _POSITIVE, "k_eta": _POSITIVE, "k_xi": _POSITIVE,
    },
}
_GAINS_3R_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "ki1": {"type": "array", "items": _POSITIVE, "minItems": 3, "maxItems": 3},
        "ki2": {"type": "array", "items": _POSITIVE, "minItems": 3, "maxItems": 3},
        "envelope": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d_min": _POSITIVE, "d_max": _POSITIVE,
                "alpha_min_deg": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 180},
                "alpha_max_deg": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 180},
            },
        },
        "k_v_p": _POSITIVE, "k_v_i": _POSITIVE, "k_eta": _POSITIVE, "k_xi": _POSITIVE,
    },
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "name", "formation", "duration", "reference"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "formation": {"enum": ["2r", "3r"]},
        "duration": _POSITIVE,
        "dt": _POSITIVE,
        "seed": {"type": "integer", "minimum": 0},
        "controller": {"enum": ["adaptive", "fixed"]},
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma": {"type": "number", "minimum": 0},
                "t_c": _POSITIVE,
            },
        },
        "geometry_gains": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"k_d": _POSITIVE, "k_alpha": _POSITIVE},
        },
        "gains": {"type": "object"},  # formation-specific, checked below
        "reference": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "position": _VEC_KNOTS,
                "distance": _KNOTS,
                "azimuth_deg": _KNOTS,
                "elevation_deg": _KNOTS,
                "distance2": _KNOTS,
                "distance3": _KNOTS,
                "alpha_deg": _KNOTS,
                "attitude_axis": {"enum": ["roll", "pitch", "yaw"]},
                "attitude_deg": _KNOTS,
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "position_offset": _VEC3,
                "distance_offset": {"type": "number"},
                "azimuth_offset_deg": {"type": "number"},
                "elevation_offset_deg": {"type": "number"},
                "d2_offset": {"type": "number"},
                "d3_offset": {"type": "number"},
                "alpha_offset_deg": {"type": "number"},
                "rpy_offset_deg": _VEC3,
            },
        },
    },
}

_2R_ONLY_REF = {"distance", "azimuth_deg", "elevation_deg"}
_3R_ONLY_REF = {"distance2", "distance3", "alpha_deg", "attitude_axis", "attitude_deg"}
_2R_ONLY_INIT = {"distance_offset", "azimuth_offset_deg", "elevation_offset_deg"}
_3R_ONLY_INIT = {"d2_offset", "d3_offset", "alpha_offset_deg", "rpy_offset_deg"}


@dataclass(frozen=True)
class Reference2R:
    position: VectorKnots = ((0.0, (0.0, 0.0, 0.0)),)
    distance: ScalarKnots = ((0.0, 50.0),)
    azimuth_deg: ScalarKnots = ((0.0, 0.0),)
    elevation_deg: ScalarKnots = ((0.0, 0.0),)


@dataclass(frozen=True)
class Reference3R:
    position: VectorKnots = ((0.0, (0.0, 0.0, 0.0)),)
    distance2: ScalarKnots = ((0.0, 50.0),)
    distance3: ScalarKnots = ((0.0, 50.0),)
    alpha_deg: ScalarKnots = ((0.0, 150.0),)
    attitude_axis: str = "roll"
    attitude_deg: ScalarKnots = ((0.0, 0.0),)


@dataclass(frozen=True)
class Initial2R:
    position_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    distance_offset: float = 0.0
    azimuth_offset_deg: float = 0.0
    elevation_offset_deg: float = 0.0


@dataclass(frozen=True)
class Initial3R:
    position_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    d2_offset: float = 0.0
    d3_offset: float = 0.0
    alpha_offset_deg: float = 0.0
    rpy_offset_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Scenario:
    """Fully validated simulation description."""

    name: str
    formation: str
    duration: float
    reference: Reference2R | Reference3R
    dt: float = 1e-3
    seed: int = 0
    controller: str = "adaptive"
    noise: NoiseParams = field(default_factory=NoiseParams)
    k_d: float = 0.5
    k_alpha: float = 0.5
    gains_2r: GainSchedule2R | None = None
    gains_3r: GainSchedule3R | None = None
    initial: Initial2R | Initial3R = None  # type: ignore[assignment]

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


def _knots(raw, vector=False):
    if vector:
        return tuple((float(t), tuple(float(x) for x in v)) for t, v in raw)
    return tuple((float(t), float(v)) for t, v in raw)


def _check_knots(errors, path, knots, duration, lo=None, hi=None):
    times = [t for t, _ in knots]
    if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
        errors.append(f"{path}: knot times must be strictly increasing")
    if times and (times[0] < 0.0 or times[-1] > duration):
        errors.append(f"{path}: knot times must lie in [0, {duration}]")
    if lo is not None or hi is not None:
        for t, v in knots:
            if lo is not None and v <= lo:
                errors.append(f"{path}: value {v} at t={t} must be > {lo}")
            if hi is not None and v >= hi:
                errors.append(f"{path}: value {v} at t={t} must be < {hi}")


def parse_scenario(document: str | dict) -> Scenario:
    """Parse and fully validate a scenario document (YAML text or dict)."""
    if isinstance(document, str):
        try:
            raw = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise ScenarioError([f"not valid YAML: {exc}"]) from exc
    else:
        raw = document
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ScenarioError(["document root must be a mapping"])

    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = [
        f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
        for e in sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    ]
    if errors:
        raise ScenarioError(errors)

    formation = raw["formation"]
    errors = []
    ref_raw = raw.get("reference", {})
    init_raw = raw.get("initial", {})
    wrong_ref = (_3R_ONLY_REF if formation == "2r" else _2R_ONLY_REF) & set(ref_raw)
    for key in sorted(wrong_ref):
        errors.append(f"reference/{key}: not a {formation} field")
    wrong_init = (_3R_ONLY_INIT if formation == "2r" else _2R_ONLY_INIT) & set(init_raw)
    for key in sorted(wrong_init):
        errors.append(f"initial/{key}: not a {formation} field")
    gains_raw = raw.get("gains", {})
    gain_schema = _GAINS_2R_SCHEMA if formation == "2r" else _GAINS_3R_SCHEMA
    for e in jsonschema.Draft202012Validator(gain_schema).iter_errors(gains_raw):
        errors.append(f"gains/{'/'.join(str(p) for p in e.absolute_path)}: {e.message}")
    if errors:
        raise ScenarioError(errors)

    duration = float(raw["duration"])
    dt = float(raw.get("dt", 1e-3))
    noise_raw = raw.get("noise", {})
    noise = NoiseParams(
        sigma=float(noise_raw.get("sigma", 1.0)), t_c=float(noise_raw.get("t_c", 0.002))
    )
    if dt > noise.t_c / 2.0 + 1e-12:
        errors.append(f"dt: {dt} must not exceed t_c/2 = {noise.t_c / 2.0} (noise bandwidth)")
    n = duration / dt
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        errors.append(f"duration: {duration} must be a positive integer multiple of dt = {dt}")

    geom = raw.get("geometry_gains", {})

    if formation == "2r":
        ref = Reference2R(
            position=_knots(ref_raw.get("position", [[0.0, [0.0, 0.0, 0.0]]]), vector=True),
            distance=_knots(ref_raw.get("distance", [[0.0, 50.0]])),
            azimuth_deg=_knots(ref_raw.get("azimuth_deg", [[0.0, 0.0]])),
            elevation_deg=_knots(ref_raw.get("elevation_deg", [[0.0, 0.0]])),
        )
        _check_knots(errors, "reference/position", ref.position, duration)
        _check_knots(errors, "reference/distance", ref.distance, duration, lo=0.0)
        _check_knots(errors, "reference/azimuth_deg", ref.azimuth_deg, duration)
        _check_knots(errors, "reference/elevation_deg", ref.elevation_deg, duration, lo=-90.0, hi=90.0)
        init = Initial2R(
            position_offset=tuple(float(x) for x in init_raw.get("position_offset", (0.0, 0.0, 0.0))),
            distance_offset=float(init_raw.get("distance_offset", 0.0)),
            azimuth_offset_deg=float(init_raw.get("azimuth_offset_deg", 0.0)),
            elevation_offset_deg=float(init_raw.get("elevation_offset_deg", 0.0)),
        )
        if ref.distance[0][1] + init.distance_offset <= 0:
            errors.append("initial/distance_offset: initial separation must be positive")
        try:
            gains_2r = GainSchedule2R(**{k: float(v) for k, v in gains_raw.items()})
        except (TypeError, ValueError) as exc:
            gains_2r = None
            errors.append(f"gains: {exc}")
        gains_3r = None
    else:
        ref = Reference3R(
            position=_knots(ref_raw.get("position", [[0.0, [0.0, 0.0, 0.0]]]), vector=True),
            distance2=_knots(ref_raw.get("distance2", [[0.0, 50.0]])),
            distance3=_knots(ref_raw.get("distance3", [[0.0, 50.0]])),
            alpha_deg=_knots(ref_raw.get("alpha_deg", [[0.0, 150.0]])),
            attitude_axis=ref_raw.get("attitude_axis", "roll"),
            attitude_deg=_knots(ref_raw.get("attitude_deg", [[0.0, 0.0]])),
        )
        _check_knots(errors, "reference/position", ref.position, duration)
        _check_knots(errors, "reference/distance2", ref.distance2, duration, lo=0.0)
        _check_knots(errors, "reference/distance3", ref.distance3, duration, lo=0.0)
        _check_knots(errors, "reference/alpha_deg", ref.alpha_deg, duration, lo=0.0, hi=180.0)
        _check_knots(errors, "reference/attitude_deg", ref.attitude_deg, duration)
        init = Initial3R(
            position_offset=tuple(float(x) for x in init_raw.get("position_offset", (0.0, 0.0, 0.0))),
            d2_offset=float(init_raw.get("d2_offset", 0.0)),
            d3_offset=float(init_raw.get("d3_offset", 0.0)),
            alpha_offset_deg=float(init_raw.get("alpha_offset_deg", 0.0)),
            rpy_offset_deg=tuple(float(x) for x in init_raw.get("rpy_offset_deg", (0.0, 0.0, 0.0))),
        )
        if ref.distance2[0][1] + init.d2_offset <= 0 or ref.distance3[0][1] + init.d3_offset <= 0:
            errors.append("initial: initial distances must be positive")
        a0 = ref.alpha_deg[0][1] + init.alpha_offset_deg
        if not 0.0 < a0 < 180.0:
            errors.append(f"initial/alpha_offset_deg: initial alpha {a0} deg outside (0, 180)")
        try:
            kwargs = dict(gains_raw)
            env = kwargs.pop("envelope", None)
            if "ki1" in kwargs:
                kwargs["ki1"] = tuple(float(x) for x in kwargs["ki1"])
            if "ki2" in kwargs:
                kwargs["ki2"] = tuple(float(x) for x in kwargs["ki2"])
            if env:
                from .gains import inertia_envelope_extrema

                lo, hi = inertia_envelope_extrema(
                    float(env.get("d_min", 20.0)), float(env.get("d_max", 50.0)),
                    float(env.get("alpha_min_deg", 30.0)), float(env.get("alpha_max_deg", 150.0)),
                )
                kwargs["i_min"], kwargs["i_max"] = lo, hi
            gains_3r = GainSchedule3R(**kwargs)
        except (TypeError, ValueError) as exc:
            gains_3r = None
            errors.append(f"gains: {exc}")
        gains_2r = None

    if errors:
        raise ScenarioError(errors)

    return Scenario(
        name=str(raw["name"]),
        formation=formation,
        duration=duration,
        dt=dt,
        seed=int(raw.get("seed", 0)),
        controller=raw.get("controller", "adaptive"),
        noise=noise,
        k_d=float(geom.get("k_d", 0.5)),
        k_alpha=float(geom.get("k_alpha", 0.5)),
        gains_2r=gains_2r,
        gains_3r=gains_3r,
        reference=ref,
        initial=init,
    )


def _listify(knots, vector=False):
    if vector:
        return [[t, list(v)] for t, v in knots]
    return [[t, v] for t, v in knots]


def scenario_to_dict(s: Scenario) -> dict:
    """Plain-dict form, the inverse of parse_scenario."""
    out: dict = {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "formation": s.formation,
        "duration": s.duration,
        "dt": s.dt,
        "seed": s.seed,
        "controller": s.controller,
        "noise": {"sigma": s.noise.sigma, "t_c": s.noise.t_c},
        "geometry_gains": {"k_d": s.k_d, "k_alpha": s.k_alpha},
    }
    if s.formation == "2r":
        g = s.gains_2r
        out["gains"] = {
            "d_min": g.d_min, "d_max": g.d_max,
            "kp1": g.kp1, "ki1": g.ki1, "kp2": g.kp2, "ki2": g.ki2,
            "k_v_p": g.k_v_p, "k_v_i": g.k_v_i, "k_eta": g.k_eta, "k_xi": g.k_xi,
        }
        r = s.reference
        out["reference"] = {
            "position": _listify(r.position, vector=True),
            "distance": _listify(r.distance),
            "azimuth_deg": _listify(r.azimuth_deg),
            "elevation_deg": _listify(r.elevation_deg),
        }
        i = s.initial
        out["initial"] = {
            "position_offset": list(i.position_offset),
            "distance_offset": i.distance_offset,
            "azimuth_offset_deg": i.azimuth_offset_deg,
            "elevation_offset_deg": i.elevation_offset_deg,
        }
    else:
        g = s.gains_3r
        out["gains"] = {
            "ki1": list(g.ki1), "ki2": list(g.ki2),
            "k_v_p": g.k_v_p, "k_v_i": g.k_v_i, "k_eta": g.k_eta, "k_xi": g.k_xi,
        }
        r = s.reference
        out["reference"] = {
            "position": _listify(r.position, vector=True),
            "distance2": _listify(r.distance2),
            "distance3": _listify(r.distance3),
            "alpha_deg": _listify(r.alpha_deg),
            "attitude_axis": r.attitude_axis,
            "attitude_deg": _listify(r.attitude_deg),
        }
        i = s.initial
        out["initial"] = {
            "position_offset": list(i.position_offset),
            "d2_offset": i.d2_offset,
            "d3_offset": i.d3_offset,
            "alpha_offset_deg": i.alpha_offset_deg,
            "rpy_offset_deg": list(i.rpy_offset_deg),
        }
    return out


def serialize_scenario(s: Scenario) -> str:
    """Canonical YAML text; parse_scenario(serialize_scenario(s)) == s."""
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=True)


def config_hash(s: Scenario) -> str:
    """SHA-256 over the canonical JSON form; changes iff any field changes."""
    blob = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def with_controller(s: Scenario, controller: str) -> Scenario:
    """Copy of s with the controller variant replaced."""
    if controller not in ("adaptive", "fixed"):
        raise ValueError("controller must be 'adaptive' or 'fixed'")
    return replace(s, controller=controller)


# ---------------------------------------------------------------------------
# Bundled presets (the paper study's two 2R and six 3R scenarios, desk scale)

_HOVER_ALT = [0.0, 0.0, 20.0]

_ROLLYAW_GEOM = {
    "distance2": [[0.0, 50.0], [40.0, 50.0], [70.0, 20.0]],
    "distance3": [[0.0, 50.0], [40.0, 50.0], [70.0, 20.0]],
    "alpha_deg": [[0.0, 150.0], [40.0, 150.0], [70.0, 30.0]],
}
_PITCH_GEOM = {
    "distance2": [[0.0, 50.0], [40.0, 50.0], [70.0, 20.0]],
    "distance3": [[0.0, 50.0], [40.0, 50.0], [70.0, 20.0]],
    "alpha_deg": [[0.0, 30.0], [40.0, 30.0], [70.0, 150.0]],
}
# steep 30 s ramp early (favorable geometry), soft 60 s counter-rotation late
_MANEUVER_ANGLE = [[0.0, 0.0], [10.0, 0.0], [40.0, 30.0], [80.0, 30.0], [140.0, 0.0]]


def _preset_3r(name, seed, geom, axis, maneuver):
    return {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "formation": "3r",
        "duration": 180.0,
        "dt": 0.001,
        "seed": seed,
        "controller": "adaptive",
        "noise": {"sigma": 1.0, "t_c": 0.002},
        "reference": {
            "position": [[0.0, _HOVER_ALT]],
            **geom,
            "attitude_axis": axis,
            "attitude_deg": _MANEUVER_ANGLE if maneuver else [[0.0, 0.0]],
        },
    }


PRESETS: dict[str, dict] = {
    "2r_hover_shrink": {
        "schema_version": SCHEMA_VERSION,
        "name": "2r_hover_shrink",
        "formation": "2r",
        "duration": 180.0,
        "dt": 0.001,
        "seed": 1000,
        "controller": "adaptive",
        "noise": {"sigma": 1.0, "t_c": 0.002},
        "reference": {
            "position": [[0.0, _HOVER_ALT]],
            "distance": [[0.0, 50.0], [40.0, 50.0], [70.0, 10.0]],
            "azimuth_deg": [[0.0, 0.0]],
            "elevation_deg": [[0.0, 0.0]],
        },
    },
    "2r_obstacle": {
        "schema_version": SCHEMA_VERSION,
        "name": "2r_obstacle",
        "formation": "2r",
        "duration": 80.0,
        "dt": 0.001,
        "seed": 1001,
        "controller": "adaptive",
        "noise": {"sigma": 1.0, "t_c": 0.002},
        "reference": {
            # turn-and-shrink 5-15 s, corridor traverse 20-35 s, expand 40-50 s
            "position": [
                [0.0, _HOVER_ALT], [20.0, _HOVER_ALT],
                [35.0, [40.0, 0.0, 20.0]], [40.0, [40.0, 0.0, 20.0]],
                [55.0, [60.0, 0.0, 20.0]],
            ],
            "distance": [[0.0, 50.0], [5.0, 50.0], [15.0, 10.0], [40.0, 10.0], [50.0, 50.0]],
            "azimuth_deg": [[0.0, 90.0], [5.0, 90.0], [15.0, 0.0], [40.0, 0.0], [50.0, 90.0]],
            "elevation_deg": [[0.0, 0.0]],
        },
    },
    "3r_hover_roll": _preset_3r("3r_hover_roll", 1002, _ROLLYAW_GEOM, "roll", False),
    "3r_hover_pitch": _preset_3r("3r_hover_pitch", 1003, _PITCH_GEOM, "pitch", False),
    "3r_hover_yaw": _preset_3r("3r_hover_yaw", 1004, _ROLLYAW_GEOM, "yaw", False),
    "3r_maneuver_roll": _preset_3r("3r_maneuver_roll", 1005, _ROLLYAW_GEOM, "roll", True),
    "3r_maneuver_pitch": _preset_3r("3r_maneuver_pitch", 1006, _PITCH_GEOM, "pitch", True),
    "3r_maneuver_yaw": _preset_3r("3r_maneuver_yaw", 1007, _ROLLYAW_GEOM, "yaw", True),
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def load_preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    return parse_scenario(PRESETS[name])


# ---------------------------------------------------------------------------
# Reference sampling (shared by the engine)

_AXIS_VECTORS = {"roll": (1.0, 0.0, 0.0), "pitch": (0.0, 1.0, 0.0), "yaw": (0.0, 0.0, 1.0)}


def sample_scalar(knots: ScalarKnots, t: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation with constant extrapolation."""
    tk = np.array([k[0] for k in knots])
    vk = np.array([k[1] for k in knots])
    return np.interp(t, tk, vk)


def sample_vector(knots: VectorKnots, t: np.ndarray) -> np.ndarray:
    tk = np.array([k[0] for k in knots])
    comps = np.array([k[1] for k in knots])  # (m, 3)
    return np.stack([np.interp(t, tk, comps[:, i]) for i in range(3)], axis=-1)


def axis_vector(name: str) -> np.ndarray:
    return np.array(_AXIS_VECTORS[name])
