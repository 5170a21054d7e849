"""Scenario configuration: JSON loading, validation, defaults, overrides.

A scenario file is a JSON object; omitted solver blocks fall back to the
documented defaults, unknown keys are rejected, and every violation message
is qualified with the dotted path of the offending key. Command-line
overrides use the same dotted paths ("mpc.zeta=20").
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

from .cgmres import ContinuationParams, HorizonConfig, WeightSchedule, Q_AXIS_DEFAULT
from .dynamics import InertiaTensor
from .orbit import (DipoleModelConfig, EARTH_RADIUS_KM, EARTH_ROTATION_RAD_S,
                    OrbitalElements)

CONTROLLERS = ("bdot-full", "bdot-x", "mpc")


class ConfigError(ValueError):
    """Configuration parse or schema violation; message carries the key path."""


def _template() -> dict:
    # None marks a required leaf (inner_step_s excepted: None means "= control period")
    return {
        "inertia": {"jx": None, "jy": None, "jz": None},
        "m_max": None,
        "initial_rates": None,
        "orbit": {
            "semi_major_axis_km": None,
            "eccentricity": None,
            "inclination_deg": None,
            "raan_deg": None,
            "arg_perigee_deg": None,
            "mean_anomaly_deg": None,
        },
        "field": {
            "b0_tesla": 3.12e-5,
            "tilt_deg": 11.44,
            "rotation_rate_rad_s": EARTH_ROTATION_RAD_S,
            "phase0_deg": 0.0,
            "mode": "tilted",
        },
        "controller": None,
        "duration_s": None,
        "control_period_s": None,
        "inner_step_s": None,
        "mpc": {
            "horizon_s": 14.0,
            "steps": 40,
            "zeta": 10.0,
            "fd_step": 1e-6,
            "gmres_max_iters": 120,
            "gmres_tol": 1e-8,
            "restore_passes": 10,
            "restore_tol": 1e-6,
        },
        "weights": {
            "threshold_deg_s": 0.1,
            "q_high_rate": [Q_AXIS_DEFAULT, 1e-2, 1e-2],
            "q_low_rate": [Q_AXIS_DEFAULT, 10.0, 10.0],
            "r1": 1e-2,
            "r2": 1e-5,
        },
        "settle_threshold_deg_s": 0.1,
    }


_OPTIONAL_LEAVES = {"inner_step_s"}


def _merge(base: dict, incoming: dict, path: str = "") -> dict:
    out = dict(base)
    for key, val in incoming.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected an object")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def _require_filled(node, path: str = ""):
    if isinstance(node, dict):
        for key, val in node.items():
            where = f"{path}.{key}" if path else key
            if where in _OPTIONAL_LEAVES:
                continue
            _require_filled(val, where)
    elif node is None:
        raise ConfigError(f"{path}: required key missing")


def _number(data: dict, path: str) -> float:
    val = data
    for part in path.split("."):
        val = val[part]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    if not math.isfinite(val):
        raise ConfigError(f"{path}: must be finite")
    return float(val)


def _positive(data: dict, path: str) -> float:
    val = _number(data, path)
    if val <= 0.0:
        raise ConfigError(f"{path}: must be a positive number")
    return val


def _vector3(data: dict, path: str) -> tuple:
    val = data
    for part in path.split("."):
        val = val[part]
    if not isinstance(val, (list, tuple)) or len(val) != 3:
        raise ConfigError(f"{path}: expected a list of 3 numbers")
    out = []
    for i, item in enumerate(val):
        if isinstance(item, bool) or not isinstance(item, (int, float)) or not math.isfinite(item):
            raise ConfigError(f"{path}[{i}]: expected a finite number")
        out.append(float(item))
    return tuple(out)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a closed-loop run needs, fully validated."""

    inertia: InertiaTensor
    m_max: float
    initial_rates: tuple
    orbit: OrbitalElements
    field: DipoleModelConfig
    controller: str
    duration_s: float
    control_period_s: float
    inner_step_s: float
    mpc: ContinuationParams
    horizon: HorizonConfig
    weights: WeightSchedule
    settle_threshold_deg_s: float = 0.1
    raw: dict = field(default=None, repr=False, compare=False)


def _validate(data: dict) -> ScenarioConfig:
    jx = _positive(data, "inertia.jx")
    jy = _positive(data, "inertia.jy")
    jz = _positive(data, "inertia.jz")
    if jx + jy < jz or jy + jz < jx or jz + jx < jy:
        raise ConfigError("inertia: moments violate the triangle inequalities")

    m_max = _positive(data, "m_max")
    rates = _vector3(data, "initial_rates")

    a = _positive(data, "orbit.semi_major_axis_km")
    if a <= EARTH_RADIUS_KM:
        raise ConfigError("orbit.semi_major_axis_km: must exceed the Earth radius")
    ecc = _number(data, "orbit.eccentricity")
    if not 0.0 <= ecc < 1.0:
        raise ConfigError("orbit.eccentricity: must lie in [0, 1)")
    for key in ("inclination_deg", "raan_deg", "arg_perigee_deg", "mean_anomaly_deg"):
        _number(data, f"orbit.{key}")

    b0 = _positive(data, "field.b0_tesla")
    tilt = _number(data, "field.tilt_deg")
    if not 0.0 <= tilt <= 20.0:
        raise ConfigError("field.tilt_deg: must lie in [0, 20]")
    _number(data, "field.rotation_rate_rad_s")
    _number(data, "field.phase0_deg")
    mode = data["field"]["mode"]
    if mode not in ("aligned", "tilted"):
        raise ConfigError("field.mode: must be 'aligned' or 'tilted'")

    controller = data["controller"]
    if controller not in CONTROLLERS:
        raise ConfigError(f"controller: must be one of {', '.join(CONTROLLERS)}")

    duration = _positive(data, "duration_s")
    period = _positive(data, "control_period_s")
    if data["inner_step_s"] is None:
        inner = period
    else:
        inner = _positive(data, "inner_step_s")
    if inner > period:
        raise ConfigError("inner_step_s: must not exceed control_period_s")
    ratio = period / inner
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError("inner_step_s: control period must be a whole multiple of it")

    horizon_s = _positive(data, "mpc.horizon_s")
    steps = data["mpc"]["steps"]
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise ConfigError("mpc.steps: must be an integer >= 1")
    zeta = _positive(data, "mpc.zeta")
    fd_step = _positive(data, "mpc.fd_step")
    if fd_step >= period:
        raise ConfigError("mpc.fd_step: must be smaller than the control period")
    gmres_max = data["mpc"]["gmres_max_iters"]
    if isinstance(gmres_max, bool) or not isinstance(gmres_max, int) or gmres_max < 1:
        raise ConfigError("mpc.gmres_max_iters: must be an integer >= 1")
    gmres_tol = _positive(data, "mpc.gmres_tol")
    restore = data["mpc"]["restore_passes"]
    if isinstance(restore, bool) or not isinstance(restore, int) or restore < 0:
        raise ConfigError("mpc.restore_passes: must be an integer >= 0")
    restore_tol = _positive(data, "mpc.restore_tol")

    threshold = _positive(data, "weights.threshold_deg_s")
    q_high = _vector3(data, "weights.q_high_rate")
    q_low = _vector3(data, "weights.q_low_rate")
    for name, vec in (("q_high_rate", q_high), ("q_low_rate", q_low)):
        if min(vec) <= 0.0:
            raise ConfigError(f"weights.{name}: entries must be positive")
    r1 = _positive(data, "weights.r1")
    r2 = _positive(data, "weights.r2")
    settle = _positive(data, "settle_threshold_deg_s")

    resolved = json.loads(json.dumps(data))
    resolved["inner_step_s"] = inner

    return ScenarioConfig(
        inertia=InertiaTensor(jx, jy, jz),
        m_max=m_max,
        initial_rates=rates,
        orbit=OrbitalElements(a, ecc,
                              _number(data, "orbit.inclination_deg"),
                              _number(data, "orbit.raan_deg"),
                              _number(data, "orbit.arg_perigee_deg"),
                              _number(data, "orbit.mean_anomaly_deg")),
        field=DipoleModelConfig(b0, tilt,
                                _number(data, "field.rotation_rate_rad_s"),
                                _number(data, "field.phase0_deg"), mode),
        controller=controller,
        duration_s=duration,
        control_period_s=period,
        inner_step_s=inner,
        mpc=ContinuationParams(zeta, fd_step, period, gmres_max, gmres_tol,
                               restore, restore_tol),
        horizon=HorizonConfig(horizon_s, steps),
        weights=WeightSchedule(threshold, tuple(q_high), tuple(q_low), r1, r2),
        settle_threshold_deg_s=settle,
        raw=resolved,
    )


def _parse_override(spec: str):
    if "=" not in spec:
        raise ConfigError(f"override {spec!r}: expected key=value")
    key, raw_val = spec.split("=", 1)
    key = key.strip()
    try:
        val = json.loads(raw_val)
    except json.JSONDecodeError:
        val = raw_val
    return key, val


def apply_overrides(data: dict, overrides) -> dict:
    for spec in overrides:
        key, val = _parse_override(spec)
        parts = key.split(".")
        node = data
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ConfigError(f"{key}: unknown override key")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(f"{key}: unknown override key")
        if isinstance(node[parts[-1]], dict):
            raise ConfigError(f"{key}: cannot override a whole section")
        node[parts[-1]] = val
    return data


def parse_config(data: dict, overrides=()) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    merged = _merge(_template(), data)
    merged = apply_overrides(merged, overrides)
    _require_filled(merged)
    return _validate(merged)


def load_config(path, overrides=()) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    return parse_config(data, overrides)


def baseline_path() -> str:
    """Filesystem path of the bundled baseline scenario."""
    return str(resources.files("detumble").joinpath("data/baseline.json"))


def config_digest(cfg: ScenarioConfig) -> str:
    """SHA-256 over the resolved configuration, for provenance in metrics."""
    canon = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
