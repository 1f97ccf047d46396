"""Run configuration: JSON loading, strict validation, resolved echo."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import ConfigError
from .fields import WaveguideModel
from .trajectories import IntegratorConfig

__all__ = ["RunConfig", "DEFAULTS", "load_config", "resolve_config"]

DEFAULTS: dict[str, dict[str, Any]] = {
    "model": {
        "omega": 1.0,
        "L": 5.0,
        "z_mode": "half_oscillator",
        "conv_mode": "dispersive",
        "k2": 1.0,
    },
    "integrator": {
        "dt": 1e-3,
        "t_max": 50.0,
        "crossing_tol": 1e-10,
    },
    "ensemble": {
        "n": 10000,
        "seed": 0,
        "bins": 200,
    },
    "classifier": {
        "theta": 0.0035,
        "n_min": 1000,
    },
    "protocol": {
        "d_min": 4.0,
        "d_max": 20.0,
        "d_tol": 1e-3,
        "particle_speed": 0.5,
        "hidden_boost": [0.0, 0.0, 0.0],
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration; all module constraints revalidated."""

    model: WaveguideModel
    integrator: IntegratorConfig
    n: int
    seed: int
    bins: int
    theta: float
    n_min: int
    d_min: float
    d_max: float
    d_tol: float
    particle_speed: float
    hidden_boost: tuple[float, float, float]

    def echo(self) -> dict[str, Any]:
        """Resolved config in file schema; re-running from it reproduces runs."""
        return {
            "model": {
                "omega": self.model.omega,
                "L": self.model.L,
                "z_mode": self.model.z_mode,
                "conv_mode": self.model.conv_mode,
                "k2": self.model.k2,
            },
            "integrator": {
                "dt": self.integrator.dt,
                "t_max": self.integrator.t_max,
                "crossing_tol": self.integrator.crossing_tol,
            },
            "ensemble": {"n": self.n, "seed": self.seed, "bins": self.bins},
            "classifier": {"theta": self.theta, "n_min": self.n_min},
            "protocol": {
                "d_min": self.d_min,
                "d_max": self.d_max,
                "d_tol": self.d_tol,
                "particle_speed": self.particle_speed,
                "hidden_boost": list(self.hidden_boost),
            },
        }


def _merge_strict(raw: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    merged = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    for sec, vals in raw.items():
        if sec not in merged:
            raise ConfigError(f"unknown config section {sec!r}")
        if not isinstance(vals, Mapping):
            raise ConfigError(f"section {sec!r} must be an object")
        for key, v in vals.items():
            if key not in merged[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            merged[sec][key] = v
    return merged


def resolve_config(raw: Mapping[str, Any] | None = None) -> RunConfig:
    """Merge a raw mapping over the defaults and build validated objects."""
    merged = _merge_strict(raw or {})
    try:
        model = WaveguideModel(**merged["model"])
        integrator = IntegratorConfig(**merged["integrator"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    ens = merged["ensemble"]
    cls = merged["classifier"]
    pro = merged["protocol"]
    if int(ens["n"]) < 1:
        raise ConfigError("ensemble.n must be >= 1")
    if int(ens["bins"]) < 1:
        raise ConfigError("ensemble.bins must be >= 1")
    if not 0.0 < float(cls["theta"]) < 1.0:
        raise ConfigError("classifier.theta must be in (0, 1)")
    if int(cls["n_min"]) < 1:
        raise ConfigError("classifier.n_min must be >= 1")
    if not 0.0 < float(pro["d_min"]) < float(pro["d_max"]):
        raise ConfigError("protocol: need 0 < d_min < d_max")
    if not 0.0 < float(pro["d_tol"]) < float(pro["d_max"]) - float(pro["d_min"]):
        raise ConfigError("protocol.d_tol must be in (0, d_max - d_min)")
    if not 0.0 < float(pro["particle_speed"]) < 1.0:
        raise ConfigError("protocol.particle_speed must be in (0, 1)")
    hb = pro["hidden_boost"]
    if not isinstance(hb, (list, tuple)) or len(hb) != 3:
        raise ConfigError("protocol.hidden_boost must be a 3-vector")
    return RunConfig(
        model=model,
        integrator=integrator,
        n=int(ens["n"]),
        seed=int(ens["seed"]),
        bins=int(ens["bins"]),
        theta=float(cls["theta"]),
        n_min=int(cls["n_min"]),
        d_min=float(pro["d_min"]),
        d_max=float(pro["d_max"]),
        d_tol=float(pro["d_tol"]),
        particle_speed=float(pro["particle_speed"]),
        hidden_boost=(float(hb[0]), float(hb[1]), float(hb[2])),
    )


def load_config(path: str | None) -> RunConfig:
    """Load a JSON config file (or just the defaults when ``path`` is None)."""
    if path is None:
        return resolve_config()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    return resolve_config(raw)
