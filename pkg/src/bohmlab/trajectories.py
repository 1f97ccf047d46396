"""Deterministic single-trajectory integration with first-crossing detection.

Classical fixed-step RK4; when a step brackets the detector plane z = L the
crossing time is refined by bisection on z(t) - L inside that step.  Step
times are formed as k*dt (no accumulation drift), so identical inputs give
bit-identical records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import FieldBlowupError

__all__ = ["IntegratorConfig", "ArrivalRecord", "integrate_until_crossing", "trajectory_trace"]

VelocityField = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator parameters.

    crossing_tol is the time tolerance of the bisection refinement;
    speed_limit flags invalid field/domain combinations via FieldBlowupError.
    """

    dt: float = 1e-3
    t_max: float = 50.0
    crossing_tol: float = 1e-10
    speed_limit: float = 1e6

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be > 0")
        if not 0.0 < self.crossing_tol <= self.dt:
            raise ValueError("crossing_tol must satisfy 0 < crossing_tol <= dt")
        if self.speed_limit <= 0.0:
            raise ValueError("speed_limit must be > 0")


@dataclass(frozen=True)
class ArrivalRecord:
    """First-crossing result of one trajectory.

    tau/crossing_point are None when the trajectory never reaches z = L
    within the horizon.  min_vz is the minimum axial velocity sampled at step
    starts; rho_drift the maximum |rho(t) - rho(0)| over post-step states.
    """

    tau: float | None
    crossing_point: np.ndarray | None
    min_vz: float
    rho_drift: float
    wall_contact: bool = False

    @property
    def arrived(self) -> bool:
        return self.tau is not None


def _clamp_z(x: np.ndarray, z_floor: float | None) -> np.ndarray:
    if z_floor is not None and x[2] < z_floor:
        x = x.copy()
        x[2] = z_floor
    return x


def _substep(
    field: VelocityField,
    x: np.ndarray,
    t: float,
    h: float,
    k1: np.ndarray,
    z_floor: float | None,
) -> np.ndarray:
    """One RK4 step of size h from (x, t), reusing the first slope k1."""
    k2 = np.asarray(field(_clamp_z(x + 0.5 * h * k1, z_floor), t + 0.5 * h), dtype=float)
    k3 = np.asarray(field(_clamp_z(x + 0.5 * h * k2, z_floor), t + 0.5 * h), dtype=float)
    k4 = np.asarray(field(_clamp_z(x + h * k3, z_floor), t + h), dtype=float)
    return x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _refine_crossing(
    field: VelocityField,
    x: np.ndarray,
    t: float,
    h: float,
    k1: np.ndarray,
    L: float,
    tol: float,
    z_floor: float | None,
) -> tuple[float, np.ndarray]:
    """Bisection on z(u) - L for the substep size u in [0, h]."""
    side = x[2] - L
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        z_mid = _substep(field, x, t, mid, k1, z_floor)[2]
        if side * (z_mid - L) <= 0.0:
            hi = mid
        else:
            lo = mid
    u = 0.5 * (lo + hi)
    return t + u, _substep(field, x, t, u, k1, z_floor)


def integrate_until_crossing(
    field: VelocityField,
    x0,
    cfg: IntegratorConfig,
    L: float,
    z_floor: float | None = None,
) -> ArrivalRecord:
    """Integrate a trajectory until its first crossing of the plane z = L.

    ``z_floor``, when set, is a reflecting guard: sub-step evaluation points
    and post-step states are clamped to z >= z_floor and the contact flagged.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (3,):
        raise ValueError("x0 must be a 3-vector")
    v0 = np.asarray(field(x, 0.0), dtype=float)
    min_vz = float(v0[2])
    if x[2] == L:
        return ArrivalRecord(0.0, x.copy(), min_vz, 0.0)
    rho0 = math.hypot(x[0], x[1])
    drift = 0.0
    wall = False
    k = 0
    while True:
        t = k * cfg.dt
        if t >= cfg.t_max:
            return ArrivalRecord(None, None, min_vz, drift, wall)
        h = cfg.dt if t + cfg.dt <= cfg.t_max else cfg.t_max - t
        k1 = np.asarray(field(x, t), dtype=float)
        if k1[2] < min_vz:
            min_vz = float(k1[2])
        if np.max(np.abs(k1)) > cfg.speed_limit:
            raise FieldBlowupError(
                f"|v| = {np.max(np.abs(k1)):.3e} exceeds {cfg.speed_limit:.3e} at t = {t:.6g}"
            )
        xn = _substep(field, x, t, h, k1, z_floor)
        if z_floor is not None and xn[2] < z_floor:
            xn = xn.copy()
            xn[2] = z_floor
            wall = True
        if (x[2] - L) * (xn[2] - L) <= 0.0:
            tau, point = _refine_crossing(field, x, t, h, k1, L, cfg.crossing_tol, z_floor)
            return ArrivalRecord(tau, point, min_vz, drift, wall)
        x = xn
        d = abs(math.hypot(x[0], x[1]) - rho0)
        if d > drift:
            drift = d
        k += 1


def trajectory_trace(
    field: VelocityField,
    x0,
    cfg: IntegratorConfig,
    sample_stride: int = 1,
    z_floor: float | None = None,
) -> list[tuple[float, np.ndarray]]:
    """Sampled path points at stride intervals; same dynamics, no stopping."""
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    x = np.array(x0, dtype=float)
    if x.shape != (3,):
        raise ValueError("x0 must be a 3-vector")
    out: list[tuple[float, np.ndarray]] = [(0.0, x.copy())]
    k = 0
    while True:
        t = k * cfg.dt
        if t >= cfg.t_max:
            return out
        h = cfg.dt if t + cfg.dt <= cfg.t_max else cfg.t_max - t
        k1 = np.asarray(field(x, t), dtype=float)
        if np.max(np.abs(k1)) > cfg.speed_limit:
            raise FieldBlowupError(
                f"|v| = {np.max(np.abs(k1)):.3e} exceeds {cfg.speed_limit:.3e} at t = {t:.6g}"
            )
        x = _substep(field, x, t, h, k1, z_floor)
        if z_floor is not None and x[2] < z_floor:
            x = x.copy()
            x[2] = z_floor
        k += 1
        if k % sample_stride == 0:
            out.append((t + h, x.copy()))
