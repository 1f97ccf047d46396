"""Minkowski 4-vector algebra, Lorentz boosts, and flat foliations.

Signature convention is (+,-,-,-) with c = 1.  A flat foliation is a family
of parallel spacelike hyperplanes, fully characterized by its future-pointing
unit normal n.  The foliation time of an event p is the linear gauge choice
t(p) = n . p, whose level sets are the leaves; only signs of time differences
carry physical meaning downstream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BetaOutOfRangeError, DegenerateTriadError, NonTimelikeNormalError

__all__ = [
    "Event4",
    "FoliationNormal",
    "BoostSpec",
    "SimultaneousPair",
    "TemporalOrder",
    "minkowski_dot",
    "boost",
    "foliation_time",
    "temporal_order",
    "solve_normal",
    "check_triad_independence",
    "rapidity_between",
]

#: relative pivot threshold for rank decisions in the small linear solves
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Event4:
    """A space-time point (t, x, y, z) in a named Lorentz frame."""

    t: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("t", "x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"Event4.{name} must be finite, got {v!r}")

    @classmethod
    def from_array(cls, a) -> "Event4":
        a = np.asarray(a, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected a 4-vector, got shape {a.shape}")
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z], dtype=dtype or float)


@dataclass(frozen=True)
class FoliationNormal:
    """Future-pointing unit timelike normal of a flat foliation."""

    n0: float
    nx: float
    ny: float
    nz: float

    def __post_init__(self) -> None:
        norm2 = self.n0**2 - (self.nx**2 + self.ny**2 + self.nz**2)
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"normal is not Minkowski-unit: |n|^2 = {norm2!r}")
        if self.n0 <= 0.0:
            raise ValueError("normal must be future-pointing (n0 > 0)")

    @classmethod
    def rest_frame(cls) -> "FoliationNormal":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, a) -> "FoliationNormal":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @classmethod
    def from_boost(cls, spec: "BoostSpec") -> "FoliationNormal":
        """Time axis of the frame moving at ``spec.beta`` relative to the lab."""
        return cls.from_array(boost(Event4(1.0, 0.0, 0.0, 0.0), spec))

    @property
    def spatial(self) -> np.ndarray:
        return np.array([self.nx, self.ny, self.nz])

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return np.array([self.n0, self.nx, self.ny, self.nz], dtype=dtype or float)


@dataclass(frozen=True)
class BoostSpec:
    """Velocity of a frame relative to the lab frame, |beta| < 1 strictly."""

    bx: float
    by: float
    bz: float

    def __post_init__(self) -> None:
        if self.beta_sq >= 1.0:
            raise BetaOutOfRangeError(
                f"|beta| = {math.sqrt(self.beta_sq):.6g} >= 1"
            )

    @classmethod
    def from_vector(cls, b) -> "BoostSpec":
        b = np.asarray(b, dtype=float)
        if b.shape != (3,):
            raise ValueError(f"expected a 3-velocity, got shape {b.shape}")
        return cls(float(b[0]), float(b[1]), float(b[2]))

    @property
    def beta(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz])

    @property
    def beta_sq(self) -> float:
        return self.bx**2 + self.by**2 + self.bz**2

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.beta_sq)


@dataclass(frozen=True)
class SimultaneousPair:
    """Two events on (approximately) the same leaf, tagged by orientation."""

    p_a: Event4
    p_b: Event4
    label: str = ""

    @property
    def separation(self) -> np.ndarray:
        return np.asarray(self.p_a) - np.asarray(self.p_b)


class TemporalOrder(enum.Enum):
    ALICE_FIRST = "alice_first"
    BOB_FIRST = "bob_first"
    SIMULTANEOUS = "simultaneous"


def minkowski_dot(a, b) -> float:
    """Scalar product a0*b0 - a.b with signature (+,-,-,-)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3])


def boost(e: Event4, b: BoostSpec) -> Event4:
    """Lab-frame components of the event whose moving-frame components are ``e``.

    With beta the velocity of the moving frame relative to the lab, the unit
    time axis (1,0,0,0) maps to (gamma, gamma*beta); the inverse transform is
    the boost by -beta.  The Minkowski norm is preserved.
    """
    bb = b.beta_sq
    if bb == 0.0:
        return e
    g = b.gamma
    r = e.position
    bdotr = float(b.beta @ r)
    t_lab = g * (e.t + bdotr)
    r_lab = r + ((g - 1.0) * bdotr / bb + g * e.t) * b.beta
    return Event4(t_lab, float(r_lab[0]), float(r_lab[1]), float(r_lab[2]))


def foliation_time(n: FoliationNormal, p: Event4) -> float:
    """Foliation time t(p) = n . p; level sets are the leaves."""
    return minkowski_dot(n, p)


def temporal_order(
    n: FoliationNormal, a: Event4, b: Event4, tol: float = 0.0
) -> TemporalOrder:
    """Order of two events relative to the foliation.

    ALICE_FIRST iff t(a) < t(b) - tol, BOB_FIRST iff t(b) < t(a) - tol,
    SIMULTANEOUS otherwise.  The default is a strict sign test; the protocol
    layer supplies a nonzero tolerance.
    """
    if tol < 0.0:
        raise ValueError("tol must be >= 0")
    dt = foliation_time(n, a) - foliation_time(n, b)
    if dt < -tol:
        return TemporalOrder.ALICE_FIRST
    if dt > tol:
        return TemporalOrder.BOB_FIRST
    return TemporalOrder.SIMULTANEOUS


def _row_echelon_rank(m: np.ndarray, rel_tol: float = RANK_TOL) -> tuple[int, np.ndarray, list[int]]:
    """Gaussian elimination with partial pivoting on a small dense matrix.

    Returns (rank, echelon matrix, pivot column indices).  A pivot counts only
    if it exceeds ``rel_tol`` times the largest initial entry.
    """
    a = np.array(m, dtype=float)
    nrows, ncols = a.shape
    scale = np.abs(a).max()
    if scale == 0.0:
        return 0, a, []
    thresh = rel_tol * scale
    pivots: list[int] = []
    row = 0
    for col in range(ncols):
        if row >= nrows:
            break
        p = row + int(np.argmax(np.abs(a[row:, col])))
        if abs(a[p, col]) <= thresh:
            continue
        if p != row:
            a[[row, p]] = a[[p, row]]
        a[row] /= a[row, col]
        for r in range(nrows):
            if r != row and a[r, col] != 0.0:
                a[r] -= a[r, col] * a[row]
        pivots.append(col)
        row += 1
    return len(pivots), a, pivots


def check_triad_independence(s1, s2, s3) -> bool:
    """True iff the three separation 4-vectors have rank 3."""
    m = np.vstack([np.asarray(s, dtype=float) for s in (s1, s2, s3)])
    rank, _, _ = _row_echelon_rank(m)
    return rank == 3


def solve_normal(s1, s2, s3) -> FoliationNormal:
    """Recover the foliation normal orthogonal to three separation vectors.

    The orthogonality conditions n . s_i = 0 form a 3x4 linear system after
    contracting with the metric; its one-dimensional null space, Minkowski
    normalized and future oriented, is the normal.

    Raises DegenerateTriadError when the separations are linearly dependent
    and NonTimelikeNormalError when the null vector is not timelike.
    """
    seps = np.vstack([np.asarray(s, dtype=float) for s in (s1, s2, s3)])
    m = seps * np.array([1.0, -1.0, -1.0, -1.0])  # rows are eta-contracted s_i
    rank, ech, pivots = _row_echelon_rank(m)
    if rank < 3:
        raise DegenerateTriadError(
            f"separation vectors have rank {rank}; three independent pairs required"
        )
    free = next(c for c in range(4) if c not in pivots)
    n = np.zeros(4)
    n[free] = 1.0
    for r, col in enumerate(pivots):
        n[col] = -ech[r, free]
    norm2 = minkowski_dot(n, n)
    if norm2 <= 0.0:
        raise NonTimelikeNormalError(
            f"null-space vector has Minkowski norm^2 = {norm2:.3e} <= 0; "
            "separations are not tangent to a spacelike hyperplane"
        )
    n /= math.sqrt(norm2)
    if n[0] < 0.0:
        n = -n
    return FoliationNormal.from_array(n + 0.0)  # +0.0 clears negative zeros


def rapidity_between(a: FoliationNormal, b: FoliationNormal) -> float:
    """Relative rapidity acosh(a . b) of two future unit timelike vectors."""
    return math.acosh(max(1.0, minkowski_dot(a, b)))
