"""Waveguide wave-packet closed forms and Bohmian velocity fields.

Natural units hbar = m = 1 throughout.  The guided particle lives in a
semi-infinite cylindrical waveguide along z with a hard wall at z = 0 and a
transverse harmonic trap of frequency omega; the transverse profile stays in
the trap ground state while the longitudinal profile disperses freely with
width sqrt(1 + t^2).  The detector is the plane z = L.

Velocity fields split into a convective part (phase gradient) and a spin part
(curl of the spin density divided by the density), which for a packet of
amplitude |G| and quantization axis n reduces to

    v_spin = spin * (grad log|G|) x n,

where ``spin`` is the eigenvalue carried by the guided particle along n.  In
singlet scenarios the guided particle carries -s when the remote outcome is s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .errors import BothZeroError, DomainError, ModeError, ZeroAmplitudeError

__all__ = [
    "HALF_OSCILLATOR",
    "TRUNCATED_GAUSSIAN",
    "DISPERSIVE",
    "CONSTANT_K",
    "WaveguideModel",
    "SpinAxis",
    "BranchWeights",
    "AliceFirst",
    "BobFirst",
    "Scenario",
    "ScalarField",
    "initial_density",
    "z_marginal_pdf",
    "z_marginal_cdf",
    "log_amp_gradients",
    "grad_log_amp",
    "convective_velocity",
    "conditional_velocity",
    "scenario_velocity",
    "velocity_field",
    "weights",
    "mixed_velocity",
    "particle1_conditional_velocity",
    "backflow_predicate",
    "pauli_current_numeric",
    "chi_spinor",
    "waveguide_amp",
    "waveguide_phase",
    "waveguide_g0",
    "singlet_state",
    "singlet_density",
    "singlet_current2_closed",
]

HALF_OSCILLATOR = "half_oscillator"
TRUNCATED_GAUSSIAN = "truncated_gaussian"
DISPERSIVE = "dispersive"
CONSTANT_K = "constant_k"

_SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class WaveguideModel:
    """Parameters of the evolving waveguide packet.

    omega     transverse trap frequency (> 0)
    L         detector plane coordinate along z (> 0)
    z_mode    longitudinal initial profile: "half_oscillator" (default,
              normalized ground state ~ z exp(-z^2/2)) or
              "truncated_gaussian" (~ exp(-z^2/2), wall-discontinuous)
    conv_mode "dispersive" (axial velocity t z/(1+t^2)) or "constant_k"
              (uniform axial wavenumber k2)
    k2        wavenumber used only in constant_k mode (> 0)
    """

    omega: float = 1.0
    L: float = 5.0
    z_mode: str = HALF_OSCILLATOR
    conv_mode: str = DISPERSIVE
    k2: float = 1.0

    def __post_init__(self) -> None:
        if self.omega <= 0.0:
            raise ValueError("omega must be > 0")
        if self.L <= 0.0:
            raise ValueError("L must be > 0")
        if self.z_mode not in (HALF_OSCILLATOR, TRUNCATED_GAUSSIAN):
            raise ValueError(f"unknown z_mode {self.z_mode!r}")
        if self.conv_mode not in (DISPERSIVE, CONSTANT_K):
            raise ValueError(f"unknown conv_mode {self.conv_mode!r}")
        if self.conv_mode == CONSTANT_K and self.k2 <= 0.0:
            raise ValueError("k2 must be > 0 in constant_k mode")


@dataclass(frozen=True)
class SpinAxis:
    """Unit quantization axis for spin projections."""

    unit: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.unit, dtype=float)
        if u.shape != (3,):
            raise ValueError("axis must be a 3-vector")
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise ValueError("axis must be a unit vector within 1e-12")
        object.__setattr__(self, "unit", u)

    @classmethod
    def x(cls) -> "SpinAxis":
        """Transverse axis (perpendicular to the waveguide)."""
        return cls(np.array([1.0, 0.0, 0.0]))

    @classmethod
    def z(cls) -> "SpinAxis":
        """Longitudinal axis (along the waveguide)."""
        return cls(np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class BranchWeights:
    """Convex weights of the two spin branches."""

    w_plus: float
    w_minus: float

    def __post_init__(self) -> None:
        if self.w_plus < 0.0 or self.w_minus < 0.0:
            raise ValueError("weights must be non-negative")
        if abs(self.w_plus + self.w_minus - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")


@dataclass(frozen=True)
class AliceFirst:
    """Remote spin measurement along ``axis`` completed before release.

    ``outcome`` is the remote eigenvalue s = +-1; the guided particle carries
    -s.  ``None`` means the outcome is drawn per pair by the ensemble layer.
    """

    axis: SpinAxis
    outcome: int | None = None

    def __post_init__(self) -> None:
        if self.outcome is not None and self.outcome not in (+1, -1):
            raise ValueError("outcome must be +1, -1 or None")


@dataclass(frozen=True)
class BobFirst:
    """Release happens first: branches average out, convective motion only."""


Scenario = Union[AliceFirst, BobFirst]


class ScalarField(NamedTuple):
    """A scalar field with its analytic gradient, both (x, t) callables."""

    value: Callable[[np.ndarray, float], float]
    gradient: Callable[[np.ndarray, float], np.ndarray]


# ---------------------------------------------------------------------------
# densities and marginals
# ---------------------------------------------------------------------------

def _z_profile_sq(m: WaveguideModel, z, width_sq: float = 1.0):
    """Normalized |longitudinal profile|^2 at squared width ``width_sq``."""
    z = np.asarray(z, dtype=float)
    w = width_sq
    if m.z_mode == HALF_OSCILLATOR:
        out = (4.0 / math.sqrt(math.pi)) * z**2 * np.exp(-(z**2) / w) / w**1.5
    else:
        out = (2.0 / math.sqrt(math.pi)) * np.exp(-(z**2) / w) / w**0.5
    return np.where(z > 0.0, out, 0.0)


def initial_density(m: WaveguideModel, x) -> float | np.ndarray:
    """|Psi_0|^2, normalized to 1, vanishing for z <= 0.

    Half-oscillator mode: (4/sqrt(pi)) z^2 e^{-z^2} * (omega/pi) e^{-omega rho^2}.
    """
    x = np.asarray(x, dtype=float)
    rho_sq = x[..., 0] ** 2 + x[..., 1] ** 2
    trans = (m.omega / math.pi) * np.exp(-m.omega * rho_sq)
    out = _z_profile_sq(m, x[..., 2]) * trans
    return float(out) if out.ndim == 0 else out


def z_marginal_pdf(m: WaveguideModel, z, t: float = 0.0):
    """Longitudinal marginal density at time t (width scaled by sqrt(1+t^2))."""
    return _z_profile_sq(m, z, width_sq=1.0 + t * t)


def z_marginal_cdf(m: WaveguideModel, z, t: float = 0.0):
    """CDF of the longitudinal marginal at time t.

    Half-oscillator: erf(u) - (2/sqrt(pi)) u exp(-u^2) with u = z/sqrt(1+t^2);
    truncated Gaussian: erf(u).
    """
    from scipy.special import erf

    u = np.asarray(z, dtype=float) / math.sqrt(1.0 + t * t)
    u = np.maximum(u, 0.0)
    if m.z_mode == HALF_OSCILLATOR:
        return erf(u) - (2.0 / math.sqrt(math.pi)) * u * np.exp(-(u**2))
    return erf(u)


# ---------------------------------------------------------------------------
# velocity fields
# ---------------------------------------------------------------------------

def log_amp_gradients(m: WaveguideModel, rho: float, z: float, t: float) -> tuple[float, float]:
    """(d_rho log|G|, d_z log|G|) for the dispersing packet.

    The transverse trap ground state gives d_rho log|G| = -omega*rho at all
    times; the longitudinal part gives 1/z - z/(1+t^2) (half oscillator) or
    -z/(1+t^2) (truncated Gaussian).
    """
    d_rho = -m.omega * rho
    c = 1.0 / (1.0 + t * t)
    if m.z_mode == HALF_OSCILLATOR:
        if z <= 0.0:
            raise DomainError(f"half-oscillator amplitude undefined at z = {z}")
        d_z = 1.0 / z - z * c
    else:
        d_z = -z * c
    return d_rho, d_z


def grad_log_amp(m: WaveguideModel, x, t: float) -> np.ndarray:
    """Cartesian grad log|G|; the radial part is exactly -omega*(x, y, 0)."""
    x = np.asarray(x, dtype=float)
    _, d_z = log_amp_gradients(m, math.hypot(x[0], x[1]), x[2], t)
    return np.array([-m.omega * x[0], -m.omega * x[1], d_z])


def convective_velocity(m: WaveguideModel, x, t: float) -> np.ndarray:
    """Phase-gradient velocity: (0, 0, t z/(1+t^2)) or (0, 0, k2)."""
    if m.conv_mode == DISPERSIVE:
        z = float(np.asarray(x, dtype=float)[2])
        return np.array([0.0, 0.0, t * z / (1.0 + t * t)])
    return np.array([0.0, 0.0, m.k2])


def conditional_velocity(
    m: WaveguideModel, axis: SpinAxis, spin: int, x, t: float
) -> np.ndarray:
    """Velocity of a particle carrying ``spin`` (+-1) along ``axis``.

    v = v_conv + spin * (grad log|G|) x n.  Longitudinal axis: pure azimuthal
    circulation at angular speed omega on top of the axial motion; transverse
    axis: axial modulation spin*omega*y plus a y-component spin*d_z log|G|.
    """
    if spin not in (+1, -1):
        raise ValueError("spin must be +1 or -1")
    v = convective_velocity(m, x, t)
    g = grad_log_amp(m, x, t)
    return v + spin * np.cross(g, axis.unit)


def scenario_velocity(m: WaveguideModel, scenario: Scenario, x, t: float) -> np.ndarray:
    """Guiding field of the released particle under a temporal-order scenario.

    AliceFirst(axis, s): single conditional field with carried spin -s
    (singlet anti-correlation).  BobFirst: the branch average, which cancels
    the spin terms exactly and leaves the convective velocity.
    """
    if isinstance(scenario, BobFirst):
        return convective_velocity(m, x, t)
    if scenario.outcome is None:
        raise ValueError("scenario outcome must be fixed for a pointwise field")
    return conditional_velocity(m, scenario.axis, -scenario.outcome, x, t)


def velocity_field(m: WaveguideModel, scenario: Scenario) -> Callable[[np.ndarray, float], np.ndarray]:
    """Bind a scenario into an (x, t) -> v callable for the integrator."""

    def field(x: np.ndarray, t: float) -> np.ndarray:
        return scenario_velocity(m, scenario, x, t)

    return field


def weights(f_plus_abs2: float, f_minus_abs2: float) -> BranchWeights:
    """Branch weights w_s = |f_s|^2 / (|f_+|^2 + |f_-|^2)."""
    if f_plus_abs2 < 0.0 or f_minus_abs2 < 0.0:
        raise ValueError("branch amplitudes squared must be >= 0")
    total = f_plus_abs2 + f_minus_abs2
    if total == 0.0:
        raise BothZeroError("both branch amplitudes vanish")
    return BranchWeights(f_plus_abs2 / total, f_minus_abs2 / total)


def mixed_velocity(w: BranchWeights, v_plus_branch, v_minus_branch) -> np.ndarray:
    """Convex combination of the two branch fields."""
    return w.w_plus * np.asarray(v_plus_branch, dtype=float) + w.w_minus * np.asarray(
        v_minus_branch, dtype=float
    )


def particle1_conditional_velocity(
    f_abs: Callable[[np.ndarray, float], float],
    phase: Callable[[np.ndarray, float], float],
    axis: SpinAxis,
    s: int,
    x1,
    t: float,
    fd_step: float = 1e-6,
) -> np.ndarray:
    """Conditional field of the measured-side particle with outcome ``s``.

    v = grad(phase) + s * (grad|f|/|f|) x n -- note the plus sign on the spin
    term, opposite to the released particle's branch fields.  Gradients of the
    supplied callables are taken by central differences with step ``fd_step``.
    """
    if s not in (+1, -1):
        raise ValueError("s must be +1 or -1")
    x1 = np.asarray(x1, dtype=float)
    a0 = f_abs(x1, t)
    if a0 <= 0.0:
        raise ZeroAmplitudeError(f"|f| = {a0} at the evaluation point")
    grad_s = np.empty(3)
    grad_a = np.empty(3)
    for i in range(3):
        dx = np.zeros(3)
        dx[i] = fd_step
        grad_s[i] = (phase(x1 + dx, t) - phase(x1 - dx, t)) / (2.0 * fd_step)
        grad_a[i] = (f_abs(x1 + dx, t) - f_abs(x1 - dx, t)) / (2.0 * fd_step)
    return grad_s + s * np.cross(grad_a / a0, axis.unit)


def backflow_predicate(m: WaveguideModel, s: int, x, t: float) -> bool:
    """Axial-reversal test for the transverse field in constant_k mode.

    True iff s * (d_rho log|G|) * sin(phi) / k2 < -1, i.e. the spin modulation
    overpowers the uniform axial wavenumber.  With d_rho log|G| = -omega*rho
    and rho*sin(phi) = y this is -s*omega*y/k2 < -1.  In dispersive mode
    backflow is an empirical trajectory property (min v_z), not a pointwise
    predicate, so the mode is rejected.
    """
    if m.conv_mode != CONSTANT_K:
        raise ModeError("backflow predicate applies only in constant_k mode")
    if s not in (+1, -1):
        raise ValueError("s must be +1 or -1")
    y = float(np.asarray(x, dtype=float)[1])
    return -s * m.omega * y / m.k2 < -1.0


# ---------------------------------------------------------------------------
# spinors, closed-form singlet currents, and the numeric oracle
# ---------------------------------------------------------------------------

def chi_spinor(axis: SpinAxis, s: int) -> np.ndarray:
    """Eigenspinor of n.sigma with eigenvalue s along ``axis``."""
    if s not in (+1, -1):
        raise ValueError("s must be +1 or -1")
    ux, uy, uz = axis.unit
    theta = math.acos(max(-1.0, min(1.0, uz)))
    phi = math.atan2(uy, ux)
    c, sn = math.cos(theta / 2.0), math.sin(theta / 2.0)
    if s == +1:
        return np.array([c, sn * np.exp(1j * phi)], dtype=complex)
    return np.array([-sn * np.exp(-1j * phi), c], dtype=complex)


def waveguide_amp(m: WaveguideModel) -> ScalarField:
    """Normalized packet amplitude |g0|(x, t) with its analytic gradient."""
    om = m.omega

    def value(x, t: float) -> float:
        x = np.asarray(x, dtype=float)
        z = x[2]
        if z <= 0.0:
            return 0.0
        w = 1.0 + t * t
        trans = math.sqrt(om / math.pi) * math.exp(-0.5 * om * (x[0] ** 2 + x[1] ** 2))
        if m.z_mode == HALF_OSCILLATOR:
            lon = math.sqrt(4.0 / math.sqrt(math.pi)) * z * math.exp(-0.5 * z * z / w) / w**0.75
        else:
            lon = math.sqrt(2.0 / math.sqrt(math.pi)) * math.exp(-0.5 * z * z / w) / w**0.25
        return lon * trans

    def gradient(x, t: float) -> np.ndarray:
        return value(x, t) * grad_log_amp(m, x, t)

    return ScalarField(value, gradient)


def waveguide_phase(m: WaveguideModel) -> ScalarField:
    """Packet phase S0(x, t), z-independent pieces dropped (gauge choice)."""

    def value(x, t: float) -> float:
        z = float(np.asarray(x, dtype=float)[2])
        if m.conv_mode == DISPERSIVE:
            return 0.5 * t * z * z / (1.0 + t * t)
        return m.k2 * z

    def gradient(x, t: float) -> np.ndarray:
        return convective_velocity(m, x, t)

    return ScalarField(value, gradient)


def waveguide_g0(m: WaveguideModel) -> Callable[[np.ndarray, float], complex]:
    """Complex packet g0 = |g0| e^{i S0} as a single callable."""
    amp = waveguide_amp(m)
    phase = waveguide_phase(m)

    def g0(x, t: float) -> complex:
        return amp.value(x, t) * np.exp(1j * phase.value(x, t))

    return g0


def singlet_state(
    fp: Callable[[np.ndarray, float], complex],
    fm: Callable[[np.ndarray, float], complex],
    g0: Callable[[np.ndarray, float], complex],
    axis: SpinAxis,
) -> Callable[[np.ndarray, np.ndarray, float], np.ndarray]:
    """Assemble the 4-spinor (g0/sqrt2) * sum_s s f_s chi_{s n} (x) chi_{-s n}."""
    chi_pm = np.kron(chi_spinor(axis, +1), chi_spinor(axis, -1))
    chi_mp = np.kron(chi_spinor(axis, -1), chi_spinor(axis, +1))

    def psi(x1, x2, t: float) -> np.ndarray:
        g = g0(x2, t) / math.sqrt(2.0)
        return g * (fp(x1, t) * chi_pm - fm(x1, t) * chi_mp)

    return psi


def singlet_density(fp, fm, g0, x1, x2, t: float) -> float:
    """rho = (|g0|^2 / 2) (|f_+|^2 + |f_-|^2), by spin-basis orthonormality."""
    return 0.5 * abs(g0(x2, t)) ** 2 * (abs(fp(x1, t)) ** 2 + abs(fm(x1, t)) ** 2)


def singlet_current2_closed(
    fp,
    fm,
    g0_amp: ScalarField,
    g0_phase: ScalarField,
    axis: SpinAxis,
    x1,
    x2,
    t: float,
) -> np.ndarray:
    """Closed-form probability current of the released particle.

    J = (|g0|^2/2) * sum_s |f_s|^2 [grad S0 - s (grad|g0|/|g0|) x n],
    evaluated at (x1, x2, t) for the singlet with remote branches f_+, f_-.
    """
    a = g0_amp.value(x2, t)
    if a <= 0.0:
        raise ZeroAmplitudeError("|g0| vanishes at the evaluation point")
    log_grad = g0_amp.gradient(x2, t) / a
    grad_s0 = g0_phase.gradient(x2, t)
    spin_dir = np.cross(log_grad, axis.unit)
    wp = abs(fp(x1, t)) ** 2
    wm = abs(fm(x1, t)) ** 2
    pref = 0.5 * a * a
    return pref * (wp * (grad_s0 - spin_dir) + wm * (grad_s0 + spin_dir))


def pauli_current_numeric(
    psi: Callable[[np.ndarray], np.ndarray],
    x,
    h: float = 1e-4,
    spin_ops: Sequence[np.ndarray] | None = None,
    _spin_flux_sign: float = 1.0,
) -> np.ndarray:
    """Finite-difference Pauli current Im[Psi^dag grad Psi] + (1/2) curl(Psi^dag sigma Psi).

    ``psi`` maps a 3-vector to a 2-spinor (single particle) or 4-spinor (the
    released particle of a pair, differentiated in its own coordinate).  Spin
    matrices default to sigma for 2-spinors and I (x) sigma for 4-spinors.
    ``_spin_flux_sign`` is a test hook that scales the spin-flux term.
    """
    if h <= 0.0:
        raise ValueError("h must be > 0")
    x = np.asarray(x, dtype=float)
    psi0 = np.asarray(psi(x))
    if spin_ops is None:
        if psi0.shape == (2,):
            spin_ops = _SIGMA
        elif psi0.shape == (4,):
            spin_ops = tuple(np.kron(np.eye(2), s) for s in _SIGMA)
        else:
            raise ValueError(f"unsupported spinor shape {psi0.shape}")

    def spin_density(p: np.ndarray) -> np.ndarray:
        return np.array([np.real(p.conj() @ (op @ p)) for op in spin_ops])

    grad_psi = np.empty((3,) + psi0.shape, dtype=complex)
    ds = np.empty((3, 3))  # ds[i, a] = d_i S_a
    for i in range(3):
        dx = np.zeros(3)
        dx[i] = h
        pp = np.asarray(psi(x + dx))
        pm = np.asarray(psi(x - dx))
        grad_psi[i] = (pp - pm) / (2.0 * h)
        ds[i] = (spin_density(pp) - spin_density(pm)) / (2.0 * h)
    conv = np.array([np.imag(psi0.conj() @ grad_psi[i]) for i in range(3)])
    curl = np.array(
        [ds[1, 2] - ds[2, 1], ds[2, 0] - ds[0, 2], ds[0, 1] - ds[1, 0]]
    )
    return conv + _spin_flux_sign * 0.5 * curl
