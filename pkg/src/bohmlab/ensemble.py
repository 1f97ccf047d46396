"""Quantum-equilibrium ensembles, arrival-time statistics and classification.

Initial positions are |Psi_0|^2 distributed.  Randomness is organized as
counter-based Philox streams: each ensemble derives child streams (positions,
outcomes) from its seed and draws vectorized in trajectory-index order, so
results are reproducible and independent of execution schedule.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import (
    EmptyChannelPairError,
    EmptySampleError,
    FieldBlowupError,
    InsufficientSeparationError,
    ModeError,
    NoArrivalsError,
    TooFewSamplesError,
)
from .fields import (
    DISPERSIVE,
    HALF_OSCILLATOR,
    AliceFirst,
    BobFirst,
    Scenario,
    SpinAxis,
    WaveguideModel,
    z_marginal_cdf,
)
from .trajectories import IntegratorConfig

__all__ = [
    "DistributionClass",
    "ClassifierConfig",
    "ArrivalHistogram",
    "EnsembleResult",
    "sample_initial",
    "sg_outcome",
    "run_ensemble",
    "arrival_distribution",
    "empirical_tau_max",
    "classify",
    "calibrate_classifier",
    "ks_statistic",
    "ks_null_bound",
    "equivariance_check",
    "flash_eta",
    "longitudinal_tau_cdf",
    "histogram_csv_text",
    "write_histogram_csv",
    "set_threads",
]


class DistributionClass(enum.Enum):
    EXOTIC = "exotic"
    HEAVY_TAILED = "heavy_tailed"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ClassifierConfig:
    """Decision rule for the arrival-time distribution class.

    A histogram is EXOTIC when the mass beyond tau_c (arrivals past the
    cutoff plus the no-arrival fraction) is below theta/10, HEAVY_TAILED when
    it reaches theta, INDETERMINATE in between.
    """

    tau_c: float
    theta: float = 0.0035
    n_min: int = 1000

    def __post_init__(self) -> None:
        if self.tau_c <= 0.0:
            raise ValueError("tau_c must be > 0")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must be in (0, 1)")
        if self.n_min < 1:
            raise ValueError("n_min must be >= 1")


@dataclass(frozen=True)
class ArrivalHistogram:
    """Ensemble arrival-time statistics.

    raw_taus retains the exact arrival times (classification uses these; bins
    are presentation only).  Conservation: counts + overflow + no-arrival
    equals the ensemble size.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    n_total: int
    n_no_arrival: int
    n_overflow: int = 0
    raw_taus: np.ndarray | None = None

    def __post_init__(self) -> None:
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0.0):
            raise ValueError("bin_edges must be strictly increasing")
        if counts.shape != (edges.size - 1,) or np.any(counts < 0):
            raise ValueError("counts must be non-negative, one per bin")
        if self.n_no_arrival < 0 or self.n_overflow < 0:
            raise ValueError("counts must be non-negative")
        if int(counts.sum()) + self.n_no_arrival + self.n_overflow != self.n_total:
            raise ValueError("histogram does not conserve the ensemble size")


@dataclass(frozen=True)
class EnsembleResult:
    """Per-trajectory outputs of an ensemble integration."""

    taus: np.ndarray       # nan where no arrival
    min_vz: np.ndarray
    rho_drift: np.ndarray
    status: np.ndarray     # _kernels.ARRIVED / NO_ARRIVAL
    wall_contact: np.ndarray
    outcomes: np.ndarray | None = None  # remote outcomes, AliceFirst only

    @property
    def arrived(self) -> np.ndarray:
        return self.status == _kernels.ARRIVED

    @property
    def n_no_arrival(self) -> int:
        return int(np.sum(self.status == _kernels.NO_ARRIVAL))


def set_threads(n: int) -> None:
    """Bound the compiled-kernel parallelism (1 <= n <= machine threads)."""
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_initial(
    m: WaveguideModel, rng: np.random.Generator, size: int | None = None
):
    """Draw initial positions from |Psi_0|^2.

    x, y are independent Gaussians with variance 1/(2 omega).  z follows the
    longitudinal marginal: (4/sqrt(pi)) z^2 e^{-z^2} in half-oscillator mode
    (drawn exactly as sqrt of a Gamma(3/2) variate) and a half-normal via
    inverse CDF in truncated-Gaussian mode.
    """
    n = 1 if size is None else int(size)
    if n < 1:
        raise ValueError("size must be >= 1")
    sd = 1.0 / math.sqrt(2.0 * m.omega)
    xy = rng.normal(0.0, sd, size=(n, 2))
    if m.z_mode == HALF_OSCILLATOR:
        z = np.sqrt(rng.standard_gamma(1.5, size=n))
    else:
        from scipy.special import erfinv

        z = erfinv(rng.random(n))
    # keep the support strictly inside z > 0 (guards the measure-zero draw)
    z = np.maximum(z, np.finfo(float).tiny)
    out = np.column_stack([xy, z])
    return out[0] if size is None else out


def sg_outcome(rng: np.random.Generator, size: int | None = None):
    """Spin outcome +1 or -1 with probability 1/2 each."""
    out = np.where(rng.random(1 if size is None else int(size)) < 0.5, 1, -1)
    return int(out[0]) if size is None else out.astype(np.int64)


def _child_rngs(seed: int, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


# ---------------------------------------------------------------------------
# ensemble integration
# ---------------------------------------------------------------------------

def _kernel_args(m: WaveguideModel, scenario: Scenario, n: int, out_rng):
    conv = _kernels.CONV_DISPERSIVE if m.conv_mode == DISPERSIVE else _kernels.CONV_CONSTK
    zm = _kernels.ZM_HALF if m.z_mode == HALF_OSCILLATOR else _kernels.ZM_TRUNC
    if isinstance(scenario, BobFirst):
        return conv, zm, False, np.zeros(3), np.zeros(n), None
    axis = scenario.axis.unit
    if scenario.outcome is None:
        outcomes = sg_outcome(out_rng, n)
    else:
        outcomes = np.full(n, scenario.outcome, dtype=np.int64)
    # singlet anti-correlation: the guided particle carries -outcome
    return conv, zm, True, axis, -outcomes.astype(float), outcomes


def run_ensemble(
    m: WaveguideModel,
    scenario: Scenario,
    n: int,
    seed: int,
    cfg: IntegratorConfig | None = None,
) -> EnsembleResult:
    """Integrate n independent trajectories of a scenario field."""
    if n < 1:
        raise ValueError("ensemble size must be >= 1")
    cfg = cfg or IntegratorConfig()
    pos_rng, out_rng = _child_rngs(seed, 2)
    x0s = sample_initial(m, pos_rng, n)
    conv, zm, has_spin, axis, sigs, outcomes = _kernel_args(m, scenario, n, out_rng)

    taus = np.empty(n)
    min_vzs = np.empty(n)
    drifts = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    walls = np.zeros(n, dtype=np.bool_)
    _kernels.integrate_batch(
        conv, zm, has_spin, m.omega, m.k2, axis[0], axis[1], axis[2],
        m.L, cfg.dt, cfg.t_max, cfg.crossing_tol, cfg.speed_limit,
        np.ascontiguousarray(x0s, dtype=float), sigs,
        taus, min_vzs, drifts, status, walls,
    )
    if np.any(status == _kernels.BLOWUP):
        idx = int(np.flatnonzero(status == _kernels.BLOWUP)[0])
        raise FieldBlowupError(f"velocity bound exceeded on trajectory {idx}")
    return EnsembleResult(taus, min_vzs, drifts, status, walls, outcomes)


def arrival_distribution(
    m: WaveguideModel,
    scenario: Scenario,
    n: int,
    seed: int,
    cfg: IntegratorConfig | None = None,
    bins: int | Sequence[float] = 200,
) -> ArrivalHistogram:
    """Ensemble arrival-time histogram for a scenario.

    ``bins`` is either a bin count (uniform edges spanning the recorded
    arrivals) or explicit increasing edges; arrivals outside explicit edges
    are recorded as overflow.
    """
    res = run_ensemble(m, scenario, n, seed, cfg)
    taus = res.taus[res.arrived]
    if isinstance(bins, (int, np.integer)):
        hi = float(taus.max()) if taus.size else (cfg.t_max if cfg else IntegratorConfig().t_max)
        edges = np.linspace(0.0, max(hi, 1e-9), int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(taus, edges)
    overflow = int(taus.size - counts.sum())
    return ArrivalHistogram(
        bin_edges=edges,
        counts=counts,
        n_total=n,
        n_no_arrival=res.n_no_arrival,
        n_overflow=overflow,
        raw_taus=taus,
    )


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def empirical_tau_max(h: ArrivalHistogram) -> float:
    """Largest recorded arrival time."""
    if h.raw_taus is None:
        raise ValueError("histogram does not retain raw arrival times")
    if h.raw_taus.size == 0:
        raise NoArrivalsError("no arrivals recorded")
    return float(h.raw_taus.max())


def tail_mass(h: ArrivalHistogram, tau_c: float) -> float:
    """Fraction of the ensemble beyond tau_c, no-arrivals included."""
    if h.raw_taus is None:
        raise ValueError("histogram does not retain raw arrival times")
    return (int(np.sum(h.raw_taus > tau_c)) + h.n_no_arrival) / h.n_total


def classify(h: ArrivalHistogram, c: ClassifierConfig) -> DistributionClass:
    """Tail-mass decision rule with a hard indeterminate band."""
    if h.n_total < c.n_min:
        raise TooFewSamplesError(f"n_total = {h.n_total} < n_min = {c.n_min}")
    mass = tail_mass(h, c.tau_c)
    if mass < c.theta / 10.0:
        return DistributionClass.EXOTIC
    if mass >= c.theta:
        return DistributionClass.HEAVY_TAILED
    return DistributionClass.INDETERMINATE


def calibrate_classifier(
    m: WaveguideModel,
    cfg: IntegratorConfig | None,
    n_cal: int,
    seed: int,
    theta: float = 0.0035,
    n_min: int = 1000,
) -> ClassifierConfig:
    """Fix tau_c from reference ensembles of both distribution types.

    Runs a transverse remote-first ensemble and a longitudinal (release-first)
    ensemble; sets tau_c = 1.1 x the transverse empirical maximum and demands
    the longitudinal mass beyond it reach 5*theta, else the two references do
    not separate and InsufficientSeparationError is raised.
    """
    if n_cal < 1000:
        raise ValueError("n_cal must be >= 1000")
    trans = arrival_distribution(m, AliceFirst(SpinAxis.x()), n_cal, _derive_seed(seed, 1), cfg)
    longi = arrival_distribution(m, BobFirst(), n_cal, _derive_seed(seed, 2), cfg)
    tau_c = 1.1 * empirical_tau_max(trans)
    margin = tail_mass(longi, tau_c)
    if margin < 5.0 * theta:
        raise InsufficientSeparationError(
            f"longitudinal tail mass {margin:.4f} beyond tau_c = {tau_c:.3f} "
            f"is below 5*theta = {5.0 * theta:.4f}"
        )
    return ClassifierConfig(tau_c=tau_c, theta=theta, n_min=n_min)


def _derive_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def ks_statistic(a, b) -> float:
    """Kolmogorov-Smirnov sup distance.

    ``b`` is either a second sample (two-sample statistic) or a callable CDF.
    """
    a = np.sort(np.asarray(a, dtype=float))
    if a.size == 0:
        raise EmptySampleError("first sample is empty")
    n = a.size
    if callable(b):
        f = np.asarray(b(a), dtype=float)
        up = np.arange(1, n + 1) / n - f
        dn = f - np.arange(0, n) / n
        return float(max(up.max(), dn.max()))
    b = np.sort(np.asarray(b, dtype=float))
    if b.size == 0:
        raise EmptySampleError("second sample is empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / n
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def ks_null_bound(n: int, m: int | None = None, alpha: float = 0.0027) -> float:
    """Asymptotic KS quantile at level alpha (default ~3 sigma two-sided)."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    if m is None:
        return c / math.sqrt(n)
    return c * math.sqrt((n + m) / (n * m))


def equivariance_check(
    m: WaveguideModel,
    t_check: float,
    n: int,
    seed: int,
    cfg: IntegratorConfig | None = None,
) -> float:
    """KS distance between the evolved ensemble and the dispersed marginal.

    Samples initial z-coordinates from the longitudinal marginal, transports
    them under the convective field to t_check, and compares against the
    analytic profile with width scaled by sqrt(1 + t_check^2).
    """
    if t_check < 0.0:
        raise ValueError("t_check must be >= 0")
    if m.conv_mode != DISPERSIVE:
        raise ModeError("equivariance oracle requires the dispersing packet")
    cfg = cfg or IntegratorConfig()
    (pos_rng,) = _child_rngs(seed, 1)
    z0 = sample_initial(m, pos_rng, n)[:, 2]
    if t_check == 0.0:
        z_t = z0
    else:
        z_t = _kernels.evolve_axial(_kernels.CONV_DISPERSIVE, m.k2, z0, t_check, cfg.dt)
    return ks_statistic(z_t, lambda z: z_marginal_cdf(m, z, t_check))


def flash_eta(n_px: int, n_mx: int, n_pz: int, n_mz: int) -> float:
    """Four-channel contrast statistic of the historical cloning proposal.

    eta = (1 + |n_px - n_mx|/(n_px + n_mx) - |n_pz - n_mz|/(n_pz + n_mz)) / 2.
    """
    for v in (n_px, n_mx, n_pz, n_mz):
        if v < 0:
            raise ValueError("channel counts must be >= 0")
    if n_px + n_mx == 0 or n_pz + n_mz == 0:
        raise EmptyChannelPairError("a channel pair has zero total counts")
    cx = abs(n_px - n_mx) / (n_px + n_mx)
    cz = abs(n_pz - n_mz) / (n_pz + n_mz)
    return 0.5 * (1.0 + cx - cz)


def longitudinal_tau_cdf(m: WaveguideModel, tau, horizon: float | None = None):
    """Analytic pushforward of the z-marginal through tau(Z0) = sqrt((L/Z0)^2 - 1).

    This is the arrival-law oracle for purely convective axial motion
    Z(t) = Z0 sqrt(1 + t^2).  With ``horizon`` the law is conditioned on
    arrival within the horizon.
    """
    if m.conv_mode != DISPERSIVE:
        raise ModeError("pushforward oracle requires the dispersing packet")
    tau = np.asarray(tau, dtype=float)
    f = 1.0 - z_marginal_cdf(m, m.L / np.sqrt(1.0 + tau**2))
    if horizon is not None:
        f = f / (1.0 - z_marginal_cdf(m, m.L / math.sqrt(1.0 + horizon**2)))
    return f if f.ndim else float(f)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def histogram_csv_text(h: ArrivalHistogram) -> str:
    """CSV rows tau_lo,tau_hi,count plus overflow and no_arrival footers."""
    lines = ["tau_lo,tau_hi,count"]
    for i in range(h.counts.size):
        lines.append(f"{_fmt(h.bin_edges[i])},{_fmt(h.bin_edges[i + 1])},{int(h.counts[i])}")
    lines.append(f"overflow,,{h.n_overflow}")
    lines.append(f"no_arrival,,{h.n_no_arrival}")
    return "\n".join(lines) + "\n"


def write_histogram_csv(h: ArrivalHistogram, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(histogram_csv_text(h))
