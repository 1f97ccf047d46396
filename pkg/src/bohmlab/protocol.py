"""EPRB runs against a hidden ground-truth foliation.

One run distributes n_pairs singlet pairs between a remote spin station and
the waveguide station, selects the guiding scenario from the temporal order
of the two measurement events relative to the hidden foliation, and reports
only the observed arrival-time distribution class.  The inference machinery
(switch-point search over the waveguide distance, normal recovery, bit
decoding) consumes nothing but those observed classes: the ground truth stays
behind the ``temporal_order`` oracle interface.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .ensemble import (
    ClassifierConfig,
    DistributionClass,
    arrival_distribution,
    classify,
    _derive_seed,
)
from .errors import (
    CannotEstablishOrderError,
    DegenerateTriadError,
    IndeterminateRunError,
    NoBracketError,
    NotCalibratedError,
    ProtocolError,
    SimultaneousAmbiguousError,
)
from .fields import AliceFirst, BobFirst, SpinAxis, WaveguideModel
from .spacetime import (
    BoostSpec,
    Event4,
    FoliationNormal,
    SimultaneousPair,
    TemporalOrder,
    check_triad_independence,
    minkowski_dot,
    rapidity_between,
    solve_normal,
    temporal_order,
)
from .trajectories import IntegratorConfig

__all__ = [
    "SCENARIO_TOL",
    "LabGeometry",
    "HiddenFoliation",
    "RunRecord",
    "SearchConfig",
    "FoliationReport",
    "SignalReport",
    "aggregate_events",
    "simulate_run",
    "switch_search",
    "detect_foliation",
    "calibrate_signaling",
    "transmit_bits",
    "standard_geometry",
    "default_orientations",
]

#: default simultaneity tolerance below which a run is rejected as ambiguous
SCENARIO_TOL = 1e-9


@dataclass(frozen=True)
class LabGeometry:
    """Source-centered run geometry in the common lab frame.

    Transit times are dist/particle_speed; the spin station's event adds the
    fixed magnet traversal offset.  The waveguide station slides along
    ``bob_dir`` within ``bob_range``; measurement events must stay spacelike
    separated over the whole range (the interval is concave quadratic in the
    distance, so checking the range endpoints suffices).
    """

    source_pos: np.ndarray
    alice_dir: np.ndarray
    bob_dir: np.ndarray
    alice_dist: float
    bob_dist: float
    particle_speed: float
    bob_range: tuple[float, float] = (4.0, 20.0)
    orientation_id: str = "orient-0"
    magnet_offset: float = 0.2
    calibrated: bool = False

    def __post_init__(self) -> None:
        for name in ("source_pos", "alice_dir", "bob_dir"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)
        for name in ("alice_dir", "bob_dir"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a unit vector")
        if self.alice_dist <= 0.0 or self.bob_dist <= 0.0:
            raise ValueError("distances must be > 0")
        if not 0.0 < self.particle_speed < 1.0:
            raise ValueError("particle_speed must be in (0, 1)")
        d_min, d_max = self.bob_range
        if not 0.0 < d_min < d_max:
            raise ValueError("bob_range must satisfy 0 < d_min < d_max")
        if not d_min <= self.bob_dist <= d_max:
            raise ValueError("bob_dist must lie within bob_range")
        if self.magnet_offset < 0.0:
            raise ValueError("magnet_offset must be >= 0")
        for d in self.bob_range:
            sep = np.asarray(self.event_a()) - np.asarray(self._event_b_at(d))
            if minkowski_dot(sep, sep) >= 0.0:
                raise ValueError(
                    f"events not spacelike separated at bob_dist = {d}"
                )

    def event_a(self) -> Event4:
        """Spin-measurement completion: magnet exit of the remote particle."""
        t = self.alice_dist / self.particle_speed + self.magnet_offset
        p = self.source_pos + self.alice_dist * self.alice_dir
        return Event4(t, float(p[0]), float(p[1]), float(p[2]))

    def _event_b_at(self, d: float) -> Event4:
        t = d / self.particle_speed
        p = self.source_pos + d * self.bob_dir
        return Event4(t, float(p[0]), float(p[1]), float(p[2]))

    def event_b(self) -> Event4:
        """Release of the guided particle inside the waveguide."""
        return self._event_b_at(self.bob_dist)

    def with_bob_dist(self, d: float) -> "LabGeometry":
        return replace(self, bob_dist=float(d))


@dataclass(frozen=True)
class HiddenFoliation:
    """Ground-truth foliation, consulted only through ``temporal_order``."""

    n_true: FoliationNormal

    @classmethod
    def from_boost(cls, beta) -> "HiddenFoliation":
        return cls(FoliationNormal.from_boost(BoostSpec.from_vector(beta)))

    def temporal_order(self, a: Event4, b: Event4, tol: float) -> TemporalOrder:
        return temporal_order(self.n_true, a, b, tol)


@dataclass(frozen=True)
class RunRecord:
    """Observable outcome of one run (the scenario itself is not recorded)."""

    event_a: Event4
    event_b: Event4
    alice_axis: SpinAxis
    observed: DistributionClass
    n_pairs: int


@dataclass(frozen=True)
class SearchConfig:
    """Switch-point search parameters."""

    d_min: float = 4.0
    d_max: float = 20.0
    d_tol: float = 1e-3
    n_pairs: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if not 0.0 < self.d_tol < self.d_max - self.d_min:
            raise ValueError("need 0 < d_tol < d_max - d_min")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")


@dataclass(frozen=True)
class FoliationReport:
    """Recovered normal with diagnostics from three orientation searches."""

    pairs: tuple[SimultaneousPair, ...]
    recovered: FoliationNormal
    angular_error_vs_truth: float | None
    iterations_per_orientation: tuple[int, ...]


@dataclass(frozen=True)
class SignalReport:
    """Decoded bit string with erasure bookkeeping."""

    sent_bits: tuple[int, ...]
    decoded_bits: tuple[int | None, ...]
    erasures: tuple[int, ...]
    bit_error_rate: float

    def __post_init__(self) -> None:
        if len(self.sent_bits) != len(self.decoded_bits):
            raise ValueError("sent and decoded bit lists must have equal length")
        if not 0.0 <= self.bit_error_rate <= 1.0:
            raise ValueError("bit_error_rate must be in [0, 1]")


def aggregate_events(times: Sequence[float], pos) -> Event4:
    """Collapse a measurement sequence to its central space-time point."""
    if len(times) == 0:
        raise ValueError("times must be non-empty")
    p = np.asarray(pos, dtype=float)
    return Event4(float(np.mean(np.asarray(times, dtype=float))),
                  float(p[0]), float(p[1]), float(p[2]))


def simulate_run(
    g: LabGeometry,
    hf: HiddenFoliation,
    axis: SpinAxis,
    n_pairs: int,
    seed: int,
    classifier: ClassifierConfig,
    *,
    model: WaveguideModel | None = None,
    integrator: IntegratorConfig | None = None,
    scenario_tol: float = SCENARIO_TOL,
) -> RunRecord:
    """One EPRB run: scenario from the hidden temporal order, class observed.

    The ground truth is consulted only to select the guiding scenario; the
    returned record carries the observed classification, never the order.
    Runs whose events fall within ``scenario_tol`` of simultaneity are
    rejected so a single order holds for every pair of the run.
    """
    model = model or WaveguideModel()
    a, b = g.event_a(), g.event_b()
    order = hf.temporal_order(a, b, scenario_tol)
    if order is TemporalOrder.SIMULTANEOUS:
        raise SimultaneousAmbiguousError(
            f"events within {scenario_tol} of simultaneity at bob_dist = {g.bob_dist}"
        )
    scenario = AliceFirst(axis) if order is TemporalOrder.ALICE_FIRST else BobFirst()
    h = arrival_distribution(model, scenario, n_pairs, seed, integrator)
    return RunRecord(a, b, axis, classify(h, classifier), n_pairs)


def _classified_run(
    g: LabGeometry,
    hf: HiddenFoliation,
    d: float,
    run_idx: int,
    cfg: SearchConfig,
    classifier: ClassifierConfig,
    model: WaveguideModel | None,
    integrator: IntegratorConfig | None,
    scenario_tol: float,
) -> tuple[RunRecord, float]:
    """Run at waveguide distance d with the protocol's retry rules.

    Near-simultaneous runs are retried at slightly perturbed distances; an
    indeterminate classification escalates n_pairs by 4x once, then aborts.
    """
    last_ambiguous: Exception | None = None
    for bump in (0.0, 0.1, -0.1, 0.25, -0.25):
        d_used = min(max(d + bump * cfg.d_tol, cfg.d_min), cfg.d_max)
        try:
            rec = simulate_run(
                g.with_bob_dist(d_used), hf, SpinAxis.x(), cfg.n_pairs,
                _derive_seed(cfg.seed, run_idx), classifier,
                model=model, integrator=integrator, scenario_tol=scenario_tol,
            )
        except SimultaneousAmbiguousError as exc:
            last_ambiguous = exc
            continue
        if rec.observed is DistributionClass.INDETERMINATE:
            rec = simulate_run(
                g.with_bob_dist(d_used), hf, SpinAxis.x(), 4 * cfg.n_pairs,
                _derive_seed(cfg.seed, run_idx, 1), classifier,
                model=model, integrator=integrator, scenario_tol=scenario_tol,
            )
            if rec.observed is DistributionClass.INDETERMINATE:
                raise IndeterminateRunError(
                    f"run stayed indeterminate at bob_dist = {d_used} "
                    f"after escalating to {4 * cfg.n_pairs} pairs"
                )
        return rec, d_used
    raise SimultaneousAmbiguousError(
        f"could not escape the simultaneity band near bob_dist = {d}"
    ) from last_ambiguous


def switch_search(
    g: LabGeometry,
    hf: HiddenFoliation,
    cfg: SearchConfig,
    classifier: ClassifierConfig,
    *,
    model: WaveguideModel | None = None,
    integrator: IntegratorConfig | None = None,
    scenario_tol: float = SCENARIO_TOL,
) -> tuple[SimultaneousPair, int]:
    """Bisect the waveguide distance to the classification switch point.

    The spin axis is fixed transverse so the observed class is an order
    witness: exotic means the spin measurement came first (move closer),
    heavy-tailed means the release came first (move farther).  Returns the
    event pair of the final run and the midpoint-run count, which never
    exceeds ceil(log2((d_max - d_min)/d_tol)) + 1.
    """
    rec_lo, _ = _classified_run(g, hf, cfg.d_min, 0, cfg, classifier,
                                model, integrator, scenario_tol)
    rec_hi, _ = _classified_run(g, hf, cfg.d_max, 1, cfg, classifier,
                                model, integrator, scenario_tol)
    expected = (DistributionClass.HEAVY_TAILED, DistributionClass.EXOTIC)
    if (rec_lo.observed, rec_hi.observed) != expected:
        raise NoBracketError(
            f"no switch point in [{cfg.d_min}, {cfg.d_max}]: endpoints classify "
            f"({rec_lo.observed.value}, {rec_hi.observed.value})"
        )
    lo, hi = cfg.d_min, cfg.d_max
    last = rec_hi
    iterations = 0
    while hi - lo >= cfg.d_tol:
        mid = 0.5 * (lo + hi)
        last, d_used = _classified_run(g, hf, mid, 2 + iterations, cfg, classifier,
                                       model, integrator, scenario_tol)
        iterations += 1
        if last.observed is DistributionClass.EXOTIC:
            hi = d_used
        else:
            lo = d_used
    pair = SimultaneousPair(last.event_a, last.event_b, g.orientation_id)
    return pair, iterations


def detect_foliation(
    hf: HiddenFoliation,
    orientations: Sequence[LabGeometry],
    cfg: SearchConfig,
    classifier: ClassifierConfig,
    *,
    model: WaveguideModel | None = None,
    integrator: IntegratorConfig | None = None,
    scenario_tol: float = SCENARIO_TOL,
) -> FoliationReport:
    """Recover the foliation normal from three switch-point searches.

    Each orientation contributes one (approximately) simultaneous event pair;
    the three separations must span the tangent space of a leaf, and the
    normal is the Minkowski-orthogonal unit timelike direction.  The ground
    truth enters only the angular-error diagnostic, and only when the oracle
    exposes it.
    """
    if len(orientations) != 3:
        raise ValueError("exactly three orientations required")
    pairs: list[SimultaneousPair] = []
    iters: list[int] = []
    for k, geom in enumerate(orientations):
        ocfg = replace(cfg, seed=_derive_seed(cfg.seed, 100 + k))
        try:
            pair, n_it = switch_search(
                geom, hf, ocfg, classifier,
                model=model, integrator=integrator, scenario_tol=scenario_tol,
            )
        except ProtocolError as exc:
            raise type(exc)(f"[{geom.orientation_id}] {exc}") from exc
        pairs.append(pair)
        iters.append(n_it)
    seps = [p.separation for p in pairs]
    if not check_triad_independence(*seps):
        raise DegenerateTriadError(
            "switch-point separations are coplanar; pick independent orientations"
        )
    recovered = solve_normal(*seps)
    truth = getattr(hf, "n_true", None)
    angular = rapidity_between(recovered, truth) if truth is not None else None
    return FoliationReport(tuple(pairs), recovered, angular, tuple(iters))


def calibrate_signaling(
    g: LabGeometry,
    hf: HiddenFoliation,
    cfg: SearchConfig,
    classifier: ClassifierConfig,
    *,
    model: WaveguideModel | None = None,
    integrator: IntegratorConfig | None = None,
    scenario_tol: float = SCENARIO_TOL,
    confirm_runs: int = 5,
) -> LabGeometry:
    """Lock a geometry in which the spin measurement reliably comes first.

    Marches the waveguide outward until ``confirm_runs`` consecutive
    transverse runs all classify exotic, then returns the locked geometry.
    Raises CannotEstablishOrderError when the range is exhausted.
    """
    step = (cfg.d_max - cfg.d_min) / 8.0
    d = g.bob_dist
    attempt = 0
    while d <= cfg.d_max + 1e-12:
        confirmed = True
        for j in range(confirm_runs):
            rec, _ = _classified_run(
                g, hf, d, 10_000 + attempt * confirm_runs + j, cfg, classifier,
                model, integrator, scenario_tol,
            )
            if rec.observed is not DistributionClass.EXOTIC:
                confirmed = False
                break
        if confirmed:
            return replace(g, bob_dist=d, calibrated=True)
        d += step
        attempt += 1
    raise CannotEstablishOrderError(
        f"no spin-first region found within bob_range up to {cfg.d_max}"
    )


def transmit_bits(
    g: LabGeometry,
    hf: HiddenFoliation,
    bits: str | Sequence[int],
    n_pairs_per_bit: int,
    seed: int,
    classifier: ClassifierConfig,
    *,
    model: WaveguideModel | None = None,
    integrator: IntegratorConfig | None = None,
    scenario_tol: float = SCENARIO_TOL,
) -> SignalReport:
    """Send a bit string through the measurement-axis channel.

    Bit 0 selects the longitudinal axis (heavy-tailed law), bit 1 the
    transverse axis (exotic law); the receiver decodes by classification,
    flagging indeterminate runs as erasures.  Requires a calibrated geometry.
    """
    if not g.calibrated:
        raise NotCalibratedError("geometry was never calibrated to spin-first order")
    sent = _parse_bits(bits)
    decoded: list[int | None] = []
    erasures: list[int] = []
    for i, bit in enumerate(sent):
        axis = SpinAxis.z() if bit == 0 else SpinAxis.x()
        rec = simulate_run(
            g, hf, axis, n_pairs_per_bit, _derive_seed(seed, i), classifier,
            model=model, integrator=integrator, scenario_tol=scenario_tol,
        )
        if rec.observed is DistributionClass.HEAVY_TAILED:
            decoded.append(0)
        elif rec.observed is DistributionClass.EXOTIC:
            decoded.append(1)
        else:
            decoded.append(None)
            erasures.append(i)
    compared = [(s, d) for s, d in zip(sent, decoded) if d is not None]
    ber = (sum(1 for s, d in compared if s != d) / len(compared)) if compared else 0.0
    return SignalReport(tuple(sent), tuple(decoded), tuple(erasures), ber)


def _parse_bits(bits: str | Sequence[int]) -> list[int]:
    if isinstance(bits, str):
        if bits == "":
            raise ValueError("empty message")
        if any(c not in "01" for c in bits):
            raise ValueError(f"bits must be a 0/1 string, got {bits!r}")
        return [int(c) for c in bits]
    out = [int(b) for b in bits]
    if not out:
        raise ValueError("empty message")
    for b in out:
        if b not in (0, 1):
            raise ValueError(f"bits must be 0 or 1, got {b}")
    return out


def standard_geometry(
    arm_axis,
    bob_dist: float,
    *,
    alice_dist: float = 10.0,
    particle_speed: float = 0.5,
    bob_range: tuple[float, float] = (4.0, 20.0),
    magnet_offset: float = 0.2,
    orientation_id: str = "orient-0",
) -> LabGeometry:
    """Collinear two-arm geometry along ``arm_axis`` about the origin."""
    u = np.asarray(arm_axis, dtype=float)
    u = u / np.linalg.norm(u)
    return LabGeometry(
        source_pos=np.zeros(3),
        alice_dir=-u,
        bob_dir=u,
        alice_dist=alice_dist,
        bob_dist=bob_dist,
        particle_speed=particle_speed,
        bob_range=bob_range,
        orientation_id=orientation_id,
        magnet_offset=magnet_offset,
    )


def default_orientations(
    cfg: SearchConfig,
    *,
    particle_speed: float = 0.5,
    alice_dist: float = 10.0,
    magnet_offset: float = 0.2,
) -> list[LabGeometry]:
    """Three mutually orthogonal arm axes; separations are then independent."""
    start = 0.5 * (cfg.d_min + cfg.d_max)
    axes = (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
    return [
        standard_geometry(
            u,
            start,
            alice_dist=alice_dist,
            particle_speed=particle_speed,
            bob_range=(cfg.d_min, cfg.d_max),
            magnet_offset=magnet_offset,
            orientation_id=f"arm-{'xyz'[k]}",
        )
        for k, u in enumerate(axes)
    ]
