"""End-to-end orchestration: model fitting, threshold design, QoS curves,
and seeded key-agreement simulation over a device population."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fcs
from .data_io import Device, DevicePopulation
from .models import (CoefficientModel, DEFAULT_RANGE_MARGIN, OutOfModelError,
                     equalize, fit_coefficient_models)
from .quantizer import (QuantizerSpec, correctness_probability, design_boundaries,
                        elimination_ratio, quantize_ignoring_elimination,
                        quantize_with_qos, usable_percent)
from .transforms import TransformMatrix, forward_2d, population_coefficients


class InfeasiblePlanError(ValueError):
    """No coefficient satisfies the design thresholds."""


DEFAULT_GRID_POINTS = 101


def fit_models(population: DevicePopulation, transform: TransformMatrix,
               margin: float = DEFAULT_RANGE_MARGIN) -> dict[int, CoefficientModel]:
    """Fit equalized coefficient models (with noise) for a population."""
    enrollment, per_device = population_coefficients(population, transform)
    return fit_coefficient_models(enrollment, per_device, margin=margin)


@dataclass(frozen=True)
class CoefficientAssignment:
    """Operating point chosen for one coefficient; bits = 0 means unused."""

    index: int
    bits: int
    delta: float = 0.0
    correctness: float = math.nan
    usable: float = math.nan

    @property
    def used(self) -> bool:
        return self.bits > 0


@dataclass(frozen=True)
class QuantizationPlan:
    """Per-coefficient bit counts and QoS windows, ordered by index."""

    assignments: tuple[CoefficientAssignment, ...]

    @property
    def used(self) -> tuple[CoefficientAssignment, ...]:
        return tuple(a for a in self.assignments if a.used)

    @property
    def total_bits(self) -> int:
        return sum(a.bits for a in self.used)

    @property
    def global_delta(self) -> float:
        """The guaranteed QoS level: minimum delta over used coefficients."""
        return min(a.delta for a in self.used)


def _smallest_feasible_delta(model: CoefficientModel, spec: QuantizerSpec,
                             deltas: np.ndarray, beta_min: float,
                             pc_min: float) -> CoefficientAssignment | None:
    """Smallest grid delta meeting both thresholds, or None.

    P_c is non-decreasing and beta non-increasing in delta, so the smallest
    delta reaching the correctness threshold is found by bisection and the
    usable-percentage threshold is checked there.
    """
    sigma = model.sigma_noise

    def p_c(i):
        return correctness_probability(spec, sigma, deltas[i])

    if p_c(len(deltas) - 1) < pc_min:
        return None
    lo, hi = 0, len(deltas) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if p_c(mid) >= pc_min:
            hi = mid
        else:
            lo = mid + 1
    delta = float(deltas[lo])
    beta = usable_percent(spec, delta)
    if beta < beta_min:
        return None
    return CoefficientAssignment(index=model.index, bits=spec.m, delta=delta,
                                 correctness=p_c(lo), usable=beta)


def threshold_design(models: dict[int, CoefficientModel], m_candidates,
                     beta_min: float, pc_min: float,
                     grid_points: int = DEFAULT_GRID_POINTS) -> QuantizationPlan:
    """Assign each coefficient the largest feasible bit count.

    For every coefficient, the largest candidate m admitting a delta with
    P_c >= pc_min and beta >= beta_min wins; its delta is the smallest such
    value on the grid (preserving the most devices). Coefficients with no
    feasible m are marked unused. Raises when the whole plan comes out
    empty.
    """
    if not 0.0 <= beta_min <= 100.0:
        raise ValueError("beta_min must lie in [0, 100]")
    if not 0.0 <= pc_min <= 1.0:
        raise ValueError("pc_min must lie in [0, 1]")
    candidates = sorted({int(m) for m in m_candidates}, reverse=True)
    if not candidates or candidates[-1] < 1:
        raise ValueError("m_candidates must contain positive integers")
    if grid_points < 2:
        raise ValueError("grid must have at least 2 points")

    assignments = []
    for j in sorted(models):
        model = models[j]
        if model.sigma_noise is None:
            raise ValueError(f"coefficient {j}: sigma_noise missing; fit noise first")
        chosen = None
        for m in candidates:
            spec = design_boundaries(model, m)
            deltas = np.linspace(0.0, spec.min_interval_width, grid_points)
            chosen = _smallest_feasible_delta(model, spec, deltas, beta_min, pc_min)
            if chosen is not None:
                break
        assignments.append(chosen if chosen is not None
                           else CoefficientAssignment(index=j, bits=0))
    plan = QuantizationPlan(assignments=tuple(assignments))
    if not plan.used:
        raise InfeasiblePlanError("empty plan: no coefficient satisfies both thresholds")
    return plan


@dataclass(frozen=True)
class QosPoint:
    delta: float
    gamma: float
    beta_percent: float
    p_c: float


def qos_curve(model: CoefficientModel, m: int,
              grid_points: int = DEFAULT_GRID_POINTS,
              deltas=None) -> tuple[QosPoint, ...]:
    """Sweep delta over its allowed range for one coefficient and bit count.

    Each row comes from the same single-point calls a caller would make:
    elimination ratio, usable percentage, and correctness probability.
    """
    if model.sigma_noise is None:
        raise ValueError(f"coefficient {model.index}: sigma_noise missing")
    spec = design_boundaries(model, m)
    if deltas is None:
        deltas = np.linspace(0.0, spec.min_interval_width, grid_points)
    return tuple(
        QosPoint(
            delta=float(d),
            gamma=elimination_ratio(spec, d),
            beta_percent=usable_percent(spec, d),
            p_c=correctness_probability(spec, model.sigma_noise, d),
        )
        for d in deltas
    )


QOS_CSV_HEADER = "coefficient,m,delta,gamma,beta_percent,p_c"


def save_qos_csv(path, curves: dict[tuple[int, int], tuple[QosPoint, ...]]) -> None:
    """Write QoS curves: one row per (coefficient, m, delta), sorted keys."""
    lines = [QOS_CSV_HEADER]
    for (j, m) in sorted(curves):
        for pt in curves[(j, m)]:
            lines.append(f"{j},{m},{pt.delta!r},{pt.gamma!r},{pt.beta_percent!r},{pt.p_c!r}")
    Path(path).write_text("\n".join(lines) + "\n")


PLAN_CSV_HEADER = "coefficient,m,delta,p_c,beta_percent"


def save_plan(path, plan: QuantizationPlan) -> None:
    lines = [f"# global_delta={plan.global_delta!r}", PLAN_CSV_HEADER]
    for a in plan.assignments:
        if a.used:
            lines.append(f"{a.index},{a.bits},{a.delta!r},{a.correctness!r},{a.usable!r}")
        else:
            lines.append(f"{a.index},0,,,")
    Path(path).write_text("\n".join(lines) + "\n")


def load_plan(path) -> QuantizationPlan:
    assignments = []
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    for row in reader:
        bits = int(row["m"])
        if bits > 0:
            assignments.append(CoefficientAssignment(
                index=int(row["coefficient"]), bits=bits, delta=float(row["delta"]),
                correctness=float(row["p_c"]), usable=float(row["beta_percent"]),
            ))
        else:
            assignments.append(CoefficientAssignment(index=int(row["coefficient"]), bits=0))
    if not assignments:
        raise ValueError(f"{path}: no plan rows")
    return QuantizationPlan(assignments=tuple(assignments))


@dataclass(frozen=True)
class TrialRecord:
    """One enroll/reconstruct attempt; mirrors the trial-log CSV columns."""

    seed: int
    device_id: str
    accepted_bits: int
    flipped_bits: int | None
    decode_outcome: str  # decoded | failure | rejected
    key_match: bool
    per_coefficient_flips: tuple[tuple[int, int], ...] = ()


def _plan_specs(plan: QuantizationPlan,
                models: dict[int, CoefficientModel]) -> list[tuple[CoefficientAssignment, QuantizerSpec]]:
    specs = []
    for a in plan.used:
        if a.index not in models:
            raise ValueError(f"plan uses coefficient {a.index} but no model was fitted")
        specs.append((a, design_boundaries(models[a.index], a.bits).with_delta(a.delta)))
    return specs


def key_agreement_trial(device: Device, transform: TransformMatrix,
                        models: dict[int, CoefficientModel], plan: QuantizationPlan,
                        code: fcs.LinearBlockCode, seed: int,
                        noisy_index: int = 1) -> TrialRecord:
    """Run one enroll/reconstruct round for a device, deterministic per seed.

    Enrollment coefficients pass through the QoS quantizer; any eliminated
    or out-of-model coefficient rejects the whole device (a distinct
    outcome, not an error). The noisy measurement is quantized without
    elimination, the key is drawn uniformly from the seeded generator, and
    the decoder output is compared against it.
    """
    specs = _plan_specs(plan, models)
    if code.n > plan.total_bits:
        raise ValueError(
            f"code blocklength {code.n} exceeds the plan's {plan.total_bits} bits"
        )
    enroll_grid = forward_2d(transform, device.measurements[0])
    noisy_grid = forward_2d(transform, device.measurements[noisy_index])

    x_bits: list[str] = []
    y_bits: list[str] = []
    flips: list[tuple[int, int]] = []
    accepted_bits = 0
    rejected = False
    for assign, spec in specs:
        model = models[assign.index]
        try:
            t_enroll = equalize(enroll_grid.coefficient(assign.index), model)
        except OutOfModelError:
            rejected = True
            continue
        outcome = quantize_with_qos(t_enroll, spec)
        if outcome.eliminated:
            rejected = True
            continue
        accepted_bits += assign.bits
        t_noisy = (noisy_grid.coefficient(assign.index) - model.mu_orig) / model.sigma_orig
        _, noisy_label = quantize_ignoring_elimination(t_noisy, spec)
        x_bits.append(outcome.bits)
        y_bits.append(noisy_label)
        flips.append((assign.index,
                      sum(a != b for a, b in zip(outcome.bits, noisy_label))))

    if rejected:
        return TrialRecord(seed=seed, device_id=device.device_id,
                           accepted_bits=accepted_bits, flipped_bits=None,
                           decode_outcome="rejected", key_match=False)

    x = fcs.as_bits("".join(x_bits))[: code.n]
    y = fcs.as_bits("".join(y_bits))[: code.n]
    rng = np.random.default_rng(seed)
    key = rng.integers(0, 2, size=code.k).astype(np.uint8)
    helper = fcs.enroll(x, key, code)
    decoded = fcs.reconstruct(helper, y, code)
    if decoded is None:
        outcome_name, match = "failure", False
    else:
        match = bool(np.array_equal(decoded, key))
        outcome_name = "decoded"
    return TrialRecord(seed=seed, device_id=device.device_id,
                       accepted_bits=accepted_bits,
                       flipped_bits=int(np.sum(x != y)),
                       decode_outcome=outcome_name, key_match=match,
                       per_coefficient_flips=tuple(flips))


@dataclass(frozen=True)
class SimulationSummary:
    num_trials: int
    rejected: int
    key_errors: int
    decode_failures: int
    flips_by_coefficient: dict[int, int]

    @property
    def rejection_rate(self) -> float:
        return self.rejected / self.num_trials if self.num_trials else math.nan

    @property
    def key_error_rate(self) -> float:
        attempted = self.num_trials - self.rejected
        return self.key_errors / attempted if attempted else math.nan


def simulate_population(population: DevicePopulation, transform: TransformMatrix,
                        models: dict[int, CoefficientModel], plan: QuantizationPlan,
                        code: fcs.LinearBlockCode,
                        base_seed: int) -> tuple[list[TrialRecord], SimulationSummary]:
    """One trial per (device, noisy measurement); trial i uses seed base+i."""
    if plan.total_bits > code.n:
        warnings.warn(
            f"plan provides {plan.total_bits} bits; only the first {code.n} "
            "(ascending coefficient order) are used"
        )
    records = []
    counter = 0
    for device in population.devices:
        for noisy_index in range(1, len(device.measurements)):
            records.append(key_agreement_trial(
                device, transform, models, plan, code,
                seed=base_seed + counter, noisy_index=noisy_index,
            ))
            counter += 1
    if not records:
        raise ValueError("population has no noisy measurements to simulate")
    flips: dict[int, int] = {}
    for rec in records:
        for j, f in rec.per_coefficient_flips:
            flips[j] = flips.get(j, 0) + f
    summary = SimulationSummary(
        num_trials=len(records),
        rejected=sum(r.decode_outcome == "rejected" for r in records),
        key_errors=sum(r.decode_outcome != "rejected" and not r.key_match
                       for r in records),
        decode_failures=sum(r.decode_outcome == "failure" for r in records),
        flips_by_coefficient=dict(sorted(flips.items())),
    )
    return records, summary


TRIAL_CSV_HEADER = "seed,device_id,accepted_bits,flipped_bits,decode_outcome,key_match"


def save_trial_log(path, records) -> None:
    lines = [TRIAL_CSV_HEADER]
    for r in records:
        flipped = "" if r.flipped_bits is None else str(r.flipped_bits)
        lines.append(f"{r.seed},{r.device_id},{r.accepted_bits},{flipped},"
                     f"{r.decode_outcome},{int(r.key_match)}")
    Path(path).write_text("\n".join(lines) + "\n")
