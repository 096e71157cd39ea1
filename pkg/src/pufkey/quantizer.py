"""Quantile-based uniform quantizers with Gray labels and QoS analysis.

Boundaries are placed at the quantiles of the fitted truncated Gaussian so
each interval carries equal probability mass. Realizations within delta/2
of an interior boundary are eliminated; the remaining accepted values get
worst-case and exact reliability numbers through the elimination ratio,
per-bit error probabilities, and the all-bits-correct probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .models import CoefficientModel, gaussian_pdf, q_function, q_inverse


class OutOfRangeError(ValueError):
    """An equalized value fell outside the quantizer's truncation bounds."""


class IntegrationError(RuntimeError):
    """Adaptive quadrature failed to converge."""


#: Absolute tolerance requested per sub-interval integral. Summed over the
#: at most 2^m sub-intervals this stays well inside the 1e-9 budget of the
#: reported probabilities.
_QUAD_EPSABS = 1e-12
_QUAD_EPSREL = 1e-10


def gray_label(k: int, m: int) -> str:
    """Binary-reflected Gray label of quantization interval k (1-based)."""
    if not 1 <= k <= 2 ** m:
        raise ValueError(f"interval index {k} outside [1, {2 ** m}]")
    g = (k - 1) ^ ((k - 1) >> 1)
    return format(g, f"0{m}b")


def gray_unlabel(bits: str) -> int:
    """Interval index (1-based) of a binary-reflected Gray label."""
    n = int(bits, 2)
    mask = n >> 1
    while mask:
        n ^= mask
        mask >>= 1
    return n + 1


@dataclass(frozen=True, eq=False)
class QuantizerSpec:
    """Equal-mass scalar quantizer for one equalized coefficient.

    ``boundaries`` holds b_0 .. b_{2^m} (strictly increasing; the first and
    last are the truncation bounds). ``delta`` is the elimination window
    width: values within delta/2 of an interior boundary are discarded.
    """

    m: int
    boundaries: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1; an unused coefficient has no quantizer")
        b = np.array(self.boundaries, dtype=float)
        if b.shape != (2 ** self.m + 1,):
            raise ValueError(f"expected {2 ** self.m + 1} boundaries for m={self.m}, got {b.shape}")
        if not np.all(np.diff(b) > 0.0):
            raise ValueError("boundaries must be strictly increasing")
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)
        if not 0.0 <= self.delta <= self.min_interval_width:
            raise ValueError(
                f"delta {self.delta} outside allowed range "
                f"[0, {self.min_interval_width}]"
            )

    @property
    def num_intervals(self) -> int:
        return 2 ** self.m

    @property
    def min_interval_width(self) -> float:
        """Upper end of the allowed delta range."""
        return float(np.min(np.diff(self.boundaries)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(gray_label(k, self.m) for k in range(1, self.num_intervals + 1))

    def with_delta(self, delta: float) -> "QuantizerSpec":
        return QuantizerSpec(self.m, self.boundaries, float(delta))

    def interval_of(self, t: float) -> int:
        """Index k with b_{k-1} < t <= b_k."""
        b = self.boundaries
        if not b[0] < t <= b[-1]:
            raise OutOfRangeError(f"value {t} outside ({b[0]}, {b[-1]}]")
        return int(np.searchsorted(b, t, side="left"))


@dataclass(frozen=True)
class QuantizationOutcome:
    """Either an accepted interval with its Gray label, or elimination."""

    eliminated: bool
    interval: int | None = None
    bits: str | None = None

    @property
    def accepted(self) -> bool:
        return not self.eliminated


def design_boundaries(model: CoefficientModel, m: int) -> QuantizerSpec:
    """Boundaries at the quantiles of the fitted truncated Gaussian.

    Interior boundary k sits where the truncated distribution has
    accumulated mass k/2^m, so every interval carries mass exactly 1/2^m.
    """
    if m < 1:
        raise ValueError("m must be >= 1 (m = 0 marks an unused coefficient)")
    b0, bmax = model.b0, model.bmax
    k = np.arange(1, 2 ** m)
    mix = q_function(b0) * (1.0 - k / 2 ** m) + q_function(bmax) * (k / 2 ** m)
    boundaries = np.concatenate([[b0], q_inverse(mix), [bmax]])
    return QuantizerSpec(m=m, boundaries=boundaries)


def quantize_with_qos(t: float, spec: QuantizerSpec) -> QuantizationOutcome:
    """Quantize an equalized coefficient, discarding boundary-adjacent values.

    The elimination window around each interior boundary is half-open on
    the right, (b - delta/2, b + delta/2], matching interval membership.
    """
    k = spec.interval_of(t)
    b = spec.boundaries
    if spec.delta > 0.0:
        half = spec.delta / 2.0
        if k >= 2 and t <= b[k - 1] + half:
            return QuantizationOutcome(eliminated=True)
        if k <= spec.num_intervals - 1 and t > b[k] - half:
            return QuantizationOutcome(eliminated=True)
    return QuantizationOutcome(False, k, gray_label(k, spec.m))


def quantize_ignoring_elimination(value: float, spec: QuantizerSpec) -> tuple[int, str]:
    """Quantize a (possibly noisy) value with no QoS window.

    Values beyond the truncation bounds clamp to the nearest extreme
    interval: a physical measurement always produces some label.
    """
    k = int(np.searchsorted(spec.boundaries, value, side="left"))
    k = min(max(k, 1), spec.num_intervals)
    return k, gray_label(k, spec.m)


def _check_delta(spec: QuantizerSpec, delta: float) -> float:
    delta = float(delta)
    if not 0.0 <= delta <= spec.min_interval_width:
        raise ValueError(
            f"delta {delta} outside allowed range [0, {spec.min_interval_width}]"
        )
    return delta


def elimination_ratio(spec: QuantizerSpec, delta: float) -> float:
    """Fraction of realizations discarded by the QoS windows.

    Ratio of the window mass around interior boundaries to the total mass
    of the truncation range.
    """
    delta = _check_delta(spec, delta)
    b = spec.boundaries
    interior = b[1:-1]
    total = q_function(b[0]) - q_function(b[-1])
    windows = np.sum(q_function(interior - delta / 2.0) - q_function(interior + delta / 2.0))
    return float(windows / total)


def usable_percent(spec: QuantizerSpec, delta: float) -> float:
    """Percentage of realizations that survive elimination."""
    return 100.0 * (1.0 - elimination_ratio(spec, delta))


def worst_case_error_1bit(delta: float, sigma_noise: float) -> float:
    """Worst accepted-realization bit error for 1-bit extraction.

    The closest an accepted value can sit to a boundary is delta/2, so the
    error probability is at most Q(delta / (2 sigma)); it equals 0.5 when
    delta = 0.
    """
    if sigma_noise <= 0.0:
        raise ValueError("sigma_noise must be positive")
    return float(q_function(delta / (2.0 * sigma_noise)))


def _capture_probabilities(spec: QuantizerSpec, t: float, sigma_noise: float) -> np.ndarray:
    """Probability that t plus Gaussian noise lands in each interval.

    Extreme intervals capture everything beyond the truncation bounds
    (clamped quantization), so the vector sums to 1.
    """
    b = spec.boundaries
    lower = np.concatenate([[-np.inf], b[1:-1]])
    upper = np.concatenate([b[1:-1], [np.inf]])
    return q_function((lower - t) / sigma_noise) - q_function((upper - t) / sigma_noise)


def marginal_bit_error(spec: QuantizerSpec, bit_index: int, t: float,
                       sigma_noise: float) -> float:
    """Probability that noise flips the given Gray-label bit of an accepted t.

    Sums the landing probabilities of all intervals whose label differs
    from t's in position ``bit_index`` (1-based).
    """
    if not 1 <= bit_index <= spec.m:
        raise ValueError(f"bit_index {bit_index} outside [1, {spec.m}]")
    if sigma_noise <= 0.0:
        raise ValueError("sigma_noise must be positive")
    outcome = quantize_with_qos(t, spec)
    if outcome.eliminated:
        raise ValueError(f"value {t} is eliminated under delta={spec.delta}")
    own = outcome.bits[bit_index - 1]
    differs = np.array([lab[bit_index - 1] != own for lab in spec.labels])
    caps = _capture_probabilities(spec, t, sigma_noise)
    return float(np.sum(caps[differs]))


def _quad(f, lo: float, hi: float) -> float:
    res = quad(f, lo, hi, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL,
               limit=200, full_output=1)
    if len(res) > 3:
        raise IntegrationError(f"quadrature on [{lo}, {hi}]: {res[3]}")
    return res[0]


def _accepted_region(spec: QuantizerSpec, k: int, delta: float) -> tuple[float, float]:
    """Accepted sub-interval of interval k after removing the QoS windows."""
    b = spec.boundaries
    half = delta / 2.0
    lo = b[k - 1] + (half if k >= 2 else 0.0)
    hi = b[k] - (half if k <= spec.num_intervals - 1 else 0.0)
    return lo, hi


def correctness_probability(spec: QuantizerSpec, sigma_noise: float,
                            delta: float) -> float:
    """Probability that every bit extracted from one coefficient is correct.

    For each accepted sub-interval, integrates the probability that the
    noisy value re-quantizes to the same interval, weighted by the Gaussian
    density, then conditions on the truncation range and on acceptance.
    Matching the bit-level error model, the extreme intervals capture
    everything beyond the truncation bounds, so only crossings of interior
    (delta-protected) boundaries count as errors; this keeps P_c
    non-decreasing in delta over the whole allowed range.
    ``sigma_noise = 0`` returns the noise-free limit 1.
    """
    delta = _check_delta(spec, delta)
    if sigma_noise < 0.0:
        raise ValueError("sigma_noise must be non-negative")
    if sigma_noise == 0.0:
        return 1.0
    b = spec.boundaries
    n = spec.num_intervals
    total = 0.0
    for k in range(1, n + 1):
        lo, hi = _accepted_region(spec, k, delta)
        if lo >= hi:
            continue
        a = -np.inf if k == 1 else b[k - 1]
        c = np.inf if k == n else b[k]

        def integrand(t, a=a, c=c):
            return (q_function((a - t) / sigma_noise)
                    - q_function((c - t) / sigma_noise)) * gaussian_pdf(t)

        total += _quad(integrand, lo, hi)
    denom = (q_function(b[0]) - q_function(b[-1])) * (1.0 - elimination_ratio(spec, delta))
    if denom <= 0.0:
        raise ValueError("empty accepted region: nothing survives this delta")
    return float(total / denom)


@dataclass(frozen=True)
class IntervalDependence:
    """Conditional bit-error probabilities for one quantization interval."""

    interval: int
    p_bit1: float
    p_bit2: float
    p_joint: float

    @property
    def product(self) -> float:
        return self.p_bit1 * self.p_bit2

    @property
    def dependence(self) -> float:
        return abs(self.p_joint - self.product)


@dataclass(frozen=True)
class MemorylessReport:
    """Outcome of the two-bit error dependence check."""

    intervals: tuple[IntervalDependence, ...]
    max_dependence: float
    tolerance: float

    @property
    def dependent(self) -> bool:
        """True when the bit errors are provably not independent."""
        return self.max_dependence > 10.0 * self.tolerance


def joint_bit_error_and_memoryless_check(spec: QuantizerSpec, sigma_noise: float,
                                         delta: float,
                                         tolerance: float = 1e-9) -> MemorylessReport:
    """Per-interval joint vs. product of marginal bit-error probabilities.

    For m = 2, conditions on the accepted region of each interval and
    integrates the probabilities of first-bit, second-bit, and
    both-bits-in-error events. A gap between the joint probability and the
    product of marginals beyond 10x the integration tolerance demonstrates
    that the extracted bits do not form a memoryless channel.
    """
    if spec.m != 2:
        raise ValueError("dependence check is defined for m = 2")
    if sigma_noise <= 0.0:
        raise ValueError("sigma_noise must be positive")
    delta = _check_delta(spec, delta)
    labels = spec.labels
    results = []
    for k in range(1, spec.num_intervals + 1):
        lo, hi = _accepted_region(spec, k, delta)
        if lo >= hi:
            continue
        own = labels[k - 1]
        differ1 = np.array([lab[0] != own[0] for lab in labels])
        differ2 = np.array([lab[1] != own[1] for lab in labels])

        def err_prob(mask):
            def integrand(t):
                return float(np.sum(_capture_probabilities(spec, t, sigma_noise)[mask])) \
                    * float(gaussian_pdf(t))
            return _quad(integrand, lo, hi)

        # conditional on the truncated coefficient falling in this accepted region
        mass = float(q_function(lo) - q_function(hi))
        results.append(IntervalDependence(
            interval=k,
            p_bit1=err_prob(differ1) / mass,
            p_bit2=err_prob(differ2) / mass,
            p_joint=err_prob(differ1 & differ2) / mass,
        ))
    max_dep = max((r.dependence for r in results), default=0.0)
    return MemorylessReport(intervals=tuple(results), max_dependence=max_dep,
                            tolerance=tolerance)
