"""Truncated-Gaussian coefficient models, noise estimation, and equalization.

Every downstream probability formula composes the Gaussian upper-tail
function and its inverse, so both are provided here with double-precision
accuracy (absolute error below 1e-12 for |x| <= 8).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import erfc, ndtri

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

#: Fraction of the observed sample span added on each side of the
#: truncation range so that fresh realizations at the sample extremes
#: are not rejected.
DEFAULT_RANGE_MARGIN = 0.1


class OutOfModelError(ValueError):
    """A raw coefficient value fell outside the fitted truncation range."""


def q_function(x):
    """Upper-tail probability of the standard Gaussian, Q(x) = P[Z > x].

    Accepts scalars or arrays. Evaluated through the complementary error
    function, which keeps relative accuracy near machine precision over
    the whole tail.
    """
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def q_inverse(p):
    """Inverse of :func:`q_function` on (0, 1); monotone decreasing in p."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("q_inverse requires 0 < p < 1")
    # -ndtri keeps full precision for small p (deep upper tail); the +0.0
    # normalizes -0.0 at p = 0.5.
    return -ndtri(p) + 0.0


def gaussian_pdf(t):
    """Standard Gaussian density."""
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * t * t) / _SQRT_2PI


@dataclass(frozen=True)
class CoefficientModel:
    """Fitted truncated-Gaussian model of one transform coefficient.

    The underlying (pre-truncation) Gaussian has mean ``mu_orig`` and
    standard deviation ``sigma_orig`` in raw units; realizations live in
    ``(lower_raw, upper_raw]``. ``sigma_noise`` is the measurement-noise
    standard deviation on the equalized scale, i.e. already divided by
    ``sigma_orig``. A value of 0 marks a degenerate (noise-free) dataset.
    """

    index: int
    mu_orig: float
    sigma_orig: float
    lower_raw: float
    upper_raw: float
    sigma_noise: float | None = None

    def __post_init__(self):
        if self.sigma_orig <= 0.0:
            raise ValueError(f"sigma_orig must be positive, got {self.sigma_orig}")
        if not self.lower_raw < self.upper_raw:
            raise ValueError("truncation range must satisfy lower_raw < upper_raw")
        if self.sigma_noise is not None and self.sigma_noise < 0.0:
            raise ValueError("sigma_noise must be non-negative")

    @property
    def b0(self) -> float:
        """Lower truncation bound on the equalized scale."""
        return (self.lower_raw - self.mu_orig) / self.sigma_orig

    @property
    def bmax(self) -> float:
        """Upper truncation bound on the equalized scale."""
        return (self.upper_raw - self.mu_orig) / self.sigma_orig

    def with_noise(self, sigma_noise: float) -> "CoefficientModel":
        """Return a copy carrying the equalized noise standard deviation."""
        return replace(self, sigma_noise=float(sigma_noise))


def fit_truncated_gaussian(samples, index: int = 0,
                           margin: float = DEFAULT_RANGE_MARGIN) -> CoefficientModel:
    """Fit a coefficient model from enrollment samples across devices.

    Mean and standard deviation are the unbiased sample estimates
    (Bessel-corrected). The truncation range is the observed sample range
    widened by ``margin`` times the sample span on each side.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError(f"need at least 2 samples to fit, got {x.size}")
    sigma = float(x.std(ddof=1))
    if sigma == 0.0:
        raise ValueError("zero variance: all samples identical")
    span = float(x.max() - x.min())
    return CoefficientModel(
        index=index,
        mu_orig=float(x.mean()),
        sigma_orig=sigma,
        lower_raw=float(x.min()) - margin * span,
        upper_raw=float(x.max()) + margin * span,
    )


def estimate_noise_sigma(repeated_measurements) -> float:
    """Pooled within-device standard deviation of repeated measurements.

    ``repeated_measurements`` holds one sequence of values per device.
    Each device contributes its Bessel-corrected variance weighted by its
    degrees of freedom; devices with fewer than two repeats carry none.
    Returns 0 (with a warning) when every repeat is identical.
    """
    sum_sq = 0.0
    dof = 0
    for values in repeated_measurements:
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            continue
        sum_sq += float(np.sum((v - v.mean()) ** 2))
        dof += v.size - 1
    if dof == 0:
        raise ValueError("noise estimation needs >= 2 repeats for at least one device")
    pooled = math.sqrt(sum_sq / dof)
    if pooled == 0.0:
        warnings.warn("all repeated measurements identical; noise estimate is degenerate (0)")
    return pooled


def equalize(t_raw: float, model: CoefficientModel) -> float:
    """Map a raw coefficient onto the standardized scale (t - mu)/sigma.

    Raises :class:`OutOfModelError` for values outside the truncation
    range; the caller decides whether to widen the range or reject the
    device.
    """
    if not model.lower_raw < t_raw <= model.upper_raw:
        raise OutOfModelError(
            f"coefficient {model.index}: value {t_raw} outside "
            f"({model.lower_raw}, {model.upper_raw}]"
        )
    return (t_raw - model.mu_orig) / model.sigma_orig


def de_equalize(t_eq: float, model: CoefficientModel) -> float:
    """Inverse of :func:`equalize`."""
    return model.mu_orig + model.sigma_orig * t_eq


def fit_coefficient_models(enrollment, per_device_repeats,
                           margin: float = DEFAULT_RANGE_MARGIN) -> dict[int, CoefficientModel]:
    """Fit models (with noise) for every AC coefficient of a population.

    ``enrollment`` is a (devices, r) array of flattened enrollment
    coefficients; ``per_device_repeats`` holds one (measurements, r) array
    per device. The DC coefficient (index 1) is never modeled. Noise is
    estimated on the raw scale and divided by the fitted ``sigma_orig``.
    """
    enrollment = np.asarray(enrollment, dtype=float)
    r = enrollment.shape[1]
    models: dict[int, CoefficientModel] = {}
    for j in range(2, r + 1):
        model = fit_truncated_gaussian(enrollment[:, j - 1], index=j, margin=margin)
        raw_sigma = estimate_noise_sigma([dev[:, j - 1] for dev in per_device_repeats])
        models[j] = model.with_noise(raw_sigma / model.sigma_orig)
    return models


_CATALOG_HEADER = "# j mu_orig sigma_orig lower_raw upper_raw sigma_noise"


def save_model_catalog(path, models) -> None:
    """Write a model catalog: one plain-text record per coefficient, by index."""
    items = models.values() if isinstance(models, dict) else models
    lines = [_CATALOG_HEADER]
    for m in sorted(items, key=lambda m: m.index):
        noise = "nan" if m.sigma_noise is None else repr(m.sigma_noise)
        lines.append(
            f"{m.index} {m.mu_orig!r} {m.sigma_orig!r} "
            f"{m.lower_raw!r} {m.upper_raw!r} {noise}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_model_catalog(path) -> dict[int, CoefficientModel]:
    """Read a catalog written by :func:`save_model_catalog`."""
    models: dict[int, CoefficientModel] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ValueError(f"{path}: line {lineno}: expected 6 fields, got {len(fields)}")
        j = int(fields[0])
        mu, sigma, lower, upper, noise = (float(f) for f in fields[1:])
        models[j] = CoefficientModel(
            index=j, mu_orig=mu, sigma_orig=sigma,
            lower_raw=lower, upper_raw=upper,
            sigma_noise=None if math.isnan(noise) else noise,
        )
    if not models:
        raise ValueError(f"{path}: no model records found")
    return models
