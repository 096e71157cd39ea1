"""RO measurement ingestion and seedable synthetic population generation.

Dataset text format: one line per measurement,

    device_id measurement_id v_1 v_2 ... v_r

with values row-major and measurement ids 1..M contiguous per device.
Blank lines and lines starting with '#' are ignored.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import q_inverse


class DataFormatError(ValueError):
    """A dataset file violates the measurement line format."""


@dataclass(frozen=True, eq=False)
class ROArrayMeasurement:
    """One grid of positive oscillation frequencies for one device."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"expected a 2D array, got shape {v.shape}")
        if not np.all(v > 0.0):
            raise ValueError("oscillation frequencies must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class Device:
    """All measurement rounds of one physical device; round 1 is enrollment."""

    device_id: str
    measurements: tuple[ROArrayMeasurement, ...]

    @property
    def enrollment(self) -> ROArrayMeasurement:
        return self.measurements[0]


@dataclass(frozen=True, eq=False)
class DevicePopulation:
    """A set of devices whose measurements all share one grid shape."""

    devices: tuple[Device, ...]

    def __post_init__(self):
        if not self.devices:
            raise ValueError("population must contain at least one device")
        shape = self.devices[0].measurements[0].values.shape
        for dev in self.devices:
            if not dev.measurements:
                raise ValueError(f"device {dev.device_id} has no measurements")
            for meas in dev.measurements:
                if meas.values.shape != shape:
                    raise ValueError(
                        f"device {dev.device_id}: shape {meas.values.shape} "
                        f"differs from population shape {shape}"
                    )
        object.__setattr__(self, "devices", tuple(self.devices))

    @property
    def shape(self) -> tuple[int, int]:
        return self.devices[0].measurements[0].values.shape

    @property
    def num_devices(self) -> int:
        return len(self.devices)


def load_dataset(path, rows: int | None = None, cols: int | None = None) -> DevicePopulation:
    """Parse the plain-text measurement format into a population.

    The grid shape defaults to square (side sqrt(r)); pass ``rows``/``cols``
    for non-square arrays. Errors carry the offending line number.
    """
    per_device: dict[str, dict[int, np.ndarray]] = {}
    order: list[str] = []
    r_expected: int | None = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) < 3:
            raise DataFormatError(f"line {lineno}: expected 'device_id measurement_id v_1 ...'")
        device_id = tokens[0]
        try:
            meas_id = int(tokens[1])
        except ValueError:
            raise DataFormatError(f"line {lineno}: measurement id {tokens[1]!r} is not an integer")
        try:
            values = np.array([float(t) for t in tokens[2:]], dtype=float)
        except ValueError:
            raise DataFormatError(f"line {lineno}: malformed frequency value")
        if np.any(values <= 0.0):
            raise DataFormatError(f"line {lineno}: non-positive frequency")
        if r_expected is None:
            r_expected = values.size
        elif values.size != r_expected:
            raise DataFormatError(
                f"line {lineno}: {values.size} values, expected {r_expected}"
            )
        if device_id not in per_device:
            per_device[device_id] = {}
            order.append(device_id)
        if meas_id in per_device[device_id]:
            raise DataFormatError(
                f"line {lineno}: duplicate measurement {meas_id} for device {device_id}"
            )
        per_device[device_id][meas_id] = values
    if not per_device:
        raise DataFormatError(f"{path}: no devices")

    if rows is None and cols is None:
        side = math.isqrt(r_expected)
        if side * side != r_expected:
            raise DataFormatError(
                f"{path}: r={r_expected} is not a perfect square; pass rows/cols"
            )
        rows = cols = side
    if rows is None or cols is None or rows * cols != r_expected:
        raise DataFormatError(
            f"{path}: declared shape {rows}x{cols} does not match r={r_expected}"
        )

    devices = []
    for device_id in order:
        byid = per_device[device_id]
        expected_ids = list(range(1, len(byid) + 1))
        if sorted(byid) != expected_ids:
            raise DataFormatError(
                f"device {device_id}: measurement ids {sorted(byid)} are not 1..{len(byid)}"
            )
        measurements = tuple(
            ROArrayMeasurement(byid[i].reshape(rows, cols)) for i in expected_ids
        )
        devices.append(Device(device_id=device_id, measurements=measurements))
    return DevicePopulation(devices=tuple(devices))


def save_dataset(path, population: DevicePopulation) -> None:
    """Write a population in the dataset text format (full float precision)."""
    lines = []
    for dev in population.devices:
        for i, meas in enumerate(dev.measurements, start=1):
            values = " ".join(repr(float(v)) for v in meas.values.ravel())
            lines.append(f"{dev.device_id} {i} {values}")
    Path(path).write_text("\n".join(lines) + "\n")


def crop_upper(population: DevicePopulation, side: int) -> DevicePopulation:
    """Keep the top-left side x side sub-grid of every measurement."""
    rows, cols = population.shape
    if side > rows or side > cols:
        raise ValueError(f"cannot crop {rows}x{cols} arrays to side {side}")
    devices = tuple(
        Device(
            device_id=dev.device_id,
            measurements=tuple(
                ROArrayMeasurement(m.values[:side, :side]) for m in dev.measurements
            ),
        )
        for dev in population.devices
    )
    return DevicePopulation(devices=devices)


def generate_synthetic(num_devices: int, shape, correlation_length: float,
                       mean_freq: float, device_sigma: float, noise_sigma: float,
                       repeats: int, seed: int,
                       clamp_floor: float | None = None) -> DevicePopulation:
    """Generate a correlated synthetic RO population, deterministic per seed.

    Each device is a spatially correlated Gaussian field (separable
    exponential correlation with the given length) around ``mean_freq``.
    Measurement 1 is noise-free; later repeats add i.i.d. Gaussian noise
    per RO. Values are clamped at ``clamp_floor`` (default mean_freq/100)
    to keep frequencies positive; clamps are counted and reported.
    """
    if isinstance(shape, int):
        shape = (shape, shape)
    rows, cols = shape
    if num_devices < 1 or repeats < 1 or rows < 1 or cols < 1:
        raise ValueError("num_devices, repeats, and shape must be positive")
    if mean_freq <= 0.0 or device_sigma <= 0.0:
        raise ValueError("mean_freq and device_sigma must be positive")
    if noise_sigma < 0.0 or correlation_length < 0.0:
        raise ValueError("noise_sigma and correlation_length must be non-negative")
    floor = mean_freq / 100.0 if clamp_floor is None else float(clamp_floor)

    total_sigma = math.hypot(device_sigma, noise_sigma)
    if mean_freq - float(q_inverse(1e-6)) * total_sigma <= floor:
        warnings.warn(
            "parameters imply non-positive (clamped) frequencies with "
            "probability > 1e-6; expect heavy clamping"
        )

    def corr_cholesky(n):
        if correlation_length == 0.0:
            return np.eye(n)
        idx = np.arange(n)
        corr = np.exp(-np.abs(idx[:, None] - idx[None, :]) / correlation_length)
        return np.linalg.cholesky(corr)

    chol_rows = corr_cholesky(rows)
    chol_cols = corr_cholesky(cols)
    rng = np.random.default_rng(seed)
    clamped = 0
    devices = []
    for i in range(num_devices):
        grid = rng.standard_normal((rows, cols))
        field = mean_freq + device_sigma * (chol_rows @ grid @ chol_cols.T)
        measurements = []
        for rep in range(repeats):
            values = field if rep == 0 else field + rng.normal(0.0, noise_sigma, (rows, cols))
            low = values < floor
            clamped += int(np.count_nonzero(low))
            measurements.append(ROArrayMeasurement(np.where(low, floor, values)))
        devices.append(Device(device_id=str(i + 1), measurements=tuple(measurements)))
    if clamped:
        warnings.warn(f"clamped {clamped} non-positive frequencies to {floor}")
    return DevicePopulation(devices=tuple(devices))
