"""Multiplication-free orthogonal 2D transforms for decorrelating RO arrays.

The transform family starts from exhaustively enumerated +-1 seed matrices
with pairwise orthogonal rows and grows by Kronecker products, which
preserve orthogonality. Forward application is scale * (T @ X @ T.T) with
scale 1/side, so the round trip with the matching inverse is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_io import DevicePopulation, ROArrayMeasurement
from .models import DEFAULT_RANGE_MARGIN, fit_coefficient_models
from .quantizer import correctness_probability, design_boundaries


class SearchSpaceError(ValueError):
    """The exhaustive seed search would be too large."""


class AlreadyDecorrelatedError(ValueError):
    """The reference covariance has no off-diagonal mass to reduce."""


_MAX_SEED_DIM = 5
_ENUM_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class TransformMatrix:
    """Orthogonal transform with +-1 entries and a forward scale factor."""

    entries: np.ndarray
    scale: float

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.int64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"entries must be square, got shape {e.shape}")
        if not np.all(np.abs(e) == 1):
            raise ValueError("entries must be +1 or -1")
        gram = e @ e.T
        if np.any(gram[~np.eye(e.shape[0], dtype=bool)] != 0):
            raise ValueError("rows are not pairwise orthogonal")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_signs(cls, entries) -> "TransformMatrix":
        """Build with the default 1/side forward scale."""
        entries = np.asarray(entries)
        return cls(entries=entries, scale=1.0 / entries.shape[0])


def sylvester_hadamard(size: int) -> TransformMatrix:
    """The standard Hadamard matrix of a power-of-two size."""
    if size < 1 or size & (size - 1):
        raise ValueError(f"size {size} is not a power of two")
    h = np.array([[1]], dtype=np.int64)
    while h.shape[0] < size:
        h = np.block([[h, h], [h, -h]])
    return TransformMatrix.from_signs(h)


def enumerate_seed_matrices(dim: int) -> list[TransformMatrix]:
    """All dim x dim +-1 matrices with pairwise orthogonal rows.

    Enumeration order is lexicographic over row-major sign patterns with
    +1 sorting before -1, so the all-ones matrix comes first. Refuses
    dim > 5, where the 2^(dim^2) search becomes unreasonable.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    if dim > _MAX_SEED_DIM:
        raise SearchSpaceError(
            f"search space too large: 2^{dim * dim} sign patterns for dim={dim}"
        )
    n_cells = dim * dim
    shifts = np.arange(n_cells - 1, -1, -1, dtype=np.uint64)
    found = []
    for start in range(0, 1 << n_cells, _ENUM_CHUNK):
        stop = min(start + _ENUM_CHUNK, 1 << n_cells)
        codes = np.arange(start, stop, dtype=np.uint64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)
        signs = (1 - 2 * bits).reshape(-1, dim, dim)
        gram = np.einsum("nij,nkj->nik", signs, signs, dtype=np.int32)
        off = gram[:, ~np.eye(dim, dtype=bool)]
        ok = np.all(off == 0, axis=1)
        found.extend(TransformMatrix.from_signs(s) for s in signs[ok])
    return found


def build_large_transform(seed_a: TransformMatrix, seed_b: TransformMatrix) -> TransformMatrix:
    """Kronecker product of two seeds; orthogonality carries over."""
    return TransformMatrix.from_signs(np.kron(seed_a.entries, seed_b.entries))


@dataclass(frozen=True, eq=False)
class CoefficientGrid:
    """2D grid of transform coefficients. Index 1 (row-major) is DC."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"coefficient grid must be square, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def side(self) -> int:
        return self.values.shape[0]

    def coefficient(self, j: int) -> float:
        """1-based row-major coefficient access; j=1 is DC."""
        if not 1 <= j <= self.values.size:
            raise IndexError(f"coefficient index {j} outside [1, {self.values.size}]")
        return float(self.values.flat[j - 1])

    def flatten(self) -> np.ndarray:
        return self.values.ravel().copy()


def _as_array(x) -> np.ndarray:
    return x.values if isinstance(x, (ROArrayMeasurement, CoefficientGrid)) else np.asarray(x, dtype=float)


def forward_2d(transform: TransformMatrix, measurement) -> CoefficientGrid:
    """Apply the 2D transform: scale * (T @ X @ T.T)."""
    x = _as_array(measurement)
    if x.shape != (transform.size, transform.size):
        raise ValueError(f"array shape {x.shape} does not match transform size {transform.size}")
    e = transform.entries.astype(float)
    return CoefficientGrid(transform.scale * (e @ x @ e.T))


def inverse_2d(transform: TransformMatrix, coefficients) -> ROArrayMeasurement:
    """Exact inverse of :func:`forward_2d`.

    T @ T.T = size * I for +-1 orthogonal rows, so the inverse scale is
    1 / (scale * size^2); with the default scale this is again 1/size.
    """
    c = _as_array(coefficients)
    if c.shape != (transform.size, transform.size):
        raise ValueError(f"grid shape {c.shape} does not match transform size {transform.size}")
    e = transform.entries.astype(float)
    inv_scale = 1.0 / (transform.scale * transform.size ** 2)
    return ROArrayMeasurement(inv_scale * (e.T @ c @ e))


def _fwht_inplace(a: np.ndarray, axis: int) -> None:
    """Butterfly Walsh-Hadamard pass along one axis, additions only."""
    n = a.shape[axis]
    view = np.moveaxis(a, axis, 0)
    h = 1
    while h < n:
        for i in range(0, n, 2 * h):
            top = view[i:i + h].copy()
            bottom = view[i + h:i + 2 * h]
            view[i:i + h] = top + bottom
            view[i + h:i + 2 * h] = top - bottom
        h *= 2


def fast_dwht_2d(measurement, scale: float | None = None) -> CoefficientGrid:
    """2D Walsh-Hadamard transform via butterflies (no multiplications).

    Matches ``forward_2d`` with the Sylvester-Hadamard matrix; the single
    scale multiplication happens once at the end.
    """
    x = _as_array(measurement)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square array, got {x.shape}")
    n = x.shape[0]
    if n < 1 or n & (n - 1):
        raise ValueError(f"side {n} is not a power of two")
    work = x.astype(float).copy()
    _fwht_inplace(work, axis=0)
    _fwht_inplace(work, axis=1)
    return CoefficientGrid(work * (1.0 / n if scale is None else scale))


def decorrelation_efficiency(cov_before: np.ndarray, cov_after: np.ndarray) -> float:
    """One minus the ratio of off-diagonal absolute mass after vs. before."""
    before = np.asarray(cov_before, dtype=float)
    after = np.asarray(cov_after, dtype=float)
    for name, c in (("cov_before", before), ("cov_after", after)):
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"{name} must be square")
        if not np.allclose(c, c.T, atol=1e-10):
            raise ValueError(f"{name} must be symmetric")
    if before.shape != after.shape:
        raise ValueError("covariance matrices must have the same dimension")

    def off_sum(c):
        return float(np.sum(np.abs(c)) - np.sum(np.abs(np.diag(c))))

    denom = off_sum(before)
    if denom == 0.0:
        raise AlreadyDecorrelatedError("cov_before is already diagonal")
    return 1.0 - off_sum(after) / denom


def sample_covariance(arrays) -> np.ndarray:
    """Unbiased covariance across observations of row-major flattened grids."""
    flat = np.stack([_as_array(a).ravel() for a in arrays])
    if flat.shape[0] < 2:
        raise ValueError("covariance needs at least 2 observations")
    return np.cov(flat, rowvar=False)


def population_coefficients(population: DevicePopulation,
                            transform: TransformMatrix) -> tuple[np.ndarray, list[np.ndarray]]:
    """Transform every measurement; returns enrollment rows and per-device stacks.

    The first return is a (devices, r) array of flattened enrollment
    coefficients; the second holds one (measurements, r) array per device.
    """
    per_device = []
    for dev in population.devices:
        stack = np.stack([forward_2d(transform, m).flatten() for m in dev.measurements])
        per_device.append(stack)
    enrollment = np.stack([stack[0] for stack in per_device])
    return enrollment, per_device


def _used_bits(m_plan, r: int) -> dict[int, int]:
    if isinstance(m_plan, int):
        return {j: m_plan for j in range(2, r + 1)}
    plan = {int(j): int(m) for j, m in dict(m_plan).items() if int(m) > 0}
    if any(j < 2 or j > r for j in plan):
        raise ValueError("m plan indexes a coefficient outside [2, r]")
    return plan


def rank_transforms(candidates, population: DevicePopulation, m_plan,
                    margin: float | None = None) -> list[float]:
    """Score each candidate by its worst per-coefficient error probability.

    The per-coefficient error is 1 - P_c at delta = 0 under the candidate's
    fitted models; lower maxima mean a more reliable transform.
    """
    margin = DEFAULT_RANGE_MARGIN if margin is None else margin
    if not candidates:
        raise ValueError("no candidate transforms")
    rows, cols = population.shape
    if rows != cols:
        raise ValueError("transform selection needs square arrays; crop first")
    if any(len(d.measurements) < 2 for d in population.devices):
        raise ValueError("need >= 2 measurements per device to estimate noise")
    plan = _used_bits(m_plan, rows * cols)
    if not plan:
        raise ValueError("m plan leaves no coefficient in use")
    scores = []
    for cand in candidates:
        enrollment, per_device = population_coefficients(population, cand)
        models = fit_coefficient_models(enrollment, per_device, margin=margin)
        worst = 0.0
        for j, m in sorted(plan.items()):
            spec = design_boundaries(models[j], m)
            p_c = correctness_probability(spec, models[j].sigma_noise, delta=0.0)
            worst = max(worst, 1.0 - p_c)
        scores.append(worst)
    return scores


def select_transform(candidates, population: DevicePopulation, m_plan,
                     margin: float | None = None) -> TransformMatrix:
    """Candidate with the smallest worst-coefficient error; ties keep order."""
    scores = rank_transforms(candidates, population, m_plan, margin=margin)
    return candidates[int(np.argmin(scores))]


def save_transform_family(path, transforms) -> None:
    """Write transforms as text records: a size/scale header then sign rows."""
    blocks = []
    for t in transforms:
        rows = "\n".join(" ".join(f"{v:+d}" for v in row) for row in t.entries)
        blocks.append(f"size={t.size} scale={t.scale!r}\n{rows}")
    Path(path).write_text("\n\n".join(blocks) + "\n")


def load_transform_family(path) -> list[TransformMatrix]:
    """Read a family file written by :func:`save_transform_family`."""
    lines = Path(path).read_text().splitlines()
    transforms = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith("size="):
            raise ValueError(f"{path}: line {i + 1}: expected 'size=<s> scale=<scale>' header")
        try:
            size_part, scale_part = line.split()
            size = int(size_part.removeprefix("size="))
            scale = float(scale_part.removeprefix("scale="))
        except ValueError:
            raise ValueError(f"{path}: line {i + 1}: malformed header {line!r}")
        rows = []
        for k in range(size):
            rows.append([int(v) for v in lines[i + 1 + k].split()])
        transforms.append(TransformMatrix(entries=np.array(rows), scale=scale))
        i += 1 + size
    if not transforms:
        raise ValueError(f"{path}: no transform records")
    return transforms
