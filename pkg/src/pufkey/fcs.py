"""Fuzzy commitment: key binding by XOR-masking with an ECC codeword.

Enrollment stores helper = x XOR encode(key); reconstruction decodes
helper XOR y, which recovers the key whenever the fresh measurement y
differs from x in at most t positions. Ships repetition and Hamming(7,4)
reference codes behind a bounded-minimum-distance decoding interface,
plus the achievable (secret-key, privacy-leakage) rate region for the
uniform-input BSC measurement model.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


def as_bits(x) -> np.ndarray:
    """Coerce a bit string like '0101' or any 0/1 sequence to a uint8 array."""
    if isinstance(x, str):
        if not set(x) <= {"0", "1"}:
            raise ValueError(f"bit string may contain only 0/1, got {x!r}")
        return np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(x)
    if arr.ndim != 1 or not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bits must be a 1D sequence of 0/1 values")
    return arr.astype(np.uint8)


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in as_bits(bits))


def bits_to_int(bits) -> int:
    out = 0
    for b in as_bits(bits):
        out = (out << 1) | int(b)
    return out


class LinearBlockCode(ABC):
    """Binary linear block code with bounded-minimum-distance decoding.

    Attributes
    ----------
    n : blocklength
    k : code dimension (key length)
    t : guaranteed number of correctable errors

    ``decode`` returns None when no codeword lies within Hamming distance
    t of the received word (a detected failure, distinct from silent
    miscorrection).
    """

    n: int
    k: int
    t: int

    @abstractmethod
    def encode(self, message) -> np.ndarray: ...

    @abstractmethod
    def decode(self, word) -> np.ndarray | None: ...

    def _check_message(self, message) -> np.ndarray:
        msg = as_bits(message)
        if msg.size != self.k:
            raise ValueError(f"message length {msg.size} != code dimension {self.k}")
        return msg

    def _check_word(self, word) -> np.ndarray:
        w = as_bits(word)
        if w.size != self.n:
            raise ValueError(f"word length {w.size} != blocklength {self.n}")
        return w


class RepetitionCode(LinearBlockCode):
    """(n, 1) repetition code; corrects floor((n-1)/2) errors."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("blocklength must be positive")
        self.n = n
        self.k = 1
        self.t = (n - 1) // 2

    def encode(self, message) -> np.ndarray:
        msg = self._check_message(message)
        return np.repeat(msg, self.n)

    def decode(self, word) -> np.ndarray | None:
        w = self._check_word(word)
        ones = int(w.sum())
        distance = min(ones, self.n - ones)
        if distance > self.t:
            return None
        return np.array([1 if ones > self.n - ones else 0], dtype=np.uint8)


class HammingCode74(LinearBlockCode):
    """Systematic Hamming(7,4); a perfect single-error-correcting code."""

    _G = np.array([[1, 0, 0, 0, 1, 1, 0],
                   [0, 1, 0, 0, 1, 0, 1],
                   [0, 0, 1, 0, 0, 1, 1],
                   [0, 0, 0, 1, 1, 1, 1]], dtype=np.uint8)
    _H = np.array([[1, 1, 0, 1, 1, 0, 0],
                   [1, 0, 1, 1, 0, 1, 0],
                   [0, 1, 1, 1, 0, 0, 1]], dtype=np.uint8)

    def __init__(self):
        self.n = 7
        self.k = 4
        self.t = 1
        # syndrome value -> error position
        self._position = {
            int(col[0]) * 4 + int(col[1]) * 2 + int(col[2]): i
            for i, col in enumerate(self._H.T)
        }

    def encode(self, message) -> np.ndarray:
        msg = self._check_message(message)
        return (msg @ self._G) % 2

    def decode(self, word) -> np.ndarray | None:
        w = self._check_word(word).copy()
        syndrome = (self._H @ w) % 2
        s = int(syndrome[0]) * 4 + int(syndrome[1]) * 2 + int(syndrome[2])
        if s:
            w[self._position[s]] ^= 1
        return w[: self.k]


def enroll(x, key, code: LinearBlockCode) -> np.ndarray:
    """Helper data W = x XOR encode(key)."""
    xb = as_bits(x)
    if xb.size != code.n:
        raise ValueError(f"measurement length {xb.size} != blocklength {code.n}")
    return (xb ^ code.encode(key)).astype(np.uint8)


def reconstruct(helper, y, code: LinearBlockCode) -> np.ndarray | None:
    """Decode helper XOR y back to the key; None on detected decode failure."""
    hb = as_bits(helper)
    yb = as_bits(y)
    if hb.size != code.n or yb.size != code.n:
        raise ValueError(f"helper/measurement length must equal blocklength {code.n}")
    return code.decode(hb ^ yb)


def binary_entropy(p):
    """Binary entropy in bits, with the 0 log 0 = 0 convention."""
    if np.ndim(p) == 0:
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
        if p in (0.0, 1.0):
            return 0.0
        return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = np.zeros_like(arr)
    inner = (arr > 0.0) & (arr < 1.0)
    q = arr[inner]
    out[inner] = -q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q)
    return out


@dataclass(frozen=True)
class RatePoint:
    secret_key_rate: float
    privacy_leakage_rate: float


@dataclass(frozen=True)
class RateRegion:
    """Achievable (secret-key, privacy-leakage) pairs over a BSC(p).

    The region is {0 <= R_s <= 1 - H_b(p), R_l >= 1 - R_s}; the scheme is
    asymptotically optimal only at (1 - H_b(p), H_b(p)).
    """

    crossover: float

    @property
    def max_secret_key_rate(self) -> float:
        return 1.0 - binary_entropy(self.crossover)

    @property
    def optimal_point(self) -> RatePoint:
        h = binary_entropy(self.crossover)
        return RatePoint(secret_key_rate=1.0 - h, privacy_leakage_rate=h)

    def contains(self, secret_key_rate: float, privacy_leakage_rate: float) -> bool:
        return (0.0 <= secret_key_rate <= self.max_secret_key_rate
                and privacy_leakage_rate >= 1.0 - secret_key_rate)

    def boundary_leakage(self, secret_key_rate: float) -> float:
        """Smallest achievable leakage rate at a given key rate."""
        return 1.0 - secret_key_rate


def rate_region(p: float) -> RateRegion:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover probability {p} outside [0, 1]")
    return RateRegion(crossover=float(p))


def leakage_by_enumeration(code: LinearBlockCode) -> float:
    """Exact I(helper; key) in bits for uniform x and key, by enumeration.

    Only practical for small blocklengths (n <= 12). Returns exactly 0.0
    when the joint counts factorize, which the XOR masking guarantees.
    """
    if code.n > 12:
        raise ValueError("exhaustive leakage enumeration is limited to n <= 12")
    n_x = 1 << code.n
    n_s = 1 << code.k
    counts = np.zeros((n_x, n_s), dtype=np.int64)
    x_codes = np.arange(n_x, dtype=np.int64)
    for s_idx in range(n_s):
        key = as_bits(format(s_idx, f"0{code.k}b"))
        c_int = bits_to_int(code.encode(key))
        w = x_codes ^ c_int
        counts[w, s_idx] += 1
    total = counts.sum()
    row = counts.sum(axis=1, keepdims=True)
    col = counts.sum(axis=0, keepdims=True)
    if np.array_equal(counts * total, row @ col):
        return 0.0
    nz = counts > 0
    joint = counts[nz] / total
    prod = (row @ col)[nz] / total ** 2
    return float(np.sum(joint * np.log2(joint / prod)))


def make_code(descriptor: str) -> LinearBlockCode:
    """Parse a code descriptor: 'repetition:<n>' or 'hamming74'."""
    name, _, arg = descriptor.partition(":")
    name = name.strip().lower()
    if name == "repetition":
        if not arg:
            raise ValueError("repetition code needs a blocklength, e.g. repetition:3")
        return RepetitionCode(int(arg))
    if name == "hamming74":
        return HammingCode74()
    raise ValueError(f"unknown code {descriptor!r} (use repetition:<n> or hamming74)")
