"""Indexed coefficient sequences: algebra, weighted norms, decay fits.

A :class:`CoeffSeq` holds the values ``a_n`` for contiguous indices
``n = start_index, ..., start_index + N - 1``. Three kinds exist: sine and
cosine Fourier coefficients, and ``plain`` sequences such as eigenvalue
remainders.
"""
from __future__ import annotations

import csv
import io
import math
from typing import Iterable

import numpy as np

from .errors import AlignmentError

KINDS = ("sine", "cosine", "plain")

#: Fitted exponents above this value are reported as capped.
DECAY_CAP = 10.0

# sin*sin -> cos, cos*cos -> cos, sin*cos -> sin; plain absorbs the other kind.
_PRODUCT_KIND = {
    ("sine", "sine"): "cosine",
    ("cosine", "cosine"): "cosine",
    ("sine", "cosine"): "sine",
    ("cosine", "sine"): "sine",
}


class CoeffSeq:
    """A finite sequence of complex numbers indexed from ``start_index``.

    Args:
        kind: One of ``"sine"``, ``"cosine"`` or ``"plain"``.
        values: The entries; must be non-empty and finite.
        start_index: Index of the first entry. Defaults to 0 for cosine and
            1 otherwise. Sine sequences cannot contain index 0.
    """

    __slots__ = ("kind", "start_index", "values")

    def __init__(self, kind: str, values, start_index: int | None = None):
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
        vals = np.array(values, dtype=complex).reshape(-1)
        if vals.size < 1:
            raise ValueError("a coefficient sequence needs at least one entry")
        if not np.all(np.isfinite(vals)):
            raise ValueError("coefficient values must be finite")
        if start_index is None:
            start_index = 0 if kind == "cosine" else 1
        start_index = int(start_index)
        if start_index < 0:
            raise ValueError("start_index must be non-negative")
        if kind == "sine" and start_index < 1:
            raise ValueError("sine sequences start at index 1")
        vals.flags.writeable = False
        self.kind = kind
        self.start_index = start_index
        self.values = vals

    # -- basic protocol -------------------------------------------------
    def __len__(self) -> int:
        return self.values.size

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + len(self))

    @property
    def stop_index(self) -> int:
        """One past the last index."""
        return self.start_index + len(self)

    def __getitem__(self, n: int) -> complex:
        if not self.start_index <= n < self.stop_index:
            raise IndexError(f"index {n} outside [{self.start_index}, {self.stop_index})")
        return complex(self.values[n - self.start_index])

    def __repr__(self) -> str:
        return (f"CoeffSeq(kind={self.kind!r}, indices={self.start_index}.."
                f"{self.stop_index - 1})")

    def restrict(self, n_min: int, n_max: int) -> "CoeffSeq":
        """Return the sub-sequence with indices ``n_min..n_max`` inclusive."""
        if n_min < self.start_index or n_max >= self.stop_index or n_max < n_min:
            raise AlignmentError(
                f"range [{n_min}, {n_max}] not inside [{self.start_index}, {self.stop_index - 1}]")
        lo = n_min - self.start_index
        return CoeffSeq(self.kind, self.values[lo:lo + n_max - n_min + 1], n_min)

    def scale(self, c: complex) -> "CoeffSeq":
        return CoeffSeq(self.kind, c * self.values, self.start_index)

    def __mul__(self, other):
        if isinstance(other, CoeffSeq):
            return entrywise_product(self, other)
        return self.scale(other)

    __rmul__ = scale

    def __add__(self, other: "CoeffSeq") -> "CoeffSeq":
        a, b, kind = _align(self, other, strict_kind=True)
        return CoeffSeq(kind, a.values + b.values, a.start_index)

    def __sub__(self, other: "CoeffSeq") -> "CoeffSeq":
        a, b, kind = _align(self, other, strict_kind=True)
        return CoeffSeq(kind, a.values - b.values, a.start_index)

    def __neg__(self) -> "CoeffSeq":
        return self.scale(-1.0)

    # -- serialization ---------------------------------------------------
    def to_csv(self, path=None) -> str:
        """Write ``index,re,im`` rows; returns the text (and writes ``path``)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "re", "im"])
        for n, v in zip(self.indices, self.values):
            w.writerow([int(n), repr(float(v.real)), repr(float(v.imag))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, kind: str = "plain") -> "CoeffSeq":
        with open(path, encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows or rows[0][:3] != ["index", "re", "im"]:
            raise ValueError(f"{path}: expected header index,re,im")
        idx = [int(r[0]) for r in rows[1:]]
        vals = [complex(float(r[1]), float(r[2])) for r in rows[1:]]
        if idx != list(range(idx[0], idx[0] + len(idx))):
            raise ValueError(f"{path}: indices must be contiguous")
        return cls(kind, vals, idx[0])


def _align(a: CoeffSeq, b: CoeffSeq, strict_kind: bool = False):
    """Restrict two sequences to their common index range."""
    if strict_kind and a.kind != b.kind and "plain" not in (a.kind, b.kind):
        raise AlignmentError(f"cannot combine {a.kind} and {b.kind} sequences")
    lo = max(a.start_index, b.start_index)
    hi = min(a.stop_index, b.stop_index) - 1
    if hi < lo:
        raise AlignmentError(
            f"index ranges [{a.start_index}, {a.stop_index - 1}] and "
            f"[{b.start_index}, {b.stop_index - 1}] do not overlap")
    kind = a.kind if a.kind == b.kind else ("plain" if strict_kind else None)
    if kind is None:
        kind = _PRODUCT_KIND.get((a.kind, b.kind), "plain")
    return a.restrict(lo, hi), b.restrict(lo, hi), kind


def entrywise_product(a: CoeffSeq, b: CoeffSeq) -> CoeffSeq:
    """Entrywise product ``(ab)_n = a_n b_n`` on the common index range.

    The kind follows the parity rule for products of trigonometric
    functions: sine*sine and cosine*cosine give cosine, mixed gives sine.
    A product involving a ``plain`` sequence is plain.

    Raises:
        AlignmentError: if the index ranges do not overlap, or the common
            range would put a sine-kind result at index 0.
    """
    ra, rb, _ = _align(a, b)
    kind = _PRODUCT_KIND.get((a.kind, b.kind), "plain")
    start = ra.start_index
    vals = ra.values * rb.values
    if kind == "sine" and start == 0:
        if len(vals) == 1:
            raise AlignmentError("sine-kind product would only contain index 0")
        vals, start = vals[1:], 1
    return CoeffSeq(kind, vals, start)


def weighted_norm(a: CoeffSeq, p: float = 2.0, s: float = 0.0) -> float:
    """Truncated weighted norm ``(sum n^{ps} |a_n|^p)^{1/p}`` over ``n >= 1``.

    Index 0 (cosine sequences) carries weight 0**s and is skipped for
    ``s > 0``, included for ``s == 0``. ``p = inf`` gives ``sup n^s |a_n|``.

    Raises:
        ValueError: for ``p < 1``.
    """
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    n = a.indices.astype(float)
    mag = np.abs(a.values)
    keep = n >= 1 if s != 0 else np.ones_like(n, dtype=bool)
    n, mag = n[keep], mag[keep]
    if n.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(n ** s * mag))
    # scale to avoid under/overflow for large p
    w = n ** s * mag
    top = np.max(w)
    if top == 0.0:
        return 0.0
    return float(top * np.sum((w / top) ** p) ** (1.0 / p))


def norm_tail_ratio(a: CoeffSeq, p: float = 2.0, s: float = 0.0) -> float:
    """Share of ``weighted_norm(a)**p`` contributed by the last dyadic block.

    A small ratio indicates that the truncated norm has converged. For
    ``p = inf`` the ratio is 1 when the supremum is attained in the last
    block and 0 otherwise.
    """
    n_last = a.stop_index - 1
    lo = max(a.start_index, 1, (n_last + 1) // 2)
    total = weighted_norm(a, p, s)
    if total == 0.0:
        return 0.0
    tail = weighted_norm(a.restrict(lo, n_last), p, s)
    if math.isinf(p):
        return 1.0 if tail >= total else 0.0
    return float((tail / total) ** p)


class DecayEstimate(float):
    """A fitted decay exponent; behaves as a float.

    Attributes:
        capped: True when the fit exceeded :data:`DECAY_CAP` (the value is
            then the cap) or the range was all zero (the value is +inf).
        blocks: Number of dyadic blocks used in the fit.
    """

    capped: bool
    blocks: int

    def __new__(cls, value: float, capped: bool = False, blocks: int = 0):
        obj = super().__new__(cls, value)
        obj.capped = capped
        obj.blocks = blocks
        return obj

    def __repr__(self) -> str:
        tag = ", capped" if self.capped else ""
        return f"DecayEstimate({float(self)!r}{tag})"


def dyadic_blocks(n_min: int, n_max: int) -> list[tuple[int, int]]:
    """Split ``[n_min, n_max]`` into blocks ``[2^j n_min, 2^{j+1} n_min)``."""
    blocks = []
    lo = n_min
    while lo <= n_max:
        hi = min(2 * lo - 1, n_max)
        blocks.append((lo, hi))
        lo = 2 * lo
    # a trailing block much shorter than its predecessor biases the fit
    if len(blocks) > 1 and blocks[-1][1] - blocks[-1][0] + 1 < (blocks[-2][1] - blocks[-2][0] + 1) // 2:
        last = blocks.pop()
        blocks[-1] = (blocks[-1][0], last[1])
    return blocks


def estimate_decay(a: CoeffSeq, n_min: int = 8, n_max: int | None = None) -> DecayEstimate:
    """Fit ``|a_n| ~ n^{-s}`` using maxima over dyadic blocks.

    In each block the maximum of ``|a_n|`` is taken together with the index
    where it is attained; ``s`` is minus the least-squares slope of
    ``log max`` against ``log argmax``. Block maxima make the fit insensitive
    to sign changes and structural zeros.

    Args:
        a: Sequence to analyse.
        n_min: First index of the fit range (>= 1).
        n_max: Last index; defaults to the last available index.

    Returns:
        A :class:`DecayEstimate`. An all-zero range gives ``+inf`` with
        ``capped=True``; fits above :data:`DECAY_CAP` are clipped and flagged.
    """
    if n_max is None:
        n_max = a.stop_index - 1
    n_min = int(n_min)
    n_max = int(n_max)
    if n_min < 1:
        raise ValueError("n_min must be >= 1")
    if n_max < 4 * n_min:
        raise ValueError(f"need n_max >= 4*n_min (got n_min={n_min}, n_max={n_max})")
    sub = a.restrict(n_min, n_max)
    mag = np.abs(sub.values)
    if not np.any(mag > 0):
        return DecayEstimate(math.inf, capped=True, blocks=0)
    xs, ys = [], []
    for lo, hi in dyadic_blocks(n_min, n_max):
        seg = mag[lo - n_min:hi - n_min + 1]
        k = int(np.argmax(seg))
        if seg[k] > 0:
            xs.append(math.log(lo + k))
            ys.append(math.log(seg[k]))
    if len(xs) < 2:
        return DecayEstimate(DECAY_CAP, capped=True, blocks=len(xs))
    slope = np.polyfit(np.array(xs), np.array(ys), 1)[0]
    s = -float(slope)
    if s > DECAY_CAP:
        return DecayEstimate(DECAY_CAP, capped=True, blocks=len(xs))
    return DecayEstimate(s, capped=False, blocks=len(xs))


def from_function(fn, n_min: int, n_max: int, kind: str = "plain") -> CoeffSeq:
    """Tabulate ``fn(n)`` for ``n = n_min..n_max`` (vectorized call)."""
    n = np.arange(n_min, n_max + 1)
    return CoeffSeq(kind, fn(n), n_min)


def concat(parts: Iterable[CoeffSeq]) -> CoeffSeq:
    """Join sequences whose index ranges are consecutive."""
    parts = list(parts)
    for left, right in zip(parts, parts[1:]):
        if left.stop_index != right.start_index or left.kind != right.kind:
            raise AlignmentError("sequences are not consecutive")
    return CoeffSeq(parts[0].kind, np.concatenate([p.values for p in parts]),
                    parts[0].start_index)
