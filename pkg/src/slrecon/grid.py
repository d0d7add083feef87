"""Index-set algebra on the 2-D integer grid.

All Fourier-domain supports used by the liftings (sampling window, filter
support, valid-convolution output set, edge-polynomial support) are finite
subsets of Z^2.  Rectangular sets are centered at the origin by convention:
an extent ``e`` spans ``-(e//2) .. (e-1)//2`` per axis, so odd extents are
symmetric and even extents lean one step to the negative side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


def centered_range(extent: int, offset: int = 0) -> np.ndarray:
    """Signed indices of a centered 1-D window of the given extent."""
    if extent < 1:
        raise ValueError(f"extent must be >= 1, got {extent}")
    lo = -(extent // 2) + offset
    return np.arange(lo, lo + extent, dtype=np.int64)


@dataclass(frozen=True)
class GridShape:
    """Dimensions of the FFT grid used for circular convolutions."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"grid dimensions must be positive, got {self}")

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    def as_tuple(self) -> tuple[int, int]:
        return (self.n1, self.n2)


@dataclass(frozen=True, eq=False)
class IndexSet2D:
    """A finite set of integer pairs (k1, k2).

    ``indices`` is canonical: unique rows, lexicographically sorted, shape
    (m, 2), dtype int64.  ``rectangular`` is true iff the set contains every
    integer pair inside its bounding box.
    """

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != 2 or idx.shape[0] == 0:
            raise ValueError("indices must be a non-empty (m, 2) integer array")
        idx = np.unique(idx, axis=0)  # sorts lexicographically
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    # -- constructors ------------------------------------------------------

    @classmethod
    def rect(cls, extent1: int, extent2: int, offset: tuple[int, int] = (0, 0)) -> "IndexSet2D":
        """Centered rectangle with given per-axis extents (optionally shifted)."""
        r1 = centered_range(extent1, offset[0])
        r2 = centered_range(extent2, offset[1])
        k1, k2 = np.meshgrid(r1, r2, indexing="ij")
        return cls(np.stack([k1.ravel(), k2.ravel()], axis=1))

    @classmethod
    def from_indices(cls, pairs: Iterable[Sequence[int]]) -> "IndexSet2D":
        return cls(np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2))

    # -- basic queries -----------------------------------------------------

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return (tuple(row) for row in self.indices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexSet2D):
            return NotImplemented
        return self.indices.shape == other.indices.shape and bool(
            np.array_equal(self.indices, other.indices)
        )

    @property
    def kmin(self) -> np.ndarray:
        return self.indices.min(axis=0)

    @property
    def kmax(self) -> np.ndarray:
        return self.indices.max(axis=0)

    @property
    def extents(self) -> tuple[int, int]:
        e = self.kmax - self.kmin + 1
        return (int(e[0]), int(e[1]))

    @property
    def rectangular(self) -> bool:
        e1, e2 = self.extents
        return len(self) == e1 * e2

    def contains(self, other: "IndexSet2D") -> bool:
        mine = set(map(tuple, self.indices))
        return all(tuple(row) in mine for row in other.indices)

    def shifted(self, offset: tuple[int, int]) -> "IndexSet2D":
        return IndexSet2D(self.indices + np.asarray(offset, dtype=np.int64))

    def axis_ranges(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis index ranges; only meaningful for rectangular sets."""
        if not self.rectangular:
            raise ValueError("axis_ranges requires a rectangular set")
        lo = self.kmin
        hi = self.kmax
        return (
            np.arange(lo[0], hi[0] + 1, dtype=np.int64),
            np.arange(lo[1], hi[1] + 1, dtype=np.int64),
        )

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        if self.rectangular:
            e1, e2 = self.extents
            # offset relative to the centered position of the same extents
            canon = (-(e1 // 2), -(e2 // 2))
            off = (int(self.kmin[0]) - canon[0], int(self.kmin[1]) - canon[1])
            return {"kind": "rect", "extents": [e1, e2], "offset": list(off)}
        return {"kind": "list", "elements": self.indices.tolist(), "offset": [0, 0]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "IndexSet2D":
        if d["kind"] == "rect":
            e1, e2 = d["extents"]
            off = tuple(d.get("offset", (0, 0)))
            return cls.rect(e1, e2, offset=off)
        if d["kind"] == "list":
            return cls.from_indices(d["elements"])
        raise ValueError(f"unknown index-set kind {d.get('kind')!r}")

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "IndexSet2D":
        return cls.from_json_dict(json.loads(s))


def dilate(a: IndexSet2D, b: IndexSet2D) -> IndexSet2D:
    """Set of all pairwise sums {x + y : x in a, y in b}.

    For rectangular inputs with extents (p, q) and (r, s) the result is
    rectangular with extents (p + r - 1, q + s - 1).
    """
    if a.rectangular and b.rectangular:
        lo = a.kmin + b.kmin
        hi = a.kmax + b.kmax
        e = hi - lo + 1
        # rect() wants the offset relative to the centered position
        canon = np.array([-(int(e[0]) // 2), -(int(e[1]) // 2)])
        return IndexSet2D.rect(int(e[0]), int(e[1]), offset=tuple(lo - canon))
    sums = a.indices[:, None, :] + b.indices[None, :, :]
    return IndexSet2D(sums.reshape(-1, 2))


def valid_output_set(gamma: IndexSet2D, lambda1: IndexSet2D) -> IndexSet2D:
    """Output support of valid convolutions, positioned so dilate(lambda1, result) == gamma."""
    if not (gamma.rectangular and lambda1.rectangular):
        raise ValueError("valid_output_set requires rectangular gamma and lambda1")
    ge, fe = gamma.extents, lambda1.extents
    if fe[0] > ge[0] or fe[1] > ge[1]:
        raise ValueError(
            f"filter support {fe} exceeds grid extents {ge}; filter larger than grid"
        )
    lo = gamma.kmin - lambda1.kmin
    hi = gamma.kmax - lambda1.kmax
    e = hi - lo + 1
    canon = np.array([-(int(e[0]) // 2), -(int(e[1]) // 2)])
    return IndexSet2D.rect(int(e[0]), int(e[1]), offset=tuple(lo - canon))


def count_shifts(lambda1: IndexSet2D, lambda0: IndexSet2D) -> int:
    """Number of integer shifts of lambda0 that fit inside lambda1.

    For rectangular sets this is the product of (extent1_i - extent0_i + 1)
    over the axes; zero when lambda0 is larger than lambda1 on any axis.
    """
    if not (lambda1.rectangular and lambda0.rectangular):
        raise ValueError("count_shifts requires rectangular sets")
    e1, e0 = lambda1.extents, lambda0.extents
    per_axis = (e1[0] - e0[0] + 1, e1[1] - e0[1] + 1)
    if per_axis[0] <= 0 or per_axis[1] <= 0:
        return 0
    return per_axis[0] * per_axis[1]


def predicted_rank(lambda1: IndexSet2D, lambda0: IndexSet2D) -> int:
    """Predicted rank of the lifted matrix: |lambda1| minus the shift count.

    Valid as a rank statement only when the sampling window is large enough
    (gamma must contain the double dilation of lambda1 by lambda0); the
    caller is responsible for that hypothesis.
    """
    return len(lambda1) - count_shifts(lambda1, lambda0)
