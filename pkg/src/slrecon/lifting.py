"""Convolutional lifting of k-space data to a structured matrix.

A filter ``h`` supported on ``lambda1`` maps through the lifting as
``T(x) h = restrict(weight(x) conv h, lambda2)`` where the convolution is the
plain (non-circular) discrete convolution of the gamma-supported data with
the filter, and ``lambda2`` is the valid output set.  With gradient weighting
the matrix stacks the k1-weighted block on top of the k2-weighted block.

Both realizations live here: ``lift_dense`` materializes the matrix entry by
entry (the oracle), while ``apply_filter`` / ``adjoint_apply`` /
``gram_matrix`` evaluate the same maps implicitly with circular FFTs on a
grid just large enough that the restricted outputs are alias-free.

For symmetric (odd-extent) filter supports every matrix entry is an actual
weighted sample.  Asymmetric supports are allowed, but the requirement
dilate(lambda1, lambda2) == gamma then forces one boundary output row to
read a single index just outside gamma, which counts as zero; sliding-window
identities (e.g. exact annihilation of a restricted infinite sequence) hold
only in the symmetric case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._fft import fft2, ifft2
from .grid import GridShape, IndexSet2D, dilate, valid_output_set

IDENTITY = "identity"
GRADIENT = "gradient"


@dataclass(frozen=True)
class Weighting:
    """Diagonal k-space weighting applied before convolution.

    ``identity`` leaves the data untouched; ``gradient`` multiplies by the
    integer frequencies k1 and k2 (one block each), the constant -j*2*pi
    being dropped since it only rescales all singular values uniformly.
    """

    kind: str = IDENTITY

    def __post_init__(self):
        if self.kind not in (IDENTITY, GRADIENT):
            raise ValueError(f"unknown weighting kind {self.kind!r}")

    @property
    def nblocks(self) -> int:
        return 1 if self.kind == IDENTITY else 2

    def multipliers(self, gamma: IndexSet2D) -> list[np.ndarray]:
        """Per-block real multiplier arrays shaped like the gamma rectangle."""
        r1, r2 = gamma.axis_ranges()
        if self.kind == IDENTITY:
            return [np.ones((r1.size, r2.size))]
        k1 = np.broadcast_to(r1[:, None], (r1.size, r2.size)).astype(float)
        k2 = np.broadcast_to(r2[None, :], (r1.size, r2.size)).astype(float)
        return [k1, k2]


@dataclass(frozen=True)
class KSpaceArray:
    """Complex Fourier samples on a rectangular index set.

    ``values`` is a 2-D complex array aligned row-major with the rectangle's
    index ranges (axis 0 = k1, axis 1 = k2).
    """

    gamma: IndexSet2D
    values: np.ndarray

    def __post_init__(self):
        if not self.gamma.rectangular:
            raise ValueError("KSpaceArray requires a rectangular index set")
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.gamma.extents:
            raise ValueError(
                f"values shape {v.shape} does not match gamma extents {self.gamma.extents}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("k-space values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> GridShape:
        return GridShape(*self.gamma.extents)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def image(self, shape: GridShape | None = None) -> np.ndarray:
        """Spatial-domain view: inverse FFT of the grid-embedded samples."""
        shape = shape or self.grid
        g = embed(self.values, self.gamma, shape)
        return ifft2(g) * shape.size


def embed(values: np.ndarray, iset: IndexSet2D, shape: GridShape) -> np.ndarray:
    """Scatter rectangle-aligned values onto an FFT grid at signed indices mod n."""
    r1, r2 = iset.axis_ranges()
    if r1.size > shape.n1 or r2.size > shape.n2:
        raise ValueError(f"index set extents {iset.extents} exceed grid {shape}")
    g = np.zeros(shape.as_tuple(), dtype=np.complex128)
    g[np.ix_(r1 % shape.n1, r2 % shape.n2)] = values
    return g


def gather(g: np.ndarray, iset: IndexSet2D) -> np.ndarray:
    """Read rectangle-aligned values back off an FFT grid."""
    n1, n2 = g.shape
    r1, r2 = iset.axis_ranges()
    return g[np.ix_(r1 % n1, r2 % n2)]


def _alias_free_extents(gamma: IndexSet2D, lambda1: IndexSet2D, lambda2: IndexSet2D) -> tuple[int, int]:
    """Minimal per-axis grid so lambda2-restricted circular convolution is exact.

    Outputs on lambda2 read data indices in [min(l2)-max(l1), max(l2)-min(l1)];
    the grid must hold the union of that window and gamma injectively.
    """
    need = []
    for ax in range(2):
        lo = min(int(gamma.kmin[ax]), int(lambda2.kmin[ax]) - int(lambda1.kmax[ax]))
        hi = max(int(gamma.kmax[ax]), int(lambda2.kmax[ax]) - int(lambda1.kmin[ax]))
        need.append(hi - lo + 1)
    return (need[0], need[1])


@dataclass(frozen=True)
class LiftingConfig:
    """Geometry of one lifting: supports, weighting, and the FFT work grid."""

    gamma: IndexSet2D
    lambda1: IndexSet2D
    lambda2: IndexSet2D
    weighting: Weighting = field(default_factory=Weighting)
    fft_grid: GridShape = None  # filled by make(); required here

    def __post_init__(self):
        if dilate(self.lambda1, self.lambda2) != self.gamma:
            raise ValueError("lambda2 must satisfy dilate(lambda1, lambda2) == gamma")
        if self.fft_grid is None:
            raise ValueError("fft_grid is required; use LiftingConfig.make")
        ge = self.gamma.extents
        if self.fft_grid.n1 < ge[0] or self.fft_grid.n2 < ge[1]:
            raise ValueError(f"fft_grid {self.fft_grid} smaller than gamma extents {ge}")

    @classmethod
    def make(
        cls,
        gamma: IndexSet2D,
        lambda1: IndexSet2D,
        weighting: Weighting | str = IDENTITY,
        fft_grid: GridShape | None = None,
        pad: int = 0,
    ) -> "LiftingConfig":
        """Build a config with lambda2 and (by default) the minimal safe grid.

        For symmetric (odd-extent) filters the minimal grid equals the gamma
        extents; asymmetric supports need one extra sample per axis.  ``pad``
        adds extra padding on top (used to validate grid-independence).
        """
        if isinstance(weighting, str):
            weighting = Weighting(weighting)
        lambda2 = valid_output_set(gamma, lambda1)
        if fft_grid is None:
            e1, e2 = _alias_free_extents(gamma, lambda1, lambda2)
            fft_grid = GridShape(e1 + pad, e2 + pad)
        return cls(gamma, lambda1, lambda2, weighting, fft_grid)

    @property
    def n_filter(self) -> int:
        return len(self.lambda1)

    @property
    def n_out(self) -> int:
        return len(self.lambda2)

    @property
    def lifted_shape(self) -> tuple[int, int]:
        return (self.weighting.nblocks * self.n_out, self.n_filter)

    def check_grid(self):
        e1, e2 = _alias_free_extents(self.gamma, self.lambda1, self.lambda2)
        if self.fft_grid.n1 < e1 or self.fft_grid.n2 < e2:
            raise ValueError(
                f"fft_grid {self.fft_grid} too small for alias-free valid region "
                f"({e1} x {e2} needed)"
            )


def _check_input(x: KSpaceArray, cfg: LiftingConfig):
    if x.gamma != cfg.gamma:
        raise ValueError("k-space array is not defined on the config's gamma")


def lift_dense(x: KSpaceArray, cfg: LiftingConfig) -> np.ndarray:
    """Materialize the lifted matrix (rows = blocks x lambda2, cols = lambda1).

    Entry ((b, l), k) holds the block-b weighted sample at index l - k, or
    zero when l - k falls outside gamma.
    """
    _check_input(x, cfg)
    l2 = cfg.lambda2.indices
    l1 = cfg.lambda1.indices
    diff = l2[:, None, :] - l1[None, :, :]  # (|L2|, N, 2)
    rel = diff - cfg.gamma.kmin
    e1, e2 = cfg.gamma.extents
    inside = (
        (rel[..., 0] >= 0) & (rel[..., 0] < e1) & (rel[..., 1] >= 0) & (rel[..., 1] < e2)
    )
    i1 = np.clip(rel[..., 0], 0, e1 - 1)
    i2 = np.clip(rel[..., 1], 0, e2 - 1)
    blocks = []
    for w in cfg.weighting.multipliers(cfg.gamma):
        wx = w * x.values
        blocks.append(np.where(inside, wx[i1, i2], 0.0))
    return np.concatenate(blocks, axis=0)


def apply_filter(x: KSpaceArray, h: np.ndarray, cfg: LiftingConfig) -> np.ndarray:
    """Implicit lifted matrix-vector product, via circular FFT convolution.

    ``h`` is aligned with cfg.lambda1.indices; the result stacks the per-block
    outputs on lambda2 (aligned with cfg.lambda2.indices) and equals
    lift_dense(x, cfg) @ h up to rounding.
    """
    _check_input(x, cfg)
    cfg.check_grid()
    h = np.asarray(h, dtype=np.complex128).reshape(-1)
    if h.size != cfg.n_filter:
        raise ValueError(f"filter has {h.size} taps, expected {cfg.n_filter}")
    hgrid = embed(h.reshape(cfg.lambda1.extents), cfg.lambda1, cfg.fft_grid)
    hhat = fft2(hgrid)
    out = []
    for w in cfg.weighting.multipliers(cfg.gamma):
        g = embed(w * x.values, cfg.gamma, cfg.fft_grid)
        conv = ifft2(fft2(g) * hhat)
        out.append(gather(conv, cfg.lambda2).ravel())
    return np.concatenate(out)


def adjoint_apply(v: np.ndarray, h: np.ndarray, cfg: LiftingConfig) -> KSpaceArray:
    """Adjoint of apply_filter for a fixed filter: scatter, correlate, weight."""
    cfg.check_grid()
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    nb = cfg.weighting.nblocks
    if v.size != nb * cfg.n_out:
        raise ValueError(f"expected {nb * cfg.n_out} output samples, got {v.size}")
    h = np.asarray(h, dtype=np.complex128).reshape(-1)
    hgrid = embed(h.reshape(cfg.lambda1.extents), cfg.lambda1, cfg.fft_grid)
    hhat_conj = np.conj(fft2(hgrid))
    acc = np.zeros(cfg.gamma.extents, dtype=np.complex128)
    for b, w in enumerate(cfg.weighting.multipliers(cfg.gamma)):
        vb = v[b * cfg.n_out : (b + 1) * cfg.n_out].reshape(cfg.lambda2.extents)
        g = embed(vb, cfg.lambda2, cfg.fft_grid)
        corr = ifft2(fft2(g) * hhat_conj)
        acc += w * gather(corr, cfg.gamma)
    return KSpaceArray(cfg.gamma, acc)


def gram_matrix(x: KSpaceArray, cfg: LiftingConfig, method: str = "fft") -> np.ndarray:
    """Hermitian N x N Gram of the lifting, T(x)^H T(x).

    The fast path computes one Gram row per filter index as a windowed
    correlation of the weighted data (2 FFTs per row), which is exact: the
    lambda2 window enters as an explicit indicator mask rather than through
    the circular approximation.  ``method='dense'`` multiplies the
    materialized matrix instead.
    """
    if method == "dense":
        t = lift_dense(x, cfg)
        g = t.conj().T @ t
        return 0.5 * (g + g.conj().T)
    if method != "fft":
        raise ValueError(f"unknown gram method {method!r}")
    _check_input(x, cfg)
    cfg.check_grid()
    n = cfg.n_filter
    shape = cfg.fft_grid.as_tuple()
    window = embed(np.ones(cfg.lambda2.extents), cfg.lambda2, cfg.fft_grid).real
    gram = np.zeros((n, n), dtype=np.complex128)
    l1 = cfg.lambda1.indices
    pos1 = l1[:, 0] % shape[0]
    pos2 = l1[:, 1] % shape[1]
    for w in cfg.weighting.multipliers(cfg.gamma):
        y = embed(w * x.values, cfg.gamma, cfg.fft_grid)
        yrev = np.roll(y[::-1, ::-1], 1, axis=(0, 1))  # y reversed: yrev[t] = y[-t]
        yrev_hat = fft2(yrev)
        yconj = np.conj(y)
        for row, (k1, k2) in enumerate(l1):
            z = window * np.roll(yconj, (int(k1), int(k2)), axis=(0, 1))
            corr = ifft2(fft2(z) * yrev_hat)
            gram[row] += corr[pos1, pos2]
    return 0.5 * (gram + gram.conj().T)
