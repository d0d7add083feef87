"""Synthetic ground truth: band-limited edge sets, piecewise-constant images,
Dirac streams, and k-space sampling masks.

Fourier coefficients of the piecewise-constant phantoms are computed by
midpoint-rule quadrature on an oversampled raster (error O(1/oversample));
the acceptance thresholds downstream are set accordingly.  Dirac streams are
exact to rounding.  All randomness flows through counter-based Philox
generators so results are independent of thread placement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fft import fft2, ifft2
from .grid import GridShape, IndexSet2D
from .lifting import KSpaceArray, embed, gather


@dataclass(frozen=True)
class EdgePolynomial:
    """Trigonometric polynomial with conjugate-symmetric coefficients.

    ``coeffs`` is aligned with ``lambda0`` the same way KSpaceArray values
    are; symmetry c[-k] = conj(c[k]) makes the polynomial real-valued.
    """

    lambda0: IndexSet2D
    coeffs: np.ndarray

    def __post_init__(self):
        if not self.lambda0.rectangular:
            raise ValueError("edge-polynomial support must be rectangular")
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.lambda0.extents:
            raise ValueError("coefficient shape does not match support extents")
        object.__setattr__(self, "coeffs", c)
        if np.allclose(c, 0.0):
            raise ValueError("edge polynomial must not be identically zero")
        sym = _conj_reflect(self.lambda0, c)
        if sym is None or not np.allclose(c, sym, atol=1e-12 * max(1.0, np.abs(c).max())):
            raise ValueError("coefficients must satisfy c[-k] == conj(c[k])")

    def to_json_dict(self) -> dict:
        return {
            "lambda0": self.lambda0.to_json_dict(),
            "coeffs": [
                [int(k1), int(k2), float(v.real), float(v.imag)]
                for (k1, k2), v in zip(self.lambda0.indices, self.coeffs.ravel())
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EdgePolynomial":
        lam0 = IndexSet2D.from_json_dict(d["lambda0"])
        c = np.zeros(lam0.extents, dtype=np.complex128)
        for k1, k2, re, im in d["coeffs"]:
            c[k1 - lam0.kmin[0], k2 - lam0.kmin[1]] = re + 1j * im
        return cls(lam0, c)


def _conj_reflect(iset: IndexSet2D, c: np.ndarray) -> np.ndarray | None:
    """conj(c[-k]) aligned like c, or None if -k leaves the support."""
    neg = -iset.indices
    rel = neg - iset.kmin
    e1, e2 = iset.extents
    if (rel < 0).any() or (rel[:, 0] >= e1).any() or (rel[:, 1] >= e2).any():
        return None
    flat = np.conj(c[rel[:, 0], rel[:, 1]])
    return flat.reshape(e1, e2)


def rasterize_mu(edge: EdgePolynomial, shape: GridShape, offset: float = 0.0) -> np.ndarray:
    """Sample the polynomial on the uniform grid over [0,1)^2 via zero-padded
    inverse FFT.  ``offset`` shifts the sample points by a fraction of a pixel
    per axis (0.5 = midpoints)."""
    c = edge.coeffs
    if offset != 0.0:
        r1, r2 = edge.lambda0.axis_ranges()
        tw1 = np.exp(2j * np.pi * r1 * offset / shape.n1)
        tw2 = np.exp(2j * np.pi * r2 * offset / shape.n2)
        c = c * tw1[:, None] * tw2[None, :]
    g = embed(c, edge.lambda0, shape)
    vals = ifft2(g) * shape.size
    scale = max(np.abs(vals).max(), 1e-300)
    if np.abs(vals.imag).max() > 1e-10 * scale:
        raise ValueError("edge polynomial raster has non-negligible imaginary part")
    return vals.real


def mu_values_at(edge: EdgePolynomial, points: np.ndarray) -> np.ndarray:
    """Evaluate the polynomial at arbitrary points in [0,1)^2 (direct sum)."""
    pts = np.atleast_2d(points)
    phases = np.exp(2j * np.pi * (pts @ edge.lambda0.indices.T.astype(float)))
    vals = phases @ edge.coeffs.ravel()
    return vals.real


@dataclass(frozen=True)
class Phantom:
    """Piecewise-constant image: one amplitude per sign region of the edge set."""

    edge: EdgePolynomial
    region_values: tuple[float, float] = (1.0, 0.0)
    oversample: int = 8

    def __post_init__(self):
        if self.oversample < 4:
            raise ValueError("oversample must be at least 4")
        if not all(np.isfinite(self.region_values)):
            raise ValueError("region amplitudes must be finite")

    def rasterize(self, gamma_extents: tuple[int, int]) -> np.ndarray:
        """Indicator raster on the oversampled midpoint grid."""
        shape = GridShape(self.oversample * gamma_extents[0], self.oversample * gamma_extents[1])
        mu = rasterize_mu(self.edge, shape, offset=0.5)
        a_pos, a_neg = self.region_values
        return np.where(mu > 0, a_pos, a_neg)


def kspace_of_image(img: np.ndarray, gamma: IndexSet2D) -> KSpaceArray:
    """Fourier coefficients of a [0,1)^2 image sampled at pixel midpoints.

    Midpoint-rule quadrature of the Fourier integral; the half-pixel offset
    is compensated with the matching phase so the estimate is second order
    in the grid spacing away from discontinuities.
    """
    n1, n2 = img.shape
    coef = fft2(img) / (n1 * n2)
    vals = gather(coef, gamma)
    r1, r2 = gamma.axis_ranges()
    ph1 = np.exp(-1j * np.pi * r1 / n1)
    ph2 = np.exp(-1j * np.pi * r2 / n2)
    return KSpaceArray(gamma, vals * ph1[:, None] * ph2[None, :])


def phantom_fourier(ph: Phantom, gamma: IndexSet2D) -> KSpaceArray:
    """Quadrature Fourier samples of the phantom on gamma."""
    return kspace_of_image(ph.rasterize(gamma.extents), gamma)


def dirac_fourier(locations, amps, gamma: IndexSet2D) -> KSpaceArray:
    """Exact Fourier samples of a weighted Dirac stream on [0,1)^2."""
    locs = np.atleast_2d(np.asarray(locations, dtype=float))
    amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
    if locs.shape[0] != amps.size:
        raise ValueError("locations and amplitudes must pair up")
    e1, e2 = gamma.extents
    if locs.shape[0] == 0:
        return KSpaceArray(gamma, np.zeros((e1, e2)))
    if len(np.unique(locs, axis=0)) != locs.shape[0]:
        raise ValueError("Dirac locations must be distinct")
    k = gamma.indices.astype(float)
    phases = np.exp(-2j * np.pi * (k @ locs.T))
    vals = (phases * amps[None, :]).sum(axis=1)
    return KSpaceArray(gamma, vals.reshape(e1, e2))


def random_edge_polynomial(
    lambda0: IndexSet2D,
    seed: int,
    min_region_area: float = 0.02,
    raster: int = 256,
    max_tries: int = 200,
) -> EdgePolynomial:
    """Random conjugate-symmetric coefficients, rejected until the zero
    level-set is non-empty and both sign regions cover the minimum area."""
    rng = np.random.default_rng(np.random.Philox(key=seed))
    e1, e2 = lambda0.extents
    for _ in range(max_tries):
        raw = rng.standard_normal((e1, e2)) + 1j * rng.standard_normal((e1, e2))
        sym = _conj_reflect(lambda0, raw)
        if sym is None:
            raise ValueError("lambda0 is not symmetric; cannot impose conjugate symmetry")
        c = 0.5 * (raw + sym)
        edge = EdgePolynomial(lambda0, c)
        mu = rasterize_mu(edge, GridShape(raster, raster))
        frac_pos = float((mu > 0).mean())
        if min_region_area <= frac_pos <= 1.0 - min_region_area:
            return edge
    raise RuntimeError(f"no admissible edge polynomial found in {max_tries} draws")


@dataclass(frozen=True)
class SamplingMask:
    """Sampled k-space locations theta inside gamma."""

    gamma: IndexSet2D
    theta: IndexSet2D
    scheme: str = "uniform"
    seed: int = 0
    acceleration: float = 1.0
    sigma: float | None = None  # variable-density Gaussian width, recorded for replay

    def __post_init__(self):
        if not self.gamma.contains(self.theta):
            raise ValueError("theta must be a subset of gamma")

    def indicator(self) -> np.ndarray:
        """0/1 array aligned with the gamma rectangle."""
        out = np.zeros(self.gamma.extents)
        rel = self.theta.indices - self.gamma.kmin
        out[rel[:, 0], rel[:, 1]] = 1.0
        return out

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "acceleration": self.acceleration,
            "sigma": self.sigma,
            "gamma": self.gamma.to_json_dict(),
            "indices": self.theta.indices.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SamplingMask":
        return cls(
            gamma=IndexSet2D.from_json_dict(d["gamma"]),
            theta=IndexSet2D.from_indices(d["indices"]),
            scheme=d["scheme"],
            seed=d["seed"],
            acceleration=d["acceleration"],
            sigma=d.get("sigma"),
        )


def make_mask(
    gamma: IndexSet2D,
    scheme: str = "uniform",
    acceleration: float = 1.0,
    seed: int = 0,
) -> SamplingMask:
    """Random sampling locations at the requested acceleration.

    Uniform: a size-|gamma|/acceleration subset drawn without replacement.
    Variable density: keep probability proportional to a Gaussian in |k| with
    sigma = max extent / 4, renormalized to the same target count.  The DC
    index is always kept and draws are deterministic in the seed.
    """
    if acceleration < 1.0:
        raise ValueError("acceleration must be >= 1")
    m = len(gamma)
    target = int(round(m / acceleration))
    if target < 1:
        raise ValueError(f"acceleration {acceleration} leaves no samples")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    idx = gamma.indices
    dc = np.nonzero((idx[:, 0] == 0) & (idx[:, 1] == 0))[0]
    sigma = None
    if scheme == "uniform":
        order = rng.permutation(m)
    elif scheme == "variable_density":
        sigma = max(gamma.extents) / 4.0
        logp = -(idx[:, 0] ** 2 + idx[:, 1] ** 2) / (2.0 * sigma**2)
        # Gumbel top-k: sorting by perturbed log-weights samples without
        # replacement with the stated probabilities
        gumbel = -np.log(-np.log(rng.uniform(size=m)))
        order = np.argsort(-(logp + gumbel), kind="stable")
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    keep = list(order[:target])
    if dc.size and dc[0] not in keep:
        keep[-1] = dc[0]
    theta = IndexSet2D(idx[np.asarray(keep)])
    return SamplingMask(gamma, theta, scheme, seed, acceleration, sigma)


def sample_kspace(x: KSpaceArray, mask: SamplingMask) -> np.ndarray:
    """Measured values b, aligned with mask.theta.indices."""
    rel = mask.theta.indices - x.gamma.kmin
    return x.values[rel[:, 0], rel[:, 1]].copy()


def add_noise(b: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    """Additive complex white Gaussian noise on the samples (the one knob)."""
    if sigma == 0.0:
        return b.copy()
    rng = np.random.default_rng(np.random.Philox(key=seed))
    noise = rng.standard_normal(b.shape) + 1j * rng.standard_normal(b.shape)
    return b + sigma * noise / np.sqrt(2.0)
