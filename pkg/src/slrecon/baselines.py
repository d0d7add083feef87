"""Reference solvers: singular value thresholding on the dense lifting,
zero-filled recovery, and a minimal primal-dual total-variation solver.

These exist for comparison and oracle duty, not performance; SVT refuses
problems whose dense lifted matrix would be unreasonably large.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._fft import fft2, ifft2
from .grid import IndexSet2D
from .lifting import KSpaceArray, LiftingConfig, lift_dense
from .phantom import SamplingMask
from .report import IterationRecord, SolverReport

DENSE_ENTRY_CAP = 50_000_000


@dataclass
class SVTConfig:
    step: float = 1.0
    threshold: float = 3e-2  # relative to sigma_1 of the zero-filled lifting
    max_iter: int = 50
    tol: float = 0.0  # 0 runs exactly max_iter iterations

    def __post_init__(self):
        if self.step <= 0 or self.threshold < 0 or self.max_iter < 1 or self.tol < 0:
            raise ValueError("SVT parameters must be positive (threshold and tol may be zero)")


def zero_fill(b: np.ndarray, mask: SamplingMask, gamma: IndexSet2D | None = None) -> KSpaceArray:
    """Samples placed on theta, zeros elsewhere."""
    gamma = gamma or mask.gamma
    if gamma != mask.gamma:
        raise ValueError("gamma disagrees with the mask")
    out = np.zeros(gamma.extents, dtype=np.complex128)
    rel = mask.theta.indices - gamma.kmin
    out[rel[:, 0], rel[:, 1]] = np.asarray(b, dtype=np.complex128).reshape(-1)
    return KSpaceArray(gamma, out)


def _delift_geometry(cfg: LiftingConfig):
    """Where each gamma index lands in the lifted matrix, plus the weights."""
    l2 = cfg.lambda2.indices
    l1 = cfg.lambda1.indices
    diff = l2[:, None, :] - l1[None, :, :]
    rel = diff - cfg.gamma.kmin
    e1, e2 = cfg.gamma.extents
    inside = (
        (rel[..., 0] >= 0) & (rel[..., 0] < e1) & (rel[..., 1] >= 0) & (rel[..., 1] < e2)
    )
    flat = rel[..., 0] * e2 + rel[..., 1]
    return inside, flat


def delift(X: np.ndarray, cfg: LiftingConfig) -> tuple[KSpaceArray, list[tuple[int, int]]]:
    """Least-squares inverse of the lifting (pseudo-inverse applied to X).

    Each k-space entry is the weight-weighted average of every matrix
    position holding a copy of it.  Indices whose weights all vanish (the DC
    entry under gradient weighting) are returned as zero and flagged.
    """
    nb = cfg.weighting.nblocks
    if X.shape != (nb * cfg.n_out, cfg.n_filter):
        raise ValueError(f"lifted matrix shape {X.shape} does not match config")
    inside, flat = _delift_geometry(cfg)
    e1, e2 = cfg.gamma.extents
    numer = np.zeros(e1 * e2, dtype=np.complex128)
    denom = np.zeros(e1 * e2)
    flat_in = flat[inside]
    for blk, w in enumerate(cfg.weighting.multipliers(cfg.gamma)):
        xb = X[blk * cfg.n_out : (blk + 1) * cfg.n_out, :]
        wflat = w.ravel()[flat_in]
        np.add.at(numer, flat_in, np.conj(wflat) * xb[inside])
        np.add.at(denom, flat_in, np.abs(wflat) ** 2)
    # zero weight sum: either all-zero weights (DC under gradient weighting)
    # or an index the matrix never references (asymmetric filter supports)
    undetermined = denom == 0.0
    safe = np.where(denom > 0.0, denom, 1.0)
    vals = (numer / safe).reshape(e1, e2)
    flagged = [
        (int(i // e2 + cfg.gamma.kmin[0]), int(i % e2 + cfg.gamma.kmin[1]))
        for i in np.nonzero(undetermined)[0]
    ]
    return KSpaceArray(cfg.gamma, vals), flagged


def svt_solve(
    b: np.ndarray,
    mask: SamplingMask,
    lifting: LiftingConfig,
    cfg: SVTConfig,
    reference: KSpaceArray | None = None,
) -> tuple[KSpaceArray, SolverReport]:
    """Singular value thresholding on the dense lifted matrix.

    Splitting iteration with a running multiplier: soft-threshold the
    singular values of lift(x) + U, de-lift by the lifting's pseudo-inverse,
    take the data-consistency step x <- x - step (P x - b) (step = 1
    replaces the sampled entries outright), then update the multiplier.
    With the hard data step the fixed point is the data-consistent nuclear
    norm minimizer for any positive threshold; the threshold (relative to
    sigma_1 of the zero-filled lifting) only sets the convergence speed.
    """
    rows, cols = lifting.lifted_shape
    if rows * cols > DENSE_ENTRY_CAP:
        raise ValueError(
            f"dense lifted matrix would hold {rows * cols} entries "
            f"(cap {DENSE_ENTRY_CAP}); use the giraf solver for this size"
        )
    if mask.gamma != lifting.gamma:
        raise ValueError("mask and lifting configs disagree on gamma")
    b = np.asarray(b, dtype=np.complex128).reshape(-1)
    bfill = zero_fill(b, mask).values
    theta_ind = mask.indicator()
    x = bfill.copy()
    tx = lift_dense(KSpaceArray(lifting.gamma, x), lifting)
    s0 = np.linalg.svd(tx, compute_uv=False)
    tau_abs = cfg.threshold * float(s0[0])
    multiplier = np.zeros_like(tx)
    report = SolverReport(solver="svt")

    for n in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        u, s, vh = np.linalg.svd(tx + multiplier, full_matrices=False)
        t1 = time.perf_counter()
        s_shrunk = np.maximum(s - cfg.step * tau_abs, 0.0)
        z = (u * s_shrunk[None, :]) @ vh
        x_new, _flagged = delift(z - multiplier, lifting)
        x_new = x_new.values
        # data-consistency step; at step=1 this also fixes the DC entry the
        # gradient weighting cannot see (DC is always sampled)
        x_new = x_new - cfg.step * (theta_ind * x_new - bfill)
        tx = lift_dense(KSpaceArray(lifting.gamma, x_new), lifting)
        multiplier = multiplier + tx - z
        t2 = time.perf_counter()
        change = float(np.linalg.norm(x_new - x) / max(np.linalg.norm(x), 1e-300))
        data_fit = float(np.linalg.norm(theta_ind * x_new - bfill) ** 2)
        nuclear = float(s_shrunk.sum())  # nuclear norm of the thresholded matrix
        rec = IterationRecord(
            iteration=n,
            penalty=nuclear,
            data_fit=data_fit,
            objective=nuclear + data_fit,
            sigma_max=float(s[0]),
            sigma_min=float(s[-1]),
            change=change,
            decomp_time=t1 - t0,
            solve_time=t2 - t1,
        )
        if reference is not None:
            rec.mse_vs_reference = float(
                np.linalg.norm(x_new - reference.values) ** 2
                / np.linalg.norm(reference.values) ** 2
            )
        report.iterations.append(rec)
        x = x_new
        if cfg.tol > 0 and change < cfg.tol:
            report.converged = True
            break

    result = KSpaceArray(lifting.gamma, x)
    if reference is not None:
        report.final_mse = report.iterations[-1].mse_vs_reference
    return result, report


def _fwd_diff(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.roll(u, -1, axis=0) - u, np.roll(u, -1, axis=1) - u


def _div(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Backward-difference divergence; the gradient adjoint is -div."""
    return (p1 - np.roll(p1, 1, axis=0)) + (p2 - np.roll(p2, 1, axis=1))


def tv_solve(
    b: np.ndarray,
    mask: SamplingMask,
    gamma: IndexSet2D,
    weight: float = 1e3,
    iters: int = 300,
) -> KSpaceArray:
    """Isotropic total-variation recovery by a fixed primal-dual iteration.

    Minimizes TV(u) + (weight/2) ||sample(F u) - b||^2 over complex images u
    on the gamma-sized pixel grid (periodic differences, unitary Fourier
    map internally).  Deterministic: fixed step sizes and iteration count;
    returns the k-space of the final image.
    """
    if weight <= 0:
        raise ValueError("weight must be positive")
    if gamma != mask.gamma:
        raise ValueError("gamma disagrees with the mask")
    e1, e2 = gamma.extents
    ntot = e1 * e2
    r1, r2 = gamma.axis_ranges()
    i1, i2 = r1 % e1, r2 % e2
    rel = mask.theta.indices - gamma.kmin
    # k-space arrays store coefficients of the trig-polynomial image
    # (image = ifft * ntot); the unitary-scale data is b * sqrt(ntot)
    bu = np.asarray(b, dtype=np.complex128).reshape(-1) * np.sqrt(ntot)

    def forward(u):
        return (fft2(u) / np.sqrt(ntot))[np.ix_(i1, i2)][rel[:, 0], rel[:, 1]]

    def adjoint(v):
        g = np.zeros((e1, e2), dtype=np.complex128)
        kk = np.zeros((e1, e2), dtype=np.complex128)
        kk[rel[:, 0], rel[:, 1]] = v
        g[np.ix_(i1, i2)] = kk
        return ifft2(g) * np.sqrt(ntot)

    L = np.sqrt(8.0 + 1.0)
    sigma = tau = 1.0 / L
    u = adjoint(bu)
    p1 = np.zeros_like(u)
    p2 = np.zeros_like(u)
    q = np.zeros_like(bu)
    ubar = u.copy()
    for _ in range(iters):
        g1, g2 = _fwd_diff(ubar)
        p1 = p1 + sigma * g1
        p2 = p2 + sigma * g2
        mag = np.maximum(1.0, np.sqrt(np.abs(p1) ** 2 + np.abs(p2) ** 2))
        p1, p2 = p1 / mag, p2 / mag
        q = (q + sigma * (forward(ubar) - bu)) / (1.0 + sigma / weight)
        u_old = u
        u = u + tau * (_div(p1, p2) - adjoint(q))
        ubar = 2.0 * u - u_old
    ks = (fft2(u) / ntot)[np.ix_(i1, i2)]
    return KSpaceArray(gamma, ks)
