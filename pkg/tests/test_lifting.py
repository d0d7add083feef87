import numpy as np
import pytest

from slrecon.grid import GridShape, IndexSet2D
from slrecon.lifting import (
    KSpaceArray,
    LiftingConfig,
    Weighting,
    adjoint_apply,
    apply_filter,
    gram_matrix,
    lift_dense,
)

from conftest import conv_oracle, random_kspace


def rel_err(a, b):
    return np.linalg.norm(np.ravel(a) - np.ravel(b)) / max(np.linalg.norm(np.ravel(b)), 1e-300)


class TestLiftDense:
    def test_ones_with_1x1_filter(self):
        gamma = IndexSet2D.rect(3, 3)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(1, 1))
        x = KSpaceArray(gamma, np.ones((3, 3)))
        t = lift_dense(x, cfg)
        assert t.shape == (9, 1)
        assert np.allclose(t, 1.0)

    def test_delta_columns_are_shifted_windows(self):
        gamma = IndexSet2D.rect(5, 5)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3))
        vals = np.zeros((5, 5), dtype=complex)
        vals[2, 2] = 1.0  # delta at origin
        x = KSpaceArray(gamma, vals)
        t = lift_dense(x, cfg)
        # every column holds a single unit entry (the delta appears once per shift)
        assert np.allclose(np.abs(t).sum(axis=0), 1.0)
        rng = np.random.default_rng(1)
        for _ in range(20):
            h = rng.standard_normal(9) + 1j * rng.standard_normal(9)
            oracle = conv_oracle(x, h, cfg.lambda1, cfg.lambda2)
            assert rel_err(t @ h, oracle) < 1e-12

    def test_matches_conv_oracle_random(self):
        gamma = IndexSet2D.rect(8, 7)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3), "gradient")
        x = random_kspace(gamma, 7)
        t = lift_dense(x, cfg)
        rng = np.random.default_rng(2)
        k1 = x.gamma.axis_ranges()[0][:, None] * np.ones((1, 7))
        k2 = np.ones((8, 1)) * x.gamma.axis_ranges()[1][None, :]
        x1 = KSpaceArray(gamma, k1 * x.values)
        x2 = KSpaceArray(gamma, k2 * x.values)
        for _ in range(5):
            h = rng.standard_normal(9) + 1j * rng.standard_normal(9)
            oracle = np.concatenate(
                [conv_oracle(x1, h, cfg.lambda1, cfg.lambda2),
                 conv_oracle(x2, h, cfg.lambda1, cfg.lambda2)]
            )
            assert rel_err(t @ h, oracle) < 1e-12

    def test_linearity(self):
        gamma = IndexSet2D.rect(6, 6)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3), "gradient")
        xa, xb = random_kspace(gamma, 3), random_kspace(gamma, 4)
        a, b = 1.7 - 0.3j, -0.6 + 2.1j
        combo = KSpaceArray(gamma, a * xa.values + b * xb.values)
        assert rel_err(
            lift_dense(combo, cfg), a * lift_dense(xa, cfg) + b * lift_dense(xb, cfg)
        ) < 1e-13

    def test_dirac_stream_annihilation(self):
        # 1-D-embedded Dirac stream: the filter whose roots sit at the Dirac
        # locations annihilates the lifted matrix to machine precision.
        K = 4
        rng = np.random.default_rng(5)
        locs = np.sort(rng.uniform(0, 1, K))
        amps = rng.standard_normal(K) + 1j * rng.standard_normal(K)
        gamma = IndexSet2D.rect(24, 1)
        k1 = gamma.axis_ranges()[0]
        vals = (amps[None, :] * np.exp(-2j * np.pi * k1[:, None] * locs[None, :])).sum(axis=1)
        x = KSpaceArray(gamma, vals.reshape(-1, 1))
        # coefficients of prod_m (z - exp(2j pi x_m))
        mu = np.array([1.0 + 0j])
        for xm in locs:
            mu = np.convolve(mu, np.array([-np.exp(2j * np.pi * xm), 1.0]))
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(K + 1, 1))
        t = lift_dense(x, cfg)
        resid = np.linalg.norm(t @ mu)
        assert resid < 1e-10 * np.linalg.norm(t) * np.linalg.norm(mu)

    def test_shape_mismatch_raises(self):
        cfg = LiftingConfig.make(IndexSet2D.rect(5, 5), IndexSet2D.rect(3, 3))
        x = random_kspace(IndexSet2D.rect(4, 4), 0)
        with pytest.raises(ValueError):
            lift_dense(x, cfg)


class TestApply:
    def test_delta_filter_identity_weighting(self):
        gamma = IndexSet2D.rect(7, 7)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3))
        x = random_kspace(gamma, 11)
        h = np.zeros(9)
        h[4] = 1.0  # delta at the filter origin (center of the 3x3 lex order)
        out = apply_filter(x, h, cfg)
        r1, r2 = cfg.lambda2.axis_ranges()
        expect = x.values[np.ix_(r1 - gamma.kmin[0], r2 - gamma.kmin[1])].ravel()
        assert rel_err(out, expect) < 1e-13

    @pytest.mark.parametrize("weighting", ["identity", "gradient"])
    def test_matches_dense(self, weighting):
        gamma = IndexSet2D.rect(16, 16)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(5, 5), weighting)
        x = random_kspace(gamma, 13)
        t = lift_dense(x, cfg)
        rng = np.random.default_rng(17)
        for _ in range(10):
            h = rng.standard_normal(25) + 1j * rng.standard_normal(25)
            assert rel_err(apply_filter(x, h, cfg), t @ h) < 1e-12

    def test_matches_dense_large_filter(self):
        gamma = IndexSet2D.rect(64, 64)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(15, 15))
        x = random_kspace(gamma, 19)
        t = lift_dense(x, cfg)
        h = np.random.default_rng(23).standard_normal(225)
        assert rel_err(apply_filter(x, h, cfg), t @ h) < 1e-12

    def test_even_extent_filter_matches_dense(self):
        # asymmetric support needs the one-sample grid padding chosen by make()
        gamma = IndexSet2D.rect(12, 1)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(4, 1))
        assert cfg.fft_grid.n1 == 13
        x = random_kspace(gamma, 29)
        t = lift_dense(x, cfg)
        h = np.random.default_rng(31).standard_normal(4) + 0j
        assert rel_err(apply_filter(x, h, cfg), t @ h) < 1e-12

    def test_gradient_blocks_expose_frequencies(self):
        gamma = IndexSet2D.rect(7, 7)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(1, 1), "gradient")
        x = KSpaceArray(gamma, np.ones((7, 7)))
        out = apply_filter(x, np.array([1.0]), cfg)
        n = cfg.n_out
        r1, r2 = cfg.lambda2.axis_ranges()
        k1 = np.broadcast_to(r1[:, None], (7, 7)).ravel()
        k2 = np.broadcast_to(r2[None, :], (7, 7)).ravel()
        assert rel_err(out[:n], k1) < 1e-12
        assert rel_err(out[n:], k2) < 1e-12

    def test_too_small_grid_raises(self):
        gamma = IndexSet2D.rect(12, 1)
        lam1 = IndexSet2D.rect(4, 1)
        from slrecon.grid import valid_output_set

        cfg = LiftingConfig(gamma, lam1, valid_output_set(gamma, lam1),
                            Weighting("identity"), GridShape(12, 1))
        x = random_kspace(gamma, 1)
        with pytest.raises(ValueError, match="alias-free"):
            apply_filter(x, np.ones(4), cfg)


class TestAdjoint:
    def test_zero_maps_to_zero(self):
        gamma = IndexSet2D.rect(8, 8)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3), "gradient")
        out = adjoint_apply(np.zeros(2 * cfg.n_out), np.ones(9), cfg)
        assert np.allclose(out.values, 0.0)

    @pytest.mark.parametrize("weighting", ["identity", "gradient"])
    def test_inner_product_identity(self, weighting):
        gamma = IndexSet2D.rect(32, 32)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(7, 7), weighting)
        rng = np.random.default_rng(37)
        for trial in range(10):
            x = random_kspace(gamma, 100 + trial)
            h = rng.standard_normal(49) + 1j * rng.standard_normal(49)
            v = rng.standard_normal(cfg.weighting.nblocks * cfg.n_out) + 1j * rng.standard_normal(
                cfg.weighting.nblocks * cfg.n_out
            )
            lhs = np.vdot(v, apply_filter(x, h, cfg))
            rhs = np.vdot(adjoint_apply(v, h, cfg).values, x.values)
            assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), abs(rhs), 1.0)

    def test_delta_filter_zero_pads(self):
        gamma = IndexSet2D.rect(9, 9)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3))
        h = np.zeros(9)
        h[4] = 1.0
        v = np.random.default_rng(41).standard_normal(cfg.n_out)
        out = adjoint_apply(v, h, cfg)
        r1, r2 = cfg.lambda2.axis_ranges()
        inner = out.values[np.ix_(r1 - gamma.kmin[0], r2 - gamma.kmin[1])]
        assert rel_err(inner.ravel(), v) < 1e-13
        total = np.abs(out.values).sum()
        assert np.isclose(total, np.abs(inner).sum())


class TestGram:
    def test_zero_data(self):
        gamma = IndexSet2D.rect(8, 8)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3))
        x = KSpaceArray(gamma, np.zeros((8, 8)))
        assert np.allclose(gram_matrix(x, cfg), 0.0)

    @pytest.mark.parametrize("weighting", ["identity", "gradient"])
    @pytest.mark.parametrize("filt", [(3, 3), (5, 5), (4, 3)])
    def test_fft_matches_dense(self, weighting, filt):
        gamma = IndexSet2D.rect(16, 16)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(*filt), weighting)
        x = random_kspace(gamma, 43)
        fast = gram_matrix(x, cfg, method="fft")
        dense = gram_matrix(x, cfg, method="dense")
        assert rel_err(fast, dense) < 1e-9

    def test_hermitian_psd(self):
        gamma = IndexSet2D.rect(12, 12)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3), "gradient")
        g = gram_matrix(random_kspace(gamma, 47), cfg)
        assert np.allclose(g, g.conj().T)
        w = np.linalg.eigvalsh(g)
        assert w.min() >= -1e-10 * max(w.max(), 1.0)

    def test_padded_grid_agrees(self):
        gamma = IndexSet2D.rect(10, 10)
        x = random_kspace(gamma, 53)
        base = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3), "gradient")
        padded = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3), "gradient", pad=9)
        assert rel_err(gram_matrix(x, base), gram_matrix(x, padded)) < 1e-11


class TestToeplitzStructure:
    def test_identity_columns_are_window_copies(self):
        # under identity weighting each column is the data gathered over a
        # lambda2-shaped window: same multiset of values, shifted
        gamma = IndexSet2D.rect(6, 6)
        cfg = LiftingConfig.make(gamma, IndexSet2D.rect(3, 3))
        x = random_kspace(gamma, 59)
        t = lift_dense(x, cfg)
        for j, k in enumerate(cfg.lambda1.indices):
            col = conv_oracle(
                x, np.eye(len(cfg.lambda1))[j], cfg.lambda1, cfg.lambda2
            )
            assert rel_err(t[:, j], col) < 1e-13
