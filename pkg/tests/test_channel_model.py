import numpy as np
import pytest

from gwtucker.channel_model import (ChannelSet, GenParams, InterferenceScope, SystemTopology,
                                    assemble_channel_compressed, assemble_channel_full,
                                    generate_channel_set, steering_vector)
from gwtucker.decomposition import hosvd, reconstruct
from gwtucker.flops import FlopLedger
from gwtucker.tensor_core import DimensionError

from conftest import crandn


def small_topology(**kw):
    base = dict(J=2, K=2, M=6, N=8, P=5, L=1)
    base.update(kw)
    return SystemTopology(**base)


class TestTopology:
    def test_streams_bounded_by_antennas(self):
        with pytest.raises(ValueError, match="streams"):
            SystemTopology(J=1, K=1, M=2, N=4, P=1, L=3)

    @pytest.mark.parametrize("field", ["J", "K", "M", "N", "P", "L"])
    def test_counts_positive(self, field):
        kw = dict(J=1, K=1, M=2, N=2, P=1, L=1)
        kw[field] = 0
        with pytest.raises(ValueError):
            SystemTopology(**kw)

    def test_sigma_positive(self):
        with pytest.raises(ValueError):
            SystemTopology(J=1, K=1, M=2, N=2, P=1, sigma=0.0)


class TestGenerator:
    def test_same_seed_bit_identical(self):
        t = small_topology()
        a, b = generate_channel_set(t, seed=3), generate_channel_set(t, seed=3)
        assert np.array_equal(a.tensors, b.tensors)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_different_seed_differs(self):
        t = small_topology()
        assert not np.array_equal(generate_channel_set(t, seed=1).tensors,
                                  generate_channel_set(t, seed=2).tensors)

    def test_links_do_not_depend_on_grid_size(self):
        # per-link streams: link (0,0,0) is the same whatever J and K are
        a = generate_channel_set(small_topology(J=1, K=1), seed=5)
        b = generate_channel_set(small_topology(J=3, K=2), seed=5)
        assert np.array_equal(a.tensors[0, 0, 0], b.tensors[0, 0, 0])

    def test_single_ray_slices_are_rank_one(self):
        params = GenParams(n_rays_los=1, n_rays_nlos=1)
        cs = generate_channel_set(small_topology(), params, seed=11)
        for k, i, j in cs.links():
            for l in range(cs.topology.P):
                s = np.linalg.svd(cs.tensors[k, i, j, :, :, l], compute_uv=False)
                assert s[1] <= 1e-10 * s[0]

    def test_slice_energy_profile_non_increasing(self):
        t = SystemTopology(J=3, K=2, M=8, N=16, P=12, L=2)
        cs = generate_channel_set(t, seed=42)
        profile = np.sum(np.abs(cs.tensors) ** 2, axis=(0, 1, 2, 3, 4))
        assert np.all(np.diff(profile) <= 1e-9 * profile[0])
        # LOS slice dominates with the default Rician factor
        assert profile[0] > profile[1:].sum()

    def test_coefficients_unit_mean_power(self, desk_channels):
        power = np.mean(np.abs(desk_channels.coeffs) ** 2, axis=-1)
        np.testing.assert_allclose(power, 1.0, rtol=1e-12)

    def test_cross_links_are_weaker(self, desk_channels):
        X = desk_channels.tensors
        J = X.shape[0]
        own = np.mean([np.linalg.norm(X[k, k]) for k in range(J)])
        cross = np.mean([np.linalg.norm(X[k, i]) for k in range(J) for i in range(J) if k != i])
        assert cross < own

    def test_steering_vector_unit_modulus(self):
        v = steering_vector(7, 0.3)
        np.testing.assert_allclose(np.abs(v), 1.0)
        assert v[0] == 1.0

    @pytest.mark.parametrize("kw", [dict(n_rays_los=0), dict(n_rays_nlos=0), dict(decay=0.0),
                                    dict(coeff_decay=-1.0), dict(rician_k=-1.0),
                                    dict(angle_spread=-0.1)])
    def test_invalid_params(self, kw):
        with pytest.raises(ValueError):
            GenParams(**kw)

    def test_seed_range(self):
        with pytest.raises(ValueError):
            generate_channel_set(small_topology(), seed=-1)


class TestChannelSet:
    def test_shape_checks(self):
        t = small_topology(J=1, K=1)
        with pytest.raises(DimensionError):
            ChannelSet(t, np.zeros((1, 1, 1, 6, 8, 4)), np.ones((1, 1, 1, 5)))
        with pytest.raises(DimensionError):
            ChannelSet(t, np.zeros((1, 1, 1, 6, 8, 5)), np.ones((1, 1, 1, 4)))

    def test_zero_coefficient_vector_rejected(self):
        t = small_topology(J=1, K=1)
        with pytest.raises(ValueError):
            ChannelSet(t, np.zeros((1, 1, 1, 6, 8, 5)), np.zeros((1, 1, 1, 5)))

    def test_links_cover_grid_once(self, desk_channels):
        links = list(desk_channels.links())
        assert len(links) == len(set(links)) == desk_channels.topology.n_links


class TestScope:
    def test_full_scope(self):
        assert InterferenceScope.FULL.terms(1, 0, 2, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_experiment_scope_serving_plus_first_users(self):
        terms = InterferenceScope.PAPER_EXPERIMENT.terms(1, 1, 3, 2)
        assert terms == [(0, 0), (1, 1), (2, 0)]

    def test_from_string(self):
        assert InterferenceScope("full") is InterferenceScope.FULL
        with pytest.raises(ValueError):
            InterferenceScope("partial")


class TestAssembly:
    def test_full_assembly_ledger(self, rng):
        X = crandn(rng, 3, 4, 5)
        ledger = FlopLedger()
        H = assemble_channel_full(X, crandn(rng, 5), ledger)
        assert H.shape == (3, 4)
        assert ledger.reconstruct == 60

    def test_identity_factors_match_full(self, rng):
        X, c = crandn(rng, 3, 4, 5), crandn(rng, 5)
        Ht = assemble_channel_compressed(X, np.eye(5), c)
        np.testing.assert_allclose(Ht, assemble_channel_full(X, c), atol=1e-12)

    def test_zero_coefficients(self, rng):
        Ht = assemble_channel_compressed(crandn(rng, 2, 3, 4), np.eye(5)[:, :4], np.zeros(5))
        assert not np.any(Ht)

    def test_compressed_ledger(self, rng):
        ledger = FlopLedger()
        assemble_channel_compressed(crandn(rng, 2, 3, 4), np.eye(6)[:, :4], crandn(rng, 6), ledger)
        assert ledger.reconstruct == 2 * 3 * 4 + 6 * 4

    def test_lossless_rank_identity(self):
        cs = generate_channel_set(small_topology(J=1, K=1), seed=9)
        X, c = cs.tensors[0, 0, 0], cs.coeffs[0, 0, 0]
        tf = hosvd(X, X.shape)
        Ht = assemble_channel_compressed(tf.G, tf.C, c)
        # mode-2 core convention: the rebuilt matrix is A Ht B^T
        np.testing.assert_allclose(tf.A @ Ht @ tf.B.T, assemble_channel_full(X, c), atol=1e-10)

    def test_operator_bound(self, desk_channels, rng):
        for ranks in [(2, 4, 3), (4, 8, 6), (6, 12, 9)]:
            for link in [(0, 0, 0), (1, 2, 1)]:
                X = desk_channels.tensors[link]
                tf = hosvd(X, ranks)
                gap = np.linalg.norm(X - reconstruct(tf))
                for c in (desk_channels.coeffs[link], crandn(rng, X.shape[2])):
                    err = np.linalg.norm(tf.A @ assemble_channel_compressed(tf.G, tf.C, c) @ tf.B.T
                                         - assemble_channel_full(X, c))
                    assert err <= gap * np.linalg.norm(c) + 1e-12

    def test_shape_errors(self, rng):
        with pytest.raises(DimensionError):
            assemble_channel_compressed(crandn(rng, 2, 3, 4), np.eye(5)[:, :3], np.ones(5))
        with pytest.raises(DimensionError):
            assemble_channel_compressed(crandn(rng, 2, 3, 4), np.eye(5)[:, :4], np.ones(6))
