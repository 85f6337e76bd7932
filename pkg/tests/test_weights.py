"""Combination-weight rules and their structural guarantees."""

import io
import math

import numpy as np
import pytest

from tomolab import (
    CombinationMatrix,
    CombinationRule,
    PolicyParams,
    build_matrix,
    check_weight_floor,
    class_tau,
    complete_graph,
    from_edges,
    laplacian_matrix,
    metropolis_matrix,
    ring_graph,
)
from conftest import random_observed_network

LAP = PolicyParams(CombinationRule.LAPLACIAN, rho=0.8)
MET = PolicyParams(CombinationRule.METROPOLIS, rho=0.8)


def star_plus_edge():
    """Center 4 linked to 0 and 1, plus the separate edge 2-3.

    Degrees (self-loop included) are 3 for the center and 2 elsewhere, so
    the global maximum degree exceeds the pairwise maximum on edge 2-3 and
    the two rules produce different weights there.
    """
    return from_edges(5, [(0, 4), (1, 4), (2, 3)])


class TestHandValues:
    def test_two_node_laplacian(self):
        a = laplacian_matrix(from_edges(2, [(0, 1)]), LAP)
        assert a.entries == pytest.approx(np.full((2, 2), 0.4))

    def test_star_plus_edge_laplacian(self):
        a = laplacian_matrix(star_plus_edge(), LAP)
        w = 0.8 / 3
        assert a.entries[0, 4] == pytest.approx(w)
        assert a.entries[2, 3] == pytest.approx(w)
        assert a.entries[4, 4] == pytest.approx(0.8 * (1 - 2 / 3))
        assert a.entries[0, 0] == pytest.approx(0.8 * (1 - 1 / 3))
        assert a.entries[0, 1] == 0.0

    def test_star_plus_edge_metropolis(self):
        a = metropolis_matrix(star_plus_edge(), MET)
        assert a.entries[0, 4] == pytest.approx(0.8 / 3)
        # pairwise maximum degree is 2 here, not the global 3
        assert a.entries[2, 3] == pytest.approx(0.4)
        assert a.entries[2, 2] == pytest.approx(0.4)
        assert a.entries[4, 4] == pytest.approx(0.8 - 2 * 0.8 / 3)

    def test_half_step_laplacian(self):
        params = PolicyParams(CombinationRule.LAPLACIAN, rho=0.8, lam=0.5)
        a = laplacian_matrix(ring_graph(4), params)
        assert a.entries[0, 1] == pytest.approx(0.8 * 0.5 / 3)
        assert a.entries[0, 0] == pytest.approx(0.8 * (1 - 0.5 * 2 / 3))

    def test_edgeless_is_rho_identity(self):
        from tomolab import edgeless_graph

        for params in (LAP, MET):
            a = build_matrix(edgeless_graph(4), params)
            assert a.entries == pytest.approx(0.8 * np.eye(4))


class TestStructuralInvariants:
    def test_row_sums_hit_rho_exactly(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            _, _, a, params = random_observed_network(
                rng, n_lo=5, n_hi=40, rho=float(rng.uniform(0.3, 0.95))
            )
            assert np.abs(a.row_sums() - params.rho).max() < 1e-12

    def test_support_matches_graph(self):
        rng = np.random.default_rng(32)
        for _ in range(50):
            g, _, a, _ = random_observed_network(rng, n_lo=5, n_hi=40)
            assert a.support_graph() == g

    def test_spectral_radius_within_rho(self):
        rng = np.random.default_rng(33)
        for _ in range(50):
            _, _, a, params = random_observed_network(rng, n_lo=5, n_hi=40)
            top = np.abs(np.linalg.eigvalsh(a.entries)).max()
            assert top <= params.rho + 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(34)
        for _ in range(20):
            _, _, a, _ = random_observed_network(rng, n_lo=5, n_hi=40)
            assert np.array_equal(a.entries, a.entries.T)


class TestClassThreshold:
    def test_values(self):
        assert class_tau(LAP) == pytest.approx(0.2943035529371539, abs=1e-15)
        assert class_tau(MET) == pytest.approx(0.2943035529371539, abs=1e-15)
        half = PolicyParams(CombinationRule.LAPLACIAN, rho=0.8, lam=0.5)
        assert class_tau(half) == pytest.approx(0.14715177646857694, abs=1e-15)

    def test_lam_ignored_for_metropolis(self):
        assert class_tau(MET) == class_tau(
            PolicyParams(CombinationRule.METROPOLIS, rho=0.8, lam=1.0)
        )


class TestEdgeWeightFloor:
    def test_laplacian_achieves_equality(self):
        rng = np.random.default_rng(35)
        for _ in range(20):
            g, _, a, params = random_observed_network(
                rng, n_lo=5, n_hi=40, rule=CombinationRule.LAPLACIAN
            )
            assert check_weight_floor(a, g, params.rho * params.lam)

    def test_metropolis_clears_rho_floor(self):
        rng = np.random.default_rng(36)
        for _ in range(20):
            g, _, a, params = random_observed_network(
                rng, n_lo=5, n_hi=40, rule=CombinationRule.METROPOLIS
            )
            assert check_weight_floor(a, g, params.rho)

    def test_too_large_gamma_fails(self):
        g = star_plus_edge()
        a = metropolis_matrix(g, MET)
        assert not check_weight_floor(a, g, 2 * 0.8)

    def test_gamma_must_be_positive(self):
        g = ring_graph(4)
        a = metropolis_matrix(g, MET)
        with pytest.raises(ValueError, match="positive"):
            check_weight_floor(a, g, 0.0)


class TestValidation:
    def test_policy_bounds(self):
        with pytest.raises(ValueError, match="rho"):
            PolicyParams(CombinationRule.LAPLACIAN, rho=1.0)
        with pytest.raises(ValueError, match="lam"):
            PolicyParams(CombinationRule.LAPLACIAN, rho=0.5, lam=0.0)

    def test_rule_mismatch(self):
        g = ring_graph(4)
        with pytest.raises(ValueError, match="expected laplacian"):
            laplacian_matrix(g, MET)
        with pytest.raises(ValueError, match="expected metropolis"):
            metropolis_matrix(g, LAP)

    def test_matrix_rejects_asymmetry(self):
        m = np.zeros((2, 2))
        m[0, 1] = 0.1
        with pytest.raises(ValueError, match="symmetric"):
            CombinationMatrix(m, 0.8)

    def test_matrix_rejects_negative(self):
        m = np.array([[0.1, -0.05], [-0.05, 0.1]])
        with pytest.raises(ValueError, match="non-negative"):
            CombinationMatrix(m, 0.8)

    def test_matrix_rejects_heavy_rows(self):
        m = np.array([[0.5, 0.4], [0.4, 0.5]])
        with pytest.raises(ValueError, match="row sums"):
            CombinationMatrix(m, 0.8)

    def test_matrix_accepts_custom_entries(self):
        m = np.array([[0.3, 0.2], [0.2, 0.3]])
        a = CombinationMatrix(m, 0.6)
        assert a.n == 2
        assert a.row_sums() == pytest.approx([0.5, 0.5])


class TestCsv:
    def test_save_round_trips_through_repr(self):
        a = metropolis_matrix(complete_graph(3), MET)
        buf = io.StringIO()
        a.save_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert len(lines) == 3
        parsed = np.array([[float(x) for x in ln.split(",")] for ln in lines])
        assert np.array_equal(parsed, a.entries)
