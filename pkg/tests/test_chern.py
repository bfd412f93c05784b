import math

import numpy as np
import pytest

from hofbutter import (
    Flux,
    GapClosed,
    GridDegeneracy,
    HofstadterModel,
    PHI_D_SYMMETRIC,
    band_chern_fhs,
    band_chern_transport,
    berry_curvature,
    chern_bound,
    curvature_field,
    gap_chern,
    gap_chern_table,
    gap_residue_transport,
)

PI = math.pi

SQUARE_13 = HofstadterModel(Flux(1, 3), t3=0.0)

# frozen ground truth at phi_d = -pi/2, cross-checked by three independent
# routes: plaquette sums, direct curvature quadrature, and wing continuity
TRIANGULAR_TABLES = {
    (2, 5): {1: -2, 2: 1, 3: -1, 4: 2},
    (3, 7): {1: -2, 2: -4, 3: 1, 4: -1, 5: 4, 6: 2},
    (4, 9): {1: -2, 2: -4, 3: 3, 4: 1, 5: -1, 6: 6, 7: 4, 8: 2},
    (1, 5): {1: 1, 2: 2, 3: 3, 4: -1},
    (5, 13): {1: -5, 2: 3, 3: -2, 4: -7, 5: 1, 6: 9,
              7: 4, 8: -1, 9: 7, 10: 2, 11: -3, 12: 5},
    (6, 13): {1: -2, 2: -4, 3: -6, 4: -8, 5: 3, 6: 1,
              7: -1, 8: -3, 9: 8, 10: 6, 11: 4, 12: 2},
}


class TestBerryCurvature:
    def test_q1_vanishes(self):
        assert berry_curvature(HofstadterModel(Flux(1, 1), 0.3), 1, (0.2, 0.1)) == 0.0

    def test_band_sum_vanishes_pointwise(self):
        rng = np.random.default_rng(11)
        model = HofstadterModel(Flux(2, 5), PHI_D_SYMMETRIC)
        for _ in range(20):
            k = tuple(rng.uniform(-PI, PI, 2))
            total = sum(berry_curvature(model, n, k) for n in range(1, 6))
            assert abs(total) <= 1e-10

    def test_signals_degeneracy(self):
        # square q=2 bands touch at E=0 where both cosines vanish
        model = HofstadterModel(Flux(1, 2), t3=0.0)
        with pytest.raises(GridDegeneracy):
            berry_curvature(model, 1, (PI / 2, PI / 2))

    def test_square_13_band1_integral(self):
        # midpoint quadrature of the curvature over the magnetic BZ
        n = 48
        k1s = -PI + (np.arange(n) + 0.5) * (2 * PI / n)
        k2s = -PI / 3 + (np.arange(n) + 0.5) * (2 * PI / (3 * n))
        total = sum(berry_curvature(SQUARE_13, 1, (a, b)) for a in k1s for b in k2s)
        total *= (2 * PI / n) * (2 * PI / (3 * n)) / (2 * PI)
        assert abs(total - 1.0) <= 1e-3


class TestBandChernFHS:
    def test_q1_zero(self):
        res = band_chern_fhs(HofstadterModel(Flux(1, 1), 0.5), 1)
        assert res.value == 0

    def test_square_13_bands(self):
        values = [band_chern_fhs(SQUARE_13, n).value for n in (1, 2, 3)]
        assert values == [1, -2, 1]

    def test_residual_and_grid_reported(self):
        res = band_chern_fhs(SQUARE_13, 1, grid=16)
        assert res.method == "fhs"
        assert res.grid >= 16
        assert res.residual <= 0.05

    def test_curvature_field_total_near_integer(self):
        fld = curvature_field(HofstadterModel(Flux(2, 5), PHI_D_SYMMETRIC), 1, 32)
        assert abs(fld.total() - round(fld.total())) <= 1e-6


class TestGapChern:
    def test_trivial_gaps(self):
        model = HofstadterModel(Flux(2, 5), PHI_D_SYMMETRIC)
        assert gap_chern(model, 0) == 0
        assert gap_chern(model, 5) == 0

    def test_square_13_gaps(self):
        assert gap_chern(SQUARE_13, 1) == 1
        assert gap_chern(SQUARE_13, 2) == -1

    @pytest.mark.parametrize("pq", sorted(TRIANGULAR_TABLES))
    def test_frozen_tables(self, pq):
        model = HofstadterModel(Flux(*pq), PHI_D_SYMMETRIC)
        table = {j: r.value for j, r in gap_chern_table(model).items()}
        assert table == TRIANGULAR_TABLES[pq]

    def test_closed_gap_refused(self):
        model = HofstadterModel(Flux(1, 3), PHI_D_SYMMETRIC)
        with pytest.raises(GapClosed):
            gap_chern(model, 2)

    def test_transport_method_refused(self):
        with pytest.raises(ValueError):
            gap_chern(SQUARE_13, 1, method="transport")


class TestTransport:
    def test_q1_trivial(self):
        res = band_chern_transport(HofstadterModel(Flux(1, 1), 1.0), 1)
        assert res.holonomy_phase == 0.0
        assert res.chern_mod_q == 0

    def test_25_holonomy(self):
        model = HofstadterModel(Flux(2, 5), PHI_D_SYMMETRIC)
        for band in range(1, 6):
            res = band_chern_transport(model, band)
            assert res.chern_mod_q == 3  # s = 3 for p = 2 mod 5
            assert res.phase_residual <= 1e-6

    def test_square_13_band1_matches_fhs(self):
        res = band_chern_transport(SQUARE_13, 1)
        assert res.chern_mod_q == 1
        assert res.chern_mod_q == band_chern_fhs(SQUARE_13, 1).value % 3

    def test_gap_residue(self):
        model = HofstadterModel(Flux(2, 5), PHI_D_SYMMETRIC)
        assert gap_residue_transport(model, 2) == (3 * 2) % 5
        assert gap_residue_transport(model, 0) == 0


class TestChernBound:
    def test_trivial_gap(self):
        assert chern_bound(0, 5, math.inf) == 0.0
        assert chern_bound(5, 5, 2.0) == 0.0

    def test_reference_value(self):
        # 4*pi*36*j*(q-j)/(q*g^2) at (q=5, j=2, g=2): 43.2*pi
        assert abs(chern_bound(2, 5, 2.0) - 43.2 * PI) < 1e-12

    def test_rejects_closed_gap(self):
        with pytest.raises(ValueError):
            chern_bound(2, 5, 0.0)

    def test_bound_holds_on_frozen_tables(self):
        from hofbutter import compute_bands, compute_gaps
        for (p, q), table in TRIANGULAR_TABLES.items():
            gaps = compute_gaps(compute_bands(
                HofstadterModel(Flux(p, q), PHI_D_SYMMETRIC)))
            for j, sigma in table.items():
                assert abs(sigma) <= chern_bound(j, q, gaps[j].width)


class TestCrossChecks:
    def test_method_agreement(self):
        for p, q in [(1, 4), (2, 5), (3, 7)]:
            model = HofstadterModel(Flux(p, q), PHI_D_SYMMETRIC)
            for n in range(1, q + 1):
                fhs = band_chern_fhs(model, n).value
                assert band_chern_transport(model, n).chern_mod_q == fhs % q

    def test_band_cherns_sum_to_zero(self):
        for p, q in [(1, 4), (2, 5), (3, 7)]:
            model = HofstadterModel(Flux(p, q), PHI_D_SYMMETRIC)
            assert sum(band_chern_fhs(model, n).value for n in range(1, q + 1)) == 0

    def test_diophantine_identity(self):
        for (p, q), table in TRIANGULAR_TABLES.items():
            s = Flux(p, q).s
            for j, sigma in table.items():
                assert (sigma - s * j) % q == 0

    def test_inversion_pairing_equal_values(self):
        # gap j at flux p/q matches gap q-j at flux (q-p)/q with the SAME sigma
        for (p, q) in [(2, 5), (4, 9)]:
            a = TRIANGULAR_TABLES.get((p, q))
            model_b = HofstadterModel(Flux(q - p, q), PHI_D_SYMMETRIC)
            b = {j: r.value for j, r in gap_chern_table(model_b).items()}
            for j, sigma in a.items():
                assert b[q - j] == sigma
