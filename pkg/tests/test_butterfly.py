import math
from fractions import Fraction

import numpy as np
import pytest

from hofbutter import (
    ButterflyConfig,
    Flux,
    PHI_D_SYMMETRIC,
    build_diagram,
    detect_coloring_errors,
    enumerate_fluxes,
    read_records_jsonl,
    write_records_jsonl,
)
from hofbutter.render import read_ppm, render


class TestEnumerateFluxes:
    def test_qmax_1(self):
        assert enumerate_fluxes(1) == [Flux(1, 1)]

    def test_qmax_3(self):
        assert enumerate_fluxes(3) == [Flux(1, 3), Flux(1, 2), Flux(2, 3), Flux(1, 1)]

    def test_qmax_5_count_matches_gcd_scan(self):
        brute = {Fraction(p, q) for q in range(1, 6) for p in range(1, q + 1)
                 if math.gcd(p, q) == 1}
        fluxes = enumerate_fluxes(5)
        assert len(fluxes) == len(brute) == 10

    def test_sorted_and_distinct(self):
        values = [Fraction(f.p, f.q) for f in enumerate_fluxes(12)]
        assert values == sorted(values)
        assert len(values) == len(set(values))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ButterflyConfig(q_max=0)
        with pytest.raises(ValueError):
            ButterflyConfig(mu_bins=1)
        with pytest.raises(ValueError):
            ButterflyConfig(resolver="magic")

    def test_energy_clamp_default(self):
        assert ButterflyConfig().energy_clamp == 6.0
        assert ButterflyConfig(t3=0.0).energy_clamp == 4.0

    def test_config_hash_stable(self):
        a, b = ButterflyConfig(q_max=5), ButterflyConfig(q_max=5)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != ButterflyConfig(q_max=6).config_hash()


class TestBuildDiagram:
    def test_single_flux(self):
        diagram = build_diagram(ButterflyConfig(q_max=1))
        assert len(diagram.records) == 2
        assert all(r.chern == 0 for r in diagram.records)
        assert not diagram.failures

    def test_computed_q5_matches_reference_sets(self, triangular_tables):
        diagram = build_diagram(ButterflyConfig(
            q_max=5, resolver="computed", computed_q_max=5))
        for (p, q) in [(1, 3), (2, 3), (2, 5), (3, 5)]:
            recs = diagram.records_for(p, q)
            got = {r.j: r.chern for r in recs
                   if 0 < r.j < q and not r.closed}
            assert got == triangular_tables[(p, q)].cherns

    def test_every_open_gap_resolved_or_marked(self):
        diagram = build_diagram(ButterflyConfig(q_max=7, resolver="triangular",
                                                computed_q_max=7))
        for rec in diagram.records:
            if rec.closed:
                continue
            assert (rec.chern is not None) != (rec.chern_source == "unresolved")

    def test_window_fallback_above_threshold(self):
        # odd q above the computed threshold stays unresolved under triangular
        diagram = build_diagram(ButterflyConfig(q_max=5, resolver="triangular",
                                                computed_q_max=2))
        recs = diagram.records_for(2, 5)
        interior = [r for r in recs if 0 < r.j < 5]
        assert all(r.chern is None and r.chern_source == "unresolved"
                   for r in interior)

    def test_determinism_across_jobs(self, tmp_path):
        cfg1 = ButterflyConfig(q_max=6, resolver="computed", computed_q_max=6, jobs=1)
        cfg2 = ButterflyConfig(q_max=6, resolver="computed", computed_q_max=6, jobs=2)
        d1, d2 = build_diagram(cfg1), build_diagram(cfg2)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_records_jsonl(d1.records, p1)
        write_records_jsonl(d2.records, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert render(d1.records, cfg1) == render(d2.records, cfg2)

    def test_resolver_tags(self):
        diagram = build_diagram(ButterflyConfig(q_max=4, resolver="triangular",
                                                computed_q_max=4))
        sources = {r.chern_source for r in diagram.records}
        assert "window_triangular" in sources  # even q colored by the window
        assert "computed_fhs" in sources       # odd q > 1 defers to computed


class TestDiagramSymmetry:
    def test_inversion_maps_records(self):
        # (E, sigma, j) -> (-E, sigma, q - j) between fluxes p/q and (q-p)/q
        diagram = build_diagram(ButterflyConfig(
            q_max=5, resolver="computed", computed_q_max=5))
        for (p, q) in [(1, 5), (2, 5), (1, 4), (1, 3)]:
            recs = {r.j: r for r in diagram.records_for(p, q)}
            partner = {r.j: r for r in diagram.records_for(q - p, q)}
            for j, r in recs.items():
                mate = partner[q - j]
                assert mate.closed == r.closed
                if not r.closed:
                    assert mate.chern == r.chern
                for x, y in [(r.lo, -mate.hi), (r.hi, -mate.lo)]:
                    if math.isinf(x):
                        assert math.isinf(y)
                    else:
                        assert abs(x - y) <= 1e-10


class TestColoringErrors:
    def test_single_flux_empty(self):
        diagram = build_diagram(ButterflyConfig(q_max=1))
        assert detect_coloring_errors(diagram) == []

    def test_naive_windows_flagged(self):
        diagram = build_diagram(ButterflyConfig(q_max=5, resolver="triangular",
                                                exclusions=False))
        report = detect_coloring_errors(diagram)
        assert len(report) > 0
        involved = {(r.p, r.q) for pair in report
                    for r in (pair.rec_a, pair.rec_b)}
        assert (2, 5) in involved

    def test_flagged_pairs_differ(self):
        diagram = build_diagram(ButterflyConfig(q_max=5, resolver="triangular",
                                                exclusions=False))
        for pair in detect_coloring_errors(diagram):
            assert pair.rec_a.chern != pair.rec_b.chern


class TestPersistence:
    def test_jsonl_roundtrip(self, tmp_path):
        diagram = build_diagram(ButterflyConfig(q_max=4, resolver="chain"))
        path = tmp_path / "records.jsonl"
        write_records_jsonl(diagram.records, path)
        assert read_records_jsonl(path) == list(diagram.records)

    def test_jsonl_one_record_per_line(self, tmp_path):
        diagram = build_diagram(ButterflyConfig(q_max=3))
        path = tmp_path / "records.jsonl"
        write_records_jsonl(diagram.records, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == len(diagram.records)
