import itertools

import numpy as np
import pytest

from panodepth.coords import GridSpec
from panodepth.router import (
    GatePattern,
    Region,
    apply_early_stop,
    fuse_cell,
    gate_hard,
    gate_soft,
    gate_usage_report,
    recombine,
    slice_regions,
    temperature_schedule,
    valid_patterns,
)

PAPER_GRID = GridSpec(4096, 2048)


class TestSliceRegions:
    def test_inference_configuration_row_placement(self):
        rg = slice_regions(PAPER_GRID, m=3, n=7, region_size=1080, stride=720)
        assert len(rg.regions) == 21
        v_starts = sorted({r.v_start for r in rg.regions})
        assert v_starts == [0, 484, 968]  # clamped top, equator-centered, clamped bottom

    def test_inference_configuration_column_placement(self):
        rg = slice_regions(PAPER_GRID, m=3, n=7, region_size=1080, stride=720)
        u_starts = [r.u_start for r in rg.regions if r.row == 0]
        assert u_starts == [0, 720, 1440, 2160, 2880, 3600, 224]
        assert any(u + 1080 > 4096 for u in u_starts)  # at least one wraps the seam

    def test_single_full_height_region(self):
        grid = GridSpec(128, 64)
        rg = slice_regions(grid, m=1, n=1, region_size=64, stride=64)
        assert rg.regions == (Region(row=0, col=0, u_start=0, v_start=0),)

    def test_row_offsets_symmetric_about_equator(self):
        for m, stride in [(3, 720), (2, 500), (4, 300), (5, 200)]:
            rg = slice_regions(PAPER_GRID, m=m, n=1, region_size=1080, stride=stride)
            v = [r.v_start for r in rg.regions]
            mirrored = [PAPER_GRID.height - 1080 - x for x in reversed(v)]
            assert v == mirrored

    def test_even_row_count(self):
        grid = GridSpec(512, 256)
        rg = slice_regions(grid, m=2, n=1, region_size=100, stride=50)
        v = sorted(r.v_start for r in rg.regions)
        # centers at H/2 -+ stride/2 -> starts at 128 - 50 -+ 25
        assert v == [53, 103]

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(m=3, n=7, region_size=1080, stride=0),
            dict(m=3, n=7, region_size=4000, stride=720),
            dict(m=0, n=7, region_size=1080, stride=720),
        ],
    )
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ValueError):
            slice_regions(PAPER_GRID, **kwargs)


class TestGateSoft:
    def test_equal_logits_split_evenly(self):
        np.testing.assert_allclose(gate_soft([0.0, 0.0], 1.0), [0.5, 0.5])
        np.testing.assert_allclose(gate_soft([0.0, 0.0], 0.1), [0.5, 0.5])

    def test_low_temperature_sharpens(self):
        prob = gate_soft([1.0, 0.0], 0.1)
        assert prob[0] > 0.9999

    def test_simplex_membership(self):
        rng = np.random.default_rng(71)
        for _ in range(1000):
            prob = gate_soft(rng.normal(size=4), rng.uniform(0.05, 2.0))
            assert abs(prob.sum() - 1.0) < 1e-12
            assert (prob > 0).all()

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            gate_soft([0.0, 1.0], 0.0)
        with pytest.raises(ValueError):
            gate_soft([np.inf, 0.0], 1.0)

    def test_gumbel_hook_is_seeded(self):
        a = gate_soft([0.5, -0.5], 1.0, gumbel_rng=np.random.default_rng(5))
        b = gate_soft([0.5, -0.5], 1.0, gumbel_rng=np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)
        c = gate_soft([0.5, -0.5], 1.0)
        assert not np.array_equal(a, c)


class TestGateHard:
    def test_picks_argmax(self):
        np.testing.assert_array_equal(gate_hard([0.2, 0.9]), [0.0, 1.0])

    def test_tie_breaks_toward_lower_index(self):
        np.testing.assert_array_equal(gate_hard([0.5, 0.5]), [1.0, 0.0])

    def test_agrees_with_cold_softmax(self):
        rng = np.random.default_rng(73)
        for _ in range(1000):
            logits = rng.normal(size=3)
            if np.abs(np.diff(np.sort(logits))).min() < 1e-6:
                continue
            hard = gate_hard(logits)
            soft = gate_soft(logits, 1e-3)
            assert np.argmax(hard) == np.argmax(soft)


class TestEarlyStop:
    def test_zero_forces_tail(self):
        assert apply_early_stop([1, 0, 1, 1]).decisions == (1, 0, 0, 0)

    def test_all_ones_pass_through(self):
        assert apply_early_stop([1, 1, 1, 1]).decisions == (1, 1, 1, 1)

    def test_exhaustive_enumeration_collapses_to_valid_patterns(self):
        seen = {apply_early_stop(bits).decisions for bits in itertools.product((0, 1), repeat=4)}
        expected = {p.decisions for p in valid_patterns(4)}
        assert seen == expected
        assert len(expected) == 5

    def test_idempotent(self):
        for bits in itertools.product((0, 1), repeat=4):
            once = apply_early_stop(bits)
            twice = apply_early_stop(once.decisions)
            assert once == twice

    def test_pattern_validation(self):
        with pytest.raises(ValueError):
            GatePattern((0, 1))
        with pytest.raises(ValueError):
            GatePattern((1, 2))
        with pytest.raises(ValueError):
            GatePattern(())


def rgb_only(x_rgb, x_d):
    return x_rgb


def fused_sum(x_rgb, x_d):
    return x_rgb + x_d


class TestFuseCell:
    def setup_method(self):
        rng = np.random.default_rng(79)
        self.x_rgb = rng.normal(size=(8, 16, 4))
        self.x_d = rng.normal(size=(8, 16, 4))

    def test_one_hot_selects_exactly(self):
        out = fuse_cell(self.x_rgb, self.x_d, [1.0, 0.0], [rgb_only, fused_sum])
        np.testing.assert_array_equal(out, self.x_rgb)

    def test_even_blend(self):
        out = fuse_cell(self.x_rgb, self.x_d, [0.5, 0.5], [rgb_only, fused_sum])
        np.testing.assert_allclose(out, self.x_rgb + 0.5 * self.x_d, atol=1e-15)

    def test_matches_scalar_brute_force(self):
        rng = np.random.default_rng(83)
        p = rng.dirichlet([1.0, 1.0, 1.0])
        ops = [rgb_only, fused_sum, lambda r, d: 2.0 * d - r]
        out = fuse_cell(self.x_rgb, self.x_d, p, ops)
        for idx in [(0, 0, 0), (3, 7, 2), (7, 15, 3)]:
            r, d = self.x_rgb[idx], self.x_d[idx]
            expected = p[0] * r + p[1] * (r + d) + p[2] * (2.0 * d - r)
            assert out[idx] == pytest.approx(expected, abs=1e-12)

    def test_prob_enters_linearly(self):
        p = np.array([0.3, 0.7])
        q = np.array([0.9, 0.1])
        lam = 0.25
        mixed = fuse_cell(self.x_rgb, self.x_d, lam * p + (1 - lam) * q, [rgb_only, fused_sum])
        a = fuse_cell(self.x_rgb, self.x_d, p, [rgb_only, fused_sum])
        b = fuse_cell(self.x_rgb, self.x_d, q, [rgb_only, fused_sum])
        np.testing.assert_allclose(mixed, lam * a + (1 - lam) * b, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            fuse_cell(self.x_rgb, self.x_d[:4], [1.0, 0.0], [rgb_only, fused_sum])
        with pytest.raises(ValueError):
            fuse_cell(self.x_rgb, self.x_d, [0.7, 0.7], [rgb_only, fused_sum])
        with pytest.raises(ValueError):
            fuse_cell(self.x_rgb, self.x_d, [1.0], [rgb_only, fused_sum])
        with pytest.raises(ValueError):
            fuse_cell(self.x_rgb, self.x_d, [1.0, 0.0], [lambda r, d: r[:2], fused_sum])


class TestRecombine:
    def test_constant_regions_reproduce_coverage(self):
        grid = GridSpec(256, 128)
        from panodepth.router import slice_regions as sr

        rg = sr(grid, m=3, n=5, region_size=64, stride=48)
        ones = np.ones((64, 64))
        canvas, coverage = recombine([(r, ones) for r in rg.regions], grid, 64)
        np.testing.assert_array_equal(canvas, coverage.astype(np.float64))

    def test_single_full_canvas_region_is_identity(self):
        grid = GridSpec(64, 32)
        rng = np.random.default_rng(89)
        out = rng.normal(size=(32, 32))
        region = Region(row=0, col=0, u_start=0, v_start=0)
        canvas, coverage = recombine([(region, out)], grid, 32)
        np.testing.assert_array_equal(canvas[:, :32], out)
        assert not canvas[:, 32:].any()
        assert coverage[:, :32].all() and not coverage[:, 32:].any()

    def test_wrapping_region_contributes_to_both_ends(self):
        grid = GridSpec(64, 32)
        region = Region(row=0, col=0, u_start=54, v_start=0)
        canvas, coverage = recombine([(region, np.ones((16, 16)))], grid, 16)
        assert coverage[:16, 54:].all()
        assert coverage[:16, :6].all()
        assert not coverage[:16, 6:54].any()

    def test_wrap_equals_roll_recombine_unroll(self):
        grid = GridSpec(64, 32)
        rng = np.random.default_rng(97)
        out = rng.normal(size=(16, 16, 3))
        wrapped = Region(row=0, col=0, u_start=58, v_start=4)
        shifted = Region(row=0, col=0, u_start=(58 - 32) % 64, v_start=4)
        canvas_a, cov_a = recombine([(wrapped, out)], grid, 16)
        canvas_b, cov_b = recombine([(shifted, out)], grid, 16)
        np.testing.assert_array_equal(canvas_a, np.roll(canvas_b, 32, axis=1))
        np.testing.assert_array_equal(cov_a, np.roll(cov_b, 32, axis=1))

    def test_normalize_by_coverage(self):
        grid = GridSpec(64, 32)
        regions = [
            (Region(0, 0, 0, 0), np.full((32, 32), 2.0)),
            (Region(0, 1, 16, 0), np.full((32, 32), 2.0)),
        ]
        canvas, coverage = recombine(regions, grid, 32, normalize=True)
        assert np.allclose(canvas[coverage > 0], 2.0)

    def test_region_map_size_mismatch(self):
        grid = GridSpec(64, 32)
        with pytest.raises(ValueError):
            recombine([(Region(0, 0, 0, 0), np.ones((8, 16)))], grid, 16)

    def test_region_past_bottom_edge(self):
        grid = GridSpec(64, 32)
        with pytest.raises(ValueError):
            recombine([(Region(0, 0, 0, 20), np.ones((16, 16)))], grid, 16)


class TestTemperatureSchedule:
    def test_endpoints(self):
        assert temperature_schedule(0, 100) == 1.0
        assert temperature_schedule(99, 100) == pytest.approx(0.1, abs=1e-15)

    def test_strictly_decreasing(self):
        temps = [temperature_schedule(e, 100) for e in range(100)]
        assert all(a > b for a, b in zip(temps, temps[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            temperature_schedule(0, 1)
        with pytest.raises(ValueError):
            temperature_schedule(100, 100)


class TestGateUsageReport:
    def test_single_pattern_region(self):
        records = [((0, 0), GatePattern((1, 1, 1, 1)))] * 10
        report = gate_usage_report(records)
        assert report[(0, 0)]["1111"] == 100.0
        assert report[(0, 0)]["0000"] == 0.0

    def test_rows_sum_to_hundred(self):
        rng = np.random.default_rng(101)
        patterns = valid_patterns(4)
        records = []
        for region in [(r, c) for r in range(3) for c in range(7)]:
            for _ in range(40):
                records.append((region, patterns[rng.integers(0, 5)]))
        report = gate_usage_report(records)
        assert len(report) == 21
        for row in report.values():
            assert sum(row.values()) == pytest.approx(100.0, abs=0.1)

    def test_uniform_sampling_is_roughly_even(self):
        rng = np.random.default_rng(103)
        patterns = valid_patterns(4)
        records = [((0, 0), patterns[rng.integers(0, 5)]) for _ in range(20000)]
        report = gate_usage_report(records)
        for pct in report[(0, 0)].values():
            assert pct == pytest.approx(20.0, abs=1.5)

    def test_invalid_pattern_rejected(self):
        with pytest.raises(ValueError):
            gate_usage_report([((0, 0), (0, 1, 0, 0))])

    def test_mixed_cell_counts_rejected(self):
        with pytest.raises(ValueError):
            gate_usage_report([((0, 0), (1, 0)), ((0, 0), (1, 0, 0))])

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            gate_usage_report([])
