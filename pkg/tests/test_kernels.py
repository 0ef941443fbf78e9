import math
import statistics

import numpy as np
import pytest
from skimage.draw import line as skimage_line

import blurkit as bk
from blurkit.kernels import KernelError


class TestKernelDims:
    @pytest.mark.parametrize("length,angle,expected", [
        (3, 90, (3, 1)),    # vertical line is h x 1
        (5, 0, (1, 5)),     # horizontal line is 1 x w
        (2, 45, (2, 2)),
        (2, -45, (2, 2)),
        (2, 30, (1, 2)),    # sin(30) exact half-integer stays in the flat group
        (2, 60, (2, 1)),    # cos(60) exact half-integer stays in the vertical group
        (1, 37, (1, 1)),
        (100, 90, (100, 1)),
    ])
    def test_examples(self, length, angle, expected):
        assert bk.kernel_dims(length, angle) == expected

    @pytest.mark.parametrize("length,angle", [(0.5, 10), (0, 0), (3, 90.5), (3, -90), (3, 180)])
    def test_rejects_bad_params(self, length, angle):
        with pytest.raises(KernelError):
            bk.kernel_dims(length, angle)

    def test_negative_angle_same_dims(self):
        for r in range(2, 40):
            for a in range(1, 90):
                assert bk.kernel_dims(r, a) == bk.kernel_dims(r, -a)


class TestRasterizeLine:
    def test_vertical_three(self):
        assert np.array_equal(bk.rasterize_line(3, 90), np.ones((3, 1), np.uint8))

    def test_horizontal_five(self):
        assert np.array_equal(bk.rasterize_line(5, 0), np.ones((1, 5), np.uint8))

    def test_diagonal_two(self):
        # lower-left to upper-right: anti-diagonal of a 2x2 grid
        assert np.array_equal(bk.rasterize_line(2, 45),
                              np.array([[0, 1], [1, 0]], np.uint8))

    def test_negative_diagonal_is_mirror(self):
        assert np.array_equal(bk.rasterize_line(2, -45),
                              np.flipud(bk.rasterize_line(2, 45)))

    def test_support_is_chebyshev_length(self):
        for r in range(1, 60):
            for a in range(-89, 91, 3):
                mask = bk.rasterize_line(r, a)
                assert mask.sum() == max(mask.shape)

    def test_matches_skimage_bresenham_exhaustively(self):
        # the library's own Bresenham against the independent skimage oracle
        for r in range(1, 101):
            for a in range(-89, 91):
                h, w = bk.kernel_dims(r, a)
                expected = np.zeros((h, w), np.uint8)
                if a >= 0:
                    rr, cc = skimage_line(h - 1, 0, 0, w - 1)
                else:
                    rr, cc = skimage_line(0, 0, h - 1, w - 1)
                expected[rr, cc] = 1
                assert np.array_equal(bk.rasterize_line(r, a), expected), (r, a)

    def test_mirror_property_midrange(self):
        for r in range(2, 40):
            for a in range(1, 90):
                assert np.array_equal(bk.rasterize_line(r, -a),
                                      np.flipud(bk.rasterize_line(r, a)))


class TestQuantizeAngle:
    def test_zero_wins(self):
        assert bk.quantize_angle(range(0, 31)) == 0

    def test_ninety_wins(self):
        assert bk.quantize_angle(range(60, 91)) == 90

    def test_median_branch(self):
        # independent oracle for the expected value
        assert statistics.median(range(31, 60)) == 45
        assert bk.quantize_angle(range(31, 60)) == 45

    def test_even_cardinality_takes_ceiling_of_midpoint(self):
        assert statistics.median([40, 41]) == 40.5
        assert bk.quantize_angle([40, 41]) == 41

    def test_empty_is_error(self):
        with pytest.raises(KernelError):
            bk.quantize_angle([])

    def test_out_of_range_is_error(self):
        with pytest.raises(KernelError):
            bk.quantize_angle([-3, 10])


class TestBuildCatalog:
    def test_length_two_angles(self):
        cat = bk.build_catalog(2, 2)
        assert cat.angles_for_length(2) == (-45, 0, 45, 90)
        assert len(cat) == 5  # four pixel lines plus the identity entry
        assert cat.get(1, 0).grid.shape == (1, 1)

    def test_without_identity(self):
        cat = bk.build_catalog(2, 2, include_identity=False)
        assert len(cat) == 4
        assert (1, 0) not in cat
        assert not cat.includes_identity

    def test_full_catalog_counts(self, catalog_full):
        assert catalog_full.examined_lines == 17820
        enumerated = len(catalog_full) - 1  # identity is inserted, not enumerated
        assert enumerated == 13032

    def test_no_angle_below_minus_ninety(self, catalog_small):
        for kernel in catalog_small:
            assert -90 < kernel.angle <= 90

    def test_special_case_labels(self, catalog_small):
        for kernel in catalog_small:
            if not kernel.source_angles:
                continue
            if 0 in kernel.source_angles:
                assert kernel.angle == 0
            if 90 in kernel.source_angles:
                assert kernel.angle == 90

    def test_entries_are_unique_grids_per_length(self, catalog_small):
        seen = set()
        for kernel in catalog_small:
            key = (kernel.length, kernel.grid.shape, kernel.support.tobytes())
            assert key not in seen
            seen.add(key)

    def test_determinism(self):
        a = bk.build_catalog(2, 15)
        b = bk.build_catalog(2, 15)
        assert a.to_text() == b.to_text()
        assert a.content_hash() == b.content_hash()

    def test_golden_full_catalog_hash(self, catalog_full):
        # freezes the rasterization convention, including Bresenham tie-breaking
        assert catalog_full.content_hash() == (
            "40072e9c0b5dbced3e59630c2047b149786d76adbe7b1331e001a98f77826d86")

    def test_chebyshev_bounds(self, catalog_small):
        for kernel in catalog_small:
            assert kernel.chebyshev_length <= math.ceil(kernel.length)
            assert kernel.length <= kernel.chebyshev_length * math.sqrt(2) + 1e-9

    def test_bad_range_rejected(self):
        with pytest.raises(KernelError):
            bk.build_catalog(0, 5)
        with pytest.raises(KernelError):
            bk.build_catalog(5, 2)


class TestAnglesForLength:
    def test_out_of_range(self, catalog_small):
        with pytest.raises(KeyError):
            catalog_small.angles_for_length(999)

    def test_full_coverage_threshold(self, catalog_full):
        counts = {r: len(catalog_full.angles_for_length(r))
                  for r in catalog_full.lengths() if r > 1}
        assert counts[100] == 180
        smallest_full = min(r for r, n in counts.items() if n == 180)
        assert 60 <= smallest_full <= 80


class TestRealizeKernel:
    def test_identity(self):
        kernel = bk.realize_kernel(1, 0)
        assert kernel.grid.shape == (1, 1)
        assert kernel.grid[0, 0] == 1.0

    def test_identity_absorbs_angles(self):
        assert np.array_equal(bk.realize_kernel(1, 63).grid, [[1.0]])

    def test_vertical_three_normalized(self):
        kernel = bk.realize_kernel(3, 90)
        assert kernel.grid.shape == (3, 1)
        assert np.allclose(kernel.grid, 1.0 / 3.0)

    def test_collapsed_angles_share_grid(self):
        assert np.array_equal(bk.realize_kernel(2, 27).grid, bk.realize_kernel(2, 0).grid)

    def test_unit_sum(self):
        for r, a in [(2, 45), (7, -30), (20, 10), (15, 88)]:
            assert abs(bk.realize_kernel(r, a).grid.sum() - 1.0) < 1e-12


class TestPixelKernelInvariants:
    def test_rejects_negative_weights(self):
        with pytest.raises(KernelError):
            bk.PixelKernel(grid=np.array([[1.5, -0.5]]), length=2, angle=0)

    def test_rejects_unnormalized(self):
        with pytest.raises(KernelError):
            bk.PixelKernel(grid=np.ones((2, 2)), length=2, angle=45)

    def test_grid_is_readonly(self):
        kernel = bk.realize_kernel(3, 45)
        with pytest.raises(ValueError):
            kernel.grid[0, 0] = 5.0


class TestExhaustiveness:
    def test_every_line_is_a_catalog_entry(self, catalog_small):
        for r in range(2, 21):
            for a in range(-89, 91):
                mask = bk.rasterize_line(r, a)
                phi = catalog_small.label_for_grid(r, mask)
                entry = catalog_small.get(r, phi)
                assert np.array_equal(entry.support, mask)


class TestCanonicalize:
    def test_paper_collapse_example(self, catalog_small):
        assert bk.canonicalize_prediction(2.0, 27.0, catalog_small) == (2, 0)

    def test_diagonal_collapse(self, catalog_small):
        assert bk.canonicalize_prediction(2.0, 50.0, catalog_small) == (2, 45)

    def test_identity_absorbs(self, catalog_small):
        assert bk.canonicalize_prediction(1.2, 63.0, catalog_small) == (1, 0)

    def test_wraps_angles(self, catalog_small):
        wrapped = bk.canonicalize_prediction(5.0, 200.0, catalog_small)
        assert wrapped == bk.canonicalize_prediction(5.0, 20.0, catalog_small)

    def test_clamps_out_of_range_with_warning(self, catalog_small):
        with pytest.warns(UserWarning):
            label = bk.canonicalize_prediction(500.0, 10.0, catalog_small)
        assert label[0] == 20

    def test_rejects_tiny_length(self, catalog_small):
        with pytest.raises(KernelError):
            bk.canonicalize_prediction(0.2, 0.0, catalog_small)

    def test_minus_ninety_rounds_to_vertical(self, catalog_small):
        assert bk.canonicalize_prediction(3.0, -89.7, catalog_small) == (3, 90)


class TestWrapAngle:
    @pytest.mark.parametrize("angle,expected", [
        (0, 0), (90, 90), (91, -89), (-90, 90), (180, 0), (270, 90), (-91, 89),
    ])
    def test_examples(self, angle, expected):
        assert bk.wrap_angle(angle) == pytest.approx(expected)


class TestSerialization:
    def test_round_trip(self, catalog_small):
        text = catalog_small.to_text()
        loaded = bk.KernelCatalog.from_text(text)
        assert len(loaded) == len(catalog_small)
        assert loaded.to_text() == text
        for kernel in catalog_small:
            other = loaded.get(kernel.length, kernel.angle)
            assert np.array_equal(other.grid, kernel.grid)

    def test_file_round_trip(self, catalog_small, tmp_path):
        path = tmp_path / "cat.txt"
        catalog_small.save_text(path)
        loaded = bk.KernelCatalog.load_text(path)
        assert loaded.content_hash() == catalog_small.content_hash()

    def test_summary_counts(self, catalog_small):
        summary = catalog_small.summary()
        assert summary["total_entries"] == len(catalog_small)
        assert summary["angles_per_length"]["2"] == 4
        assert summary["examined_lines"] == catalog_small.examined_lines

    def test_rejects_garbage(self):
        with pytest.raises(KernelError):
            bk.KernelCatalog.from_text("not a catalog\n")

    def test_kernel_text_export(self):
        text = bk.realize_kernel(3, 90).to_text()
        rows = text.strip().split("\n")
        assert len(rows) == 3
        assert all(float(v) == pytest.approx(1 / 3) for v in rows[0].split())
