import csv

import numpy as np
import pytest
import torch
from PIL import Image

from blurtrain.data import BlurCropDataset, read_manifest, split_by_crop
from blurtrain.labels import to_native, to_normalized


class TestManifest:
    def test_reads_rows(self, mini_data):
        rows = read_manifest(mini_data["manifest"])
        assert len(rows) > 0
        first = rows[0]
        assert first.r >= 1
        assert -90 < first.phi <= 90
        assert 0.0 <= first.r_norm <= 1.0

    def test_rejects_wrong_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_manifest(bad)

    def test_norm_columns_match_documented_maps(self, mini_data):
        for row in read_manifest(mini_data["manifest"]):
            r, phi = to_native(row.r_norm, row.phi_norm)
            assert round(r) == row.r
            assert round(phi) == row.phi
            rn, pn = to_normalized(row.r, row.phi)
            assert rn == pytest.approx(row.r_norm)
            assert pn == pytest.approx(row.phi_norm)


class TestSkipRule:
    def test_small_images_are_skipped(self, mini_data):
        rows = read_manifest(mini_data["manifest"])
        usable, skipped = split_by_crop(rows, crop=64)
        assert skipped == 0  # all sources are 72px
        usable, skipped = split_by_crop(rows, crop=100)
        assert skipped == len(rows)
        assert usable == []

    def test_dataset_counts_skips(self, mini_data):
        ds = BlurCropDataset(mini_data["manifest"], mini_data["images"], crop=64)
        assert ds.skipped == 0
        with pytest.raises(ValueError):
            BlurCropDataset(mini_data["manifest"], mini_data["images"], crop=100)


class TestLoader:
    def test_full_crop_zero_noise_reproduces_stored_pixels(self, mini_data):
        ds = BlurCropDataset(mini_data["manifest"], mini_data["images"],
                             crop=72, noise_variance=0.0, seed=0)
        tensor, target = ds[0]
        row = ds.rows[0]
        with Image.open(mini_data["images"] / row.output_path) as img:
            stored = np.asarray(img.convert("RGB"), dtype=np.uint8)
        expected = torch.from_numpy(stored.transpose(2, 0, 1).astype(np.float32) / 255.0)
        assert torch.equal(tensor, expected)
        assert target[0].item() == pytest.approx(row.r_norm)
        assert target[1].item() == pytest.approx(row.phi_norm)

    def test_crops_deterministic_per_epoch(self, mini_data):
        a = BlurCropDataset(mini_data["manifest"], mini_data["images"], crop=64, seed=3)
        b = BlurCropDataset(mini_data["manifest"], mini_data["images"], crop=64, seed=3)
        a.set_epoch(4)
        b.set_epoch(4)
        assert torch.equal(a[5][0], b[5][0])
        b.set_epoch(5)
        assert not torch.equal(a[5][0], b[5][0])

    def test_noise_added_after_crop(self, mini_data):
        clean = BlurCropDataset(mini_data["manifest"], mini_data["images"],
                                crop=64, noise_variance=0.0, seed=7)
        noisy = BlurCropDataset(mini_data["manifest"], mini_data["images"],
                                crop=64, noise_variance=0.01, seed=7)
        x0 = clean[2][0]
        x1 = noisy[2][0]
        delta = (x1 - x0).numpy()
        assert abs(float(delta.std()) - 0.1) < 0.02  # same crop, only noise differs
        assert abs(float(delta.mean())) < 0.01

    def test_rejects_negative_variance(self, mini_data):
        with pytest.raises(ValueError):
            BlurCropDataset(mini_data["manifest"], mini_data["images"],
                            crop=64, noise_variance=-1.0)
