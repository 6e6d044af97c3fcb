import numpy as np
import pytest

from egofuse.flow import (
    FlowError,
    FlowField,
    FlowParams,
    farneback_flow,
    flow_sequence,
    read_flow_file,
    write_flow_file,
)

from conftest import smooth_texture, translate


def interior(arr, margin=12):
    return arr[margin:-margin, margin:-margin]


class TestFarnebackFlow:
    def test_identical_frames_zero(self):
        img = smooth_texture((64, 64), seed=1)
        f = farneback_flow(img, img)
        assert np.max(np.abs(f.u)) < 1e-6
        assert np.max(np.abs(f.v)) < 1e-6

    def test_flat_frames_zero(self):
        a = np.full((32, 32), 128.0)
        b = np.full((32, 32), 128.0)
        f = farneback_flow(a, b)
        assert np.max(np.abs(f.u)) < 1e-9
        assert np.max(np.abs(f.v)) < 1e-9

    def test_horizontal_shift_recovered(self):
        img = smooth_texture((96, 96), seed=2)
        shifted = translate(img, 3.0, 0.0)
        f = farneback_flow(img, shifted)
        assert 2.5 <= np.median(interior(f.u)) <= 3.5
        assert -0.5 <= np.median(interior(f.v)) <= 0.5

    def test_vertical_shift_recovered(self):
        img = smooth_texture((96, 96), seed=3)
        shifted = translate(img, 0.0, -2.0)
        f = farneback_flow(img, shifted)
        assert -2.5 <= np.median(interior(f.v)) <= -1.5
        assert -0.5 <= np.median(interior(f.u)) <= 0.5

    def test_subpixel_shift(self):
        img = smooth_texture((96, 96), seed=4)
        shifted = translate(img, 0.5, 0.0)
        f = farneback_flow(img, shifted)
        assert 0.25 <= np.median(interior(f.u)) <= 0.75

    def test_antisymmetry(self):
        img = smooth_texture((96, 96), seed=5)
        shifted = translate(img, 2.0, 1.0)
        fwd = farneback_flow(img, shifted)
        bwd = farneback_flow(shifted, img)
        err = np.hypot(interior(fwd.u + bwd.u), interior(fwd.v + bwd.v))
        assert np.median(err) < 0.5

    def test_deterministic(self):
        img = smooth_texture((64, 64), seed=6)
        shifted = translate(img, 1.0, 1.0)
        f1 = farneback_flow(img, shifted)
        f2 = farneback_flow(img, shifted)
        assert np.array_equal(f1.u, f2.u) and np.array_equal(f1.v, f2.v)

    def test_output_finite_and_same_size(self):
        img = smooth_texture((48, 72), seed=7)
        f = farneback_flow(img, translate(img, 1.0, 0.0))
        assert f.u.shape == (48, 72) and f.v.shape == (48, 72)
        assert np.all(np.isfinite(f.u)) and np.all(np.isfinite(f.v))

    def test_size_mismatch_rejected(self):
        with pytest.raises(FlowError, match="mismatch"):
            farneback_flow(np.zeros((32, 32)), np.zeros((32, 33)))

    def test_too_small_rejected(self):
        with pytest.raises(FlowError, match="16x16"):
            farneback_flow(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_param_validation(self):
        with pytest.raises(FlowError):
            FlowParams(poly_window=4)
        with pytest.raises(FlowError):
            FlowParams(pyramid_scale=1.5)


class TestFlowSequence:
    def test_pairs(self):
        img = smooth_texture((48, 48), seed=8)
        stack = np.stack([translate(img, dx, 0.0) for dx in (0.0, 1.0, 2.0)])
        flows = flow_sequence(stack)
        assert len(flows) == 2
        for f in flows:
            assert 0.5 <= np.median(interior(f.u, 8)) <= 1.5

    def test_needs_two_frames(self):
        with pytest.raises(FlowError):
            flow_sequence(np.zeros((1, 32, 32)))


class TestFlowFile:
    def test_roundtrip_float32(self, tmp_path, rng):
        flows = [
            FlowField(u=rng.standard_normal((10, 12)), v=rng.standard_normal((10, 12)))
            for _ in range(3)
        ]
        p = tmp_path / "seg.flw"
        write_flow_file(p, flows)
        back = read_flow_file(p)
        assert len(back) == 3
        for a, b in zip(flows, back):
            assert np.allclose(a.u, b.u, atol=1e-6)
            assert np.allclose(a.v, b.v, atol=1e-6)

    def test_truncated_rejected(self, tmp_path, rng):
        p = tmp_path / "seg.flw"
        write_flow_file(p, [FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 4)))])
        (tmp_path / "bad.flw").write_bytes(p.read_bytes()[:-3])
        with pytest.raises(FlowError, match="truncated"):
            read_flow_file(tmp_path / "bad.flw")
