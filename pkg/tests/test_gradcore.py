import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from actmap import gradcore as gc
from actmap.gradcore import Tensor, checkpoint
from oracles import (central_diff, naive_conv2d, naive_conv_transpose, naive_maxpool,
                     pairwise_sum)


def _t(a, grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


class TestConv2d:
    def test_all_ones_closed_form(self):
        out = gc.conv2d(_t(np.ones((1, 1, 3, 3))), _t(np.ones((1, 1, 3, 3))), _t([0.0]), 1, 1).data
        assert out.shape == (1, 1, 3, 3)
        assert out[0, 0, 1, 1] == 9
        for i, j in [(0, 0), (0, 2), (2, 0), (2, 2)]:
            assert out[0, 0, i, j] == 4

    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 1, 5, 5))
        out = gc.conv2d(_t(x), _t(np.ones((1, 1, 1, 1))), _t([0.0]), 1, 0).data
        np.testing.assert_array_equal(out, x)

    @pytest.mark.parametrize("stride,pad", [(1, 1), (2, 1), (1, 0), (2, 0)])
    def test_matches_naive_loop(self, rng, stride, pad):
        x = rng.normal(size=(2, 3, 8, 8))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        out = gc.conv2d(_t(x), _t(w), _t(b), stride, pad).data
        np.testing.assert_allclose(out, naive_conv2d(x, w, b, stride, pad), rtol=0, atol=1e-10)

    def test_larger_input_matches_naive(self, rng):
        x = rng.normal(size=(4, 8, 16, 16))
        w = rng.normal(size=(2, 8, 3, 3))
        out = gc.conv2d(_t(x), _t(w), None, 2, 1).data
        np.testing.assert_allclose(out, naive_conv2d(x, w, None, 2, 1), atol=1e-10)

    def test_output_size(self, rng):
        out = gc.conv2d(_t(rng.normal(size=(1, 2, 9, 7))), _t(rng.normal(size=(3, 2, 3, 3))), None, 2, 1)
        assert out.shape == (1, 3, (9 + 2 - 3) // 2 + 1, (7 + 2 - 3) // 2 + 1)

    def test_linearity(self, rng):
        x, y = rng.normal(size=(2, 2, 3, 6, 6))
        w = rng.normal(size=(2, 3, 3, 3))
        conv = lambda z: gc.conv2d(_t(z), _t(w), None, 1, 1).data
        np.testing.assert_allclose(conv(2.5 * x - 0.7 * y), 2.5 * conv(x) - 0.7 * conv(y), atol=1e-10)

    def test_channel_mismatch_names_dimension(self):
        with pytest.raises(gc.ShapeError, match="channel"):
            gc.conv2d(_t(np.ones((1, 2, 4, 4))), _t(np.ones((1, 3, 3, 3))))

    def test_gradients(self, rng):
        x = rng.normal(size=(2, 2, 5, 5))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)

        def loss(xx, ww, bb):
            y = gc.conv2d(xx, ww, bb, 2, 1)
            return gc.reduce_sum(gc.mul(y, y))

        assert gc.gradient_check(lambda z: loss(z, Tensor(w), Tensor(b)), x) < 1e-6
        assert gc.gradient_check(lambda z: loss(Tensor(x), z, Tensor(b)), w) < 1e-6
        assert gc.gradient_check(lambda z: loss(Tensor(x), Tensor(w), z), b) < 1e-6


class TestDeconv2d:
    def test_doubles_resolution(self):
        out = gc.deconv2d(_t(np.ones((1, 1, 2, 2))), _t(np.ones((1, 1, 4, 4))))
        assert out.shape == (1, 1, 4, 4)

    def test_zero_in_zero_out(self, rng):
        out = gc.deconv2d(_t(np.zeros((1, 2, 3, 3))), _t(rng.normal(size=(2, 3, 4, 4)))).data
        assert not out.any()

    def test_matches_scatter_oracle(self, rng):
        x = rng.normal(size=(2, 3, 4, 5))
        w = rng.normal(size=(3, 2, 4, 4))
        np.testing.assert_allclose(gc.deconv2d(_t(x), _t(w)).data, naive_conv_transpose(x, w), atol=1e-10)

    def test_adjoint_of_strided_conv(self, rng):
        # <deconv(x), y> == <x, conv(y)> with the same kernel (transposed layout)
        x = rng.normal(size=(1, 3, 4, 4))
        y = rng.normal(size=(1, 2, 8, 8))
        w = rng.normal(size=(3, 2, 4, 4))
        lhs = np.sum(gc.deconv2d(_t(x), _t(w)).data * y)
        conv_w = w  # conv weight [K=C_in, C=C_out, 4, 4]
        rhs = np.sum(x * naive_conv2d(y, conv_w, None, 2, 1))
        assert abs(lhs - rhs) < 1e-10

    def test_rejects_other_kernels(self):
        with pytest.raises(ValueError):
            gc.deconv2d(_t(np.ones((1, 1, 2, 2))), _t(np.ones((1, 1, 3, 3))))
        with pytest.raises(ValueError):
            gc.deconv2d(_t(np.ones((1, 1, 2, 2))), _t(np.ones((1, 1, 4, 4))), stride=1)

    def test_gradients(self, rng):
        x = rng.normal(size=(1, 2, 3, 3))
        w = rng.normal(size=(2, 2, 4, 4))
        sq = lambda t: gc.reduce_sum(gc.mul(t, t))
        assert gc.gradient_check(lambda z: sq(gc.deconv2d(z, Tensor(w))), x) < 1e-6
        assert gc.gradient_check(lambda z: sq(gc.deconv2d(Tensor(x), z)), w) < 1e-6


class TestMaxpool:
    def test_window_max(self):
        assert gc.maxpool2d(_t([[[[1, 2], [3, 4]]]]), 2, 2).data.tolist() == [[[[4.0]]]]

    def test_constant_routes_to_first(self):
        x = _t(np.full((1, 1, 4, 4), 3.0), grad=True)
        out = gc.maxpool2d(x, 2, 2)
        assert np.all(out.data == 3.0)
        gc.reduce_sum(out).backward()
        expect = np.zeros((4, 4))
        expect[::2, ::2] = 1.0
        np.testing.assert_array_equal(x.grad[0, 0], expect)

    def test_matches_window_scan(self, rng):
        x = rng.normal(size=(1, 1, 8, 8))
        np.testing.assert_array_equal(gc.maxpool2d(_t(x), 2, 2).data, naive_maxpool(x, 2, 2))
        big = rng.normal(size=(4, 8, 16, 16))
        np.testing.assert_array_equal(gc.maxpool2d(_t(big), 2, 2).data, naive_maxpool(big, 2, 2))

    def test_gradient_away_from_ties(self, rng):
        x = rng.permutation(64).astype(float).reshape(1, 1, 8, 8) * 0.1
        f = lambda z: gc.reduce_sum(gc.mul(gc.maxpool2d(z), gc.maxpool2d(z)))
        assert gc.gradient_check(f, x, eps=1e-4) < 1e-6


class TestElementwise:
    def test_relu(self):
        assert gc.relu(_t([-1.0, 2.0])).data.tolist() == [0.0, 2.0]

    def test_power(self):
        assert gc.power(_t(4.0), 0.5).item() == 2.0

    def test_power_rejects_negative_base(self):
        with pytest.raises(ValueError):
            gc.power(_t([-1.0]), 0.4)

    def test_power_gradient_vs_central_difference(self):
        x = _t(2.0, grad=True)
        gc.power(x, 0.4).backward()
        fd = central_diff(lambda v: float(v) ** 0.4, np.array(2.0))
        assert abs(x.grad - fd) / abs(fd) < 1e-6

    def test_relu_away_from_kink(self, rng):
        x = rng.normal(size=20)
        x[np.abs(x) < 1e-4] = 0.5
        f = lambda z: gc.reduce_sum(gc.mul(gc.relu(z), z))
        assert gc.gradient_check(f, x) < 1e-6

    def test_scalar_operand_and_mismatch(self):
        out = gc.add(_t([1.0, 2.0]), _t(3.0))
        assert out.data.tolist() == [4.0, 5.0]
        with pytest.raises(gc.ShapeError):
            gc.add(_t([1.0, 2.0]), _t([1.0, 2.0, 3.0]))

    def test_sub_mul_scale_gradients(self, rng):
        y = rng.normal(size=6)
        f = lambda z: gc.reduce_sum(gc.scale(gc.mul(gc.sub(z, Tensor(y)), z), 1.7))
        assert gc.gradient_check(f, rng.normal(size=6)) < 1e-8


class TestReductions:
    def test_mean_values(self):
        assert gc.reduce_mean(_t([1.0, 2.0, 3.0])).item() == 2.0
        assert gc.reduce_mean(_t(np.full((2, 3, 4), 1.25))).item() == 1.25

    def test_mean_vs_pairwise_sum(self, rng):
        v = rng.normal(size=100)
        assert abs(gc.reduce_mean(_t(v)).item() - pairwise_sum(v.tolist()) / 100) < 1e-12

    def test_mean_rejects_empty(self):
        with pytest.raises(gc.ShapeError):
            gc.reduce_mean(_t(np.zeros(0)))

    def test_mean_backward_uniform(self):
        x = _t(np.arange(8.0), grad=True)
        gc.reduce_mean(x).backward()
        np.testing.assert_array_equal(x.grad, np.full(8, 1 / 8))


class TestConcat:
    def test_table_channel_sum(self):
        parts = [_t(np.zeros((1, c, 2, 2))) for c in (512, 20, 512)]
        assert gc.concat(parts).shape == (1, 1044, 2, 2)

    def test_single_part_identity(self, rng):
        x = rng.normal(size=(2, 3, 4, 4))
        np.testing.assert_array_equal(gc.concat([_t(x)]).data, x)

    def test_backward_splits(self, rng):
        a, b = _t(rng.normal(size=(1, 2, 3, 3)), True), _t(rng.normal(size=(1, 5, 3, 3)), True)
        out = gc.concat([a, b])
        w = rng.normal(size=out.shape)
        gc.reduce_sum(gc.mul(out, _t(w))).backward()
        np.testing.assert_array_equal(np.concatenate([a.grad, b.grad], axis=1), w)

    def test_dimension_disagreement(self):
        with pytest.raises(gc.ShapeError, match="dimension 2"):
            gc.concat([_t(np.zeros((1, 1, 2, 2))), _t(np.zeros((1, 1, 3, 2)))])


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        loss = gc.softmax_cross_entropy(_t(np.zeros((3, 10))), [0, 4, 9]).item()
        assert abs(loss - np.log(10)) < 1e-12

    def test_saturated(self):
        logits = np.zeros((2, 4))
        logits[0, 1] = logits[1, 3] = 1e6
        assert gc.softmax_cross_entropy(_t(logits), [1, 3]).item() == 0.0

    def test_gradient(self, rng):
        labels = [0, 2, 1, 2]
        f = lambda z: gc.softmax_cross_entropy(z, labels)
        assert gc.gradient_check(f, rng.normal(size=(4, 3))) < 1e-5

    def test_out_of_range_label(self):
        with pytest.raises(ValueError):
            gc.softmax_cross_entropy(_t(np.zeros((1, 3))), [3])


class TestResampling:
    def test_resize_constant_stays_constant(self):
        out = gc.resize_bilinear(_t(np.full((1, 2, 3, 5), 0.25)), (7, 4)).data
        np.testing.assert_allclose(out, 0.25, atol=1e-15)

    def test_resize_gradient(self, rng):
        w = rng.normal(size=(1, 1, 8, 6))
        f = lambda z: gc.reduce_sum(gc.mul(gc.resize_bilinear(z, (8, 6)), Tensor(w)))
        assert gc.gradient_check(f, rng.normal(size=(1, 1, 4, 3))) < 1e-8

    def test_bilinear_sample_gradients(self, rng):
        img = rng.normal(size=(1, 2, 5, 6))
        gy, gx = np.mgrid[0:5, 0:6].astype(float)
        sx = (gx + rng.uniform(-1.3, 1.3, size=gx.shape) + 0.013)[None]
        sy = (gy + rng.uniform(-1.3, 1.3, size=gy.shape) + 0.017)[None]
        sq = lambda t: gc.reduce_sum(gc.mul(t, t))
        assert gc.gradient_check(lambda z: sq(gc.bilinear_sample(z, Tensor(sx), Tensor(sy))), img) < 1e-6
        # coordinates bounded away from integer kinks and the clamp border
        sx_safe = np.clip(np.floor(sx) + 0.5, 0.5, 4.5)
        sy_safe = np.clip(np.floor(sy) + 0.5, 0.5, 3.5)
        assert gc.gradient_check(lambda z: sq(gc.bilinear_sample(Tensor(img), z, Tensor(sy_safe))), sx_safe) < 1e-6
        assert gc.gradient_check(lambda z: sq(gc.bilinear_sample(Tensor(img), Tensor(sx_safe), z)), sy_safe) < 1e-6

    def test_forward_diff(self, rng):
        x = rng.normal(size=(1, 1, 3, 4))
        d = gc.forward_diff(_t(x), axis=3).data
        np.testing.assert_allclose(d[..., :3], np.diff(x, axis=3))
        assert not d[..., 3].any()
        f = lambda z: gc.reduce_sum(gc.mul(gc.forward_diff(z, 2), gc.forward_diff(z, 2)))
        assert gc.gradient_check(f, x) < 1e-8

    def test_clip_and_slice(self, rng):
        x = rng.normal(size=(2, 4, 3, 3)) * 3
        x[np.abs(np.abs(x) - 2) < 1e-3] = 0.1
        f = lambda z: gc.reduce_sum(gc.mul(gc.clip(gc.slice_channels(z, 1, 3), -2, 2), gc.slice_channels(z, 1, 3)))
        assert gc.gradient_check(f, x) < 1e-6

    def test_avgpool(self, rng):
        x = rng.normal(size=(1, 2, 4, 4))
        out = gc.avgpool2d(_t(x), 2).data
        np.testing.assert_allclose(out[0, 1, 1, 0], x[0, 1, 2:4, 0:2].mean())
        f = lambda z: gc.reduce_sum(gc.mul(gc.avgpool2d(z, 2), gc.avgpool2d(z, 2)))
        assert gc.gradient_check(f, x) < 1e-8


class TestBackward:
    def test_mean_sink(self):
        x = _t(np.ones(5), grad=True)
        gc.reduce_mean(x).backward()
        np.testing.assert_array_equal(x.grad, np.full(5, 0.2))

    def test_product(self):
        x, y = _t(3.0, True), _t(5.0, True)
        gc.mul(x, y).backward()
        assert x.grad == 5.0 and y.grad == 3.0

    def test_non_scalar_sink_rejected(self):
        with pytest.raises(ValueError):
            _t([1.0, 2.0], True).backward()

    def test_unreachable_untouched(self):
        x, y = _t(2.0, True), _t(4.0, True)
        y.grad = np.array(7.0)
        gc.mul(x, x).backward()
        assert x.grad == 4.0 and y.grad == 7.0

    def test_shared_subexpression_accumulates(self):
        x = _t(3.0, True)
        a = gc.mul(x, x)
        gc.add(a, gc.scale(a, 2.0)).backward()
        assert x.grad == pytest.approx(18.0)

    def test_deterministic_replay(self, rng):
        x = _t(rng.normal(size=(1, 2, 6, 6)), True)
        w = _t(rng.normal(size=(3, 2, 3, 3)), True)
        loss = gc.reduce_mean(gc.relu(gc.conv2d(x, w, None, 1, 1)))
        loss.backward(retain_graph=True)
        g1 = w.grad.copy()
        w.grad = None
        loss.backward()
        assert np.array_equal(g1, w.grad)

    def test_no_grad_records_nothing(self):
        x = _t(1.0, True)
        with gc.no_grad():
            y = gc.mul(x, x)
        assert y.node is None


class TestGradientCheck:
    def test_sum_of_squares(self, rng):
        assert gc.gradient_check(lambda z: gc.reduce_sum(gc.mul(z, z)), rng.normal(size=10), eps=1e-3) < 1e-9

    def test_charbonnier_sum(self, rng):
        def f(z):
            return gc.reduce_sum(gc.power(gc.add_scalar(gc.mul(z, z), 1e-6), 0.4))
        assert gc.gradient_check(f, rng.normal(size=12)) < 1e-5


class TestCheckpoint:
    def test_bit_exact_round_trip(self, tmp_path, rng):
        arrays = {"conv1.w": rng.normal(size=(4, 3, 3, 3)).astype(np.float32),
                  "conv1.b": np.zeros(4, np.float32),
                  "s": np.asarray(np.float32(np.pi))}
        path = tmp_path / "m.ckpt"
        checkpoint.save(path, arrays)
        back = checkpoint.load(path)
        assert list(back) == list(arrays)
        for k in arrays:
            assert back[k].shape == arrays[k].shape
            assert back[k].tobytes() == arrays[k].tobytes()

    def test_header_is_text(self, tmp_path):
        checkpoint.save(tmp_path / "a.ckpt", {"w": np.ones((2, 3), np.float32)})
        blob = (tmp_path / "a.ckpt").read_bytes()
        head = blob.split(b"end\n")[0].decode()
        assert head.splitlines() == ["ACTMAP-CKPT", "version 1", "count 1", "w 2x3 f4"]
        assert len(blob) == len(head) + 4 + 24

    def test_float64_kept(self, rng):
        arr = rng.normal(size=(3, 5))
        back = checkpoint.loads(checkpoint.dumps({"x": arr}))["x"]
        assert back.dtype == np.float64 and back.tobytes() == arr.tobytes()

    def test_header_without_dtype_reads_float32(self):
        blob = b"ACTMAP-CKPT\nversion 1\ncount 1\nw 2\nend\n" + np.array([1.5, -2], "<f4").tobytes()
        np.testing.assert_array_equal(checkpoint.loads(blob)["w"], [1.5, -2.0])

    def test_rejects_garbage(self):
        with pytest.raises(checkpoint.CheckpointError):
            checkpoint.loads(b"hello\nend\n")

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(width=32, allow_nan=False), min_size=1, max_size=40))
    def test_round_trip_property(self, values):
        arr = np.array(values, dtype=np.float32)
        back = checkpoint.loads(checkpoint.dumps({"v": arr}))["v"]
        assert back.tobytes() == arr.tobytes()


class TestOptimizers:
    def test_adam_minimises_quadratic(self):
        ps = gc.ParameterSet()
        x = ps.add("x", np.array([3.0, -2.0]))
        opt = gc.Adam(ps, lr=0.1)
        for _ in range(300):
            ps.zero_grad()
            gc.reduce_sum(gc.mul(x, x)).backward()
            opt.step()
        assert np.abs(x.data).max() < 1e-2

    def test_sgd_momentum_first_steps(self):
        ps = gc.ParameterSet()
        x = ps.add("x", np.array([1.0]))
        opt = gc.SGDMomentum(ps, lr=0.1, momentum=0.9)
        x.grad = np.array([1.0])
        opt.step()
        assert x.data[0] == pytest.approx(0.9)
        opt.step()  # buffer 1.9
        assert x.data[0] == pytest.approx(0.9 - 0.19)

    def test_step_decay(self):
        s = gc.StepDecay(1e-3, [5000, 10000], 0.1)
        assert s(0) == 1e-3 and s(4999) == 1e-3
        assert s(5000) == pytest.approx(1e-4) and s(12000) == pytest.approx(1e-5)
        half = gc.StepDecay.every(3.2e-5, 100_000, 400_000, 0.5)
        assert half.milestones == [100_000, 200_000, 300_000]
        with pytest.raises(ValueError):
            gc.StepDecay(1e-3, [10, 5])

    def test_duplicate_names_rejected(self):
        ps = gc.ParameterSet()
        ps.add("a", np.zeros(1))
        with pytest.raises(KeyError):
            ps.add("a", np.zeros(1))


class TestNaNPropagation:
    @pytest.mark.parametrize("op", [gc.relu, gc.leaky_relu])
    def test_nan_survives_activation(self, op):
        out = op(gc.Tensor(np.array([np.nan, -1.0, 2.0]))).data
        assert np.isnan(out[0]) and np.isfinite(out[1:]).all()
