import numpy as np
import pytest

from facevitals.errors import ShapeMismatch
from facevitals.fer import ops


def pad_oracle(x, d, padding, value=0.0):
    if padding == "valid":
        return x
    p = (d - 1) // 2
    h, w, c = x.shape
    out = np.full((h + 2 * p, w + 2 * p, c), value)
    out[p:p + h, p:p + w] = x
    return out


def conv_oracle(x, w, b, stride, padding):
    n, m, d, _ = w.shape
    xp = pad_oracle(x, d, padding)
    ho = (xp.shape[0] - d) // stride + 1
    wo = (xp.shape[1] - d) // stride + 1
    out = np.zeros((ho, wo, n))
    for i in range(ho):
        for j in range(wo):
            for o in range(n):
                acc = 0.0 if b is None else b[o]
                for c in range(m):
                    for u in range(d):
                        for v in range(d):
                            acc += xp[i * stride + u, j * stride + v, c] * w[o, c, u, v]
                out[i, j, o] = acc
    return out


def depthwise_oracle(x, k, stride, padding):
    c, d, _ = k.shape
    xp = pad_oracle(x, d, padding)
    ho = (xp.shape[0] - d) // stride + 1
    wo = (xp.shape[1] - d) // stride + 1
    out = np.zeros((ho, wo, c))
    for i in range(ho):
        for j in range(wo):
            for ch in range(c):
                out[i, j, ch] = sum(xp[i * stride + u, j * stride + v, ch] * k[ch, u, v]
                                    for u in range(d) for v in range(d))
    return out


def pointwise_oracle(x, w, stride):
    xs = x[::stride, ::stride]
    out = np.zeros(xs.shape[:2] + (w.shape[0],))
    for i in range(xs.shape[0]):
        for j in range(xs.shape[1]):
            for o in range(w.shape[0]):
                out[i, j, o] = sum(xs[i, j, c] * w[o, c] for c in range(w.shape[1]))
    return out


def random_configs(count, seed):
    r = np.random.default_rng(seed)
    for _ in range(count):
        d = int(r.choice([1, 3, 5]))
        padding = str(r.choice(["valid", "same"]))
        size = int(r.integers(d, 10))
        yield dict(h=size, w=int(r.integers(d, 10)), m=int(r.integers(1, 4)),
                   n=int(r.integers(1, 4)), d=d, stride=int(r.integers(1, 3)),
                   padding=padding, bias=bool(r.integers(0, 2)), rng=r)


def test_conv2d_matches_oracle():
    worst, count = 0.0, 0
    for cfg in random_configs(120, 1):
        r = cfg["rng"]
        x = r.standard_normal((cfg["h"], cfg["w"], cfg["m"]))
        w = r.standard_normal((cfg["n"], cfg["m"], cfg["d"], cfg["d"]))
        b = r.standard_normal(cfg["n"]) if cfg["bias"] else None
        got = ops.conv2d(x, w, b, cfg["stride"], cfg["padding"])
        want = conv_oracle(x, w, b, cfg["stride"], cfg["padding"])
        assert got.shape == want.shape
        worst = max(worst, np.max(np.abs(got - want)))
        count += 1
    assert count >= 100 and worst <= 1e-5


def test_depthwise_matches_oracle():
    worst = 0.0
    for cfg in random_configs(120, 2):
        r = cfg["rng"]
        x = r.standard_normal((cfg["h"], cfg["w"], cfg["m"]))
        k = r.standard_normal((cfg["m"], cfg["d"], cfg["d"]))
        got = ops.depthwise_conv2d(x, k, None, cfg["stride"], cfg["padding"])
        worst = max(worst, np.max(np.abs(got - depthwise_oracle(x, k, cfg["stride"], cfg["padding"]))))
    assert worst <= 1e-5


def test_pointwise_matches_oracle():
    worst = 0.0
    for cfg in random_configs(120, 3):
        r = cfg["rng"]
        x = r.standard_normal((cfg["h"], cfg["w"], cfg["m"]))
        w = r.standard_normal((cfg["n"], cfg["m"]))
        got = ops.pointwise_conv2d(x, w, None, cfg["stride"])
        worst = max(worst, np.max(np.abs(got - pointwise_oracle(x, w, cfg["stride"]))))
        assert np.array_equal(got, ops.pointwise_conv2d(x, w[:, :, None, None], None, cfg["stride"]))
    assert worst <= 1e-5


def test_separable_equals_full_conv_with_factored_kernel(rng):
    # a full conv with w[n,c] = p[n,c] * k[c] equals depthwise(k) then pointwise(p)
    for padding in ("valid", "same"):
        x = rng.standard_normal((9, 11, 4))
        k = rng.standard_normal((4, 3, 3))
        p = rng.standard_normal((5, 4))
        full = ops.conv2d(x, p[:, :, None, None] * k[None], None, 1, padding)
        sep = ops.pointwise_conv2d(ops.depthwise_conv2d(x, k, None, 1, padding), p)
        assert np.max(np.abs(full - sep)) <= 1e-5


def test_shape_errors():
    x = np.zeros((6, 6, 2))
    with pytest.raises(ShapeMismatch):
        ops.conv2d(x, np.zeros((1, 3, 3, 3)))
    with pytest.raises(ShapeMismatch):
        ops.conv2d(x, np.zeros((1, 2, 2, 2)))
    with pytest.raises(ShapeMismatch):
        ops.conv2d(np.zeros((2, 2, 2)), np.zeros((1, 2, 3, 3)))
    with pytest.raises(ShapeMismatch):
        ops.depthwise_conv2d(x, np.zeros((3, 3, 3)))
    with pytest.raises(ShapeMismatch):
        ops.residual_add(x, np.zeros((6, 6, 3)))


def test_batch_norm_oracle(rng):
    x = rng.standard_normal((4, 4, 3))
    g, b, m, v = (rng.random(3) + 0.5 for _ in range(4))
    want = g * (x - m) / np.sqrt(v + 1e-3) + b
    assert np.allclose(ops.batch_norm(x, g, b, m, v), want)


def test_max_pool_and_gap(rng):
    x = rng.standard_normal((5, 5, 2))
    pooled = ops.max_pool(x, 3, 2, "same")
    assert pooled.shape == (3, 3, 2)
    assert pooled[0, 0, 0] == x[:2, :2, 0].max()
    assert pooled[1, 1, 1] == x[1:4, 1:4, 1].max()
    assert np.allclose(ops.global_avg_pool(x)[0, 0], x.mean(axis=(0, 1)))


def test_softmax_stable_and_normalized():
    z = ops.softmax(np.array([1000.0, 1000.0, 0.0]))
    assert np.all(np.isfinite(z)) and z.sum() == pytest.approx(1.0)
    assert z[0] == pytest.approx(0.5)
    assert np.array_equal(ops.relu(np.array([-1.0, 2.0])), [0.0, 2.0])


def test_batch_norm_hand_values():
    x = np.full((1, 1, 1), 3.0)
    one, zero = np.ones(1), np.zeros(1)
    assert ops.batch_norm(x, one, zero, zero, one, eps=0.0)[0, 0, 0] == 3.0
    assert ops.batch_norm(x, 2 * one, one, zero, one, eps=0.0)[0, 0, 0] == 7.0
