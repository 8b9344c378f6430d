"""Parity between the compiled kernel and the numpy fallback."""
import numpy as np
import pytest

from gfucb import _twolayer_np as np_kernels

try:
    from gfucb import _twolayer_c as c_kernels

    HAVE_COMPILED = True
except ImportError:
    c_kernels = None
    HAVE_COMPILED = False

BACKENDS = [np_kernels] + ([c_kernels] if HAVE_COMPILED else [])


def _random_net(rng, d=6, h=9, k=4, M=3, n=40):
    w1 = rng.normal(size=(h, d))
    b1 = rng.normal(size=h) * 0.2
    w2 = rng.normal(size=(k, h))
    b2 = rng.normal(size=k) * 0.2
    W = rng.normal(size=(k, M)) * 0.5
    X = rng.normal(size=(n, d))
    task = rng.integers(0, M, size=n)
    y = rng.uniform(-1, 1, size=n)
    return w1, b1, w2, b2, W, X, task, y


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernel unavailable")
def test_backends_agree():
    rng = np.random.default_rng(0)
    for trial in range(25):
        w1, b1, w2, b2, W, X, task, y = _random_net(rng, n=int(rng.integers(1, 60)))
        for lo, hi in [(-1.0, 1.0), (0.0, 1.0)]:
            fa = np_kernels.features(w1, b1, w2, b2, X)
            fb = c_kernels.features(w1, b1, w2, b2, X)
            assert np.allclose(fa, fb, atol=1e-12)
            va = np_kernels.values(w1, b1, w2, b2, W, X, task, lo, hi)
            vb = c_kernels.values(w1, b1, w2, b2, W, X, task, lo, hi)
            assert np.allclose(va, vb, atol=1e-12)
            ra = np_kernels.sq_loss_grad(w1, b1, w2, b2, W, X, task, y, lo, hi)
            rb = c_kernels.sq_loss_grad(w1, b1, w2, b2, W, X, task, y, lo, hi)
            for a, b in zip(ra, rb):
                assert np.allclose(a, b, atol=1e-9)
            sa = np_kernels.sum_value_grad(w1, b1, w2, b2, W, X, task, lo, hi)
            sb = c_kernels.sum_value_grad(w1, b1, w2, b2, W, X, task, lo, hi)
            for a, b in zip(sa, sb):
                assert np.allclose(a, b, atol=1e-9)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_empty_batch(kernels):
    rng = np.random.default_rng(1)
    w1, b1, w2, b2, W, _, _, _ = _random_net(rng)
    X = np.zeros((0, 6))
    task = np.zeros(0, dtype=np.int64)
    y = np.zeros(0)
    loss, *grads = kernels.sq_loss_grad(w1, b1, w2, b2, W, X, task, y, -1, 1)
    assert loss == 0.0
    assert all(np.all(g == 0.0) for g in grads)


@pytest.mark.parametrize("kernels", BACKENDS)
def test_sq_loss_grad_matches_finite_difference(kernels):
    # small heads keep every prediction off the clip boundary, where the
    # surrogate pass-through intentionally differs from the flat true loss
    rng = np.random.default_rng(2)
    w1, b1, w2, b2, W, X, task, y = _random_net(rng, n=12)
    W = W * 0.3
    u = np_kernels.features(w1, b1, w2, b2, X)
    assert np.max(np.abs(np.einsum("nk,kn->n", u, W[:, task]))) < 0.99
    loss, gw1, gb1, gw2, gb2, gW = kernels.sq_loss_grad(w1, b1, w2, b2, W, X, task, y, -1, 1)
    flat = [w1, b1, w2, b2, W]
    grads = [gw1, gb1, gw2, gb2, gW]
    step = 1e-6
    for arr, g in zip(flat, grads):
        it = np.nditer(arr, flags=["multi_index"])
        count = 0
        while not it.finished and count < 6:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            lp = kernels.sq_loss_grad(w1, b1, w2, b2, W, X, task, y, -1, 1)[0]
            arr[idx] = orig - step
            lm = kernels.sq_loss_grad(w1, b1, w2, b2, W, X, task, y, -1, 1)[0]
            arr[idx] = orig
            fd = (lp - lm) / (2 * step)
            assert abs(fd - g[idx]) <= 2e-4 * max(1.0, abs(fd))
            count += 1
            it.iternext()


@pytest.mark.parametrize("kernels", BACKENDS)
def test_values_clip_range(kernels):
    rng = np.random.default_rng(3)
    w1, b1, w2, b2, W, X, task, _ = _random_net(rng, n=50)
    v = kernels.values(w1, b1, w2, b2, W * 10, X, task, 0.0, 1.0)
    assert v.min() >= 0.0 and v.max() <= 1.0
