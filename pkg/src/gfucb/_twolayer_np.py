"""Pure-numpy kernels for the two-layer multihead network.

This is the fallback backend; `gfucb._twolayer_c` is a compiled drop-in
replacement with the same four entry points. Both compute the map

    phi(x) = p / max(||p||, 1),   p = W2 relu(W1 x + b1) + b2
    f_i(x) = clip(<phi(x), W[:, i]>, lo, hi)

and exact (sub)gradients of batched losses over it. Conventions: relu and
the value gradient contribute zero outside their active region, the norm
kink at ||p|| = 1 uses the identity branch, and the squared-loss gradient
passes through a saturated clip one-sidedly (only in the direction that
de-saturates the prediction), so regression targets can pull saturated
outputs back into the active range.
"""
import numpy as np


def _forward(w1, b1, w2, b2, X):
    A = X @ w1.T + b1
    Z = np.maximum(A, 0.0)
    P = Z @ w2.T + b2
    nrm = np.sqrt(np.sum(P * P, axis=1))
    s = np.maximum(nrm, 1.0)
    Phi = P / s[:, None]
    return A, Z, P, nrm, s, Phi


def features(w1, b1, w2, b2, X):
    """Normalized representation phi(x) for each row of X, shape [n, k]."""
    return _forward(w1, b1, w2, b2, np.asarray(X, dtype=np.float64))[5]


def values(w1, b1, w2, b2, W, X, task, lo, hi):
    """Clipped head values f_{task[s]}(X[s]), shape [n]."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return np.zeros(0)
    Phi = _forward(w1, b1, w2, b2, X)[5]
    u = np.einsum("nk,kn->n", Phi, W[:, task])
    return np.clip(u, lo, hi)


def _backward(w1, b1, w2, b2, W, X, task, du, A, P, Z, nrm, s, Phi, u, lo, hi):
    n, k = Phi.shape
    dPhi = du[:, None] * W[:, task].T
    gW = np.zeros_like(W)
    np.add.at(gW.T, task, du[:, None] * Phi)
    dot = np.sum(Phi * dPhi, axis=1)
    corr = np.where(nrm > 1.0, dot, 0.0)
    dP = (dPhi - corr[:, None] * Phi) / s[:, None]
    dZ = dP @ w2
    gw2 = dP.T @ Z
    gb2 = dP.sum(axis=0)
    dA = dZ * (A > 0.0)
    gw1 = dA.T @ X
    gb1 = dA.sum(axis=0)
    return gw1, gb1, gw2, gb2, gW


def sq_loss_grad(w1, b1, w2, b2, W, X, task, y, lo, hi):
    """Squared loss sum_s (f(x_s) - y_s)^2 and its parameter gradients."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return 0.0, np.zeros_like(w1), np.zeros_like(b1), np.zeros_like(w2), np.zeros_like(b2), np.zeros_like(W)
    A, Z, P, nrm, s, Phi = _forward(w1, b1, w2, b2, X)
    u = np.einsum("nk,kn->n", Phi, W[:, task])
    v = np.clip(u, lo, hi)
    resid = v - y
    loss = float(np.dot(resid, resid))
    inside = (u > lo) & (u < hi)
    recover = ((u >= hi) & (resid > 0)) | ((u <= lo) & (resid < 0))
    du = 2.0 * resid * (inside | recover)
    grads = _backward(w1, b1, w2, b2, W, X, task, du, A, P, Z, nrm, s, Phi, u, lo, hi)
    return (loss,) + grads


def sum_value_grad(w1, b1, w2, b2, W, X, task, lo, hi):
    """Total value sum_s f_{task[s]}(x_s) and its parameter gradients."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return 0.0, np.zeros_like(w1), np.zeros_like(b1), np.zeros_like(w2), np.zeros_like(b2), np.zeros_like(W)
    A, Z, P, nrm, s, Phi = _forward(w1, b1, w2, b2, X)
    u = np.einsum("nk,kn->n", Phi, W[:, task])
    v = np.clip(u, lo, hi)
    total = float(v.sum())
    du = 1.0 * ((u > lo) & (u < hi))
    grads = _backward(w1, b1, w2, b2, W, X, task, du, A, P, Z, nrm, s, Phi, u, lo, hi)
    return (total,) + grads
