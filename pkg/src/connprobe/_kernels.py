"""Probe-training kernels: numba-compiled hot path with a numpy fallback.

Both implementations run the same full-batch gradient descent and are kept
importable side by side so benchmarks can compare them directly. Selection
is controlled by the CONNPROBE_NUMBA environment variable: any value other
than "0" (the default) uses the compiled kernel when numba imports cleanly.
"""

from __future__ import annotations

import math
import os

import numpy as np

ENV_FLAG = "CONNPROBE_NUMBA"

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def numba_enabled() -> bool:
    return _HAVE_NUMBA and os.environ.get(ENV_FLAG, "1") != "0"


def loss_and_grad(W, b, X, y, n_classes, l2):
    """Loss and analytic gradients at (W, b); the unit the epoch loop repeats."""
    n = X.shape[0]
    rows = np.arange(n)
    scores = X @ W + b
    scores -= scores.max(axis=1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=1, keepdims=True)
    loss = -np.log(probs[rows, y] + 1e-300).mean() + l2 * np.sum(W * W)
    onehot = np.zeros((n, n_classes))
    onehot[rows, y] = 1.0
    delta = probs - onehot
    grad_w = (X.T @ delta) / n + 2.0 * l2 * W
    grad_b = delta.sum(axis=0) / n
    return loss, grad_w, grad_b


def train_numpy(X, y, n_classes, l2, lr, max_epochs, tol):
    """Full-batch multinomial logistic regression, vectorized numpy."""
    n, d = X.shape
    W = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    rows = np.arange(n)
    prev = np.inf
    epochs = 0
    loss = 0.0
    for epoch in range(max_epochs):
        scores = X @ W + b
        scores -= scores.max(axis=1, keepdims=True)
        probs = np.exp(scores)
        probs /= probs.sum(axis=1, keepdims=True)
        loss = -np.log(probs[rows, y] + 1e-300).mean() + l2 * np.sum(W * W)
        delta = probs - onehot
        W -= lr * ((X.T @ delta) / n + 2.0 * l2 * W)
        b -= lr * delta.sum(axis=0) / n
        epochs = epoch + 1
        if prev - loss < tol:
            break
        prev = loss
    return W, b, epochs, loss


@njit(cache=True)
def _train_jit(X, XT, y, n_classes, l2, lr, max_epochs, tol):  # pragma: no cover - compiled
    n, d = X.shape
    K = n_classes
    W = np.zeros((d, K))
    b = np.zeros(K)
    prev = 1e300
    epochs = 0
    loss = 0.0
    for epoch in range(max_epochs):
        P = np.dot(X, W)
        loss = 0.0
        for i in range(n):
            m = P[i, 0] + b[0]
            for k in range(K):
                v = P[i, k] + b[k]
                P[i, k] = v
                if v > m:
                    m = v
            s = 0.0
            for k in range(K):
                e = math.exp(P[i, k] - m)
                P[i, k] = e
                s += e
            inv = 1.0 / s
            for k in range(K):
                P[i, k] *= inv
            loss -= math.log(P[i, y[i]] + 1e-300)
            P[i, y[i]] -= 1.0
        loss /= n
        reg = 0.0
        for j in range(d):
            for k in range(K):
                reg += W[j, k] * W[j, k]
        loss += l2 * reg
        GW = np.dot(XT, P)
        scale = lr / n
        for j in range(d):
            for k in range(K):
                W[j, k] -= scale * GW[j, k] + lr * 2.0 * l2 * W[j, k]
        for k in range(K):
            g = 0.0
            for i in range(n):
                g += P[i, k]
            b[k] -= scale * g
        epochs = epoch + 1
        if prev - loss < tol:
            break
        prev = loss
    return W, b, epochs, loss


def train_numba(X, y, n_classes, l2, lr, max_epochs, tol):
    """Full-batch trainer backed by the numba kernel (same math as train_numpy)."""
    if not _HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    X = np.ascontiguousarray(X, dtype=np.float64)
    XT = np.ascontiguousarray(X.T)
    y = np.ascontiguousarray(y, dtype=np.int64)
    return _train_jit(X, XT, y, n_classes, float(l2), float(lr), int(max_epochs), float(tol))


def train_numpy_minibatch(X, y, n_classes, l2, lr, max_epochs, tol, batch_size, seed):
    """Minibatch variant (numpy only); convergence is checked on full-data loss."""
    n, d = X.shape
    W = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    rng = np.random.default_rng(seed)
    rows = np.arange(n)
    prev = np.inf
    epochs = 0
    loss = 0.0
    for epoch in range(max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = X[idx], y[idx]
            scores = xb @ W + b
            scores -= scores.max(axis=1, keepdims=True)
            probs = np.exp(scores)
            probs /= probs.sum(axis=1, keepdims=True)
            probs[np.arange(len(idx)), yb] -= 1.0
            W -= lr * ((xb.T @ probs) / len(idx) + 2.0 * l2 * W)
            b -= lr * probs.sum(axis=0) / len(idx)
        scores = X @ W + b
        scores -= scores.max(axis=1, keepdims=True)
        probs = np.exp(scores)
        probs /= probs.sum(axis=1, keepdims=True)
        loss = -np.log(probs[rows, y] + 1e-300).mean() + l2 * np.sum(W * W)
        epochs = epoch + 1
        if prev - loss < tol:
            break
        prev = loss
    return W, b, epochs, loss


def train_fullbatch(X, y, n_classes, l2, lr, max_epochs, tol):
    """Dispatch to the numba kernel when enabled, else the numpy fallback."""
    if numba_enabled():
        return train_numba(X, y, n_classes, l2, lr, max_epochs, tol)
    return train_numpy(X, y, n_classes, l2, lr, max_epochs, tol)
