"""Representation functions, multihead value functions, and sample logs.

A value function here is a shared representation phi: R^d -> R^k composed
with one linear head per task. Heads are columns of a k x M matrix, head
values are clipped into the function's value range at evaluation time, and
every representation keeps ||phi(x)||_2 <= 1 by projection or normalization.
"""
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels


class DimensionError(ValueError):
    """Raised when an input does not match the declared dimensions."""


def project_ball(v, radius):
    """Project a vector onto the L2 ball of the given radius."""
    nrm = float(np.linalg.norm(v))
    if nrm <= radius or nrm == 0.0:
        return np.asarray(v, dtype=np.float64)
    return np.asarray(v, dtype=np.float64) * (radius / nrm)


def _rows_to_unit_ball(V):
    nrm = np.sqrt(np.sum(V * V, axis=-1, keepdims=True))
    return V / np.maximum(nrm, 1.0)


class LinearRep:
    """phi(x) = Bx, with the output projected onto the unit ball."""

    def __init__(self, B):
        self.B = np.ascontiguousarray(B, dtype=np.float64)
        if self.B.ndim != 2:
            raise DimensionError("LinearRep expects a k x d matrix")
        self.k, self.d_in = self.B.shape

    def batch(self, X):
        return _rows_to_unit_ball(np.asarray(X, dtype=np.float64) @ self.B.T)

    def __call__(self, x):
        return self.batch(np.asarray(x, dtype=np.float64)[None, :])[0]


class TableRep:
    """Explicit map from a finite input set to representation vectors.

    Inputs are matched exactly (by their float64 byte pattern), so callers
    must present the same vectors the table was built from. Stored vectors
    are projected onto the unit ball at construction.
    """

    def __init__(self, inputs, values):
        self.inputs = np.ascontiguousarray(inputs, dtype=np.float64)
        self.values = _rows_to_unit_ball(np.ascontiguousarray(values, dtype=np.float64))
        if self.inputs.ndim != 2 or self.values.ndim != 2 or len(self.inputs) != len(self.values):
            raise DimensionError("TableRep expects matching input and value matrices")
        self.k = self.values.shape[1]
        self.d_in = self.inputs.shape[1]
        self._index = {row.tobytes(): j for j, row in enumerate(self.inputs)}

    def row_index(self, x):
        key = np.ascontiguousarray(x, dtype=np.float64).tobytes()
        try:
            return self._index[key]
        except KeyError:
            raise DimensionError("input not present in the representation table") from None

    def batch(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        idx = [self.row_index(row) for row in X]
        return self.values[idx] if idx else np.zeros((0, self.k))

    def __call__(self, x):
        return self.values[self.row_index(x)]


class TwoLayerRep:
    """Dense relu network, output divided by max(||.||_2, 1).

    Parameters are treated as immutable once the object is constructed;
    training code works on a private copy (see `copy`).
    """

    def __init__(self, w1, b1, w2, b2):
        self.w1 = np.ascontiguousarray(w1, dtype=np.float64)
        self.b1 = np.ascontiguousarray(b1, dtype=np.float64)
        self.w2 = np.ascontiguousarray(w2, dtype=np.float64)
        self.b2 = np.ascontiguousarray(b2, dtype=np.float64)
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.w2.shape[1] != self.w1.shape[0]:
            raise DimensionError("inconsistent two-layer shapes")
        self.hidden, self.d_in = self.w1.shape
        self.k = self.w2.shape[0]

    @classmethod
    def init_random(cls, d_in, hidden, k, rng):
        w1 = rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(hidden, d_in))
        b1 = np.zeros(hidden)
        w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(k, hidden))
        b2 = np.zeros(k)
        return cls(w1, b1, w2, b2)

    def copy(self):
        return TwoLayerRep(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def batch(self, X):
        return kernels.features(self.w1, self.b1, self.w2, self.b2, np.ascontiguousarray(X, dtype=np.float64))

    def __call__(self, x):
        return self.batch(np.asarray(x, dtype=np.float64)[None, :])[0]


@dataclass
class MultiheadFunction:
    """A shared representation plus per-task linear heads (columns of W)."""

    rep: object
    W: np.ndarray
    value_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] != self.rep.k:
            raise DimensionError("head matrix must be k x M")

    @property
    def M(self):
        return self.W.shape[1]

    @property
    def k(self):
        return self.rep.k

    @property
    def d_in(self):
        return self.rep.d_in

    def with_heads(self, W):
        return MultiheadFunction(self.rep, W, self.value_range)


def evaluate(f, x, i):
    """Value of head i at input x, clipped into the function's range."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= i < f.M:
        raise DimensionError(f"task index {i} outside [0, {f.M})")
    if x.shape != (f.d_in,):
        raise DimensionError(f"input has shape {x.shape}, expected ({f.d_in},)")
    lo, hi = f.value_range
    return float(np.clip(np.dot(f.rep(x), f.W[:, i]), lo, hi))


def evaluate_batch(f, X, i):
    """Vectorized `evaluate` over the rows of X for a single head."""
    lo, hi = f.value_range
    return np.clip(f.rep.batch(X) @ f.W[:, i], lo, hi)


class SampleLog:
    """Per-task history of (input, reward) pairs, one sample per task per round.

    Keeps an LRU cache of representation outputs on the logged inputs so that
    repeated norm and least-squares computations cost O(new rows), not O(t).
    Cached entries hold a strong reference to their representation, which
    also keeps id()-based keys stable.
    """

    _CACHE_CAP = 64

    def __init__(self, M, d_in):
        self.M = M
        self.d_in = d_in
        self._X = np.zeros((0, M, d_in))
        self._R = np.zeros((0, M))
        self._t = 0
        self._cache = OrderedDict()

    @property
    def t(self):
        return self._t

    def append_round(self, inputs, rewards):
        inputs = np.asarray(inputs, dtype=np.float64)
        rewards = np.asarray(rewards, dtype=np.float64)
        if inputs.shape != (self.M, self.d_in) or rewards.shape != (self.M,):
            raise DimensionError("round must supply one input and one reward per task")
        if self._t == len(self._X):
            cap = max(16, 2 * len(self._X))
            self._X = np.resize(self._X, (cap, self.M, self.d_in))
            self._R = np.resize(self._R, (cap, self.M))
        self._X[self._t] = inputs
        self._R[self._t] = rewards
        self._t += 1

    @property
    def inputs(self):
        return self._X[: self._t]

    @property
    def rewards(self):
        return self._R[: self._t]

    def task_inputs(self, i):
        return self._X[: self._t, i, :]

    def task_rewards(self, i):
        return self._R[: self._t, i]

    def rep_values(self, rep):
        """[t, M, k] representation outputs on all logged inputs, cached."""
        key = id(rep)
        entry = self._cache.get(key)
        if entry is None:
            vals = np.zeros((0, self.M, rep.k))
            entry = [rep, vals]
            self._cache[key] = entry
            if len(self._cache) > self._CACHE_CAP:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(key)
        cached = entry[1]
        t0 = len(cached)
        if t0 < self._t:
            tail = self._X[t0 : self._t].reshape(-1, self.d_in)
            fresh = rep.batch(tail).reshape(self._t - t0, self.M, rep.k)
            entry[1] = np.concatenate([cached, fresh]) if t0 else fresh
        return entry[1][: self._t]

    def function_values(self, f):
        """[t, M] clipped head values of f on the logged inputs."""
        if self._t == 0:
            return np.zeros((0, self.M))
        V = self.rep_values(f.rep)
        lo, hi = f.value_range
        return np.clip(np.einsum("tmk,km->tm", V, f.W), lo, hi)


def empirical_norm_sq(f, g, log):
    """Squared empirical 2-norm of f - g over the logged inputs."""
    if f.M != log.M or g.M != log.M or f.d_in != log.d_in or g.d_in != log.d_in:
        raise DimensionError("functions and log disagree on M or d_in")
    diff = log.function_values(f) - log.function_values(g)
    return float(np.sum(diff * diff))


# Flat parameter packing order for two-layer functions: w1, b1, w2, b2, W.
def pack_params(f):
    r = f.rep
    return np.concatenate([r.w1.ravel(), r.b1.ravel(), r.w2.ravel(), r.b2.ravel(), f.W.ravel()])


def unpack_params(flat, d_in, hidden, k, M, value_range=(-1.0, 1.0)):
    sizes = [hidden * d_in, hidden, k * hidden, k, k * M]
    parts = np.split(np.asarray(flat, dtype=np.float64), np.cumsum(sizes)[:-1])
    rep = TwoLayerRep(
        parts[0].reshape(hidden, d_in), parts[1], parts[2].reshape(k, hidden), parts[3]
    )
    return MultiheadFunction(rep, parts[4].reshape(k, M), value_range)


def gradient(f, x, i):
    """Gradient of evaluate(f, x, i) in the flat two-layer parameter vector.

    Defined as the zero subgradient wherever the clip saturates; relu and the
    norm kink likewise contribute their flat-region branch.
    """
    if not isinstance(f.rep, TwoLayerRep):
        raise TypeError("gradient is defined for two-layer representations only")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (f.d_in,):
        raise DimensionError(f"input has shape {x.shape}, expected ({f.d_in},)")
    if not 0 <= i < f.M:
        raise DimensionError(f"task index {i} outside [0, {f.M})")
    lo, hi = f.value_range
    r = f.rep
    _, gw1, gb1, gw2, gb2, gW = kernels.sum_value_grad(
        r.w1, r.b1, r.w2, r.b2, f.W, x[None, :], np.array([i], dtype=np.int64), lo, hi
    )
    return np.concatenate([gw1.ravel(), gb1.ravel(), gw2.ravel(), gb2.ravel(), gW.ravel()])


def log_covering_linear(d_in, k, alpha, entry_bound=1.0):
    """Ball-covering bound k * d * log(1 + 2B/alpha) for linear representations."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if d_in < 1 or k < 1 or entry_bound < 0:
        raise ValueError("d_in, k must be >= 1 and entry_bound >= 0")
    return k * d_in * float(np.log1p(2.0 * entry_bound / alpha))


@dataclass
class FunctionClass:
    """A family of multihead functions: finite member list or a trainable shape.

    kind is one of "finite", "linear", "two_layer". Finite classes enumerate
    explicit members (used for exact confidence-set operations); the
    two-layer kind describes an architecture trained by gradient descent.
    """

    kind: str
    M: int
    k: int
    d_in: int
    head_norm_bound: float
    value_range: tuple = (-1.0, 1.0)
    members: list = None
    hidden: int = 32
    entry_bound: float = 1.0
    _rep_list: list = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("finite", "linear", "two_layer"):
            raise ValueError(f"unknown class kind {self.kind!r}")
        if self.kind == "finite":
            if not self.members:
                raise ValueError("finite class needs at least one member")
            for f in self.members:
                if f.M != self.M or f.k != self.k or f.d_in != self.d_in:
                    raise DimensionError("member shape disagrees with the class")
            reps, seen = [], set()
            for f in self.members:
                if id(f.rep) not in seen:
                    seen.add(id(f.rep))
                    reps.append(f.rep)
            self._rep_list = reps

    def representations(self):
        """Distinct representations among members, in first-appearance order."""
        if self.kind == "finite":
            return list(self._rep_list)
        raise ValueError("only finite classes enumerate representations")

    def log_covering(self, alpha):
        """log covering number of the representation family at scale alpha."""
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.kind == "finite":
            return float(np.log(len(self._rep_list)))
        if self.kind == "linear":
            return log_covering_linear(self.d_in, self.k, alpha, self.entry_bound)
        raise NotImplementedError(
            "two-layer covering numbers are intractable; use a practical radius schedule"
        )

    def as_single_task(self):
        """Single-task variant used by per-task baselines."""
        if self.kind == "finite":
            members = [
                MultiheadFunction(rep, np.zeros((self.k, 1)), self.value_range)
                for rep in self._rep_list
            ]
            return FunctionClass(
                "finite", 1, self.k, self.d_in, self.head_norm_bound, self.value_range, members
            )
        return FunctionClass(
            self.kind, 1, self.k, self.d_in, self.head_norm_bound, self.value_range,
            None, self.hidden, self.entry_bound,
        )
