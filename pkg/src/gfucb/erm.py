"""Multitask empirical risk minimization.

Finite classes are solved exactly: every candidate representation gets
closed-form per-task least-squares heads (minimum-norm on rank deficiency,
then projected onto the head-norm ball) and the globally best candidate wins.
The two-layer family is trained by seeded full-batch gradient descent.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .function_space import MultiheadFunction, TwoLayerRep, project_ball

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when gradient training produces a non-finite loss."""


@dataclass
class TrainConfig:
    """Gradient-descent schedule for the two-layer solver.

    The step is applied to the mean-loss gradient so that step_size does not
    have to be retuned as the sample count grows; the reported loss is still
    the plain sum of squared errors.
    """

    step_size: float = 1e-3
    epochs: int = 200
    batch: str = "full"
    seed: int = 0
    head_init_scale: float = 1.0
    stop_tol: float = 0.0
    stop_patience: int = 5


def loss(f, log):
    """Sum of squared prediction errors of f over the whole log."""
    resid = log.function_values(f) - log.rewards
    return float(np.sum(resid * resid))


def solve_finite(cls, log):
    """Exact ERM over a finite class: best (representation, OLS heads) pair.

    Ties break toward the earlier candidate representation. An empty log
    returns the first member's representation with zero heads.
    """
    if cls.kind != "finite":
        raise ValueError("solve_finite requires a finite-enumerated class")
    if log.t == 0:
        return MultiheadFunction(cls.members[0].rep, np.zeros((cls.k, cls.M)), cls.value_range)
    best = None
    best_loss = np.inf
    for rep in cls.representations():
        V = log.rep_values(rep)
        W = np.zeros((cls.k, cls.M))
        for i in range(cls.M):
            w, *_ = np.linalg.lstsq(V[:, i, :], log.task_rewards(i), rcond=None)
            W[:, i] = project_ball(w, cls.head_norm_bound)
        cand = MultiheadFunction(rep, W, cls.value_range)
        cand_loss = loss(cand, log)
        if cand_loss < best_loss:
            best, best_loss = cand, cand_loss
    return best


def _init_twolayer(cls, seed, head_scale=1.0):
    rng = np.random.default_rng(seed)
    rep = TwoLayerRep.init_random(cls.d_in, cls.hidden, cls.k, rng)
    W = rng.normal(0.0, head_scale / np.sqrt(cls.k), size=(cls.k, cls.M))
    for i in range(cls.M):
        W[:, i] = project_ball(W[:, i], cls.head_norm_bound)
    return MultiheadFunction(rep, W, cls.value_range)


def _project_heads(W, bound):
    norms = np.sqrt(np.sum(W * W, axis=0))
    over = norms > bound
    if np.any(over):
        W[:, over] *= bound / norms[over]


def solve_twolayer(cls, log, schedule=None, init=None):
    """Train a two-layer multihead function on the log by gradient descent.

    Deterministic given schedule.seed. Pass `init` to warm start from an
    existing function (its parameters are copied, never mutated). The final
    training loss is attached to the returned function as `fit_loss`.
    """
    if cls.kind != "two_layer":
        raise ValueError("solve_twolayer requires a two-layer class")
    cfg = schedule or TrainConfig()
    f0 = init if init is not None else _init_twolayer(cls, cfg.seed, cfg.head_init_scale)
    rep = f0.rep.copy()
    W = f0.W.copy()
    out = MultiheadFunction(rep, W, cls.value_range)
    if log.t == 0:
        out.fit_loss = 0.0
        return out

    lo, hi = cls.value_range
    t, M = log.t, log.M
    X = np.ascontiguousarray(log.inputs.reshape(t * M, cls.d_in))
    task = np.ascontiguousarray(np.tile(np.arange(M, dtype=np.int64), t))
    y = np.ascontiguousarray(log.rewards.reshape(t * M))
    scale = 1.0 / (t * M)

    last = np.inf
    stall = 0
    cur = np.inf
    for epoch in range(cfg.epochs):
        cur, gw1, gb1, gw2, gb2, gW = kernels.sq_loss_grad(
            rep.w1, rep.b1, rep.w2, rep.b2, W, X, task, y, lo, hi
        )
        if not np.isfinite(cur):
            raise TrainingError(
                f"two-layer training diverged at epoch {epoch}: loss={cur!r}, "
                f"step_size={cfg.step_size}, samples={t * M}"
            )
        step = cfg.step_size * scale
        rep.w1 -= step * gw1
        rep.b1 -= step * gb1
        rep.w2 -= step * gw2
        rep.b2 -= step * gb2
        W -= step * gW
        _project_heads(W, cls.head_norm_bound)
        if cfg.stop_tol > 0.0:
            if last - cur <= cfg.stop_tol * max(last, 1e-12):
                stall += 1
                if stall >= cfg.stop_patience:
                    break
            else:
                stall = 0
            last = cur
    out.fit_loss = float(loss(out, log))
    return out


def solve_mdp_level(cls, log, schedule=None, init=None):
    """Per-level regression against reward-plus-next-value targets.

    The log's rewards are the caller-built targets. The class carries the
    level value range (typically [0, 1]) and the head bound D, so this is the
    same machinery as the bandit solvers under those constraints.
    """
    if cls.kind == "finite":
        return solve_finite(cls, log)
    return solve_twolayer(cls, log, schedule=schedule, init=init)
