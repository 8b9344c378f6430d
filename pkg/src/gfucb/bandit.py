"""Multitask contextual-bandit environments and driver loops.

Environments present each task a finite set of candidate context-action
inputs per round; rewards are noisy evaluations of a ground-truth value per
candidate. Reward noise is drawn once per (round, task) before the action is
known, so algorithms sharing a replication seed face identical environments.
"""
import time
from dataclasses import dataclass, replace

import numpy as np

from .confidence import BetaConfig, ConfidenceSet, SearchConfig, optimistic_select, width
from .erm import TrainConfig, solve_finite, solve_twolayer
from .function_space import (
    FunctionClass,
    MultiheadFunction,
    SampleLog,
    TableRep,
    evaluate_batch,
)
from .rng import spawn_run_streams


@dataclass
class Round:
    """One round of candidate inputs and their noiseless values, per task."""

    inputs: np.ndarray       # [M, K, d_in]
    true_values: np.ndarray  # [M, K]


@dataclass
class EpisodeRecord:
    """Per-step record emitted by the bandit drivers."""

    t: int
    actions: tuple
    inst_regret: float
    cum_regret: float
    width: float = None
    width_exact: bool = None
    bonus_mean: float = None
    optimistic_value: float = None
    contains_truth: bool = None
    discarded: bool = False
    wall_time: float = 0.0


class MultitaskBanditEnv:
    """Synthetic environment: a ground-truth multihead function on a finite
    input universe, K distinct candidates per task per round."""

    def __init__(self, true_member, universe, K, noise_sigma, noise_kind="gaussian"):
        self.true_member = true_member
        self.universe = np.ascontiguousarray(universe, dtype=np.float64)
        self.M = true_member.M
        self.d_in = true_member.d_in
        self.K = K
        self.noise_sigma = noise_sigma
        self.noise_kind = noise_kind
        self._truth = np.stack(
            [evaluate_batch(true_member, self.universe, i) for i in range(self.M)]
        )

    def sample_round(self, rng):
        idx = np.stack([rng.choice(len(self.universe), size=self.K, replace=False)
                        for _ in range(self.M)])
        inputs = self.universe[idx]
        true_values = np.take_along_axis(self._truth, idx, axis=1)
        return Round(inputs, true_values)

    def sample_rewards(self, rnd, actions, rng):
        if self.noise_kind == "gaussian":
            noise = rng.normal(0.0, self.noise_sigma, size=self.M)
        elif self.noise_kind == "uniform":
            noise = rng.uniform(-self.noise_sigma, self.noise_sigma, size=self.M)
        else:
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        return rnd.true_values[np.arange(self.M), actions] + noise


class DigitBanditEnv:
    """Digit-prototype bandit: each round shows K noisy images of distinct
    digits per task; the reward of an image is the task's value for its digit
    plus Gaussian noise."""

    def __init__(self, reward_maps, prototypes, K, obs_noise=0.05, reward_noise=0.01):
        self.reward_maps = np.asarray(reward_maps, dtype=np.float64)
        self.prototypes = np.ascontiguousarray(prototypes, dtype=np.float64)
        self.M = self.reward_maps.shape[0]
        self.n_digits = self.prototypes.shape[0]
        self.d_in = self.prototypes.shape[1]
        self.K = K
        self.obs_noise = obs_noise
        self.reward_noise = reward_noise
        self.true_member = None

    def sample_round(self, rng):
        digits = np.stack([rng.choice(self.n_digits, size=self.K, replace=False)
                           for _ in range(self.M)])
        images = self.prototypes[digits] + rng.normal(
            0.0, self.obs_noise, size=(self.M, self.K, self.d_in)
        )
        true_values = np.take_along_axis(self.reward_maps, digits, axis=1)
        return Round(images, true_values)

    def sample_rewards(self, rnd, actions, rng):
        noise = rng.normal(0.0, self.reward_noise, size=self.M)
        return rnd.true_values[np.arange(self.M), actions] + noise


def step_env(env, rnd, actions, rng):
    """Play one action per task: returns (rewards, instantaneous regrets)."""
    actions = np.asarray(actions, dtype=np.int64)
    if actions.shape != (env.M,) or actions.min() < 0 or actions.max() >= rnd.inputs.shape[1]:
        raise IndexError("one valid action index per task required")
    rewards = env.sample_rewards(rnd, actions, rng)
    regrets = rnd.true_values.max(axis=1) - rnd.true_values[np.arange(env.M), actions]
    return rewards, regrets


def make_digit_prototypes(d_in=16, n_digits=10, seed=0, concentration=0.0):
    """Fixed set of unit prototype vectors.

    concentration 0 gives orthonormal prototypes; a value rho in (0, 1)
    gives pairwise inner products of exactly rho (a shared direction plus
    orthonormal residuals), so the classes stay separable but distinguishing
    them requires finer features and more samples.
    """
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(d_in, n_digits + 1))
    Q, _ = np.linalg.qr(G)
    basis = Q.T
    if concentration <= 0.0:
        return np.ascontiguousarray(basis[:n_digits])
    shared = basis[n_digits]
    protos = np.sqrt(concentration) * shared + np.sqrt(1.0 - concentration) * basis[:n_digits]
    return np.ascontiguousarray(protos)


def make_reward_maps(n_tasks, n_digits=10, seed=0):
    """Uniform digit-to-reward maps with distinct best digits across tasks."""
    rng = np.random.default_rng(seed)
    best = rng.permutation(n_digits)
    maps = rng.uniform(0.0, 1.0, size=(n_tasks, n_digits))
    for i in range(n_tasks):
        j = int(np.argmax(maps[i]))
        b = best[i % n_digits]
        maps[i, j], maps[i, b] = maps[i, b], maps[i, j]
    return maps


def random_finite_instance(seed, M=2, k=2, n_members=6, n_inputs=8, K=3,
                           noise_sigma=0.1, d_in=None, value_scale=1.0):
    """Random finite-class bandit instance; the truth is a class member.

    Returns (env, cls). Representation tables are random directions on the
    unit sphere and heads are random within the head ball, so member values
    spread over the clip range and separate quickly.
    """
    rng = np.random.default_rng(seed)
    d_in = d_in or n_inputs
    universe = rng.normal(size=(n_inputs, d_in))
    universe /= np.linalg.norm(universe, axis=1, keepdims=True)
    members = []
    for _ in range(n_members):
        V = rng.normal(size=(n_inputs, k))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        rep = TableRep(universe, V)
        w = rng.normal(size=(k, M))
        w *= value_scale * np.sqrt(k) / np.linalg.norm(w, axis=0, keepdims=True)
        members.append(MultiheadFunction(rep, w))
    cls = FunctionClass("finite", M, k, d_in, head_norm_bound=np.sqrt(k), members=members)
    true_member = members[int(rng.integers(n_members))]
    env = MultitaskBanditEnv(true_member, universe, K, noise_sigma)
    return env, cls


def _resolve_beta(beta, cls, T):
    if isinstance(beta, BetaConfig):
        return beta.resolve(cls, T), SearchConfig(lam=beta.lam)
    return beta, SearchConfig()


def run_gfucb(env, cls, T, beta=None, seed=0, train=None, search=None,
              record_width=None, check_containment=None, warm_start=True,
              trace_inputs=None, capture=None):
    """Optimistic driver loop: ERM fit, confidence set, joint argmax, play.

    Deterministic given the seed. For finite classes the per-step width and
    the containment of the environment truth are recorded by default; for
    two-layer classes both are skipped unless requested (each costs extra
    penalized searches per step). Pass a list as `trace_inputs` to capture
    the played per-task input tuples (used by the width-count audit).
    """
    streams = spawn_run_streams(seed)
    beta = beta if beta is not None else BetaConfig()
    beta_fn, default_search = _resolve_beta(beta, cls, T)
    search = search or default_search
    if record_width is None:
        record_width = cls.kind == "finite"
    if check_containment is None:
        check_containment = cls.kind == "finite" and getattr(env, "true_member", None) is not None

    log = SampleLog(env.M, env.d_in)
    train = train or TrainConfig()
    if cls.kind == "two_layer":
        train = replace(train, seed=int(streams.algo_init.integers(2**31)))
    prev = None
    records = []
    cum = 0.0
    for t in range(1, T + 1):
        t0 = time.perf_counter()
        rnd = env.sample_round(streams.env_context)
        if cls.kind == "finite":
            f_hat = solve_finite(cls, log)
        else:
            f_hat = solve_twolayer(cls, log, schedule=train, init=prev if warm_start else None)
            prev = f_hat
        cs = ConfidenceSet(f_hat, beta_fn(t), log, cls, search)
        sel = optimistic_select(cs, list(rnd.inputs))
        rewards, regrets = step_env(env, rnd, sel.actions, streams.env_noise)
        chosen = rnd.inputs[np.arange(env.M), sel.actions]
        w = float(width(cs, chosen)) if record_width else None
        contained = bool(cs.contains(env.true_member)) if check_containment else None
        if trace_inputs is not None:
            trace_inputs.append(chosen.copy())
        log.append_round(chosen, rewards)
        cum += float(regrets.sum())
        records.append(EpisodeRecord(
            t=t,
            actions=tuple(int(a) for a in sel.actions),
            inst_regret=float(regrets.sum()),
            cum_regret=cum,
            width=w,
            width_exact=(cs.exact if w is not None else None),
            bonus_mean=float(np.mean(sel.bonus)),
            optimistic_value=float(sel.value),
            contains_truth=contained,
            discarded=sel.discarded,
            wall_time=time.perf_counter() - t0,
        ))
    if capture is not None:
        capture.update(f_hat=f_hat, log=log, beta_fn=beta_fn, search=search, cls=cls)
    return records


def run_eps_greedy(env, cls, T, eps=0.1, seed=0, train=None, refit_every=1):
    """Per-task independent baseline: explore uniformly with probability eps,
    otherwise play the greedy action of a per-task ERM fit."""
    streams = spawn_run_streams(seed)
    eps_fn = eps if callable(eps) else (lambda t: eps)
    single = cls.as_single_task()
    train = train or TrainConfig()
    seeds = [int(streams.algo_init.integers(2**31)) for _ in range(env.M)]
    logs = [SampleLog(1, env.d_in) for _ in range(env.M)]
    fits = [None] * env.M
    records = []
    cum = 0.0
    for t in range(1, T + 1):
        t0 = time.perf_counter()
        rnd = env.sample_round(streams.env_context)
        actions = np.zeros(env.M, dtype=np.int64)
        for i in range(env.M):
            u = streams.algo_explore.uniform()
            if fits[i] is None or u < eps_fn(t):
                actions[i] = int(streams.algo_explore.integers(rnd.inputs.shape[1]))
            else:
                actions[i] = int(np.argmax(evaluate_batch(fits[i], rnd.inputs[i], 0)))
        rewards, regrets = step_env(env, rnd, actions, streams.env_noise)
        for i in range(env.M):
            logs[i].append_round(rnd.inputs[i, actions[i]][None, :], rewards[i : i + 1])
        if t % refit_every == 0:
            for i in range(env.M):
                if single.kind == "finite":
                    fits[i] = solve_finite(single, logs[i])
                else:
                    cfg = replace(train, seed=seeds[i])
                    fits[i] = solve_twolayer(single, logs[i], schedule=cfg, init=fits[i])
        cum += float(regrets.sum())
        records.append(EpisodeRecord(
            t=t,
            actions=tuple(int(a) for a in actions),
            inst_regret=float(regrets.sum()),
            cum_regret=cum,
            wall_time=time.perf_counter() - t0,
        ))
    return records
