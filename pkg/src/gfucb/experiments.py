"""Experiment recipes shared by the CLI and the acceptance suite.

Two families: the digit-bandit multitask comparison (task groups of size
1, 5, 10 with a per-task greedy baseline) and finite-class replication
batches used for containment statistics and width audits. Replications are
independent and can run in a process pool; results never depend on the
worker schedule.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np
from numpy.random import SeedSequence

from .bandit import (
    DigitBanditEnv,
    make_digit_prototypes,
    make_reward_maps,
    random_finite_instance,
    run_eps_greedy,
    run_gfucb,
)
from .confidence import BetaConfig
from .erm import TrainConfig
from .function_space import FunctionClass


def digit_function_class(n_tasks, d_in=16, hidden=32, k=10):
    """Two-layer class over digit images, one head per task."""
    return FunctionClass(
        "two_layer", n_tasks, k, d_in,
        head_norm_bound=float(np.sqrt(k)), members=None, hidden=hidden,
    )


def digit_test_images(prototypes, per_digit=10, obs_noise=0.05, seed=123):
    """Fresh noisy images grouped by digit: (inputs [10 * per_digit, d], labels)."""
    rng = np.random.default_rng(seed)
    n_digits, d = prototypes.shape
    labels = np.repeat(np.arange(n_digits), per_digit)
    images = prototypes[labels] + rng.normal(0.0, obs_noise, size=(len(labels), d))
    return images, labels


def _digit_unit(args):
    """One (algo, group, seed) run; returns its per-step summed regrets."""
    (algo, tasks, group_idx, seed_key, T, K, d_in, hidden, obs_noise,
     reward_noise, maps_seed, proto_seed, concentration, eps, beta_dict,
     train_dict, refit_every, scale_radius) = args
    prototypes = make_digit_prototypes(d_in=d_in, seed=proto_seed,
                                       concentration=concentration)
    maps = make_reward_maps(10, seed=maps_seed)[list(tasks)]
    env = DigitBanditEnv(maps, prototypes, K, obs_noise, reward_noise)
    cls = digit_function_class(len(tasks), d_in=d_in, hidden=hidden)
    seed = SeedSequence(seed_key)
    train = TrainConfig(**train_dict)
    if algo == "eps_greedy":
        records = run_eps_greedy(env, cls, T, eps=eps, seed=seed, train=train,
                                 refit_every=refit_every)
    else:
        beta = BetaConfig(**beta_dict)
        if scale_radius:
            # the joint empirical norm sums M times more terms, so the group
            # radius scales with the group size (as the theoretical schedule
            # does); per-task exploration is then size-independent
            beta = replace_beta_scale(beta, len(tasks))
        records = run_gfucb(env, cls, T, beta=beta, seed=seed, train=train)
    inst = np.array([r.inst_regret for r in records])
    bonus = np.array([r.bonus_mean if r.bonus_mean is not None else np.nan for r in records])
    return algo, group_idx, inst, bonus


def replace_beta_scale(beta, n_tasks):
    from dataclasses import replace

    if beta.mode == "practical":
        return replace(beta, a=beta.a * n_tasks)
    return beta


def digit_multitask_experiment(group_sizes=(1, 5, 10), T=300, n_seeds=5, n_tasks=10,
                               K=4, d_in=16, hidden=32, obs_noise=0.05,
                               reward_noise=0.01, concentration=0.85, eps=0.1,
                               beta=None, train=None,
                               base_seed=0, maps_seed=7, proto_seed=3,
                               include_baseline=True, refit_every=1,
                               scale_radius=True, jobs=1):
    """Group the fixed task pool into 10/M groups per size and compare runs.

    Returns rows for CSV emission plus per-algo seed-averaged cumulative
    regret curves (averaged over all tasks). The baseline shares replication
    seeds with the size-1 runs, so both face identical environments.
    """
    beta = beta or BetaConfig()
    train = train or TrainConfig()
    units = []
    for size in group_sizes:
        if n_tasks % size:
            raise ValueError("group size must divide the task count")
        for g in range(n_tasks // size):
            tasks = tuple(range(g * size, (g + 1) * size))
            for s in range(n_seeds):
                units.append((
                    f"gfucb_m{size}", tasks, g, [base_seed, size, g, s], T, K, d_in,
                    hidden, obs_noise, reward_noise, maps_seed, proto_seed,
                    concentration, eps, asdict(beta), asdict(train),
                    refit_every, scale_radius,
                ))
    if include_baseline:
        for g in range(n_tasks):
            for s in range(n_seeds):
                units.append((
                    "eps_greedy", (g,), g, [base_seed, 1, g, s], T, K, d_in,
                    hidden, obs_noise, reward_noise, maps_seed, proto_seed,
                    concentration, eps, asdict(beta), asdict(train),
                    refit_every, scale_radius,
                ))
    results = _map_units(_digit_unit, units, jobs)

    rows = []
    for (algo, tasks, g, seed_key, *_), (_, group_idx, inst, bonus) in zip(units, results):
        cum = np.cumsum(inst)
        seed_idx = seed_key[-1]
        for t in range(T):
            rows.append({
                "seed": seed_idx, "t": t + 1, "task_group": group_idx, "algo": algo,
                "inst_regret": inst[t], "cum_regret": cum[t],
                "width": "", "bonus_mean": "" if np.isnan(bonus[t]) else bonus[t],
            })
    curves = {}
    for algo in {u[0] for u in units}:
        per_seed = {}
        for (a, tasks, g, seed_key, *_), (_, _, inst, _) in zip(units, results):
            if a != algo:
                continue
            per_seed.setdefault(seed_key[-1], np.zeros(T))
            per_seed[seed_key[-1]] += np.cumsum(inst)
        stacked = np.stack([v for _, v in sorted(per_seed.items())]) / n_tasks
        curves[algo] = stacked.mean(axis=0)
    return rows, curves


def _containment_unit(args):
    env, cls, T, seed_key, delta = args
    beta = BetaConfig(mode="theoretical", delta=delta)
    trace = []
    records = run_gfucb(env, cls, T, beta=beta, seed=SeedSequence(seed_key),
                        trace_inputs=trace)
    return records, np.stack(trace)


def containment_experiment(n_reps=200, T=200, base_seed=0, delta=0.1,
                           instance_seed=2024, noise_sigma=0.1, M=2, k=2,
                           n_members=6, n_inputs=8, K=3, jobs=1):
    """Replicated finite-class runs with the theoretical radius schedule.

    Returns (env, cls, results) where each result holds the episode records
    and the played input tuples of one replication.
    """
    env, cls = random_finite_instance(
        instance_seed, M=M, k=k, n_members=n_members, n_inputs=n_inputs, K=K,
        noise_sigma=noise_sigma,
    )
    units = [(env, cls, T, [base_seed, r], delta) for r in range(n_reps)]
    results = _map_units(_containment_unit, units, jobs)
    return env, cls, results


def _map_units(fn, units, jobs):
    if jobs <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, units, chunksize=1))
