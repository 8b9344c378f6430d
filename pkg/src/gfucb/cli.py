"""Experiment runner CLI.

Subcommands: run-bandit, run-mdp, eluder, diagnose. Configs are YAML with
all defaults pre-filled; every artifact embeds the fully resolved config so
each number is re-derivable. Exit codes: 0 success, 2 config error, 3
runtime error.
"""
import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml
from numpy.random import SeedSequence

from .analysis import (
    bonus_decay_curve,
    bonus_diagnostic,
    build_scalar_class,
    diagonal_dominance,
    kernel_matrix,
    width_count_audit,
)
from .bandit import run_gfucb
from .confidence import BetaConfig, ConfidenceSet
from .eluder import ScalarClass, eluder_dimension
from .erm import TrainConfig
from .experiments import (
    containment_experiment,
    digit_function_class,
    digit_multitask_experiment,
    digit_test_images,
)
from .bandit import DigitBanditEnv, make_digit_prototypes, make_reward_maps
from .mdp import env_function_class, make_zero_ibe_env, run_mdp_ucb

BANDIT_COLUMNS = ["seed", "t", "task_group", "algo", "inst_regret", "cum_regret", "width", "bonus_mean"]
MDP_COLUMNS = BANDIT_COLUMNS + ["episode", "H"]


class ConfigError(ValueError):
    pass


def _fmt(x):
    if x is None or x == "":
        return ""
    return f"{float(x):.9g}"


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return cfg


def _merge_defaults(cfg, defaults, path=""):
    """Fill defaults and reject unknown keys, reporting the offending path."""
    out = {}
    for key, dval in defaults.items():
        if key in cfg:
            cval = cfg[key]
            if isinstance(dval, dict) and not isinstance(cval, dict):
                raise ConfigError(f"config key '{path}{key}': expected a mapping")
            out[key] = _merge_defaults(cval, dval, f"{path}{key}.") if isinstance(dval, dict) else cval
        else:
            out[key] = {k: v for k, v in dval.items()} if isinstance(dval, dict) else dval
            if isinstance(dval, dict):
                out[key] = _merge_defaults({}, dval, f"{path}{key}.")
    for key in cfg:
        if key not in defaults:
            raise ConfigError(f"unknown config key '{path}{key}'")
    return out


BANDIT_DEFAULTS = {
    "experiment": "digit_multitask",
    "T": 300,
    "seeds": 5,
    "seed": 0,
    "jobs": 1,
    "env": {
        "n_tasks": 10, "K": 4, "d_in": 16, "obs_noise": 0.25, "reward_noise": 0.01,
        "maps_seed": 7, "proto_seed": 3,
        # finite-instance keys
        "instance_seed": 2024, "M": 2, "k": 2, "n_members": 6, "n_inputs": 8,
        "noise_sigma": 0.1,
    },
    "algo": {
        "group_sizes": [1, 5, 10],
        "eps": 0.1,
        "include_baseline": True,
        "hidden": 32,
        "refit_every": 1,
        "delta": 0.1,
        "beta": {"mode": "practical", "a": 0.4, "b": 0.5, "c": 2.0, "lam": 30.0, "delta": 0.1, "alpha": None},
        "train": {"step_size": 1e-3, "epochs": 200, "seed": 0, "stop_tol": 0.0, "stop_patience": 5},
    },
}

MDP_DEFAULTS = {
    "T": 50,
    "seeds": 2,
    "seed": 0,
    "jobs": 1,
    "delta": 0.1,
    "env": {"states": 4, "actions": 2, "H": 2, "M": 2, "k": 2, "noise": 0.05,
            "seed": 5, "init_state": "uniform"},
    "class": {"distractors": 2, "seed": 9, "include_true": True},
}

DIAGNOSE_DEFAULTS = {
    "which": "bonus",
    "seed": 0,
    "env": {"n_tasks": 10, "K": 4, "d_in": 16, "obs_noise": 0.25, "reward_noise": 0.01,
            "maps_seed": 7, "proto_seed": 3},
    "algo": {
        "hidden": 32,
        "beta": {"mode": "practical", "a": 0.4, "b": 0.5, "c": 2.0, "lam": 30.0, "delta": 0.1, "alpha": None},
        "train": {"step_size": 1e-3, "epochs": 200, "seed": 0, "stop_tol": 0.0, "stop_patience": 5},
    },
    "bonus": {"checkpoint": 40, "test_per_digit": 10, "test_seed": 123,
              "decay_sizes": [0, 10, 40, 160], "task": 0},
    "kernel": {"T": 150, "group_sizes": [1, 10], "test_per_digit": 10, "test_seed": 123},
    "width_audit": {"T": 100, "seeds": 2, "eps_grid": [0.1, 0.2, 0.5, 1.0],
                    "instance_seed": 2024, "M": 2, "k": 2, "n_members": 6,
                    "n_inputs": 8, "K": 3, "noise_sigma": 0.1, "delta": 0.1},
}


def _runid(resolved):
    canon = json.dumps(resolved, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:10]


def _write_csv(path, columns, rows, resolved):
    with open(path, "w", newline="") as fh:
        fh.write("# config: " + json.dumps(resolved, sort_keys=True, default=str) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                row[c] if not isinstance(row[c], float) else _fmt(row[c])
                for c in columns
            ])


def _summarize(rows, T, resolved):
    checkpoints = sorted({max(1, T // 4), max(1, T // 2), max(1, 3 * T // 4), max(1, T)})
    algos = {}
    for cp in checkpoints:
        per_algo = {}
        for row in rows:
            if row["t"] == cp:
                per_algo.setdefault(row["algo"], {}).setdefault(row["seed"], 0.0)
                per_algo[row["algo"]][row["seed"]] += float(row["cum_regret"])
        for algo, by_seed in per_algo.items():
            vals = np.array(sorted(by_seed.values()))
            entry = algos.setdefault(algo, {"t": [], "mean_cum": [], "std_cum": []})
            entry["t"].append(cp)
            entry["mean_cum"].append(float(vals.mean()))
            entry["std_cum"].append(float(vals.std()))
    return {"config": resolved, "algos": algos}


def cmd_run_bandit(args):
    cfg = _merge_defaults(_load_config(args.config), BANDIT_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if args.dry_run:
        print(yaml.safe_dump(cfg, sort_keys=True).rstrip())
        return 0
    runid = _runid(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env, algo = cfg["env"], cfg["algo"]
    if cfg["experiment"] == "digit_multitask":
        rows, _ = digit_multitask_experiment(
            group_sizes=tuple(algo["group_sizes"]), T=cfg["T"], n_seeds=cfg["seeds"],
            n_tasks=env["n_tasks"], K=env["K"], d_in=env["d_in"], hidden=algo["hidden"],
            obs_noise=env["obs_noise"], reward_noise=env["reward_noise"],
            eps=algo["eps"], beta=BetaConfig(**algo["beta"]),
            train=TrainConfig(**algo["train"]), base_seed=cfg["seed"],
            maps_seed=env["maps_seed"], proto_seed=env["proto_seed"],
            include_baseline=algo["include_baseline"],
            refit_every=algo["refit_every"], jobs=cfg["jobs"],
        )
    elif cfg["experiment"] == "finite":
        _, _, results = containment_experiment(
            n_reps=cfg["seeds"], T=cfg["T"], base_seed=cfg["seed"], delta=algo["delta"],
            instance_seed=env["instance_seed"], noise_sigma=env["noise_sigma"],
            M=env["M"], k=env["k"], n_members=env["n_members"],
            n_inputs=env["n_inputs"], K=env["K"], jobs=cfg["jobs"],
        )
        rows = []
        for r, (records, _) in enumerate(results):
            for rec in records:
                rows.append({
                    "seed": r, "t": rec.t, "task_group": 0, "algo": "gfucb",
                    "inst_regret": rec.inst_regret, "cum_regret": rec.cum_regret,
                    "width": rec.width if rec.width is not None else "",
                    "bonus_mean": rec.bonus_mean if rec.bonus_mean is not None else "",
                })
    else:
        raise ConfigError(f"unknown experiment {cfg['experiment']!r}")
    _write_csv(out / f"regret_{runid}.csv", BANDIT_COLUMNS, rows, cfg)
    summary = _summarize(rows, cfg["T"], cfg)
    (out / f"summary_{runid}.json").write_text(json.dumps(summary, sort_keys=True, indent=2))
    print(f"wrote regret_{runid}.csv and summary_{runid}.json to {out}")
    return 0


def cmd_run_mdp(args):
    cfg = _merge_defaults(_load_config(args.config), MDP_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if args.dry_run:
        print(yaml.safe_dump(cfg, sort_keys=True).rstrip())
        return 0
    runid = _runid(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    e = cfg["env"]
    env = make_zero_ibe_env(
        e["seed"], n_states=e["states"], n_actions=e["actions"], H=e["H"],
        M=e["M"], k=e["k"], noise_sigma=e["noise"], init_state=e["init_state"],
    )
    cls = env_function_class(env, n_distractors=cfg["class"]["distractors"],
                             seed=cfg["class"]["seed"],
                             include_true=cfg["class"]["include_true"])
    rows = []
    for s in range(cfg["seeds"]):
        records = run_mdp_ucb(env, cls, cfg["T"], delta=cfg["delta"],
                              seed=SeedSequence([cfg["seed"], s]))
        for rec in records:
            rows.append({
                "seed": s, "t": rec.episode, "task_group": 0, "algo": "mdp_gfucb",
                "inst_regret": rec.inst_regret, "cum_regret": rec.cum_regret,
                "width": rec.width if rec.width is not None else "",
                "bonus_mean": "", "episode": rec.episode, "H": rec.H,
            })
    _write_csv(out / f"regret_{runid}.csv", MDP_COLUMNS, rows, cfg)
    summary = _summarize(rows, cfg["T"], cfg)
    (out / f"summary_{runid}.json").write_text(json.dumps(summary, sort_keys=True, indent=2))
    print(f"wrote regret_{runid}.csv and summary_{runid}.json to {out}")
    return 0


def cmd_eluder(args):
    spec = _load_config(args.class_spec)
    for key in ("members",):
        if key not in spec:
            raise ConfigError(f"class spec needs key '{key}'")
    values = np.asarray(spec["members"], dtype=float)
    bound = float(spec.get("value_bound", 1.0))
    cls = ScalarClass(values, inputs=spec.get("inputs"), value_bound=bound)
    eps_list = [float(e) for e in args.eps]
    if not eps_list:
        raise ConfigError("provide at least one --eps value")
    rows = []
    print("eps\tdim")
    for eps in eps_list:
        dim = eluder_dimension(cls, eps, budget=args.budget)
        print(f"{_fmt(eps)}\t{dim}")
        rows.append({"eps": eps, "dim": dim})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"class_spec": spec, "eps": eps_list, "budget": args.budget}
    _write_csv(out / f"eluder_{_runid(resolved)}.csv", ["eps", "dim"], rows, resolved)
    return 0


def _digit_setup(cfg):
    env_cfg, algo = cfg["env"], cfg["algo"]
    prototypes = make_digit_prototypes(d_in=env_cfg["d_in"], seed=env_cfg["proto_seed"])
    maps = make_reward_maps(env_cfg["n_tasks"], seed=env_cfg["maps_seed"])
    return prototypes, maps, env_cfg, algo


def cmd_diagnose(args):
    cfg = _merge_defaults(_load_config(args.config), DIAGNOSE_DEFAULTS)
    if args.which:
        cfg["which"] = args.which
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.dry_run:
        print(yaml.safe_dump(cfg, sort_keys=True).rstrip())
        return 0
    runid = _runid(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    which = cfg["which"]
    if which == "bonus":
        rows_scatter, rows_decay = _diagnose_bonus(cfg)
        _write_csv(out / f"bonus_{runid}.csv", ["error", "bonus"], rows_scatter, cfg)
        _write_csv(out / f"bonus_decay_{runid}.csv", ["n", "mean_bonus", "std_bonus"], rows_decay, cfg)
        print(f"wrote bonus_{runid}.csv and bonus_decay_{runid}.csv to {out}")
    elif which == "kernel":
        rows = _diagnose_kernel(cfg)
        _write_csv(out / f"kernel_{runid}.csv", ["group_size", "i", "j", "value", "dominance"], rows, cfg)
        print(f"wrote kernel_{runid}.csv to {out}")
    elif which == "width-audit":
        rows = _diagnose_width_audit(cfg)
        _write_csv(out / f"width_audit_{runid}.csv",
                   ["seed", "eps", "exceed_count", "dim", "bound", "passed"], rows, cfg)
        print(f"wrote width_audit_{runid}.csv to {out}")
    else:
        raise ConfigError(f"unknown diagnostic {which!r}")
    return 0


def _diagnose_bonus(cfg):
    prototypes, maps, env_cfg, algo = _digit_setup(cfg)
    b = cfg["bonus"]
    task = b["task"]
    env = DigitBanditEnv(maps[task : task + 1], prototypes, env_cfg["K"],
                         env_cfg["obs_noise"], env_cfg["reward_noise"])
    cls = digit_function_class(1, d_in=env_cfg["d_in"], hidden=algo["hidden"])
    beta = BetaConfig(**algo["beta"])
    train = TrainConfig(**algo["train"])
    capture = {}
    run_gfucb(env, cls, b["checkpoint"], beta=beta, seed=SeedSequence([cfg["seed"], 0]),
              train=train, capture=capture)
    test_X, labels = digit_test_images(prototypes, b["test_per_digit"],
                                       env_cfg["obs_noise"], b["test_seed"])
    targets = maps[task][labels]
    cs = ConfidenceSet(capture["f_hat"], capture["beta_fn"](b["checkpoint"]),
                       capture["log"], cls, capture["search"])
    scatter = bonus_diagnostic(capture["f_hat"], cs, test_X, targets, task=0)
    rows_scatter = [{"error": e, "bonus": bn} for e, bn in scatter]
    decay = bonus_decay_curve(env, cls, b["decay_sizes"], test_X,
                              seed=cfg["seed"], beta=beta, train=train)
    rows_decay = [{"n": n, "mean_bonus": m, "std_bonus": s} for n, m, s in decay]
    return rows_scatter, rows_decay


def _diagnose_kernel(cfg):
    prototypes, maps, env_cfg, algo = _digit_setup(cfg)
    kc = cfg["kernel"]
    test_X, labels = digit_test_images(prototypes, kc["test_per_digit"],
                                       env_cfg["obs_noise"], kc["test_seed"])
    groups = [test_X[labels == d] for d in range(prototypes.shape[0])]
    rows = []
    for size in kc["group_sizes"]:
        env = DigitBanditEnv(maps[:size], prototypes, env_cfg["K"],
                             env_cfg["obs_noise"], env_cfg["reward_noise"])
        cls = digit_function_class(size, d_in=env_cfg["d_in"], hidden=algo["hidden"])
        capture = {}
        run_gfucb(env, cls, kc["T"], beta=BetaConfig(**algo["beta"]),
                  seed=SeedSequence([cfg["seed"], size]),
                  train=TrainConfig(**algo["train"]), capture=capture)
        C = kernel_matrix(capture["f_hat"].rep, groups)
        dom = diagonal_dominance(C)
        for i in range(C.shape[0]):
            for j in range(C.shape[1]):
                rows.append({"group_size": size, "i": i, "j": j,
                             "value": float(C[i, j]), "dominance": dom})
    return rows


def _diagnose_width_audit(cfg):
    wa = cfg["width_audit"]
    env, cls, results = containment_experiment(
        n_reps=wa["seeds"], T=wa["T"], base_seed=cfg["seed"], delta=wa["delta"],
        instance_seed=wa["instance_seed"], noise_sigma=wa["noise_sigma"], M=wa["M"],
        k=wa["k"], n_members=wa["n_members"], n_inputs=wa["n_inputs"], K=wa["K"],
    )
    beta = BetaConfig(mode="theoretical", delta=wa["delta"]).resolve(cls, wa["T"])
    rows = []
    for r, (records, trace) in enumerate(results):
        scalar = build_scalar_class(cls, trace)
        for row in width_count_audit(records, cls.M, beta(wa["T"]), scalar, wa["eps_grid"]):
            rows.append({"seed": r, "eps": row.eps, "exceed_count": row.exceed_count,
                         "dim": row.dim, "bound": row.bound, "passed": row.passed})
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(prog="gfucb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--out-dir", default=".")
        p.add_argument("--dry-run", action="store_true")

    p_bandit = sub.add_parser("run-bandit", help="run a bandit experiment config")
    add_common(p_bandit)
    p_bandit.set_defaults(fn=cmd_run_bandit)

    p_mdp = sub.add_parser("run-mdp", help="run an MDP experiment config")
    add_common(p_mdp)
    p_mdp.set_defaults(fn=cmd_run_mdp)

    p_eluder = sub.add_parser("eluder", help="eluder dimension of a tabulated class")
    p_eluder.add_argument("--class-spec", required=True)
    p_eluder.add_argument("--eps", nargs="+", required=True)
    p_eluder.add_argument("--budget", type=int, default=1_000_000)
    p_eluder.add_argument("--out-dir", default=".")
    p_eluder.set_defaults(fn=cmd_eluder)

    p_diag = sub.add_parser("diagnose", help="bonus, kernel, or width-audit diagnostics")
    add_common(p_diag)
    p_diag.add_argument("--which", choices=["bonus", "kernel", "width-audit"], default=None)
    p_diag.set_defaults(fn=cmd_diagnose)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
