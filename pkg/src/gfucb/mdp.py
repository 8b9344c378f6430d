"""Multitask episodic linear MDPs and the optimistic backward-LSVI driver.

Environments are finite and exactly factorized: transitions are
P_h(s'|s,a) = <phi(s,a), mu_h(s')> with phi(s,a) on the probability simplex
and each mu coordinate a distribution over next states, so every row is a
valid distribution by construction and the true Q functions are exactly
linear in phi at every level. Mean rewards live in [0, 1/H], which keeps all
action values inside [0, 1].
"""
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .confidence import ConfidenceSet, SearchConfig, optimistic_select, width
from .erm import solve_mdp_level
from .function_space import (
    FunctionClass,
    MultiheadFunction,
    SampleLog,
    TableRep,
    evaluate_batch,
)
from .rng import spawn_run_streams


@dataclass
class MdpEpisodeRecord:
    episode: int
    H: int
    actions: tuple            # actions[h][i]
    inst_regret: float
    cum_regret: float
    opt_value: float          # optimistic value claimed at level 1
    star_value: float         # exact optimal value at the initial states
    optimistic: bool
    width: float = None
    wall_time: float = 0.0


class LinearMdpEnv:
    """Finite multitask linear MDP with a known factorized model."""

    def __init__(self, phi, theta_r, mu, noise_sigma=0.05, init_state="fixed"):
        self.phi = np.ascontiguousarray(phi, dtype=np.float64)          # [S, A, k]
        self.theta_r = np.ascontiguousarray(theta_r, dtype=np.float64)  # [H, M, k]
        self.mu = np.ascontiguousarray(mu, dtype=np.float64)            # [H, M, k, S]
        self.S, self.A, self.k = self.phi.shape
        self.H, self.M = self.theta_r.shape[:2]
        self.noise_sigma = noise_sigma
        self.init_state = init_state
        self.ibe = 0.0
        # r[h, i, s, a] and P[h, i, s, a, s']
        self.mean_r = np.einsum("sak,hik->hisa", self.phi, self.theta_r)
        self.P = np.einsum("sak,hikz->hisaz", self.phi, self.mu)
        eye_s = np.eye(self.S)
        eye_a = np.eye(self.A)
        self.encodings = np.ascontiguousarray(
            np.concatenate(
                [
                    np.repeat(eye_s[:, None, :], self.A, axis=1),
                    np.repeat(eye_a[None, :, :], self.S, axis=0),
                ],
                axis=2,
            )
        )  # [S, A, S+A]
        self.d_in = self.S + self.A
        self.rep_star = TableRep(self.encodings.reshape(-1, self.d_in), self.phi.reshape(-1, self.k))

    def sample_initial_states(self, rng):
        if self.init_state == "uniform":
            return rng.integers(self.S, size=self.M)
        return np.zeros(self.M, dtype=np.int64)

    def sample_reward_noise(self, rng):
        return rng.uniform(-self.noise_sigma, self.noise_sigma, size=self.M)

    def sample_transitions(self, h, states, actions, rng):
        nxt = np.zeros(self.M, dtype=np.int64)
        for i in range(self.M):
            nxt[i] = rng.choice(self.S, p=self.P[h, i, states[i], actions[i]])
        return nxt

    def optimal_values(self):
        """Exact (Q*, V*) by backward dynamic programming; pure function."""
        Q = np.zeros((self.H, self.M, self.S, self.A))
        V = np.zeros((self.H + 1, self.M, self.S))
        for h in range(self.H - 1, -1, -1):
            Q[h] = self.mean_r[h] + np.einsum("isaz,iz->isa", self.P[h], V[h + 1])
            V[h] = Q[h].max(axis=2)
        return Q, V

    def policy_value(self, policy):
        """Value of a deterministic policy[h, i, s] by dynamic programming."""
        V = np.zeros((self.H + 1, self.M, self.S))
        for h in range(self.H - 1, -1, -1):
            for i in range(self.M):
                a = policy[h, i]
                idx = np.arange(self.S)
                V[h, i] = self.mean_r[h, i, idx, a] + np.einsum(
                    "sz,z->s", self.P[h, i, idx, a], V[h + 1, i]
                )
        return V

    def true_q_heads(self):
        """theta*[h, i] with Q*_h(s,a) = <phi(s,a), theta*[h, i]> exactly."""
        _, V = self.optimal_values()
        theta = np.zeros((self.H, self.M, self.k))
        for h in range(self.H):
            theta[h] = self.theta_r[h] + np.einsum("ikz,iz->ik", self.mu[h], V[h + 1])
        return theta


def make_zero_ibe_env(seed, n_states=4, n_actions=2, H=2, M=2, k=2,
                      noise_sigma=0.05, init_state="uniform"):
    """Sample a zero-inherent-Bellman-error environment.

    phi rows are drawn on the simplex and mu coordinates are distributions,
    so the factorized transition rows are exact distributions and the true Q
    functions are realizable whenever the class contains phi.
    """
    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(np.ones(k), size=(n_states, n_actions))
    theta_r = rng.uniform(0.0, 1.0 / H, size=(H, M, k))
    mu = rng.dirichlet(np.ones(n_states), size=(H, M, k))
    return LinearMdpEnv(phi, theta_r, mu, noise_sigma=noise_sigma, init_state=init_state)


def env_function_class(env, n_distractors=2, seed=0, include_true=True):
    """Finite class for an environment, always carrying the true representation.

    With include_true the per-level optimal Q functions enter as explicit
    members (their containment powers the optimism checks); otherwise the
    true representation appears once with zero heads and regression alone
    identifies the values. Random distractor members are appended either way.
    """
    rng = np.random.default_rng(seed)
    members = []
    if include_true:
        theta = env.true_q_heads()
        for h in range(env.H):
            members.append(
                MultiheadFunction(env.rep_star, theta[h].T.copy(), value_range=(0.0, 1.0))
            )
    else:
        members.append(
            MultiheadFunction(env.rep_star, np.zeros((env.k, env.M)), value_range=(0.0, 1.0))
        )
    flat_inputs = env.encodings.reshape(-1, env.d_in)
    for _ in range(n_distractors):
        vals = rng.dirichlet(np.ones(env.k), size=env.S * env.A)
        rep = TableRep(flat_inputs, vals)
        W = rng.uniform(0.0, 1.0, size=(env.k, env.M))
        members.append(MultiheadFunction(rep, W, value_range=(0.0, 1.0)))
    return FunctionClass(
        "finite", env.M, env.k, env.d_in,
        head_norm_bound=float(np.sqrt(env.k)), value_range=(0.0, 1.0), members=members,
    )


def beta_level(M, k, T, t, log_covering, delta, ibe):
    """Per-level squared radius (B1 + sqrt(MT) I + sqrt(B2))^2.

    B1 = sqrt(2Mk + log(N/delta)) + 1 and B2 = 2 sqrt(MT + log(2MT^2/delta));
    the schedule is constant in the episode index t, which is accepted only
    for signature compatibility with time-varying schedules.
    """
    if min(M, k, T) < 1:
        raise ValueError("M, k, T must be >= 1")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if ibe < 0 or log_covering < 0:
        raise ValueError("ibe and log_covering must be nonnegative")
    b1 = np.sqrt(2.0 * M * k + log_covering + np.log(1.0 / delta)) + 1.0
    b2 = 2.0 * np.sqrt(M * T + np.log(2.0 * M * T * T / delta))
    return float((b1 + np.sqrt(M * T) * ibe + np.sqrt(b2)) ** 2)


def _minimax_linear_fit(Phi, target, head_bound):
    """min over theta of max |Phi theta - target|, theta inside the head ball.

    Solved as an LP without the ball constraint; the unconstrained solution is
    accepted when it respects the bound (true for all constructions here),
    otherwise the best of the projected LP and least-squares fits is used,
    which upper-bounds the infimum.
    """
    n, k = Phi.shape
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_ub = np.block([[Phi, -np.ones((n, 1))], [-Phi, -np.ones((n, 1))]])
    b_ub = np.concatenate([target, -target])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k + [(0, None)], method="highs")
    cands = []
    if res.success:
        theta = res.x[:k]
        nrm = np.linalg.norm(theta)
        if nrm > head_bound:
            theta = theta * (head_bound / nrm)
        cands.append(theta)
    theta_ls, *_ = np.linalg.lstsq(Phi, target, rcond=None)
    nrm = np.linalg.norm(theta_ls)
    if nrm > head_bound:
        theta_ls = theta_ls * (head_bound / nrm)
    cands.append(theta_ls)
    errs = [float(np.max(np.abs(np.clip(Phi @ th, 0.0, 1.0) - target))) for th in cands]
    return min(errs)


def inherent_bellman_error(env, cls):
    """Worst-case distance of Bellman images of class functions from the class.

    Exact enumeration: the outer sup runs over the finite members (the zero
    function stands in for the level-H+1 value), the inner inf fits each
    candidate representation's heads by exact minimax regression per task.
    """
    if cls.kind != "finite":
        raise ValueError("inherent_bellman_error requires a finite class")
    enc = env.encodings.reshape(-1, env.d_in)
    reps = [(rep, rep.batch(enc)) for rep in cls.representations()]
    worst = 0.0
    for h in range(env.H):
        if h == env.H - 1:
            next_values = [np.zeros((env.M, env.S))]
        else:
            next_values = []
            for g in cls.members:
                Vg = np.stack(
                    [
                        evaluate_batch(g, enc, i).reshape(env.S, env.A).max(axis=1)
                        for i in range(env.M)
                    ]
                )
                next_values.append(Vg)
        for Vg in next_values:
            target = env.mean_r[h] + np.einsum("isaz,iz->isa", env.P[h], Vg)
            for i in range(env.M):
                best = np.inf
                for _, Phi in reps:
                    best = min(best, _minimax_linear_fit(Phi, target[i].reshape(-1), cls.head_norm_bound))
                    if best < 1e-14:
                        break
                worst = max(worst, best)
    return worst


class InducedBanditEnv:
    """One-level view of an MDP: contexts are initial states, actions are the
    MDP actions, rewards are the level-1 rewards. Draws exactly the random
    numbers the MDP driver would draw in an H=1 episode."""

    def __init__(self, env):
        self.env = env
        self.M = env.M
        self.d_in = env.d_in
        self.K = env.A
        self.true_member = None

    def sample_round(self, rng):
        states = self.env.sample_initial_states(rng)
        inputs = self.env.encodings[states]
        true_values = self.env.mean_r[0, np.arange(self.M), states, :]
        from .bandit import Round

        return Round(inputs, true_values)

    def sample_rewards(self, rnd, actions, rng):
        noise = self.env.sample_reward_noise(rng)
        return rnd.true_values[np.arange(self.M), actions] + noise


class _LevelData:
    """Raw per-level history: inputs, realized rewards, next states."""

    def __init__(self, M, d_in):
        self.inputs = []
        self.rewards = []
        self.next_states = []
        self.M = M
        self.d_in = d_in

    def append(self, inputs, rewards, next_states):
        self.inputs.append(np.asarray(inputs, dtype=np.float64))
        self.rewards.append(np.asarray(rewards, dtype=np.float64))
        self.next_states.append(np.asarray(next_states, dtype=np.int64))

    def build_log(self, value_next):
        """SampleLog whose rewards are r + V_next(s'), the regression targets."""
        log = SampleLog(self.M, self.d_in)
        for x, r, ns in zip(self.inputs, self.rewards, self.next_states):
            targets = r + value_next[np.arange(self.M), ns]
            log.append_round(x, targets)
        return log


def run_mdp_ucb(env, cls, T, delta=0.1, seed=0, ibe=None, beta_fn=None, record_width=False):
    """Backward least-squares value iteration with per-level optimism.

    Per episode: fit every level against reward-plus-next-value targets
    (topmost level regresses on raw rewards), then act level by level with
    the per-level confidence sets. Episode regret is measured against the
    exact dynamic-programming optimum of the greedy policies induced by the
    selected optimistic functions.
    """
    streams = spawn_run_streams(seed)
    ibe_val = env.ibe if ibe is None else ibe
    if beta_fn is None:
        cover = cls.log_covering(1.0 / (cls.k * cls.M * T))
        radius = beta_level(cls.M, cls.k, T, 1, cover, delta, ibe_val)
        beta_fn = lambda t: radius
    levels = [_LevelData(env.M, env.d_in) for _ in range(env.H)]
    _, V_star = env.optimal_values()
    records = []
    cum = 0.0
    for t in range(1, T + 1):
        t0 = time.perf_counter()
        centers = [None] * env.H
        logs = [None] * env.H
        V_hat = np.zeros((env.H + 1, env.M, env.S))
        for h in range(env.H - 1, -1, -1):
            logs[h] = levels[h].build_log(V_hat[h + 1])
            centers[h] = solve_mdp_level(cls, logs[h])
            for i in range(env.M):
                vals = evaluate_batch(centers[h], env.encodings.reshape(-1, env.d_in), i)
                V_hat[h, i] = vals.reshape(env.S, env.A).max(axis=1)
        states = env.sample_initial_states(streams.env_context)
        init_states = states.copy()
        policy = np.zeros((env.H, env.M, env.S), dtype=np.int64)
        actions_by_level = []
        opt_value = 0.0
        w1 = None
        for h in range(env.H):
            cs = ConfidenceSet(centers[h], beta_fn(t), logs[h], cls)
            sel = optimistic_select(cs, [env.encodings[states[i]] for i in range(env.M)])
            if h == 0:
                opt_value = sel.value
                if record_width:
                    chosen = np.stack([env.encodings[states[i], sel.actions[i]] for i in range(env.M)])
                    w1 = float(width(cs, chosen))
            for i in range(env.M):
                vals = evaluate_batch(sel.f, env.encodings.reshape(-1, env.d_in), i)
                policy[h, i] = vals.reshape(env.S, env.A).argmax(axis=1)
            noise = env.sample_reward_noise(streams.env_noise)
            rewards = env.mean_r[h, np.arange(env.M), states, sel.actions] + noise
            inputs = np.stack([env.encodings[states[i], sel.actions[i]] for i in range(env.M)])
            if h < env.H - 1:
                nxt = env.sample_transitions(h, states, sel.actions, streams.env_noise)
            else:
                nxt = np.zeros(env.M, dtype=np.int64)
            levels[h].append(inputs, rewards, nxt)
            actions_by_level.append(tuple(int(a) for a in sel.actions))
            states = nxt
        V_pi = env.policy_value(policy)
        star = float(V_star[0, np.arange(env.M), init_states].sum())
        realized = float(V_pi[0, np.arange(env.M), init_states].sum())
        inst = star - realized
        cum += inst
        records.append(MdpEpisodeRecord(
            episode=t,
            H=env.H,
            actions=tuple(actions_by_level),
            inst_regret=inst,
            cum_regret=cum,
            opt_value=float(opt_value),
            star_value=star,
            optimistic=bool(opt_value >= star - env.M * env.H * ibe_val - 1e-9),
            width=w1,
            wall_time=time.perf_counter() - t0,
        ))
    return records
