"""Functional confidence sets: radius schedules, membership, width, optimism.

A confidence set is a ball in empirical 2-norm around the current ERM fit.
For finite classes every operation enumerates the members inside the ball
exactly. For the two-layer family the optimistic function is found by a
penalized gradient search in the neighborhood of the center: minimize

    l(f) = -(objective) + lam * max(0, ||center - f||^2_log - B)

which climbs the objective until the empirical distance approaches the
budget B. Those results are approximate and are flagged as such.
"""
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .erm import _project_heads
from .function_space import MultiheadFunction, empirical_norm_sq, evaluate_batch

DEFAULT_MEMBERSHIP_SLACK = 0.05


class EmptyConfidenceSetError(RuntimeError):
    """No class member passes the membership inequality."""


def beta_theoretical(M, k, t, log_covering, alpha, delta):
    """Theoretical squared-radius schedule.

    12Mk + 12 log(N/delta) + 8 alpha sqrt(M t k (M t + log(2 M t^2 / delta)))
    with log N supplied by the caller (log of the covering number at scale
    alpha; log of the representation count for finite classes).
    """
    if min(M, k, t) < 1:
        raise ValueError("M, k, t must be >= 1")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if alpha < 0 or log_covering < 0:
        raise ValueError("alpha and log_covering must be nonnegative")
    tail = M * t + np.log(2.0 * M * t * t / delta)
    return float(
        12.0 * M * k
        + 12.0 * (log_covering + np.log(1.0 / delta))
        + 8.0 * alpha * np.sqrt(M * t * k * tail)
    )


def beta_practical(t, a, b, c):
    """Practical squared-radius schedule a * log(b t + c)."""
    if b * t + c <= 1.0:
        raise ValueError("need b * t + c > 1")
    return float(a * np.log(b * t + c))


@dataclass
class BetaConfig:
    """Radius schedule configuration.

    mode "theoretical" uses beta_theoretical with the class covering number
    (alpha defaults to 1/(k M T)); mode "practical" uses a log(b t + c).
    lam weights the penalized search for two-layer classes.
    """

    mode: str = "practical"
    alpha: float = None
    delta: float = 0.1
    a: float = 0.4
    b: float = 0.5
    c: float = 2.0
    lam: float = 30.0

    def resolve(self, cls, T):
        """Return the map t -> beta_t for a run of horizon T."""
        if self.mode == "practical":
            a, b, c = self.a, self.b, self.c
            return lambda t: beta_practical(t, a, b, c)
        if self.mode == "theoretical":
            alpha = self.alpha if self.alpha is not None else 1.0 / (cls.k * cls.M * T)
            cover = cls.log_covering(alpha)
            M, k, delta = cls.M, cls.k, self.delta
            return lambda t: beta_theoretical(M, k, t, cover, alpha, delta)
        raise ValueError(f"unknown beta mode {self.mode!r}")


@dataclass
class SearchConfig:
    """Penalized-search hyperparameters (two-layer classes only)."""

    lr: float = 5e-4
    iters: int = 200
    lam: float = 30.0
    membership_slack: float = DEFAULT_MEMBERSHIP_SLACK


@dataclass
class ConfidenceSet:
    """Ball of squared empirical radius `radius` around `center` on `log`."""

    center: MultiheadFunction
    radius: float
    log: object
    cls: object
    search: SearchConfig = field(default_factory=SearchConfig)
    _mask: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, f):
        """Membership test: squared empirical distance to the center <= radius.

        The remaining conditions of the set definition (head norms, values
        inside the class range) hold by construction of the functions.
        """
        return empirical_norm_sq(f, self.center, self.log) <= self.radius

    def member_mask(self):
        """Boolean mask over class members, finite classes only."""
        if self.cls.kind != "finite":
            raise ValueError("member enumeration requires a finite class")
        if self._mask is None:
            self._mask = np.array([self.contains(f) for f in self.cls.members])
        return self._mask

    def member_indices(self):
        return [j for j, ok in enumerate(self.member_mask()) if ok]

    def candidates(self):
        """Functions enumerated by the exact set operations: the class members
        inside the ball followed by the center, which belongs to the set at
        distance zero. Order fixes the tie-breaking."""
        out = [self.cls.members[j] for j in self.member_indices()]
        out.append(self.center)
        return out

    @property
    def exact(self):
        return self.cls.kind == "finite"


@dataclass
class SelectResult:
    """Outcome of an optimistic selection step."""

    f: MultiheadFunction
    actions: np.ndarray
    value: float
    bonus: np.ndarray
    approx: bool = False
    discarded: bool = False


def width(cs, X):
    """Largest total value disagreement inside the set at the played inputs.

    X holds one input per task. Finite classes: exact maximum over member
    pairs inside the set (0 if fewer than two members qualify). Two-layer
    classes: lower-bound approximation from two penalized searches.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (cs.cls.M, cs.cls.d_in):
        raise ValueError("width expects one input per task")
    if cs.cls.kind == "finite":
        cands = cs.candidates()
        if len(cands) < 2:
            return 0.0
        totals = []
        for f in cands:
            totals.append(sum(evaluate_batch(f, X[i : i + 1], i)[0] for i in range(cs.cls.M)))
        return float(max(totals) - min(totals))
    targets = [(i, X[i : i + 1]) for i in range(cs.cls.M)]
    hi_val, _, _, feas_hi = _penalized_search(cs, targets, sense=+1.0)
    lo_val, _, _, feas_lo = _penalized_search(cs, targets, sense=-1.0)
    center_total = sum(
        evaluate_batch(cs.center, X[i : i + 1], i)[0] for i in range(cs.cls.M)
    )
    upper = hi_val if feas_hi else center_total
    lower = lo_val if feas_lo else center_total
    return float(max(upper - lower, 0.0))


def optimistic_select(cs, action_inputs):
    """Joint argmax of the summed head values over the set and the action sets.

    action_inputs holds one candidate-input matrix [K_i, d_in] per task. The
    summed objective decouples over tasks for any fixed function, so each
    candidate function is scored by its per-task best actions. Ties break
    toward the earlier candidate (members in index order, then the center)
    and the lower action index.
    """
    M = cs.cls.M
    if len(action_inputs) != M:
        raise ValueError("need one action-input matrix per task")
    for cand in action_inputs:
        if len(cand) == 0:
            raise ValueError("action sets must be non-empty")
    if cs.cls.kind == "finite":
        cands = cs.candidates()
        if not cands:
            raise EmptyConfidenceSetError(
                "no function passes membership; radius is miscalibrated"
            )
        best = None
        for f in cands:
            actions = np.zeros(M, dtype=np.int64)
            total = 0.0
            for i in range(M):
                vals = evaluate_batch(f, action_inputs[i], i)
                actions[i] = int(np.argmax(vals))
                total += float(vals[actions[i]])
            if best is None or total > best.value:
                chosen = np.array(
                    [evaluate_batch(cs.center, action_inputs[i][actions[i] : actions[i] + 1], i)[0] for i in range(M)]
                )
                played = np.array(
                    [evaluate_batch(f, action_inputs[i][actions[i] : actions[i] + 1], i)[0] for i in range(M)]
                )
                best = SelectResult(f, actions, total, played - chosen)
        return best
    targets = [(i, np.asarray(action_inputs[i], dtype=np.float64)) for i in range(M)]
    value, actions, f, feasible = _penalized_search(cs, targets, sense=+1.0)
    if not feasible:
        actions = np.zeros(M, dtype=np.int64)
        total = 0.0
        for i in range(M):
            vals = evaluate_batch(cs.center, action_inputs[i], i)
            actions[i] = int(np.argmax(vals))
            total += float(vals[actions[i]])
        return SelectResult(cs.center, actions, total, np.zeros(M), approx=True, discarded=True)
    bonus = np.zeros(M)
    for i in range(M):
        x = action_inputs[i][actions[i] : actions[i] + 1]
        bonus[i] = evaluate_batch(f, x, i)[0] - evaluate_batch(cs.center, x, i)[0]
    return SelectResult(f, actions, value, bonus, approx=True)


def optimistic_point_value(cs, x, i):
    """sup of head i at a single input over the set; used by diagnostics.

    Finite classes enumerate members (the center participates as a free
    member of the set). Two-layer classes run a single-input penalized
    search. Never below the center's own value.
    """
    x = np.asarray(x, dtype=np.float64)
    center_val = float(evaluate_batch(cs.center, x[None, :], i)[0])
    if cs.cls.kind == "finite":
        vals = [center_val]
        for j in cs.member_indices():
            vals.append(float(evaluate_batch(cs.cls.members[j], x[None, :], i)[0]))
        return max(vals)
    value, _, _, feasible = _penalized_search(cs, [(i, x[None, :])], sense=+1.0)
    return max(value, center_val) if feasible else center_val


def _penalized_search(cs, targets, sense):
    """Gradient search for sense * (sum of per-target best values) inside the set.

    targets is a list of (task, candidate matrix) pairs. The trajectory may
    cross the membership boundary; the returned function is the last iterate
    that respected the budget up to the configured slack (the start, the
    center itself, always does). Returns (objective value, per-target chosen
    indices, function, feasible); feasible is False only if no iterate passed,
    in which case callers discard the result.
    """
    cls, log, cfg = cs.cls, cs.log, cs.search
    lo, hi = cls.value_range
    B = cs.radius
    rep = cs.center.rep.copy()
    W = cs.center.W.copy()

    t, M, d = log.t, log.M, cls.d_in
    if t:
        Xlog = np.ascontiguousarray(log.inputs.reshape(t * M, d))
        task_log = np.ascontiguousarray(np.tile(np.arange(M, dtype=np.int64), t))
        ylog = np.ascontiguousarray(log.function_values(cs.center).reshape(t * M))
    X_all = np.ascontiguousarray(np.concatenate([cand for _, cand in targets]))
    task_all = np.ascontiguousarray(
        np.concatenate([np.full(len(cand), i, dtype=np.int64) for i, cand in targets])
    )
    splits = np.cumsum([len(cand) for _, cand in targets])[:-1]
    slack = B * (1.0 + cfg.membership_slack)
    snapshot = None

    def choose(v):
        return [int(np.argmax(grp)) for grp in np.split(sense * v, splits)]

    for _ in range(cfg.iters):
        v = kernels.values(rep.w1, rep.b1, rep.w2, rep.b2, W, X_all, task_all, lo, hi)
        picked = choose(v)
        offs = np.concatenate([[0], splits])
        rows = np.array([offs[j] + picked[j] for j in range(len(targets))])
        Xsel = np.ascontiguousarray(X_all[rows])
        tsel = np.ascontiguousarray(task_all[rows])
        _, *g_obj = kernels.sum_value_grad(rep.w1, rep.b1, rep.w2, rep.b2, W, Xsel, tsel, lo, hi)
        grads = [-sense * g for g in g_obj]
        if t:
            dist2, *g_pen = kernels.sq_loss_grad(
                rep.w1, rep.b1, rep.w2, rep.b2, W, Xlog, task_log, ylog, lo, hi
            )
            if dist2 > B:
                grads = [g + cfg.lam * p for g, p in zip(grads, g_pen)]
            if dist2 <= slack:
                snapshot = (rep.copy(), W.copy())
        else:
            snapshot = (rep.copy(), W.copy())
        rep.w1 -= cfg.lr * grads[0]
        rep.b1 -= cfg.lr * grads[1]
        rep.w2 -= cfg.lr * grads[2]
        rep.b2 -= cfg.lr * grads[3]
        W -= cfg.lr * grads[4]
        _project_heads(W, cls.head_norm_bound)

    if t and empirical_norm_sq(MultiheadFunction(rep, W, cls.value_range), cs.center, log) > slack:
        if snapshot is None:
            return 0.0, np.zeros(len(targets), dtype=np.int64), cs.center, False
        rep, W = snapshot
    f = MultiheadFunction(rep, W, cls.value_range)
    v = kernels.values(rep.w1, rep.b1, rep.w2, rep.b2, W, X_all, task_all, lo, hi)
    picked = choose(v)
    offs = np.concatenate([[0], splits])
    value = float(sum(v[offs[j] + picked[j]] for j in range(len(targets))))
    return value, np.array(picked, dtype=np.int64), f, True
