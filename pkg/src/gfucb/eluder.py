"""Exact epsilon-dependence and eluder dimension for finite scalar classes.

The dimension search runs over ordered input sequences. For each candidate
sequence it tracks the exact set of scales eps' >= eps at which every element
is eps'-independent of its predecessors. Independence of an element via a
member pair (f, g) holds exactly for eps' in the half-open interval

    [ premise(f, g, prefix), |f(x) - g(x)| )

so the admissible scales form an intersection of unions of such intervals,
and the search is exact for finite classes: only finitely many interval
endpoints exist, no grid is involved.
"""
import numpy as np


class SearchBudgetExceeded(RuntimeError):
    """Raised when the sequence search would exceed its node budget."""


class ScalarClass:
    """A finite set of scalar functions tabulated on a finite input list."""

    def __init__(self, values, inputs=None, value_bound=1.0):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a members x inputs matrix")
        if np.max(np.abs(self.values), initial=0.0) > value_bound + 1e-9:
            raise ValueError(f"tabulated values exceed the bound {value_bound}")
        self.inputs = inputs
        self.value_bound = value_bound

    @property
    def n_members(self):
        return self.values.shape[0]

    @property
    def n_inputs(self):
        return self.values.shape[1]

    def pair_gaps(self):
        """|f_a(x) - f_b(x)| for every unordered member pair, shape [pairs, inputs]."""
        F = self.n_members
        rows = [np.abs(self.values[a] - self.values[b]) for a in range(F) for b in range(a + 1, F)]
        return np.asarray(rows) if rows else np.zeros((0, self.n_inputs))


def is_eps_dependent(x, X, cls, eps):
    """Exact Definition-1 check: is input x eps-dependent on the inputs X?

    x is an index into cls.inputs and X a sequence of such indices. Dependence
    means every member pair that agrees within eps on X (in the empirical
    2-norm) also agrees within eps at x.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    V = cls.values
    X = list(X)
    for a in range(cls.n_members):
        for b in range(a + 1, cls.n_members):
            d = V[a] - V[b]
            premise = np.sqrt(np.sum(d[X] ** 2)) if X else 0.0
            if premise <= eps and abs(d[x]) > eps:
                return False
    return True


def _union(intervals):
    if not intervals:
        return []
    intervals = sorted(intervals)
    merged = [list(intervals[0])]
    for lo, hi in intervals[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(iv) for iv in merged]


def _intersect(A, B):
    out, i, j = [], 0, 0
    while i < len(A) and j < len(B):
        lo = max(A[i][0], B[j][0])
        hi = min(A[i][1], B[j][1])
        if lo < hi:
            out.append((lo, hi))
        if A[i][1] <= B[j][1]:
            i += 1
        else:
            j += 1
    return out


def eluder_dimension(cls, eps, budget=1_000_000):
    """Length of the longest input sequence that is eps'-independent elementwise
    for some common eps' >= eps.

    Exact for finite classes. Raises SearchBudgetExceeded rather than silently
    truncating when the ordered-sequence search exceeds `budget` expansions.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    gaps = cls.pair_gaps()
    n_pairs, n_inputs = gaps.shape
    if n_pairs == 0:
        return 0
    gap_sq = gaps * gaps
    best = 0
    counter = [0]

    def extend_intervals(current, prem2, x):
        spans = []
        for p in range(n_pairs):
            hi = gaps[p, x]
            lo = np.sqrt(prem2[p])
            if lo < hi:
                spans.append((lo, hi))
        if not spans:
            return []
        return _intersect(current, _union(spans))

    def dfs(current, prem2, used, depth):
        nonlocal best
        best = max(best, depth)
        if depth + (n_inputs - len(used)) <= best:
            return
        for x in range(n_inputs):
            if x in used:
                continue
            counter[0] += 1
            if counter[0] > budget:
                raise SearchBudgetExceeded(
                    f"eluder search truncated after {budget} node expansions"
                )
            nxt = extend_intervals(current, prem2, x)
            if nxt:
                used.add(x)
                dfs(nxt, prem2 + gap_sq[:, x], used, depth + 1)
                used.remove(x)

    dfs([(float(eps), np.inf)], np.zeros(n_pairs), set(), 0)
    return best


def eluder_dimension_lower(cls, eps, n_scales=8):
    """Greedy lower bound on the eluder dimension.

    For a handful of scales eps' >= eps (eps itself plus quantiles of the
    achievable gaps) a maximal independent sequence is grown greedily in
    input order; any such sequence length lower-bounds the dimension. Used
    where the exact ordered search is too expensive; never an overestimate.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    gaps = cls.pair_gaps()
    if gaps.size == 0:
        return 0
    cand = gaps[gaps > eps]
    scales = [float(eps)]
    if cand.size:
        qs = np.unique(np.quantile(cand, np.linspace(0.0, 1.0, n_scales)))
        scales.extend(float(q) for q in qs)
    gap_sq = gaps * gaps
    best = 0
    n_pairs, n_inputs = gaps.shape
    for e in scales:
        prem2 = np.zeros(n_pairs)
        length = 0
        for x in range(n_inputs):
            ok = (np.sqrt(prem2) <= e) & (gaps[:, x] > e)
            if np.any(ok):
                length += 1
                prem2 = prem2 + gap_sq[:, x]
        best = max(best, length)
    return best


def eluder_linear_estimate(d, eps):
    """Reference curve d * log(1/eps) for linear classes, no claimed constant."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return d * float(np.log(1.0 / eps))
