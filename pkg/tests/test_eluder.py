import numpy as np
import pytest

from gfucb.eluder import (
    ScalarClass,
    SearchBudgetExceeded,
    eluder_dimension,
    eluder_linear_estimate,
    is_eps_dependent,
)
from oracles import eluder_oracle


def two_constants():
    # f1 == 0 and f2 == 1 on three inputs
    return ScalarClass(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]))


def test_singleton_always_dependent():
    cls = ScalarClass(np.array([[0.3, -0.2, 0.9]]))
    assert is_eps_dependent(0, [], cls, 0.5)
    assert is_eps_dependent(2, [0, 1], cls, 0.01)
    assert eluder_dimension(cls, 0.5) == 0


def test_two_constants_dependence():
    cls = two_constants()
    assert not is_eps_dependent(0, [], cls, 0.5)   # empty premise, gap 1 > 0.5
    assert is_eps_dependent(0, [1], cls, 0.5)      # premise 1 > 0.5 never fires
    assert eluder_dimension(cls, 0.5) == 1


def test_eps_domain_errors():
    cls = two_constants()
    with pytest.raises(ValueError):
        is_eps_dependent(0, [], cls, 0.0)
    with pytest.raises(ValueError):
        eluder_dimension(cls, -1.0)


def test_dimension_zero_above_max_gap():
    cls = two_constants()
    assert eluder_dimension(cls, 1.0) == 0  # no gap exceeds 1.0
    assert eluder_dimension(cls, 2.0) == 0


def test_dimension_monotone_in_eps():
    rng = np.random.default_rng(11)
    cls = ScalarClass(rng.uniform(-1, 1, size=(4, 5)))
    dims = [eluder_dimension(cls, e) for e in (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)]
    assert all(a >= b for a, b in zip(dims, dims[1:]))
    assert all(d <= cls.n_inputs for d in dims)


def test_duplicate_member_is_noop():
    rng = np.random.default_rng(12)
    V = rng.uniform(-1, 1, size=(3, 4))
    cls = ScalarClass(V)
    dup = ScalarClass(np.vstack([V, V[1:2]]))
    for eps in (0.1, 0.3, 0.7):
        assert eluder_dimension(cls, eps) == eluder_dimension(dup, eps)


def test_matches_candidate_scale_oracle():
    rng = np.random.default_rng(13)
    for trial in range(60):
        F = int(rng.integers(1, 5))
        N = int(rng.integers(2, 6))
        V = np.round(rng.uniform(-1, 1, size=(F, N)), 2)
        eps = float(rng.choice([0.05, 0.1, 0.25, 0.5, 1.0]))
        cls = ScalarClass(V)
        assert eluder_dimension(cls, eps) == eluder_oracle(V, eps), (V, eps)


def test_budget_error():
    rng = np.random.default_rng(14)
    cls = ScalarClass(rng.uniform(-1, 1, size=(6, 8)))
    with pytest.raises(SearchBudgetExceeded):
        eluder_dimension(cls, 0.01, budget=5)


def test_linear_estimate():
    assert eluder_linear_estimate(1, 1 / np.e) == pytest.approx(1.0, abs=1e-12)
    assert eluder_linear_estimate(3, 0.1) == pytest.approx(3 * np.log(10), abs=1e-12)
    assert eluder_linear_estimate(2, 0.999999) == pytest.approx(0.0, abs=1e-5)
    with pytest.raises(ValueError):
        eluder_linear_estimate(0, 0.5)
    with pytest.raises(ValueError):
        eluder_linear_estimate(2, 1.5)


def test_value_bound_validation():
    with pytest.raises(ValueError):
        ScalarClass(np.array([[2.0]]))
    ScalarClass(np.array([[2.0]]), value_bound=3.0)
