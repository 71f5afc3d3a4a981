import itertools

import numpy as np
import pytest

from tailgame import martin
from tailgame.core import FiniteSupportProfile, LassoPlay, MixedAction, StageProfile
from tailgame.martin import (MRun, d_matching_pennies, d_voorneveld, d_with_reinit, extract_m_run, lasso_limsup,
                             lasso_truncation, penny_ledger_mc, validate_m_run)
from tailgame.objectives import matching_pennies_io

# exact rational iteration of the off-diagonal map from 9/10 first drops below 1/100 at stage 10
OFF_DIAGONAL_STAGES_TO_ONE_PERCENT = 10


def penny_value(x):
    """Closed-form value of [[psi+(x), psi-(x)], [psi-(x), psi+(x)]] (symmetric 2x2)."""
    hi = x + 0.5 * min(x, 1 - x)
    lo = x - 0.5 * min(x, 1 - x)
    return 0.5 * (hi + lo)


def uniform_pennies_profile():
    half = MixedAction((0.5, 0.5))
    return FiniteSupportProfile.stationary(StageProfile((0, 0), {0: half, 1: half}))


def test_root_and_recursion():
    L = d_matching_pennies(0.9)
    assert L.d(()) == 0.9
    assert L.d(((0, 0),)) == pytest.approx(0.95)
    assert L.d(((0, 1),)) == pytest.approx(0.85)
    assert L.alpha(((0, 1), (1, 1))) == ()
    with pytest.raises(ValueError):
        d_matching_pennies(1.0)


def test_off_diagonal_decay():
    L = d_matching_pennies(0.9)
    h = ((0, 1),) * 40
    ds = [e.d for e in L.walk(h)]
    assert all(b < a for a, b in zip(ds, ds[1:]))
    first = next(t for t, d in enumerate(ds) if d <= 0.01)
    assert first == OFF_DIAGONAL_STAGES_TO_ONE_PERCENT


def test_one_shot_value_equals_d(rng):
    L = d_matching_pennies(0.7)
    for _ in range(100):
        h = tuple(tuple(int(x) for x in rng.integers(0, 2, 2)) for _ in range(rng.integers(0, 30)))
        g = L.one_shot(h, (0, 1), (2, 2), (0, 0))
        np.testing.assert_allclose(g.payoffs[0], martin.penny_matrix(L.d(h)))
        assert penny_value(L.d(h)) == pytest.approx(L.d(h), abs=1e-15)


def test_voorneveld_ledger(voorneveld):
    L = d_voorneveld(0.4, voorneveld, 3)
    assert L.d(()) == 0.4
    d = voorneveld.defaults
    win = tuple(1 if j == 3 else x for j, x in enumerate(d))  # player 3 plays 1 and wins (tail is 0)
    assert L.d((win,)) == 1.0
    assert L.d((d,)) == 0.0
    assert L.d((d, win, win)) == 0.0  # zero is absorbing


def test_lasso_limsup_is_exact_zero_without_diagonal():
    L = d_matching_pennies(0.9)
    assert lasso_limsup(L, LassoPlay((), ((0, 1), (1, 0)))) == 0.0
    assert lasso_limsup(L, LassoPlay(((0, 0),), ((0, 1),))) == 0.0
    assert lasso_limsup(L, LassoPlay((), ((0, 0),))) == pytest.approx(1.0)


def test_reinitiation_rule():
    L = d_with_reinit(martin.PennyGenerator(), 0.9, 0.2, 1.0)
    h = ((0, 1),) * 6
    entries = list(L.walk(h))
    first = next(e for e in entries if e.reinit)
    # re-initiation happens exactly at the first d below val - delta
    assert first.d < 0.8
    assert all(e.d >= 0.8 for e in entries[: first.depth])
    assert first.alpha == first.depth
    # the next stage starts from val - delta / 2
    nxt = L.child(first, (0, 0))
    assert nxt.d == pytest.approx(martin.psi_plus(0.9))
    with pytest.raises(ValueError):
        d_with_reinit(martin.PennyGenerator(), 0.9, 0.0, 1.0)


def test_no_reinitiation_when_value_never_drops():
    L = d_with_reinit(martin.PennyGenerator(), 0.9, 0.2, 1.0)
    assert all(not e.reinit and e.alpha == 0 for e in L.walk(((0, 0),) * 20))


def test_conditions_under_optimal_profile():
    L = d_matching_pennies(0.8)
    rep = martin.check_ledger_conditions(L, uniform_pennies_profile(), 0, (0, 1), (2, 2), (0, 0),
                                         n_samples=30, horizon=20, seed=3, objective=matching_pennies_io(),
                                         payoff_histories=2, payoff_samples=50)
    assert rep.profile_ok and rep.bound_ok and rep.submartingale_ok
    assert abs(rep.conditional_increment_mean) <= 1e-12
    assert rep.floor_ok is None
    assert rep.payoff_ok


def test_off_diagonal_profile_fails_with_witness():
    L = d_matching_pennies(0.8)
    prof = FiniteSupportProfile.stationary(StageProfile((0, 1)))
    rep = martin.check_ledger_conditions(L, prof, 0, (0, 1), (2, 2), (0, 0), n_samples=2, horizon=5,
                                         seed=0, objective=matching_pennies_io())
    assert not rep.profile_ok
    assert rep.profile_witness[0] == ()
    assert rep.payoff_ok is None


def test_lasso_truncation():
    h = tuple((k,) for k in range(10))
    p = lasso_truncation(h)
    assert p.prefix == h[:5] and p.cycle == h[5:]
    assert lasso_truncation(h, 3).cycle == h[7:]
    with pytest.raises(ValueError):
        lasso_truncation(())


def test_trajectory_rows():
    L = d_matching_pennies(0.9)
    rows = L.trajectory(LassoPlay((), ((0, 1),)), 5)
    assert [r["stage"] for r in rows] == list(range(5))
    assert rows[0]["d"] == 0.9 and rows[0]["r"] == pytest.approx(0.85)
    assert all(r["r"] == pytest.approx(rows[k + 1]["d"]) for k, r in enumerate(rows[:-1]))


def test_penny_mc_is_deterministic():
    a = penny_ledger_mc(0.9, 1.0, 0.2, 0.5, 0.5, 200, 50, seed=5)
    b = penny_ledger_mc(0.9, 1.0, 0.2, 0.5, 0.5, 200, 50, seed=5)
    np.testing.assert_array_equal(a.reinit_counts, b.reinit_counts)
    assert a.min_m1 >= -1e-9
    assert a.min_reinit_gap >= -1e-9


def test_m_run_round_trip_and_validation():
    L = d_matching_pennies(0.9)
    h = tuple(itertools.islice(itertools.cycle([(0, 1), (1, 1), (1, 0)]), 12))
    run = extract_m_run(L, h, 0, (0, 1), (2, 2), (0, 0))
    assert len(run.payoffs) == len(h) + 1 and len(run.actions) == len(h)
    back = MRun.from_dict(__import__("json").loads(run.dumps()))
    for a, b in zip(run.payoffs, back.payoffs):
        np.testing.assert_allclose(a, b, atol=1e-15)
    assert validate_m_run(run, 0.9).ok
    # opening below w is illegal for player I
    v = validate_m_run(run, 0.95)
    assert not v.ok and v.first_bad == 0
    # a zero realized payoff is illegal for player II
    bad = MRun(0, (0, 1), (2, 2), [np.ones((2, 2)), np.array([[1.0, 0.0], [0.0, 1.0]])], [(0, 1)])
    bad.payoffs[0] = np.array([[0.5, 0.0], [0.0, 0.5]])
    v = validate_m_run(bad, 0.2)
    assert not v.ok and "player II" in v.reason
