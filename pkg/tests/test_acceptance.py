"""Acceptance suite: one pass/fail test per acceptance criterion (1-11).

Each test states its tolerance next to the assertion. Timing criteria are
measured after a warm-up call so that one-off JIT compilation is excluded.
"""

import itertools
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from tailgame import equilibrium as eq
from tailgame import kernels, solver
from tailgame.cli import run_command
from tailgame.core import FiniteSupportProfile, LassoPlay, MixedAction, StageProfile
from tailgame.martin import (PennyGenerator, check_ledger_conditions, d_matching_pennies, d_voorneveld,
                             d_with_reinit, extract_m_run, lasso_limsup, penny_ledger_mc, validate_m_run)
from tailgame.objectives import evaluate_lasso, matching_pennies_io, zeta_capped
from tailgame.oneshot import (WeightedTailFunction, finitistic_approximation, minmax_equality_check,
                              minmax_finitistic_bracket, random_game)

from oracles import (buchi_backward_induction, mean_payoff_backward_induction, product_grid_minmax,
                     random_two_state_process)
from test_solver import dp_from_tables

JOINT = [(0, 0), (0, 1), (1, 0), (1, 1)]


def cli_json(capsys, *argv):
    code = run_command(list(argv))
    out, err = capsys.readouterr()
    assert code == 0, err
    return json.loads(out)


def uniform_pennies_profile():
    half = MixedAction((0.5, 0.5))
    return FiniteSupportProfile.stationary(StageProfile((0, 0), {0: half, 1: half}))


# 1 -------------------------------------------------------------------------
def test_c01_matching_pennies_value_is_one(capsys):
    cli_json(capsys, "minmax", "--spec", "matching-pennies", "--player", "0")  # warm-up
    t0 = time.perf_counter()
    out = cli_json(capsys, "minmax", "--spec", "matching-pennies", "--player", "0")
    elapsed = time.perf_counter() - t0
    (row,) = out["players"]
    assert row["converged"]
    assert min(float(v) for v in row["values"].values()) >= 1 - 1e-3
    assert elapsed < 1.0


# 2 -------------------------------------------------------------------------
def test_c02_voorneveld_staircase_certificate(capsys, voorneveld, tmp_path):
    cli_json(capsys, "minmax", "--spec", "matching-pennies")  # warm-up
    path = tmp_path / "cert.json"
    t0 = time.perf_counter()
    code = run_command(["equilibrium", "--spec", "voorneveld", "--eps", "0.05", "--seed", "0", "--out", str(path)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    cert = json.loads(path.read_text())
    assert cert["accepted"]
    assert len(cert["players"]) == 20
    play = eq.play_from_labels(voorneveld, cert["play"])
    assert play == eq.staircase_play(voorneveld)
    for i, row in enumerate(cert["players"]):
        assert float(row["payoff"]) == 1.0
        assert evaluate_lasso(voorneveld.objectives[i], play) == 1.0
        assert float(row["margin"]) >= 0.0
    assert elapsed < 10.0


# 3 -------------------------------------------------------------------------
def test_c03_ledger_conditions_exact(rng, voorneveld):
    # pennies ledger, bound condition: d(h) <= value of d^h, with equality to 1e-9
    L = d_matching_pennies(0.9)
    for _ in range(1000):
        h = tuple(JOINT[k] for k in rng.integers(0, 4, rng.integers(0, 40)))
        g = L.one_shot(h, (0, 1), (2, 2), (0, 0))
        value, _, _ = kernels.solve_matrix_game(g.payoffs[0])
        assert L.d(h) <= value + 1e-12
        assert abs(L.d(h) - value) <= 1e-9

    # pennies ledger, limsup condition: limsup of d along every lasso <= its payoff
    f = matching_pennies_io()
    for k in range(1, 7):
        for cycle in itertools.product(JOINT, repeat=k):
            prefixes = [()] + ([(a,) for a in JOINT] if k <= 3 else [])
            for prefix in prefixes:
                p = LassoPlay(prefix, cycle)
                assert lasso_limsup(L, p) <= evaluate_lasso(f, p)

    # minority ledgers: root value w and bound condition with values in {0, 1}
    n = voorneveld.n_players
    for trial in range(1000):
        i = trial % n
        L = d_voorneveld(0.6, voorneveld, i)
        assert L.d(()) == 0.6
        h = tuple(tuple(int(x) for x in rng.integers(0, 2, n)) for _ in range(rng.integers(0, 25)))
        g = L.one_shot(h, (i,), (2,), voorneveld.defaults)
        b = minmax_finitistic_bracket(g, i)
        assert b.lower == b.upper
        assert b.lower in (0.0, 1.0)
        assert L.d(h) <= b.lower


# 4 -------------------------------------------------------------------------
def test_c04_reinitiation_gap_and_count():
    delta = 0.2
    mc = penny_ledger_mc(0.9, 1.0, delta, 0.5, 0.5, 10_000, 100, seed=4)
    assert mc.min_reinit_gap >= 0.0
    bound = 2 * 1.0 / delta
    assert bound == 10
    assert np.isfinite(mc.reinit_mean)
    assert mc.reinit_mean <= bound + 3 * mc.reinit_se

    # the same gap with the generic ledger and the certified bracket end
    L = d_with_reinit(PennyGenerator(), 0.9, delta, 1.0)
    rep = check_ledger_conditions(L, uniform_pennies_profile(), 0, (0, 1), (2, 2), (0, 0),
                                  n_samples=200, horizon=50, seed=4)
    assert rep.reinit_gap_min is not None and rep.reinit_gap_min >= 0.0
    assert rep.reinit_mean <= rep.reinit_bound + 3 * rep.reinit_se


# 5 -------------------------------------------------------------------------
@pytest.mark.parametrize("delta", [0.0, 0.2])
def test_c05_submartingale(delta):
    L = d_with_reinit(PennyGenerator(), 0.8, delta, 1.0) if delta else d_matching_pennies(0.8)
    rep = check_ledger_conditions(L, uniform_pennies_profile(), 0, (0, 1), (2, 2), (0, 0),
                                  n_samples=100, horizon=100, seed=5)
    assert rep.profile_ok  # the profile passes the defending-profile check first
    assert rep.histories_checked == 10_000
    assert rep.conditional_increment_mean >= -1e-3


# 6 -------------------------------------------------------------------------
def test_c06_m_runs_are_legal():
    rng = np.random.default_rng(6)
    L = d_matching_pennies(0.9)
    for _ in range(100):
        h = tuple(JOINT[k] for k in rng.integers(0, 4, 100))
        run = extract_m_run(L, h, 0, (0, 1), (2, 2), (0, 0))
        verdict = validate_m_run(run, 0.9)
        assert verdict.ok, verdict.reason


# 7 -------------------------------------------------------------------------
def test_c07_decision_processes_match_backward_induction():
    rng = np.random.default_rng(7)
    for _ in range(50):
        P, accept, weight = random_two_state_process(rng)
        res = solver.solve_decision_process(dp_from_tables(P, np.where(accept, 2, 1), "buchi"))
        assert np.abs(res.values - buchi_backward_induction(P, accept)).max() <= 1e-2
        res = solver.solve_decision_process(dp_from_tables(P, weight, "limsup-mean"))
        assert np.abs(res.values - mean_payoff_backward_induction(P, weight)).max() <= 1e-2


# 8 -------------------------------------------------------------------------
def test_c08_one_shot_minmax():
    rng = np.random.default_rng(8)
    for _ in range(100):
        g = random_game(2, tuple(int(x) for x in rng.integers(2, 5, 2)), rng)
        rep = minmax_equality_check(g, 0)
        assert rep.bracket.lower == rep.bracket.upper == rep.classical

    k = 60
    for _ in range(100):
        g = random_game(3, 2, rng)
        b = minmax_finitistic_bracket(g, 0)
        oracle = product_grid_minmax(g.payoffs[0], g.sizes, k)
        assert b.width <= 0.02
        # the grid value is an upper bound on the true value and within 1/k of it
        assert b.lower <= oracle + 1e-12
        assert b.upper >= oracle - 1 / k - 1e-12


# 9 -------------------------------------------------------------------------
def test_c09_finitistic_approximation():
    r = WeightedTailFunction.geometric()
    tab = finitistic_approximation(r, 0.5, 0.01, 20, samples=10_000, seed=9)
    for n, err in zip(tab.n, tab.max_error):
        assert err <= 2.0 ** (-n + 1)
    assert tab.hit_rate[tab.derived_n] >= 0.99


# 10 ------------------------------------------------------------------------
def test_c10_zeta_capped_never_reaches_one():
    best = Fraction(0)
    for k in range(1, 13):
        for cycle in itertools.product((0, 1), repeat=k):
            v = zeta_capped(LassoPlay((), tuple((a,) for a in cycle)))
            assert v < 1
            best = max(best, v)
    assert best == Fraction(11, 12)


# 11 ------------------------------------------------------------------------
@pytest.mark.parametrize("spec", ["voorneveld", "matching-pennies"])
def test_c11_certificates_thread_independent(spec, tmp_path):
    outs = []
    for threads in ("1", "8"):
        path = tmp_path / f"cert{threads}.json"
        code = run_command(["equilibrium", "--spec", spec, "--seed", "11", "--threads", threads, "--out", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
