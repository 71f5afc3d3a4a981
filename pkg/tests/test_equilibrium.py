import json

import numpy as np
import pytest

from tailgame import equilibrium as eq
from tailgame.core import LassoPlay, make_game
from tailgame.martin import MinorityGenerator, d_voorneveld, d_with_reinit
from tailgame.objectives import evaluate_lasso


def minority_game(n, eps=0.05):
    return make_game({"name": f"voorneveld-{n}", "n_players": n, "actions": ["0", "1"], "defaults": "0",
                      "tail_default": "0", "eps": eps, "objectives": {"kind": "special", "name": "voorneveld-ev"}})


def coordination_game():
    return make_game({"name": "coordination", "n_players": 2, "actions": [["T", "B"], ["L", "R"]],
                      "defaults": ["T", "L"], "tail_default": "L", "eps": 0.05,
                      "objectives": [{"kind": "special", "name": "matching-pennies-io"}] * 2})


def test_reading_components(voorneveld, pennies):
    assert eq.reading_components(voorneveld) == [[i] for i in range(20)]
    assert eq.reading_components(pennies) == [[0, 1]]


def test_hf_count_matches_enumeration():
    g = minority_game(3)
    hf = eq.HFSet(g)
    # stage k lets players 0..min(k, N-1) choose: 2, 4, 8, 8, ... letters
    assert [hf.count(t) for t in range(5)] == [1, 2, 8, 64, 512]
    for t in range(4):
        hs = list(hf.histories(t))
        assert len(hs) == hf.count(t) == len(set(hs))
        assert all(hf.contains(h) for h in hs)
    assert not hf.contains(((0, 1, 0),))


def test_gh_at_empty_history():
    g = minority_game(4)
    ledgers = [d_voorneveld(0.5, g, i) for i in range(4)]
    gh = eq.build_Gh(ledgers, (), g)
    assert gh.players == (0,)
    np.testing.assert_array_equal(gh.game.payoffs[0], [0.0, 1.0])
    gh = eq.build_Gh(ledgers, ((1, 0, 0, 0),), g)
    assert gh.players == (0, 1)


def test_target_play_is_a_staircase():
    g = minority_game(6)
    play = eq.find_target_play(g, [1.0] * 6, g.eps)
    assert all(evaluate_lasso(f, play) == 1.0 for f in g.objectives)
    for t, a in enumerate(play.prefix):
        assert all(a[j] == g.defaults[j] for j in range(t + 1, 6))
    assert play == eq.staircase_play(g)


def test_conflicting_targets_are_infeasible(pennies):
    with pytest.raises(eq.SearchFailure) as info:
        eq.find_target_play(pennies, [1.0, 1.0], pennies.eps)
    assert info.value.reason == "infeasible"


def test_cycle_bound_reported():
    g = make_game({"n_players": 2, "actions": ["0", "1"], "defaults": "0", "eps": 0.001, "objectives": [
        {"kind": "limsup-mean", "weights": {"1": 1.0}},
        {"kind": "limsup-mean", "players": [0], "weights": {"0": 1.0}},
    ]})
    targets = [0.66, 0.33]
    with pytest.raises(eq.SearchFailure) as info:
        eq.find_target_play(g, targets, g.eps, cycle_bound=2)
    assert info.value.reason in ("bound", "unknown")
    play = eq.find_target_play(g, targets, g.eps, cycle_bound=3)
    assert len(play.cycle) == 3


def test_grim_trigger_deviation_handling(pennies):
    play = LassoPlay((), ((0, 0),))
    from tailgame import solver
    cg = solver.build_concurrent_game(pennies, 1)
    pun = solver.punishment_profile(cg).strategy
    grim = eq.assemble_grim_trigger(pennies, play, {1: pun})
    assert grim.first_deviation(((0, 0), (1, 1), (0, 1))) == (1, 0)
    assert grim.first_deviation(((0, 0), (0, 1))) == (1, 1)
    assert grim.stage(((0, 0),)).pure == (0, 0) and not grim.stage(((0, 0),)).mixed
    st = grim.stage(((0, 1),))
    assert set(st.mixed) == {0}


def test_coordination_equilibrium():
    g = coordination_game()
    cert = eq.build_equilibrium(g)
    assert cert.accepted
    assert all(a.payoff == 1.0 for a in cert.audits)


def test_pennies_equilibrium_and_audit(pennies):
    cert = eq.build_equilibrium(pennies)
    assert cert.accepted
    for a in cert.audits:
        assert a.margin >= 0
    d = json.loads(cert.dumps())
    play, pun, targets = eq.load_certificate(pennies, d)
    again = eq.audit_equilibrium(pennies, play, pun, targets=targets)
    assert [a.as_dict() for a in again.audits] == [a.as_dict() for a in cert.audits]


def test_tampered_play_is_rejected():
    g = minority_game(6)
    cert = eq.build_equilibrium(g)
    d = json.loads(cert.dumps())
    for row in d["play"]["cycle"]:
        row[2] = "0"
    play, pun, targets = eq.load_certificate(g, d)
    again = eq.audit_equilibrium(g, play, pun)
    assert not again.accepted
    assert [a.player for a in again.rejected_players()] == [2]
    assert again.rejected_players()[0].margin == pytest.approx(-0.95)


def test_certificate_is_thread_independent():
    g = minority_game(8)
    assert eq.build_equilibrium(g, threads=1).dumps() == eq.build_equilibrium(g, threads=4).dumps()


def test_certificate_validation_errors(pennies):
    cert = json.loads(eq.build_equilibrium(pennies).dumps())
    bad = dict(cert, version=99)
    with pytest.raises(ValueError, match="version"):
        eq.load_certificate(pennies, bad)
    bad = dict(cert, n_players=3)
    with pytest.raises(ValueError):
        eq.load_certificate(pennies, bad)


def test_plain_ledger_of_a_late_player_is_dead():
    # the late player loses every stage at its default, so its plain ledger is 0 on activation
    g = minority_game(6)
    prof = eq.gh_profile(g, [d_voorneveld(0.9, g, i) for i in range(6)])
    rep = eq.levy_bound_check(g, prof, 5, 1.0, 0.05, n_samples=50, horizon=20, seed=11)
    assert rep.fraction == 0.0


@pytest.mark.parametrize("player", [0, 5])
def test_gh_profile_delivers_targets(player):
    g = minority_game(6)
    ledgers = [d_with_reinit(MinorityGenerator(g, i), 0.9, 0.025, 1.0) for i in range(6)]
    prof = eq.gh_profile(g, ledgers)
    rep = eq.levy_bound_check(g, prof, player, 1.0, 0.05, n_samples=2000, horizon=20, seed=11)
    assert rep.ok and rep.fraction == 1.0
    assert rep.max_regret <= 1e-3


def test_gh_sampler_matches_generic_sampler():
    from tailgame.core import sample_play
    g = minority_game(5)
    prof = eq.gh_profile(g, [d_voorneveld(0.9, g, i) for i in range(5)])
    generic, _ = sample_play(prof, 12, 4)
    fast = prof.sample_play(12, np.random.default_rng(4))
    assert generic == fast
