"""Assembly and audit of epsilon-equilibria.

Pipeline: solve each player's zero-sum game against its coalition window
(value and punishment), search a lasso play meeting every player's value
target, wrap it in a grim trigger and audit every player's best deviation
exactly. Only audited certificates are accepted.

The one-shot games ``G(h)`` and the staircase history sets ``H_t^F`` of the
existence argument are provided as well, together with a Monte Carlo check
that the profile built from ``G(h)`` equilibria delivers the targets.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import solver
from .core import (FiniteSupportProfile, GameSpec, History, JointAction, LassoPlay, MixedAction,
                   StageProfile)
from .martin import DLedger, lasso_truncation
from .objectives import PayoffAutomaton, evaluate_lasso
from .oneshot import NormalFormGame, nash_equilibrium

log = logging.getLogger(__name__)

AUDIT_TOL = 1e-3
CERT_VERSION = 1


def fmt(x: float) -> str:
    """Decimal string with 12 significant digits (certificate number format)."""
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# one-shot games along histories


@dataclass
class GOfH:
    stage: int
    players: tuple[int, ...]
    game: NormalFormGame


def build_Gh(ledgers, h: History, game: GameSpec) -> GOfH:
    """One-shot game at ``h``: players ``0..t`` active, payoffs ``d_i^h`` with the rest at defaults."""
    h = tuple(tuple(a) for a in h)
    t = len(h)
    active = tuple(range(min(t, game.n_players - 1) + 1))
    sizes = tuple(game.sizes[j] for j in active)
    entries = [ledgers[i].entry(h) for i in active]
    pay = np.zeros((len(active),) + sizes)
    base = list(game.defaults)
    for x in itertools.product(*(range(k) for k in sizes)):
        for j, v in zip(active, x):
            base[j] = v
        a = tuple(base)
        for k, i in enumerate(active):
            pay[(k,) + x] = ledgers[i].child(entries[k], a, h).d
    return GOfH(t, active, NormalFormGame(active, sizes, pay))


class HFSet:
    """Histories along which players not yet active stick to their defaults."""

    def __init__(self, game: GameSpec):
        self.game = game

    def stage_letters(self, k: int):
        n = self.game.n_players
        active = range(min(k, n - 1) + 1)
        rest = tuple(self.game.defaults[min(k, n - 1) + 1:])
        for x in itertools.product(*(range(self.game.sizes[j]) for j in active)):
            yield tuple(x) + rest

    def count(self, t: int) -> int:
        n = self.game.n_players
        return math.prod(math.prod(self.game.sizes[: min(k, n - 1) + 1]) for k in range(t))

    def histories(self, t: int):
        yield from itertools.product(*(list(self.stage_letters(k)) for k in range(t)))

    def contains(self, h: History) -> bool:
        d = self.game.defaults
        return all(a[i] == d[i] for k, a in enumerate(h) for i in range(k + 1, self.game.n_players))


# ---------------------------------------------------------------------------
# target play search


class SearchFailure(Exception):
    """No lasso found. ``reason`` is ``infeasible``, ``bound`` or ``unknown``."""

    def __init__(self, reason: str, message: str, component=None):
        super().__init__(message)
        self.reason = reason
        self.component = component


def reading_components(game: GameSpec) -> list[list[int]]:
    """Players grouped by the objectives that read them (connected components)."""
    n = game.n_players
    rows, cols = [], []
    for i, aut in enumerate(game.objectives):
        for j in aut.players:
            rows.append(i)
            cols.append(j)
    g = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    k, lab = connected_components(g, directed=False)
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(int(lab[i]), []).append(i)
    return sorted(comps.values())


class _Component:
    def __init__(self, game: GameSpec, members):
        self.game = game
        self.members = list(members)
        self.auts = [game.objectives[i] for i in self.members]
        if any(a.kind == "special" for a in self.auts):
            raise SearchFailure("unknown", "target search needs finite-state objectives", self.members)
        self.letters = list(itertools.product(*(range(game.sizes[j]) for j in self.members)))
        self.last = max(self.members)

    def joint(self, x) -> JointAction:
        a = list(self.game.defaults)
        for j, v in zip(self.members, x):
            a[j] = v
        return tuple(a)

    def allowed(self, x, stage) -> bool:
        d = self.game.defaults
        return all(v == d[j] for j, v in zip(self.members, x) if j > stage)

    def step(self, qs, a):
        return tuple(aut.edge(q, aut.local(a))[0] for aut, q in zip(self.auts, qs))

    def labels(self, qs, a):
        return tuple(aut.edge(q, aut.local(a))[1] for aut, q in zip(self.auts, qs))

    def initial(self):
        return tuple(a.initial for a in self.auts)

    def ramp_paths(self):
        """Shortest staircase-respecting path to every product state at stage ``last``."""
        start = (self.initial(), 0)
        paths = {start: ()}
        order = [start]
        k = 0
        while k < len(order):
            qs, st = order[k]
            k += 1
            if st == self.last:
                continue
            for x in self.letters:
                if not self.allowed(x, st):
                    continue
                a = self.joint(x)
                nxt = (self.step(qs, a), min(st + 1, self.last))
                if nxt not in paths:
                    paths[nxt] = paths[(qs, st)] + (a,)
                    order.append(nxt)
        return [(qs, paths[(qs, st)]) for qs, st in order if st == self.last]

    def search(self, need, cycle_bound, budget):
        used = 0
        for qs, prefix in self.ramp_paths():
            for L in range(1, cycle_bound + 1):
                for word in itertools.product(self.letters, repeat=L):
                    used += 1
                    if used > budget:
                        return None, used
                    p = LassoPlay(prefix, tuple(self.joint(x) for x in word))
                    if all(evaluate_lasso(aut, p) >= need_i - 1e-12 for aut, need_i in zip(self.auts, need)):
                        return p, used
        return None, used


def _parity_nonempty(comp: _Component, need) -> bool | None:
    """Is there any run of the component's product meeting every parity requirement?

    Requirements with ``need <= 0`` are dropped; the others ask for a win
    (payoff 1). Returns None if a limsup-mean requirement is involved.
    """
    idx = [k for k, v in enumerate(need) if v > 1e-12]
    if any(not comp.auts[k].is_parity for k in idx):
        return None
    if any(need[k] > 1.0 + 1e-12 for k in idx):
        return False
    # product graph reachable from the initial state, edges labeled with priority vectors
    start = comp.initial()
    index = {start: 0}
    order = [start]
    edges = []
    k = 0
    while k < len(order):
        qs = order[k]
        k += 1
        for x in comp.letters:
            a = comp.joint(x)
            q2 = comp.step(qs, a)
            if q2 not in index:
                index[q2] = len(order)
                order.append(q2)
            lab = comp.labels(qs, a)
            edges.append((index[qs], index[q2], tuple(int(lab[j]) for j in idx)))
    return _good_cycle(len(order), edges)


def _good_cycle(n, edges) -> bool:
    """Does some cycle have an even maximum in every priority coordinate?"""
    if not edges:
        return False
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    g = csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n))
    _, comp = connected_components(g, directed=True, connection="strong")
    groups: dict[int, list] = {}
    for e in edges:
        if comp[e[0]] == comp[e[1]]:
            groups.setdefault(int(comp[e[0]]), []).append(e)
    for inner in groups.values():
        dims = len(inner[0][2])
        tops = [max(e[2][j] for e in inner) for j in range(dims)]
        bad = next((j for j in range(dims) if tops[j] % 2 == 1), None)
        if bad is None:
            return True
        rest = [e for e in inner if e[2][bad] != tops[bad]]
        if _good_cycle(n, rest):
            return True
    return False


def find_target_play(game: GameSpec, targets, eps, cycle_bound: int = 4, budget: int = 200_000) -> LassoPlay:
    """Lasso meeting ``f_i(p) >= targets[i] - eps[i]/2`` for every player, with a staircase ramp.

    Components of the reading graph are searched separately (cycles of
    length <= ``cycle_bound`` from every state reachable along the ramp)
    and then interleaved; the combined cycle has the lcm of the component
    lengths. On failure an exact emptiness test tells "targets infeasible"
    apart from "bound too small".
    """
    need_all = [float(v) - 0.5 * float(e) for v, e in zip(targets, eps)]
    parts = []
    for members in reading_components(game):
        comp = _Component(game, members)
        need = [need_all[i] for i in members]
        p, used = comp.search(need, cycle_bound, budget)
        if p is None:
            feasible = _parity_nonempty(comp, need)
            if feasible is False:
                raise SearchFailure("infeasible", f"targets of players {members} cannot be met by any play", members)
            if used > budget:
                raise SearchFailure("bound", f"search budget exhausted for players {members}", members)
            if feasible is None:
                raise SearchFailure("unknown", f"no lasso with cycle <= {cycle_bound} for players {members}", members)
            raise SearchFailure("bound", f"targets of players {members} are feasible but need cycles longer "
                                         f"than {cycle_bound}", members)
        parts.append((members, p))
    P = max(len(p.prefix) for _, p in parts)
    C = math.lcm(*(len(p.cycle) for _, p in parts))
    out = []
    for t in range(P + C):
        a = list(game.defaults)
        for members, p in parts:
            x = p.at(t)
            for j in members:
                a[j] = x[j]
        out.append(tuple(a))
    play = LassoPlay(tuple(out[:P]), tuple(out[P:]))
    for i, aut in enumerate(game.objectives):
        if evaluate_lasso(aut, play) < need_all[i] - 1e-12:
            raise RuntimeError(f"combined play misses the target of player {i}")
    return play


def staircase_play(game: GameSpec, label: str = "1") -> LassoPlay:
    """Players at defaults until their activation stage, then ``label`` forever."""
    n = game.n_players
    on = [game.index(i, label) for i in range(n)]
    pre = tuple(tuple(on[j] if j <= t else game.defaults[j] for j in range(n)) for t in range(n - 1))
    return LassoPlay(pre, (tuple(on),))


# ---------------------------------------------------------------------------
# grim trigger


@dataclass
class GrimTrigger:
    game: GameSpec
    play: LassoPlay
    punishments: dict  # player -> StationaryStrategy

    def first_deviation(self, h: History):
        """``(stage, player)`` of the earliest deviation, lowest index first; None if on path."""
        for t, a in enumerate(h):
            p = self.play.at(t)
            if a != p:
                return t, min(i for i in range(len(a)) if a[i] != p[i])
        return None

    def stage(self, h: History) -> StageProfile:
        h = tuple(tuple(a) for a in h)
        dev = self.first_deviation(h)
        if dev is None:
            return StageProfile(self.play.at(len(h)))
        _, i = dev
        strat = self.punishments.get(i)
        if strat is None or not strat.window:
            return StageProfile(self.game.defaults)
        aut = self.game.objectives[i]
        q = aut.run(aut.initial, [aut.local(a) for a in h])
        mixed = {j: m for j, m in zip(strat.window, strat.mixed[q])}
        return StageProfile(self.game.defaults, mixed)

    def profile(self) -> FiniteSupportProfile:
        return FiniteSupportProfile(self.game.n_players, self.stage)


def assemble_grim_trigger(game: GameSpec, play: LassoPlay, punishments: dict) -> GrimTrigger:
    return GrimTrigger(game, play, dict(punishments))


def deviation_process(game: GameSpec, play: LassoPlay, player: int, punishment: solver.StationaryStrategy,
                      cg: solver.ConcurrentGame) -> solver.DecisionProcess:
    """Decision process of ``player`` against the grim trigger.

    On-path states are ``(lasso position, objective state)``; playing the
    prescribed action stays on the path, anything else jumps to the
    punishment phase, whose states are the coalition game's states.
    """
    aut = cg.objective
    pun_index = {q: k for k, q in enumerate(cg.states)}
    n_pun = cg.n_states
    path_index: dict = {}
    order = []

    def on_path(pos, q):
        key = (pos, q)
        if key not in path_index:
            path_index[key] = n_pun + len(order)
            order.append(key)
        return path_index[key]

    def pun_state(q):
        if q not in pun_index:
            raise RuntimeError(f"objective state {q} missing from the coalition game")
        return pun_index[q]

    on_path(0, aut.initial)
    transitions = []
    k = 0
    while k < len(order):
        pos, q = order[k]
        k += 1
        a = play.at(pos)
        acts = []
        for b in range(game.sizes[player]):
            x = list(a)
            x[player] = b
            q2, lab = aut.edge(q, aut.local(tuple(x)))
            if b == a[player]:
                acts.append((b, [(1.0, on_path(play.next_position(pos), q2), lab)]))
            else:
                acts.append((b, [(1.0, pun_state(q2), lab)]))
        transitions.append(acts)
    dp = solver.coalition_process(cg, punishment)
    full = solver.DecisionProcess(n_pun + len(order), dp.kind)
    full.actions[:n_pun] = dp.actions
    for k, acts in enumerate(transitions):
        for b, outs in acts:
            full.add_action(n_pun + k, outs, tag=b)
    full.start = n_pun
    return full


@dataclass
class PlayerAudit:
    player: int
    payoff: float
    target: float
    eps: float
    audit_value: float
    margin: float
    accepted: bool
    punishment: solver.StationaryStrategy
    guarantee: float
    solver_iters: int = 0
    independence_spread: float | None = None

    def as_dict(self):
        return {
            "id": self.player,
            "payoff": fmt(self.payoff),
            "target": fmt(self.target),
            "eps": fmt(self.eps),
            "audit_value": fmt(self.audit_value),
            "margin": fmt(self.margin),
            "accepted": self.accepted,
        }


def audit_player(game: GameSpec, play: LassoPlay, player: int, punishment, eps: float,
                 tol: float = AUDIT_TOL, cg=None, target: float = float("nan")) -> PlayerAudit:
    """Best deviation value of ``player`` against the grim trigger; accepted iff within ``eps + tol``."""
    cg = cg if cg is not None else solver.build_concurrent_game(game, player)
    if punishment is None:
        punishment = solver.StationaryStrategy(cg.window, cg.window_sizes, {}, "exact")
    _check_strategy(cg, punishment)
    dp = deviation_process(game, play, player, punishment, cg)
    res = solver.solve_decision_process(dp)
    br = float(res.values[dp.start])
    f = evaluate_lasso(game.objectives[player], play)
    margin = f + eps - br
    return PlayerAudit(player, f, target, eps, br, margin, margin >= -tol, punishment, float("nan"))


def _check_strategy(cg, strat):
    if tuple(strat.window) != tuple(cg.window):
        raise ValueError(f"punishment of player {cg.player} names window {strat.window}, expected {cg.window}")
    if cg.window:
        for q in cg.states:
            if q not in strat.mixed:
                raise ValueError(f"punishment of player {cg.player} lacks objective state {q}")
            for m, k in zip(strat.mixed[q], cg.window_sizes):
                if len(m.probs) != k:
                    raise ValueError(f"punishment of player {cg.player} has a mixed action of the wrong size")


# ---------------------------------------------------------------------------
# certificates


@dataclass
class EquilibriumCertificate:
    game: GameSpec
    play: LassoPlay
    audits: list[PlayerAudit]
    meta: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return all(a.accepted for a in self.audits)

    def rejected_players(self):
        return [a for a in self.audits if not a.accepted]

    def to_dict(self):
        g = self.game
        return {
            "version": CERT_VERSION,
            "game": g.name,
            "n_players": g.n_players,
            "accepted": self.accepted,
            "play": {
                "prefix": [g.joint_labels(a) for a in self.play.prefix],
                "cycle": [g.joint_labels(a) for a in self.play.cycle],
            },
            "players": [a.as_dict() for a in self.audits],
            "punishments": {str(a.player): a.punishment.as_dict() for a in self.audits if a.punishment.window},
            "meta": self.meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def play_from_labels(game: GameSpec, data) -> LassoPlay:
    def conv(rows):
        out = []
        for row in rows:
            if len(row) != game.n_players:
                raise ValueError(f"joint action {row} has {len(row)} entries, expected {game.n_players}")
            out.append(tuple(game.index(i, x) for i, x in enumerate(row)))
        return tuple(out)

    return LassoPlay(conv(data.get("prefix", [])), conv(data["cycle"]))


def _map(threads, fn, items):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def audit_equilibrium(game: GameSpec, play: LassoPlay, punishments: dict, eps=None, tol: float = AUDIT_TOL,
                      threads: int = 1, targets=None, meta=None) -> EquilibriumCertificate:
    """Audit every player against the grim trigger on ``play``; payoffs are recomputed from the play."""
    eps = game.eps if eps is None else tuple(eps)
    targets = targets if targets is not None else [float("nan")] * game.n_players

    def one(i):
        return audit_player(game, play, i, punishments.get(i), eps[i], tol, target=targets[i])

    audits = _map(threads, one, range(game.n_players))
    return EquilibriumCertificate(game, play, audits, dict(meta or {}))


@dataclass
class PlayerSolution:
    player: int
    value: float
    punishment: solver.Punishment
    iterations: int
    residual: float
    spread: float


def solve_player(game: GameSpec, i: int, tol: float = solver.INNER_TOL) -> tuple[PlayerSolution, object]:
    cg = solver.build_concurrent_game(game, i)
    table = solver.solve_values(cg, tol)
    pun = solver.punishment_profile(cg, table, tol)
    ind = solver.history_independence_check(cg, table)
    return PlayerSolution(i, float(table.values[cg.initial]), pun, table.iterations, float(table.residual),
                          ind.spread), cg


def build_equilibrium(game: GameSpec, eps=None, seed: int = 0, tol: float = AUDIT_TOL,
                      cycle_bound: int = 4, threads: int = 1, solver_tol: float = solver.INNER_TOL):
    """Full pipeline: values and punishments, target play, grim trigger, audit."""
    eps = tuple(game.eps if eps is None else eps)
    sols = _map(threads, lambda i: solve_player(game, i, solver_tol), range(game.n_players))
    targets = [s.value for s, _ in sols]
    play = find_target_play(game, targets, eps, cycle_bound)
    punish = {s.player: s.punishment.strategy for s, _ in sols}

    def one(k):
        s, cg = sols[k]
        a = audit_player(game, play, k, punish[k], eps[k], tol, cg=cg, target=s.value)
        a.guarantee = s.punishment.guarantee
        a.solver_iters = s.iterations
        a.independence_spread = s.spread
        return a

    audits = _map(threads, one, range(game.n_players))
    meta = {
        "seed": str(seed),
        "player_seeds": [str(np.random.SeedSequence([seed, i]).generate_state(1)[0]) for i in range(game.n_players)],
        "tolerances": {"audit": fmt(tol), "solver_inner": fmt(solver_tol), "solver_outer": fmt(solver.OUTER_TOL)},
        "delta": [fmt(e / 2) for e in eps],
        "cycle_bound": cycle_bound,
        "solver_iters": [s.iterations for s, _ in sols],
        "guarantees": [fmt(s.punishment.guarantee) for s, _ in sols],
        "value_spread": [fmt(s.spread) for s, _ in sols],
        "punishment_realization": [s.punishment.strategy.realization for s, _ in sols],
    }
    return EquilibriumCertificate(game, play, audits, meta)


def load_certificate(game: GameSpec, data):
    """Play and punishments stored in a certificate (payoffs are never read back)."""
    if data.get("version") != CERT_VERSION:
        raise ValueError(f"unsupported certificate version {data.get('version')!r}")
    if int(data.get("n_players", -1)) != game.n_players:
        raise ValueError("certificate and spec disagree on the number of players")
    play = play_from_labels(game, data["play"])
    pun = {}
    for k, v in data.get("punishments", {}).items():
        i = int(k)
        sizes = [game.sizes[j] for j in v["window"]]
        pun[i] = solver.StationaryStrategy.from_dict(v, sizes)
    targets = []
    for row in sorted(data.get("players", []), key=lambda r: int(r["id"])):
        targets.append(float(row.get("target", "nan")))
    if len(targets) != game.n_players:
        targets = None
    return play, pun, targets


# ---------------------------------------------------------------------------
# Monte Carlo check of the G(h) construction


@dataclass
class LevyReport:
    player: int
    threshold: float
    fraction: float
    samples: int
    horizon: int
    ok: bool
    max_regret: float

    def as_dict(self):
        return dict(self.__dict__)


class GhProfile(FiniteSupportProfile):
    """Profile playing a Nash profile of ``G(h)`` on ``H^F`` and defaults elsewhere.

    ``G(h)`` splits into independent blocks of players whose ledgers read
    each other; each block is solved on its own. Solutions are cached by
    the ledger states, so repeated situations are solved once.
    """

    def __init__(self, game: GameSpec, ledgers, tol: float = 1e-3):
        super().__init__(game.n_players, self._rule)
        self.game = game
        self.ledgers = list(ledgers)
        self.tol = tol
        self.hf = HFSet(game)
        self.max_regret = 0.0
        self._cache: dict = {}
        self._block_cache: dict = {}

    def _reads(self, i):
        return tuple(getattr(self.ledgers[i].gen, "reads", ())) or tuple(range(self.game.n_players))

    def _blocks(self, active):
        key = tuple(active)
        hit = self._block_cache.get(key)
        if hit is None:
            hit = self._block_cache[key] = self._compute_blocks(active)
        return hit

    def _compute_blocks(self, active):
        parent = {i: i for i in active}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i in active:
            for j in self._reads(i):
                if j in parent:
                    parent[find(i)] = find(j)
        blocks: dict = {}
        for i in active:
            blocks.setdefault(find(i), []).append(i)
        return list(blocks.values())

    def _rule(self, h):
        if not self.hf.contains(h):
            return StageProfile(self.game.defaults)
        active = range(min(len(h), self.game.n_players - 1) + 1)
        return self.stage_from_entries(h, {i: self.ledgers[i].entry(h) for i in active})

    def stage_from_entries(self, h, entries) -> StageProfile:
        game = self.game
        mixed = {}
        pure = list(game.defaults)
        for block in self._blocks(sorted(entries)):
            key = (tuple(block), tuple((entries[i].d, entries[i].state, entries[i].reinit) for i in block))
            prof = self._cache.get(key)
            if prof is None:
                sizes = tuple(game.sizes[j] for j in block)
                pay = np.zeros((len(block),) + sizes)
                base = list(game.defaults)
                for x in itertools.product(*(range(k) for k in sizes)):
                    for j, v in zip(block, x):
                        base[j] = v
                    for k, i in enumerate(block):
                        pay[(k,) + x] = self.ledgers[i].child(entries[i], tuple(base), h).d
                res = nash_equilibrium(NormalFormGame(tuple(block), sizes, pay), tol=self.tol)
                self.max_regret = max(self.max_regret, res.regret)
                prof = self._cache[key] = [MixedAction(tuple(float(p) for p in m / m.sum())) for m in res.profile]
            for j, m in zip(block, prof):
                if m.is_pure():
                    pure[j] = m.support[0]
                else:
                    mixed[j] = m
        return StageProfile(tuple(pure), mixed)

    def sample_play(self, horizon: int, rng) -> History:
        """One sampled history, carrying ledger entries forward instead of re-walking them."""
        h: list = []
        n = self.game.n_players
        entries = {0: self.ledgers[0].root_entry()}
        for t in range(horizon):
            a = self.stage_from_entries(tuple(h), entries).sample(rng)
            nxt = {i: self.ledgers[i].child(e, a, tuple(h)) for i, e in entries.items()}
            h.append(a)
            if t + 1 < n:
                # a newly active player's ledger has to catch up with the history
                nxt[t + 1] = self.ledgers[t + 1].entry(tuple(h))
            entries = nxt
        return tuple(h)


def gh_profile(game: GameSpec, ledgers, tol: float = 1e-3) -> GhProfile:
    return GhProfile(game, ledgers, tol)


def levy_bound_check(game: GameSpec, profile: FiniteSupportProfile, player: int, target: float, eps: float,
                     n_samples: int, horizon: int, seed: int, stat_tol: float | None = None) -> LevyReport:
    """Fraction of sampled plays (scored on their lasso truncation) with ``f_i >= target - eps/2``."""
    rng = np.random.default_rng(seed)
    aut = game.objectives[player]
    thr = target - 0.5 * eps
    hits = 0
    for _ in range(n_samples):
        if isinstance(profile, GhProfile):
            h = profile.sample_play(horizon, rng)
        else:
            hl: list = []
            for _ in range(horizon):
                hl.append(profile.at(tuple(hl)).sample(rng))
            h = tuple(hl)
        if evaluate_lasso(aut, lasso_truncation(h)) >= thr - 1e-12:
            hits += 1
    frac = hits / n_samples
    stat_tol = 3.0 / math.sqrt(n_samples) if stat_tol is None else stat_tol
    return LevyReport(player, thr, frac, n_samples, horizon, frac >= 1.0 - stat_tol,
                      float(getattr(profile, "max_regret", float("nan"))))
