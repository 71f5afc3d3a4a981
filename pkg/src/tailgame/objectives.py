"""Finite-state payoff functions on infinite plays.

A :class:`PayoffAutomaton` reads the actions of a fixed set of players,
moves deterministically between finitely many states and scores the run
through a prefix-independent valuation:

* parity family (``buchi``, ``cobuchi``, ``parity``): every edge carries a
  priority and the payoff is 1 iff the largest priority seen infinitely
  often is even. Buchi accepting edges get priority 2 (others 1); co-Buchi
  rejecting edges get priority 1 (others 0); a ``parity`` automaton gives
  each state a priority and an edge inherits the priority of its target.
* ``limsup-mean``: edge weights in [0, 1]; the payoff is the mean weight of
  the periodic part of the run.
* ``special``: a built-in function evaluated directly on the lasso.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .core import GameSpec, GameSpecError, History, JointAction, LassoPlay

PARITY_KINDS = ("buchi", "cobuchi", "parity")
KINDS = PARITY_KINDS + ("limsup-mean", "special")


@dataclass(frozen=True, eq=False)
class PayoffAutomaton:
    players: tuple[int, ...]
    sizes: tuple[int, ...]
    n_states: int
    initial: int
    delta: Callable[[int, tuple], int]
    kind: str
    label: Callable[[int, tuple, int], float] | None = None
    special: Callable[[tuple, tuple], float] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown valuation kind {self.kind!r}")
        if len(self.players) != len(self.sizes):
            raise ValueError("players and sizes differ in length")
        if not 0 <= self.initial < self.n_states:
            raise ValueError("initial state out of range")

    @property
    def is_parity(self) -> bool:
        return self.kind in PARITY_KINDS

    def local(self, a: JointAction) -> tuple:
        return tuple(a[j] for j in self.players)

    def alphabet(self):
        return itertools.product(*(range(k) for k in self.sizes))

    def edge(self, q: int, x: tuple) -> tuple[int, float]:
        """Target state and label (priority or weight) of the edge ``q --x-->``."""
        q2 = self.delta(q, x)
        return q2, (self.label(q, x, q2) if self.label is not None else 0)

    def run(self, q: int, word: Sequence[tuple]) -> int:
        for x in word:
            q = self.delta(q, x)
        return q

    def reachable_states(self) -> list[int]:
        seen = {self.initial}
        todo = [self.initial]
        letters = list(self.alphabet())
        while todo:
            q = todo.pop()
            for x in letters:
                q2 = self.delta(q, x)
                if q2 not in seen:
                    seen.add(q2)
                    todo.append(q2)
        return sorted(seen)

    def value_from(self, q: int, prefix: Sequence[tuple], cycle: Sequence[tuple]) -> float:
        """Payoff of the local play ``prefix cycle^omega`` started in state ``q``."""
        if self.kind == "special":
            return float(self.special(tuple(prefix), tuple(cycle)))
        q = self.run(q, prefix)
        return self._cycle_value(q, cycle)

    def _cycle_value(self, q: int, cycle: Sequence[tuple]) -> float:
        if not cycle:
            raise ValueError("empty cycle")
        seen: dict[int, int] = {}
        passes: list[list[float]] = []
        while q not in seen:
            seen[q] = len(passes)
            labels = []
            for x in cycle:
                q, lab = self.edge(q, x)
                labels.append(lab)
            passes.append(labels)
        periodic = [lab for labels in passes[seen[q]:] for lab in labels]
        if self.is_parity:
            return 1.0 if max(periodic) % 2 == 0 else 0.0
        return math.fsum(periodic) / len(periodic)


def evaluate_lasso(aut: PayoffAutomaton, p: LassoPlay) -> float:
    """Exact payoff of the eventually periodic play ``p``."""
    prefix = [aut.local(a) for a in p.prefix]
    cycle = [aut.local(a) for a in p.cycle]
    return aut.value_from(aut.initial, prefix, cycle)


# ---------------------------------------------------------------------------
# Voorneveld's minority game


@dataclass(frozen=True)
class PopulationStatistic:
    """``limsup_n (1/n) sum_{j<n} a_j`` over the countable population.

    Only finitely many concrete players exist, so the limit is decided by
    the tail beyond the truncation; ``active_ones`` is kept for reporting.
    """

    active_ones: int
    tail_density: float

    @property
    def value(self) -> float:
        return self.tail_density

    @classmethod
    def of(cls, a: JointAction, ones: Sequence[int], tail_is_one: bool) -> "PopulationStatistic":
        return cls(sum(1 for x, o in zip(a, ones) if x == o), 1.0 if tail_is_one else 0.0)


def minority_reward(own_is_one: bool, statistic: float) -> int:
    if not own_is_one and statistic > 0.5:
        return 1
    if own_is_one and statistic <= 0.5:
        return 1
    return 0


def voorneveld_stage_reward(a: JointAction, game: GameSpec) -> list[int]:
    """Per-player one-shot Voorneveld reward of ``a`` under the analytic tail."""
    ones = [game.index(i, "1") for i in range(game.n_players)]
    tail_is_one = game.actions[-1][game.tail_default] == "1"
    stat = PopulationStatistic.of(a, ones, tail_is_one).value
    return [minority_reward(a[i] == ones[i], stat) for i in range(game.n_players)]


# ---------------------------------------------------------------------------
# built-in objectives


def matching_pennies_io(players=(0, 1), sizes=(2, 2), negate=False) -> PayoffAutomaton:
    """Wins iff the two players' action indices coincide infinitely often."""
    return _negate_if(PayoffAutomaton(
        players=tuple(players), sizes=tuple(sizes), n_states=1, initial=0,
        delta=lambda q, x: 0, kind="buchi",
        label=lambda q, x, q2: 2 if x[0] == x[1] else 1,
        name="matching-pennies-io",
    ), negate)


def voorneveld_ev(player: int, one_index: int, tail_is_one: bool, size: int = 2) -> PayoffAutomaton:
    """Wins iff the one-shot minority reward is 1 at all but finitely many stages."""

    def label(q, x, q2):
        return 0 if minority_reward(x[0] == one_index, 1.0 if tail_is_one else 0.0) else 1

    return PayoffAutomaton(
        players=(player,), sizes=(size,), n_states=1, initial=0,
        delta=lambda q, x: 0, kind="cobuchi", label=label, name="voorneveld-ev",
        meta={"tail_is_one": tail_is_one},
    )


def zeta_capped(p: LassoPlay, player: int = 0) -> Fraction:
    """Limsup-frequency of action 1, or 0 when that frequency is 1."""
    ones = sum(1 for a in p.cycle if a[player] == 1)
    freq = Fraction(ones, len(p.cycle))
    return freq if freq < 1 else Fraction(0)


def zeta_objective(player: int = 0) -> PayoffAutomaton:
    def special(prefix, cycle):
        return zeta_capped(LassoPlay(prefix, cycle))

    return PayoffAutomaton(
        players=(player,), sizes=(2,), n_states=1, initial=0, delta=lambda q, x: 0,
        kind="special", special=special, name="zeta-capped",
    )


def even_finite_ones(player: int = 0) -> PayoffAutomaton:
    """Plays with only finitely many 1s at even coordinates (tail, not shift invariant)."""
    return PayoffAutomaton(
        players=(player,), sizes=(2,), n_states=2, initial=0,
        delta=lambda q, x: 1 - q, kind="cobuchi",
        label=lambda q, x, q2: 1 if (q == 0 and x[0] == 1) else 0,
        name="even-finite-ones",
    )


def first_action(player: int = 0, winning: int = 1, size: int = 2) -> PayoffAutomaton:
    """Payoff decided by the first action alone; deliberately not tail."""
    return PayoffAutomaton(
        players=(player,), sizes=(size,), n_states=3, initial=0,
        delta=lambda q, x: (1 if x[0] == winning else 2) if q == 0 else q,
        kind="buchi", label=lambda q, x, q2: 2 if q2 == 1 else 1, name="first-action",
    )


def always(players=(0,), sizes=(2,)) -> PayoffAutomaton:
    return PayoffAutomaton(
        players=tuple(players), sizes=tuple(sizes), n_states=1, initial=0,
        delta=lambda q, x: 0, kind="buchi", label=lambda q, x, q2: 2, name="always",
    )


def limsup_mean(weights: dict, players=(0,), sizes=(2,)) -> PayoffAutomaton:
    """Stateless limsup-mean objective with weight ``weights[local action]``."""
    for w in weights.values():
        if not 0.0 <= w <= 1.0:
            raise ValueError("limsup-mean weights must lie in [0, 1]")
    table = dict(weights)
    return PayoffAutomaton(
        players=tuple(players), sizes=tuple(sizes), n_states=1, initial=0,
        delta=lambda q, x: 0, kind="limsup-mean",
        label=lambda q, x, q2: table.get(tuple(x), 0.0), name="limsup-mean",
    )


def _negate_if(aut: PayoffAutomaton, negate: bool) -> PayoffAutomaton:
    if not negate:
        return aut
    if not aut.is_parity:
        raise ValueError("only parity-family objectives can be negated")
    inner = aut.label
    return PayoffAutomaton(
        players=aut.players, sizes=aut.sizes, n_states=aut.n_states, initial=aut.initial,
        delta=aut.delta, kind="parity", label=lambda q, x, q2: inner(q, x, q2) + 1,
        name="not-" + aut.name, meta=dict(aut.meta, negated=True),
    )


BUILTIN_NAMES = (
    "matching-pennies-io", "voorneveld-ev", "limsup-mean", "parity", "buchi",
    "cobuchi", "zeta-capped", "even-finite-ones", "first-action", "always",
)


def builtin_objective(name: str, player: int = 0, game: GameSpec | None = None, **kw) -> PayoffAutomaton:
    """Look up a named objective for ``player``.

    Tabulated kinds (``parity``, ``buchi``, ``cobuchi``, ``limsup-mean``)
    take a descriptor through ``kw``; see :func:`objective_from_descriptor`.
    """
    sizes = game.sizes if game is not None else None
    if name == "matching-pennies-io":
        players = tuple(kw.get("players", (0, 1)))
        sz = tuple(sizes[j] for j in players) if sizes else (2, 2)
        return matching_pennies_io(players, sz, negate=kw.get("negate", False))
    if name == "voorneveld-ev":
        if game is None:
            one, tail_is_one, size = 1, bool(kw.get("tail_is_one", False)), 2
        else:
            one = game.index(player, "1")
            tail_is_one = game.actions[-1][game.tail_default] == "1"
            size = game.sizes[player]
        return voorneveld_ev(player, one, tail_is_one, size)
    if name == "zeta-capped":
        return zeta_objective(player)
    if name == "even-finite-ones":
        return even_finite_ones(player)
    if name == "first-action":
        return first_action(player, int(kw.get("winning", 1)), sizes[player] if sizes else 2)
    if name == "always":
        return always((player,), (sizes[player],) if sizes else (2,))
    if name in ("parity", "buchi", "cobuchi", "limsup-mean"):
        desc = dict(kw, kind=name)
        if game is None:
            raise ValueError(f"{name} objectives need the game for their action labels")
        return objective_from_descriptor(desc, player, game)
    raise ValueError(f"unknown objective {name!r}")


# ---------------------------------------------------------------------------
# descriptors (game-spec file format)

_DESCRIPTOR_KEYS = {
    "kind", "name", "players", "states", "initial", "transitions", "accept",
    "reject", "priorities", "weights", "negate", "winning",
}


def objective_from_descriptor(desc, player: int, game: GameSpec) -> PayoffAutomaton:
    """Build player ``player``'s objective from a spec-file descriptor.

    ``{"kind": "special", "name": ...}`` selects a built-in; the tabulated
    kinds read ``players`` (default: the owner), ``states`` (default 1),
    ``initial``, ``transitions`` (``[from, pattern, to]`` rules, first match
    wins, unmatched letters self-loop) and one of ``accept`` / ``reject`` /
    ``priorities`` / ``weights``. A pattern lists one action label per
    automaton player, comma separated, with ``*`` as wildcard.
    """
    if isinstance(desc, str):
        desc = {"kind": "special", "name": desc}
    if not isinstance(desc, dict):
        raise GameSpecError(f"objective of player {player}: expected an object, got {type(desc).__name__}")
    unknown = set(desc) - _DESCRIPTOR_KEYS
    if unknown:
        raise GameSpecError(f"objective of player {player}: unknown fields {sorted(unknown)}")
    kind = desc.get("kind")
    if kind == "special":
        name = desc.get("name")
        extra = {k: v for k, v in desc.items() if k in ("players", "negate", "winning")}
        if "players" in extra:
            extra["players"] = [int(j) for j in extra["players"]]
        try:
            return builtin_objective(name, player, game, **extra)
        except ValueError as exc:
            raise GameSpecError(f"objective of player {player}: {exc}") from None
    if kind not in ("buchi", "cobuchi", "parity", "limsup-mean"):
        raise GameSpecError(f"objective of player {player}: unknown kind {kind!r}")

    players = tuple(int(j) for j in desc.get("players", [player]))
    for j in players:
        if not 0 <= j < game.n_players:
            raise GameSpecError(f"objective of player {player}: player {j} out of range")
    sizes = tuple(game.sizes[j] for j in players)
    n_states = int(desc.get("states", 1))
    initial = int(desc.get("initial", 0))
    if n_states < 1 or not 0 <= initial < n_states:
        raise GameSpecError(f"objective of player {player}: bad states/initial")

    def pattern(text):
        parts = [s.strip() for s in str(text).split(",")]
        if parts == ["*"]:
            parts = ["*"] * len(players)
        if len(parts) != len(players):
            raise GameSpecError(f"pattern {text!r} needs {len(players)} components")
        out = []
        for j, s in zip(players, parts):
            out.append(None if s == "*" else game.index(j, s))
        return tuple(out)

    def matches(pat, x):
        return all(p is None or p == v for p, v in zip(pat, x))

    rules = []
    for rule in desc.get("transitions", []):
        src, pat, dst = rule
        src, dst = int(src), int(dst)
        if not (0 <= src < n_states and 0 <= dst < n_states):
            raise GameSpecError(f"transition {rule} out of range")
        rules.append((src, pattern(pat), dst))

    table = {}
    for q in range(n_states):
        for x in itertools.product(*(range(k) for k in sizes)):
            dst = q
            for src, pat, d in rules:
                if src == q and matches(pat, x):
                    dst = d
                    break
            table[q, x] = dst

    def delta(q, x):
        return table[q, tuple(x)]

    def edge_set(items):
        states, edges = set(), []
        for item in items:
            if isinstance(item, (list, tuple)):
                edges.append((int(item[0]), pattern(item[1])))
            else:
                states.add(int(item))
        return states, edges

    def in_set(spec, q, x, q2):
        states, edges = spec
        return q2 in states or any(src == q and matches(pat, x) for src, pat in edges)

    name = desc.get("name", kind)
    if kind == "buchi":
        acc = edge_set(desc.get("accept", []))
        aut = PayoffAutomaton(players, sizes, n_states, initial, delta, "buchi",
                              lambda q, x, q2: 2 if in_set(acc, q, x, q2) else 1, name=name)
    elif kind == "cobuchi":
        rej = edge_set(desc.get("reject", []))
        aut = PayoffAutomaton(players, sizes, n_states, initial, delta, "cobuchi",
                              lambda q, x, q2: 1 if in_set(rej, q, x, q2) else 0, name=name)
    elif kind == "parity":
        raw = desc.get("priorities", {})
        prio = {int(k): int(v) for k, v in raw.items()}
        if any(v < 0 for v in prio.values()):
            raise GameSpecError("parity priorities must be nonnegative")
        aut = PayoffAutomaton(players, sizes, n_states, initial, delta, "parity",
                              lambda q, x, q2: prio.get(q2, 0), name=name)
    else:
        weights = []
        raw = desc.get("weights", {})
        items = raw.items() if isinstance(raw, dict) else [((r[0], r[1]), r[2]) for r in raw]
        for key, w in items:
            w = float(w)
            if not 0.0 <= w <= 1.0:
                raise GameSpecError("limsup-mean weights must lie in [0, 1]")
            if isinstance(key, tuple):
                weights.append((int(key[0]), pattern(key[1]), w))
            elif ":" in str(key):
                src, pat = str(key).split(":", 1)
                weights.append((int(src), pattern(pat), w))
            else:
                weights.append((None, pattern(key), w))

        def weight(q, x, q2):
            for src, pat, w in weights:
                if (src is None or src == q) and matches(pat, x):
                    return w
            return 0.0

        aut = PayoffAutomaton(players, sizes, n_states, initial, delta, "limsup-mean", weight, name=name)
    return _negate_if(aut, bool(desc.get("negate", False)))


# ---------------------------------------------------------------------------
# bounded prefix-independence certificate


@dataclass
class TailReport:
    tail: bool
    shift_invariant: bool
    bound: int
    tail_witness: tuple | None = None
    shift_witness: tuple | None = None

    def as_dict(self):
        return {
            "tail": self.tail,
            "shift_invariant": self.shift_invariant,
            "bound": self.bound,
            "tail_witness": self.tail_witness,
            "shift_witness": self.shift_witness,
        }


def _words(letters, max_len, min_len=0):
    for n in range(min_len, max_len + 1):
        yield from itertools.product(letters, repeat=n)


def tail_check(aut: PayoffAutomaton, bound: int) -> TailReport:
    """Exhaustively compare payoffs of lassos with prefix and cycle length <= ``bound``.

    Tail: plays ``u c^w`` and ``u' c^w`` with ``|u| = |u'|`` must score the
    same. Shift invariance additionally drops the length condition. A
    witness is a pair of local lassos ``((u, c), (u', c))`` with different
    payoffs.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    letters = list(aut.alphabet())
    automaton = aut.kind != "special"

    # one representative history per distinct "situation" at each depth
    layers: list[dict] = []
    frontier = {(aut.initial if automaton else ()): ()}
    for t in range(bound + 1):
        layers.append(frontier)
        if t == bound:
            break
        nxt = {}
        for key, h in frontier.items():
            for x in letters:
                h2 = h + (x,)
                k2 = aut.delta(key, x) if automaton else h2
                nxt.setdefault(k2, h2)
        frontier = nxt

    def value(h, c):
        return aut.value_from(aut.initial, h, c)

    tail_w = shift_w = None
    for c in _words(letters, bound, 1):
        ref = None
        for layer in layers:
            base = None
            for h in layer.values():
                v = value(h, c)
                if base is None:
                    base = (h, v)
                elif tail_w is None and v != base[1]:
                    tail_w = ((base[0], c), (h, c))
                if ref is None:
                    ref = (h, v)
                elif shift_w is None and v != ref[1]:
                    shift_w = ((ref[0], c), (h, c))
        if tail_w is not None and shift_w is not None:
            break
    return TailReport(tail_w is None, shift_w is None, bound, tail_w, shift_w)
