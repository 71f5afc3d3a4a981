"""Players, actions, histories, lasso plays and finite-support profiles.

The countable population is truncated to ``n_players`` concrete players.
Every player beyond the truncation is treated as permanently playing the
game's ``tail_default`` action; objectives that look at population
statistics account for that tail analytically.

Actions are stored as indices into each player's action list. A joint
action is a tuple of indices of length ``n_players``; a history is a tuple
of joint actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

JointAction = tuple[int, ...]
History = tuple[JointAction, ...]

PROB_TOL = 1e-12


class GameSpecError(ValueError):
    """Raised when raw game data violates a structural invariant."""


@dataclass(frozen=True)
class GameSpec:
    n_players: int
    actions: tuple[tuple[str, ...], ...]
    defaults: tuple[int, ...]
    objectives: tuple  # one PayoffAutomaton per player
    eps: tuple[float, ...]
    tail_default: int = 0
    name: str = ""

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    def label(self, player: int, action: int) -> str:
        return self.actions[player][action]

    def index(self, player: int, label) -> int:
        try:
            return self.actions[player].index(str(label))
        except ValueError:
            raise GameSpecError(
                f"action {label!r} not in A_{player} = {list(self.actions[player])}"
            ) from None

    def default_joint(self) -> JointAction:
        return self.defaults

    def validate_joint(self, a: Sequence[int]) -> JointAction:
        a = tuple(int(x) for x in a)
        if len(a) != self.n_players:
            raise GameSpecError(f"joint action has {len(a)} components, expected {self.n_players}")
        for i, (x, k) in enumerate(zip(a, self.sizes)):
            if not 0 <= x < k:
                raise GameSpecError(f"action index {x} out of range for player {i}")
        return a

    def joint_labels(self, a: JointAction) -> list[str]:
        return [self.actions[i][x] for i, x in enumerate(a)]


def make_game(raw: Mapping) -> GameSpec:
    """Validate raw game data and build a :class:`GameSpec`.

    ``raw`` holds ``n_players``, ``actions`` (one list shared by everybody or
    one list per player), ``defaults`` (a label or a list of labels),
    ``objectives`` (automata or descriptors, uniform or per player) and
    ``eps`` (a number or a list). Descriptors are turned into automata by
    :func:`tailgame.objectives.objective_from_descriptor`.
    """
    from .objectives import PayoffAutomaton, objective_from_descriptor

    try:
        n = int(raw["n_players"])
    except KeyError:
        raise GameSpecError("missing field 'n_players'") from None
    if n < 1:
        raise GameSpecError("n_players must be >= 1")

    actions = _per_player(raw.get("actions"), n, "actions", nested=True)
    actions = tuple(tuple(str(x) for x in acts) for acts in actions)
    for i, acts in enumerate(actions):
        if not acts:
            raise GameSpecError(f"empty action set for player {i}")
        if len(set(acts)) != len(acts):
            raise GameSpecError(f"duplicate actions for player {i}")

    raw_defaults = raw.get("defaults", None)
    if raw_defaults is None:
        labels = [acts[0] for acts in actions]
    else:
        labels = _per_player(raw_defaults, n, "defaults")
    defaults = []
    for i, lab in enumerate(labels):
        lab = str(lab)
        if lab not in actions[i]:
            raise GameSpecError(
                f"default action {lab!r} of player {i} not in A_{i} = {list(actions[i])}"
            )
        defaults.append(actions[i].index(lab))

    eps = [float(e) for e in _per_player(raw.get("eps"), n, "eps")]
    for i, e in enumerate(eps):
        if not e > 0:
            raise GameSpecError(f"eps_{i} must be > 0, got {e}")

    tail_default = str(raw.get("tail_default", labels[-1] if labels else 0))
    # the tail shares the last player's action labels
    if tail_default not in actions[-1]:
        raise GameSpecError(f"tail_default {tail_default!r} not a valid action label")
    tail_idx = actions[-1].index(tail_default)

    shell = GameSpec(n, actions, tuple(defaults), (), tuple(eps), tail_idx, str(raw.get("name", "")))
    objs = _per_player(raw.get("objectives"), n, "objectives")
    built = []
    for i, desc in enumerate(objs):
        if isinstance(desc, PayoffAutomaton):
            built.append(desc)
        else:
            built.append(objective_from_descriptor(desc, i, shell))
    return GameSpec(n, actions, tuple(defaults), tuple(built), tuple(eps), tail_idx, shell.name)


def _per_player(value, n, name, nested=False):
    if value is None:
        raise GameSpecError(f"missing field {name!r}")
    if isinstance(value, (list, tuple)):
        if nested:
            if value and all(isinstance(v, (list, tuple)) for v in value):
                if len(value) != n:
                    raise GameSpecError(f"{name}: expected {n} entries, got {len(value)}")
                return list(value)
            return [list(value)] * n
        if len(value) != n:
            raise GameSpecError(f"{name}: expected {n} entries, got {len(value)}")
        return list(value)
    return [value] * n


@dataclass(frozen=True)
class LassoPlay:
    """The infinite play ``prefix + cycle + cycle + ...``."""

    prefix: History
    cycle: History

    def __post_init__(self):
        if len(self.cycle) < 1:
            raise ValueError("lasso cycle must be nonempty")
        object.__setattr__(self, "prefix", tuple(tuple(a) for a in self.prefix))
        object.__setattr__(self, "cycle", tuple(tuple(a) for a in self.cycle))

    def __len__(self):
        return len(self.prefix) + len(self.cycle)

    def at(self, t: int) -> JointAction:
        if t < len(self.prefix):
            return self.prefix[t]
        return self.cycle[(t - len(self.prefix)) % len(self.cycle)]

    def history(self, t: int) -> History:
        return tuple(self.at(k) for k in range(t))

    def next_position(self, pos: int) -> int:
        """Successor of a position in the folded index ``0..len-1``."""
        pos += 1
        if pos == len(self):
            return len(self.prefix)
        return pos

    def rotate(self, k: int = 1) -> "LassoPlay":
        k %= len(self.cycle)
        return LassoPlay(self.prefix, self.cycle[k:] + self.cycle[:k])

    def unroll(self, extra: int = 1) -> "LassoPlay":
        """Same play with the first ``extra`` cycle letters moved into the prefix."""
        pre = self.prefix + tuple(self.at(len(self.prefix) + k) for k in range(extra))
        return LassoPlay(pre, self.cycle[extra % len(self.cycle):] + self.cycle[: extra % len(self.cycle)])


def subgame_shift(h: History, p: LassoPlay) -> LassoPlay:
    """The play ``(h, p)``: ``h`` followed by ``p``."""
    return LassoPlay(tuple(h) + p.prefix, p.cycle)


@dataclass(frozen=True)
class MixedAction:
    probs: tuple

    def __post_init__(self):
        probs = tuple(self.probs)
        if not probs:
            raise ValueError("mixed action needs at least one action")
        if any(p < 0 for p in probs):
            raise ValueError("negative probability")
        total = sum(probs)
        if isinstance(total, Fraction):
            if total != 1:
                raise ValueError(f"probabilities sum to {total}, not 1")
        elif abs(float(total) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def pure(cls, action: int, size: int) -> "MixedAction":
        return cls(tuple(1 if k == action else 0 for k in range(size)))

    @classmethod
    def uniform(cls, size: int) -> "MixedAction":
        return cls(tuple(Fraction(1, size) for _ in range(size)))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, p in enumerate(self.probs) if p > 0)

    def is_pure(self) -> bool:
        return len(self.support) == 1

    def as_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])


@dataclass(frozen=True)
class StageProfile:
    """What everybody does at one history.

    ``pure`` fixes one action per player; players listed in ``mixed``
    randomize instead (their ``pure`` entry is ignored).
    """

    pure: JointAction
    mixed: Mapping[int, MixedAction] = field(default_factory=dict)

    @property
    def randomizers(self) -> tuple[int, ...]:
        return tuple(sorted(i for i, m in self.mixed.items() if not m.is_pure()))

    def prob(self, a: JointAction) -> float:
        p = 1.0
        for i, x in enumerate(a):
            m = self.mixed.get(i)
            if m is None:
                if x != self.pure[i]:
                    return 0.0
            else:
                p *= float(m.probs[x]) if x < len(m.probs) else 0.0
                if p == 0.0:
                    return 0.0
        return p

    def outcomes(self):
        """Yield ``(joint_action, probability)`` over the finite support."""
        players = sorted(self.mixed)
        base = list(self.pure)
        supports = [self.mixed[i].support for i in players]

        def rec(k, prob):
            if k == len(players):
                yield tuple(base), prob
                return
            i = players[k]
            for x in supports[k]:
                base[i] = x
                yield from rec(k + 1, prob * float(self.mixed[i].probs[x]))

        yield from rec(0, 1.0)

    def sample(self, rng: np.random.Generator) -> JointAction:
        a = list(self.pure)
        for i in sorted(self.mixed):
            probs = self.mixed[i].as_array()
            a[i] = int(rng.choice(len(probs), p=probs / probs.sum()))
        return tuple(a)


class FiniteSupportProfile:
    """A strategy profile given by a rule ``history -> StageProfile``.

    Strategies are never tabulated; ``rule`` is evaluated on demand.
    """

    def __init__(self, n_players: int, rule: Callable[[History], StageProfile]):
        self.n_players = n_players
        self.rule = rule

    def at(self, h: History) -> StageProfile:
        return self.rule(tuple(h))

    def randomizers(self, h: History) -> tuple[int, ...]:
        return self.at(h).randomizers

    @classmethod
    def stationary(cls, stage: StageProfile) -> "FiniteSupportProfile":
        return cls(len(stage.pure), lambda h: stage)


def history_probability(profile: FiniteSupportProfile, h: History) -> float:
    p = 1.0
    for t, a in enumerate(h):
        p *= profile.at(h[:t]).prob(tuple(a))
        if p == 0.0:
            return 0.0
    return p


def sample_play(profile: FiniteSupportProfile, horizon: int, seed) -> tuple[History, float]:
    """Sample a history of length ``horizon`` and its probability."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    rng = np.random.default_rng(seed)
    h: list[JointAction] = []
    prob = 1.0
    for _ in range(horizon):
        stage = profile.at(tuple(h))
        a = stage.sample(rng)
        prob *= stage.prob(a)
        h.append(a)
    return tuple(h), prob


@dataclass(frozen=True)
class StaircaseSchedule:
    """Player ``i`` becomes active at stage ``i``; before that it plays its default."""

    n_players: int
    defaults: JointAction

    def active(self, t: int) -> range:
        return range(min(t, self.n_players - 1) + 1)

    def is_active(self, i: int, t: int) -> bool:
        return i <= t

    def complete(self, partial, t: int) -> JointAction:
        return staircase_complete(partial, t, self)


def staircase_complete(partial, t: int, schedule: StaircaseSchedule) -> JointAction:
    """Extend an assignment of the active players at stage ``t`` by defaults.

    ``partial`` is a sequence over players ``0..min(t, N-1)`` or a mapping
    from player to action. Full joint actions are returned unchanged when
    they already respect the staircase.
    """
    n = schedule.n_players
    k = min(t, n - 1) + 1
    if isinstance(partial, Mapping):
        items = dict(partial)
    else:
        seq = tuple(partial)
        if len(seq) == n and k < n:
            if any(seq[j] != schedule.defaults[j] for j in range(k, n)):
                raise ValueError(f"inactive players at stage {t} must play defaults")
            seq = seq[:k]
        items = dict(enumerate(seq))
    bad = sorted(j for j in items if not 0 <= j < k)
    if bad:
        raise ValueError(f"players {bad} are not active at stage {t}")
    if len(items) != k:
        raise ValueError(f"assignment must cover exactly players 0..{k - 1}")
    return tuple(items[j] if j < k else schedule.defaults[j] for j in range(n))
