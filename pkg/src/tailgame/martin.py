"""Fictitious continuation values ("d ledgers") and their run-validation format.

A ledger assigns every history ``h`` a number ``d(h)`` in [0, 1] and a
reference prefix ``alpha(h)``. The one-shot function ``d^h`` maps a joint
action ``a`` to ``d(h, a)``. Ledgers are driven by a :class:`DGenerator`,
which builds the continuation function ``D_g`` of a subgame rooted at ``g``:

* without re-initiation the ledger simply follows ``D_empty``;
* with slack ``delta`` and a value oracle ``val``, a history where
  ``d(h) < val - delta`` becomes the new root (``alpha(h) = h``) and from
  the next stage the ledger follows ``D_h``, which starts at ``val - delta/2``.

Histories are never tabulated; values are computed by walking from the
root, with a bounded memo for repeated lookups.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import FiniteSupportProfile, GameSpec, History, JointAction, LassoPlay
from .objectives import PayoffAutomaton, PopulationStatistic, evaluate_lasso, minority_reward
from .oneshot import NormalFormGame, minmax_finitistic_bracket

MAX_DEPTH = 10_000


# scalar versions for the ledger, shared with the compiled Monte Carlo kernel
psi_minus = kernels.psi_minus.py_func
psi_plus = kernels.psi_plus.py_func


# ---------------------------------------------------------------------------
# generators


class DGenerator:
    """Continuation-value rule of a subgame: a state machine over joint actions.

    ``reads`` lists the players whose actions the rule looks at; the
    one-shot functions ``d^h`` only vary with those players.
    """

    reads: tuple[int, ...] = ()

    def root(self, value: float):
        raise NotImplementedError

    def step(self, state, a: JointAction):
        raise NotImplementedError

    def value(self, state) -> float:
        return float(state)


class PennyGenerator(DGenerator):
    """Diagonal outcomes move the value to ``psi+``, off-diagonal ones to ``psi-``."""

    def __init__(self, row: int = 0, col: int = 1):
        self.row, self.col = row, col
        self.reads = (row, col)

    def root(self, value):
        return float(value)

    def step(self, state, a):
        return psi_plus(state) if a[self.row] == a[self.col] else psi_minus(state)


class MinorityGenerator(DGenerator):
    """Zero is absorbing; otherwise the next value is the player's stage reward."""

    def __init__(self, game: GameSpec, player: int):
        self.game, self.player = game, player
        self.reads = (player,)
        self._one = game.index(player, "1")
        self._stat = PopulationStatistic.of((), (), game.actions[-1][game.tail_default] == "1").value

    def root(self, value):
        return float(value)

    def step(self, state, a):
        if state == 0.0:
            return 0.0
        # only the player's own action and the analytic tail matter
        return float(minority_reward(a[self.player] == self._one, self._stat))


@dataclass(frozen=True)
class LedgerEntry:
    depth: int
    d: float
    alpha: int  # length of the reference prefix
    state: object  # governing generator state
    reinit: bool  # whether this history re-initiated


class DLedger:
    """Lazy ``h -> (d(h), alpha(h))`` map driven by a generator.

    ``delta > 0`` together with ``val`` (a number, or a callable on
    histories) switches on re-initiation.
    """

    def __init__(self, generator: DGenerator, w: float, delta: float = 0.0, val=None,
                 max_depth: int = MAX_DEPTH, memo_size: int = 1 << 16):
        if not 0.0 <= w <= 1.0:
            raise ValueError("w must lie in [0, 1]")
        if delta < 0:
            raise ValueError("delta must be >= 0")
        if delta > 0 and val is None:
            raise ValueError("re-initiation needs a value oracle")
        self.gen = generator
        self.w = float(w)
        self.delta = float(delta)
        self._val = val
        self.max_depth = max_depth
        self._memo: OrderedDict = OrderedDict()
        self._memo_size = memo_size

    def val(self, h: History) -> float:
        v = self._val
        return float(v(h)) if callable(v) else float(v)

    def root_value(self, h: History) -> float:
        """``D_h(h)``: the starting value of a re-initiated subgame."""
        v = self.val(h)
        return v - 0.5 * self.delta if v >= 0.5 * self.delta else 0.0

    # -- transitions --------------------------------------------------------
    def _decorate(self, depth, d, alpha, state, h_fn):
        if self.delta > 0 and d < self.val(h_fn()) - self.delta:
            return LedgerEntry(depth, d, depth, self.gen.root(self.root_value(h_fn())), True)
        return LedgerEntry(depth, d, alpha, state, False)

    def root_entry(self) -> LedgerEntry:
        s = self.gen.root(self.w)
        return self._decorate(0, self.gen.value(s), 0, s, lambda: ())

    def child(self, e: LedgerEntry, a: JointAction, h: History | None = None) -> LedgerEntry:
        if e.depth + 1 > self.max_depth:
            raise ValueError(f"history longer than the ledger depth limit {self.max_depth}")
        s = self.gen.step(e.state, a)
        d = min(max(self.gen.value(s), 0.0), 1.0)
        hist = (lambda: tuple(h) + (tuple(a),)) if h is not None else (lambda: ())
        return self._decorate(e.depth + 1, d, e.alpha, s, hist)

    def entry(self, h: History) -> LedgerEntry:
        h = tuple(tuple(a) for a in h)
        if len(h) > self.max_depth:
            raise ValueError(f"history longer than the ledger depth limit {self.max_depth}")
        hit = self._memo.get(h)
        if hit is not None:
            self._memo.move_to_end(h)
            return hit
        k = len(h)
        while k > 0 and h[:k] not in self._memo:
            k -= 1
        e = self._memo[h[:k]] if k > 0 else self.root_entry()
        for t in range(k, len(h)):
            e = self.child(e, h[t], h[:t])
        self._remember(h, e)
        return e

    def _remember(self, h, e):
        self._memo[h] = e
        if len(self._memo) > self._memo_size:
            self._memo.popitem(last=False)

    def d(self, h: History) -> float:
        return self.entry(h).d

    def alpha(self, h: History) -> History:
        h = tuple(h)
        return h[: self.entry(h).alpha]

    def walk(self, h: History):
        """Entries of every prefix of ``h``, from the empty history on."""
        e = self.root_entry()
        yield e
        for t, a in enumerate(h):
            e = self.child(e, a, tuple(h[:t]))
            yield e

    # -- one-shot functions -------------------------------------------------
    def one_shot(self, h: History, players, sizes, defaults: JointAction) -> NormalFormGame:
        """``d^h`` tabulated over the joint actions of ``players`` (others at ``defaults``).

        Every player of the returned game carries the same tensor; only the
        ledger owner's minmax value is meaningful.
        """
        e = self.entry(h)
        return self.one_shot_from(e, players, sizes, defaults, h)

    def one_shot_from(self, e, players, sizes, defaults, h=None) -> NormalFormGame:
        players, sizes = tuple(players), tuple(sizes)
        base = list(defaults)
        pay = np.zeros((1,) + sizes)
        for x in itertools.product(*(range(k) for k in sizes)):
            for j, v in zip(players, x):
                base[j] = v
            pay[(0,) + x] = self.child(e, tuple(base), h).d
        return _single_payoff_game(players, sizes, pay[0])

    def trajectory(self, play, stages: int):
        """Rows ``(stage, d, alpha_changed, r_t(a^t))`` along the first ``stages`` stages of ``play``."""
        h = tuple(play.history(stages + 1)) if isinstance(play, LassoPlay) else tuple(play)[: stages + 1]
        rows = []
        entries = list(self.walk(h))
        for t in range(min(stages, len(h))):
            e = entries[t]
            rows.append({"stage": t, "d": e.d, "alpha_changed": e.reinit, "r": entries[t + 1].d})
        return rows


def _single_payoff_game(players, sizes, tensor) -> NormalFormGame:
    """Normal-form game in which every player's payoff tensor is ``tensor``.

    Only the first player's tensor is used (for its minmax value); copying
    it keeps the container well formed.
    """
    pay = np.broadcast_to(tensor, (len(players),) + tuple(sizes)).copy()
    return NormalFormGame(tuple(players), tuple(sizes), pay)


def d_matching_pennies(w: float, row: int = 0, col: int = 1, **kw) -> DLedger:
    if not 0.0 < w < 1.0:
        raise ValueError("w must lie in (0, 1)")
    return DLedger(PennyGenerator(row, col), w, **kw)


def d_voorneveld(w: float, game: GameSpec, player: int, **kw) -> DLedger:
    if not 0.0 < w < 1.0:
        raise ValueError("w must lie in (0, 1)")
    return DLedger(MinorityGenerator(game, player), w, **kw)


def d_with_reinit(generator: DGenerator, w: float, delta: float, val_oracle, **kw) -> DLedger:
    """Ledger that re-roots at ``h`` once ``d(h) < val(h) - delta``."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    return DLedger(generator, w, delta=delta, val=val_oracle, **kw)


def penny_matrix(x: float) -> np.ndarray:
    """The 2x2 one-shot function of the pennies ledger at ``d(h) = x``."""
    hi, lo = psi_plus(x), psi_minus(x)
    return np.array([[hi, lo], [lo, hi]])


def lasso_limsup(ledger: DLedger, p: LassoPlay, max_passes: int = 20_000) -> float:
    """``limsup_t d(h^t(p))`` by running whole cycle passes until the state repeats.

    Runs outside the ledger's depth limit; if no repetition shows up within
    ``max_passes`` the maximum over the last pass is returned.
    """
    e = ledger.root_entry()
    for a in p.prefix:
        e = _step_unbounded(ledger, e, a)
    seen = {}
    passes = []
    for k in range(max_passes):
        key = (e.d, e.state, e.alpha == e.depth)
        if key in seen:
            return max(max(ps) for ps in passes[seen[key]:])
        seen[key] = k
        ds = []
        for a in p.cycle:
            e = _step_unbounded(ledger, e, a)
            ds.append(e.d)
        passes.append(ds)
    return max(passes[-1])


def _step_unbounded(ledger, e, a):
    s = ledger.gen.step(e.state, a)
    d = min(max(ledger.gen.value(s), 0.0), 1.0)
    return ledger._decorate(e.depth + 1, d, e.alpha, s, lambda: ())


# ---------------------------------------------------------------------------
# condition checks


def val_bracket(game: NormalFormGame, player: int, **kw):
    return minmax_finitistic_bracket(game, player, **kw)


@dataclass
class LedgerReport:
    samples: int
    horizon: int
    histories_checked: int
    profile_ok: bool
    profile_witness: tuple | None
    bound_ok: bool
    bound_worst: float
    floor_ok: bool | None
    floor_worst: float | None
    increment_mean: float
    increment_se: float
    conditional_increment_mean: float
    submartingale_ok: bool
    reinit_mean: float
    reinit_se: float
    reinit_bound: float | None
    reinit_gap_min: float | None
    payoff_ok: bool | None
    payoff_details: list = field(default_factory=list)

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items()}


def check_ledger_conditions(ledger: DLedger, profile: FiniteSupportProfile, player: int, window, sizes,
                       defaults, n_samples: int, horizon: int, seed: int, objective: PayoffAutomaton | None = None,
                       tol: float = 1e-9, sub_tol: float = 1e-3, payoff_histories: int = 5,
                       payoff_samples: int = 200, check_every: int = 1) -> LedgerReport:
    """Sample plays of ``profile`` and check the ledger conditions along them.

    At every sampled history (every ``check_every``-th stage):

    * profile: ``val^F(d^h) <= E_sigma(h)[d^h]`` (the profile defends the ledger),
    * bound: ``d(h) <= val^F(d^h)``,
    * floor (re-initiation on): ``val(h) - delta <= val^F(d^h)``.

    ``val^F`` comes from the one-shot bracket, using its lower end for
    claims that it is large and its upper end for claims that it is small.

    The submartingale property is checked on the conditional expected
    increments ``E_sigma(h)[d^h] - d(h)`` (the realized increments are
    reported with their standard error). The payoff check compares, at a
    few sampled histories, ``val^F(d^h)`` with the Monte Carlo mean of
    ``f_i`` over continuations, each continuation scored on its lasso
    truncation; it is skipped once the profile check fails.
    """
    rng = np.random.default_rng(seed)
    window, sizes = tuple(window), tuple(sizes)
    profile_ok, profile_w = True, None
    bound_worst, floor_worst = math.inf, math.inf
    incs, conds, counts, gaps = [], [], [], []
    checked = 0
    checkpoints = []
    cache = {}

    def bracket_of(e, h):
        key = (e.d, e.state, e.alpha == e.depth)
        b = cache.get(key)
        if b is None:
            g = ledger.one_shot_from(e, window, sizes, defaults, h)
            b = cache[key] = val_bracket(g, player)
        return b

    for k in range(n_samples):
        h: list = []
        e = ledger.root_entry()
        reinit = int(e.reinit)
        for t in range(horizon):
            stage = profile.at(tuple(h))
            if t % check_every == 0:
                b = bracket_of(e, tuple(h))
                exp = sum(p * ledger.child(e, a).d for a, p in stage.outcomes())
                checked += 1
                if b.upper > exp + tol and profile_ok:
                    profile_ok, profile_w = False, (tuple(h), b.upper, exp)
                bound_worst = min(bound_worst, b.lower - e.d)
                if ledger.delta > 0:
                    floor_worst = min(floor_worst, b.lower - (ledger.val(tuple(h)) - ledger.delta))
                    if e.reinit:
                        gaps.append(b.lower - e.d - 0.5 * ledger.delta)
                conds.append(exp - e.d)
                if k < payoff_histories and t == horizon // 4:
                    checkpoints.append((tuple(h), b))
            a = stage.sample(rng)
            e2 = ledger.child(e, a, tuple(h))
            incs.append(e2.d - e.d)
            h.append(a)
            e = e2
            reinit += int(e.reinit)
        counts.append(reinit)

    incs = np.array(incs)
    conds = np.array(conds)
    counts = np.array(counts, dtype=float)
    cond_mean = float(conds.mean()) if conds.size else 0.0
    payoff_ok, payoff_rows = None, []
    if objective is not None and profile_ok:
        for hk, b in checkpoints:
            vals = []
            for _ in range(payoff_samples):
                hh = list(hk)
                for _ in range(horizon):
                    hh.append(profile.at(tuple(hh)).sample(rng))
                vals.append(evaluate_lasso(objective, lasso_truncation(tuple(hh))))
            vals = np.array(vals)
            se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            ok = float(vals.mean()) >= b.lower - 3 * se - tol
            payoff_rows.append({"stage": len(hk), "val_lower": b.lower, "mean_payoff": float(vals.mean()), "se": se, "ok": ok})
        payoff_ok = all(r["ok"] for r in payoff_rows)
    return LedgerReport(
        samples=n_samples, horizon=horizon, histories_checked=checked,
        profile_ok=profile_ok, profile_witness=profile_w,
        bound_ok=bound_worst >= -tol, bound_worst=float(bound_worst),
        floor_ok=(floor_worst >= -tol) if ledger.delta > 0 else None,
        floor_worst=float(floor_worst) if ledger.delta > 0 else None,
        increment_mean=float(incs.mean()) if incs.size else 0.0,
        increment_se=float(incs.std(ddof=1) / math.sqrt(incs.size)) if incs.size > 1 else 0.0,
        conditional_increment_mean=cond_mean,
        submartingale_ok=cond_mean >= -sub_tol,
        reinit_mean=float(counts.mean()),
        reinit_se=float(counts.std(ddof=1) / math.sqrt(counts.size)) if counts.size > 1 else 0.0,
        reinit_bound=(2.0 / ledger.delta) if ledger.delta > 0 else None,
        reinit_gap_min=float(min(gaps)) if gaps else None,
        payoff_ok=payoff_ok, payoff_details=payoff_rows,
    )


def lasso_truncation(h: History, window: int | None = None) -> LassoPlay:
    """Score a finite play as the lasso ``h[:T-W] (h[T-W:])^omega`` (``W = T/2`` by default)."""
    T = len(h)
    if T == 0:
        raise ValueError("empty history")
    W = max(1, T // 2 if window is None else min(window, T))
    return LassoPlay(h[: T - W], h[T - W:])


@dataclass
class PennyMC:
    plays: int
    horizon: int
    reinit_counts: np.ndarray
    increment_mean: float
    increment_se: float
    conditional_increment_mean: float
    min_m1: float
    min_reinit_gap: float

    @property
    def reinit_mean(self):
        return float(self.reinit_counts.mean())

    @property
    def reinit_se(self):
        c = self.reinit_counts
        return float(c.std(ddof=1) / math.sqrt(len(c))) if len(c) > 1 else 0.0


def penny_ledger_mc(w: float, val: float, delta: float, p_row: float, q_col: float, plays: int,
                    horizon: int, seed: int, check_values: bool = True) -> PennyMC:
    """Vectorized Monte Carlo of the pennies ledger (compiled kernel).

    ``p_row`` / ``q_col`` are the probabilities of the first action of the
    row and column player. Uniforms are drawn up front so the compiled and
    pure-Python kernels consume identical randomness.
    """
    rng = np.random.default_rng(seed)
    u = rng.random((plays, horizon, 2))
    counts, s, sq, cond, m1, gap = kernels.psi_ledger_mc(float(w), float(val), float(delta), float(p_row),
                                                        float(q_col), u, check_values)
    n = plays * horizon
    mean = s / n
    var = max(sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return PennyMC(plays, horizon, counts, float(mean), float(math.sqrt(var / n)), float(cond / n),
                   float(m1), float(gap))


# ---------------------------------------------------------------------------
# runs of the auxiliary perfect-information game


@dataclass
class MRun:
    """``r_0, a^0, r_1, a^1, ...``: one-shot payoff tensors for ``player`` and joint actions.

    Each ``r_t`` is indexed by the joint action of ``players`` (the active
    window, ``player`` among them); ``a^t`` are tuples over the same window.
    """

    player: int
    players: tuple[int, ...]
    sizes: tuple[int, ...]
    payoffs: list[np.ndarray]
    actions: list[tuple[int, ...]]

    def game(self, t: int) -> NormalFormGame:
        return _single_payoff_game(self.players, self.sizes, self.payoffs[t])

    def realized(self) -> list[float]:
        return [float(self.payoffs[t][tuple(a)]) for t, a in enumerate(self.actions)]

    def to_dict(self):
        return {
            "player": self.player,
            "players": list(self.players),
            "sizes": list(self.sizes),
            "steps": [{"r": np.asarray(r).round(15).tolist(), "a": list(a) if a is not None else None}
                      for r, a in itertools.zip_longest(self.payoffs, self.actions)],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        sizes = tuple(int(s) for s in data["sizes"])
        pays, acts = [], []
        for step in data["steps"]:
            r = np.asarray(step["r"], dtype=float)
            if r.shape != sizes:
                raise ValueError(f"payoff tensor of shape {r.shape}, expected {sizes}")
            pays.append(r)
            if step.get("a") is not None:
                acts.append(tuple(int(x) for x in step["a"]))
        return cls(int(data["player"]), tuple(int(j) for j in data["players"]), sizes, pays, acts)


def extract_m_run(ledger: DLedger, h: History, player: int, players, sizes, defaults) -> MRun:
    """The run ``r_t = d^{h^t}``, ``a^t`` = window part of ``h[t]``."""
    players, sizes = tuple(players), tuple(sizes)
    pays, acts = [], []
    for t, e in enumerate(ledger.walk(tuple(h))):
        g = ledger.one_shot_from(e, players, sizes, defaults, tuple(h[:t]))
        pays.append(g.payoffs[0])
        if t < len(h):
            acts.append(tuple(h[t][j] for j in players))
    return MRun(player, players, sizes, pays, acts)


@dataclass
class RunVerdict:
    ok: bool
    first_bad: int | None
    reason: str
    realized: list

    def as_dict(self):
        return {"ok": self.ok, "first_bad": self.first_bad, "reason": self.reason, "realized": self.realized}


def validate_m_run(run: MRun, w: float, bracket_oracle=None, tol: float = 1e-9) -> RunVerdict:
    """Legality of a run for player I (proving ``val >= w``) against player II.

    Player I must open with ``val^F(r_0) >= w`` and keep
    ``val^F(r_{t+1}) >= r_t(a^t)``; player II must pick ``r_t(a^t) > 0``.
    ``val^F`` claims of the form "at least" are certified with the
    bracket's lower end. The first offending index is reported.
    """
    oracle = bracket_oracle or (lambda g, i: minmax_finitistic_bracket(g, i))
    realized = run.realized()
    lows = [oracle(run.game(t), run.player).lower for t in range(len(run.payoffs))]
    if lows[0] < w - tol:
        return RunVerdict(False, 0, f"player I: val(r_0) = {lows[0]:.12g} < w = {w:.12g}", realized)
    for t, x in enumerate(realized):
        if not x > 0:
            return RunVerdict(False, t, f"player II: r_{t}(a^{t}) = {x:.12g} is not positive", realized)
        if t + 1 < len(lows) and lows[t + 1] < x - tol:
            return RunVerdict(False, t + 1,
                              f"player I: val(r_{t + 1}) = {lows[t + 1]:.12g} < r_{t}(a^{t}) = {x:.12g}", realized)
    return RunVerdict(True, None, "legal", realized)


# name used by the module's interface description
check_M_conditions = check_ledger_conditions
