"""Zero-sum analysis of one player against the rest.

The deviator ``i`` faces a coalition made of the other players its
objective reads (the *window*); players outside the window sit at their
defaults and cannot influence ``i``'s payoff. The coalition is solved as a
single correlated minimizer over window joint actions, which gives the
correlated relaxation of the finitistic minmax value. Punishment
strategies are then realized as independent mixed actions and audited by
solving the deviator's decision process exactly.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .core import GameSpec, MixedAction
from .objectives import PayoffAutomaton

log = logging.getLogger(__name__)

INNER_TOL = 1e-6
OUTER_TOL = 1e-3
MAX_ITER = 100_000
MAX_COLUMNS = 4096


def matrix_stage_value(matrix):
    """Value of a zero-sum matrix game (row maximizes) and both optimal mixed actions."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("expected a nonempty 2-d matrix")
    v, x, y = kernels.solve_matrix_game(np.ascontiguousarray(M))
    return float(v), x, y


# ---------------------------------------------------------------------------
# concurrent game on the deviator's objective automaton


@dataclass
class ConcurrentGame:
    player: int
    objective: PayoffAutomaton
    window: tuple[int, ...]
    states: list[int]
    n_rows: int
    columns: list[tuple[int, ...]]
    nxt: np.ndarray
    label: np.ndarray
    window_sizes: tuple[int, ...] = ()

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def initial(self) -> int:
        return self.states.index(self.objective.initial)

    def local_action(self, b: int, col: tuple[int, ...], defaults) -> tuple:
        out = []
        for j in self.objective.players:
            if j == self.player:
                out.append(b)
            elif j in self.window:
                out.append(col[self.window.index(j)])
            else:
                out.append(defaults[j])
        return tuple(out)


def build_concurrent_game(game: GameSpec, player: int, objective: PayoffAutomaton | None = None,
                          max_columns: int = MAX_COLUMNS) -> ConcurrentGame:
    aut = objective if objective is not None else game.objectives[player]
    if aut.kind == "special":
        raise ValueError(f"objective {aut.name!r} has no finite-state solver")
    window = tuple(j for j in aut.players if j != player)
    wsizes = tuple(game.sizes[j] for j in window)
    n_cols = int(np.prod(wsizes)) if window else 1
    if n_cols > max_columns:
        raise ValueError(f"coalition window of player {player} has {n_cols} joint actions (> {max_columns})")
    columns = list(itertools.product(*(range(k) for k in wsizes)))
    n_rows = game.sizes[player]

    cg = ConcurrentGame(player, aut, window, [], n_rows, columns,
                        np.zeros(0), np.zeros(0), wsizes)
    index = {aut.initial: 0}
    order = [aut.initial]
    edges = {}
    k = 0
    while k < len(order):
        q = order[k]
        k += 1
        for b in range(n_rows):
            for c, col in enumerate(columns):
                x = cg.local_action(b, col, game.defaults)
                q2, lab = aut.edge(q, x)
                if q2 not in index:
                    index[q2] = len(order)
                    order.append(q2)
                edges[q, b, c] = (q2, lab)
    S = len(order)
    nxt = np.zeros((S, n_rows, len(columns)), dtype=np.int64)
    dtype = np.int64 if aut.is_parity else np.float64
    label = np.zeros((S, n_rows, len(columns)), dtype=dtype)
    for (q, b, c), (q2, lab) in edges.items():
        nxt[index[q], b, c] = index[q2]
        label[index[q], b, c] = lab
    cg.states = order
    cg.nxt = nxt
    cg.label = label
    return cg


@dataclass
class ValueTable:
    values: np.ndarray
    iterations: int
    residual: float
    converged: bool
    kind: str
    row_strategies: np.ndarray | None = None
    col_strategies: np.ndarray | None = None
    candidates: list = field(default_factory=list)

    def as_dict(self, states=None):
        states = states if states is not None else range(len(self.values))
        return {
            "kind": self.kind,
            "values": {str(q): float(v) for q, v in zip(states, self.values)},
            "iterations": self.iterations,
            "residual": float(self.residual),
            "converged": self.converged,
        }


def _compress_priorities(label):
    distinct = sorted(set(int(p) for p in np.unique(label)))
    ranks = {}
    r = distinct[0] % 2
    prev = distinct[0]
    for p in distinct:
        if p % 2 != prev % 2:
            r += 1
        ranks[p] = r
        prev = p
    out = np.vectorize(ranks.get, otypes=[np.int64])(label)
    return out, distinct[0] % 2, r


def parity_value(cg: ConcurrentGame, tol: float = INNER_TOL, outer_tol: float = OUTER_TOL,
                 max_iter: int = MAX_ITER, keep_candidates: int = 32) -> ValueTable:
    """Nested fixpoint ``eta_d X_d ... eta_0 X_0 . Pre(X_priority)``.

    Even levels are greatest fixpoints started at 1, odd levels least
    fixpoints started at 0; the highest priority is outermost. Each level's
    iterates are checked for monotonicity.
    """
    if not cg.objective.is_parity:
        raise ValueError("parity_value needs a parity-family objective")
    lvl, kmin, kmax = _compress_priorities(cg.label)
    S = cg.n_states
    X = np.zeros((kmax + 1, S))
    weight = np.zeros(cg.nxt.shape)
    stats = {"iters": 0, "residual": 0.0, "converged": True}
    trace: list[np.ndarray] = []
    last = {}

    def pre():
        vals, xs, ys = kernels.pre_operator(cg.nxt, lvl, weight, X)
        last["xs"], last["ys"] = xs, ys
        trace.append(ys)
        return vals

    # the innermost loop restarts its trace on every outer pass, so the
    # candidates kept are those of the final pass
    def fix(k):
        if k == kmin:
            trace.clear()
            X[k] = 1.0 if k % 2 == 0 else 0.0
            residual = 0.0
            for _ in range(max_iter):
                new = pre()
                stats["iters"] += 1
                diff = new - X[k]
                if k % 2 == 0 and diff.max() > 1e-9:
                    raise RuntimeError(f"greatest fixpoint at level {k} increased by {diff.max():.3g}")
                if k % 2 == 1 and diff.min() < -1e-9:
                    raise RuntimeError(f"least fixpoint at level {k} decreased by {-diff.min():.3g}")
                residual = float(np.abs(diff).max()) if S else 0.0
                X[k] = new
                if residual < tol:
                    break
            else:
                stats["converged"] = False
            if k == kmax:
                stats["residual"] = residual
            return X[k].copy()
        X[k] = 1.0 if k % 2 == 0 else 0.0
        residual = 0.0
        for _ in range(max_iter):
            new = fix(k - 1)
            diff = new - X[k]
            if k % 2 == 0 and diff.max() > 1e-9:
                raise RuntimeError(f"greatest fixpoint at level {k} increased by {diff.max():.3g}")
            if k % 2 == 1 and diff.min() < -1e-9:
                raise RuntimeError(f"least fixpoint at level {k} decreased by {-diff.min():.3g}")
            residual = float(np.abs(diff).max()) if S else 0.0
            X[k] = new
            if residual < outer_tol:
                break
        else:
            stats["converged"] = False
        if k == kmax:
            stats["residual"] = residual
        return X[k].copy()

    values = fix(kmax)
    values = np.clip(values, 0.0, 1.0)
    cands = _thin(trace, keep_candidates)
    return ValueTable(values, stats["iters"], stats["residual"], stats["converged"],
                      cg.objective.kind, last.get("xs"), last.get("ys"), cands)


def _thin(seq, k):
    if len(seq) <= k:
        return list(seq)
    idx = np.unique(np.linspace(0, len(seq) - 1, k).round().astype(int))
    return [seq[i] for i in idx]


def buchi_value(cg, tol=INNER_TOL, max_iter=MAX_ITER):
    if cg.objective.kind != "buchi":
        raise ValueError("not a Buchi objective")
    return parity_value(cg, tol, max_iter=max_iter)


def cobuchi_value(cg, tol=INNER_TOL, max_iter=MAX_ITER):
    if cg.objective.kind != "cobuchi":
        raise ValueError("not a co-Buchi objective")
    return parity_value(cg, tol, max_iter=max_iter)


def limsup_mean_value(cg: ConcurrentGame, tol: float = 1e-4, max_iter: int = 2000,
                      keep_candidates: int = 8) -> ValueTable:
    """Average of the n-stage values, ``V_n / n``, until successive averages agree within ``tol``."""
    if cg.objective.kind != "limsup-mean":
        raise ValueError("not a limsup-mean objective")
    S = cg.n_states
    lvl = np.zeros(cg.nxt.shape, dtype=np.int64)
    weight = np.ascontiguousarray(cg.label, dtype=float)
    V = np.zeros((1, S))
    prev = np.zeros(S)
    trace = []
    xs = ys = None
    residual = np.inf
    n = 0
    for n in range(1, max_iter + 1):
        vals, xs, ys = kernels.pre_operator(cg.nxt, lvl, weight, V)
        V[0] = vals
        avg = vals / n
        residual = float(np.abs(avg - prev).max()) if n > 1 else np.inf
        prev = avg
        trace.append(ys)
        if n > 10 and residual < tol:
            break
    values = np.clip(V[0] / n, 0.0, 1.0)
    return ValueTable(values, n, residual, residual < tol, "limsup-mean", xs, ys,
                      _thin(trace[-keep_candidates:], keep_candidates))


def solve_values(cg: ConcurrentGame, tol: float = INNER_TOL, max_iter: int = MAX_ITER) -> ValueTable:
    if cg.objective.is_parity:
        return parity_value(cg, tol, max_iter=max_iter)
    return limsup_mean_value(cg)


# ---------------------------------------------------------------------------
# decision processes (one player against stationary opponents)


class DecisionProcess:
    """Finite MDP whose outcomes carry a priority (parity) or a weight."""

    def __init__(self, n_states: int, kind: str):
        self.n_states = n_states
        self.kind = kind
        self.start = 0
        self.actions: list[list[tuple[object, list]]] = [[] for _ in range(n_states)]

    def add_action(self, s: int, outcomes, tag=None):
        outs = [(float(p), int(s2), lab) for p, s2, lab in outcomes if p > 0]
        if not outs:
            raise ValueError("action without outcomes")
        self.actions[s].append((tag, outs))

    def arrays(self):
        act_ptr = [0]
        out_ptr = [0]
        prob, nxt, lab = [], [], []
        tags = []
        owner = []
        for s, acts in enumerate(self.actions):
            for tag, outs in acts:
                for p, s2, lb in outs:
                    prob.append(p)
                    nxt.append(s2)
                    lab.append(lb)
                out_ptr.append(len(prob))
                tags.append(tag)
                owner.append(s)
            act_ptr.append(len(out_ptr) - 1)
        return _DPArrays(
            np.array(act_ptr, dtype=np.int64), np.array(out_ptr, dtype=np.int64),
            np.array(prob, dtype=float), np.array(nxt, dtype=np.int64),
            np.array(lab, dtype=float), tags, np.array(owner, dtype=np.int64),
        )


@dataclass
class _DPArrays:
    act_ptr: np.ndarray
    out_ptr: np.ndarray
    prob: np.ndarray
    nxt: np.ndarray
    label: np.ndarray
    tags: list
    owner: np.ndarray

    @property
    def n_states(self):
        return len(self.act_ptr) - 1

    @property
    def n_actions(self):
        return len(self.out_ptr) - 1

    def outcomes(self, a):
        return range(self.out_ptr[a], self.out_ptr[a + 1])

    def state_actions(self, s):
        return range(self.act_ptr[s], self.act_ptr[s + 1])


def maximal_end_components(arr: _DPArrays, allowed: np.ndarray) -> list[tuple[list[int], list[int]]]:
    """MECs of the sub-process using only ``allowed`` actions, as ``(states, actions)``."""
    allowed = allowed.copy()
    S = arr.n_states
    while True:
        alive = np.zeros(S, dtype=bool)
        alive[arr.owner[allowed]] = True
        rows, cols = [], []
        for a in np.flatnonzero(allowed):
            s = arr.owner[a]
            for o in arr.outcomes(a):
                rows.append(s)
                cols.append(arr.nxt[o])
        g = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(S, S))
        _, comp = connected_components(g, directed=True, connection="strong")
        changed = False
        for a in np.flatnonzero(allowed):
            s = arr.owner[a]
            for o in arr.outcomes(a):
                t = arr.nxt[o]
                if not alive[t] or comp[t] != comp[s]:
                    allowed[a] = False
                    changed = True
                    break
        if not changed:
            break
    groups: dict[int, tuple[list, list]] = {}
    for a in np.flatnonzero(allowed):
        s = int(arr.owner[a])
        st, ac = groups.setdefault(int(comp[s]), ([], []))
        if s not in st:
            st.append(s)
        ac.append(int(a))
    return [(sorted(st), ac) for _, (st, ac) in sorted(groups.items())]


@dataclass
class DecisionResult:
    values: np.ndarray
    policy: list
    target: np.ndarray
    iterations: int
    residual: float


def solve_decision_process(dp: DecisionProcess, tol: float = 1e-12, max_iter: int = 1_000_000) -> DecisionResult:
    """Optimal value and a positional policy of the maximizing controller.

    Parity: union of end components whose largest internal priority is even
    (checked priority by priority), then maximal reachability. Limsup-mean:
    per-MEC optimal gain, then optimal stopping on those gains.
    """
    arr = dp.arrays()
    S = arr.n_states
    if dp.kind == "limsup-mean":
        return _solve_mean_payoff(arr, tol, max_iter)
    prio = arr.label.astype(np.int64)
    good = np.zeros(S, dtype=bool)
    chosen = [-1] * S
    for p in sorted({int(v) for v in prio if v % 2 == 0}, reverse=True):
        allowed = np.array([all(prio[o] <= p for o in arr.outcomes(a)) for a in range(arr.n_actions)],
                           dtype=bool)
        for states, acts in maximal_end_components(arr, allowed):
            hits = [a for a in acts if any(prio[o] == p for o in arr.outcomes(a))]
            if not hits or all(good[s] for s in states):
                continue
            fresh = [s for s in states if not good[s]]
            _attract_within(arr, states, acts, hits, chosen, only=set(fresh))
            good[fresh] = True
    v, it, res = kernels.stopping_values(arr.act_ptr, arr.out_ptr, arr.prob, arr.nxt,
                                         good.astype(float), tol, max_iter)
    policy = _reach_policy(arr, v, good, chosen)
    return DecisionResult(np.clip(v, 0.0, 1.0), policy, good, it, res)


def _attract_within(arr, states, acts, hits, chosen, only):
    """Positional choice inside one MEC that keeps visiting ``hits`` actions."""
    acts = set(acts)
    assigned = set()
    for a in hits:
        s = int(arr.owner[a])
        if s in only and s not in assigned:
            chosen[s] = a
            assigned.add(s)
    reached = {int(arr.owner[a]) for a in hits}
    progress = True
    while progress:
        progress = False
        for s in states:
            if s in reached:
                continue
            for a in arr.state_actions(s):
                if a in acts and any(arr.nxt[o] in reached for o in arr.outcomes(a)):
                    if s in only:
                        chosen[s] = a
                    reached.add(s)
                    progress = True
                    break


def _reach_policy(arr, v, target, chosen):
    S = arr.n_states
    policy = list(chosen)
    reached = {s for s in range(S) if target[s]}
    progress = True
    while progress:
        progress = False
        for s in range(S):
            if s in reached:
                continue
            for a in arr.state_actions(s):
                q = sum(arr.prob[o] * v[arr.nxt[o]] for o in arr.outcomes(a))
                if abs(q - v[s]) <= 1e-9 and any(arr.nxt[o] in reached for o in arr.outcomes(a)):
                    policy[s] = a
                    reached.add(s)
                    progress = True
                    break
    for s in range(S):
        if policy[s] < 0 and arr.act_ptr[s + 1] > arr.act_ptr[s]:
            policy[s] = int(arr.act_ptr[s])
    return [arr.tags[a] if a >= 0 else None for a in policy]


def _solve_mean_payoff(arr, tol, max_iter):
    S = arr.n_states
    stop = np.zeros(S)
    chosen = [-1] * S
    in_mec = np.zeros(S, dtype=bool)
    for states, acts in maximal_end_components(arr, np.ones(arr.n_actions, dtype=bool)):
        smask = np.zeros(S, dtype=bool)
        smask[states] = True
        amask = np.zeros(arr.n_actions, dtype=bool)
        amask[acts] = True
        lo, hi, _ = kernels.mean_payoff_rvi(arr.act_ptr, arr.out_ptr, arr.prob, arr.nxt, arr.label,
                                            smask, amask, 0.5, 1e-10, 200_000)
        gain = 0.5 * (lo + hi)
        stop[states] = gain
        in_mec[states] = True
        best = {}
        for a in acts:
            s = int(arr.owner[a])
            best.setdefault(s, a)
        for s, a in best.items():
            chosen[s] = a
    v, it, res = kernels.stopping_values(arr.act_ptr, arr.out_ptr, arr.prob, arr.nxt, stop, tol, max_iter)
    at_stop = np.array([in_mec[s] and abs(v[s] - stop[s]) <= 1e-9 for s in range(S)])
    policy = _reach_policy(arr, v, at_stop, [c if at_stop[s] else -1 for s, c in enumerate(chosen)])
    return DecisionResult(np.clip(v, 0.0, 1.0), policy, at_stop, it, res)


# ---------------------------------------------------------------------------
# punishment and best response


@dataclass
class StationaryStrategy:
    """Independent mixed actions of the window players, per automaton state."""

    window: tuple[int, ...]
    sizes: tuple[int, ...]
    mixed: dict[int, tuple[MixedAction, ...]]
    realization: str = "exact"

    def column_distribution(self, q: int) -> np.ndarray:
        if not self.window:
            return np.ones(1)
        dist = np.ones(1)
        for m in self.mixed[q]:
            dist = np.outer(dist, m.as_array()).ravel()
        return dist

    def as_dict(self, game: GameSpec | None = None):
        out = {}
        for q, ms in sorted(self.mixed.items()):
            out[str(q)] = {str(j): [format(float(p), ".12g") for p in m.probs] for j, m in zip(self.window, ms)}
        return {"window": list(self.window), "realization": self.realization, "states": out}

    @classmethod
    def from_dict(cls, data, sizes):
        window = tuple(int(j) for j in data["window"])
        mixed = {}
        for q, per in data["states"].items():
            ms = []
            for j in window:
                probs = [float(p) for p in per[str(j)]]
                total = sum(probs)
                ms.append(MixedAction(tuple(p / total for p in probs)))
            mixed[int(q)] = tuple(ms)
        return cls(window, tuple(sizes), mixed, data.get("realization", "exact"))


def realize_correlated(y: np.ndarray, sizes: tuple[int, ...]) -> tuple[tuple[MixedAction, ...], str]:
    """Turn a correlated window distribution into independent mixed actions.

    Exact when at most one window player is non-degenerate in the support
    (that player becomes the sole randomizer); otherwise the product of
    marginals is used.
    """
    y = np.clip(np.asarray(y, dtype=float), 0.0, None)
    y = y / y.sum()
    if not sizes:
        return (), "exact"
    t = y.reshape(sizes)
    margins = []
    for ax in range(len(sizes)):
        other = tuple(k for k in range(len(sizes)) if k != ax)
        m = t.sum(axis=other) if other else t
        m = np.where(m < 1e-12, 0.0, m)
        margins.append(m / m.sum())
    prod = margins[0]
    for m in margins[1:]:
        prod = np.multiply.outer(prod, m)
    exact = len(sizes) == 1 or np.abs(prod - t).max() <= 1e-9
    nondeg = sum(1 for m in margins if (m > 0).sum() > 1)
    how = "exact" if (exact and nondeg <= 1) else ("product" if exact else "product-of-marginals")
    return tuple(MixedAction(tuple(float(p) for p in m)) for m in margins), how


def strategy_from_columns(cg: ConcurrentGame, ys: np.ndarray) -> StationaryStrategy:
    mixed = {}
    worst = "exact"
    for k, q in enumerate(cg.states):
        ms, how = realize_correlated(ys[k], cg.window_sizes)
        mixed[q] = ms
        if how == "product-of-marginals":
            worst = how
    return StationaryStrategy(cg.window, cg.window_sizes, mixed, worst)


def coalition_process(cg: ConcurrentGame, strategy: StationaryStrategy) -> DecisionProcess:
    kind = "parity" if cg.objective.is_parity else "limsup-mean"
    dp = DecisionProcess(cg.n_states, kind)
    for k, q in enumerate(cg.states):
        dist = strategy.column_distribution(q)
        for b in range(cg.n_rows):
            outs = [(dist[c], cg.nxt[k, b, c], cg.label[k, b, c]) for c in range(len(cg.columns)) if dist[c] > 0]
            dp.add_action(k, outs, tag=b)
    return dp


@dataclass
class BestResponse:
    value: float
    values: np.ndarray
    policy: list


def best_response(cg: ConcurrentGame, strategy: StationaryStrategy, tol: float = 1e-12) -> BestResponse:
    """Deviator's optimal value against a stationary coalition strategy."""
    res = solve_decision_process(coalition_process(cg, strategy), tol)
    return BestResponse(float(res.values[cg.initial]), res.values, res.policy)


@dataclass
class Punishment:
    player: int
    strategy: StationaryStrategy
    guarantee: float
    fixpoint_value: float
    values: np.ndarray
    candidates_tried: int


def punishment_profile(cg: ConcurrentGame, table: ValueTable | None = None, tol: float = INNER_TOL) -> Punishment:
    """Coalition strategy pushing the deviator down, with an audited guarantee.

    Candidates are the minimizing mixed actions of the fixpoint iterates
    (plus the final ones); each is realized independently and audited by
    :func:`best_response`. The candidate with the smallest worst-state
    guarantee wins, earliest first on ties.
    """
    table = table if table is not None else solve_values(cg, tol)
    cands = list(table.candidates)
    if table.col_strategies is not None:
        cands.append(table.col_strategies)
    best = None
    seen = set()
    for ys in cands:
        key = np.round(ys, 9).tobytes()
        if key in seen:
            continue
        seen.add(key)
        strat = strategy_from_columns(cg, ys)
        br = best_response(cg, strat)
        worst = float(br.values.max())
        if best is None or worst < best[0] - 1e-12:
            best = (worst, strat, br)
    worst, strat, br = best
    return Punishment(cg.player, strat, worst, float(table.values[cg.initial]), br.values, len(seen))


@dataclass
class IndependenceReport:
    ok: bool
    spread: float
    tol: float
    witness: tuple | None

    def as_dict(self):
        return {"ok": self.ok, "spread": self.spread, "tol": self.tol, "witness": self.witness}


def history_independence_check(cg: ConcurrentGame, table: ValueTable | None = None,
                               tol: float = 1e-3) -> IndependenceReport:
    """Values of all reachable automaton states must agree within ``tol``.

    Every state of ``cg`` is reached by some history, so for a tail
    objective they all carry the value of the whole game.
    """
    table = table if table is not None else solve_values(cg)
    v = table.values
    hi, lo = int(np.argmax(v)), int(np.argmin(v))
    spread = float(v[hi] - v[lo])
    ok = spread <= tol
    witness = None if ok else ((cg.states[hi], float(v[hi])), (cg.states[lo], float(v[lo])))
    return IndependenceReport(ok, spread, tol, witness)
