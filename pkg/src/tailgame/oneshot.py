"""Finite normal-form games: minmax values, Nash profiles and finitistic approximation.

Payoffs are tensors indexed by the joint action of the active players. For a
player ``i`` the *coalition* is everybody else with more than one action.

Two minmax notions are exposed:

* :func:`minmax_classical` lets the coalition act as one correlated
  minimizer (exact when the coalition has a single member, a lower bound on
  the independent-coalition value otherwise);
* :func:`minmax_finitistic_bracket` encloses the value against independent
  coalition mixed actions between a certified lower bound and the best
  product profile found.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from . import kernels

log = logging.getLogger(__name__)


@dataclass
class NormalFormGame:
    """``payoffs[k]`` is the payoff tensor of ``players[k]`` over the joint action space."""

    players: tuple[int, ...]
    sizes: tuple[int, ...]
    payoffs: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        self.players = tuple(int(p) for p in self.players)
        self.sizes = tuple(int(s) for s in self.sizes)
        self.payoffs = np.asarray(self.payoffs, dtype=float)
        if self.payoffs.shape != (len(self.players),) + self.sizes:
            raise ValueError(f"payoff tensor shape {self.payoffs.shape} does not match "
                             f"{len(self.players)} players with action counts {self.sizes}")
        if any(s < 1 for s in self.sizes):
            raise ValueError("every player needs at least one action")
        if self.payoffs.size and (self.payoffs.min() < -1e-12 or self.payoffs.max() > 1 + 1e-12):
            raise ValueError("payoffs must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.players)

    def pos(self, player: int) -> int:
        return self.players.index(player)

    @classmethod
    def from_function(cls, players, sizes, func):
        """Tabulate ``func(joint_action) -> per-player payoffs``."""
        sizes = tuple(sizes)
        pay = np.zeros((len(players),) + sizes)
        for a in itertools.product(*(range(k) for k in sizes)):
            pay[(slice(None),) + a] = func(a)
        return cls(tuple(players), sizes, pay)

    def flat(self):
        """Payoffs as ``(P, K)`` with the matching ``(K, P)`` action table (kernel layout)."""
        acts = np.array(list(itertools.product(*(range(k) for k in self.sizes))), dtype=np.int64)
        acts = acts.reshape(-1, self.n)
        return np.ascontiguousarray(self.payoffs.reshape(self.n, -1)), acts

    def expected(self, profile) -> np.ndarray:
        """Expected payoff of every player under independent mixed actions."""
        out = self.payoffs
        for m in reversed(profile):
            out = out @ np.asarray(m, dtype=float)
        return out


def _player_tensor(g: NormalFormGame, i: int):
    """Player i's payoffs with axes ``(i, coalition...)``; single-action players are fixed."""
    k = g.pos(i)
    t = g.payoffs[k]
    coalition = [j for j in range(g.n) if j != k and g.sizes[j] > 1]
    fixed = [j for j in range(g.n) if j != k and g.sizes[j] == 1]
    t = np.moveaxis(t, [k] + coalition + fixed, list(range(g.n)))
    t = t.reshape(t.shape[: 1 + len(coalition)])
    return t, [g.players[j] for j in coalition]


@dataclass
class MinmaxResult:
    value: float
    row: np.ndarray
    coalition: list[int]
    distribution: np.ndarray  # correlated distribution over coalition joint actions (flattened)


def minmax_classical(g: NormalFormGame, i: int) -> MinmaxResult:
    """Minmax value of ``i`` with the coalition as one correlated minimizer.

    With a single (or no) coalition member this is the classical value;
    with more it is the correlated relaxation, a lower bound.
    """
    t, coalition = _player_tensor(g, i)
    M = t.reshape(t.shape[0], -1)
    v, x, y = kernels.solve_matrix_game(np.ascontiguousarray(M))
    return MinmaxResult(float(v), x, coalition, y)


@dataclass
class ValueBracket:
    lower: float
    upper: float
    witness_lower: np.ndarray
    witness_upper: list
    coalition: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise ValueError(f"bracket inverted: {self.lower} > {self.upper}")

    @property
    def width(self) -> float:
        return max(self.upper - self.lower, 0.0)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def as_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "width": self.width,
            "coalition": list(self.coalition),
            "witness_upper": [[float(p) for p in m] for m in self.witness_upper],
            **self.notes,
        }


def _best_reply_value(t, profile):
    """``max_{a_i} E[t]`` when the coalition plays the product ``profile``."""
    out = t
    for m in reversed(profile):
        out = out @ m
    return float(out.max())


def _last_member_matrix(t, profile_head):
    """Matrix (own action x last member's action) after averaging out the others."""
    out = np.moveaxis(t, -1, 1)  # (own, last, others...)
    for m in reversed(profile_head):
        out = out @ m
    return out


def _simplex_lattice(m, K):
    for c in itertools.combinations(range(K + m - 1), m - 1):
        parts = np.diff((-1,) + c + (K + m - 1,)) - 1
        yield parts / K


def _lattice_size(m, K):
    return math.comb(K + m - 1, m - 1)


def minmax_finitistic_bracket(g: NormalFormGame, i: int, restarts: int = 8, tol: float = 1e-10,
                              seed: int = 0, grid: int = 200, grid_budget: int = 40_000) -> ValueBracket:
    """Enclose the minmax value of ``i`` against independent coalition mixed actions.

    Lower bound: the correlated value, tightened by a lattice certificate
    (all coalition members but the last on a ``1/K`` lattice, the last one
    solved exactly; every mixed action lies within total variation
    ``(m - 1) / K`` of the lattice and payoffs are 1-Lipschitz in it).
    Upper bound: the best of exhaustive pure profiles, the lattice argmin
    and alternating exact minimization from ``restarts`` random starts.
    """
    t, coalition = _player_tensor(g, i)
    corr = minmax_classical(g, i)
    sizes = t.shape[1:]
    notes = {"correlated": corr.value}
    if len(coalition) <= 1:
        # a single member's mixed actions are exactly the correlated ones
        prof = [corr.distribution] if coalition else []
        return ValueBracket(corr.value, corr.value, corr.distribution, prof, coalition, notes)

    # exhaustive pure profiles
    pure_vals = t.max(axis=0)
    k = int(np.argmin(pure_vals))
    idx = np.unravel_index(k, sizes)
    best_up = float(pure_vals[idx])
    best_prof = [np.eye(s)[a] for s, a in zip(sizes, idx)]
    notes["pure_upper"] = best_up

    # lattice certificate
    lower = corr.value
    head = sizes[:-1]
    K = grid
    while K >= 2 and math.prod(_lattice_size(m, K) for m in head) > grid_budget:
        K //= 2
    if K >= 2:
        lattices = [list(_simplex_lattice(m, K)) for m in head]
        grid_min = np.inf
        grid_arg = None
        for pt in itertools.product(*lattices):
            M = _last_member_matrix(t, list(pt))
            v, _, y = kernels.solve_matrix_game(np.ascontiguousarray(M))
            if v < grid_min - 1e-15:
                grid_min, grid_arg = v, list(pt) + [y]
        err = sum((m - 1) / K for m in head)
        lower = max(lower, grid_min - err)
        up = _best_reply_value(t, grid_arg)
        notes.update(lattice=K, lattice_min=float(grid_min), lattice_error=err)
        if up < best_up - 1e-15:
            best_up, best_prof = up, grid_arg

    # alternating minimization
    rng = np.random.default_rng(seed)
    starts = [best_prof] + [[rng.dirichlet(np.ones(s)) for s in sizes] for _ in range(restarts)]
    for prof in starts:
        prof = [p.copy() for p in prof]
        cur = _best_reply_value(t, prof)
        for _ in range(200):
            before = cur
            for j in range(len(sizes)):
                order = [k for k in range(len(sizes)) if k != j] + [j]
                tj = np.moveaxis(t, [0] + [1 + k for k in order], list(range(len(sizes) + 1)))
                M = _last_member_matrix(tj, [prof[k] for k in order[:-1]])
                v, _, y = kernels.solve_matrix_game(np.ascontiguousarray(M))
                prof[j] = y
                cur = _best_reply_value(t, prof)
            if before - cur <= tol:
                break
        if cur < best_up - 1e-15:
            best_up, best_prof = cur, prof
    lower = min(lower, best_up)
    return ValueBracket(float(lower), float(best_up), corr.distribution, best_prof, coalition, notes)


# ---------------------------------------------------------------------------
# Nash equilibria


@dataclass
class NashResult:
    profile: list[np.ndarray]
    regret: float
    per_player: np.ndarray
    method: str
    converged: bool

    def as_dict(self):
        return {
            "profile": [[float(p) for p in m] for m in self.profile],
            "regret": self.regret,
            "method": self.method,
            "converged": self.converged,
        }


def player_regrets(g: NormalFormGame, profile) -> np.ndarray:
    """Per-player gain of the best pure deviation, computed by brute force."""
    out = np.zeros(g.n)
    for k in range(g.n):
        t = np.moveaxis(g.payoffs[k], k, 0)
        others = [profile[j] for j in range(g.n) if j != k]
        vals = t
        for m in reversed(others):
            vals = vals @ np.asarray(m, dtype=float)
        cur = float(vals @ np.asarray(profile[k], dtype=float))
        out[k] = max(float(vals.max()) - cur, 0.0)
    return out


def _supports(m):
    for size in range(1, m + 1):
        yield from itertools.combinations(range(m), size)


def _indifference(P, own_support, opp_support):
    """Opponent mixed action on ``opp_support`` making ``own_support`` optimal rows of ``P``.

    ``P`` is the own payoff matrix (own action x opponent action).
    """
    m, n = P.shape
    ns = len(opp_support)
    # variables: y over opp_support, then u
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for a in range(m):
        row = [P[a, c] for c in opp_support] + [-1.0]
        if a in own_support:
            A_eq.append(row)
            b_eq.append(0.0)
        else:
            A_ub.append(row)
            b_ub.append(0.0)
    A_eq.append([1.0] * ns + [0.0])
    b_eq.append(1.0)
    res = linprog(np.zeros(ns + 1), A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq), b_eq=b_eq, bounds=[(0, None)] * ns + [(None, None)],
                  method="highs")
    if res.status != 0:
        return None
    y = np.zeros(n)
    y[list(opp_support)] = np.clip(res.x[:ns], 0.0, None)
    return y / y.sum()


def nash_equilibrium(g: NormalFormGame, tol: float | None = None, iters: int = 200_000,
                     max_support_pairs: int = 250_000) -> NashResult:
    """Equilibrium with a verified regret bound.

    Two players: support enumeration, smallest total support first and
    lexicographic within a size. Three or more: pure profiles first, then
    regret matching; the returned profile is the one with the smallest
    verified regret and ``converged`` says whether it met ``tol``.
    """
    if g.n == 1:
        k = int(np.argmax(g.payoffs[0]))
        prof = [np.eye(g.sizes[0])[k]]
        return NashResult(prof, 0.0, np.zeros(1), "argmax", True)
    if g.n == 2:
        tol = 1e-6 if tol is None else tol
        A, B = g.payoffs[0], g.payoffs[1].T
        m, n = g.sizes
        pairs = sorted(itertools.product(_supports(m), _supports(n)),
                       key=lambda st: (len(st[0]) + len(st[1]), st[0], st[1])) \
            if (2 ** m - 1) * (2 ** n - 1) <= max_support_pairs else []
        for S1, S2 in pairs:
            y = _indifference(A, S1, S2)
            if y is None:
                continue
            x = _indifference(B, S2, S1)
            if x is None:
                continue
            prof = [x, y]
            reg = player_regrets(g, prof)
            if reg.max() <= tol:
                return NashResult(prof, float(reg.max()), reg, "support-enumeration", True)
        log.info("support enumeration found nothing within tol; falling back to regret matching")
    tol = 1e-3 if tol is None else tol

    total = math.prod(g.sizes)
    if total <= 200_000:
        pay, acts = g.flat()
        for k in range(total):
            prof = [np.eye(s)[a] for s, a in zip(g.sizes, acts[k])]
            reg = player_regrets(g, prof)
            if reg.max() <= tol:
                return NashResult(prof, float(reg.max()), reg, "pure", True)
    pay, acts = g.flat()
    strat, gap, _ = kernels.regret_matching(pay, acts, np.array(g.sizes, dtype=np.int64),
                                            iters, 100, tol)
    prof = [strat[k, : g.sizes[k]] / strat[k, : g.sizes[k]].sum() for k in range(g.n)]
    reg = player_regrets(g, prof)
    method = "regret-matching"
    if reg.max() > tol and total <= POLISH_MAX_ENTRIES:
        # time averages of regret matching only approach coarse correlated
        # equilibria; descend the Nash potential from there
        cand = _polish(g, prof)
        creg = player_regrets(g, cand)
        if creg.max() < reg.max():
            prof, reg, method = cand, creg, "regret-matching+polish"
    return NashResult(prof, float(reg.max()), reg, method, bool(reg.max() <= tol))


POLISH_MAX_ENTRIES = 1 << 14


def _deviation_values(g: NormalFormGame, profile):
    """``vals[k][a]``: expected payoff of player k's pure action a against the others' profile."""
    out = []
    for k in range(g.n):
        t = np.moveaxis(g.payoffs[k], k, 0)
        for j in reversed([j for j in range(g.n) if j != k]):
            t = t @ profile[j]
        out.append(t)
    return out


def nash_potential(g: NormalFormGame, profile) -> float:
    """Sum of squared positive pure-deviation gains; zero exactly at Nash equilibria."""
    total = 0.0
    for x, vals in zip(profile, _deviation_values(g, profile)):
        gain = np.maximum(vals - float(vals @ x), 0.0)
        total += float(gain @ gain)
    return total


def _polish(g: NormalFormGame, start, restarts: int = 4, seed: int = 0):
    """Local minimization of :func:`nash_potential` over softmax-parametrized profiles."""
    cuts = np.cumsum(g.sizes)[:-1]

    def unpack(z):
        prof = []
        for part in np.split(z, cuts):
            e = np.exp(part - part.max())
            prof.append(e / e.sum())
        return prof

    def f(z):
        return nash_potential(g, unpack(z))

    rng = np.random.default_rng(seed)
    z0 = np.concatenate([np.log(np.clip(m, 1e-9, None)) for m in start])
    starts = [z0] + [rng.normal(size=z0.size) for _ in range(restarts)]
    best, best_val = list(start), nash_potential(g, start)
    for z in starts:
        res = minimize(f, z, method="L-BFGS-B", options={"maxiter": 500, "ftol": 1e-16, "gtol": 1e-12})
        prof = unpack(res.x)
        val = nash_potential(g, prof)
        if val < best_val:
            best, best_val = prof, val
        if best_val < 1e-16:
            break
    return best


# ---------------------------------------------------------------------------
# example games


def never_attained_game(n_opponents: int) -> NormalFormGame:
    """Player 0 has one action; opponents 1..n choose a/b.

    Player 0 gets ``1/k`` if opponent ``k`` is the only one playing b and 1
    otherwise, so its minmax value tends to 0 while no profile pays 0.
    Player 0's payoff tensor is the only meaningful one; the others copy it.
    """
    n = int(n_opponents)
    if n < 1:
        raise ValueError("need at least one opponent")
    sizes = (1,) + (2,) * n

    def f(a):
        bs = [k for k in range(1, n + 1) if a[k] == 1]
        r = 1.0 / bs[0] if len(bs) == 1 else 1.0
        return [r] * (n + 1)

    g = NormalFormGame.from_function(tuple(range(n + 1)), sizes, f)
    g.labels = (("-",),) + (("a", "b"),) * n
    return g


def matching_pennies_matrix() -> NormalFormGame:
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    return NormalFormGame((0, 1), (2, 2), np.stack([A, 1.0 - A]))


def random_game(n_players: int, n_actions, rng) -> NormalFormGame:
    sizes = (n_actions,) * n_players if np.isscalar(n_actions) else tuple(n_actions)
    return NormalFormGame(tuple(range(n_players)), sizes, rng.random((n_players,) + sizes))


@dataclass
class EqualityReport:
    player: int
    classical: float
    bracket: ValueBracket
    ok: bool
    tol: float

    def as_dict(self):
        return {"player": self.player, "classical": self.classical, "ok": self.ok,
                "tol": self.tol, **self.bracket.as_dict()}


def minmax_equality_check(g: NormalFormGame, i: int, tol: float = 1e-9, **kw) -> EqualityReport:
    """Is the correlated minmax value consistent with the independent-coalition bracket?"""
    c = minmax_classical(g, i).value
    b = minmax_finitistic_bracket(g, i, **kw)
    ok = abs(c - b.mid) <= 0.5 * b.width + tol or b.lower - tol <= c <= b.upper + tol
    return EqualityReport(i, c, b, bool(ok), tol)


# ---------------------------------------------------------------------------
# finitistic approximation of a payoff over countably many opponents


@dataclass
class WeightedTailFunction:
    """``r(a_0, a_1, ...) = own[a_0] + sum_j weights[j-1] * [a_j == 1]``.

    Opponents are binary; ``weights`` must be summable and ``own`` plus the
    total weight must stay in [0, 1]. Coordinates whose weight is below
    double precision (``2**-60`` for the geometric family) are dropped, so
    ``depth`` opponents represent the whole countable tail.
    """

    weights: np.ndarray
    own: np.ndarray

    @classmethod
    def geometric(cls, depth: int = 60, own=(0.0, 0.0), scale: float = 1.0):
        w = scale * 0.5 ** np.arange(1, depth + 1)
        return cls(w, np.asarray(own, dtype=float))

    @property
    def depth(self) -> int:
        return len(self.weights)

    def tail_bound(self, n: int) -> float:
        """Largest possible change of ``r`` from coordinates beyond ``n``."""
        return float(self.weights[n:].sum())

    def expected(self, q: np.ndarray) -> np.ndarray:
        """``E[r | a_0]`` for every own action when opponent j plays 1 w.p. ``q[j-1]``."""
        return self.own + float(self.weights @ q)

    def xi(self, tails: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
        """Expected ``r`` with opponents ``1..n`` mixing and the rest pure as in ``tails``.

        ``tails`` has shape ``(samples, depth)``; the result has shape
        ``(samples, own actions)``.
        """
        mixed = float(self.weights[:n] @ q[:n])
        pure = tails[:, n:] @ self.weights[n:]
        return (mixed + pure)[:, None] + self.own[None, :]


@dataclass
class ApproximationTable:
    n: np.ndarray
    max_error: np.ndarray
    mean_error: np.ndarray
    bound: np.ndarray
    hit_rate: np.ndarray
    eps: float
    derived_n: int
    samples: int

    def rows(self):
        for k in range(len(self.n)):
            yield {
                "n": int(self.n[k]),
                "max_error": float(self.max_error[k]),
                "mean_error": float(self.mean_error[k]),
                "bound": float(self.bound[k]),
                "hit_rate": float(self.hit_rate[k]),
            }


def finitistic_approximation(r: WeightedTailFunction, q, eps: float, n_max: int, samples: int = 10_000,
                             seed: int = 0) -> ApproximationTable:
    """Sample pure opponent tails and tabulate how fast ``xi_n`` reaches ``E[r]``.

    A sample is an ``n``-finitistic approximation when ``|xi_n - E[r]| <= eps``
    for every own action. ``derived_n`` is the smallest ``n`` whose
    worst-case tail bound is at most ``eps``.
    """
    q = np.broadcast_to(np.asarray(q, dtype=float), (r.depth,)).copy()
    rng = np.random.default_rng(seed)
    tails = (rng.random((samples, r.depth)) < q[None, :]).astype(float)
    target = r.expected(q)
    ns = np.arange(n_max + 1)
    mx, mean, hit, bound = [], [], [], []
    for n in ns:
        err = np.abs(r.xi(tails, q, int(n)) - target[None, :]).max(axis=1)
        mx.append(err.max())
        mean.append(err.mean())
        hit.append(float((err <= eps).mean()))
        bound.append(r.tail_bound(int(n)))
    derived = next((int(n) for n in range(r.depth + 1) if r.tail_bound(n) <= eps), r.depth)
    return ApproximationTable(ns, np.array(mx), np.array(mean), np.array(bound), np.array(hit),
                              eps, derived, samples)
