"""``eqcli``: command-line front end.

Results go to standard output (or ``--out``), diagnostics to standard
error. Exit codes: 0 success/accepted, 2 audit rejected, 3 infeasible
search, 4 input error. Every randomized command needs ``--seed``.

    eqcli minmax --spec matching_pennies.json
    eqcli equilibrium --spec voorneveld.json --eps 0.05 --seed 7 --out cert.json
    eqcli audit --spec voorneveld.json --cert cert.json
    eqcli dtrace --example matching-pennies --w 0.9 --stages 60 --seed 1
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import equilibrium, martin, oneshot, solver
from .core import GameSpecError, StageProfile, sample_play
from .equilibrium import SearchFailure, fmt
from .specfile import SpecError, bundled_spec, read_spec

log = logging.getLogger("tailgame.cli")

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT = 4

BUNDLED = {"voorneveld": "voorneveld.json", "matching-pennies": "matching_pennies.json"}
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class InputError(Exception):
    """Bad flags or files; reported on stderr with exit code 4."""


def configure_logging():
    name = os.environ.get("TAILGAME_LOG", "error").strip().lower()
    level = LOG_LEVELS.get(name, logging.ERROR)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# argument helpers


def _eps_list(text, game):
    if text is None:
        return game.eps
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--eps: cannot parse {text!r}") from None
    if len(vals) == 1:
        vals = vals * game.n_players
    if len(vals) != game.n_players:
        raise InputError(f"--eps: expected 1 or {game.n_players} values, got {len(vals)}")
    if any(not v > 0 for v in vals):
        raise InputError("--eps: values must be > 0")
    return tuple(vals)


def _need_seed(args):
    if args.seed is None:
        raise InputError(f"{args.command} is randomized and needs --seed")
    return args.seed


def _load_game(args):
    if args.spec is None:
        raise InputError("--spec is required")
    if args.spec in BUNDLED and not os.path.exists(args.spec):
        return bundled_spec(BUNDLED[args.spec])
    return read_spec(args.spec, strict=not args.lax)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _players(args, game):
    if args.player is None:
        return list(range(game.n_players))
    if not 0 <= args.player < game.n_players:
        raise InputError(f"--player must lie in [0, {game.n_players - 1}]")
    return [args.player]


def _tsv(rows, columns) -> str:
    lines = ["\t".join(columns)]
    for r in rows:
        lines.append("\t".join(fmt(r[c]) if isinstance(r[c], float) else str(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_minmax(args):
    game = _load_game(args)
    tol = args.tol if args.tol is not None else solver.INNER_TOL

    def one(i):
        cg = solver.build_concurrent_game(game, i)
        table = solver.solve_values(cg, tol)
        ind = solver.history_independence_check(cg, table)
        return {
            "id": i,
            "window": list(cg.window),
            "kind": table.kind,
            "value": fmt(table.values[cg.initial]),
            "values": {str(q): fmt(v) for q, v in zip(cg.states, table.values)},
            "iterations": table.iterations,
            "residual": fmt(table.residual),
            "converged": table.converged,
            "spread": fmt(ind.spread),
        }

    rows = equilibrium._map(args.threads, one, _players(args, game))
    _emit(args, _dumps({"game": game.name, "players": rows}))
    return EXIT_OK


def cmd_punish(args):
    game = _load_game(args)
    tol = args.tol if args.tol is not None else solver.INNER_TOL

    def one(i):
        cg = solver.build_concurrent_game(game, i)
        pun = solver.punishment_profile(cg, solver.solve_values(cg, tol), tol)
        return {
            "id": i,
            "fixpoint_value": fmt(pun.fixpoint_value),
            "guarantee": fmt(pun.guarantee),
            "candidates_tried": pun.candidates_tried,
            "strategy": pun.strategy.as_dict(),
        }

    rows = equilibrium._map(args.threads, one, _players(args, game))
    _emit(args, _dumps({"game": game.name, "players": rows}))
    return EXIT_OK


def _load_cert(args, game):
    if args.cert is None:
        raise InputError("--cert is required")
    data = _read_json(args.cert)
    try:
        return equilibrium.load_certificate(game, data), data
    except (KeyError, ValueError, TypeError, GameSpecError) as exc:
        raise InputError(f"{args.cert}: malformed certificate: {exc}") from None


def cmd_bestresponse(args):
    game = _load_game(args)
    (play, pun, _), _ = _load_cert(args, game)
    rows = []
    for i in _players(args, game):
        cg = solver.build_concurrent_game(game, i)
        strat = pun.get(i) or solver.StationaryStrategy(cg.window, cg.window_sizes, {}, "exact")
        br = solver.best_response(cg, strat)
        dev = equilibrium.deviation_process(game, play, i, strat, cg)
        res = solver.solve_decision_process(dev)
        rows.append({
            "id": i,
            "against_punishment": {str(q): fmt(v) for q, v in zip(cg.states, br.values)},
            "against_grim_trigger": fmt(res.values[dev.start]),
        })
    _emit(args, _dumps({"game": game.name, "players": rows}))
    return EXIT_OK


def _report_rejection(cert):
    for a in cert.rejected_players():
        print(f"rejected: player {a.player} margin {fmt(a.margin)} (payoff {fmt(a.payoff)}, "
              f"best deviation {fmt(a.audit_value)}, eps {fmt(a.eps)})", file=sys.stderr)


def cmd_equilibrium(args):
    game = _load_game(args)
    eps = _eps_list(args.eps, game)
    seed = args.seed if args.seed is not None else 0
    tol = args.tol if args.tol is not None else equilibrium.AUDIT_TOL
    try:
        cert = equilibrium.build_equilibrium(game, eps, seed=seed, tol=tol, cycle_bound=args.cycle_bound,
                                             threads=args.threads)
    except SearchFailure as exc:
        print(f"search failed ({exc.reason}): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if not cert.accepted:
        _report_rejection(cert)
        return EXIT_REJECTED
    _emit(args, cert.dumps())
    return EXIT_OK


def cmd_audit(args):
    game = _load_game(args)
    (play, pun, targets), data = _load_cert(args, game)
    eps = _eps_list(args.eps, game)
    tol = args.tol if args.tol is not None else equilibrium.AUDIT_TOL
    try:
        cert = equilibrium.audit_equilibrium(game, play, pun, eps, tol, args.threads, targets,
                                             meta=data.get("meta", {}))
    except ValueError as exc:
        raise InputError(f"{args.cert}: {exc}") from None
    if not cert.accepted:
        _report_rejection(cert)
        return EXIT_REJECTED
    report = {
        "game": game.name,
        "accepted": True,
        "players": [a.as_dict() for a in cert.audits],
    }
    _emit(args, _dumps(report))
    return EXIT_OK


def cmd_dtrace(args):
    seed = _need_seed(args)
    rng = np.random.default_rng(seed)
    if args.example == "matching-pennies":
        kw = {"delta": args.delta, "val": 1.0} if args.delta > 0 else {}
        ledger = martin.d_matching_pennies(args.w, **kw)
        labels = (("T", "B"), ("L", "R"))
        h = tuple(tuple(int(x) for x in rng.integers(0, 2, size=2)) for _ in range(args.stages + 1))
    else:
        game = bundled_spec(BUNDLED["voorneveld"])
        player = args.player or 0
        ledger = martin.d_voorneveld(args.w, game, player)
        labels = game.actions
        h = tuple(tuple(int(x) for x in rng.integers(0, 2, size=game.n_players)) for _ in range(args.stages + 1))
    rows = ledger.trajectory(h, args.stages)
    for r in rows:
        r["action"] = "".join(labels[j][x] for j, x in enumerate(h[r["stage"]]))
        r["alpha_changed"] = int(r["alpha_changed"])
    _emit(args, _tsv(rows, ["stage", "action", "d", "alpha_changed", "r"]))
    return EXIT_OK


def cmd_oneshot_approx(args):
    seed = _need_seed(args)
    r = oneshot.WeightedTailFunction.geometric()
    eps = float(args.eps) if args.eps is not None else 0.01
    table = oneshot.finitistic_approximation(r, args.q, eps, args.n_max, args.samples, seed)
    text = f"# eps={fmt(eps)} derived_n={table.derived_n} samples={table.samples}\n"
    text += _tsv(list(table.rows()), ["n", "max_error", "mean_error", "bound", "hit_rate"])
    _emit(args, text)
    return EXIT_OK


def _oneshot_game(args):
    if args.game:
        data = _read_json(args.game)
        try:
            sizes = tuple(int(k) for k in data["sizes"])
            pay = np.asarray(data["payoffs"], dtype=float)
            players = tuple(data.get("players", range(len(sizes))))
            return oneshot.NormalFormGame(players, sizes, pay)
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"{args.game}: malformed game: {exc}") from None
    if args.example == "never-attained":
        return oneshot.never_attained_game(args.opponents)
    return oneshot.matching_pennies_matrix()


def cmd_oneshot_minmax(args):
    g = _oneshot_game(args)
    i = args.player or 0
    if not 0 <= i < g.n:
        raise InputError(f"--player must lie in [0, {g.n - 1}]")
    classical = oneshot.minmax_classical(g, i)
    bracket = oneshot.minmax_finitistic_bracket(g, i)
    out = {
        "player": i,
        "classical": fmt(classical.value),
        "finitistic": bracket.as_dict(),
        "equal": bool(abs(bracket.lower - classical.value) <= 1e-9 and abs(bracket.upper - classical.value) <= 1e-9),
    }
    _emit(args, _dumps(out))
    return EXIT_OK


def cmd_mrun_validate(args):
    verdicts = []
    if args.run:
        data = _read_json(args.run)
        try:
            runs = [martin.MRun.from_dict(d) for d in (data if isinstance(data, list) else [data])]
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"{args.run}: malformed run: {exc}") from None
    else:
        seed = _need_seed(args)
        rng = np.random.default_rng(seed)
        ledger = martin.d_matching_pennies(args.w)
        runs = []
        for _ in range(args.plays):
            h = tuple(tuple(int(x) for x in rng.integers(0, 2, size=2)) for _ in range(args.horizon))
            runs.append(martin.extract_m_run(ledger, h, 0, (0, 1), (2, 2), (0, 0)))
    for k, run in enumerate(runs):
        v = martin.validate_m_run(run, args.w)
        verdicts.append({"run": k, "ok": v.ok, "first_bad": v.first_bad, "reason": v.reason})
        if not v.ok:
            print(f"run {k}: illegal at index {v.first_bad}: {v.reason}", file=sys.stderr)
    _emit(args, _dumps({"w": fmt(args.w), "runs": verdicts, "all_legal": all(v["ok"] for v in verdicts)}))
    return EXIT_OK if all(v["ok"] for v in verdicts) else EXIT_REJECTED


def _parse_deviation(text, game):
    try:
        i, t, lab = text.split(":")
        i, t = int(i), int(t)
    except ValueError:
        raise InputError(f"--deviate: expected PLAYER:STAGE:ACTION, got {text!r}") from None
    if not 0 <= i < game.n_players:
        raise InputError(f"--deviate: no player {i}")
    try:
        return i, t, game.index(i, lab)
    except GameSpecError as exc:
        raise InputError(f"--deviate: {exc}") from None


def cmd_simulate(args):
    game = _load_game(args)
    seed = _need_seed(args)
    (play, pun, _), _ = _load_cert(args, game)
    grim = equilibrium.assemble_grim_trigger(game, play, pun)
    dev = _parse_deviation(args.deviate, game) if args.deviate else None
    if dev is None:
        profile = grim.profile()
    else:
        i, s, x = dev

        def rule(h):
            st = grim.stage(h)
            if len(h) != s:
                return st
            pure = list(st.pure)
            pure[i] = x
            mixed = {j: m for j, m in st.mixed.items() if j != i}
            return StageProfile(tuple(pure), mixed)

        profile = equilibrium.FiniteSupportProfile(game.n_players, rule)
    seeds = np.random.SeedSequence(seed).spawn(args.samples)
    lines = []
    for k, ss in enumerate(seeds):
        h, prob = sample_play(profile, args.horizon, ss)
        lines.append(json.dumps({"sample": k, "prob": fmt(prob), "play": [game.joint_labels(a) for a in h]},
                                sort_keys=True))
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "minmax": cmd_minmax,
    "punish": cmd_punish,
    "bestresponse": cmd_bestresponse,
    "equilibrium": cmd_equilibrium,
    "audit": cmd_audit,
    "dtrace": cmd_dtrace,
    "oneshot-approx": cmd_oneshot_approx,
    "oneshot-minmax": cmd_oneshot_minmax,
    "mrun-validate": cmd_mrun_validate,
    "simulate": cmd_simulate,
}


def _uint(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _seed(text):
    v = _uint(text)
    if v >= 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="game-spec file (or a bundled name: voorneveld, matching-pennies)")
    common.add_argument("--eps", help="epsilon, one value or a comma-separated list per player")
    common.add_argument("--seed", type=_seed, help="64-bit seed (required by randomized commands)")
    common.add_argument("--tol", type=float, help="tolerance (solver for minmax/punish, audit otherwise)")
    common.add_argument("--horizon", type=_uint, default=100)
    common.add_argument("--cycle-bound", type=_uint, default=4, help="longest lasso cycle searched per component")
    common.add_argument("--threads", type=_uint, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--out", help="write the result here instead of standard output")
    common.add_argument("--lax", action="store_true", help="warn about unknown spec fields instead of failing")
    common.add_argument("--player", type=_uint, help="restrict to one player")

    p = argparse.ArgumentParser(prog="eqcli", description="Equilibria of repeated games with tail objectives.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("minmax", parents=[common], help="solver values per automaton state")
    sub.add_parser("punish", parents=[common], help="punishment strategies and their guarantees")
    s = sub.add_parser("bestresponse", parents=[common], help="best deviation values against a certificate")
    s.add_argument("--cert")
    sub.add_parser("equilibrium", parents=[common], help="full pipeline, emits a certificate")
    s = sub.add_parser("audit", parents=[common], help="re-audit an existing certificate")
    s.add_argument("--cert")
    s = sub.add_parser("dtrace", parents=[common], help="ledger trajectory rows along a sampled play")
    s.add_argument("--example", choices=["matching-pennies", "voorneveld"], default="matching-pennies")
    s.add_argument("--w", type=float, default=0.9)
    s.add_argument("--stages", type=_uint, default=60)
    s.add_argument("--delta", type=float, default=0.0)
    s = sub.add_parser("oneshot-approx", parents=[common], help="finitistic approximation table")
    s.add_argument("--n-max", type=_uint, default=12)
    s.add_argument("--samples", type=_uint, default=10_000)
    s.add_argument("--q", type=float, default=0.5, help="probability of action 1 for every opponent")
    s = sub.add_parser("oneshot-minmax", parents=[common], help="classical vs finitistic one-shot minmax")
    s.add_argument("--example", choices=["matching-pennies", "never-attained"], default="matching-pennies")
    s.add_argument("--opponents", type=_uint, default=3)
    s.add_argument("--game", help="JSON file with 'sizes' and 'payoffs'")
    s = sub.add_parser("mrun-validate", parents=[common], help="legality of auxiliary-game runs")
    s.add_argument("--run", help="JSON run (or list of runs); sampled from the pennies ledger if omitted")
    s.add_argument("--w", type=float, default=0.9)
    s.add_argument("--plays", type=_uint, default=100)
    s = sub.add_parser("simulate", parents=[common], help="sampled plays under a certificate's profile")
    s.add_argument("--cert")
    s.add_argument("--samples", type=_uint, default=5)
    s.add_argument("--deviate", help="PLAYER:STAGE:ACTION forced deviation")
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (InputError, SpecError, GameSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main(argv=None):
    configure_logging()
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
