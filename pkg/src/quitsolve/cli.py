"""Command-line front end.

Exit status: 0 when a check passes (or a command simply completes), 1 when
a check fails, 2 on solver failures and on malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import km, logit
from .auxiliary import build_auxiliary, payoff_equivalence_check
from .errors import ConvergenceFailure, IndifferenceRootNotBracketed, QuitSolveError
from .game import (
    GeneralQuittingGame,
    game_from_dict,
    game_to_dict,
    profile_from_dict,
    profile_to_dict,
)
from .path import limit_schedule, section3_solve, trace_alpha_path
from .suites import random_game
from .verification import (
    Discounted,
    SignalThresholdStrategy,
    StationaryStrategy,
    Undiscounted,
    check_aux_absorbing_equilibrium,
    check_epsilon_equilibrium,
    monte_carlo_payoff,
)

log = logging.getLogger("quitsolve")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class InputError(QuitSolveError):
    pass


# ------------------------------------------------------------------ I/O


def _read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_game(path) -> GeneralQuittingGame:
    data = _read_json(path)
    try:
        return game_from_dict(data)
    except (QuitSolveError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _write_atomic(path, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".quitsolve-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _fmt(v: float) -> str:
    return "%.17g" % v


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _vector(g: GeneralQuittingGame, data, what: str) -> np.ndarray:
    """A per-player number given as a list or as {player: value}."""
    if isinstance(data, dict):
        missing = [p for p in g.players if p not in data]
        if missing:
            raise InputError(f"{what}: no entry for player(s) {missing}")
        return np.array([float(data[p]) for p in g.players])
    arr = np.asarray(data, dtype=float).reshape(-1)
    if arr.size != g.num_players:
        raise InputError(f"{what}: {arr.size} entries for {g.num_players} players")
    return arr


def _q(g, path) -> np.ndarray:
    return np.zeros(g.num_players) if path is None else _vector(g, _read_json(path), "q")


def _alpha(g: GeneralQuittingGame, data) -> tuple:
    """Continue mixes as {player: {action: prob}} or {player: [probs]}."""
    out = []
    for i, p in enumerate(g.players):
        if p not in data:
            raise InputError(f"alpha: no entry for player {p!r}")
        row = data[p]
        cont = g.continue_actions[i]
        if isinstance(row, dict):
            unknown = set(row) - set(cont)
            if unknown:
                raise InputError(f"alpha: player {p!r} has unknown continue action(s) {sorted(unknown)}")
            out.append(np.array([float(row.get(a, 0.0)) for a in cont]))
        else:
            out.append(np.asarray(row, dtype=float))
    return tuple(out)


def _profile(g, path):
    try:
        return profile_from_dict(g, _read_json(path))
    except (QuitSolveError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _action_probs(g, i, spec, what):
    acts = g.actions(i)
    if isinstance(spec, dict):
        unknown = set(spec) - set(acts)
        if unknown:
            raise InputError(f"{what}: unknown action(s) {sorted(unknown)}")
        return np.array([float(spec.get(a, 0.0)) for a in acts])
    arr = np.asarray(spec, dtype=float)
    if arr.size != len(acts):
        raise InputError(f"{what}: {arr.size} probabilities for {len(acts)} actions")
    return arr


def _strategies(g, data):
    """Per-player strategies; a bare {action: prob} object means stationary."""
    out = []
    for i, p in enumerate(g.players):
        if p not in data:
            raise InputError(f"strategy: no entry for player {p!r}")
        spec = data[p]
        kind = spec.get("type", "stationary") if isinstance(spec, dict) else "stationary"
        if kind == "stationary":
            probs = spec.get("probs", spec) if isinstance(spec, dict) else spec
            if isinstance(probs, dict):
                probs = {k: v for k, v in probs.items() if k != "type"}
            out.append(StationaryStrategy(_action_probs(g, i, probs, f"strategy {p!r}")))
        elif kind == "threshold":
            rules = []
            for r in spec["rules"]:
                rules.append((r["lo"], r["hi"], _action_probs(g, i, r["probs"], f"strategy {p!r}")))
            default = spec.get("default")
            if default is not None:
                default = _action_probs(g, i, default, f"strategy {p!r}")
            out.append(SignalThresholdStrategy(rules, default))
        else:
            raise InputError(f"strategy {p!r}: unknown type {kind!r}")
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text)
    if not (0 <= v < 2**64):
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


# -------------------------------------------------------------- config


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    verbosity: int = 0

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        d = dict(vars(ns))
        command = " ".join(v for v in (d.pop("command"), d.pop("sub", None)) if v)
        d.pop("func", None)
        out = d.pop("out", None)
        seed = d.pop("seed", 0)
        verbosity = d.pop("verbose", 0)
        inputs = {k: d.pop(k) for k in list(d) if k in _INPUT_KEYS}
        cfg = cls(command, inputs, d, seed, out, verbosity)
        cfg.validate()
        return cfg

    def validate(self):
        for key in ("lam", "discount"):
            v = self.params.get(key)
            if v is not None and not (0.0 < v <= 1.0):
                raise InputError(f"--{key.replace('lam', 'lambda')} must lie in (0, 1]")
        lams = self.params.get("lambda_list")
        if lams is not None and any(b >= a for a, b in zip(lams, lams[1:])):
            raise InputError("--lambda-list must be strictly decreasing")
        if lams is not None and any(not (0.0 < v <= 1.0) for v in lams):
            raise InputError("--lambda-list entries must lie in (0, 1]")
        ns = self.params.get("n_list")
        if ns is not None and any(b <= a for a, b in zip(ns, ns[1:])):
            raise InputError("--n-list must be strictly increasing")
        if not (0 <= self.seed < 2**64):
            raise InputError("seed must be an unsigned 64-bit integer")


_INPUT_KEYS = {"game", "profile", "alpha", "q", "xhat", "strategy", "x0", "alpha_start", "alpha_end"}


# ------------------------------------------------------------ commands


def cmd_validate(cfg):
    g = _load_game(cfg.inputs["game"])
    info = {
        "players": list(g.players),
        "continue_actions": {p: list(c) for p, c in zip(g.players, g.continue_actions)},
        "recursive": g.is_recursive,
        "positive": g.is_positive,
    }
    _write_atomic(cfg.out, _json_text(info))
    return EXIT_OK


def generate_instance(continue_counts, positive=True, recursive=True, seed=0) -> str:
    """JSON text of a random game; identical for identical arguments."""
    return _json_text(game_to_dict(random_game(continue_counts, positive, recursive, seed)))


def cmd_generate(cfg):
    try:
        text = generate_instance(cfg.params["shape"], cfg.params["positive"], cfg.params["recursive"], cfg.seed)
    except QuitSolveError as exc:
        raise InputError(str(exc)) from None
    _write_atomic(cfg.out, text)
    return EXIT_OK


def cmd_aux_build(cfg):
    g = _load_game(cfg.inputs["game"])
    aux = build_auxiliary(g, _alpha(g, _read_json(cfg.inputs["alpha"])), _q(g, cfg.inputs["q"]))
    _write_atomic(cfg.out, _json_text(aux.to_dict()))
    return EXIT_OK


def cmd_aux_check(cfg):
    g = _load_game(cfg.inputs["game"])
    alpha = _alpha(g, _read_json(cfg.inputs["alpha"]))
    q = _q(g, cfg.inputs["q"])
    xhat = _vector(g, _read_json(cfg.inputs["xhat"]), "xhat")
    rep = payoff_equivalence_check(g, alpha, q, xhat, cfg.params["lam"])
    ok = rep.gap <= cfg.params["tol"]
    out = {"mode": rep.mode, "base_value": rep.base_value.tolist(), "aux_value": rep.aux_value.tolist(),
           "gap": rep.gap, "passed": ok}
    _write_atomic(cfg.out, _json_text(out))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_km_report(cfg):
    p = cfg.params
    rows = []
    ok = True
    for n in p["n"]:
        rep = km.convergence_report(n, p["samples"], (-p["box"], p["box"]), p["dim"], cfg.seed)
        rows += [[n, k, float(dev), rep.bound] for k, dev in enumerate(rep.deviations)]
        ok &= rep.within_bound
        log.info("n=%g: sup deviation %.3e, bound %.3e", n, rep.sup, rep.bound)
    _write_atomic(cfg.out, _csv_text(["n", "sample", "deviation", "bound"], rows))
    return EXIT_OK if ok else EXIT_FAIL


def _profile_rows(g, x):
    return {p: [float(v) for v in x[i]] for i, p in enumerate(g.players)}


def cmd_logit_solve(cfg):
    g = _load_game(cfg.inputs["game"])
    n = cfg.params["n"]
    x0 = None if cfg.inputs.get("x0") is None else _profile(g, cfg.inputs["x0"]).probs
    if n <= 1.0 or x0 is not None:
        pt = logit.logit_fixed_point(g.payoff, n, x0)
    else:
        path = logit.logit_path(g.payoff, logit.default_schedule(n, cfg.params["steps"]))
        if not path.completed:
            raise ConvergenceFailure(f"logit path failed: {path.failure}")
        pt = path[-1]
    out = {"n": pt.n, "residual": pt.residual, "profile": profile_to_dict(g, pt.x),
           "regret": logit.regrets(g.payoff, pt.x.probs).tolist()}
    _write_atomic(cfg.out, _json_text(out))
    return EXIT_OK


def cmd_logit_path(cfg):
    g = _load_game(cfg.inputs["game"])
    path = logit.logit_path(g.payoff, logit.default_schedule(cfg.params["n"], cfg.params["steps"]))
    header = ["n", "residual"] + [f"{p}:{a}" for i, p in enumerate(g.players) for a in g.actions(i)]
    header += [f"regret:{p}" for p in g.players]
    rows = []
    for pt in path:
        reg = logit.regrets(g.payoff, pt.x.probs)
        rows.append([pt.n, pt.residual] + [float(v) for xi in pt.x for v in xi] + [float(r) for r in reg])
    _write_atomic(cfg.out, _csv_text(header, rows))
    if not path.completed:
        log.error("logit path stopped early: %s", path.failure)
        return EXIT_ERROR
    return EXIT_OK


def _path_rows(g, path):
    header = ["s"]
    for i, p in enumerate(g.players):
        header += [f"alpha:{p}:{a}" for a in g.continue_actions[i]]
    header += [f"z:{p}" for p in g.players] + ["p"] + [f"value:{p}" for p in g.players] + ["residual"]
    rows = []
    for pt in path:
        row = [pt.s]
        for a in pt.alpha:
            row += [float(v) for v in a]
        row += [float(v) for v in pt.z] + [pt.p] + [float(v) for v in pt.value] + [pt.residual]
        rows.append(row)
    return header, rows


def _default_endpoints(g):
    ones = tuple(np.ones(k - 1) for k in g.action_counts[1:])
    if g.action_counts[0] != 3 or any(k != 2 for k in g.action_counts[1:]):
        raise InputError("give --alpha-start and --alpha-end unless player 1 has 2 continue actions and the rest 1")
    return (np.array([0.0, 1.0]),) + ones, (np.array([1.0, 0.0]),) + ones


def cmd_path_trace(cfg):
    g = _load_game(cfg.inputs["game"])
    q = _q(g, cfg.inputs["q"])
    if cfg.inputs.get("alpha_start") and cfg.inputs.get("alpha_end"):
        a0 = _alpha(g, _read_json(cfg.inputs["alpha_start"]))
        a1 = _alpha(g, _read_json(cfg.inputs["alpha_end"]))
    else:
        a0, a1 = _default_endpoints(g)
    path = trace_alpha_path(g, q, cfg.params["lam"], cfg.params["n"], a0, a1)
    header, rows = _path_rows(g, path)
    _write_atomic(cfg.out, _csv_text(header, rows))
    if not path.end_reached:
        log.error("path stalled: %s", path.failure)
        return EXIT_ERROR
    return EXIT_OK


def cmd_path_solve3(cfg):
    g = _load_game(cfg.inputs["game"])
    q = None if cfg.inputs["q"] is None else _q(g, cfg.inputs["q"])
    x, rep = section3_solve(g, q, cfg.params["lambda_list"], cfg.params["n_list"], cfg.params["eps"])
    _write_atomic(cfg.out, _json_text(profile_to_dict(g, x)))
    if cfg.params.get("report"):
        _write_atomic(cfg.params["report"], _json_text(rep.to_dict(g)))
    log.info("branch %s, max regret %.3e", rep.branch, rep.regret.max_regret)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_path_joint(cfg):
    g = _load_game(cfg.inputs["game"])
    q = _q(g, cfg.inputs["q"])
    rep = limit_schedule(g, q, cfg.params["lambda_list"], cfg.params["n_list"], floor=cfg.params["floor"])
    _write_atomic(cfg.out, _json_text(rep.to_dict()))
    if rep.final.point is None:
        return EXIT_ERROR
    return EXIT_OK


def _mode(g, cfg):
    q = None if cfg.inputs.get("q") is None else _q(g, cfg.inputs["q"])
    if cfg.params["mode"] == "discounted":
        if cfg.params["lam"] is None:
            raise InputError("--mode discounted needs --lambda")
        return Discounted(cfg.params["lam"], q)
    return Undiscounted(q)


def cmd_check_eq(cfg):
    g = _load_game(cfg.inputs["game"])
    x = _profile(g, cfg.inputs["profile"])
    ok, rep = check_epsilon_equilibrium(g, x, _mode(g, cfg), cfg.params["eps"])
    out = rep.to_dict(g)
    out.update({"epsilon": cfg.params["eps"], "passed": ok})
    _write_atomic(cfg.out, _json_text(out))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_check_aux(cfg):
    g = _load_game(cfg.inputs["game"])
    alpha = _alpha(g, _read_json(cfg.inputs["alpha"]))
    xhat = _vector(g, _read_json(cfg.inputs["xhat"]), "xhat")
    res = check_aux_absorbing_equilibrium(g, alpha, _q(g, cfg.inputs["q"]), xhat, cfg.params["eps"])
    out = {"equilibrium": res.is_equilibrium, "regret": res.regrets.tolist(), "p": res.p, "category": res.category}
    _write_atomic(cfg.out, _json_text(out))
    return EXIT_OK if res.is_equilibrium else EXIT_FAIL


def cmd_simulate(cfg):
    g = _load_game(cfg.inputs["game"])
    strategies = _strategies(g, _read_json(cfg.inputs["strategy"]))
    q = None if cfg.inputs.get("q") is None else _q(g, cfg.inputs["q"])
    est = monte_carlo_payoff(g, strategies, q, cfg.params["T"], cfg.params["runs"], cfg.seed,
                             discount=cfg.params["discount"])
    out = est.to_dict()
    out["players"] = list(g.players)
    _write_atomic(cfg.out, _json_text(out))
    return EXIT_OK


# -------------------------------------------------------------- parser


def _common(p, out_help="output file (default stdout)"):
    p.add_argument("--out", "-o", default=None, help=out_help)
    p.add_argument("--verbose", "-v", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quitsolve", description="Equilibria of general quitting games.")
    sp = ap.add_subparsers(dest="command", required=True)

    p = sp.add_parser("validate", help="parse a game file and report its flags")
    p.add_argument("game")
    _common(p)
    p.set_defaults(func=cmd_validate)

    p = sp.add_parser("generate", help="random game in the positive/recursive class")
    p.add_argument("--shape", type=_int_list, required=True, help="continue-action counts, e.g. 2,1,1")
    p.add_argument("--positive", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--recursive", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=_seed, default=0)
    _common(p)
    p.set_defaults(func=cmd_generate)

    aux = sp.add_parser("aux", help="auxiliary binary games").add_subparsers(dest="sub", required=True)
    p = aux.add_parser("build", help="write the auxiliary game for given alpha and q")
    p.add_argument("--game", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--q", default=None)
    _common(p)
    p.set_defaults(func=cmd_aux_build)
    p = aux.add_parser("check", help="compare lifted and auxiliary stationary values")
    p.add_argument("--game", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--q", default=None)
    p.add_argument("--xhat", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    _common(p)
    p.set_defaults(func=cmd_aux_check)

    kmp = sp.add_parser("km", help="structure-map diagnostics").add_subparsers(dest="sub", required=True)
    p = kmp.add_parser("report", help="sup |h_n - h| against the d * eps(n) bound")
    p.add_argument("--n", type=_float_list, default=[20.0, 50.0, 100.0], help="one or more n, comma-separated")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--box", type=float, default=2.0)
    p.add_argument("--seed", type=_seed, default=0)
    _common(p)
    p.set_defaults(func=cmd_km_report)

    lg = sp.add_parser("logit", help="logit equilibria of the payoff table").add_subparsers(dest="sub", required=True)
    p = lg.add_parser("solve", help="logit equilibrium at sharpness n")
    p.add_argument("--game", required=True)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--x0", default=None, help="starting profile")
    _common(p)
    p.set_defaults(func=cmd_logit_solve)
    p = lg.add_parser("path", help="CSV of the logit path up to n-max")
    p.add_argument("--game", required=True)
    p.add_argument("--n-max", "--n", dest="n", type=float, required=True)
    p.add_argument("--steps", type=int, default=40)
    _common(p)
    p.set_defaults(func=cmd_logit_path)

    pa = sp.add_parser("path", help="path following and fixed points").add_subparsers(dest="sub", required=True)
    p = pa.add_parser("trace", help="trace discounted logit equilibria over a continue mix")
    p.add_argument("--game", required=True)
    p.add_argument("--q", default=None)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--alpha-start", default=None)
    p.add_argument("--alpha-end", default=None)
    _common(p)
    p.set_defaults(func=cmd_path_trace)
    p = pa.add_parser("solve3", help="equilibrium via the path over player 1's continue mix")
    p.add_argument("--game", required=True)
    p.add_argument("--q", default=None)
    p.add_argument("--lambda-list", "--lambda", dest="lambda_list", type=_float_list, default=[1e-3])
    p.add_argument("--n-list", "--n", dest="n_list", type=_float_list, default=[100.0])
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--report", default=None, help="write the full report here")
    _common(p, "profile file (default stdout)")
    p.set_defaults(func=cmd_path_solve3)
    p = pa.add_parser("joint", help="joint fixed point over a lambda x n grid")
    p.add_argument("--game", required=True)
    p.add_argument("--q", default=None)
    p.add_argument("--lambda-list", dest="lambda_list", type=_float_list, required=True)
    p.add_argument("--n-list", dest="n_list", type=_float_list, required=True)
    p.add_argument("--floor", type=float, default=1e-3)
    _common(p)
    p.set_defaults(func=cmd_path_joint)

    ck = sp.add_parser("check", help="equilibrium checks").add_subparsers(dest="sub", required=True)
    p = ck.add_parser("eq", help="epsilon-equilibrium check against stationary deviations")
    p.add_argument("--game", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--mode", choices=("undiscounted", "discounted"), default="undiscounted")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--q", default=None)
    p.add_argument("--eps", type=float, default=1e-2)
    _common(p)
    p.set_defaults(func=cmd_check_eq)
    p = ck.add_parser("aux", help="classify an auxiliary-game equilibrium by absorption")
    p.add_argument("--game", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--q", default=None)
    p.add_argument("--xhat", required=True)
    p.add_argument("--eps", type=float, default=1e-2)
    _common(p)
    p.set_defaults(func=cmd_check_aux)

    p = sp.add_parser("simulate", help="Monte Carlo payoff of a strategy profile")
    p.add_argument("--game", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--q", default=None)
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--discount", type=float, default=None)
    _common(p)
    p.set_defaults(func=cmd_simulate)
    return ap


def run(cfg: RunConfig, func) -> int:
    try:
        return func(cfg)
    except (InputError, QuitSolveError, ValueError) as exc:
        kind = "input error" if isinstance(exc, (InputError, ValueError)) else "solver failure"
        if isinstance(exc, (ConvergenceFailure, IndifferenceRootNotBracketed)):
            kind = "solver failure"
        print(f"quitsolve: {kind}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.from_args(ns)
    except InputError as exc:
        print(f"quitsolve: input error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run(cfg, ns.func)


if __name__ == "__main__":
    sys.exit(main())
