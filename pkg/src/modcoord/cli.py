"""Command line front end.

Exit status: 0 on success, 1 for malformed input or failed checks,
2 when a scenario violates a modelling assumption, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
import yaml

from .errors import ModCoordError

log = logging.getLogger("modcoord")


def _scenario(args):
    from .harness.scenario import default_scenario, load_scenario

    s = load_scenario(args.scenario) if args.scenario else default_scenario()
    return s.with_options(dt=args.dt, horizon=args.horizon, seed=args.seed,
                          oracle_every=args.oracle_every)


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    from .harness.simulate import run_closed_loop

    s = _scenario(args)
    trace = run_closed_loop(s, oracle=not args.no_oracle)
    out = args.out or "trace.csv"
    trace.to_csv(out)
    q = trace.block("Q_")[-1]
    log.info("wrote %d rows to %s; final Q = %s", len(trace), out, np.array2string(q, precision=4))
    return 0


def cmd_oracle(args):
    from .equilibrium import solve_ne
    from .game import GameState, game_map
    from .regulation import control_target

    s = _scenario(args)
    if args.zeta:
        zeta = np.array([float(x) for x in args.zeta.split(",")])
    else:
        zeta = control_target(s.plant0.Q, s.plant0.c, s.regulation)
    eta = solve_ne(s.game, zeta)
    st = GameState.from_vector(eta, s.game.layout)
    doc = {"zeta": zeta.tolist(), "beta": st.beta.tolist(), "alpha": st.alpha.tolist(),
           "mu": st.mu.tolist(), "lambda": st.lam.tolist(),
           "residual": float(np.max(np.abs(game_map(s.game, eta, zeta)))),
           "costs": s.game.costs(eta).tolist()}
    _emit(yaml.safe_dump(doc, sort_keys=False), args.out)
    return 0


def cmd_constants(args):
    from .harness.ledger import constants_ledger

    s = _scenario(args)
    led = constants_ledger(s, sample_count=args.samples)
    _emit(json.dumps(led.to_dict(), indent=2) + "\n", args.out)
    return 0


def cmd_check(args):
    from .harness.checks import run_checks

    s = _scenario(args)
    results = run_checks(s, seed=s.seed)
    _emit("".join(r.line() + "\n" for r in results), args.out)
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="modcoord", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("run", cmd_run, "simulate the closed loop and write a CSV trace"),
                               ("oracle", cmd_oracle, "solve the equilibrium for one service target"),
                               ("constants", cmd_constants, "evaluate the constants ledger"),
                               ("check", cmd_check, "run the invariant suite")):
        sp = sub.add_parser(name, help=helptext)
        sp.set_defaults(func=fn)
        sp.add_argument("--scenario", help="scenario YAML file (default: built-in 3-station ring)")
        sp.add_argument("--out", help="output path (default: stdout, or trace.csv for run)")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--oracle-every", type=int, dest="oracle_every")
        if name == "run":
            sp.add_argument("--no-oracle", action="store_true", help="skip equilibrium samples")
        if name == "oracle":
            sp.add_argument("--zeta", help="comma-separated service target (default: U at t=0)")
        if name == "constants":
            sp.add_argument("--samples", type=int, default=10_000,
                            help="sampled pairs for the empirical Lipschitz constants")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.dt is not None and args.dt <= 0:
        log.error("--dt must be positive")
        return 1
    try:
        return args.func(args)
    except ModCoordError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
