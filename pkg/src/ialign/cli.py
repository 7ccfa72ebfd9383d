"""Command line front end.

Subcommands take a scenario description in JSON and write a CSV table:

    ialign run sweep.json --out results.csv
    ialign feasibility probe.json --trials 20
    ialign relay relay.json --stdout
    ialign selftest

Progress and diagnostics go to stderr; only CSV ever goes to stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import harness
from ._backend import BACKEND


def _add_common(parser, trials_help):
    parser.add_argument("spec", help="path to the scenario JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the base seed")
    parser.add_argument("--trials", type=int, default=None, help=trials_help)
    parser.add_argument("--out", default=None, help="output CSV path (overrides the spec)")
    parser.add_argument(
        "--stdout", action="store_true", help="write CSV to stdout instead of a file"
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ialign",
        description="Interference alignment simulations on K-user MIMO networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="power sweep on a plain network")
    _add_common(p_run, "override the trial count")
    p_run.add_argument("--jobs", type=int, default=None, help="worker processes")

    p_feas = sub.add_parser("feasibility", help="stream-allocation feasibility probe")
    _add_common(p_feas, "override the trial count")

    p_relay = sub.add_parser("relay", help="two-slot relay topology sweep")
    _add_common(p_relay, "override the trial count")
    p_relay.add_argument("--jobs", type=int, default=None, help="worker processes")

    p_self = sub.add_parser("selftest", help="quick invariant checks")
    p_self.add_argument("--seed", type=int, default=2024, help="seed for the checks")
    return parser


def _apply_overrides(spec, args):
    updates = {}
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.out is not None:
        updates["output_path"] = args.out
    return dataclasses.replace(spec, **updates) if updates else spec


def _deliver(text_writer, spec, args):
    if args.stdout:
        text_writer(sys.stdout)
        return
    path = spec.output_path
    if path is None:
        raise ValueError("no output path: set output_path in the spec, --out, or --stdout")
    text_writer(path)
    print(f"wrote {path}", file=sys.stderr)


def _cmd_run(args):
    spec = _apply_overrides(harness.load_scenario(args.spec), args)
    table = harness.run_scenario(spec, jobs=args.jobs, progress=not args.stdout)
    _deliver(lambda dest: harness.emit_csv(table, dest), spec, args)
    for p_db, mean, good, total in harness.mean_rates_by_power(table):
        print(
            f"[{spec.name}] {p_db:g} dB: mean sum rate {mean:.4f} "
            f"({good}/{total} converged)",
            file=sys.stderr,
        )


def _cmd_feasibility(args):
    spec = _apply_overrides(harness.load_feasibility(args.spec), args)
    rows = harness.feasibility_table(spec, progress=not args.stdout)
    _deliver(lambda dest: harness.emit_feasibility_csv(rows, dest), spec, args)


def _cmd_relay(args):
    spec = _apply_overrides(harness.load_scenario(args.spec), args)
    table = harness.relay_sweep(spec, jobs=args.jobs, progress=not args.stdout)
    _deliver(lambda dest: harness.emit_csv(table, dest), spec, args)


def _selftest(seed):
    """Small end-to-end invariant checks; returns the failure count."""
    from . import channel, linalg, solvers

    failures = 0

    def check(name, ok):
        nonlocal failures
        status = "ok" if ok else "FAIL"
        print(f"  {name}: {status}", file=sys.stderr)
        failures += 0 if ok else 1

    print(f"ialign selftest (backend: {BACKEND})", file=sys.stderr)
    rng = np.random.default_rng(seed)

    config = channel.NetworkConfig.uniform(3, 2, 2, 1)
    ch = channel.generate_network(config, seed)
    check(
        "channel generation is deterministic",
        all(
            np.array_equal(ch.matrices[i][j], channel.generate_network(config, seed).matrices[i][j])
            for i in range(3)
            for j in range(3)
        ),
    )
    twice = channel.reciprocal_channels(channel.reciprocal_channels(ch))
    check(
        "reciprocity is an involution",
        all(
            np.array_equal(ch.matrices[i][j], twice.matrices[i][j])
            for i in range(3)
            for j in range(3)
        ),
    )

    a = channel.complex_gaussian(rng, 4, 4)
    herm = a @ a.conj().T + np.eye(4)
    pair = linalg.eigh_smallest(herm, 2)
    resid = np.linalg.norm(herm @ pair.vectors - pair.vectors * pair.values, ord=2)
    check("eigensolver residual", resid <= 1e-9 * max(1.0, np.linalg.norm(herm, 2)))

    q = linalg.orthonormalize(channel.complex_gaussian(rng, 5, 3))
    check("orthonormalize contract", np.abs(q.conj().T @ q - np.eye(3)).max() <= 1e-12)

    solution, trace = solvers.run_min_leakage(ch, config)
    diffs = np.diff(trace.wli)
    check("weighted leakage is non-increasing", bool(np.all(diffs <= 1e-12)))
    check("three 2x2 users align one stream each", trace.wli[-1] < 1e-9)

    fwd = solvers.weighted_leakage(ch, solution, config)
    rev = solvers.weighted_leakage(
        channel.reciprocal_channels(ch),
        solvers.Solution(precoders=solution.filters, filters=solution.precoders),
        config.reciprocal(),
    )
    check("forward/reverse leakage identity", abs(fwd - rev) <= 1e-10)

    print("selftest: " + ("all checks passed" if failures == 0 else f"{failures} FAILED"),
          file=sys.stderr)
    return failures


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            _cmd_run(args)
        elif args.command == "feasibility":
            _cmd_feasibility(args)
        elif args.command == "relay":
            _cmd_relay(args)
        else:
            return 1 if _selftest(args.seed) else 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
