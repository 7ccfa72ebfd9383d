"""Scenario harness: reproducible Monte-Carlo sweeps over transmit power.

A scenario is a JSON-describable recipe (network shape, algorithm,
power grid in dB, trial count, base seed, solver options).  Running one
produces a flat result table, one row per (power, trial) pair, each row
reproducible in isolation because its seed is a pure function of the
base seed and its grid position.  Tables serialize to CSV with
round-trippable floats; re-running a scenario, serially or with a
process pool, emits byte-identical output.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rates, solvers
from .channel import (
    NetworkConfig,
    generate_network,
    matched_relay_gain,
    random_relay_params,
    relay_effective_channels,
    whiten_noise,
)
from .rates import db_to_linear
from .solvers import SolverOptions, mix_seed

ALGORITHMS = (
    "min_leakage",
    "max_sinr",
    "interference_avoidance",
    "closed_form_3user",
    "tdma",
    "isotropic",
)
_ITERATIVE = ("min_leakage", "max_sinr", "interference_avoidance")
_RELAY_ALGORITHMS = ("min_leakage", "max_sinr", "closed_form_3user")


def derive_seed(base_seed, trial, p_index):
    """Per-row channel seed: stable hash of the grid position, xor the base.

    Uses sha256 rather than Python's salted ``hash`` so the value is
    identical across processes and sessions.
    """
    digest = hashlib.sha256(struct.pack("<qq", int(trial), int(p_index))).digest()
    return (int(base_seed) ^ int.from_bytes(digest[:8], "little")) & ((1 << 63) - 1)


@dataclass(frozen=True)
class ScenarioSpec:
    """One runnable scenario.

    ``network`` is a shape template; the power grid overrides every
    user's forward and reverse power at each grid point.  For relay
    scenarios ``relay_gain`` is a nonnegative number or ``"matched"``
    (relay spends the same power as a source) and the network template
    is implicit (three single-antenna pairs).
    """

    name: str
    algorithm: str
    power_grid_db: tuple[float, ...]
    trials: int
    base_seed: int
    solver: SolverOptions = SolverOptions()
    network: NetworkConfig | None = None
    relay_gain: float | str | None = None
    output_path: str | None = None

    def __post_init__(self):
        if not self.name or any(c in self.name for c in ",\n\r"):
            raise ValueError("scenario name must be nonempty without commas/newlines")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; pick from {ALGORITHMS}")
        grid = tuple(float(p) for p in self.power_grid_db)
        if not grid:
            raise ValueError("power grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("power grid must be strictly increasing")
        object.__setattr__(self, "power_grid_db", grid)
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.relay_gain is not None:
            if isinstance(self.relay_gain, str):
                if self.relay_gain != "matched":
                    raise ValueError("relay_gain must be a number or 'matched'")
            elif float(self.relay_gain) < 0:
                raise ValueError("relay_gain must be nonnegative")


@dataclass(frozen=True)
class TrialRow:
    scenario: str
    p_db: float
    trial: int
    seed: int
    sum_rate: float
    rate_user: tuple[float, ...]
    wli_final: float | None
    p_fraction: tuple[float, ...] | None
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ResultTable:
    name: str
    num_users: int
    rows: tuple[TrialRow, ...]


def _nan_tuple(k):
    return (float("nan"),) * k


def _trial_options(spec, seed):
    # decouple the solver's init stream from the channel stream
    return dataclasses.replace(spec.solver, init_seed=mix_seed(seed, 1))


def _solve(algorithm, ch, config, opts):
    if algorithm == "min_leakage":
        return solvers.run_min_leakage(ch, config, opts)
    if algorithm == "max_sinr":
        return solvers.run_max_sinr(ch, config, opts)
    if algorithm == "interference_avoidance":
        return solvers.run_interference_avoidance(ch, config, opts)
    raise ValueError(f"not an iterative algorithm: {algorithm}")


def _scenario_row(spec, p_idx, trial):
    k = spec.network.num_users
    p_db = spec.power_grid_db[p_idx]
    seed = derive_seed(spec.base_seed, trial, p_idx)
    config = spec.network.with_power(db_to_linear(p_db))
    ch = generate_network(config, seed)
    try:
        if spec.algorithm in _ITERATIVE:
            solution, trace = _solve(spec.algorithm, ch, config, _trial_options(spec, seed))
            iterations, converged = trace.iterations, trace.converged
        elif spec.algorithm == "closed_form_3user":
            solution = solvers.closed_form_ia_3user(ch)
            iterations, converged = 0, True
        elif spec.algorithm == "tdma":
            per_user = rates.tdma_rates(ch, config)
            return TrialRow(
                spec.name, p_db, trial, seed, float(np.sum(per_user)),
                tuple(float(r) for r in per_user), None, None, 0, True,
            )
        else:  # isotropic
            per_user = rates.isotropic_rates(ch, config)
            return TrialRow(
                spec.name, p_db, trial, seed, float(np.sum(per_user)),
                tuple(float(r) for r in per_user), None, None, 0, True,
            )
        report = rates.sum_rate(ch, solution, config)
        wli = float(solvers.weighted_leakage(ch, solution, config))
        p_frac = tuple(
            rates.interference_fraction(k_, ch, solution, config) for k_ in range(k)
        )
        return TrialRow(
            spec.name, p_db, trial, seed, report.sum_rate,
            tuple(float(r) for r in report.per_user_rate), wli, p_frac,
            iterations, converged,
        )
    except (ValueError, RuntimeError, np.linalg.LinAlgError):
        return TrialRow(
            spec.name, p_db, trial, seed, float("nan"),
            _nan_tuple(k), float("nan"), _nan_tuple(k), 0, False,
        )


def _relay_row(spec, p_idx, trial):
    p_db = spec.power_grid_db[p_idx]
    seed = derive_seed(spec.base_seed, trial, p_idx)
    power = db_to_linear(p_db)
    gain = (
        matched_relay_gain(power)
        if spec.relay_gain == "matched"
        else float(spec.relay_gain)
    )
    params = random_relay_params(seed, gain)
    ch = whiten_noise(relay_effective_channels(params))
    config = NetworkConfig.uniform(3, 2, 2, 1, power=power)
    try:
        if spec.algorithm == "closed_form_3user":
            solution = solvers.closed_form_ia_3user(ch)
            iterations, converged = 0, True
        else:
            solution, trace = _solve(spec.algorithm, ch, config, _trial_options(spec, seed))
            iterations, converged = trace.iterations, trace.converged
        report = rates.sum_rate(ch, solution, config, slots=2.0)
        wli = float(solvers.weighted_leakage(ch, solution, config))
        p_frac = tuple(rates.interference_fraction(k, ch, solution, config) for k in range(3))
        return TrialRow(
            spec.name, p_db, trial, seed, report.sum_rate,
            tuple(float(r) for r in report.per_user_rate), wli, p_frac,
            iterations, converged,
        )
    except (ValueError, RuntimeError, np.linalg.LinAlgError):
        return TrialRow(
            spec.name, p_db, trial, seed, float("nan"),
            _nan_tuple(3), float("nan"), _nan_tuple(3), 0, False,
        )


def _run_grid(spec, row_fn, num_users, jobs, progress):
    tasks = [
        (p_idx, trial)
        for p_idx in range(len(spec.power_grid_db))
        for trial in range(spec.trials)
    ]
    if jobs is None or jobs <= 1:
        rows = []
        for i, (p_idx, trial) in enumerate(tasks):
            rows.append(row_fn(spec, p_idx, trial))
            if progress and (i + 1) % max(1, len(tasks) // 20) == 0:
                print(
                    f"[{spec.name}] {i + 1}/{len(tasks)} trials done",
                    file=sys.stderr,
                    flush=True,
                )
    else:
        # pool.map preserves task order, so the table is identical to a
        # serial run regardless of worker scheduling
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(
                    _row_task,
                    [(spec, row_fn.__name__, p_idx, trial) for p_idx, trial in tasks],
                    chunksize=max(1, len(tasks) // (4 * jobs)),
                )
            )
    return ResultTable(name=spec.name, num_users=num_users, rows=tuple(rows))


_ROW_FNS = {}


def _row_task(args):
    spec, fn_name, p_idx, trial = args
    return _ROW_FNS[fn_name](spec, p_idx, trial)


_ROW_FNS["_scenario_row"] = _scenario_row
_ROW_FNS["_relay_row"] = _relay_row


def run_scenario(spec, jobs=None, progress=False):
    """Run every (power, trial) cell of a plain-network scenario.

    Solver failures in a cell are recorded in that row (``converged``
    false, NaN metrics) without aborting the sweep.  ``jobs`` enables a
    process pool; the output is identical either way.
    """
    if spec.network is None:
        raise ValueError("scenario needs a network template")
    if spec.algorithm == "closed_form_3user":
        want = (3, (2, 2, 2), (2, 2, 2), (1, 1, 1))
        got = (
            spec.network.num_users,
            spec.network.tx_antennas,
            spec.network.rx_antennas,
            spec.network.streams,
        )
        if got != want:
            raise ValueError("closed_form_3user needs the 3-user 2x2 single-stream network")
    return _run_grid(spec, _scenario_row, spec.network.num_users, jobs, progress)


def relay_sweep(spec, jobs=None, progress=False):
    """Monte-Carlo sweep over the two-slot relay topology.

    Per trial: draw relay coefficients, build the effective two-slot
    channels, whiten the relay-colored noise, align with the chosen
    algorithm (one stream per user), and report rates per channel use
    (the two-slot normalizer is applied).
    """
    if spec.relay_gain is None:
        raise ValueError("relay scenario needs relay_gain")
    if spec.algorithm not in _RELAY_ALGORITHMS:
        raise ValueError(f"relay supports {_RELAY_ALGORITHMS}, not {spec.algorithm!r}")
    return _run_grid(spec, _relay_row, 3, jobs, progress)


@dataclass(frozen=True)
class FeasibilitySpec:
    """Stream-allocation probe over a family of equal-antenna networks."""

    name: str
    users: int
    antennas: int
    allocations: tuple[tuple[int, ...], ...]
    trials: int
    base_seed: int
    solver: SolverOptions = SolverOptions(restarts=3)
    output_path: str | None = None

    def __post_init__(self):
        if self.users < 1 or self.antennas < 1 or self.trials < 1:
            raise ValueError("users, antennas, and trials must be positive")
        allocs = tuple(tuple(int(d) for d in a) for a in self.allocations)
        if not allocs or any(len(a) != self.users for a in allocs):
            raise ValueError("each allocation needs one stream count per user")
        if any(not 1 <= d <= self.antennas for a in allocs for d in a):
            raise ValueError("stream counts must be in 1..antennas")
        object.__setattr__(self, "allocations", allocs)


@dataclass(frozen=True)
class FeasibilityRow:
    allocation: tuple[int, ...]
    total_streams: int
    median_p: float
    mean_p: float
    valid: bool


def feasibility_table(spec, progress=False):
    """Numeric feasibility probe: leftover-interference statistics.

    For each stream allocation, runs leakage minimization on ``trials``
    random networks and pools every receiver's leftover interference
    fraction p.  Medians near zero mean the allocation is achievable;
    clearly positive medians mean the iteration cannot align that many
    streams.  Allocations violating per-user antenna limits produce an
    invalid row (NaN statistics) and a warning on stderr.
    """
    out = []
    for a_idx, alloc in enumerate(spec.allocations):
        total = int(sum(alloc))
        if any(not 1 <= d <= spec.antennas for d in alloc):
            print(
                f"[{spec.name}] skipping allocation {alloc}: "
                f"stream counts must lie in [1, {spec.antennas}]",
                file=sys.stderr,
                flush=True,
            )
            out.append(FeasibilityRow(alloc, total, float("nan"), float("nan"), False))
            continue
        config = NetworkConfig(
            num_users=spec.users,
            tx_antennas=spec.antennas,
            rx_antennas=spec.antennas,
            streams=alloc,
            tx_power=1.0,
            reverse_tx_power=1.0,
        )
        pool = []
        for trial in range(spec.trials):
            seed = derive_seed(spec.base_seed, trial, a_idx)
            ch = generate_network(config, seed)
            opts = dataclasses.replace(spec.solver, init_seed=mix_seed(seed, 1))
            solution, _ = solvers.run_min_leakage(ch, config, opts)
            pool.extend(
                rates.interference_fraction(k, ch, solution, config)
                for k in range(spec.users)
            )
        out.append(
            FeasibilityRow(alloc, total, float(np.median(pool)), float(np.mean(pool)), True)
        )
        if progress:
            print(
                f"[{spec.name}] allocation {alloc}: median p = {out[-1].median_p:.3e}",
                file=sys.stderr,
                flush=True,
            )
    return tuple(out)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        # plain-float repr round-trips; numpy scalars repr as np.float64(..)
        return repr(float(value))
    return str(value)


def emit_csv(table, dest=None):
    """Serialize a result table to CSV.

    Floats are written with ``repr`` so parsing them back reproduces the
    exact values.  ``dest`` may be a path or a file object; with neither
    the CSV text is returned.  Identical tables always produce identical
    bytes.
    """
    k = table.num_users
    header = (
        "scenario,p_db,trial,seed,sum_rate,"
        + ",".join(f"rate_user_{i + 1}" for i in range(k))
        + ",wli_final,"
        + ",".join(f"p_{i + 1}" for i in range(k))
        + ",iterations,converged"
    )
    lines = [header]
    for r in table.rows:
        rate_user = list(r.rate_user) if r.rate_user is not None else [None] * k
        p_frac = list(r.p_fraction) if r.p_fraction is not None else [None] * k
        cells = (
            [r.scenario, r.p_db, r.trial, r.seed, r.sum_rate]
            + rate_user
            + [r.wli_final]
            + p_frac
            + [r.iterations, r.converged]
        )
        lines.append(",".join(_fmt(c) for c in cells))
    text = "\n".join(lines) + "\n"
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)
        return None
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return None


def emit_feasibility_csv(rows, dest=None):
    """CSV for feasibility rows: allocation, total streams, p statistics."""
    lines = ["allocation,total_streams,median_p,mean_p,valid"]
    for r in rows:
        alloc = "+".join(str(d) for d in r.allocation)
        lines.append(
            f"{alloc},{r.total_streams},{_fmt(r.median_p)},{_fmt(r.mean_p)},{_fmt(r.valid)}"
        )
    text = "\n".join(lines) + "\n"
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)
        return None
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return None


def mean_rates_by_power(table):
    """Mean sum rate per grid power over converged rows.

    Returns ``(p_db, mean_rate, n_converged, n_total)`` tuples in grid
    order; non-converged rows are excluded from the mean (the count
    shows how many survived).
    """
    groups: dict[float, list[TrialRow]] = {}
    order = []
    for r in table.rows:
        if r.p_db not in groups:
            groups[r.p_db] = []
            order.append(r.p_db)
        groups[r.p_db].append(r)
    out = []
    for p_db in order:
        rows = groups[p_db]
        good = [r.sum_rate for r in rows if r.converged and np.isfinite(r.sum_rate)]
        mean = float(np.mean(good)) if good else float("nan")
        out.append((p_db, mean, len(good), len(rows)))
    return out


def _strict(doc, known, where):
    unknown = set(doc) - set(known)
    if unknown:
        raise ValueError(f"unknown keys in {where}: {sorted(unknown)}")


def _solver_from_json(doc):
    _strict(
        doc,
        ("max_iterations", "wli_stop", "rel_stop", "restarts", "cond_limit"),
        "solver",
    )
    return SolverOptions(
        max_iterations=int(doc.get("max_iterations", 5000)),
        wli_stop=float(doc.get("wli_stop", 1e-10)),
        rel_stop=float(doc.get("rel_stop", 1e-8)),
        restarts=int(doc.get("restarts", 1)),
        cond_limit=float(doc.get("cond_limit", 1e8)),
    )


def _network_from_json(doc):
    _strict(doc, ("users", "tx_antennas", "rx_antennas", "streams"), "network")
    for key in ("users", "tx_antennas", "rx_antennas", "streams"):
        if key not in doc:
            raise ValueError(f"network block needs {key!r}")
    return NetworkConfig(
        num_users=doc["users"],
        tx_antennas=doc["tx_antennas"],
        rx_antennas=doc["rx_antennas"],
        streams=doc["streams"],
        tx_power=1.0,
        reverse_tx_power=1.0,
    )


def load_scenario(source):
    """Parse a scenario spec from a JSON document, dict, or file path.

    Unknown keys anywhere in the document are rejected.
    """
    if not isinstance(source, dict):
        with open(source, encoding="utf-8") as fh:
            source = json.load(fh)
    _strict(
        source,
        (
            "name",
            "algorithm",
            "power_grid_db",
            "trials",
            "base_seed",
            "solver",
            "network",
            "relay",
            "output_path",
        ),
        "scenario",
    )
    for key in ("name", "algorithm", "power_grid_db", "trials", "base_seed"):
        if key not in source:
            raise ValueError(f"scenario needs {key!r}")
    relay_gain = None
    if "relay" in source:
        _strict(source["relay"], ("gain",), "relay")
        relay_gain = source["relay"].get("gain", "matched")
    return ScenarioSpec(
        name=source["name"],
        algorithm=source["algorithm"],
        power_grid_db=source["power_grid_db"],
        trials=int(source["trials"]),
        base_seed=int(source["base_seed"]),
        solver=_solver_from_json(source.get("solver", {})),
        network=_network_from_json(source["network"]) if "network" in source else None,
        relay_gain=relay_gain,
        output_path=source.get("output_path"),
    )


def load_feasibility(source):
    """Parse a feasibility spec from a JSON document, dict, or file path."""
    if not isinstance(source, dict):
        with open(source, encoding="utf-8") as fh:
            source = json.load(fh)
    _strict(
        source,
        ("name", "users", "antennas", "allocations", "trials", "base_seed", "solver", "output_path"),
        "feasibility",
    )
    for key in ("name", "users", "antennas", "allocations", "trials", "base_seed"):
        if key not in source:
            raise ValueError(f"feasibility spec needs {key!r}")
    solver = _solver_from_json(source.get("solver", {}))
    if "restarts" not in source.get("solver", {}):
        solver = dataclasses.replace(solver, restarts=3)
    return FeasibilitySpec(
        name=source["name"],
        users=int(source["users"]),
        antennas=int(source["antennas"]),
        allocations=source["allocations"],
        trials=int(source["trials"]),
        base_seed=int(source["base_seed"]),
        solver=solver,
        output_path=source.get("output_path"),
    )
