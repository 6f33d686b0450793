"""Experiment driver: sweeps node counts, record counts, and verification
thresholds at desk scale, emitting structured rows (per-phase timings,
proof counts, coverage probabilities, correctness vs plaintext)."""

from __future__ import annotations

import json
import statistics
import time

from ..errors import ConfigError
from ..ledger import VerificationPolicy, coverage_probability, default_f_h
from ..rng import Drbg
from .pipeline import Simulation
from .queryparse import parse_query
from .topology import Topology


def run_experiment(spec: dict) -> list[dict]:
    """Sweep the cartesian product of the configured lists.

    spec keys (all optional, sensible defaults):
      operation: query operation name (default "variance")
      n_dps / n_cns / n_vns / records: lists of counts to sweep
      value_range: [lo, hi) of generated integer data
      t_sub: list of sub-proof thresholds to sweep
      seeds: list of seeds (default [0])
      profile: curve profile
    """
    if not isinstance(spec, dict):
        raise ConfigError("experiment spec must be a mapping")
    operation = spec.get("operation", "variance")
    sweeps = {
        "n_dps": spec.get("n_dps", [6]),
        "n_cns": spec.get("n_cns", [3]),
        "n_vns": spec.get("n_vns", [3]),
        "records": spec.get("records", [4]),
        "t_sub": spec.get("t_sub", [1.0]),
        "seeds": spec.get("seeds", [0]),
    }
    for key, val in sweeps.items():
        if not isinstance(val, list) or not val:
            raise ConfigError(f"sweep {key!r} must be a non-empty list")
    lo, hi = spec.get("value_range", [0, 256])
    rows = []
    for n_dps in sweeps["n_dps"]:
        for n_cns in sweeps["n_cns"]:
            for n_vns in sweeps["n_vns"]:
                for records in sweeps["records"]:
                    for t_sub in sweeps["t_sub"]:
                        for seed in sweeps["seeds"]:
                            rows.append(_one_run(
                                operation, n_dps, n_cns, n_vns, records,
                                t_sub, seed, (lo, hi),
                                spec.get("profile", "ed25519")))
    return rows


def _one_run(operation, n_dps, n_cns, n_vns, records, t_sub, seed, value_range,
             profile) -> dict:
    rng = Drbg(f"experiment/{seed}/{n_dps}/{records}")
    lo, hi = value_range
    topo = Topology.build(n_cns=n_cns, n_dps=n_dps, n_vns=n_vns,
                          profile=profile, seed=seed,
                          thresholds={"t": 1.0, "t_sub": t_sub},
                          max_records=records)
    data, flat = {}, []
    for dp in topo.dp_ids:
        rows = [{"x": lo + rng.randbelow(hi - lo)} for _ in range(records)]
        data[dp] = rows
        flat.extend(r["x"] for r in rows)
    topo.dp_data = data

    t0 = time.perf_counter()
    sim = Simulation(topo, seed=seed)
    setup_time = time.perf_counter() - t0
    range_clause = f" RANGE {lo},{hi}" if operation in ("min", "max") else ""
    query = parse_query(f"SELECT {operation} x ON {','.join(topo.dp_ids)}{range_clause}",
                        scale=topo.scale, max_records=records)
    outcome = sim.run(query)

    expected = _plaintext(operation, flat)
    got = outcome.result.values[0]
    policy = VerificationPolicy(1.0, t_sub, default_f_h(n_vns), n_vns)
    cov = coverage_probability(policy)
    return {
        "operation": operation,
        "n_dps": n_dps,
        "n_cns": n_cns,
        "n_vns": n_vns,
        "records_per_dp": records,
        "t_sub": t_sub,
        "seed": seed,
        "setup_seconds": round(setup_time, 4),
        "query_seconds": round(outcome.metrics["wall_time"], 4),
        "messages": outcome.metrics["messages"],
        "proof_bundles": outcome.metrics["proof_bundles"],
        "result": got,
        "plaintext": expected,
        "abs_error": abs(got - expected),
        "p_fh": round(cov.p_fh, 6),
        "query_id": outcome.query_id,
    }


def _plaintext(operation, values):
    if operation == "sum":
        return float(sum(values))
    if operation == "mean":
        return statistics.fmean(values)
    if operation == "variance":
        return statistics.pvariance(values)
    if operation == "stddev":
        return statistics.pstdev(values)
    if operation == "min":
        return float(min(values))
    if operation == "max":
        return float(max(values))
    raise ConfigError(f"experiment has no plaintext oracle for {operation!r}")


def write_report(rows: list[dict], path: str) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_report(path: str) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def plot_report(rows: list[dict], out_path: str) -> str:
    """Render runtime-vs-sweep charts; needs matplotlib (extra `plot`)."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ConfigError("plotting needs matplotlib (pip install privq[plot])") from exc
    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    for ax, x_key in zip(axes, ("n_dps", "records_per_dp", "t_sub")):
        buckets = {}
        for row in rows:
            buckets.setdefault(row[x_key], []).append(row["query_seconds"])
        xs = sorted(buckets)
        ys = [statistics.fmean(buckets[x]) for x in xs]
        ax.plot(xs, ys, marker="o")
        ax.set_xlabel(x_key)
        ax.set_ylabel("query seconds")
        ax.grid(True, alpha=0.3)
    fig.suptitle("query runtime sweeps")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    return out_path
