"""Multi-trial experiments and quantile aggregation.

An experiment is described by a JSON-compatible dict (see
:func:`resolve_config` for the fields and their defaults). Trial ``t`` uses
seed ``base_seed + t``; from it two independent streams are derived, one for
the random row partition and one for the per-iteration sketch draws. The
constraint rows are selected once per experiment.
"""
import copy
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .constraint import build_constraint
from .linalg import gram_row_norms, pinv_solve_least_norm
from .matgen import ClusterSpec, generate, make_consistent_system
from .sampling import make_identity_space, make_partition_space, make_rng, make_single_row_space
from .selection import select_rows
from .solvers import KrylovConfig, ScrimConfig, run

DEFAULTS = {
    "rhs": {"seed": 0},
    "selection": "none",
    "sampler": {"kind": "partition", "q": 10},
    "algorithm": {"name": "krylov", "ell": 10},
    "trials": 20,
    "rse_tol": 1e-12,
    "max_iters": 100_000,
    "base_seed": 0,
    "workers": 1,
    "record_residual": True,
    "rse_size_cap": 25_000_000,
}


def resolve_config(cfg, base_dir=None):
    """Fill defaults and normalize an experiment config (returns a new dict)."""
    out = copy.deepcopy(DEFAULTS)
    out.update(copy.deepcopy(cfg))
    if "matrix" not in out:
        raise ValueError("config needs a 'matrix' entry ({'path': ...} or {'generate': {...}})")
    if base_dir is not None:
        for key in ("matrix", "rhs"):
            entry = out[key]
            if isinstance(entry, dict) and "path" in entry:
                entry["path"] = str((Path(base_dir) / entry["path"]).resolve())
        sel = out["selection"]
        if isinstance(sel, dict) and "path" in sel:
            sel["path"] = str((Path(base_dir) / sel["path"]).resolve())
    if isinstance(out["matrix"], dict) and "generate" in out["matrix"]:
        gen = dict(out["matrix"]["generate"])
        out["matrix"]["generate"] = ClusterSpec(**gen).validate().to_dict()
    alg = out["algorithm"]
    if alg.get("name") == "krylov":
        alg.setdefault("ell", 10)
    elif alg.get("name") == "scrim":
        alg.setdefault("zeta", 1.0)
    else:
        raise ValueError(f"unknown algorithm {alg.get('name')!r}; expected 'scrim' or 'krylov'")
    smp = out["sampler"]
    if smp.get("kind") not in ("partition", "single_row", "identity"):
        raise ValueError(f"unknown sampler {smp.get('kind')!r}")
    if smp["kind"] == "partition" and "q" not in smp:
        raise ValueError("partition sampler needs 'q'")
    if int(out["trials"]) < 1:
        raise ValueError("trials must be >= 1")
    for key in ("matrix", "rhs", "selection"):
        entry = out[key]
        if isinstance(entry, dict) and "path" in entry and not Path(entry["path"]).is_file():
            raise io.DataError(f"{key} file not found: {entry['path']}")
    return out


def load_matrix(entry):
    if "path" in entry:
        return io.read_matrix_market(entry["path"])
    return generate(ClusterSpec(**entry["generate"]))[0]


def algo_config(alg, rse_tol, max_iters):
    if alg["name"] == "scrim":
        return ScrimConfig(zeta=float(alg["zeta"]), max_iters=int(max_iters), rse_tol=float(rse_tol))
    ell = alg["ell"]
    ell = math.inf if ell in ("inf", None) or ell == math.inf else int(ell)
    return KrylovConfig(ell=ell, max_iters=int(max_iters), rse_tol=float(rse_tol))


def make_space(kind, f, q=None, rng=None):
    """Sketch space over the rows ``I_r`` of a constraint factor."""
    if kind == "partition":
        return make_partition_space(f.a_ir, q, rng)
    if kind == "single_row":
        return make_single_row_space(gram_row_norms(f.reduced_matrix()))
    if kind == "identity":
        return make_identity_space(f.partition.m_r)
    raise ValueError(f"unknown sampler {kind!r}")


def rows_per_step(kind, q, m_r):
    return {"partition": min(q or 1, m_r), "single_row": 1, "identity": m_r}[kind]


def resolve_selection(a, sel):
    """Return ``(indices, selection document or None)``."""
    if sel in (None, "none"):
        return np.zeros(0, dtype=np.int64), None
    if "indices" in sel:
        return np.asarray(sel["indices"], dtype=np.int64), None
    if "path" in sel:
        return io.read_indices(sel["path"]), None
    res = select_rows(a, sel["method"], int(sel["m_p"]), seed=int(sel.get("seed", 0)),
                      sketch_cols=sel.get("sketch_cols"), block_size=sel.get("block_size"))
    return res.indices, res.to_dict()


@dataclass
class AggregateResult:
    ks: np.ndarray
    min: np.ndarray
    q25: np.ndarray
    median: np.ndarray
    q75: np.ndarray
    max: np.ndarray


def aggregate(traces, metric="rse"):
    """Per-iteration quantiles across trials.

    Trials are aligned on the union of recorded iterations; a trial that
    stopped earlier contributes its final value.
    """
    grid = np.unique(np.concatenate([tr.ks for tr in traces]))
    cols = []
    for tr in traces:
        vals = getattr(tr, metric)
        pos = np.searchsorted(tr.ks, grid, side="right") - 1
        cols.append(vals[np.clip(pos, 0, None)])
    data = np.vstack(cols)
    q = np.quantile(data, [0.0, 0.25, 0.5, 0.75, 1.0], axis=0)
    return AggregateResult(grid, q[0], q[1], q[2], q[3], q[4])


class ExperimentError(RuntimeError):
    """A trial failed; ``partial`` holds the traces of the trials that finished before it."""

    def __init__(self, trial, exc, partial):
        super().__init__(f"trial {trial} failed: {exc} (partial results: {len(partial)} earlier trials completed)")
        self.trial = trial
        self.partial = partial


@dataclass
class ExperimentResult:
    traces: list
    aggregate: AggregateResult
    summary: dict


def run_experiment(cfg, a=None, b=None, x_ref=None, base_dir=None):
    """Run all trials of an experiment; ``a``/``b`` override the configured sources."""
    cfg = resolve_config(cfg, base_dir)
    if a is None:
        a = load_matrix(cfg["matrix"])
    a = np.asarray(a, dtype=np.float64)
    m, n = a.shape
    if b is None:
        rhs = cfg["rhs"]
        if "path" in rhs:
            b = io.read_vector(rhs["path"])
        else:
            b = make_consistent_system(a, int(rhs.get("seed", 0))).b
    if b.shape[0] != m:
        raise io.DataError(f"right-hand side has length {b.shape[0]}, matrix has {m} rows")
    i_p, sel_doc = resolve_selection(a, cfg["selection"])
    f = build_constraint(a, b, i_p)
    if x_ref is None and m * n <= cfg["rse_size_cap"]:
        x_ref = pinv_solve_least_norm(a, b)
    smp = cfg["sampler"]
    acfg = algo_config(cfg["algorithm"], cfg["rse_tol"], cfg["max_iters"])
    base = int(cfg["base_seed"])

    def one(trial):
        seed = base + trial
        space = make_space(smp["kind"], f, smp.get("q"), make_rng(seed, 0))
        return run(a, b, f, space, acfg, x_star=x_ref, rng=make_rng(seed, 1),
                   record_residual=bool(cfg["record_residual"]))

    workers = max(1, int(cfg["workers"]))
    traces = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(one, t) for t in range(int(cfg["trials"]))]
        for t, fut in enumerate(futures):
            try:
                traces.append(fut.result())
            except Exception as exc:
                for rest in futures[t + 1:]:
                    rest.cancel()
                raise ExperimentError(t, exc, traces) from exc
    metric = "rse" if x_ref is not None else "residual_norm"
    agg = aggregate(traces, metric)
    m_r = f.partition.m_r
    per_step = rows_per_step(smp["kind"], smp.get("q"), m_r)
    iters = np.array([tr.iterations for tr in traces], dtype=float)
    summary = {
        "config": cfg,
        "m": m,
        "n": n,
        "m_p": int(f.partition.m_p),
        "m_r": int(m_r),
        "metric": metric,
        "selection": sel_doc,
        "mean_iterations": float(iters.mean()),
        "median_iterations": float(np.median(iters)),
        "mean_full_iterations": float(iters.mean() * per_step / m_r) if m_r else 0.0,
        "statuses": [tr.status for tr in traces],
        "final_rse": [float(tr.rse[-1]) for tr in traces],
    }
    return ExperimentResult(traces, agg, summary)


def write_experiment(result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trace_csv(out / "trace.csv", list(enumerate(result.traces)))
    io.write_aggregate_csv(out / "aggregate.csv", result.aggregate)
    io.write_json(out / "summary.json", result.summary)
