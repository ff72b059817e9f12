import json

import numpy as np
import pytest

from scrim import bench, io
from scrim.matgen import ClusterSpec, generate
from scrim.solvers import RunTrace

SMALL = {"m": 60, "n": 20, "r": 18, "n_l": 4, "n_s": 4, "kappa_m": 2.0, "seed": 0}


def cfg(**kw):
    base = {"matrix": {"generate": SMALL}, "sampler": {"kind": "partition", "q": 6},
            "algorithm": {"name": "krylov", "ell": 4}, "trials": 4, "max_iters": 3000}
    base.update(kw)
    return base


def fake(ks, vals):
    ks = np.array(ks)
    return RunTrace(ks, np.array(vals, dtype=float), np.zeros(len(ks)), "converged", int(ks[-1]), np.zeros(1))


def test_resolve_fills_and_echoes():
    out = bench.resolve_config(cfg())
    for key in ("rse_tol", "max_iters", "base_seed", "trials", "workers", "rhs", "selection"):
        assert key in out
    assert out["matrix"]["generate"]["r_m"] == [300.0, 400.0]
    assert out["rse_tol"] == 1e-12


@pytest.mark.parametrize("bad", [
    {"trials": 0},
    {"algorithm": {"name": "cg"}},
    {"sampler": {"kind": "gauss"}},
    {"sampler": {"kind": "partition"}},
])
def test_resolve_rejects(bad):
    with pytest.raises(ValueError):
        bench.resolve_config(cfg(**bad))


def test_missing_files_rejected(tmp_path):
    with pytest.raises(io.DataError, match="not found"):
        bench.resolve_config({"matrix": {"path": "nope.mtx"}}, base_dir=tmp_path)


def test_aggregate_carry_forward_and_order():
    agg = bench.aggregate([fake([0, 1, 2, 3], [1.0, 0.5, 0.2, 0.1]), fake([0, 1], [1.0, 0.3])])
    np.testing.assert_array_equal(agg.ks, [0, 1, 2, 3])
    np.testing.assert_allclose(agg.max, [1.0, 0.5, 0.3, 0.3])
    np.testing.assert_allclose(agg.min, [1.0, 0.3, 0.2, 0.1])


def test_single_trial_quantiles_equal():
    res = bench.run_experiment(cfg(trials=1))
    a = res.aggregate
    for col in (a.q25, a.median, a.q75, a.max):
        np.testing.assert_array_equal(col, a.min)


def test_quantile_ordering():
    a = bench.run_experiment(cfg(trials=7)).aggregate
    assert np.all(a.min <= a.q25) and np.all(a.q25 <= a.median)
    assert np.all(a.median <= a.q75) and np.all(a.q75 <= a.max)


def test_summary_contents():
    res = bench.run_experiment(cfg(selection={"method": "cpqr", "m_p": 5}))
    s = res.summary
    assert s["m_p"] == 5 and s["m_r"] == 55 and s["selection"]["method"] == "cpqr"
    assert s["statuses"] == ["converged"] * 4
    assert s["mean_full_iterations"] == pytest.approx(s["mean_iterations"] * 6 / 55)
    assert all(r < 1e-12 for r in s["final_rse"])
    json.dumps(s)


def test_explicit_indices_and_samplers():
    for sampler in ({"kind": "single_row"}, {"kind": "identity"}):
        res = bench.run_experiment(cfg(sampler=sampler, selection={"indices": [0, 5, 9]},
                                       algorithm={"name": "scrim", "zeta": 1.0}, max_iters=20000))
        assert res.summary["m_p"] == 3 and set(res.summary["statuses"]) == {"converged"}


def test_residual_metric_above_cap():
    res = bench.run_experiment(cfg(rse_size_cap=10))
    assert res.summary["metric"] == "residual_norm"
    assert np.all(np.isnan(res.traces[0].rse))


def test_files_written(tmp_path):
    res = bench.run_experiment(cfg())
    bench.write_experiment(res, tmp_path)
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    agg = (tmp_path / "aggregate.csv").read_text().splitlines()
    assert trace[0] == "trial,k,rse,residual_norm"
    assert agg[0] == "k,min,q25,median,q75,max"
    assert "wall" not in (tmp_path / "summary.json").read_text()


def test_deterministic_across_workers(tmp_path):
    outs = []
    for workers in (1, 3, 1):
        d = tmp_path / f"w{workers}_{len(outs)}"
        bench.write_experiment(bench.run_experiment(cfg(workers=workers, trials=6)), d)
        outs.append(((d / "trace.csv").read_bytes(), (d / "aggregate.csv").read_bytes()))
    assert outs[0] == outs[1] == outs[2]


def test_trial_failure_reports_partial(monkeypatch):
    calls = {"n": 0}
    real = bench.run

    def flaky(*a, **k):
        calls["n"] += 1
        if calls["n"] == 3:
            raise FloatingPointError("boom")
        return real(*a, **k)

    monkeypatch.setattr(bench, "run", flaky)
    with pytest.raises(bench.ExperimentError, match="partial results: 2") as exc:
        bench.run_experiment(cfg(trials=4))
    assert len(exc.value.partial) == 2


def test_constraint_helps_on_clustered_model():
    spec = dict(m=500, n=100, r=90, n_l=30, n_s=30, kappa_m=2.0, seed=0)
    a, _ = generate(ClusterSpec(**spec))
    wins = 0
    for rep in range(20):
        base = {"matrix": {"generate": spec}, "rhs": {"seed": rep}, "sampler": {"kind": "partition", "q": 25},
                "algorithm": {"name": "krylov", "ell": 10}, "trials": 5, "base_seed": 1000 * rep,
                "max_iters": 20000}
        plain = bench.run_experiment(dict(base, selection="none"), a=a).summary["median_iterations"]
        cons = bench.run_experiment(dict(base, selection={"method": "sqnorm", "m_p": 30, "seed": rep}),
                                    a=a).summary["median_iterations"]
        wins += cons < plain
    assert wins >= 16
