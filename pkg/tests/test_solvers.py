import math

import numpy as np
import pytest

from scrim.constraint import build_constraint
from scrim.linalg import gram_row_norms, numerical_rank, pinv_solve_least_norm
from scrim.sampling import (
    BlockSpace,
    make_identity_space,
    make_partition_space,
    make_rng,
    make_single_row_space,
)
from scrim.solvers import KrylovConfig, ScrimConfig, init_state, krylov_prepare, krylov_step, run, scrim_step

from conftest import Recorder, consistent, draw_nonnull, lowrank, rel


def setup(seed, m=60, n=20, r=None, m_p=0):
    g = np.random.default_rng(seed)
    a = lowrank(g, m, n, r or n)
    b = consistent(g, a)
    ip = g.choice(m, m_p, replace=False) if m_p else []
    f = build_constraint(a, b, ip)
    return a, b, f, pinv_solve_least_norm(a, b)


def test_config_validation():
    for z in (0.0, 2.0, -1.0):
        with pytest.raises(ValueError):
            ScrimConfig(zeta=z)
    with pytest.raises(ValueError):
        KrylovConfig(ell=0)
    with pytest.raises(ValueError):
        KrylovConfig(ell=2.5)
    assert KrylovConfig(ell=math.inf).window is None
    assert KrylovConfig(ell=1).window == 0


def test_hand_computed_step():
    a = np.eye(2)
    b = np.ones(2)
    f = build_constraint(a, b, [0])
    np.testing.assert_allclose(f.x0, [1, 0])
    space = make_single_row_space(gram_row_norms(f.reduced_matrix()))
    st = init_state(f, ScrimConfig(), make_rng(0))
    scrim_step(st, f, space, ScrimConfig())
    np.testing.assert_allclose(st.x, [1, 1], atol=1e-15)


def test_reduces_to_kaczmarz(rng):
    a = rng.standard_normal((30, 8))
    b = consistent(rng, a)
    f = build_constraint(a, b, [])
    space = make_single_row_space(gram_row_norms(a))
    rec = Recorder(f)
    run(a, b, f, space, ScrimConfig(max_iters=100, rse_tol=0.0), rng=make_rng(4), callback=rec)
    # replay the same row draws with the textbook update
    g = make_rng(4)
    x = np.zeros(8)
    for k in range(100):
        i = draw_nonnull(space, g, f, x)
        x = x - (a[i] @ x - b[i]) / (a[i] @ a[i]) * a[i]
        np.testing.assert_allclose(rec.xs[k + 1], x, rtol=1e-12, atol=1e-12)


def test_reduces_to_constrained_kaczmarz(rng):
    a = rng.standard_normal((25, 8))
    b = consistent(rng, a)
    f = build_constraint(a, b, [0, 3, 7])
    pa = f.reduced_matrix()
    space = make_single_row_space(gram_row_norms(pa))
    rec = Recorder(f)
    run(a, b, f, space, ScrimConfig(max_iters=50, rse_tol=0.0), rng=make_rng(2), callback=rec)
    g = make_rng(2)
    x = f.x0.copy()
    for k in range(50):
        i = draw_nonnull(space, g, f, x)
        x = x - (f.a_ir[i] @ x - f.b_ir[i]) / (pa[i] @ pa[i]) * pa[i]
        np.testing.assert_allclose(rec.xs[k + 1], x, rtol=1e-10, atol=1e-12)


def test_null_draws_are_resampled():
    # row 0 already satisfied at x0 = 0 (b_0 = 0); it must never produce a step
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = np.array([0.0, 3.0])
    f = build_constraint(a, b, [])
    space = BlockSpace([[0], [1]], [0.99, 0.01], 2, kind="row")
    st = init_state(f, ScrimConfig(), make_rng(0))
    info = scrim_step(st, f, space, ScrimConfig())
    assert info is not None and info.block_res2 == 9.0
    np.testing.assert_allclose(st.x, [0, 3])


def test_already_solved_takes_no_steps(rng):
    # three generic constraint rows of a rank-3 system: x0 is already A^+ b
    a2 = rng.standard_normal((8, 3))
    b2 = consistent(rng, a2)
    f2 = build_constraint(a2, b2, [0, 1, 2])
    tr = run(a2, b2, f2, make_partition_space(f2.a_ir, 2, 0), KrylovConfig(),
             x_star=pinv_solve_least_norm(a2, b2))
    assert tr.iterations == 0 and tr.status == "converged"


def test_x_star_must_solve(rng):
    a, b, f, xs = setup(0, 10, 4)
    with pytest.raises(ValueError, match="consistent"):
        run(a, b, f, make_identity_space(10), ScrimConfig(), x_star=xs + 1.0)


def test_scrim_trace_strictly_decreasing():
    a, b, f, xs = setup(1, 60, 20)
    space = make_partition_space(f.a_ir, 5, make_rng(1))
    tr = run(a, b, f, space, ScrimConfig(max_iters=400, rse_tol=1e-14), x_star=xs, rng=make_rng(1, 1))
    assert np.all(np.diff(tr.rse) < 0)


def test_seeded_replay_bit_identical():
    a, b, f, xs = setup(2, 40, 10, m_p=4)
    space = make_partition_space(f.a_ir, 6, make_rng(2))
    t1 = run(a, b, f, space, KrylovConfig(ell=4), x_star=xs, rng=make_rng(2, 1))
    t2 = run(a, b, f, space, KrylovConfig(ell=4), x_star=xs, rng=make_rng(2, 1))
    np.testing.assert_array_equal(t1.rse, t2.rse)
    np.testing.assert_array_equal(t1.x, t2.x)


@pytest.mark.parametrize("zeta", [0.5, 1.0, 1.5])
def test_scrim_per_step_identity(zeta):
    a, b, f, xs = setup(3, 60, 20, m_p=6)
    space = make_partition_space(f.a_ir, 5, make_rng(3))
    rec = Recorder(f)
    run(a, b, f, space, ScrimConfig(zeta=zeta, max_iters=300, rse_tol=1e-14), x_star=xs,
        rng=make_rng(3, 1), callback=rec)
    for k, info in enumerate(rec.infos):
        e0, e1 = rec.xs[k] - xs, rec.xs[k + 1] - xs
        drop = e0 @ e0 - e1 @ e1
        expect = zeta * (2 - zeta) * info.block_res2 ** 2 / info.grad_norm2
        assert abs(drop - expect) <= 1e-8 * expect


def test_iterates_feasible_and_in_affine_span():
    a, b, f, xs = setup(4, 50, 15, r=12, m_p=8)
    space = make_partition_space(f.a_ir, 7, make_rng(4))
    for cfg in (ScrimConfig(max_iters=200), KrylovConfig(ell=5, max_iters=200)):
        rec = Recorder(f)
        run(a, b, f, space, cfg, x_star=xs, rng=make_rng(4, 1), callback=rec)
        for x in rec.xs:
            assert np.linalg.norm(f.a_ip @ x - f.b_ip) <= 1e-8 * (1 + np.linalg.norm(f.b_ip))
            dx = x - f.x0
            assert np.linalg.norm(f.apply_p(dx) - dx) <= 1e-8 * max(1.0, np.linalg.norm(dx))


@pytest.mark.parametrize("ell", [2, 3, 6, math.inf])
def test_krylov_window_orthogonal_and_monotone(ell):
    a, b, f, xs = setup(5, 60, 20, r=16, m_p=5)
    space = make_partition_space(f.a_ir, 5, make_rng(5))
    rec = Recorder(f)
    tr = run(a, b, f, space, KrylovConfig(ell=ell, max_iters=3000), x_star=xs, rng=make_rng(5, 1),
             callback=rec)
    assert tr.status == "converged"
    for win in rec.windows:
        if ell != math.inf:
            assert len(win) <= ell - 1
        for i, (pi, ni) in enumerate(win):
            assert abs(pi @ pi - ni) <= 1e-10 * ni
            for pj, _ in win[:i]:
                assert abs(pi @ pj) <= 1e-8 * np.linalg.norm(pi) * np.linalg.norm(pj)
    errs = [np.linalg.norm(x - xs) for x in rec.xs]
    assert all(e1 <= e0 * (1 + 1e-12) + 1e-15 for e0, e1 in zip(errs, errs[1:]))
    assert all(info.q >= 1 - 1e-10 for info in rec.infos)


def test_window_evicts_oldest():
    a, b, f, xs = setup(6, 30, 10)
    space = make_partition_space(f.a_ir, 3, make_rng(6))
    cfg = KrylovConfig(ell=3, max_iters=10, rse_tol=0.0)
    st = init_state(f, cfg, make_rng(6, 1))
    krylov_prepare(st, f, space, cfg)
    dirs = []
    for _ in range(5):
        dirs.append(st.p.copy())
        krylov_step(st, f, space, cfg)
    assert len(st.window) == 2
    np.testing.assert_array_equal(st.window[0][0], dirs[-2])
    np.testing.assert_array_equal(st.window[1][0], dirs[-1])


def test_krylov_decrease_beats_scrim_same_draw():
    a, b, f, xs = setup(7, 60, 20, m_p=4)
    space = make_partition_space(f.a_ir, 5, make_rng(7))
    cfg = KrylovConfig(ell=5, max_iters=100, rse_tol=0.0)
    st = init_state(f, cfg, make_rng(7, 1))
    krylov_prepare(st, f, space, cfg)
    for _ in range(100):
        if st.p is None:
            break
        x0 = st.x.copy()
        res2, dn2 = st.block_res2, st.d_norm2
        info = krylov_step(st, f, space, cfg)
        e0 = x0 - xs
        e1 = st.x - xs
        drop = e0 @ e0 - e1 @ e1
        scrim_drop = res2 ** 2 / dn2
        assert drop >= scrim_drop * (1 - 1e-8)
        assert abs(drop - info.q * scrim_drop) <= 1e-8 * drop


def test_ell_one_matches_scrim():
    a, b, f, xs = setup(8, 50, 15, m_p=5)
    space = make_partition_space(f.a_ir, 5, make_rng(8))
    t1 = run(a, b, f, space, KrylovConfig(ell=1), x_star=xs, rng=make_rng(8, 1))
    t2 = run(a, b, f, space, ScrimConfig(zeta=1.0), x_star=xs, rng=make_rng(8, 1))
    assert t1.iterations == t2.iterations
    np.testing.assert_array_equal(t1.rse, t2.rse)
    np.testing.assert_array_equal(t1.x, t2.x)


@pytest.mark.parametrize("seed", range(8))
def test_finite_termination(seed):
    g = np.random.default_rng(100 + seed)
    m, n = int(g.integers(10, 40)), int(g.integers(5, 25))
    r = int(g.integers(1, min(m, n) + 1))
    a = lowrank(g, m, n, r)
    b = consistent(g, a)
    f = build_constraint(a, b, g.choice(m, int(g.integers(0, m // 2)), replace=False))
    tau = numerical_rank(a) - f.r_p
    xs = pinv_solve_least_norm(a, b)
    tr = run(a, b, f, make_identity_space(f.partition.m_r), KrylovConfig(ell=math.inf, max_iters=tau, rse_tol=0.0),
             x_star=xs, rng=make_rng(0))
    assert tr.iterations <= tau
    assert rel(tr.x, xs) <= 1e-9


def test_stall_reported(rng):
    # only a zero-probability atom can help: every positive-probability draw is null
    a = np.eye(3)
    b = np.array([0.0, 0.0, 1.0])
    f = build_constraint(a, b, [])
    space = BlockSpace([[0], [1], [2]], [0.5, 0.5, 0.0], 3, kind="row")
    tr = run(a, b, f, space, ScrimConfig(max_iters=10, max_resample=20), rng=make_rng(0))
    assert tr.status == "stalled" and "usable step" in tr.message


def test_residual_stop_without_reference(rng):
    a, b, f, xs = setup(9, 40, 10)
    space = make_partition_space(f.a_ir, 8, make_rng(9))
    tr = run(a, b, f, space, KrylovConfig(rse_tol=1e-20), rng=make_rng(9, 1))
    assert not tr.has_rse and tr.status == "converged"
    assert np.linalg.norm(a @ tr.x - b) <= 1e-10 * np.linalg.norm(b)
    assert np.all(np.isnan(tr.rse))


def test_max_iters_status_and_trace_stride():
    a, b, f, xs = setup(10, 60, 20)
    space = make_single_row_space(gram_row_norms(a))
    tr = run(a, b, f, space, ScrimConfig(max_iters=2500, rse_tol=0.0), x_star=xs, rng=make_rng(0))
    assert tr.status == "max_iters" and tr.iterations == 2500
    assert tr.ks[1000] == 1000
    assert np.all(np.diff(tr.ks[1000:]) == 3) or tr.ks[-1] == 2500
    assert tr.ks[-1] == 2500
    assert set(tr.ks[1001:-1] % 3) == {0}
