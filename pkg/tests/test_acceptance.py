"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the result lines are
written straight to the terminal, bypassing pytest's output capture.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from cpsim import synthetic
from cpsim.changepoint import SamplerConfig, merge_tau2, propose_segment_count, run_chain, split_tau2
from cpsim.changepoint.moves import draw_relocation
from cpsim.density import make_density, wasserstein
from cpsim.market_analytics import (
    WindowSpec,
    correlation_histogram,
    correlation_matrix,
    flat_trajectory,
    frobenius,
    normalized_trajectory,
    rolling_pca,
    trajectory_dispersion,
    trajectory_distance_matrix,
)
from cpsim.matrix_analysis import YELLOW, distance_matrix, matrix_norm, triangle_test
from cpsim.pipeline import PipelineConfig, run_pipeline
from cpsim.uncertain_sets import FiniteSet, SetWithUncertainty, from_points, hausdorff, mj_distance, mj_wasserstein

from conftest import SMOKE_SAMPLER, write_smoke_corpus
from oracles import charpoly_roots, jacobi_eigenvalues

# budgets and tolerances, as stated by the acceptance criteria
REDUCTION_PAIRS = 200
REDUCTION_TOL = 1e-10
REDUCTION_SECONDS = 5.0
AXIOM_CASES = 500
AXIOM_SECONDS = 10.0
TRIANGLE_SLACK = 1e-9
HAUSDORFF_PAIRS = 50
HAUSDORFF_REL = 0.05
SPLIT_MERGE_TOL = 1e-12
PROPOSAL_DRAWS = 100_000
PROPOSAL_TOL = 0.01
STUDY_SEEDS = 20
STUDY_RATE = 0.90
STUDY_ITERATIONS = 4000
STUDY_BURNIN = 800  # default burn-in fraction 2000 / 10000 at the scaled budget
SHIFT_AT, SHIFT_RADIUS = 250, 25
SAMPLER_SECONDS = 600.0
EIGEN_TOL = 1e-8
SHARE_SUM_TOL = 1e-10
BOUND_WINDOWS = 100
CRISIS_RATIO = 1.5
CRISIS_RHO_SHIFT = 0.2
DETERMINISM_SECONDS = 60.0


@pytest.fixture
def verdict(capsys):
    def emit(name: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return emit


def random_point_set(rng, lo=1, hi=10, span=1000):
    k = int(rng.integers(lo, hi + 1))
    return sorted(rng.choice(span, size=k, replace=False).astype(float).tolist())


def random_uncertain_set(rng):
    blocks = np.sort(rng.choice(40, size=int(rng.integers(1, 5)), replace=False))
    members = []
    for b in blocks:
        k = int(rng.integers(1, 5))
        pts = np.sort(rng.choice(10, size=k, replace=False)) + 10 * b
        members.append(make_density(pts, rng.integers(1, 10, size=k)))
    return SetWithUncertainty(members)


def random_density(rng):
    k = int(rng.integers(1, 21))
    pts = np.sort(rng.choice(200, size=k, replace=False))
    return make_density(pts, rng.integers(1, 20, size=k))


def test_point_mass_reduction(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(REDUCTION_PAIRS):
        A, B = random_point_set(rng), random_point_set(rng)
        SA, SB = from_points(A), from_points(B)
        for p in (0.5, 1.0, 2.0):
            ref = mj_distance(A, B, p)
            for q in (1.0, 2.0):
                worst = max(worst, abs(mj_wasserstein(SA, SB, p, q) - ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= REDUCTION_TOL and elapsed < REDUCTION_SECONDS
    verdict("point-mass reduction", ok, f"max |MJW - MJ| = {worst:.2e} over {REDUCTION_PAIRS} pairs, {elapsed:.2f} s")


def test_metric_axioms(verdict):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    bad = []
    for _ in range(AXIOM_CASES):
        f, g, h = random_density(rng), random_density(rng), random_density(rng)
        q = float(rng.choice([1.0, 2.0, 3.0]))
        d = wasserstein(f, g, q)
        if d != wasserstein(g, f, q) or wasserstein(f, f, q) != 0 or (d == 0) != (f == g):
            bad.append("wasserstein sym/id")
        if wasserstein(f, h, q) > d + wasserstein(g, h, q) + TRIANGLE_SLACK:
            bad.append("wasserstein triangle")
    for _ in range(AXIOM_CASES):
        S, T = FiniteSet(random_point_set(rng, span=60)), FiniteSet(random_point_set(rng, span=60))
        p = float(rng.choice([0.5, 1.0, 2.0, 4.0]))
        for name, fn in (("hausdorff", lambda a, b: hausdorff(a, b)), ("mj_distance", lambda a, b: mj_distance(a, b, p))):
            d = fn(S, T)
            if d != fn(T, S) or fn(S, S) != 0 or (d == 0) != (S == T):
                bad.append(name)
    for _ in range(AXIOM_CASES):
        S, T = random_uncertain_set(rng), random_uncertain_set(rng)
        p, q = float(rng.choice([0.5, 1.0, 2.0])), float(rng.choice([1.0, 2.0]))
        d = mj_wasserstein(S, T, p, q)
        if d != mj_wasserstein(T, S, p, q) or mj_wasserstein(S, S, p, q) != 0 or (d == 0) != (S == T):
            bad.append("mj_wasserstein")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < AXIOM_SECONDS
    verdict("metric axioms", ok, f"{len(bad)} violations in 4 x {AXIOM_CASES} cases, {elapsed:.2f} s")


def test_triangle_failure_witness(verdict):
    S, T, R = from_points([0]), from_points([0, 1]), from_points([1])
    dists = (mj_wasserstein(S, T), mj_wasserstein(T, R), mj_wasserstein(S, R))
    tri = triangle_test(distance_matrix([S, T, R], 1, labels=["S", "T", "R"]))
    ok = dists == (0.25, 0.25, 1.0) and tri.ratios[0, 1, 2] == 2.0 and tri.classifications[0, 1, 2] == YELLOW
    verdict("triangle-failure witness", ok, f"distances {dists}, ratio {float(tri.ratios[0, 1, 2])!r}, fail fraction {tri.fail_fraction:.4f}")


def test_hausdorff_limit(verdict):
    rng = np.random.default_rng(99)
    orders = [2**k for k in range(7)]
    worst_rel, monotone = 0.0, True
    for _ in range(HAUSDORFF_PAIRS):
        S, T = random_point_set(rng, span=500), random_point_set(rng, span=500)
        vals = [mj_distance(S, T, p) for p in orders]
        monotone &= all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
        H = hausdorff(S, T)
        if H > 0:
            worst_rel = max(worst_rel, abs(vals[-1] - H) / H)
    ok = monotone and worst_rel <= HAUSDORFF_REL
    verdict("Hausdorff limit", ok, f"monotone={monotone}, worst |MJ_64 - H| / H = {worst_rel:.4f}")


def _study(make_series, judge):
    hits = []
    for s in range(STUDY_SEEDS):
        x = make_series(np.random.default_rng(s))
        cfg = SamplerConfig(n_iterations=STUDY_ITERATIONS, n_burnin=STUDY_BURNIN, seed=1000 + s)
        hits.append(judge(run_chain(x, cfg)))
    return np.mean(hits)


def _shift_found(post):
    from cpsim.changepoint import modal_changepoint_set

    if post.modal_m != 2:
        return False
    (d,) = modal_changepoint_set(post, post.n).members
    return abs(d.mode() - SHIFT_AT) <= SHIFT_RADIUS


def test_sampler(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    # (a) split then merge restores tau^2
    worst = 0.0
    for _ in range(10_000):
        tau2, u = float(np.exp(rng.uniform(-5, 5))), float(rng.uniform(0.001, 0.999))
        back, u2 = merge_tau2(*split_tau2(tau2, u))
        worst = max(worst, abs(back - tau2) / tau2, abs(u2 - u))
    a_ok = worst <= SPLIT_MERGE_TOL
    # (b) proposal tables by frequency
    dev = 0.0
    for m_c, M, m2, table in [(5, 10, 2, {4: 0.5, 6: 0.5}), (1, 10, 3, {2: 1.0}), (10, 10, 3, {9: 1.0}), (4, 10, 0, {3: 1.0})]:
        draws = np.array([propose_segment_count(m_c, M, m2, rng)[0] for _ in range(PROPOSAL_DRAWS)])
        dev = max(dev, *(abs(np.mean(draws == k) - p) for k, p in table.items()))
    t_min = 10
    for a, c, b, table in [
        (0, 50, 100, {49: 1 / 3, 50: 1 / 3, 51: 1 / 3}),
        (40, 50, 100, {50: 0.5, 51: 0.5}),
        (0, 50, 60, {49: 0.5, 50: 0.5}),
        (40, 50, 60, {50: 1.0}),
    ]:
        draws = np.array([draw_relocation(c, a, b, t_min, 0.0, rng) for _ in range(PROPOSAL_DRAWS)])
        dev = max(dev, *(abs(np.mean(draws == k) - p) for k, p in table.items()))
        dev = max(dev, float(np.mean(~np.isin(draws, list(table)))))
    b_ok = dev <= PROPOSAL_TOL
    # (c) null series
    null_rate = _study(lambda r: r.standard_normal(500), lambda post: post.modal_m == 1)
    # (d) variance 1 -> 16 at t = 250
    shift_rate = _study(
        lambda r: np.concatenate([r.standard_normal(SHIFT_AT), 4.0 * r.standard_normal(500 - SHIFT_AT)]), _shift_found
    )
    elapsed = time.perf_counter() - t0
    ok = a_ok and b_ok and null_rate >= STUDY_RATE and shift_rate >= STUDY_RATE and elapsed < SAMPLER_SECONDS
    verdict(
        "sampler correctness",
        ok,
        f"split/merge err {worst:.1e}; proposal max dev {dev:.4f}; null m=1 in {null_rate:.0%}; "
        f"shift found in {shift_rate:.0%}; {elapsed:.0f} s",
    )


def test_eigen_oracle(verdict):
    rng = np.random.default_rng(5)
    worst_op, worst_mu, worst_sum = 0.0, 0.0, 0.0
    for _ in range(20):
        A = rng.standard_normal((6, 6))
        A = A + A.T
        for lam in (jacobi_eigenvalues(A), charpoly_roots(A)):
            worst_op = max(worst_op, abs(matrix_norm(A, "operator") - max(abs(v) for v in lam)))
    R = rng.standard_normal((6, 160))
    spec = rolling_pca(R, window=45, top_k=None)
    for t in range(0, spec.starts.size, 7):
        rho = correlation_matrix(R[:, t : t + 45])
        for lam in (jacobi_eigenvalues(rho), charpoly_roots(rho)):
            mags = np.sort(np.abs(lam))[::-1]
            worst_mu = max(worst_mu, float(np.max(np.abs(spec.mu[t] - mags / mags.sum()))))
    for seed in range(10):
        P = np.random.default_rng(seed).standard_normal((int(3 + seed), 120))
        worst_sum = max(worst_sum, float(np.max(np.abs(rolling_pca(P, 45, None).mu.sum(axis=1) - 1))))
    ok = worst_op <= EIGEN_TOL and worst_mu <= EIGEN_TOL and worst_sum <= SHARE_SUM_TOL
    verdict("eigen oracle", ok, f"operator err {worst_op:.1e}, mu err {worst_mu:.1e}, share-sum err {worst_sum:.1e}")


def test_trajectories(verdict):
    rng = np.random.default_rng(8)
    flat = np.ones((3, 30)) * np.array([[1.0], [4.0], [9.0]])
    flat_ok = np.all(trajectory_distance_matrix(flat, WindowSpec(0, 29)) == 0) and np.allclose(
        normalized_trajectory(flat, 1, WindowSpec(0, 29)), flat_trajectory(30), rtol=0, atol=1e-16
    )
    tri_ok = True
    bound_ok = True
    for _ in range(BOUND_WINDOWS):
        n, length = int(rng.integers(2, 15)), int(rng.integers(2, 80))
        P = np.exp(np.cumsum(rng.normal(0, 0.03, (n, length + 20)), axis=1))
        a = int(rng.integers(0, 20))
        w = WindowSpec(a, a + length - 1)
        D = trajectory_distance_matrix(P, w)
        tri_ok &= bool(np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-15))
        bound_ok &= frobenius(D) <= 2 * trajectory_dispersion(P, w) * n
    ok = bool(flat_ok and tri_ok and bound_ok)
    verdict("trajectory suite", ok, f"flat zero={bool(flat_ok)}, L1 triangle={tri_ok}, bound on {BOUND_WINDOWS} windows={bound_ok}")


def test_crisis_study(verdict):
    crisis = (300, 360)
    window = 45
    ratios, shifts = [], []
    for seed in range(5):
        R = synthetic.one_factor_returns(20, 600, np.random.default_rng(seed), crisis=crisis)
        spec = rolling_pca(R, window=window, top_k=10)
        inside = (spec.starts >= crisis[0]) & (spec.starts + window - 1 <= crisis[1])
        outside = (spec.starts + window - 1 < crisis[0]) | (spec.starts > crisis[1])
        ratios.append(spec.mu[inside, 0].mean() / spec.mu[outside, 0].mean())
        rest = np.r_[0 : crisis[0], crisis[1] + 1 : 600]
        h_in = correlation_histogram(correlation_matrix(R, WindowSpec(*crisis)), 20)
        h_out = correlation_histogram(correlation_matrix(R[:, rest]), 20)
        shifts.append(h_in.mean() - h_out.mean())
    ok = min(ratios) >= CRISIS_RATIO and min(shifts) >= CRISIS_RHO_SHIFT
    verdict("synthetic crisis study", ok, f"mu_1 ratio min {min(ratios):.2f}, histogram mean shift min {min(shifts):.3f} over 5 panels")


def test_determinism(verdict, tmp_path):
    csv = write_smoke_corpus(tmp_path / "prices.csv")
    t0 = time.perf_counter()
    outs = []
    for name in ("a", "b"):
        cfg = PipelineConfig(input=str(csv), out=str(tmp_path / name), seed=11, sampler=SMOKE_SAMPLER)
        run_pipeline(cfg)
        root = tmp_path / name
        outs.append({str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
    elapsed = time.perf_counter() - t0
    ok = outs[0] == outs[1] and len(outs[0]) >= 8 and elapsed < DETERMINISM_SECONDS
    verdict("pipeline determinism", ok, f"{len(outs[0])} files byte-identical={outs[0] == outs[1]}, {elapsed:.1f} s for two runs")
