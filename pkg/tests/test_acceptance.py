"""End-to-end acceptance checks at their pinned tolerances.

Every test prints exactly one [PASS]/[FAIL] line with the measured numbers
(bypassing output capture), then asserts. Multi-seed statistical targets use
fixed seeds 0..19 so reruns are bit-reproducible.
"""
import math
import time
import tracemalloc
import warnings

import numpy as np
import pytest

from mixmom.als import preprocess, solve_mean_and_weight, update_means
from mixmom.alsplus import fit_als_plus
from mixmom.general_means import EntrywiseFunction, solve_general_mean
from mixmom.gram import build_gram_cache
from mixmom.hyper import FitOptions, default_tau
from mixmom.metrics import match_and_score, rank_scan, sample_reference
from mixmom.models import (
    gen_bernoulli_protocol,
    gen_gamma_protocol,
    gen_gaussian_protocol,
    gen_heterogeneous_protocol,
    gen_poisson_image_protocol,
    gen_ranksel_gaussian,
    sample_mixture,
    synth_smooth_images,
)

SEEDS = range(20)


@pytest.fixture
def report(capsys):
    def _report(name, ok, detail):
        with capsys.disabled():
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)

    return _report


def _score(V, labels, res, r, g=None, Y=None):
    freq = np.bincount(labels, minlength=r) / labels.size
    ref_means = sample_reference(V, labels, r=r)
    moments = None
    if g is not None:
        moments = {"g": (Y, sample_reference(V, labels, g=g, r=r))}
    return match_and_score(
        res.estimate.weights, res.estimate.means, freq, ref_means, moments=moments
    )


def _fit_protocol(spec_fn, n, r, d=4, p=20000, seeds=SEEDS):
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in seeds:
            spec = spec_fn(seed)
            V, labels = sample_mixture(spec, p, seed=seed)
            t0 = time.perf_counter()
            res = fit_als_plus(V, r, d, options=FitOptions(seed=seed))
            out.append((V, labels, res, time.perf_counter() - t0))
    return out


@pytest.fixture(scope="module")
def gaussian_fits():
    return _fit_protocol(lambda s: gen_gaussian_protocol(15, 3, seed=s), 15, 3)


def test_criterion_1_gaussian_recovery(gaussian_fits, report):
    weight_errs, mean_errs, times = [], [], []
    for V, labels, res, dt in gaussian_fits:
        rep = _score(V, labels, res, 3)
        weight_errs.append(rep.weight_error)
        mean_errs.append(rep.mean_error)
        times.append(dt)
    avg_w, avg_m = np.mean(weight_errs), np.mean(mean_errs)
    worst = max(max(weight_errs), max(mean_errs))
    ok = avg_w <= 0.5 and avg_m <= 0.5 and worst <= 1.5 and max(times) <= 60.0
    report(
        "criterion-1 gaussian n=15 r=3 p=20000 d=4 (20 seeds)",
        ok,
        f"avg weight {avg_w:.4f}% (<=0.5), avg mean {avg_m:.4f}% (<=0.5), "
        f"worst {worst:.4f}% (<=1.5), slowest fit {max(times):.1f}s (<=60)",
    )
    assert avg_w <= 0.5
    assert avg_m <= 0.5
    assert worst <= 1.5
    assert max(times) <= 60.0


def test_criterion_2_second_moments(gaussian_fits, report):
    g = EntrywiseFunction.from_name("square")
    errs = []
    for V, labels, res, _ in gaussian_fits:
        est = res.estimate
        Y = solve_general_mean(g, V, est.weights, est.means, 3)
        rep = _score(V, labels, res, 3, g=g, Y=Y)
        errs.append(rep.moment_errors["g"])
    avg = float(np.mean(errs))
    ok = avg <= 1.0
    report(
        "criterion-2 second moments via g=square on criterion-1 fits",
        ok,
        f"avg error {avg:.4f}% (<=1), worst {max(errs):.4f}%",
    )
    assert avg <= 1.0


def test_criterion_3_bernoulli(report):
    fits = _fit_protocol(lambda s: gen_bernoulli_protocol(15, 3, seed=s), 15, 3)
    errs = [_score(V, labels, res, 3).mean_error for V, labels, res, _ in fits]
    avg, worst = float(np.mean(errs)), max(errs)
    ok = avg <= 1.5 and worst <= 3.0
    report(
        "criterion-3 bernoulli n=15 r=3 p=20000 d=4 (20 seeds)",
        ok,
        f"avg mean {avg:.4f}% (<=1.5), worst {worst:.4f}% (<=3)",
    )
    assert avg <= 1.5
    assert worst <= 3.0


def test_criterion_4_gamma(report):
    fits = _fit_protocol(lambda s: gen_gamma_protocol(15, 3, seed=s), 15, 3)
    errs = [_score(V, labels, res, 3).mean_error for V, labels, res, _ in fits]
    avg = float(np.mean(errs))
    ok = avg <= 1.5
    report(
        "criterion-4 gamma n=15 r=3 p=20000 d=4 (20 seeds)",
        ok,
        f"avg mean {avg:.4f}% (<=1.5), worst {max(errs):.4f}%",
    )
    assert avg <= 1.5


def test_criterion_5_heterogeneous(report):
    fits = _fit_protocol(lambda s: gen_heterogeneous_protocol(5, seed=s), 40, 5)
    errs = [_score(V, labels, res, 5).mean_error for V, labels, res, _ in fits]
    hits = sum(e <= 5.0 for e in errs)
    ok = hits >= 18
    report(
        "criterion-5 heterogeneous n=40 r=5 p=20000 d=4 (20 seeds)",
        ok,
        f"{hits}/20 seeds with mean error <=5% (need >=18), "
        f"avg {np.mean(errs):.4f}%, worst {max(errs):.4f}%",
    )
    assert hits >= 18


def test_criterion_6_poisson_images(report):
    seeds = range(5)
    fits = _fit_protocol(
        lambda s: gen_poisson_image_protocol(synth_smooth_images(8, 5, seed=s), seed=s),
        64,
        5,
        seeds=seeds,
    )
    errs = [_score(V, labels, res, 5).mean_error for V, labels, res, _ in fits]
    ok = max(errs) <= 5.0
    report(
        "criterion-6 poisson 8x8 images n=64 r=5 p=20000 d=4 (5 seeds)",
        ok,
        f"mean errors {['%.4f' % e for e in errs]}% (each <=5)",
    )
    assert max(errs) <= 5.0


def test_criterion_7_rank_scan_elbow(report):
    ranks = [3, 4, 5, 6, 7]
    hits = 0
    picks = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in SEEDS:
            spec = gen_ranksel_gaussian(20, 5, seed=seed)
            V, _ = sample_mixture(spec, 20000, seed=seed)
            rows = rank_scan(
                V, ranks, 4, options=FitOptions(seed=seed), cost_tol=1e-6
            )
            costs = [row["cost"] for row in rows]
            drops = {
                ranks[i]: max(costs[i - 1] - costs[i], 0.0)
                for i in range(1, len(ranks))
            }
            big = max(drops.values())
            large = [r for r, dr in drops.items() if dr >= 0.1 * big]
            pick = max(large) if large else None
            picks.append(pick)
            hits += pick == 5
    ok = hits >= 15
    report(
        "criterion-7 rank scan elbow at r*=5, scan 3..7 (20 seeds)",
        ok,
        f"last large drop enters r=5 in {hits}/20 seeds (need >=15); picks {picks}",
    )
    assert hits >= 15


def test_criterion_8_oracle_equivalence_suite(report):
    from oracles import (
        central_difference,
        dense_row_lstsq,
        esp_enumeration,
        matching_enumeration,
        offdiag_tensor,
    )
    from test_partitions import FROZEN, _order_slice
    from mixmom.dense import dense_cost
    from mixmom.gradient import grad, implicit_cost
    from mixmom.als import solve_row
    from mixmom.gram import esp_from_power_sums, power_sums
    from mixmom.metrics import match_components
    from mixmom.partitions import partition_coefficients

    t_start = time.perf_counter()
    rng = np.random.default_rng(0)
    gaps = {}

    # (a) inner-product identity, n <= 8, d <= 4
    worst = 0.0
    for n, d in [(4, 2), (6, 3), (8, 4)]:
        for _ in range(5):
            v, a = rng.standard_normal(n), rng.standard_normal(n)
            got = float(
                (offdiag_tensor(v[:, None], d) * offdiag_tensor(a[:, None], d)).sum()
            )
            want = math.factorial(d) * esp_from_power_sums(power_sums(v * a, d))[-1]
            worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    gaps["a"] = (worst, 1e-10)

    # (b) implicit vs dense cost differences
    worst = 0.0
    for n, r, p, d in [(5, 2, 6, 2), (6, 2, 7, 3), (7, 3, 6, 4)]:
        V = rng.standard_normal((n, p))
        pi = np.full(p, 1.0 / p)
        tau = rng.uniform(0.5, 1.5, d)
        pts = []
        for _ in range(2):
            w = rng.uniform(0.3, 1.0, r)
            w /= w.sum()
            A = rng.standard_normal((n, r))
            pts.append((w, A))
        di = implicit_cost(
            pts[1][0], build_gram_cache(pts[1][1], V, d), pi, tau
        ) - implicit_cost(pts[0][0], build_gram_cache(pts[0][1], V, d), pi, tau)
        dd = dense_cost(V, *pts[1], tau) - dense_cost(V, *pts[0], tau)
        worst = max(worst, abs(di - dd) / max(1.0, abs(dd)))
    gaps["b"] = (worst, 1e-8)

    # (c) row solve vs dense separated least squares
    worst = 0.0
    for d in (2, 3, 4):
        n, r, p = 6, 2, 7
        V = rng.standard_normal((n, p))
        A = rng.standard_normal((n, r))
        w = np.array([0.45, 0.55])
        tau = rng.uniform(0.5, 2.0, d)
        cache = build_gram_cache(A, V, d)
        row = solve_row(cache, 2, w, V[2] / p, V[2].mean(), tau, update_cache=False)
        beta = dense_row_lstsq(V, np.full(p, 1.0 / p), A, 2, tau, V[2].mean())
        worst = max(worst, np.abs(row * w - beta).max() / max(1.0, np.abs(beta).max()))
    gaps["c"] = (worst, 1e-8)

    # (d) gradient vs central differences, d in 2..5
    worst = 0.0
    for d in (2, 3, 4, 5):
        n, r, p = 7, 2, 5
        V = rng.standard_normal((n, p))
        A = rng.standard_normal((n, r)) * 0.7
        w = rng.uniform(0.3, 1.0, r)
        w /= w.sum()
        pi = np.full(p, 1.0 / p)
        tau = rng.uniform(0.5, 1.5, d)
        gw, gA = grad(w, build_gram_cache(A, V, d), pi, tau)
        fd_w = central_difference(
            lambda x: implicit_cost(x, build_gram_cache(A, V, d), pi, tau), w
        )
        fd_A = central_difference(
            lambda M: implicit_cost(w, build_gram_cache(M, V, d), pi, tau), A
        )
        scale = max(1.0, np.linalg.norm(gw), np.linalg.norm(gA))
        worst = max(
            worst,
            np.linalg.norm(fd_w - gw) / scale,
            np.linalg.norm(fd_A - gA) / scale,
        )
    gaps["d"] = (worst, 1e-6)

    # (e) signed partition-count tables, d <= 5, exact
    table_ok = all(
        _order_slice(partition_coefficients(5), d) == FROZEN[d] for d in range(1, 6)
    )
    gaps["e"] = (0.0 if table_ok else 1.0, 0.5)

    # (f) assignment vs factorial enumeration, r <= 5
    worst = 0.0
    for r in (2, 3, 4, 5):
        for _ in range(10):
            ref = rng.standard_normal((3, r))
            est = ref[:, rng.permutation(r)] + 0.3 * rng.standard_normal((3, r))
            perm = match_components(est, ref)
            cost = sum(np.sum((est[:, perm[j]] - ref[:, j]) ** 2) for j in range(r))
            _, brute = matching_enumeration(est, ref)
            worst = max(worst, abs(cost - brute) / max(1.0, brute))
    gaps["f"] = (worst, 1e-12)

    # (g) monotone dense descent of the basic alternating solver
    n, r, p, d = 6, 2, 30, 3
    V = rng.standard_normal((n, p))
    tau = default_tau(n, d)
    Vh = preprocess(V).values
    cache = build_gram_cache(rng.standard_normal((n, r)), Vh, d)
    w = np.full(r, 0.5)
    worst = 0.0
    prev = dense_cost(Vh, w, cache.A, tau)
    from mixmom.als import update_weights

    for _ in range(6):
        update_means(cache, w, tau)
        mid = dense_cost(Vh, w, cache.A, tau)
        worst = max(worst, mid - prev)
        w = update_weights(cache, tau)
        prev2 = dense_cost(Vh, w, cache.A, tau)
        worst = max(worst, prev2 - mid)
        prev = prev2
    gaps["g"] = (worst, 1e-9)

    # (h) g=identity reproduces the fitted means at a converged fit
    spec = gen_gaussian_protocol(8, 2, seed=5)
    V, _ = sample_mixture(spec, 4000, seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = solve_mean_and_weight(
            V, 2, 3, options=FitOptions(seed=5, xtol=1e-13, max_iter=3000)
        )
    est = res.estimate
    Y = solve_general_mean(
        EntrywiseFunction.from_name("identity"), V, est.weights, est.means, 3
    )
    gaps["h"] = (
        float(np.abs(Y - est.means).max() / max(1.0, np.abs(est.means).max())),
        1e-8,
    )

    elapsed = time.perf_counter() - t_start
    ok = all(val <= tol for val, tol in gaps.values()) and elapsed <= 300.0
    detail = " ".join(f"{k}={val:.2e}(<= {tol:.0e})" for k, (val, tol) in gaps.items())
    report(
        "criterion-8 oracle-equivalence property suite",
        ok,
        f"{detail} in {elapsed:.0f}s (<=300)",
    )
    for key, (val, tol) in gaps.items():
        assert val <= tol, f"property ({key}) gap {val} above {tol}"
    assert elapsed <= 300.0


def test_criterion_9_resource_contracts(report):
    # implicit fits must never materialise an n^d tensor
    n, d, p, r = 30, 4, 2000, 3
    spec = gen_gaussian_protocol(n, 3, seed=0)
    V, _ = sample_mixture(spec, p, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tracemalloc.start()
        fit_als_plus(V, r, d, options=FitOptions(seed=0, max_iter=25))
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
    tensor_bytes = n**d * 8
    mem_ok = peak < 0.75 * tensor_bytes

    # per-sweep time roughly linear in n at fixed (r, p, d)
    def sweep_time(rows):
        rng = np.random.default_rng(0)
        Vh = preprocess(rng.standard_normal((rows, 4000))).values
        A = rng.standard_normal((rows, 3))
        tau = default_tau(rows, 4)
        w = np.full(3, 1 / 3)
        best = np.inf
        for _ in range(5):
            cache = build_gram_cache(A.copy(), Vh, 4)
            t0 = time.perf_counter()
            update_means(cache, w, tau)
            best = min(best, time.perf_counter() - t0)
        return best

    t1, t2 = sweep_time(20), sweep_time(40)
    ratio = t2 / t1
    time_ok = ratio <= 2.5
    report(
        "criterion-9 resource contracts",
        mem_ok and time_ok,
        f"fit peak {peak / 1e6:.2f} MB vs n^d tensor {tensor_bytes / 1e6:.2f} MB; "
        f"sweep time x{ratio:.2f} for 2x rows (<=2.5)",
    )
    assert mem_ok, f"peak allocation {peak} bytes not well below n^d * 8 = {tensor_bytes}"
    assert time_ok, f"sweep scaling ratio {ratio:.2f} above 2.5"
