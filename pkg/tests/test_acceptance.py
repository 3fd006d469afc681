"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``conftest.ACCEPTANCE_LINES`` and repeated in
the pytest terminal summary.
"""
import itertools
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from conclab.concentration import coordinate, distance_to, empirical_tail, estimate_median, levy_gromov_bound
from conclab.curvature import inductive_identity_check, random_frames, ricci_floor_scan, sectional_curvature
from conclab.finder import (
    DenseValidationError,
    MaxDrawsExceededError,
    coordinate_spec,
    dimension_bound,
    dimension_formula,
    disintegration_check,
    find_submanifold,
)
from conclab.geometry import (
    ComplexProjective,
    RealProjective,
    Sphere,
    apply_isometry,
    geodesic_distance,
    sample_haar_isometry,
    sample_uniform,
)
from conclab.nets import (
    build_net,
    cardinality_bound_closed,
    hull_covering_radius,
    lemma3_chain_check,
    verify_covering,
)

from .conftest import ACCEPTANCE_LINES
from .test_cli import DETERMINISM_CASES

def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_levy_gromov_tail():
    t0 = time.perf_counter()
    M = Sphere(50)
    rep = empirical_tail(coordinate(np.eye(51)[0]), M, 0.0, 0.3, 100_000, 101)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and elapsed < 10 and rep.theoretical_bound == pytest.approx(math.exp(-2.205), rel=1e-12)
    parts = [f"sphere:50 tail {rep.empirical_tail:.5f} <= {rep.theoretical_bound:.4f} + 4SE ({elapsed:.2f}s)"]
    for designator, M, seed in (("rp:20", RealProjective(20), 102), ("cp:10", ComplexProjective(10), 103)):
        T = distance_to(M, np.eye(M.ambient_dim, dtype=M.dtype)[0])
        med = estimate_median(T, M, 100_000, seed)
        r = empirical_tail(T, M, med.median, 0.3, 100_000, seed + 100, med.ci)
        ok &= r.passed and r.theoretical_bound == levy_gromov_bound(M, 0.3)
        parts.append(f"{designator} {r.empirical_tail:.5f} <= {r.theoretical_bound:.4f} + 4SE")
    record(1, "Levy-Gromov tail", ok, "; ".join(parts))


def cap_tail_oracle(eps):
    """mu(|d(x, e1) - pi/2| > eps) on S^2 from the polar-angle density sin(t)/2."""
    lower, _ = integrate.quad(lambda t: 0.5 * math.sin(t), 0, math.pi / 2 - eps)
    upper, _ = integrate.quad(lambda t: 0.5 * math.sin(t), math.pi / 2 + eps, math.pi)
    return lower + upper


def test_criterion_2_cap_oracle():
    M = Sphere(2)
    T = distance_to(M, np.eye(3)[0])
    ok, parts = True, []
    for eps, seed in ((0.3, 201), (0.5, 202)):
        p = cap_tail_oracle(eps)
        rep = empirical_tail(T, M, math.pi / 2, eps, 100_000, seed)
        se = math.sqrt(p * (1 - p) / rep.n_samples)
        z = abs(rep.empirical_tail - p) / se
        ok &= z <= 3
        parts.append(f"eps={eps}: MC {rep.empirical_tail:.5f} vs exact {p:.5f} ({z:.2f} SE)")
    record(2, "exact spherical-cap oracle on S^2", ok, "; ".join(parts))


def test_criterion_3_chain_and_nets():
    t0 = time.perf_counter()
    grid = list(itertools.product(list(range(1, 31)) + [100], (0.1, 0.3, 0.5, 1.0)))
    chain_ok = True
    for m, x in grid:
        c = lemma3_chain_check(m, x, 1.0)
        lv = c.log_values
        chain_ok &= c.passed
        if m >= 2:
            chain_ok &= lv[0] < lv[1] < lv[2] < lv[3]
        else:
            # the integral, gamma and linear members coincide at pi/x when m = 1
            chain_ok &= lv[2] < lv[3]
    nets_ok, parts = True, []
    for m, delta in itertools.product((2, 3, 4), (0.3, 0.5)):
        net = build_net(Sphere(m), delta, 300 + 10 * m + int(10 * delta))
        cover = verify_covering(net, 10_000, 400 + m)
        bound = cardinality_bound_closed(m, delta, 1.0)
        nets_ok &= net.N <= bound and cover.fraction_covered == 1.0
        parts.append(f"S^{m} d={delta}: N={net.N} <= {bound:.0f}, covered {cover.fraction_covered}, "
                     f"exact covering radius {hull_covering_radius(net):.4f}")
    elapsed = time.perf_counter() - t0
    record(
        3, "net-size chain and built nets", chain_ok and nets_ok and elapsed < 60,
        f"chain {len(grid)} grid points ordered (m=1: first three equal pi/x within 1e-12); "
        + "; ".join(parts) + f"; {elapsed:.1f}s",
    )


def test_criterion_4_finder():
    t0 = time.perf_counter()
    M = Sphere(200)
    T = coordinate(np.eye(201)[0])
    s = dimension_bound(0.8, 1.0, 200, M.max_tg_dim)
    successes, worst_dense, draws, certs_ok = 0, 0.0, [], True
    for seed in range(20):
        try:
            cert = find_submanifold(T, M, 0.8, 4000 + seed, max_draws=10)
        except (MaxDrawsExceededError, DenseValidationError):
            draws.append(10)
            continue
        successes += 1
        draws.append(cert.draws_used)
        worst_dense = max(worst_dense, cert.max_dense_deviation - cert.median_half_width)
        certs_ok &= cert.valid and cert.s == 5 and cert.max_dense_deviation <= 0.8 + cert.median_half_width
    elapsed = time.perf_counter() - t0
    ok = s == 5 and successes / 20 >= 0.99 and certs_ok and elapsed < 300
    record(4, "finder on sphere:200", ok,
           f"s={s}; {successes}/20 seeds succeeded within 10 draws (max draws used {max(draws)}); "
           f"max dense deviation - CI = {worst_dense:.4f} <= 0.8; {elapsed:.1f}s")


def test_criterion_5_dimension_formulas():
    worst, integers_ok = 0.0, True
    for eps, n in itertools.product((0.05, 0.3, 0.8, 1.5, 3.0, 6.0), (2, 10, 200, 10_000)):
        a = dimension_formula(eps, 1.0, n)
        b = eps**2 * (n - 1) / (8 * math.log(12 / eps))
        c = dimension_formula(eps, 0.25, 2 * n)
        d = eps**2 * (2 * n - 1) / (32 * math.log(24 / eps))
        worst = max(worst, abs(a - b) / abs(b), abs(c - d) / abs(d))
        if a >= 1:
            integers_ok &= dimension_bound(eps, 1.0, n, 10**9) == math.ceil(b) - 1
    record(5, "dimension formulas for the sphere and CP^n families", worst <= 1e-12 and integers_ok,
           f"max relative difference {worst:.2e}; integer bound is the largest s below the formula")


def test_criterion_6_disintegration():
    M = Sphere(20)
    spec = coordinate_spec(M, 5)
    rep = disintegration_check(lambda x: x[:, 0] ** 2, M, spec, 500, 500, 600)
    one = disintegration_check(lambda x: np.ones(len(x)), M, spec, 500, 500, 601)
    near = abs(rep.global_mean - 1 / 21) <= 3 * rep.combined_se
    ok = rep.passed and near and one.global_mean == 1.0 and one.nested_mean == 1.0
    record(6, "averaging identity over random submanifolds", ok,
           f"global {rep.global_mean:.5f} nested {rep.nested_mean:.5f} (1/21={1/21:.5f}), "
           f"diff {rep.difference:.2e} <= 3*{rep.combined_se:.2e}; u=1 exact")


def _haar_vs_uniform(M, n_draws, seed):
    rng = np.random.default_rng(seed)
    x = sample_uniform(M, rng)
    Q = sample_haar_isometry(M, rng, size=n_draws)
    Z = np.einsum("kij,j->ki", Q, x)
    U = sample_uniform(M, rng, size=n_draws)
    ok = True
    # first moment: every coordinate mean within 4 SE of 0
    mean = Z.mean(axis=0)
    se = np.sqrt(np.mean(np.abs(Z - mean) ** 2, axis=0) / n_draws)
    ok &= bool(np.all(np.abs(mean) <= 4 * se))
    # second moment of the first coordinate against 1/(n+1)
    z2 = np.abs(Z[:, 0]) ** 2
    target = 1 / M.ambient_dim
    ok &= abs(z2.mean() - target) <= 4 * z2.std(ddof=1) / math.sqrt(n_draws)
    u2 = np.abs(U[:, 0]) ** 2
    ok &= abs(u2.mean() - target) <= 4 * u2.std(ddof=1) / math.sqrt(n_draws)
    # ball frequencies at three (centre, radius) pairs
    worst = 0.0
    for r in (0.5 * M.diameter / 2, M.diameter / 2, 0.8 * M.diameter):
        c = sample_uniform(M, rng)
        p = np.mean(geodesic_distance(M, Z, c) < r)
        q = np.mean(geodesic_distance(M, U, c) < r)
        se = math.sqrt((p * (1 - p) + q * (1 - q)) / n_draws) or 1 / n_draws
        worst = max(worst, abs(p - q) / se)
    ok &= worst <= 4
    return ok, f"{M.designator}: E|z1|^2={z2.mean():.5f} (1/{M.ambient_dim}), max ball gap {worst:.2f} SE"


def test_criterion_7_haar():
    ok1, d1 = _haar_vs_uniform(Sphere(20), 40_000, 700)
    ok2, d2 = _haar_vs_uniform(ComplexProjective(5), 40_000, 701)
    x = sample_uniform(Sphere(20), 702)
    Q = sample_haar_isometry(Sphere(20), 703)
    ok3 = np.allclose(apply_isometry(Q, x), Q @ x)
    record(7, "Haar pushforward equals the uniform measure", ok1 and ok2 and ok3, f"{d1}; {d2}")


def test_criterion_8_curvature():
    M = ComplexProjective(3)
    sec = sectional_curvature(M, random_frames(M, 2, 100_000, 800), check=False)
    in_range = bool(np.all(sec >= 0.25 - 1e-9) and np.all(sec <= 1 + 1e-9))
    ok = in_range and sec.min() <= 0.27 and sec.max() >= 0.98
    parts = [f"cp:3 sectional in [{sec.min():.4f}, {sec.max():.4f}]"]
    worst_res = 0.0
    for i, model in enumerate((Sphere(7), RealProjective(5), ComplexProjective(3))):
        for m in (3, model.real_dim - 1):
            res = inductive_identity_check(model, random_frames(model, m + 1, 1000, 810 + 10 * i + m))
            worst_res = max(worst_res, float(np.max(res)))
        for m in sorted({2, 4, model.real_dim}):
            scan = ricci_floor_scan(model, m, 10_000, 850 + 10 * i + m)
            good = scan.min_observed >= (m - 1) * model.curvature_floor_K - 1e-6
            ok &= good
            parts.append(f"{model.designator} m={m}: min {scan.min_observed:.4f} >= {(m - 1) * model.curvature_floor_K:g}")
    ok &= worst_res < 1e-9
    parts.append(f"identity residual {worst_res:.1e}")
    record(8, "curvature ranges, identity and Ricci floors", ok, "; ".join(parts))


def test_criterion_9_determinism(tmp_path):
    outputs_match = True
    names = sorted(DETERMINISM_CASES)
    for name in names:
        runs = []
        for hashseed in ("1", "2"):
            env = dict(os.environ, PYTHONHASHSEED=hashseed)
            proc = subprocess.run([sys.executable, "-m", "conclab", *DETERMINISM_CASES[name]],
                                  capture_output=True, env=env, check=False)
            runs.append((proc.returncode, proc.stdout))
        outputs_match &= runs[0] == runs[1] and runs[0][0] == 0 and len(runs[0][1]) > 0
    record(9, "byte-identical CLI reruns", outputs_match,
           f"{len(names)} invocations covering net, bounds, tail, find, disintegrate, curvature")
