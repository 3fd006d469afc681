import io
import json
import math
import zlib

import jsonschema
import numpy as np
import pytest
from scipy import integrate

from conclab.concentration import (
    REPORT_SCHEMA,
    IncompatibleFunctionError,
    abs_coordinate,
    catalog,
    constant,
    coordinate,
    distance_to,
    empirical_lipschitz,
    empirical_tail,
    estimate_median,
    get_function,
    levy_gromov_bound,
    median_with_ci,
    report_from_json,
    scaled,
)
from conclab.geometry import ComplexProjective, RealProjective, Sphere, parse_model, sample_haar_isometry, sample_uniform


def s2_distance_tail_oracle(eps):
    """mu(|d(x, e1) - pi/2| > eps) on S^2 by integrating the polar-angle density sin(t)/2."""
    density = lambda t: 0.5 * math.sin(t)
    lower, _ = integrate.quad(density, 0, math.pi / 2 - eps)
    upper, _ = integrate.quad(density, math.pi / 2 + eps, math.pi)
    return lower + upper


def test_cap_oracle_closed_form():
    for eps in (0.1, 0.3, 0.5, 1.0):
        assert s2_distance_tail_oracle(eps) == pytest.approx(1 - math.sin(eps), rel=1e-12)


@pytest.mark.parametrize("eps", [0.3, 0.5])
def test_s2_tail_matches_cap_oracle(eps, rng):
    M = Sphere(2)
    T = distance_to(M, np.eye(3)[0])
    rep = empirical_tail(T, M, math.pi / 2, eps, 100_000, rng)
    p = s2_distance_tail_oracle(eps)
    se = math.sqrt(p * (1 - p) / rep.n_samples)
    assert abs(rep.empirical_tail - p) <= 3 * se


@pytest.mark.parametrize("designator", ["sphere:3", "rp:4", "cp:3", "rp:3@2"])
def test_catalog_lipschitz(designator, rng):
    M = parse_model(designator)
    for label, f in catalog(M, rng).items():
        ratio = empirical_lipschitz(f, M, 10_000, rng)
        assert ratio <= f.claimed_constant + 1e-9, label


@pytest.mark.parametrize("designator", ["rp:4", "cp:3"])
def test_catalog_phase_invariant(designator, rng):
    M = parse_model(designator)
    X = sample_uniform(M, rng, size=200)
    if M.is_complex:
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(200, 1)))
    else:
        phase = -np.ones((200, 1))
    for label, f in catalog(M, rng).items():
        np.testing.assert_allclose(f(phase * X), f(X), atol=1e-12, err_msg=label)


def test_abs_coordinate_even_on_rp(rng):
    M = RealProjective(5)
    f = abs_coordinate(np.eye(6)[0])
    X = sample_uniform(M, rng, size=100)
    assert np.array_equal(f(X), f(-X))


def test_distance_function_vanishes_at_centre(rng):
    for M in (Sphere(4), RealProjective(3), ComplexProjective(2)):
        p = sample_uniform(M, rng)
        assert distance_to(M, p)(p[None])[0] == pytest.approx(0.0, abs=1e-7)


def test_coordinate_rejected_off_sphere():
    with pytest.raises(IncompatibleFunctionError):
        estimate_median(coordinate(np.eye(4)[0]), RealProjective(3), 10)
    with pytest.raises(KeyError):
        get_function("coord", RealProjective(3))
    with pytest.raises(KeyError):
        get_function("nope", Sphere(3))


def test_empirical_lipschitz_examples(rng):
    M = Sphere(10)
    e1 = np.eye(11)[0]
    assert empirical_lipschitz(constant(0.3), M, 2000, rng) == 0.0
    assert empirical_lipschitz(coordinate(e1), M, 10_000, rng) <= 1.0 + 1e-9
    r = empirical_lipschitz(scaled(coordinate(e1), 2.0), M, 10_000, rng)
    assert 1.0 < r <= 2.0 + 1e-9


def test_median_examples(rng):
    est = estimate_median(coordinate(np.eye(21)[0]), Sphere(20), 100_000, rng)
    assert abs(est.median) <= 0.02
    assert est.ci[0] <= est.median <= est.ci[1]
    est = estimate_median(constant(0.7), Sphere(3), 1000, rng)
    assert est.median == 0.7 and est.ci == (0.7, 0.7)
    est = estimate_median(distance_to(Sphere(2), np.eye(3)[0]), Sphere(2), 100_000, rng)
    assert est.ci[0] - 0.002 <= math.pi / 2 <= est.ci[1] + 0.002


def test_median_ci_covers_known_median(rng):
    hits = 0
    for _ in range(200):
        est = median_with_ci(rng.standard_normal(501))
        hits += est.ci[0] <= 0.0 <= est.ci[1]
    assert hits >= 190


def test_median_ci_shrinks_like_root_n(rng):
    widths = {}
    for n in (10_000, 40_000):
        w = [median_with_ci(rng.standard_normal(n)) for _ in range(20)]
        widths[n] = np.mean([e.ci[1] - e.ci[0] for e in w])
    assert 1.6 <= widths[10_000] / widths[40_000] <= 2.6


def test_epsilon_zero_bound_is_one(rng):
    rep = empirical_tail(coordinate(np.eye(4)[0]), Sphere(3), 0.0, 0.0, 100, rng)
    assert rep.theoretical_bound == 1.0 and rep.passed


def test_levy_gromov_constant():
    assert levy_gromov_bound(Sphere(50), 0.3) == pytest.approx(math.exp(-2.205), rel=1e-14)
    assert levy_gromov_bound(ComplexProjective(10), 0.3) == pytest.approx(math.exp(-19 * 0.25 * 0.09 / 2), rel=1e-14)


@pytest.mark.parametrize("designator", ["sphere:10", "sphere:50", "rp:20", "cp:10"])
def test_tail_domination(designator):
    M = parse_model(designator)
    rng = np.random.default_rng(zlib.crc32(designator.encode()))
    for label, f in catalog(M, rng).items():
        med = estimate_median(f, M, 20_000, rng)
        for eps in (0.2, 0.3, 0.5):
            rep = empirical_tail(f, M, med.median, eps, 20_000, rng, med.ci)
            assert rep.passed, (label, eps, rep.empirical_tail, rep.theoretical_bound)


def test_report_isometry_invariance(rng):
    M = Sphere(8)
    f = distance_to(M, np.eye(9)[0])
    Q = sample_haar_isometry(M, rng)
    g = f.compose(Q)
    n = 50_000
    a = empirical_tail(f, M, estimate_median(f, M, n, rng).median, 0.3, n, rng)
    b = empirical_tail(g, M, estimate_median(g, M, n, rng).median, 0.3, n, rng)
    se = math.hypot(a.standard_error, b.standard_error)
    assert abs(a.empirical_tail - b.empirical_tail) <= 4 * se
    assert abs(a.median_estimate - b.median_estimate) <= 0.02


def test_report_serialization(rng):
    M = Sphere(5)
    rep = empirical_tail(coordinate(np.eye(6)[0]), M, 0.0, 0.3, 1000, 42, keep_values=True)
    data = json.loads(rep.to_json())
    jsonschema.validate(data, REPORT_SCHEMA)
    assert data["seed"] == 42 and data["theoretical_bound"] == levy_gromov_bound(M, 0.3)
    back = report_from_json(rep.to_json())
    assert back == rep
    buf = io.StringIO()
    rep.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "index,value" and len(lines) == 1001
