"""Random search for a totally geodesic submanifold on which T is nearly constant.

Two constructions are implemented.

Net transport (:func:`find_submanifold`): take the coordinate submanifold
M0 of the largest admissible dimension s, a maximal (eps/2)-separated net
{y_j} on it, and the median m of T.  Draw Haar isometries f until
|T(f(y_j)) - m| <= eps/2 for every j.  Because f is an isometry the images
form an eps/2-net of S = f(M0), and the Lipschitz property spreads the bound
to |T - m| <= eps on all of S.  Each draw succeeds with probability at least
``1 - N exp(-eps^2 K (n - 1) / 8)``.

Averaging (:func:`disintegration_check`, :func:`select_by_disintegration`):
the ambient mean of any test function equals the mean, over Haar-random
copies f(M0), of its mean on the copy.  Applied to the indicator of
{|T - m| <= eps/2} this guarantees a copy on which that set has large mass.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _io
from ._rng import seed_sequence, substream
from .concentration import LipschitzFunction, MedianEstimate, estimate_median
from .geometry import (
    GeodesicSubmanifoldSpec,
    ManifoldModel,
    SubKind,
    apply_isometry,
    embed,
    parse_model,
    sample_haar_isometry,
    sample_uniform,
)
from .nets import DEFAULT_STOP_AFTER, Net, build_net, distance_to_net

DEFAULT_MAX_DRAWS = 1000
DEFAULT_DENSE = 10_000
DEFAULT_MEDIAN_SAMPLES = 10_000


class NoAdmissibleDimensionError(ValueError):
    pass


class MaxDrawsExceededError(RuntimeError):
    pass


class DenseValidationError(RuntimeError):
    """Dense-sample check failed; ``cause`` is ``"covering"`` or ``"function"``."""

    def __init__(self, message: str, cause: str):
        super().__init__(message)
        self.cause = cause


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("CONCLAB_THREADS", "1")))
    except ValueError:
        return 1


def dimension_formula(epsilon: float, K: float, n: int, n_functions: int = 1) -> float:
    """eps^2 K (n-1) / (8 ln(12 / (eps sqrt K))), the strict upper limit on s.

    With ``n_functions > 1`` the union bound over that many functions
    subtracts ``ln(n_functions)`` from the numerator's exponent budget.
    """
    x = epsilon * math.sqrt(K)
    if not 0 < x < 12:
        raise NoAdmissibleDimensionError(f"need 0 < eps*sqrt(K) < 12, got {x:.6g}")
    if n < 2:
        raise NoAdmissibleDimensionError("ambient dimension must be >= 2")
    budget = epsilon**2 * K * (n - 1) / 8 - math.log(n_functions)
    return budget / math.log(12 / x)


def dimension_bound(epsilon: float, K: float, n: int, r: int, n_functions: int = 1) -> int:
    """Largest integer s < formula, capped at r."""
    f = dimension_formula(epsilon, K, n, n_functions)
    s = min(r, math.ceil(f) - 1)
    if s < 1:
        raise NoAdmissibleDimensionError(
            f"no admissible dimension: bound {f:.4g} < 1 (eps={epsilon}, K={K}, n={n})"
        )
    return s


def success_floor(N: int, epsilon: float, K: float, n: int, n_functions: int = 1) -> float:
    """max(0, 1 - N exp(-eps^2 K (n-1) / 8)) per Haar draw."""
    return max(0.0, 1.0 - n_functions * N * math.exp(-(epsilon**2) * K * (n - 1) / 8))


def ball_mass_floor(s: int, epsilon: float, K: float) -> float:
    """(eps sqrt K / 6)^s: lower bound on the mass of an eps/2 ball in M."""
    x = epsilon * math.sqrt(K)
    if not 0 < x <= math.pi:
        raise ValueError(f"need 0 < eps*sqrt(K) <= pi, got {x:.6g}")
    return math.exp(s * math.log(x / 6))


def coordinate_spec(model: ManifoldModel, s: int) -> GeodesicSubmanifoldSpec:
    """Coordinate submanifold of real dimension at most s."""
    k = s // 2 if model.is_complex else s
    if k < 1:
        raise NoAdmissibleDimensionError(f"dimension {s} too small for a coordinate submanifold of {model}")
    return GeodesicSubmanifoldSpec(SubKind.COORDINATE, model, k)


@dataclass
class ConcentrationCertificate:
    model: ManifoldModel
    isometry: np.ndarray
    spec: GeodesicSubmanifoldSpec
    net: Net
    s: int
    epsilon: float
    median: float
    median_ci: tuple[float, float]
    max_net_deviation: float
    max_dense_deviation: float
    draws_used: int
    theoretical_success_floor: float
    function: str = ""
    seed: int | None = None
    n_dense: int = DEFAULT_DENSE

    @property
    def median_half_width(self) -> float:
        return max(self.median - self.median_ci[0], self.median_ci[1] - self.median)

    @property
    def valid(self) -> bool:
        h = self.median_half_width
        return (
            self.max_net_deviation <= self.epsilon / 2 + h
            and self.max_dense_deviation <= self.epsilon + h
            and self.s <= self.model.max_tg_dim
        )

    def chart(self, p_low) -> np.ndarray:
        """Map points of the low model onto the certified submanifold S."""
        return apply_isometry(self.isometry, embed(self.spec, p_low))

    def to_dict(self) -> dict:
        return {
            "v": _io.SCHEMA_VERSION,
            "model": self.model.designator,
            "function": self.function,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "s": self.s,
            "submanifold": self.spec.designator,
            "median": self.median,
            "median_ci": list(self.median_ci),
            "max_net_deviation": self.max_net_deviation,
            "max_dense_deviation": self.max_dense_deviation,
            "n_dense": self.n_dense,
            "draws_used": self.draws_used,
            "success_floor": self.theoretical_success_floor,
            "isometry": _io.encode_array(self.isometry),
            "net": {
                "model": self.net.model.designator,
                "delta": self.net.delta,
                "points": _io.encode_array(self.net.points),
                "seed": self.net.build_seed,
                "stop_evidence": self.net.stop_evidence,
            },
        }

    def to_json(self, indent: int | None = None) -> str:
        return _io.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> ConcentrationCertificate:
        model = parse_model(data["model"])
        spec = GeodesicSubmanifoldSpec.parse(data["submanifold"], model)
        net = Net.from_dict(data["net"])
        net.spec = spec
        return cls(
            model=model,
            isometry=_io.decode_array(data["isometry"], model.is_complex),
            spec=spec,
            net=net,
            s=int(data["s"]),
            epsilon=float(data["epsilon"]),
            median=float(data["median"]),
            median_ci=tuple(float(c) for c in data["median_ci"]),
            max_net_deviation=float(data["max_net_deviation"]),
            max_dense_deviation=float(data["max_dense_deviation"]),
            draws_used=int(data["draws_used"]),
            theoretical_success_floor=float(data["success_floor"]),
            function=data.get("function", ""),
            seed=data.get("seed"),
            n_dense=int(data.get("n_dense", DEFAULT_DENSE)),
        )

    @classmethod
    def from_json(cls, text: str) -> ConcentrationCertificate:
        return cls.from_dict(json.loads(text))


@dataclass
class _Setup:
    model: ManifoldModel
    s: int
    spec: GeodesicSubmanifoldSpec
    net: Net
    embedded: np.ndarray
    median: MedianEstimate
    floor: float
    seeds: np.random.SeedSequence = field(repr=False)


def _prepare(
    T: LipschitzFunction,
    model: ManifoldModel,
    epsilon: float,
    rng,
    s: int | None,
    n_median: int,
    stop_after: int,
    n_functions: int,
) -> _Setup:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    T.check_model(model)
    K = model.curvature_floor_K
    if s is None:
        s = dimension_bound(epsilon, K, model.real_dim, model.max_tg_dim, n_functions)
    spec = coordinate_spec(model, s)
    low = spec.low_model
    seeds = seed_sequence(rng)
    delta = min(epsilon / 2, low.diameter)
    net = build_net(low, delta, substream(seeds, "net"), stop_after=stop_after)
    net.build_seed = int(seeds.entropy) if isinstance(seeds.entropy, int) else None
    net.spec = spec
    median = estimate_median(T, model, n_median, substream(seeds, "median"))
    floor = success_floor(net.N, epsilon, K, model.real_dim, n_functions)
    return _Setup(model, low.real_dim, spec, net, embed(spec, net.points), median, floor, seeds)


def _draw(setup: _Setup, index: int) -> np.ndarray:
    return sample_haar_isometry(setup.model, substream(setup.seeds, "draw", index))


def _net_deviation(T: LipschitzFunction, setup: _Setup, Q: np.ndarray) -> np.ndarray:
    return np.abs(T(apply_isometry(Q, setup.embedded)) - setup.median.median)


def _scan_draws(T, setup: _Setup, start: int, stop: int, threads: int):
    """Evaluate draws [start, stop); returns (index, Q, max deviation) per draw in order."""

    def one(i):
        Q = _draw(setup, i)
        return i, Q, float(_net_deviation(T, setup, Q).max())

    if threads <= 1:
        return [one(i) for i in range(start, stop)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(start, stop)))


def _dense_check(T, setup: _Setup, Q, n_dense: int, rng, tolerance: float) -> float:
    low = setup.spec.low_model
    U = sample_uniform(low, rng, size=n_dense)
    dev = np.abs(T(apply_isometry(Q, embed(setup.spec, U))) - setup.median.median)
    worst = float(dev.max())
    if worst > tolerance:
        gap = distance_to_net(setup.net, U)
        if np.any(gap >= setup.net.delta):
            raise DenseValidationError(
                f"dense deviation {worst:.6g} exceeds {tolerance:.6g}; {int(np.sum(gap >= setup.net.delta))} "
                f"dense points lie outside every net ball (covering failure: net not maximal, raise stop_after)",
                "covering",
            )
        raise DenseValidationError(
            f"dense deviation {worst:.6g} exceeds {tolerance:.6g} although the net covers every dense point "
            f"(function failure: T is not 1-Lipschitz or the median is off)",
            "function",
        )
    return worst


def find_submanifold(
    T: LipschitzFunction,
    model: ManifoldModel,
    epsilon: float,
    rng=None,
    max_draws: int = DEFAULT_MAX_DRAWS,
    *,
    s: int | None = None,
    n_median: int = DEFAULT_MEDIAN_SAMPLES,
    n_dense: int = DEFAULT_DENSE,
    stop_after: int = DEFAULT_STOP_AFTER,
    n_functions: int = 1,
    threads: int | None = None,
) -> ConcentrationCertificate:
    """Search Haar isometries for a copy of M0 on which T stays near its median.

    The first draw (lowest index) whose transported net satisfies
    ``|T(z_j) - m| <= eps/2 + h`` is accepted, ``h`` being the half-width of
    the median's confidence interval.  The result is then checked on
    ``n_dense`` fresh points of S against ``eps + h``.
    """
    if max_draws < 1:
        raise ValueError("max_draws must be >= 1")
    setup = _prepare(T, model, epsilon, rng, s, n_median, stop_after, n_functions)
    h = setup.median.half_width
    threshold = epsilon / 2 + h
    threads = threads or n_threads()

    deviations = []
    found = None
    step = max(1, threads)
    for start in range(0, max_draws, step):
        for i, Q, dev in _scan_draws(T, setup, start, min(max_draws, start + step), threads):
            deviations.append(dev)
            if dev <= threshold:
                found = (i, Q, dev)
                break
        if found:
            break
    if found is None:
        devs = np.asarray(deviations)
        raise MaxDrawsExceededError(
            f"no draw out of {max_draws} kept T within {threshold:.6g} on the net "
            f"(N = {setup.net.N}, success floor {setup.floor:.4g}); "
            f"per-draw max deviation: min {devs.min():.4g}, median {np.median(devs):.4g}"
        )
    i, Q, dev = found
    dense = _dense_check(T, setup, Q, n_dense, substream(setup.seeds, "dense"), epsilon + h)

    transported = Net(
        apply_isometry(Q, setup.embedded), setup.net.delta, model, setup.net.build_seed,
        setup.net.stop_evidence, setup.spec,
    )
    return ConcentrationCertificate(
        model=model,
        isometry=Q,
        spec=setup.spec,
        net=transported,
        s=setup.s,
        epsilon=float(epsilon),
        median=setup.median.median,
        median_ci=setup.median.ci,
        max_net_deviation=dev,
        max_dense_deviation=dense,
        draws_used=i + 1,
        theoretical_success_floor=setup.floor,
        function=T.label,
        seed=int(rng) if isinstance(rng, (int, np.integer)) else None,
        n_dense=n_dense,
    )


@dataclass
class DrawStatistics:
    draws: int
    successes: int
    success_floor: float
    net_size: int

    @property
    def rate(self) -> float:
        return self.successes / self.draws

    @property
    def standard_error(self) -> float:
        p = self.rate
        return math.sqrt(max(p * (1 - p), 1.0 / self.draws) / self.draws)


def draw_success_rate(
    T: LipschitzFunction,
    model: ManifoldModel,
    epsilon: float,
    n_draws: int,
    rng=None,
    *,
    s: int | None = None,
    n_median: int = DEFAULT_MEDIAN_SAMPLES,
    stop_after: int = DEFAULT_STOP_AFTER,
) -> DrawStatistics:
    """Fraction of Haar draws whose transported net passes the eps/2 test."""
    setup = _prepare(T, model, epsilon, rng, s, n_median, stop_after, 1)
    threshold = epsilon / 2 + setup.median.half_width
    hits = sum(dev <= threshold for _, _, dev in _scan_draws(T, setup, 0, n_draws, 1))
    return DrawStatistics(n_draws, int(hits), setup.floor, setup.net.N)


# ---------------------------------------------------------------------------
# averaging over random submanifolds


@dataclass
class DisintegrationReport:
    global_mean: float
    nested_mean: float
    combined_se: float
    outer: int
    inner: int
    copy_means: np.ndarray = field(repr=False)

    @property
    def difference(self) -> float:
        return abs(self.global_mean - self.nested_mean)

    @property
    def passed(self) -> bool:
        return self.difference <= 3 * self.combined_se

    def to_dict(self) -> dict:
        return {
            "global_mean": self.global_mean,
            "nested_mean": self.nested_mean,
            "combined_se": self.combined_se,
            "difference": self.difference,
            "outer": self.outer,
            "inner": self.inner,
            "passed": self.passed,
        }


def disintegration_check(
    u, model: ManifoldModel, spec: GeodesicSubmanifoldSpec, outer: int, inner: int, rng=None
) -> DisintegrationReport:
    """Ambient mean of ``u`` against the mean over Haar copies f(M0) of the mean on f(M0)."""
    seeds = seed_sequence(rng)
    direct = np.asarray(u(sample_uniform(model, substream(seeds, "global"), size=outer * inner)), dtype=float)
    g_mean = float(direct.mean())
    g_se = float(direct.std(ddof=1) / math.sqrt(direct.size)) if direct.size > 1 else 0.0

    low = spec.low_model
    draws = substream(seeds, "copies")
    copy_means = np.empty(outer)
    for j in range(outer):
        Q = sample_haar_isometry(model, draws)
        pts = apply_isometry(Q, embed(spec, sample_uniform(low, draws, size=inner)))
        copy_means[j] = np.mean(u(pts))
    n_mean = float(copy_means.mean())
    n_se = float(copy_means.std(ddof=1) / math.sqrt(outer)) if outer > 1 else 0.0
    return DisintegrationReport(g_mean, n_mean, math.hypot(g_se, n_se), outer, inner, copy_means)


@dataclass
class SelectionResult:
    model: ManifoldModel
    isometry: np.ndarray
    spec: GeodesicSubmanifoldSpec
    s: int
    epsilon: float
    median: float
    median_ci: tuple[float, float]
    best_mass: float
    mean_mass: float
    mass_floor: float
    max_dense_deviation: float

    @property
    def median_half_width(self) -> float:
        return max(self.median - self.median_ci[0], self.median_ci[1] - self.median)

    def to_dict(self) -> dict:
        return {
            "model": self.model.designator,
            "submanifold": self.spec.designator,
            "s": self.s,
            "epsilon": self.epsilon,
            "median": self.median,
            "median_ci": list(self.median_ci),
            "best_mass": self.best_mass,
            "mean_mass": self.mean_mass,
            "mass_floor": self.mass_floor,
            "max_dense_deviation": self.max_dense_deviation,
            "isometry": _io.encode_array(self.isometry),
        }


def select_by_disintegration(
    T: LipschitzFunction,
    model: ManifoldModel,
    epsilon: float,
    outer: int,
    inner: int,
    rng=None,
    *,
    s: int | None = None,
    n_median: int = DEFAULT_MEDIAN_SAMPLES,
    n_dense: int = DEFAULT_DENSE,
) -> SelectionResult:
    """Pick, among ``outer`` Haar copies of M0, the one where {|T - m| <= eps/2} has most mass.

    The averaged mass is at least ``1 - exp(-eps^2 K (n-1)/8)``, so some copy
    reaches it; the chosen copy is then checked densely against ``eps + h``.
    """
    T.check_model(model)
    K = model.curvature_floor_K
    if s is None:
        s = dimension_bound(epsilon, K, model.real_dim, model.max_tg_dim)
    spec = coordinate_spec(model, s)
    low = spec.low_model
    seeds = seed_sequence(rng)
    med = estimate_median(T, model, n_median, substream(seeds, "median"))
    h = med.half_width

    draws = substream(seeds, "copies")
    best = (-1.0, None)
    masses = np.empty(outer)
    for j in range(outer):
        Q = sample_haar_isometry(model, draws)
        pts = apply_isometry(Q, embed(spec, sample_uniform(low, draws, size=inner)))
        masses[j] = np.mean(np.abs(T(pts) - med.median) <= epsilon / 2 + h)
        if masses[j] > best[0]:
            best = (float(masses[j]), Q)
    Q = best[1]
    U = sample_uniform(low, substream(seeds, "dense"), size=n_dense)
    dense = float(np.max(np.abs(T(apply_isometry(Q, embed(spec, U))) - med.median)))
    return SelectionResult(
        model, Q, spec, low.real_dim, float(epsilon), med.median, med.ci, best[0],
        float(masses.mean()), 1.0 - math.exp(-(epsilon**2) * K * (model.real_dim - 1) / 8), dense,
    )
