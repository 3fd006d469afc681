"""Delta-nets on the model spaces and the volume-ratio bound on their size.

A net is built as a maximal delta-separated set by greedy random packing:
uniform candidates are accepted when they are at least ``delta`` away from
every accepted point, and the build stops after ``stop_after`` consecutive
rejections.  On its own that makes maximality (hence covering) only
statistical.  For the real families in low dimension a completion pass then
closes the remaining holes exactly: every facet of the convex hull of the
points (symmetrised by x -> -x for ``rp``) bounds an empty cap centred at
the facet normal, and any such centre still ``delta`` away from the net is
added until none is left.  :func:`verify_covering` checks covering by
sampling in every case.

The size bound for an m-dimensional space with curvature >= K is a chain

    integral ratio  <=  gamma bound  <  (pi/4) m (4 / (delta sqrt K))^m  <  (6 / (delta sqrt K))^m

where the integral ratio is the volume of a ball of radius pi/(2 sqrt K)
over the volume of a ball of radius delta/2 in the constant-curvature model.
Everything is computed in log space.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import _io
from ._rng import check_generator
from .geometry import (
    GeodesicSubmanifoldSpec,
    ManifoldModel,
    pairwise_distances,
    parse_model,
    sample_uniform,
)

DEFAULT_STOP_AFTER = 5000
#: Hull completion runs by default on real families up to this ambient dimension.
HULL_MAX_AMBIENT = 5
CHAIN_SLACK = 1e-12
MAX_CHAIN_DIM = 500


class QuadratureError(RuntimeError):
    pass


class BoundPreconditionError(ValueError):
    pass


@dataclass
class Net:
    points: np.ndarray
    delta: float
    model: ManifoldModel
    build_seed: int | None = None
    stop_evidence: int = 0
    spec: GeodesicSubmanifoldSpec | None = field(default=None, compare=False)
    completion_points: int = 0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def N(self) -> int:
        return len(self.points)

    def min_separation(self) -> float:
        if self.N < 2:
            return math.inf
        D = pairwise_distances(self.model, self.points)
        np.fill_diagonal(D, np.inf)
        return float(D.min())

    def to_dict(self) -> dict:
        return {
            "v": _io.SCHEMA_VERSION,
            "model": self.model.designator,
            "delta": float(self.delta),
            "points": _io.encode_array(self.points),
            "seed": self.build_seed,
            "stop_evidence": int(self.stop_evidence),
            "completion_points": int(self.completion_points),
        }

    def to_json(self, indent: int | None = None) -> str:
        return _io.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> Net:
        model = parse_model(data["model"])
        points = _io.decode_array(data["points"], model.is_complex)
        points = points.reshape(-1, model.ambient_dim)
        return cls(
            points=points,
            delta=float(data["delta"]),
            model=model,
            build_seed=data.get("seed"),
            stop_evidence=int(data.get("stop_evidence", 0)),
            completion_points=int(data.get("completion_points", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> Net:
        return cls.from_dict(json.loads(text))


def build_net(
    model: ManifoldModel,
    delta: float,
    rng=None,
    stop_after: int = DEFAULT_STOP_AFTER,
    batch: int = 2048,
    complete: bool | None = None,
) -> Net:
    """Greedy random packing with pairwise distances >= ``delta``.

    Candidates are drawn in batches and accepted in draw order; the result is
    fixed by the seed and ``batch``.  ``complete`` (default: on for real
    families with ambient dimension <= ``HULL_MAX_AMBIENT``) adds the hull
    completion pass that makes the packing maximal.
    """
    if not 0 < delta <= model.diameter:
        raise ValueError(f"delta must lie in (0, {model.diameter:.6g}] for {model}, got {delta}")
    if stop_after < 1:
        raise ValueError("stop_after must be >= 1")
    if complete is None:
        complete = not model.is_complex and model.ambient_dim <= HULL_MAX_AMBIENT
    elif complete and model.is_complex:
        raise ValueError("hull completion is only available for sphere and rp models")
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    rng = check_generator(rng)

    index = _NeighborIndex(model)
    run = 0
    while True:
        cand = sample_uniform(model, rng, size=batch)
        far = index.nearest_distance(cand) >= delta
        batch_start = index.size
        prev = -1
        stopped = False
        for i in np.flatnonzero(far):
            run += i - prev - 1
            if run >= stop_after:
                stopped = True
                break
            prev = i
            if index.size > batch_start:
                recent = index.points[batch_start:]
                if _nearest_distance(model, cand[i : i + 1], recent)[0] < delta:
                    run += 1
                    continue
            index.add(cand[i])
            run = 0
        if stopped:
            break
        run += batch - prev - 1
        if run >= stop_after:
            break
    n_random = index.size
    if complete:
        _complete_with_hull(model, index, delta)
    return Net(
        index.points.copy(), float(delta), model, seed, int(min(run, stop_after)),
        completion_points=index.size - n_random,
    )


def _hull_holes(model: ManifoldModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centres and geodesic radii of the empty caps cut out by hull facets.

    Qhull returns unit outward normals ``n`` and offsets ``b`` with
    ``n.x + b <= 0`` on every point, equality on the facet, so the cap
    centred at ``n`` of angle ``arccos(-b)`` contains no point in its interior.
    """
    if model.is_complex:
        raise ValueError("hull holes need a real model")
    P = np.concatenate([points, -points]) if model.is_projective else points
    hull = ConvexHull(P)
    normals = hull.equations[:, :-1]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    radii = model.radius * np.arccos(np.clip(-hull.equations[:, -1], -1.0, 1.0))
    return normals, radii


def _complete_with_hull(model: ManifoldModel, index: _NeighborIndex, delta: float) -> None:
    while index.size > model.ambient_dim:
        try:
            centres, radii = _hull_holes(model, index.points)
        except QhullError:
            return
        order = np.argsort(-radii, kind="stable")
        order = order[radii[order] >= delta]
        if order.size == 0:
            return
        cand = centres[order]
        cand = cand[index.nearest_distance(cand) >= delta]
        start = index.size
        for c in cand:
            if index.size > start and _nearest_distance(model, c[None, :], index.points[start:])[0] < delta:
                continue
            index.add(c)
        if index.size == start:
            return


def hull_covering_radius(net: Net) -> float:
    """Exact covering radius of a net on a real model (largest empty hull cap)."""
    _, radii = _hull_holes(net.model, net.points)
    return float(radii.max())


@dataclass
class CoveringReport:
    max_min_distance: float
    fraction_covered: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "max_min_distance": self.max_min_distance,
            "fraction_covered": self.fraction_covered,
            "samples": self.samples,
        }


def _nearest_distance(model: ManifoldModel, X: np.ndarray, P: np.ndarray, block: int = 2048) -> np.ndarray:
    """Distance from each row of X to its nearest row of P (inf if P is empty).

    Same arithmetic as :func:`pairwise_distances`, with the monotone arccos
    applied after the max over P.
    """
    best = np.full(len(X), -np.inf)
    for row in range(0, len(X), block):
        Xc = np.conj(X[row : row + block])
        for lo in range(0, len(P), block):
            G = Xc @ P[lo : lo + block].T
            c = np.abs(G) if model.is_projective else np.real(G)
            best[row : row + block] = np.maximum(best[row : row + block], c.max(axis=1))
    out = np.full(len(X), np.inf)
    hit = best > -np.inf
    out[hit] = model.radius * np.arccos(np.clip(best[hit], -1.0, 1.0))
    return out


def _index_coords(model: ManifoldModel, X: np.ndarray) -> np.ndarray:
    """Euclidean embedding whose distances are monotone in geodesic distance.

    Sphere: the representative itself.  Projective: the projector x x^*,
    flattened to real coordinates (``|xx* - yy*|^2 = 2 - 2|<x, y>|^2``).
    """
    if not model.is_projective:
        return X
    P = X[:, :, None] * np.conj(X)[:, None, :]
    P = P.reshape(len(X), -1)
    if model.is_complex:
        return np.concatenate([P.real, P.imag], axis=1)
    return P


class _NeighborIndex:
    """Growing point set with nearest-neighbour queries.

    A KD-tree covers the older points; recent additions are scanned by brute
    force until the tree is rebuilt.  The returned distance is always the
    arccos of the exact largest inner product, so it matches
    :func:`pairwise_distances` bit for bit on the chosen neighbour.
    """

    def __init__(self, model: ManifoldModel):
        self.model = model
        self._buf = np.empty((256, model.ambient_dim), dtype=model.dtype)
        self.size = 0
        self._tree = None
        self._indexed = 0

    @property
    def points(self) -> np.ndarray:
        return self._buf[: self.size]

    def add(self, x: np.ndarray) -> None:
        if self.size == len(self._buf):
            self._buf = np.concatenate([self._buf, np.empty_like(self._buf)])
        self._buf[self.size] = x
        self.size += 1
        if self.size - self._indexed > max(64, self._indexed // 4):
            self._tree = cKDTree(_index_coords(self.model, self.points))
            self._indexed = self.size

    def _similarity(self, X: np.ndarray, P: np.ndarray) -> np.ndarray:
        G = np.sum(np.conj(X) * P, axis=-1)
        return np.abs(G) if self.model.is_projective else np.real(G)

    def nearest_distance(self, X: np.ndarray) -> np.ndarray:
        best = np.full(len(X), -np.inf)
        if self._tree is not None and len(X):
            _, idx = self._tree.query(_index_coords(self.model, X), k=1)
            best = self._similarity(X, self._buf[idx])
        if self.size > self._indexed:
            recent = self.points[self._indexed :]
            G = np.conj(X) @ recent.T
            c = np.abs(G) if self.model.is_projective else np.real(G)
            best = np.maximum(best, c.max(axis=1))
        out = np.full(len(X), np.inf)
        hit = best > -np.inf
        out[hit] = self.model.radius * np.arccos(np.clip(best[hit], -1.0, 1.0))
        return out


def distance_to_net(net: Net, X) -> np.ndarray:
    return _nearest_distance(net.model, np.asarray(X), net.points)


def verify_covering(net: Net, samples: int = 10_000, rng=None) -> CoveringReport:
    """Fraction of uniform test points within ``delta`` of the net."""
    rng = check_generator(rng)
    X = sample_uniform(net.model, rng, size=samples)
    dist = distance_to_net(net, X)
    return CoveringReport(float(dist.max()), float(np.mean(dist < net.delta)), samples)


# ---------------------------------------------------------------------------
# cardinality bounds


def _check_bound_args(m: int, delta: float, K: float) -> float:
    if m < 1:
        raise BoundPreconditionError(f"dimension must be >= 1, got {m}")
    if K <= 0 or delta <= 0:
        raise BoundPreconditionError("delta and K must be positive")
    x = delta * math.sqrt(K)
    if x > math.pi:
        raise BoundPreconditionError(f"need delta*sqrt(K) <= pi, got {x:.6g}")
    return x


def log_cardinality_bound_closed(m: int, delta: float, K: float) -> float:
    x = _check_bound_args(m, delta, K)
    return m * math.log(6.0 / x)


def cardinality_bound_closed(m: int, delta: float, K: float) -> float:
    """(6 / (delta sqrt K))^m."""
    return math.exp(log_cardinality_bound_closed(m, delta, K))


def adaptive_simpson(f, a: float, b: float, rtol: float = 1e-10, max_depth: int = 60, pieces: int = 16) -> float:
    """Adaptive Simpson quadrature of a vectorized ``f`` on [a, b] to relative tolerance."""
    if b == a:
        return 0.0
    edges = np.linspace(a, b, pieces + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    fe = f(edges)
    fm = f(mids)
    h = (b - a) / pieces
    wholes = h / 6.0 * (fe[:-1] + 4 * fm + fe[1:])
    scale = abs(float(np.sum(wholes)))
    if scale == 0.0:
        scale = float(np.max(np.abs(fe)) * abs(b - a)) or 1.0
    tol = rtol * scale
    total = 0.0
    stack = [
        (edges[i], edges[i + 1], fe[i], fm[i], fe[i + 1], wholes[i], tol / pieces, 0)
        for i in range(pieces)
    ]
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(np.array([lm, rm]))
        left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi)
        diff = left + right - whole
        if abs(diff) <= 15 * eps:
            total += left + right + diff / 15.0
        elif depth >= max_depth:
            raise QuadratureError(f"adaptive Simpson did not converge on [{lo}, {hi}]")
        else:
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    return total


def log_sine_power_integral(power: int, upper: float, rtol: float = 1e-10) -> float:
    """log of the integral of sin(t)**power over [0, upper], upper in (0, pi/2]."""
    s = math.sin(upper)
    # integrand rescaled to [0, 1] so large powers neither under- nor overflow
    with np.errstate(divide="ignore"):
        integral = adaptive_simpson(lambda t: (np.sin(t) / s) ** power, 0.0, upper, rtol)
    return power * math.log(s) + math.log(integral)


def log_cardinality_bound_integral(m: int, delta: float, K: float) -> float:
    x = _check_bound_args(m, delta, K)
    return log_sine_power_integral(m - 1, math.pi / 2) - log_sine_power_integral(m - 1, x / 2)


def cardinality_bound_integral(m: int, delta: float, K: float) -> float:
    """Volume ratio Vol B_K(pi / (2 sqrt K)) / Vol B_K(delta / 2) in dimension m."""
    return math.exp(log_cardinality_bound_integral(m, delta, K))


def log_cardinality_bound_gamma(m: int, delta: float, K: float) -> float:
    x = _check_bound_args(m, delta, K)
    return (
        0.5 * math.log(math.pi)
        + math.lgamma(m / 2)
        + math.log(m)
        + (2 * m - 1) * math.log(2.0)
        - math.log(2.0)
        - math.lgamma((m + 1) / 2)
        - m * math.log(x)
    )


def log_cardinality_bound_linear(m: int, delta: float, K: float) -> float:
    x = _check_bound_args(m, delta, K)
    return math.log(math.pi / 4) + math.log(m) + m * math.log(4.0 / x)


@dataclass
class ChainCheck:
    m: int
    delta: float
    K: float
    log_values: tuple[float, float, float, float]

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(math.exp(v) if v < 709 else math.inf for v in self.log_values)

    @property
    def passed(self) -> bool:
        slack = math.log1p(CHAIN_SLACK)
        lv = self.log_values
        return all(lv[i] < lv[i + 1] + slack for i in range(3))


def lemma3_chain_check(m: int, delta: float, K: float = 1.0) -> ChainCheck:
    """Evaluate the four members of the net-size chain and test their ordering."""
    if m > MAX_CHAIN_DIM:
        raise BoundPreconditionError(f"m must be <= {MAX_CHAIN_DIM}")
    return ChainCheck(
        m,
        delta,
        K,
        (
            log_cardinality_bound_integral(m, delta, K),
            log_cardinality_bound_gamma(m, delta, K),
            log_cardinality_bound_linear(m, delta, K),
            log_cardinality_bound_closed(m, delta, K),
        ),
    )
