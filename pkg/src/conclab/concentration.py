"""Lipschitz test functions, medians, and empirical concentration tails.

The tail bound checked here is ``mu(|T - m_T| > eps) < exp(-R eps^2 / 2)``
with ``R`` the model's Ricci floor, for 1-Lipschitz ``T`` and its median
``m_T``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm

from . import _io
from ._rng import check_generator
from .geometry import Family, ManifoldModel, geodesic_distance, sample_uniform

MEDIAN_CI_LEVEL = 0.99
MIN_PAIR_DISTANCE = 1e-6


class IncompatibleFunctionError(ValueError):
    pass


@dataclass(frozen=True)
class LipschitzFunction:
    """Real function on a model, evaluated row-wise on arrays of representatives."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    claimed_constant: float
    compatible_families: frozenset
    label: str

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x))

    def check_model(self, model: ManifoldModel) -> None:
        if model.family not in self.compatible_families:
            raise IncompatibleFunctionError(f"function {self.label!r} is not defined on {model}")

    def compose(self, Q: np.ndarray, label: str | None = None) -> LipschitzFunction:
        """``x -> T(Q x)``; same Lipschitz constant since Q is an isometry."""
        Q = np.asarray(Q)
        return LipschitzFunction(
            lambda x: self.evaluate(np.asarray(x) @ Q.T),
            self.claimed_constant,
            self.compatible_families,
            label or f"{self.label}∘Q",
        )


ALL_FAMILIES = frozenset(Family)


def _basis(model: ManifoldModel, i: int = 0) -> np.ndarray:
    e = np.zeros(model.ambient_dim, dtype=model.dtype)
    e[i] = 1
    return e


def coordinate(v) -> LipschitzFunction:
    """x -> <x, v> on the sphere (chord <= arc makes it 1-Lipschitz)."""
    v = np.asarray(v, dtype=float)
    return LipschitzFunction(lambda x: x @ v, float(np.linalg.norm(v)), frozenset({Family.SPHERE}), "coord")


def abs_coordinate(v) -> LipschitzFunction:
    """x -> |<v, x>|; invariant under sign/phase of the representative."""
    v = np.asarray(v)
    vc = np.conj(v)
    return LipschitzFunction(
        lambda x: np.abs(x @ vc), float(np.linalg.norm(v)), ALL_FAMILIES, "abs-coord"
    )


def distance_to(model: ManifoldModel, p) -> LipschitzFunction:
    """x -> d(x, p)."""
    p = np.asarray(p, dtype=model.dtype)
    return LipschitzFunction(
        lambda x: geodesic_distance(model, x, p), 1.0, frozenset({model.family}), "dist"
    )


def min_distance(model: ManifoldModel, points) -> LipschitzFunction:
    """x -> min_j d(x, p_j)."""
    points = np.asarray(points, dtype=model.dtype)

    def evaluate(x):
        x = np.asarray(x)
        d = np.stack([geodesic_distance(model, x, p) for p in points], axis=-1)
        return np.min(d, axis=-1)

    return LipschitzFunction(evaluate, 1.0, frozenset({model.family}), "min-dist")


def convex_combination(functions, weights, label: str = "mix") -> LipschitzFunction:
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0):
        raise ValueError("weights must be a probability vector")
    functions = list(functions)

    def evaluate(x):
        return sum(w * f(x) for w, f in zip(weights, functions))

    fams = frozenset.intersection(*(f.compatible_families for f in functions))
    const = float(sum(w * f.claimed_constant for w, f in zip(weights, functions)))
    return LipschitzFunction(evaluate, const, fams, label)


def constant(value: float) -> LipschitzFunction:
    return LipschitzFunction(
        lambda x: np.full(np.shape(x)[:-1], float(value)), 0.0, ALL_FAMILIES, "const"
    )


def scaled(f: LipschitzFunction, factor: float) -> LipschitzFunction:
    return LipschitzFunction(
        lambda x: factor * f(x), abs(factor) * f.claimed_constant, f.compatible_families,
        f"{factor:g}*{f.label}",
    )


def _random_unit(model: ManifoldModel, rng) -> np.ndarray:
    return sample_uniform(model, rng)


def catalog(model: ManifoldModel, rng=None, k: int = 3) -> dict[str, LipschitzFunction]:
    """Built-in 1-Lipschitz functions available on ``model``, keyed by label.

    ``coord`` (sphere only) and ``abs-coord`` use e_1, ``dist`` measures
    distance to e_1; ``min-dist`` uses ``k`` random centres and ``mix`` is a
    random convex combination of abs-coordinate and distance functions.
    """
    rng = check_generator(rng)
    e1 = _basis(model)
    out: dict[str, LipschitzFunction] = {}
    if model.family is Family.SPHERE:
        out["coord"] = coordinate(e1)
    out["abs-coord"] = abs_coordinate(e1)
    out["dist"] = distance_to(model, e1)
    centres = sample_uniform(model, rng, size=k)
    out["min-dist"] = min_distance(model, centres)
    parts = [abs_coordinate(_random_unit(model, rng)), distance_to(model, _random_unit(model, rng)),
             abs_coordinate(_random_unit(model, rng))]
    out["mix"] = convex_combination(parts, rng.dirichlet(np.ones(len(parts))))
    return out


def get_function(label: str, model: ManifoldModel, rng=None) -> LipschitzFunction:
    funcs = catalog(model, rng)
    if label == "const":
        return constant(0.0)
    if label not in funcs:
        raise KeyError(f"unknown function {label!r} for {model}; choose from {sorted(funcs) + ['const']}")
    return funcs[label]


# ---------------------------------------------------------------------------
# medians and tails


@dataclass(frozen=True)
class MedianEstimate:
    median: float
    ci: tuple[float, float]
    n_samples: int

    @property
    def half_width(self) -> float:
        return max(self.median - self.ci[0], self.ci[1] - self.median)


def median_with_ci(values, level: float = MEDIAN_CI_LEVEL) -> MedianEstimate:
    """Sample median with a distribution-free order-statistic confidence interval."""
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        raise ValueError("no samples")
    z = norm.ppf(0.5 + level / 2)
    lo = int(math.floor(n / 2 - z * math.sqrt(n) / 2))
    hi = int(math.ceil(n / 2 + z * math.sqrt(n) / 2))
    lo = min(max(lo, 0), n - 1)
    hi = min(max(hi, 0), n - 1)
    return MedianEstimate(float(np.median(v)), (float(v[lo]), float(v[hi])), n)


def estimate_median(T: LipschitzFunction, model: ManifoldModel, n_samples: int, rng=None) -> MedianEstimate:
    T.check_model(model)
    rng = check_generator(rng)
    X = sample_uniform(model, rng, size=n_samples)
    return median_with_ci(T(X))


def levy_gromov_bound(model: ManifoldModel, epsilon: float) -> float:
    return math.exp(-model.ricci_floor * epsilon**2 / 2)


@dataclass
class ConcentrationReport:
    median_estimate: float
    median_ci: tuple[float, float]
    epsilon: float
    empirical_tail: float
    theoretical_bound: float
    n_samples: int
    seed: int | None = None
    model: str = ""
    function: str = ""
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def standard_error(self) -> float:
        p = self.empirical_tail
        # floor at one count so an empty tail still carries some slack
        return math.sqrt(max(p * (1 - p), 1.0 / self.n_samples) / self.n_samples)

    @property
    def passed(self) -> bool:
        return self.empirical_tail <= self.theoretical_bound + 4 * self.standard_error

    def to_dict(self) -> dict:
        return {
            "v": _io.SCHEMA_VERSION,
            "model": self.model,
            "function": self.function,
            "median_estimate": self.median_estimate,
            "median_ci": list(self.median_ci),
            "epsilon": self.epsilon,
            "empirical_tail": self.empirical_tail,
            "theoretical_bound": self.theoretical_bound,
            "standard_error": self.standard_error,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "passed": self.passed,
        }

    def to_json(self, indent: int | None = None) -> str:
        return _io.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> ConcentrationReport:
        return cls(
            median_estimate=float(data["median_estimate"]),
            median_ci=tuple(float(c) for c in data["median_ci"]),
            epsilon=float(data["epsilon"]),
            empirical_tail=float(data["empirical_tail"]),
            theoretical_bound=float(data["theoretical_bound"]),
            n_samples=int(data["n_samples"]),
            seed=data.get("seed"),
            model=data.get("model", ""),
            function=data.get("function", ""),
        )

    def write_csv(self, stream) -> None:
        """One evaluation of T per row."""
        if self.values is None:
            raise ValueError("report carries no sample values")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["index", "value"])
        for i, v in enumerate(self.values):
            writer.writerow([i, _io.format_float(v)])


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "v", "model", "function", "median_estimate", "median_ci", "epsilon",
        "empirical_tail", "theoretical_bound", "n_samples", "seed",
    ],
    "properties": {
        "v": {"const": "v1"},
        "model": {"type": "string"},
        "function": {"type": "string"},
        "median_estimate": {"type": "number"},
        "median_ci": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "epsilon": {"type": "number", "minimum": 0},
        "empirical_tail": {"type": "number", "minimum": 0, "maximum": 1},
        "theoretical_bound": {"type": "number", "minimum": 0, "maximum": 1},
        "standard_error": {"type": "number", "minimum": 0},
        "n_samples": {"type": "integer", "minimum": 1},
        "seed": {"type": ["integer", "null"]},
        "passed": {"type": "boolean"},
    },
}


def empirical_tail(
    T: LipschitzFunction,
    model: ManifoldModel,
    m_T: float,
    epsilon: float,
    n_samples: int,
    rng=None,
    median_ci: tuple[float, float] | None = None,
    keep_values: bool = False,
) -> ConcentrationReport:
    """Monte-Carlo estimate of mu(|T - m_T| > epsilon) next to the Ricci-floor bound."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    T.check_model(model)
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    rng = check_generator(rng)
    vals = np.asarray(T(sample_uniform(model, rng, size=n_samples)), dtype=float)
    tail = float(np.mean(np.abs(vals - m_T) > epsilon))
    return ConcentrationReport(
        median_estimate=float(m_T),
        median_ci=tuple(median_ci) if median_ci is not None else (float(m_T), float(m_T)),
        epsilon=float(epsilon),
        empirical_tail=tail,
        theoretical_bound=levy_gromov_bound(model, epsilon),
        n_samples=n_samples,
        seed=seed,
        model=model.designator,
        function=T.label,
        values=vals if keep_values else None,
    )


def empirical_lipschitz(T: LipschitzFunction, model: ManifoldModel, n_pairs: int, rng=None) -> float:
    """max |T(x) - T(y)| / d(x, y) over random pairs, skipping d < 1e-6.

    Half the pairs are independent uniform points, half are short
    perturbations, where the ratio of a smooth function is largest.
    """
    rng = check_generator(rng)
    n_far = n_pairs // 2
    X = sample_uniform(model, rng, size=n_pairs)
    Y = np.empty_like(X)
    Y[:n_far] = sample_uniform(model, rng, size=n_far)
    step = rng.standard_normal(X[n_far:].shape)
    if model.is_complex:
        step = step + 1j * rng.standard_normal(step.shape)
    scale = 10.0 ** rng.uniform(-4, -1, size=(n_pairs - n_far, 1))
    near = X[n_far:] + scale * step / np.linalg.norm(step, axis=-1, keepdims=True)
    Y[n_far:] = near / np.linalg.norm(near, axis=-1, keepdims=True)
    d = geodesic_distance(model, X, Y)
    keep = d >= MIN_PAIR_DISTANCE
    if not np.any(keep):
        return 0.0
    diff = np.abs(T(X[keep]) - T(Y[keep]))
    return float(np.max(diff / d[keep]))


def report_from_json(text: str) -> ConcentrationReport:
    return ConcentrationReport.from_dict(json.loads(text))
