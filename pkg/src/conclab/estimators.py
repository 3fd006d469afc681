"""scikit-learn style wrappers around nets and the submanifold finder."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._rng import check_generator
from .concentration import LipschitzFunction, get_function
from .finder import DEFAULT_DENSE, DEFAULT_MAX_DRAWS, DEFAULT_MEDIAN_SAMPLES, find_submanifold
from .geometry import check_points, pairwise_distances, parse_model
from .nets import DEFAULT_STOP_AFTER, Net, _NeighborIndex, build_net, distance_to_net


def greedy_packing(model, X, delta: float) -> np.ndarray:
    """Indices of a maximal delta-separated subset of the rows of X, taken in order."""
    index = _NeighborIndex(model)
    keep = []
    for i, x in enumerate(X):
        if index.nearest_distance(x[None, :])[0] >= delta:
            index.add(x)
            keep.append(i)
    return np.asarray(keep, dtype=int)


class DeltaNet(TransformerMixin, BaseEstimator):
    """Delta-separated net on a model space.

    ``fit()`` without data builds a random maximal packing of the whole
    space; ``fit(X)`` keeps a maximal delta-separated subset of the rows of
    X.  ``transform`` returns geodesic distances to the net points and
    ``predict`` the index of the nearest one.
    """

    def __init__(self, model="sphere:2", delta=0.5, stop_after=DEFAULT_STOP_AFTER, random_state=None):
        self.model = model
        self.delta = delta
        self.stop_after = stop_after
        self.random_state = random_state

    def fit(self, X=None, y=None):
        model = parse_model(self.model)
        if X is None:
            self.net_ = build_net(model, self.delta, check_generator(self.random_state), self.stop_after)
        else:
            X = check_points(model, X)
            if X.ndim != 2:
                raise ValueError("X must be a 2-d array of representatives")
            keep = greedy_packing(model, X, self.delta)
            self.net_ = Net(X[keep], float(self.delta), model)
        self.model_ = model
        self.points_ = self.net_.points
        self.n_points_ = self.net_.N
        return self

    def transform(self, X):
        check_is_fitted(self, "points_")
        X = check_points(self.model_, np.atleast_2d(X))
        return pairwise_distances(self.model_, X, self.points_)

    def predict(self, X):
        return np.argmin(self.transform(X), axis=1)

    def score(self, X, y=None):
        """Fraction of rows of X within delta of the net."""
        check_is_fitted(self, "points_")
        X = check_points(self.model_, np.atleast_2d(X))
        return float(np.mean(distance_to_net(self.net_, X) < self.delta))


class ConcentrationFinder(TransformerMixin, BaseEstimator):
    """Find a totally geodesic submanifold on which ``function`` is eps-close to its median.

    After ``fit``, ``transform`` maps points of the low-dimensional model
    (``submanifold_.low_model``) onto the certified submanifold, and
    ``certificate_`` holds the full evidence.
    """

    def __init__(
        self,
        model="sphere:200",
        function="coord",
        epsilon=0.8,
        max_draws=DEFAULT_MAX_DRAWS,
        n_median=DEFAULT_MEDIAN_SAMPLES,
        n_dense=DEFAULT_DENSE,
        stop_after=DEFAULT_STOP_AFTER,
        random_state=None,
    ):
        self.model = model
        self.function = function
        self.epsilon = epsilon
        self.max_draws = max_draws
        self.n_median = n_median
        self.n_dense = n_dense
        self.stop_after = stop_after
        self.random_state = random_state

    def _resolve_function(self, model) -> LipschitzFunction:
        if isinstance(self.function, LipschitzFunction):
            return self.function
        return get_function(self.function, model)

    def fit(self, X=None, y=None):
        model = parse_model(self.model)
        T = self._resolve_function(model)
        self.certificate_ = find_submanifold(
            T, model, self.epsilon, self.random_state, self.max_draws,
            n_median=self.n_median, n_dense=self.n_dense, stop_after=self.stop_after,
        )
        self.model_ = model
        self.function_ = T
        self.isometry_ = self.certificate_.isometry
        self.submanifold_ = self.certificate_.spec
        self.dim_ = self.certificate_.s
        self.median_ = self.certificate_.median
        return self

    def transform(self, X):
        check_is_fitted(self, "certificate_")
        X = check_points(self.submanifold_.low_model, np.atleast_2d(X))
        return self.certificate_.chart(X)

    def score(self, X, y=None):
        """Minus the largest |T - median| over the images of the rows of X."""
        Z = self.transform(X)
        return -float(np.max(np.abs(self.function_(Z) - self.median_)))
