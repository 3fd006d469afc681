"""Model spaces: the round sphere, real projective space and complex projective space.

Points are stored as unit representatives in R^{n+1} (sphere, real projective)
or C^{n+1} (complex projective).  Isometries are orthogonal or unitary
matrices acting on representatives.  Arrays of points are shaped
``(..., n + 1)`` and every function here broadcasts over leading axes.

Metric normalizations:

* ``sphere:n``  distance ``angle(x, y)``, curvature 1, diameter pi
* ``rp:n``      distance ``angle(|<x, y>|)``, curvature 1, diameter pi/2
* ``cp:n``      distance ``2 angle(|<x, y>|)`` (Fubini-Study scaled so that
  sectional curvature lies in [1/4, 1]), diameter pi

A ``radius`` scale multiplies the distance of any family; it is used for the
totally real ``RP^n`` sitting inside ``CP^n``, which carries curvature 1/4.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numpy as np

from ._rng import check_generator


class Family(str, enum.Enum):
    SPHERE = "sphere"
    REAL_PROJECTIVE = "rp"
    COMPLEX_PROJECTIVE = "cp"


class GeometryError(ValueError):
    """Invalid model, point, or embedding request."""


_BASE_DIAMETER = {
    Family.SPHERE: math.pi,
    Family.REAL_PROJECTIVE: math.pi / 2,
    Family.COMPLEX_PROJECTIVE: math.pi / 2,
}
_DEFAULT_RADIUS = {
    Family.SPHERE: 1.0,
    Family.REAL_PROJECTIVE: 1.0,
    Family.COMPLEX_PROJECTIVE: 2.0,
}


@dataclass(frozen=True)
class ManifoldModel:
    """Descriptor of one model space.

    ``radius`` is the metric scale: distances are ``radius`` times the
    angle between representatives (or between the lines they span).
    """

    family: Family
    n: int
    radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 1:
            raise GeometryError(f"model index must be >= 1, got {self.n}")
        if self.radius is None:
            object.__setattr__(self, "radius", _DEFAULT_RADIUS[self.family])
        if self.radius <= 0:
            raise GeometryError("radius must be positive")

    @property
    def is_complex(self) -> bool:
        return self.family is Family.COMPLEX_PROJECTIVE

    @property
    def is_projective(self) -> bool:
        return self.family is not Family.SPHERE

    @property
    def ambient_dim(self) -> int:
        """Length of a representative vector (over the scalar field)."""
        return self.n + 1

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    @property
    def real_dim(self) -> int:
        return 2 * self.n if self.is_complex else self.n

    @property
    def curvature_floor_K(self) -> float:
        # CP^n with the default radius 2 has sectional curvature in [1/4, 1]
        return 1.0 / self.radius**2

    @property
    def curvature_ceiling(self) -> float:
        return 4.0 * self.curvature_floor_K if self.is_complex else self.curvature_floor_K

    @property
    def ricci_floor(self) -> float:
        return (self.real_dim - 1) * self.curvature_floor_K

    @property
    def diameter(self) -> float:
        return self.radius * _BASE_DIAMETER[self.family]

    @property
    def max_tg_dim(self) -> int:
        """Dimension r of the largest proper totally geodesic submanifold."""
        if self.is_complex:
            # RP^n and CP^{n-1}
            return max(2 * self.n - 2, self.n)
        return self.n - 1

    r = max_tg_dim

    @property
    def designator(self) -> str:
        base = f"{self.family.value}:{self.n}"
        if self.radius != _DEFAULT_RADIUS[self.family]:
            base += f"@{self.radius:g}"
        return base

    def __str__(self) -> str:
        return self.designator


def Sphere(n: int) -> ManifoldModel:
    return ManifoldModel(Family.SPHERE, n)


def RealProjective(n: int, radius: float = 1.0) -> ManifoldModel:
    return ManifoldModel(Family.REAL_PROJECTIVE, n, radius)


def ComplexProjective(n: int) -> ManifoldModel:
    return ManifoldModel(Family.COMPLEX_PROJECTIVE, n)


_DESIGNATOR = re.compile(r"^(sphere|rp|cp):(\d+)(?:@([0-9.eE+-]+))?$")


def parse_model(designator: str | ManifoldModel) -> ManifoldModel:
    """Parse ``sphere:<n>``, ``rp:<n>`` or ``cp:<n>`` (optionally ``@<radius>``)."""
    if isinstance(designator, ManifoldModel):
        return designator
    match = _DESIGNATOR.match(designator.strip().lower())
    if match is None:
        raise GeometryError(
            f"bad model designator {designator!r}; expected sphere:<n>, rp:<n> or cp:<n>"
        )
    family, n, radius = match.groups()
    return ManifoldModel(Family(family), int(n), float(radius) if radius else None)


def check_points(model: ManifoldModel, x, atol: float = 1e-10) -> np.ndarray:
    """Validate representatives: trailing size n+1, unit norm, right scalar field."""
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[-1] != model.ambient_dim:
        raise GeometryError(
            f"points for {model} need trailing dimension {model.ambient_dim}, got shape {x.shape}"
        )
    if np.iscomplexobj(x) and not model.is_complex:
        if np.max(np.abs(x.imag), initial=0.0) > atol:
            raise GeometryError(f"{model} points must be real")
        x = x.real
    x = x.astype(model.dtype, copy=False)
    norms = np.linalg.norm(x, axis=-1)
    if np.max(np.abs(norms - 1.0), initial=0.0) > atol:
        raise GeometryError("points must be unit vectors")
    return x


def _half_angle(x: np.ndarray, y: np.ndarray, projective: bool) -> np.ndarray:
    inner = np.sum(np.conj(x) * y, axis=-1)
    if projective:
        mag = np.abs(inner)
        # closest representative of the line through x to y
        phase = np.where(mag > 0, inner / np.where(mag > 0, mag, 1.0), 1.0)
        if not np.iscomplexobj(x):
            phase = np.real(phase)
        x = phase[..., None] * x
    return np.arctan2(np.linalg.norm(y - x, axis=-1), np.linalg.norm(y + x, axis=-1))


_REFINE_ANGLE = 1e-2


def geodesic_distance(model: ManifoldModel, x, y) -> np.ndarray | float:
    """Geodesic distance between representatives ``x`` and ``y`` (broadcasting).

    The angle between unit vectors is computed as ``2 atan2(|y - x|, |y + x|)``,
    equal to the clamped ``arccos <x, y>`` but accurate near 0 and pi, and
    exactly symmetric in its arguments.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[-1] != model.ambient_dim or y.shape[-1] != model.ambient_dim:
        raise GeometryError(
            f"dimension mismatch: {model} expects vectors of length {model.ambient_dim}"
        )
    theta = _half_angle(x, y, model.is_projective)
    if model.is_complex:
        # the phase-aligned difference is symmetric only up to rounding
        theta = 0.5 * (theta + _half_angle(y, x, True))
    d = 2.0 * model.radius * theta
    return float(d) if np.ndim(d) == 0 else d


def pairwise_distances(model: ManifoldModel, X, Y=None) -> np.ndarray:
    """Distance matrix between the rows of ``X`` and ``Y`` via a Gram matrix.

    Angles within ``_REFINE_ANGLE`` of 0 or pi, where arccos is badly
    conditioned, are recomputed with :func:`geodesic_distance`.
    """
    X = np.asarray(X)
    Y = X if Y is None else np.asarray(Y)
    G = np.conj(X) @ Y.T
    if model.is_projective:
        c = np.abs(G)
    else:
        c = np.real(G)
    theta = np.arccos(np.clip(c, -1.0, 1.0))
    bad = np.nonzero((theta < _REFINE_ANGLE) | (theta > np.pi - _REFINE_ANGLE))
    if bad[0].size:
        theta[bad] = geodesic_distance(model, X[bad[0]], Y[bad[1]]) / model.radius
    return model.radius * theta


def sample_uniform(model: ManifoldModel, rng=None, size: int | None = None) -> np.ndarray:
    """Draw from the normalized Riemannian measure (normalized Gaussian vectors)."""
    rng = check_generator(rng)
    shape = (model.ambient_dim,) if size is None else (size, model.ambient_dim)
    g = rng.standard_normal(shape)
    if model.is_complex:
        g = g + 1j * rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_haar_isometry(model: ManifoldModel, rng=None, size: int | None = None) -> np.ndarray:
    """Haar-random orthogonal (real families) or unitary (complex) matrix.

    QR of a Gaussian matrix, with each column of Q multiplied by the phase
    (sign, for real matrices) of the matching diagonal entry of R.  Without
    that correction the law of Q depends on the QR convention and is not Haar.
    ``size`` stacks independent draws along a leading axis.
    """
    rng = check_generator(rng)
    d = model.ambient_dim
    shape = (d, d) if size is None else (size, d, d)
    z = rng.standard_normal(shape)
    if model.is_complex:
        z = z + 1j * rng.standard_normal(shape)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[..., None, :]


def check_isometry(model: ManifoldModel, Q, atol: float = 1e-10) -> np.ndarray:
    Q = np.asarray(Q)
    d = model.ambient_dim
    if Q.shape != (d, d):
        raise GeometryError(f"isometry for {model} must be {d}x{d}, got {Q.shape}")
    err = np.max(np.abs(np.conj(Q.T) @ Q - np.eye(d)))
    if err > atol:
        raise GeometryError(f"matrix is not orthogonal/unitary (max deviation {err:.3g})")
    if np.iscomplexobj(Q) and not model.is_complex:
        raise GeometryError(f"{model} isometries must be real")
    return Q


def apply_isometry(Q, x) -> np.ndarray:
    """Act with the matrix ``Q`` on representatives ``x`` (rows)."""
    Q = np.asarray(Q)
    x = np.asarray(x)
    if Q.shape[-1] != x.shape[-1]:
        raise GeometryError(f"isometry of size {Q.shape} cannot act on vectors of length {x.shape[-1]}")
    return x @ Q.T


class SubKind(str, enum.Enum):
    COORDINATE = "coord"
    REAL_POINTS = "real"


@dataclass(frozen=True)
class GeodesicSubmanifoldSpec:
    """A totally geodesic submanifold of ``ambient``.

    ``coord`` with index k: the points whose representatives vanish past
    coordinate k (S^k, RP^k, CP^k).  ``real``: RP^n inside CP^n as the
    points with a real representative.
    """

    kind: SubKind
    ambient: ManifoldModel
    k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SubKind(self.kind))
        if self.kind is SubKind.COORDINATE:
            if self.k is None or not 1 <= self.k < self.ambient.n:
                raise GeometryError(
                    f"coordinate submanifold index must satisfy 1 <= k < {self.ambient.n}, got {self.k}"
                )
        else:
            if not self.ambient.is_complex:
                raise GeometryError("real-points submanifold needs a complex projective ambient")
            object.__setattr__(self, "k", self.ambient.n)

    @property
    def low_model(self) -> ManifoldModel:
        if self.kind is SubKind.REAL_POINTS:
            return ManifoldModel(Family.REAL_PROJECTIVE, self.ambient.n, self.ambient.radius)
        return ManifoldModel(self.ambient.family, self.k, self.ambient.radius)

    @property
    def dim(self) -> int:
        return self.low_model.real_dim

    @property
    def designator(self) -> str:
        return "real" if self.kind is SubKind.REAL_POINTS else f"coord:{self.k}"

    @classmethod
    def parse(cls, text: str, ambient: ManifoldModel) -> GeodesicSubmanifoldSpec:
        text = text.strip().lower()
        if text == "real":
            return cls(SubKind.REAL_POINTS, ambient)
        match = re.match(r"^(?:coord|sub):(\d+)$", text)
        if match is None:
            raise GeometryError(f"bad submanifold spec {text!r}; expected coord:<k> or real")
        return cls(SubKind.COORDINATE, ambient, int(match.group(1)))


def embed(spec: GeodesicSubmanifoldSpec, p_low) -> np.ndarray:
    """Map representatives of ``spec.low_model`` into the ambient model."""
    low = spec.low_model
    p_low = np.asarray(p_low)
    if p_low.shape[-1] != low.ambient_dim:
        raise GeometryError(
            f"points of {low} need length {low.ambient_dim}, got {p_low.shape[-1]}"
        )
    if spec.kind is SubKind.REAL_POINTS:
        if np.iscomplexobj(p_low):
            if np.max(np.abs(p_low.imag), initial=0.0) > 1e-12:
                raise GeometryError("real-points embedding takes real representatives")
            p_low = p_low.real
        return p_low.astype(np.complex128)
    out = np.zeros(p_low.shape[:-1] + (spec.ambient.ambient_dim,), dtype=spec.ambient.dtype)
    out[..., : low.ambient_dim] = p_low
    return out
