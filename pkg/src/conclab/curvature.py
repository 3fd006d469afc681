"""Sectional and m-Ricci curvature of the model spaces.

Curvatures come from closed forms.  On ``sphere:n`` and ``rp:n`` every plane
has curvature ``1 / radius**2``.  On ``cp:n`` (radius 2) a plane spanned by
real-orthonormal horizontal vectors ``u, v`` has curvature
``(1 + 3 Re<iu, v>**2) / 4``: 1/4 for totally real planes, 1 for complex
lines.

Tangent vectors at a base point ``p`` are represented in the ambient vector
space: real vectors orthogonal to ``p`` for the real families, complex
vectors with ``<p, v> = 0`` for ``cp``.  Orthonormality always refers to the
real inner product ``Re<u, v>``.  Batches of frames are arrays shaped
``(..., m, n + 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _io
from ._rng import check_generator
from .geometry import ManifoldModel, check_points, sample_uniform

#: Frames whose projected Gaussian draw is this close to rank-deficient are redrawn.
REJECTION_THRESHOLD = 1e-6


class FrameError(ValueError):
    """Frame is not orthonormal or not tangent at its base point."""


def real_inner(u, v) -> np.ndarray:
    return np.real(np.sum(np.conj(u) * v, axis=-1))


@dataclass(frozen=True)
class TangentFrame:
    base: np.ndarray
    vectors: np.ndarray

    @property
    def m(self) -> int:
        return self.vectors.shape[-2]

    def check(self, model: ManifoldModel, atol: float = 1e-10) -> TangentFrame:
        check_points(model, self.base)
        vecs = self.vectors
        gram = real_inner(vecs[..., :, None, :], vecs[..., None, :, :])
        if np.max(np.abs(gram - np.eye(self.m)), initial=0.0) > atol:
            raise FrameError("frame vectors are not real-orthonormal")
        tangency = np.abs(np.sum(np.conj(self.base)[..., None, :] * vecs, axis=-1))
        if np.max(tangency, initial=0.0) > atol:
            raise FrameError("frame vectors are not tangent at the base point")
        return self

    def __getitem__(self, idx) -> TangentFrame:
        return TangentFrame(self.base[idx], self.vectors[idx])


def _project_tangent(model: ManifoldModel, base: np.ndarray, v: np.ndarray) -> np.ndarray:
    # remove the component along the base line (complex projection for cp)
    coef = np.sum(np.conj(base)[..., None, :] * v, axis=-1)
    if not model.is_complex:
        coef = np.real(coef)
    return v - coef[..., None] * base[..., None, :]


def _as_real(v: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(v):
        return np.concatenate([v.real, v.imag], axis=-1)
    return v


def _from_real(v: np.ndarray, model: ManifoldModel) -> np.ndarray:
    if model.is_complex:
        d = model.ambient_dim
        return v[..., :d] + 1j * v[..., d:]
    return v


def random_frames(
    model: ManifoldModel, m: int, trials: int, rng=None, base=None
) -> TangentFrame:
    """``trials`` random real-orthonormal m-frames at uniform (or given) base points."""
    if not 1 <= m <= model.real_dim:
        raise FrameError(f"frame size must be in [1, {model.real_dim}] for {model}, got {m}")
    rng = check_generator(rng)
    if base is None:
        base = sample_uniform(model, rng, size=trials)
    else:
        base = np.broadcast_to(np.asarray(base, dtype=model.dtype), (trials, model.ambient_dim))
    vectors = np.empty((trials, m, model.ambient_dim), dtype=model.dtype)
    todo = np.arange(trials)
    while todo.size:
        g = rng.standard_normal((todo.size, m, model.ambient_dim))
        if model.is_complex:
            g = g + 1j * rng.standard_normal(g.shape)
        g = _project_tangent(model, base[todo], g)
        # Gram-Schmidt in the real picture; columns of A are the frame vectors
        A = np.swapaxes(_as_real(g), -1, -2)
        sv = np.linalg.svd(A / np.linalg.norm(A, axis=-2, keepdims=True), compute_uv=False)
        ok = sv[:, -1] >= REJECTION_THRESHOLD
        q, r = np.linalg.qr(A[ok])
        signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
        q = q * signs[..., None, :]
        vectors[todo[ok]] = _from_real(np.swapaxes(q, -1, -2), model)
        todo = todo[~ok]
    return TangentFrame(base, vectors)


def random_frame(model: ManifoldModel, m: int, rng=None, base=None) -> TangentFrame:
    return random_frames(model, m, 1, rng, base)[0]


def _plane_curvature(model: ManifoldModel, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    K = model.curvature_floor_K
    if not model.is_complex:
        return np.full(np.broadcast_shapes(u.shape, v.shape)[:-1], K)
    # u, v need not be unit: normalise the plane invariants explicitly
    uu = real_inner(u, u)
    vv = real_inner(v, v)
    uv = real_inner(u, v)
    area2 = uu * vv - uv**2
    j = real_inner(1j * u, v)
    return K * (1.0 + 3.0 * j**2 / area2)


def sectional_curvature(model: ManifoldModel, frame: TangentFrame, check: bool = True):
    """Sectional curvature of the plane spanned by a 2-frame (batched)."""
    if frame.m != 2:
        raise FrameError(f"sectional curvature needs a 2-frame, got {frame.m} vectors")
    if check:
        frame.check(model)
    val = _plane_curvature(model, frame.vectors[..., 0, :], frame.vectors[..., 1, :])
    return float(val) if np.ndim(val) == 0 else val


def _first_row_curvatures(model: ManifoldModel, vectors: np.ndarray) -> np.ndarray:
    """Sec(e_1, e_j) for j = 2..m, shape (..., m - 1)."""
    e1 = vectors[..., :1, :]
    return _plane_curvature(model, e1, vectors[..., 1:, :])


def m_ricci(model: ManifoldModel, frame: TangentFrame, check: bool = True):
    """Sum of Sec(e_1, e_j) over j = 2..m; e_1 is the distinguished vector."""
    if frame.m < 2:
        raise FrameError("m-Ricci curvature needs m >= 2")
    if check:
        frame.check(model)
    val = _first_row_curvatures(model, frame.vectors).sum(axis=-1)
    return float(val) if np.ndim(val) == 0 else val


@dataclass
class RicciScan:
    m: int
    trials: int
    min_observed: float
    max_observed: float
    floor: float
    argmin_frame: TangentFrame

    @property
    def passed(self) -> bool:
        return self.min_observed >= self.floor - 1e-6

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "trials": self.trials,
            "min_observed": self.min_observed,
            "max_observed": self.max_observed,
            "floor": self.floor,
            "passed": self.passed,
            "argmin_frame": {
                "base": _io.encode_array(self.argmin_frame.base),
                "vectors": _io.encode_array(self.argmin_frame.vectors),
            },
        }


def ricci_floor_scan(
    model: ManifoldModel, m: int, trials: int, rng=None, chunk: int = 20000
) -> RicciScan:
    """Minimum of m-Ricci curvature over random frames, against (m - 1) K."""
    if not 2 <= m <= model.real_dim:
        raise FrameError(f"m must be in [2, {model.real_dim}] for {model}, got {m}")
    rng = check_generator(rng)
    best = (np.inf, None)
    top = -np.inf
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        frames = random_frames(model, m, size, rng)
        vals = m_ricci(model, frames, check=False)
        i = int(np.argmin(vals))
        if vals[i] < best[0]:
            best = (float(vals[i]), frames[i])
        top = max(top, float(np.max(vals)))
        done += size
    return RicciScan(m, trials, best[0], top, (m - 1) * model.curvature_floor_K, best[1])


def inductive_identity_check(model: ManifoldModel, frame: TangentFrame) -> np.ndarray | float:
    """|LHS - RHS| of the averaging identity behind the m -> m+1 Ricci step.

    For an (m+1)-frame with curvatures S_j = Sec(e_1, e_j), j = 2..m+1:
    sum_j S_j = 1/(m-1) * sum_j sum_{i != j} S_i, the inner sum over
    i in {2..m+1} minus {j}.
    """
    m = frame.m - 1
    if m < 2:
        raise FrameError("identity needs an (m+1)-frame with m >= 2")
    S = _first_row_curvatures(model, frame.vectors)
    lhs = S.sum(axis=-1)
    leave_one_out = S.sum(axis=-1, keepdims=True) - S
    # sum the leave-one-out sums term by term rather than by the closed form
    rhs = leave_one_out.sum(axis=-1) / (m - 1)
    res = np.abs(lhs - rhs)
    return float(res) if np.ndim(res) == 0 else res


def implication_check(model: ManifoldModel, frame: TangentFrame) -> np.ndarray:
    """Per frame: (every m-term sub-sum >= (m-1)K) implies (full sum >= mK).

    Returns ``True`` where the implication holds (including vacuously).
    """
    m = frame.m - 1
    K = model.curvature_floor_K
    S = _first_row_curvatures(model, frame.vectors)
    subsums = S.sum(axis=-1, keepdims=True) - S
    premise = np.all(subsums >= (m - 1) * K - 1e-12, axis=-1)
    conclusion = S.sum(axis=-1) >= m * K - 1e-12
    return ~premise | conclusion
