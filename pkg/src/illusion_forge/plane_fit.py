"""RANSAC plane estimation in (u, v, d) disparity space.

Candidate planes come from cross products of sampled point triples; the best
candidate (max inliers) seeds an eigen-decomposition refinement over its
inlier set. Sampling is driven by a single seeded generator so results are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io_formats import ValidationError

_SIGN_EPS = 1e-9
_NORMAL_EPS = 1e-9
_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class PlaneParams:
    """Plane alpha*u + beta*v + delta*d + gamma = 0 with alpha^2+beta^2+delta^2 = 1.

    The sign is canonicalized so the first non-negligible component of
    (alpha, beta, delta) is positive.
    """

    alpha: float
    beta: float
    delta: float
    gamma: float

    def __post_init__(self):
        n = float(np.sqrt(self.alpha**2 + self.beta**2 + self.delta**2))
        if abs(n - 1.0) > _UNIT_TOL:
            raise ValidationError(
                f"plane normal must be unit length (got {n}); use PlaneParams.from_vector"
            )
        for c in (self.alpha, self.beta, self.delta):
            if abs(c) > _SIGN_EPS:
                if c < 0:
                    object.__setattr__(self, "alpha", -self.alpha)
                    object.__setattr__(self, "beta", -self.beta)
                    object.__setattr__(self, "delta", -self.delta)
                    object.__setattr__(self, "gamma", -self.gamma)
                break

    @classmethod
    def from_vector(cls, pi) -> "PlaneParams":
        """Normalize a raw (alpha, beta, delta, gamma) vector."""
        pi = np.asarray(pi, dtype=np.float64).reshape(4)
        n = float(np.linalg.norm(pi[:3]))
        if n < _NORMAL_EPS:
            raise ValidationError("degenerate plane: normal has (near-)zero length")
        pi = pi / n
        return cls(float(pi[0]), float(pi[1]), float(pi[2]), float(pi[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.delta, self.gamma], dtype=np.float64)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "delta": self.delta, "gamma": self.gamma}


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold: float = 1.0  # tau_d, disparity px
    batch_size: int = 64           # candidate triples per iteration
    max_iterations: int = 100
    seed: int = 0
    min_delta: float = 1e-6

    def __post_init__(self):
        if not self.inlier_threshold > 0:
            raise ValidationError("inlier_threshold must be > 0")
        if self.batch_size < 1 or self.max_iterations < 1:
            raise ValidationError("batch_size and max_iterations must be >= 1")


@dataclass
class PlaneFitResult:
    plane: PlaneParams               # eigen-refined plane
    candidate_plane: PlaneParams     # raw RANSAC winner the inlier mask derives from
    inlier_mask: np.ndarray
    inlier_count: int
    rms_residual: float


def point_plane_distance(plane: PlaneParams, points) -> np.ndarray | float:
    """|alpha*u + beta*v + delta*d + gamma| under the unit-normal constraint."""
    pts = np.asarray(points, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != 3:
        raise ValidationError("points must be (u, v, d) triples")
    d = np.abs(pts @ plane.as_array()[:3] + plane.gamma)
    return float(d[0]) if scalar else d


def _sample_triples(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """m rows of 3 distinct indices into an n-point set."""
    out = np.empty((m, 3), dtype=np.int64)
    for b in range(m):
        out[b] = rng.choice(n, size=3, replace=False)
    return out


def _candidate_planes(pts: np.ndarray, idx: np.ndarray):
    """Raw candidate planes from point triples.

    Returns (planes (m,4) normalized, ok (m,) bool). Degenerate triples
    (collinear, or plane parallel to the disparity axis) are marked not-ok.
    """
    p0, p1, p2 = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n, axis=1)
    ok = norm >= _NORMAL_EPS
    safe = np.where(ok, norm, 1.0)[:, None]
    n_unit = n / safe
    # offset from the second sampled point
    gamma = -np.einsum("ij,ij->i", n_unit, p1)
    planes = np.concatenate([n_unit, gamma[:, None]], axis=1)
    return planes, ok


def fit_plane_ransac(points, cfg: RansacConfig = RansacConfig()) -> PlaneFitResult:
    """Robust plane fit: seeded RANSAC over triples, then eigen refinement.

    Per iteration, `batch_size` candidate triples are scored in one vectorized
    pass; the winner is the candidate with the most inliers (distance <=
    inlier_threshold), ties broken by lowest candidate index, earliest
    iteration. Candidates whose |delta| < min_delta are skipped: they could
    never serve disparity rectification.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError("points must be an (N, 3) array of (u, v, d)")
    n_pts = pts.shape[0]
    if n_pts < 3:
        raise ValidationError("plane fitting requires at least 3 points")

    rng = np.random.default_rng(cfg.seed)
    hom = np.concatenate([pts, np.ones((n_pts, 1))], axis=1)

    best_count = 0
    best_plane = None
    best_mask = None
    for _ in range(cfg.max_iterations):
        idx = _sample_triples(rng, n_pts, cfg.batch_size)
        planes, ok = _candidate_planes(pts, idx)
        ok &= np.abs(planes[:, 2]) >= cfg.min_delta
        if not ok.any():
            continue
        dist = np.abs(hom @ planes.T)  # (N, m)
        inl = dist.T <= cfg.inlier_threshold
        counts = np.where(ok, inl.sum(axis=1), -1)
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_count = int(counts[k])
            best_plane = planes[k]
            best_mask = inl[k].copy()

    if best_plane is None:
        raise ValidationError(
            "all candidate triples degenerate (collinear points or plane parallel "
            "to the disparity axis)"
        )

    refined = refine_plane_eigen(pts[best_mask])
    resid = point_plane_distance(refined, pts[best_mask])
    return PlaneFitResult(
        plane=refined,
        candidate_plane=PlaneParams.from_vector(best_plane),
        inlier_mask=best_mask,
        inlier_count=best_count,
        rms_residual=float(np.sqrt(np.mean(resid**2))),
    )


def refine_plane_eigen(inlier_points) -> PlaneParams:
    """Least-squares plane via the smallest eigenvector of [P,1]^T [P,1].

    The homogeneous solution is renormalized so alpha^2+beta^2+delta^2 = 1.
    """
    pts = np.asarray(inlier_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise ValidationError("eigen refinement requires at least 3 (u, v, d) points")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= sv[0] * 1e-9:
        raise ValidationError("rank-deficient refinement input (points are collinear)")
    hom = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
    S = hom.T @ hom
    _, vecs = np.linalg.eigh(S)
    return PlaneParams.from_vector(vecs[:, 0])


def plane_disparity_at(plane: PlaneParams, u, v, min_delta: float = 1e-6):
    """Solve the plane for d at (u, v): d = -(alpha*u + beta*v + gamma) / delta."""
    if abs(plane.delta) < min_delta:
        raise ValidationError(
            "plane is (near-)parallel to the disparity axis; no finite disparity"
        )
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return -(plane.alpha * u + plane.beta * v + plane.gamma) / plane.delta
