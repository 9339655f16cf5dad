"""Boundary sampling, regular-direction margins, and direction search.

Boundary points are found where membership flips along axis-parallel scan
lines and refined by bisection.  A point is kept only when exactly one
atom is active there with a usable gradient, which restricts attention to
smooth codimension-one strata; corners, cusp tips, and degenerate atoms
(vanishing gradients) are excluded.  The margin of a direction is the
smallest |<direction, normal>| over the samples, and the direction search
scans a deterministic antipodally-reduced lattice of candidates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dsl import DomainSpec
from .errors import EmptySamplesError, StratumTooThinWarning

# bisection refinement of a membership flip, in coordinates
_BISECT_TOL = 1e-10
# an atom counts as active when |value| <= ATOM_TOL_SCALE * its value scale
ATOM_TOL_SCALE = 1e-7
# gradients shorter than this give no reliable normal
_MIN_GRAD_NORM = 1e-8


@dataclass(frozen=True)
class BoundarySample:
    """One point on a smooth boundary stratum with its unit normal."""

    point: tuple
    normal: tuple
    atom_id: int


class BoundarySampleSet:
    """Array-backed collection of boundary samples for one fiber."""

    def __init__(self, points, normals, atom_ids, t, warnings_=()):
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        self.normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
        if self.normals.shape != self.points.shape:
            raise ValueError("points and normals must have matching shapes")
        self.atom_ids = np.asarray(atom_ids, dtype=np.int64).reshape(-1)
        if self.atom_ids.size != self.points.shape[0]:
            raise ValueError("one atom id per sample required")
        self.t = tuple(t)
        self.warnings = list(warnings_)

    def __len__(self):
        return self.points.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield BoundarySample(
                tuple(self.points[i]), tuple(self.normals[i]), int(self.atom_ids[i])
            )

    def subset(self, mask) -> "BoundarySampleSet":
        mask = np.asarray(mask, dtype=bool)
        return BoundarySampleSet(
            self.points[mask], self.normals[mask], self.atom_ids[mask], self.t,
            self.warnings,
        )


def line_crossings(spec: DomainSpec, t, origins, direction, s_max, steps=1024):
    """Membership flips along lines ``origin + s*direction``, s in [0, s_max].

    Returns (line_index, s) arrays with one entry per flip, refined by
    bisection to coordinate tolerance 1e-10.  Vectorized over all lines and
    brackets at once.
    """
    origins = np.asarray(origins, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    svals = np.linspace(0.0, s_max, steps + 1)
    pts = origins[:, None, :] + svals[None, :, None] * direction[None, None, :]
    flat = pts.reshape(-1, origins.shape[1])
    status = spec.member_points(t, flat).reshape(origins.shape[0], svals.size)

    flips = status[:, :-1] != status[:, 1:]
    line_idx, seg_idx = np.nonzero(flips)
    if line_idx.size == 0:
        return line_idx, np.zeros(0)

    lo = svals[seg_idx].copy()
    hi = svals[seg_idx + 1].copy()
    lo_status = status[line_idx, seg_idx]
    base = origins[line_idx]
    n_rounds = max(1, int(math.ceil(math.log2(max((hi - lo).max(), 1e-300) / _BISECT_TOL))))
    for _ in range(n_rounds):
        mid = 0.5 * (lo + hi)
        mstat = spec.member_points(t, base + mid[:, None] * direction)
        same = mstat == lo_status
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return line_idx, 0.5 * (lo + hi)


def _atom_coords(spec: DomainSpec, t, pts):
    """Stack point coordinates with broadcast parameter rows, (nvars, n)."""
    coords = pts.T
    if spec.param_names:
        coords = np.concatenate(
            [coords, np.tile(np.asarray(t, dtype=np.float64)[:, None], (1, pts.shape[0]))]
        )
    return coords


def _active_atoms(spec: DomainSpec, t, pts):
    """Boolean activity matrix (n_points, n_atoms) at scaled tolerance."""
    act = np.zeros((pts.shape[0], len(spec.atoms)), dtype=bool)
    coords = _atom_coords(spec, t, pts)
    for j, atom in enumerate(spec.atoms):
        tol = ATOM_TOL_SCALE * atom.value_scale(spec.bounding_box, spec.param_box)
        act[:, j] = np.abs(atom.values(coords)) <= tol
    return act


def sample_boundary(
    spec: DomainSpec, t, count: int = 4096, seed: int = 0, steps: int = 1024
) -> BoundarySampleSet:
    """Sample smooth boundary points of the fiber at ``t``.

    Scan lines run parallel to each axis at seeded-random transverse
    offsets inside the bounding box; membership flips are bisected to
    1e-10.  Points where exactly one atom is active (scaled tolerance) and
    its gradient norm is at least 1e-8 become samples with the normalized
    gradient as normal.  A StratumTooThin warning is attached when fewer
    than count/10 samples survive.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    t = spec.check_params(t)
    dim = spec.ambient_dim
    box = spec.bounding_box
    rng = np.random.default_rng(seed)
    # a 1D box admits a single distinct scan line
    lines_per_axis = 1 if dim == 1 else max(1, count // (2 * dim))

    all_pts = []
    for axis in range(dim):
        origins = np.empty((lines_per_axis, dim))
        for j in range(dim):
            lo, hi = box[j]
            origins[:, j] = lo if j == axis else rng.uniform(lo, hi, lines_per_axis)
        direction = np.zeros(dim)
        direction[axis] = 1.0
        s_max = box[axis][1] - box[axis][0]
        line_idx, svals = line_crossings(spec, t, origins, direction, s_max, steps)
        if line_idx.size:
            all_pts.append(origins[line_idx] + svals[:, None] * direction)

    if all_pts:
        pts = np.concatenate(all_pts, axis=0)
    else:
        pts = np.zeros((0, dim))

    warn_list = []
    if pts.shape[0]:
        act = _active_atoms(spec, t, pts)
        single = act.sum(axis=1) == 1
        pts = pts[single]
        atom_ids = np.argmax(act[single], axis=1)
        grads = np.zeros_like(pts)
        keep = np.zeros(pts.shape[0], dtype=bool)
        for j, atom in enumerate(spec.atoms):
            rows = atom_ids == j
            if not rows.any():
                continue
            g = atom.gradient_values(_atom_coords(spec, t, pts[rows])).T
            norms = np.linalg.norm(g, axis=1)
            ok = norms >= _MIN_GRAD_NORM
            g[ok] /= norms[ok][:, None]
            grads[rows] = g
            keep[rows] = ok
        pts, grads, atom_ids = pts[keep], grads[keep], atom_ids[keep]
    else:
        grads = np.zeros((0, dim))
        atom_ids = np.zeros(0, dtype=np.int64)

    if pts.shape[0] < count / 10:
        msg = (
            f"only {pts.shape[0]} of the requested {count} boundary samples "
            f"survived the smooth-stratum filter at t={list(t)}"
        )
        warnings.warn(msg, StratumTooThinWarning)
        warn_list.append(msg)
    return BoundarySampleSet(pts, grads, atom_ids, t, warn_list)


def margin(samples: BoundarySampleSet, direction) -> float:
    """Empirical regular-direction margin: min over samples of |<d, normal>|."""
    d = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    if len(samples) == 0:
        raise EmptySamplesError("no boundary samples to take a margin over")
    return float(np.min(np.abs(samples.normals @ d)))


def candidate_directions(dim: int, n: int) -> np.ndarray:
    """Deterministic antipodally-reduced direction lattice.

    dim 1: the single axis.  dim 2: n equally spaced angles on the upper
    half-circle.  dim 3: a Fibonacci lattice on the upper half-sphere.
    Components within 1e-14 of an axis value are snapped so that axis
    directions appear exactly when the lattice passes through them.
    """
    if dim == 1:
        return np.array([[1.0]])
    if dim == 2:
        theta = np.pi * np.arange(n) / n
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    elif dim == 3:
        i = np.arange(n) + 0.5
        z = i / n
        phi = i * math.pi * (3.0 - math.sqrt(5.0))
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        raise ValueError("directions are defined for dim 1, 2, 3")
    dirs[np.abs(dirs) < 1e-14] = 0.0
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return dirs


@dataclass(frozen=True)
class MarginReport:
    """Outcome of a regular-direction search over a family."""

    direction: tuple
    alpha: float
    status: str
    fibers: tuple
    per_fiber: tuple
    sample_counts: tuple
    candidate_count: int
    candidate_margins: np.ndarray

    @property
    def found(self) -> bool:
        return self.status == "ok"

    def to_json_dict(self) -> dict:
        return {
            "direction": [float(v) for v in self.direction],
            "alpha": float(self.alpha),
            "status": self.status,
            "fibers": [list(map(float, f)) for f in self.fibers],
            "per_fiber_margin": [
                float(v) if math.isfinite(v) else None for v in self.per_fiber
            ],
            "sample_counts": [int(c) for c in self.sample_counts],
            "candidate_count": int(self.candidate_count),
        }


def find_regular_direction(
    spec: DomainSpec,
    t_samples,
    directions: int = 512,
    seed: int = 0,
    count: int = 4096,
    min_alpha: float = 1e-2,
    steps: int = 1024,
) -> MarginReport:
    """Search candidate directions for one regular for the whole family.

    Boundary samples of every fiber are pooled; each lattice direction gets
    the pooled margin, and the best margin wins with ties broken by the
    lexicographically smallest direction.  A best margin below ``min_alpha``
    is classified as no_regular_direction (a sampled curved boundary never
    produces an exactly zero margin, so the threshold is a resolution-aware
    cutoff rather than an exact test).
    """
    if directions < 16:
        raise ValueError("need at least 16 candidate directions")
    t_list = [spec.check_params(t) for t in t_samples]
    if not t_list:
        raise ValueError("need at least one parameter sample")
    sets = [sample_boundary(spec, t, count=count, seed=seed, steps=steps) for t in t_list]
    pooled = np.concatenate([s.normals for s in sets if len(s)], axis=0) if any(len(s) for s in sets) else None
    if pooled is None or pooled.shape[0] == 0:
        raise EmptySamplesError("no boundary samples in any fiber")

    cands = candidate_directions(spec.ambient_dim, directions)
    margins = np.min(np.abs(pooled @ cands.T), axis=0)
    best = float(np.max(margins))
    ties = np.nonzero(margins == best)[0]
    best_idx = min(ties, key=lambda i: tuple(cands[i]))
    lam = cands[best_idx]

    per_fiber = []
    for s in sets:
        per_fiber.append(
            float(np.min(np.abs(s.normals @ lam))) if len(s) else math.inf
        )
    status = "ok" if best >= min_alpha else "no_regular_direction"
    return MarginReport(
        direction=tuple(float(v) for v in lam),
        alpha=best,
        status=status,
        fibers=tuple(t_list),
        per_fiber=tuple(per_fiber),
        sample_counts=tuple(len(s) for s in sets),
        candidate_count=directions,
        candidate_margins=margins,
    )
