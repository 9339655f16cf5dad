"""Inner-approximation rasterization and metric queries on fibers.

A fiber is rasterized on a uniform grid of cell centers inside the declared
bounding box.  Interior cells are those whose centers satisfy the membership
formula, so the raster is an inner approximation of the open set.  On top of
the raster this module measures volume, directional thickness (longest open
chord in a given direction), discrete per-axis thickness, and local
connectivity near a point, and serializes masks for external tools.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .dsl import DomainSpec
from .errors import EmptyFiberError

DEFAULT_SEED_RESOLUTION = {1: 1024, 2: 256, 3: 48}


@dataclass(frozen=True)
class RasterDomain:
    """Uniform-grid inner approximation of one fiber.

    ``interior`` marks cell centers that belong to the set;
    ``boundary_adjacent`` marks interior cells with at least one
    non-interior face neighbor (grid edges count as non-interior).
    The grid extends one exterior cell beyond the bounding box on every
    side, so an interior cell never sits on the grid edge and difference
    operators see every zero-extension jump on an in-grid face.
    """

    spec: DomainSpec
    t: tuple
    h: float
    origin: tuple
    counts: tuple
    interior: np.ndarray
    boundary_adjacent: np.ndarray = field(repr=False)
    resolution: int = 0

    def __post_init__(self):
        if self.interior.shape != tuple(self.counts):
            raise ValueError("interior mask shape does not match counts")
        if self.h <= 0:
            raise ValueError("spacing must be positive")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def empty(self) -> bool:
        return not bool(self.interior.any())

    @property
    def interior_count(self) -> int:
        return int(self.interior.sum())

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.counts[axis]) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """All cell centers, shape ``counts + (dim,)``."""
        axes = [self.axis_centers(i) for i in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def interior_points(self) -> np.ndarray:
        """Centers of interior cells, shape ``(n_interior, dim)``."""
        idx = np.argwhere(self.interior)
        return self.origin + (idx + 0.5) * self.h


def _boundary_adjacent(interior: np.ndarray) -> np.ndarray:
    pad = np.pad(interior, 1, constant_values=False)
    dim = interior.ndim
    exposed = np.zeros_like(interior)
    core = tuple(slice(1, -1) for _ in range(dim))
    for ax in range(dim):
        for shift in (1, -1):
            sl = list(core)
            sl[ax] = slice(1 + shift, pad.shape[ax] - 1 + shift)
            exposed |= ~pad[tuple(sl)]
    return interior & exposed


def rasterize(spec: DomainSpec, t, resolution: int) -> RasterDomain:
    """Rasterize the fiber at ``t`` with ``resolution`` cells across the
    longest box axis.  An all-exterior result is returned as an empty
    raster (``raster.empty``), which callers treat as data, not an error.
    """
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    t = spec.check_params(t)
    spans = [hi - lo for lo, hi in spec.bounding_box]
    h = max(spans) / resolution
    inner_counts = tuple(max(1, int(math.floor(s / h + 1e-9))) for s in spans)
    # the grid carries a one-cell exterior apron around the box so every
    # zero-extension jump of a difference operator lies on an in-grid face
    counts = tuple(c + 2 for c in inner_counts)
    origin = tuple(lo - h for lo, _ in spec.bounding_box)

    axes = [
        origin[i] + (np.arange(1, 1 + inner_counts[i]) + 0.5) * h
        for i in range(spec.ambient_dim)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    inner = spec.member_points(t, pts).reshape(inner_counts)
    interior = np.pad(inner, 1, mode="constant", constant_values=False)

    return RasterDomain(
        spec=spec,
        t=t,
        h=h,
        origin=origin,
        counts=counts,
        interior=interior,
        boundary_adjacent=_boundary_adjacent(interior),
        resolution=resolution,
    )


def volume(raster: RasterDomain) -> float:
    """Cell-counting measure: interior count times h^dim."""
    return raster.interior_count * raster.h**raster.dim


# ---------------------------------------------------------------------------
# directional thickness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chord:
    """An open segment inside a fiber: start point, unit direction, length."""

    start: tuple
    direction: tuple
    length: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(float(np.linalg.norm(d)) - 1.0) > 1e-12:
            raise ValueError("chord direction must be a unit vector")
        if not (self.length >= 0.0):
            raise ValueError("chord length must be nonnegative")


def _unit(direction, dim: int) -> np.ndarray:
    lam = np.asarray(direction, dtype=np.float64).reshape(-1)
    if lam.size != dim:
        raise ValueError(f"direction has {lam.size} components, expected {dim}")
    n = float(np.linalg.norm(lam))
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("direction must be a nonzero finite vector")
    return lam / n


def _perp_basis(lam: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the hyperplane orthogonal to lam,
    shape (dim, dim-1)."""
    dim = lam.size
    if dim == 1:
        return np.zeros((1, 0))
    # Householder reflection mapping e_1 to lam; remaining columns span lam-perp.
    e = np.zeros(dim)
    e[0] = 1.0
    v = lam - e if lam[0] >= 0 else lam + e
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        H = np.eye(dim)
    else:
        v = v / nv
        H = np.eye(dim) - 2.0 * np.outer(v, v)
        if lam[0] < 0:
            H = -H
    return H[:, 1:]


def _line_seeds(raster: RasterDomain) -> np.ndarray:
    """Chord-line seeds: interior centers plus boundary-adjacent face
    midpoints (the sup can be attained by chords grazing the boundary)."""
    pts = [raster.interior_points()]
    idx = np.argwhere(raster.boundary_adjacent)
    if idx.size:
        pad = np.pad(raster.interior, 1, constant_values=False)
        base = np.asarray(raster.origin) + (idx + 0.5) * raster.h
        for ax in range(raster.dim):
            for shift in (1, -1):
                nb = idx.copy()
                nb[:, ax] += shift
                nb_in = pad[tuple((nb + 1).T)]
                face = base[~nb_in].copy()
                face[:, ax] += shift * raster.h / 2.0
                pts.append(face)
    return np.concatenate(pts, axis=0)


def _ray_box_span(P: np.ndarray, lam: np.ndarray, box) -> tuple:
    """Parameter range for which P + s*lam stays inside the box; vectorized
    over rows of P.  Lines that miss the box get an empty range."""
    s_lo = np.full(P.shape[0], -np.inf)
    s_hi = np.full(P.shape[0], np.inf)
    ok = np.ones(P.shape[0], dtype=bool)
    for i, (lo, hi) in enumerate(box):
        d = lam[i]
        if abs(d) < 1e-14:
            ok &= (P[:, i] >= lo) & (P[:, i] <= hi)
            continue
        a = (lo - P[:, i]) / d
        b = (hi - P[:, i]) / d
        s_lo = np.maximum(s_lo, np.minimum(a, b))
        s_hi = np.minimum(s_hi, np.maximum(a, b))
    ok &= s_lo < s_hi
    return s_lo, s_hi, ok


def _bisect_boundary(spec, t, base, lam, s_in, s_out, rounds: int):
    """Refine set-boundary crossings along lines.  ``base + s*lam`` is inside
    at s_in and outside at s_out; returns the midpoint of the final bracket."""
    s_in = np.array(s_in, dtype=np.float64)
    s_out = np.array(s_out, dtype=np.float64)
    for _ in range(rounds):
        mid = 0.5 * (s_in + s_out)
        pts = base + mid[:, None] * lam
        inside = spec.member_points(t, pts)
        s_in = np.where(inside, mid, s_in)
        s_out = np.where(inside, s_out, mid)
    return 0.5 * (s_in + s_out)


def longest_chord(
    spec: DomainSpec,
    t,
    direction,
    step: float | None = None,
    seed_resolution: int | None = None,
) -> Chord:
    """Longest open chord of the fiber in the given direction.

    Chord lines are taken through interior cell centers and boundary-adjacent
    face midpoints of a seed raster; each line is marched at ``step`` and run
    endpoints are refined by bisection to ``step/64``.  A run that reaches the
    bounding box while still inside the set yields an infinite chord.
    """
    t = spec.check_params(t)
    dim = spec.ambient_dim
    lam = _unit(direction, dim)
    if seed_resolution is None:
        seed_resolution = DEFAULT_SEED_RESOLUTION[dim]
    raster = rasterize(spec, t, seed_resolution)
    if raster.empty:
        raise EmptyFiberError(f"empty fiber at t={list(t)}")
    if step is None:
        step = raster.h / 4.0

    seeds = _line_seeds(raster)
    B = _perp_basis(lam)
    if dim == 1:
        bases = np.zeros((1, 1))
    else:
        q = raster.h / 2.0
        offsets = seeds @ B
        quant = np.unique(np.round(offsets / q).astype(np.int64), axis=0)
        bases = (quant * q) @ B.T

    s_lo, s_hi, ok = _ray_box_span(bases, lam, spec.bounding_box)
    bases, s_lo, s_hi = bases[ok], s_lo[ok], s_hi[ok]
    if bases.shape[0] == 0:
        raise EmptyFiberError("no chord line meets the bounding box")
    # push the end samples just past the box faces: a face sample computed
    # in floating point can land one ulp inside the box and make a chord
    # that merely touches the face look like an escape
    tiny = 1e-9 * (1.0 + np.abs(s_hi - s_lo))
    s_lo = s_lo - tiny
    s_hi = s_hi + tiny

    nsteps = np.ceil((s_hi - s_lo) / step).astype(np.int64)
    kmax = int(nsteps.max()) + 1
    j = np.arange(kmax)
    svals = s_lo[:, None] + j[None, :] * step
    valid = j[None, :] <= nsteps[:, None]
    # land the final sample exactly on the box face
    svals = np.where(j[None, :] == nsteps[:, None], s_hi[:, None], svals)
    svals = np.where(valid, svals, s_hi[:, None])

    pts = bases[:, None, :] + svals[..., None] * lam
    inside = spec.member_points(t, pts.reshape(-1, dim)).reshape(svals.shape)
    inside &= valid

    rounds = max(6, int(math.ceil(math.log2(64))))
    best_len = 0.0
    best_start = None
    unbounded_start = None

    left_in, left_out, right_in, right_out, row_of = [], [], [], [], []
    for r in range(inside.shape[0]):
        m = inside[r]
        n = int(nsteps[r]) + 1
        mm = m[:n]
        padded = np.concatenate(([False], mm, [False]))
        d = np.diff(padded.astype(np.int8))
        starts = np.nonzero(d == 1)[0]
        ends = np.nonzero(d == -1)[0] - 1
        for a, b in zip(starts, ends):
            if a == 0 or b == n - 1:
                unbounded_start = bases[r] + svals[r, a] * lam
                continue
            left_in.append(svals[r, a])
            left_out.append(svals[r, a - 1])
            right_in.append(svals[r, b])
            right_out.append(svals[r, b + 1])
            row_of.append(r)

    if unbounded_start is not None:
        return Chord(tuple(unbounded_start), tuple(lam), math.inf)
    if not left_in:
        raise EmptyFiberError("no chord found along any sampled line")

    rows = np.array(row_of)
    lb = _bisect_boundary(spec, t, bases[rows], lam, left_in, left_out, rounds)
    rb = _bisect_boundary(spec, t, bases[rows], lam, right_in, right_out, rounds)
    lengths = rb - lb
    i = int(np.argmax(lengths))
    best_len = float(max(lengths[i], 0.0))
    best_start = bases[rows[i]] + lb[i] * lam
    return Chord(tuple(best_start), tuple(lam), best_len)


def thickness(
    spec: DomainSpec,
    t,
    direction,
    step: float | None = None,
    seed_resolution: int | None = None,
) -> float:
    """Directional thickness: supremum of open chord lengths along
    ``direction``.  Returns ``0.0`` for an empty fiber and ``math.inf``
    when a chord escapes through the bounding box."""
    try:
        chord = longest_chord(spec, t, direction, step=step, seed_resolution=seed_resolution)
    except EmptyFiberError:
        return 0.0
    return chord.length


def thickness_discrete(raster: RasterDomain, axis: int) -> float:
    """Longest run of consecutive interior cells along a grid axis, times h."""
    if not 0 <= axis < raster.dim:
        raise ValueError(f"axis {axis} out of range for dim {raster.dim}")
    if raster.empty:
        return 0.0
    m = np.moveaxis(raster.interior, axis, -1)
    flat = m.reshape(-1, m.shape[-1])
    # separate rows with an always-false column, then scan globally
    padded = np.concatenate(
        [flat, np.zeros((flat.shape[0], 1), dtype=bool)], axis=1
    ).reshape(-1)
    padded = np.concatenate(([False], padded))
    d = np.diff(padded.astype(np.int8))
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    if starts.size == 0:
        return 0.0
    return float((ends - starts).max()) * raster.h


def local_components(raster: RasterDomain, x, eps: float) -> int:
    """Number of face-connected interior components whose cell centers lie
    within distance ``eps`` of ``x``.  Requires ``eps >= 3h`` so the ball
    is resolved by the grid."""
    if eps < 3.0 * raster.h:
        raise ValueError(f"eps={eps} is below 3h={3.0 * raster.h}")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != raster.dim:
        raise ValueError("query point dimension mismatch")
    axes = [raster.axis_centers(i) for i in range(raster.dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    dist2 = sum((g - xi) ** 2 for g, xi in zip(grids, x))
    sel = raster.interior & (dist2 < eps * eps)
    if not sel.any():
        return 0
    _, n = ndimage.label(sel)
    return int(n)


# ---------------------------------------------------------------------------
# boundary extraction
# ---------------------------------------------------------------------------

_EDGE_CORNERS = {"S": (0, 1), "E": (1, 2), "N": (3, 2), "W": (0, 3)}

_MS_CASES = {
    1: [("W", "S")],
    2: [("S", "E")],
    3: [("W", "E")],
    4: [("E", "N")],
    6: [("S", "N")],
    7: [("W", "N")],
    8: [("W", "N")],
    9: [("S", "N")],
    11: [("E", "N")],
    12: [("W", "E")],
    13: [("S", "E")],
    14: [("W", "S")],
}


def margin_field(raster: RasterDomain) -> np.ndarray:
    """Signed margin of the membership formula at the cell centers
    (min/max composition of atom values; positive exactly inside)."""
    axes = [raster.axis_centers(i) for i in range(raster.dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    return raster.spec.margin_points(raster.t, pts).reshape(raster.counts)


def boundary_polyline(raster: RasterDomain) -> np.ndarray:
    """Marching-squares polyline of the fiber boundary, shape (m, 2, 2).

    The zero level of the signed margin field is interpolated on the grid
    of cell centers, which places vertices sub-cell accurately on the true
    boundary rather than on the mask staircase.
    """
    if raster.dim != 2:
        raise ValueError("boundary_polyline is only defined for 2D rasters")
    F = margin_field(raster)
    pos = F > 0.0
    mixed = np.zeros((F.shape[0] - 1, F.shape[1] - 1), dtype=bool)
    mixed |= pos[:-1, :-1] != pos[1:, :-1]
    mixed |= pos[:-1, :-1] != pos[1:, 1:]
    mixed |= pos[:-1, :-1] != pos[:-1, 1:]
    ii, jj = np.nonzero(mixed)

    x0, y0 = raster.origin[0] + 0.5 * raster.h, raster.origin[1] + 0.5 * raster.h
    h = raster.h
    segments = []
    for i, j in zip(ii, jj):
        corners = np.array(
            [
                (x0 + i * h, y0 + j * h),
                (x0 + (i + 1) * h, y0 + j * h),
                (x0 + (i + 1) * h, y0 + (j + 1) * h),
                (x0 + i * h, y0 + (j + 1) * h),
            ]
        )
        vals = np.array([F[i, j], F[i + 1, j], F[i + 1, j + 1], F[i, j + 1]])
        ins = vals > 0.0
        case = int(ins[0]) | int(ins[1]) << 1 | int(ins[2]) << 2 | int(ins[3]) << 3
        if case in (0, 15):
            continue
        if case in (5, 10):
            center_in = float(vals.sum()) > 0.0
            if case == 5:
                pairs = [("S", "E"), ("W", "N")] if center_in else [("W", "S"), ("E", "N")]
            else:
                pairs = [("W", "S"), ("E", "N")] if center_in else [("S", "E"), ("W", "N")]
        else:
            pairs = _MS_CASES[case]

        def edge_point(edge):
            a, b = _EDGE_CORNERS[edge]
            fa, fb = vals[a], vals[b]
            r = fa / (fa - fb)
            return corners[a] + r * (corners[b] - corners[a])

        for ea, eb in pairs:
            segments.append((edge_point(ea), edge_point(eb)))
    if not segments:
        return np.zeros((0, 2, 2))
    return np.array(segments)


def boundary_points_1d(raster: RasterDomain) -> np.ndarray:
    """Boundary points of a 1D raster: interpolated sign changes of the
    margin field between adjacent cell centers."""
    if raster.dim != 1:
        raise ValueError("boundary_points_1d needs a 1D raster")
    F = margin_field(raster)
    xs = raster.axis_centers(0)
    pos = F > 0.0
    out = []
    for i in range(len(F) - 1):
        if pos[i] != pos[i + 1]:
            r = F[i] / (F[i] - F[i + 1])
            out.append(xs[i] + r * (xs[i + 1] - xs[i]))
    return np.array(out)


def polyline_length(segments: np.ndarray) -> float:
    if segments.size == 0:
        return 0.0
    return float(np.linalg.norm(segments[:, 1] - segments[:, 0], axis=1).sum())


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_pgm(raster: RasterDomain, path) -> None:
    """Binary PGM of a 2D raster: exterior 0, interior 255, boundary-adjacent
    interior 128.  Rows run from the top of the box down, image convention."""
    if raster.dim != 2:
        raise ValueError("PGM export is only defined for 2D rasters")
    img = np.zeros(raster.counts, dtype=np.uint8)
    img[raster.interior] = 255
    img[raster.boundary_adjacent] = 128
    rows = img.T[::-1, :]  # (y, x) with y downward from box top
    header = f"P5\n{rows.shape[1]} {rows.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes(order="C"))


def write_mask(raster: RasterDomain, bin_path, json_path) -> None:
    """Flat uint8 mask (C order over the grid axes) plus a JSON sidecar
    describing the geometry."""
    with open(bin_path, "wb") as fh:
        fh.write(raster.interior.astype(np.uint8).tobytes(order="C"))
    sidecar = {
        "dims": list(raster.counts),
        "h": raster.h,
        "origin": list(raster.origin),
        "t": list(raster.t),
        "order": "C",
        "interior_count": raster.interior_count,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")
