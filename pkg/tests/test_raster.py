import math

import numpy as np
import pytest

from poincare_lab import (
    boundary_points_1d,
    boundary_polyline,
    local_components,
    longest_chord,
    member,
    parse_domain,
    polyline_length,
    rasterize,
    thickness,
    thickness_discrete,
    volume,
    write_mask,
    write_pgm,
)
from poincare_lab.errors import EmptyFiberError


def test_raster_matches_pointwise_membership(specs):
    spec = specs["disk"]
    r = rasterize(spec, (), 8)
    centers = r.centers()
    for idx in np.ndindex(r.counts):
        assert r.interior[idx] == member(spec, (), centers[idx])


def test_apron_is_exterior(disk128):
    # one exterior cell beyond the box on every side, so no interior cell
    # touches the grid edge
    for ax in range(disk128.dim):
        sl = [slice(None)] * disk128.dim
        for edge in (0, -1):
            sl[ax] = edge
            assert not disk128.interior[tuple(sl)].any()


def test_empty_fiber_is_data(specs):
    r = rasterize(specs["shrink_disk"], (0.1,), 64)
    assert r.empty
    assert volume(r) == 0.0
    assert thickness_discrete(r, 0) == 0.0


def test_volume_disk(specs):
    v = volume(rasterize(specs["disk"], (), 512))
    assert abs(v - math.pi) / math.pi < 0.01


def test_volume_square(square64):
    # error bounded by a one-cell strip along the perimeter
    assert abs(volume(square64) - 1.0) <= 2.0 * square64.h * 4.0


def test_volume_cusp(specs):
    t = 0.3
    v = volume(rasterize(specs["cusp"], (t,), 1024))
    exact = t / 3.0
    assert abs(v - exact) / exact < 0.03


def test_volume_error_shrinks_with_resolution(specs):
    errs = [
        abs(volume(rasterize(specs["disk"], (), res)) - math.pi)
        for res in (64, 512)
    ]
    assert errs[1] < errs[0]


def test_thickness_disk_any_direction(specs):
    spec = specs["disk"]
    for d in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.3, -0.7)]:
        assert abs(thickness(spec, (), d) - 2.0) < 1e-3


def test_thickness_square_diagonal(specs):
    got = thickness(specs["square"], (), (1.0, 1.0))
    assert abs(got - math.sqrt(2.0)) < 1e-3


def test_thickness_annulus(specs):
    # the longest horizontal chord grazes the inner circle of radius 1/2
    got = thickness(specs["annulus"], (), (1.0, 0.0))
    assert abs(got - math.sqrt(3.0)) < 1e-2


def test_thickness_rect_axes(specs):
    spec = specs["rect2x1"]
    assert abs(thickness(spec, (), (0.0, 1.0)) - 1.0) < 1e-3
    assert abs(thickness(spec, (), (1.0, 0.0)) - 2.0) < 1e-3


def test_thickness_cusp_vertical(specs):
    # vertical chords of {0 < y < t x^2} have length t x^2, sup = t
    for t in (0.3, 1.0):
        got = thickness(specs["cusp"], (t,), (0.0, 1.0))
        assert abs(got - t) < 2e-3


def test_thickness_unbounded_strip(specs):
    assert thickness(specs["strip"], (), (1.0, 0.0)) == math.inf
    got = thickness(specs["strip"], (), (0.0, 1.0))
    assert abs(got - 1.0) < 1e-3


def test_thickness_empty_fiber_is_zero(specs):
    assert thickness(specs["shrink_disk"], (0.1,), (1.0, 0.0)) == 0.0


def test_longest_chord_reports_start_and_direction(specs):
    chord = longest_chord(specs["disk"], (), (1.0, 0.0))
    assert chord.length == pytest.approx(2.0, abs=1e-3)
    # the winning chord is the diameter through the center
    assert abs(chord.start[1]) < 0.05
    assert chord.direction == pytest.approx((1.0, 0.0))


def test_longest_chord_empty_raises(specs):
    with pytest.raises(EmptyFiberError):
        longest_chord(specs["shrink_disk"], (0.1,), (1.0, 0.0))


def test_thickness_discrete_square(square64):
    got = thickness_discrete(square64, 0)
    assert abs(got - 1.0) <= 2.0 * square64.h


def test_thickness_discrete_stacked_bars():
    spec = parse_domain(
        "dim 2\nbox [0,1]x[0,1]\n"
        "set: (x > 0 and 1 - x > 0) and "
        "((y > 0 and 0.2 - y > 0) or (y - 0.5 > 0 and 0.7 - y > 0))\n"
    )
    r = rasterize(spec, (), 128)
    # runs along y stop at each bar, runs along x cross the full width
    assert abs(thickness_discrete(r, 1) - 0.2) <= 2.0 * r.h
    assert abs(thickness_discrete(r, 0) - 1.0) <= 2.0 * r.h


def test_thickness_discrete_bounded_by_continuum(disk128):
    for ax in (0, 1):
        td = thickness_discrete(disk128, ax)
        tc = thickness(disk128.spec, (), np.eye(2)[ax])
        assert td <= tc + 2.0 * disk128.h


def test_thickness_discrete_axis_range(disk128):
    with pytest.raises(ValueError):
        thickness_discrete(disk128, 2)


def test_local_components_disk(disk128):
    assert local_components(disk128, (1.0, 0.0), 0.2) == 1
    assert local_components(disk128, (0.0, 0.0), 0.2) == 1
    assert local_components(disk128, (5.0, 5.0), 0.2) == 0


def test_local_components_slit(specs):
    # odd resolution puts a row of cell centers exactly on the slit line
    r = rasterize(specs["slit_disk"], (), 255)
    assert local_components(r, (0.5, 0.0), 0.1) == 2
    # left of the slit tip the disk is locally whole
    assert local_components(r, (-0.5, 0.0), 0.1) == 1


def test_local_components_cusp(specs):
    r = rasterize(specs["cusp"], (1.0,), 512)
    assert local_components(r, (0.0, 0.0), 0.1) == 1


def test_local_components_eps_floor(disk128):
    with pytest.raises(ValueError):
        local_components(disk128, (0.0, 0.0), disk128.h)


def test_boundary_polyline_disk_length(disk128):
    segs = boundary_polyline(disk128)
    length = polyline_length(segs)
    assert abs(length - 2.0 * math.pi) / (2.0 * math.pi) < 0.01
    # every vertex lies near the unit circle
    pts = segs.reshape(-1, 2)
    radii = np.linalg.norm(pts, axis=1)
    assert np.max(np.abs(radii - 1.0)) < 2.0 * disk128.h


def test_boundary_points_1d(interval64):
    pts = boundary_points_1d(interval64)
    assert pts.shape == (2,)
    assert pts == pytest.approx([0.0, 1.0], abs=1e-9)


def test_write_pgm(tmp_path, disk128):
    path = tmp_path / "disk.pgm"
    write_pgm(disk128, path)
    blob = path.read_bytes()
    ny, nx = disk128.counts[1], disk128.counts[0]
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    assert blob.startswith(header)
    body = np.frombuffer(blob[len(header):], dtype=np.uint8)
    assert body.size == nx * ny
    assert set(np.unique(body)) <= {0, 128, 255}
    assert (body == 255).sum() + (body == 128).sum() == disk128.interior_count


def test_write_mask_roundtrip(tmp_path, disk128):
    import json

    bin_path = tmp_path / "mask.bin"
    json_path = tmp_path / "mask.json"
    write_mask(disk128, bin_path, json_path)
    sidecar = json.loads(json_path.read_text())
    assert sidecar["dims"] == list(disk128.counts)
    assert sidecar["order"] == "C"
    mask = np.frombuffer(bin_path.read_bytes(), dtype=np.uint8).reshape(
        sidecar["dims"]
    )
    assert np.array_equal(mask.astype(bool), disk128.interior)
    assert sidecar["interior_count"] == disk128.interior_count
