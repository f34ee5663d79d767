import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import hausdorff_bruteforce, holes_bfs, relative_hull_bfs
from universality_lab.errors import PreconditionError, UnsupportedRepresentation
from universality_lab.geometry import (CompactGridSet, GridSpec, annulus_mask, count_holes,
                                       csv_to_points, disk_mask, hausdorff_distance, label_holes,
                                       mask_to_pgm, pgm_to_mask, points_to_csv, relative_hull)

GRID = GridSpec(0j, 1.0, 64)


def cloud(pts):
    return CompactGridSet.from_points(pts)


def test_gridspec_geometry():
    g = GridSpec(1 + 1j, 2.0, 4)
    assert g.pixel_size == 1.0
    z = g.centers()
    assert z[0, 0] == complex(-0.5, 2.5)
    assert z[-1, -1] == complex(2.5, -0.5)
    assert g.index_of(complex(-0.5, 2.5)) == (0, 0)
    assert g.index_of(10 + 0j) is None
    with pytest.raises(PreconditionError):
        GridSpec(0j, 0.0, 8)
    with pytest.raises(PreconditionError):
        GridSpec(0j, 1.0, 1)


def test_compact_set_needs_one_representation():
    with pytest.raises(PreconditionError):
        CompactGridSet()
    with pytest.raises(PreconditionError):
        CompactGridSet(grid=GRID, mask=np.zeros((64, 64), bool), points=[0j])
    with pytest.raises(PreconditionError):
        CompactGridSet(grid=GRID, mask=np.zeros((8, 8), bool))
    k = disk_mask(GRID, 0, 0.5)
    with pytest.raises(ValueError):
        k.mask[0, 0] = True


def test_hausdorff_singletons():
    assert hausdorff_distance(cloud([0]), cloud([0])) == 0
    assert hausdorff_distance(cloud([0]), cloud([1])) == 1


def test_hausdorff_matches_double_loop():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.normal(size=20) + 1j * rng.normal(size=20)
        b = rng.normal(size=20) + 1j * rng.normal(size=20)
        assert hausdorff_distance(cloud(a), cloud(b)) == pytest.approx(hausdorff_bruteforce(a, b), abs=1e-12)


def test_hausdorff_errors():
    with pytest.raises(PreconditionError):
        hausdorff_distance(cloud([]), cloud([0]))
    with pytest.raises(UnsupportedRepresentation):
        hausdorff_distance(cloud([0]), disk_mask(GRID, 0, 0.3))


def test_hausdorff_raster_within_pixel_diagonal():
    a = disk_mask(GRID, 0, 0.5)
    b = disk_mask(GRID, 0, 0.7)
    assert abs(hausdorff_distance(a, b) - 0.2) <= GRID.pixel_diagonal


points = st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                  min_size=1, max_size=12)


@given(points, points, points)
def test_hausdorff_metric_axioms(a, b, c):
    A, B, C = cloud(a), cloud(b), cloud(c)
    assert hausdorff_distance(A, A) == 0
    assert hausdorff_distance(A, B) == hausdorff_distance(B, A)
    assert hausdorff_distance(A, C) <= hausdorff_distance(A, B) + hausdorff_distance(B, C) + 1e-12


def test_count_holes_examples():
    assert count_holes(disk_mask(GRID, 0, 0.6)) == 0
    assert count_holes(annulus_mask(GRID, 0, 0.3, 0.6)) == 1
    two = annulus_mask(GRID, -0.5, 0.15, 0.35).mask | annulus_mask(GRID, 0.5, 0.15, 0.35).mask
    assert count_holes(CompactGridSet(grid=GRID, mask=two)) == 2
    with pytest.raises(UnsupportedRepresentation):
        count_holes(cloud([0]))


def test_diagonal_gap_is_not_a_hole_leak():
    # a ring closed only diagonally still encloses a hole: the set is 8-connected
    m = np.zeros((7, 7), bool)
    for r, c in [(1, 3), (2, 2), (3, 1), (4, 2), (5, 3), (4, 4), (3, 5), (2, 4)]:
        m[r, c] = True
    assert count_holes(CompactGridSet(grid=GridSpec(0j, 1, 7), mask=m)) == 1


def test_relative_hull_examples():
    ann = annulus_mask(GRID, 0, 0.3, 0.6)
    filled = relative_hull(ann, [])
    assert np.array_equal(filled.mask, ann.mask | disk_mask(GRID, 0, 0.3).mask)
    assert relative_hull(ann, [0j]) == ann


def test_relative_hull_two_holes_one_excluded():
    two = annulus_mask(GRID, -0.5, 0.15, 0.35).mask | annulus_mask(GRID, 0.5, 0.15, 0.35).mask
    k = CompactGridSet(grid=GRID, mask=two)
    out = relative_hull(k, [0.5 + 0j])
    assert count_holes(out) == 1
    labels, _ = label_holes(out)
    assert labels[GRID.index_of(0.5 + 0j)] > 0


def random_blob(rng, n):
    m = rng.random((n, n)) < 0.55
    # a couple of majority smoothing passes give holes of varied size
    for _ in range(2):
        s = sum(np.roll(np.roll(m, i, 0), j, 1) for i in (-1, 0, 1) for j in (-1, 0, 1))
        m = s >= 5
    return m


def test_relative_hull_matches_bfs_oracle():
    rng = np.random.default_rng(7)
    for trial in range(40):
        n = int(rng.integers(8, 24))
        m = random_blob(rng, n)
        grid = GridSpec(0j, 1.0, n)
        k = CompactGridSet(grid=grid, mask=m)
        holes = holes_bfs(m)
        assert count_holes(k) == len(holes)
        excl_pix = [tuple(rng.integers(0, n, 2)) for _ in range(3)]
        z = grid.centers()
        excl = [z[p] for p in excl_pix]
        assert np.array_equal(relative_hull(k, excl).mask, relative_hull_bfs(m, excl_pix))


@given(st.integers(0, 10_000))
def test_hull_properties(seed):
    rng = np.random.default_rng(seed)
    m = random_blob(rng, 16)
    if not m.any():
        return
    grid = GridSpec(0j, 1.0, 16)
    k = CompactGridSet(grid=grid, mask=m)
    z = grid.centers().ravel()
    e1 = list(rng.choice(z, 2))
    e2 = e1 + list(rng.choice(z, 3))
    h1, h2 = relative_hull(k, e1), relative_hull(k, e2)
    assert relative_hull(h1, e1) == h1
    assert np.all(h1.mask >= k.mask)
    assert np.all(h2.mask <= h1.mask)
    assert count_holes(relative_hull(k, [])) == 0


def test_pgm_and_csv_round_trip(tmp_path):
    m = annulus_mask(GRID, 0.1, 0.2, 0.5).mask
    data = mask_to_pgm(m)
    assert data.startswith(b"P5\n64 64\n255\n")
    assert np.array_equal(pgm_to_mask(data), m)
    pts = np.array([0.1 + 0.2j, -3e-17 + 1j])
    assert np.array_equal(csv_to_points(points_to_csv(pts)), pts)
    with pytest.raises(PreconditionError):
        csv_to_points("x,y\n1,2\n")
