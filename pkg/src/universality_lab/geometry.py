"""Planar compact sets as rasters or point clouds.

Rasters are sampled at pixel centres. Row 0 is the top of the image (largest
imaginary part), column 0 the left edge, so a mask can be written straight to
a PGM file and viewed the right way up.

Connectivity: the set itself is 8-connected, its complement 4-connected.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import PreconditionError, UnsupportedRepresentation

# 4-connected structuring element for labelling the complement
_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class GridSpec:
    center: complex
    half_width: float
    resolution: int

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not self.half_width > 0:
            raise PreconditionError("half_width must be positive")
        if int(self.resolution) < 2:
            raise PreconditionError("resolution must be at least 2")
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def pixel_size(self) -> float:
        return 2.0 * self.half_width / self.resolution

    @property
    def pixel_diagonal(self) -> float:
        return self.pixel_size * np.sqrt(2.0)

    def axes(self):
        """Real-axis and imaginary-axis pixel-centre coordinates (imag descending)."""
        h = self.pixel_size
        k = np.arange(self.resolution) + 0.5
        xs = self.center.real - self.half_width + k * h
        ys = self.center.imag + self.half_width - k * h
        return xs, ys

    def centers(self) -> np.ndarray:
        xs, ys = self.axes()
        return xs[None, :] + 1j * ys[:, None]

    def index_of(self, z: complex) -> Optional[tuple]:
        """Pixel (row, col) containing z, or None when z is outside the grid."""
        h = self.pixel_size
        col = int(np.floor((z.real - (self.center.real - self.half_width)) / h))
        row = int(np.floor(((self.center.imag + self.half_width) - z.imag) / h))
        if 0 <= row < self.resolution and 0 <= col < self.resolution:
            return row, col
        return None

    def upsampled(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.center, self.half_width, self.resolution * factor)


@dataclass(frozen=True, eq=False)
class CompactGridSet:
    """A nonempty compact set, either a raster mask over a grid or a point cloud."""

    grid: Optional[GridSpec] = None
    mask: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.mask is None) == (self.points is None):
            raise PreconditionError("exactly one of mask / points must be given")
        if self.mask is not None:
            if self.grid is None:
                raise PreconditionError("a raster needs its grid")
            m = np.asarray(self.mask, dtype=bool)
            n = self.grid.resolution
            if m.shape != (n, n):
                raise PreconditionError(f"mask shape {m.shape} does not match grid {n}x{n}")
            m = m.copy()
            m.flags.writeable = False
            object.__setattr__(self, "mask", m)
        else:
            p = np.atleast_1d(np.asarray(self.points, dtype=complex)).ravel().copy()
            if not np.all(np.isfinite(p)):
                raise PreconditionError("point cloud contains non-finite entries")
            p.flags.writeable = False
            object.__setattr__(self, "points", p)

    @classmethod
    def from_predicate(cls, grid: GridSpec, predicate: Callable[[np.ndarray], np.ndarray]):
        return cls(grid=grid, mask=np.asarray(predicate(grid.centers()), dtype=bool))

    @classmethod
    def from_points(cls, points: Iterable[complex]):
        return cls(points=np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                                     dtype=complex))

    @property
    def is_raster(self) -> bool:
        return self.mask is not None

    def is_empty(self) -> bool:
        if self.is_raster:
            return not self.mask.any()
        return self.points.size == 0

    def sample_points(self) -> np.ndarray:
        """All member points: pixel centres for rasters, the cloud otherwise."""
        if self.is_raster:
            return self.grid.centers()[self.mask]
        return np.asarray(self.points)

    def boundary_mask(self) -> np.ndarray:
        """Set pixels with at least one 4-neighbour outside the set."""
        _require_raster(self)
        interior = ndimage.binary_erosion(self.mask, structure=_FOUR, border_value=0)
        return self.mask & ~interior

    def __eq__(self, other):
        if not isinstance(other, CompactGridSet):
            return NotImplemented
        if self.is_raster != other.is_raster:
            return False
        if self.is_raster:
            return self.grid == other.grid and np.array_equal(self.mask, other.mask)
        return np.array_equal(np.sort_complex(self.points), np.sort_complex(other.points))

    __hash__ = None


def _require_raster(k: CompactGridSet):
    if not k.is_raster:
        raise UnsupportedRepresentation("operation needs a raster representation")


def _require_nonempty(k: CompactGridSet):
    if k.is_empty():
        raise PreconditionError("compact set must be nonempty")


def hausdorff_distance(a: CompactGridSet, b: CompactGridSet) -> float:
    """Symmetric Hausdorff distance.

    Point clouds are compared exactly; rasters through their pixel centres, so
    the raster value is within one pixel diagonal of the true distance.
    """
    _require_nonempty(a)
    _require_nonempty(b)
    if a.is_raster != b.is_raster:
        raise UnsupportedRepresentation("both sets must use the same representation")
    if a.is_raster and not np.isclose(a.grid.pixel_size, b.grid.pixel_size):
        raise UnsupportedRepresentation("rasters must share a pixel size")
    pa = a.sample_points()
    pb = b.sample_points()
    xa = np.column_stack([pa.real, pa.imag])
    xb = np.column_stack([pb.real, pb.imag])
    d_ab = cKDTree(xb).query(xa)[0].max()
    d_ba = cKDTree(xa).query(xb)[0].max()
    return float(max(d_ab, d_ba))


def label_holes(k: CompactGridSet):
    """Label bounded components of the complement.

    Returns ``(labels, count)`` with labels on the original raster shape;
    label 0 marks the set itself and the unbounded component.
    """
    _require_raster(k)
    # pad so the unbounded component is a single frame-touching component
    padded = np.pad(~k.mask, 1, constant_values=True)
    labels, count = ndimage.label(padded, structure=_FOUR)
    outer = labels[0, 0]
    labels[labels == outer] = 0
    labels = labels[1:-1, 1:-1]
    present = np.unique(labels)
    present = present[present != 0]
    # renumber to 1..count
    remap = np.zeros(count + 1, dtype=np.int64)
    remap[present] = np.arange(1, present.size + 1)
    return remap[labels], int(present.size)


def count_holes(k: CompactGridSet) -> int:
    return label_holes(k)[1]


def relative_hull(k: CompactGridSet, omega_excluded: Sequence[complex] = ()) -> CompactGridSet:
    """Fill every hole of k that contains none of the excluded points.

    With no exclusions this is the polynomially convex hull (all holes filled).
    Excluded points outside the grid cannot lie in a hole and are ignored.
    """
    labels, count = label_holes(k)
    if count == 0:
        return k
    keep_open = set()
    for z in omega_excluded:
        idx = k.grid.index_of(complex(z))
        if idx is not None and labels[idx] > 0:
            keep_open.add(int(labels[idx]))
    fill = (labels > 0) & ~np.isin(labels, sorted(keep_open))
    return CompactGridSet(grid=k.grid, mask=k.mask | fill)


def disk_mask(grid: GridSpec, center: complex, radius: float) -> CompactGridSet:
    return CompactGridSet.from_predicate(grid, lambda z: np.abs(z - center) <= radius)


def annulus_mask(grid: GridSpec, center: complex, r_in: float, r_out: float) -> CompactGridSet:
    return CompactGridSet.from_predicate(
        grid, lambda z: (np.abs(z - center) >= r_in) & (np.abs(z - center) <= r_out))


def circle_points(center: complex, radius: float, samples: int) -> np.ndarray:
    t = 2.0 * np.pi * np.arange(samples) / samples
    return center + radius * np.exp(1j * t)


# --- serialization -------------------------------------------------------

def mask_to_pgm(mask: np.ndarray) -> bytes:
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + (m.astype(np.uint8) * 255).tobytes()


def pgm_to_mask(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise PreconditionError("not a binary PGM (P5) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise PreconditionError("only 8-bit PGM supported")
    raw = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    return raw.reshape(h, w) > maxval // 2


def points_to_csv(points: Iterable[complex]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["re", "im"])
    for z in points:
        writer.writerow([repr(float(z.real)), repr(float(z.imag))])
    return buf.getvalue()


def csv_to_points(text: str) -> np.ndarray:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or reader.fieldnames[:2] != ["re", "im"]:
        raise PreconditionError("point CSV must have header 're,im'")
    return np.array([complex(float(r["re"]), float(r["im"])) for r in reader], dtype=complex)
