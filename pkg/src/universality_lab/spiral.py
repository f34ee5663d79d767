"""Spiral cut, the invariant set V0 and the dense open set G0 in an attracting basin.

The cut is S0 = {delta * lam**t : t > 0} U {0}. Its full extension
{delta * lam**s : s real} is invariant under w -> lam * w, so a basin point z
lies in G0 exactly when Phi(z) avoids the full spiral and 0. Rendering uses
that collapsed test; :func:`in_g0_direct` walks the orbit instead and serves
as a cross-check.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .conjugacy import ConjugacyChart, _koenigs_local, koenigs_phi_array
from .errors import DegenerateFit, PreconditionError
from .geometry import CompactGridSet, GridSpec

_SAMPLES = 256
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 8192
THREADS_ENV = "UNIVERSALITY_LAB_THREADS"


def thread_count() -> int:
    """Worker cap from UNIVERSALITY_LAB_THREADS (0 or unset means one per CPU)."""
    try:
        n = int(os.environ.get(THREADS_ENV, "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class SpiralCut:
    delta: float
    lam: complex
    t_window: float = 40.0

    def __post_init__(self):
        lam = complex(self.lam)
        object.__setattr__(self, "lam", lam)
        if not 0 < abs(lam) < 1:
            raise PreconditionError("spiral needs 0 < |lam| < 1")
        if not self.delta > 0:
            raise PreconditionError("delta must be positive")

    @classmethod
    def for_chart(cls, chart: ConjugacyChart, delta: float = None) -> "SpiralCut":
        if delta is None:
            delta = 0.5 * chart.range_radius
        if delta > chart.range_radius:
            raise PreconditionError("delta exceeds the verified chart range")
        return cls(delta, chart.lam)

    def point(self, s):
        return self.delta * np.exp(np.asarray(s) * np.log(self.lam))


def spiral_distance(s: SpiralCut, w, extended: bool = False):
    """Distance from w to S0 (``extended=False``) or to the full spiral.

    Coarse sampling over a window of spiral parameters that provably holds
    the nearest point, then golden-section refinement around the best sample.
    """
    scalar = np.ndim(w) == 0
    ww = np.atleast_1d(np.asarray(w, dtype=complex)).ravel()
    out = np.empty(ww.shape, dtype=float)
    for start in range(0, ww.size, _CHUNK):
        out[start:start + _CHUNK] = _spiral_distance_chunk(s, ww[start:start + _CHUNK], extended)
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(w))


def _spiral_distance_chunk(s: SpiralCut, w: np.ndarray, extended: bool) -> np.ndarray:
    zero = w == 0
    if zero.any():
        # 0 lies on both the cut and the full spiral
        out = np.zeros(w.shape, dtype=float)
        if not zero.all():
            out[~zero] = _spiral_distance_chunk(s, w[~zero], extended)
        return out
    L = np.log(s.lam)
    a, b = L.real, L.imag
    r = np.abs(w)
    s_star = np.log(r / s.delta) / a

    if abs(b) < 1e-15:
        return _ray_distance(s, w, extended)

    # upper bound from the crossings of the ray through w near radius |w|
    turn = 2 * np.pi / abs(b)
    ang = np.angle(w)
    base = s_star + np.angle(np.exp(1j * (ang - b * s_star))) / b
    cand = base[:, None] + turn * np.arange(-2, 3)[None, :]
    if not extended:
        cand = np.where(cand > 0, cand, np.nan)
    d_cand = np.abs(w[:, None] - s.point(cand))
    d_ub = np.nanmin(np.where(np.isnan(cand), np.inf, d_cand), axis=1)
    if not extended:
        d_ub = np.minimum(d_ub, np.minimum(r, np.abs(w - s.delta)))

    lo_r = np.maximum(r - d_ub, 1e-300)
    hi_r = r + d_ub
    s_lo = np.log(hi_r / s.delta) / a
    s_hi = np.log(lo_r / s.delta) / a
    s_lo = np.maximum(s_lo, s_star - s.t_window)
    s_hi = np.minimum(s_hi, s_star + s.t_window)
    if not extended:
        s_lo = np.maximum(s_lo, 0.0)
    empty = s_hi <= s_lo
    s_hi = np.where(empty, s_lo + 1e-12, s_hi)

    grid = np.linspace(0.0, 1.0, _SAMPLES)[None, :]
    ss = s_lo[:, None] + (s_hi - s_lo)[:, None] * grid
    d = np.abs(w[:, None] - s.point(ss))
    i = np.argmin(d, axis=1)
    step = (s_hi - s_lo) / (_SAMPLES - 1)
    left = np.maximum(ss[np.arange(w.size), i] - step, s_lo)
    right = np.minimum(ss[np.arange(w.size), i] + step, s_hi)
    refined = _golden(lambda t: np.abs(w - s.point(t)), left, right)
    best = np.minimum(np.minimum(d.min(axis=1), refined), d_ub)
    return np.where(empty, d_ub, best)


def _golden(fun, lo, hi, iters: int = 60):
    lo, hi = lo.copy(), hi.copy()
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        go_left = f1 < f2
        hi = np.where(go_left, x2, hi)
        lo = np.where(go_left, lo, x1)
        x2n = np.where(go_left, x1, lo + _GOLDEN * (hi - lo))
        x1n = np.where(go_left, hi - _GOLDEN * (hi - lo), x2)
        f2 = np.where(go_left, f1, fun(x2n))
        f1 = np.where(go_left, fun(x1n), f2 * 0 + fun(x1n))
        x1, x2 = x1n, x2n
    return np.minimum(f1, f2)


def _ray_distance(s: SpiralCut, w: np.ndarray, extended: bool) -> np.ndarray:
    """Spiral of a positive real multiplier: the open ray (or segment) at angle 0."""
    x = w.real
    if extended:
        proj = np.clip(x, 0.0, None)
    else:
        proj = np.clip(x, 0.0, s.delta)
    return np.abs(w - proj)


def in_v0(s: SpiralCut, w, clearance: float):
    if clearance <= 0:
        raise PreconditionError("clearance must be positive")
    w = np.asarray(w, dtype=complex)
    res = (np.abs(w) < s.delta) & (spiral_distance(s, w, extended=False) > clearance)
    return bool(res) if res.ndim == 0 else res


def in_g0(chart: ConjugacyChart, s: SpiralCut, z, n_max: int = None, clearance: float = 1e-9):
    """Collapsed membership: Phi(z) keeps more than ``clearance`` away from the spiral and 0."""
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if n_max is not None and n_max != chart.basin_budget:
        chart = ConjugacyChart(**{**chart.__dict__, "basin_budget": int(n_max)})
    phi, ok = koenigs_phi_array(chart, zz)
    res = np.zeros(zz.shape, dtype=bool)
    if ok.any():
        v = phi[ok]
        res[ok] = (np.abs(v) > clearance) & (spiral_distance(s, v, extended=True) > clearance)
    return bool(res[0]) if scalar else res


def in_g0_direct(chart: ConjugacyChart, s: SpiralCut, z, n_max: int, clearance: float,
                 checks: int = 3):
    """Orbit test: some f^n(z) in the chart disk with phi(f^n(z)) in V0.

    The clearance shrinks by |lam|**n so both tests measure distances in the
    same Phi-units. A point is accepted only when its whole clearance disk
    sits inside the delta-disk, since the part of the spiral beyond the rim is
    invisible at that step; rim points are decided one step later. Each point
    is given ``checks`` admissible tries before it is dropped.
    """
    scalar = np.ndim(z) == 0
    w = np.atleast_1d(np.asarray(z, dtype=complex)).ravel().copy()
    res = np.zeros(w.shape, dtype=bool)
    tries = np.zeros(w.shape, dtype=np.int64)
    active = np.ones(w.shape, dtype=bool)
    shrink = abs(chart.lam)
    with np.errstate(all="ignore"):
        for n in range(n_max + 1):
            if n > 0:
                idx = np.flatnonzero(active)
                w[idx] = chart.f(w[idx])
                dead = ~np.isfinite(w[idx])
                active[idx[dead]] = False
            cand = active & (np.abs(w - chart.z0) < chart.local_radius)
            if cand.any():
                idx = np.flatnonzero(cand)
                v = _koenigs_local(chart, w[idx])
                c_n = clearance * shrink ** n
                good = in_v0(s, v, c_n) & (np.abs(v) + c_n < s.delta)
                admissible = np.abs(v) < s.delta
                res[idx[good]] = True
                tries[idx[admissible]] += 1
                active[idx[good]] = False
                active[idx[tries[idx] >= checks]] = False
            if not active.any():
                break
    res = res.reshape(np.shape(z)) if not scalar else res
    return bool(res[0]) if scalar else res


@dataclass(frozen=True)
class G0Render:
    g0: CompactGridSet
    basin: CompactGridSet

    @property
    def complement(self) -> CompactGridSet:
        return CompactGridSet(grid=self.g0.grid, mask=self.basin.mask & ~self.g0.mask)

    def stats(self) -> dict:
        basin = int(self.basin.mask.sum())
        comp = int(self.complement.mask.sum())
        return {"basin_pixels": basin, "complement_pixels": comp,
                "complement_fraction": comp / basin if basin else 0.0}


def render_g0_full(chart: ConjugacyChart, s: SpiralCut, grid: GridSpec, n_max: int = None,
                   clearance: float = None) -> G0Render:
    if clearance is None:
        clearance = grid.pixel_diagonal
    if n_max is not None:
        chart = ConjugacyChart(**{**chart.__dict__, "basin_budget": int(n_max)})
    z = grid.centers()
    g0 = np.zeros(z.shape, dtype=bool)
    ok = np.zeros(z.shape, dtype=bool)

    def band(rows):
        phi, inside = koenigs_phi_array(chart, z[rows])
        v = phi[inside]
        hit = np.zeros(inside.shape, dtype=bool)
        hit[inside] = (np.abs(v) > clearance) & (spiral_distance(s, v, extended=True) > clearance)
        g0[rows], ok[rows] = hit, inside

    # row bands are independent, so the result does not depend on the worker count
    bands = [slice(i, i + 16) for i in range(0, grid.resolution, 16)]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        list(pool.map(band, bands))
    return G0Render(CompactGridSet(grid=grid, mask=g0), CompactGridSet(grid=grid, mask=ok))


def render_g0(chart: ConjugacyChart, s: SpiralCut, grid: GridSpec, n_max: int = None,
              clearance: float = None) -> CompactGridSet:
    """Raster of G0 membership at pixel centres (clearance defaults to a pixel diagonal)."""
    return render_g0_full(chart, s, grid, n_max, clearance).g0


def default_scales(resolution: int) -> list:
    """Dyadic box sizes from 4 pixels up to resolution / 16.

    Smaller boxes resolve the rendering thickness of the curves rather than
    their geometry; larger ones are almost all occupied.
    """
    out = [4 * 2 ** k for k in range(16) if 4 * 2 ** k <= resolution // 16]
    if len(out) < 3:
        # small rasters: fall back to every dyadic size up to a quarter of the side
        out = [2 ** k for k in range(16) if 2 ** k <= max(resolution // 4, 4)]
    return out


def box_dimension(mask: CompactGridSet, scales) -> float:
    """Least-squares slope of log N(size) against log(1/size) over dyadic box sizes (pixels)."""
    m = mask.mask if isinstance(mask, CompactGridSet) else np.asarray(mask, dtype=bool)
    scales = [int(x) for x in scales]
    if len(scales) < 3:
        raise PreconditionError("box counting needs at least three scales")
    if any(x <= 0 or x & (x - 1) for x in scales):
        raise PreconditionError("box sizes must be powers of two")
    if not m.any():
        raise DegenerateFit("empty mask has no box dimension")
    counts = []
    h, w = m.shape
    for size in scales:
        ph, pw = -h % size, -w % size
        padded = np.pad(m, ((0, ph), (0, pw)))
        blocks = padded.reshape(padded.shape[0] // size, size, padded.shape[1] // size, size)
        counts.append(int(blocks.any(axis=(1, 3)).sum()))
    x = np.log(1.0 / np.asarray(scales, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)
