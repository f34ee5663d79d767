"""Rational approximation with prescribed poles and universal schedules.

A :class:`LaurentRational` is a polynomial plus principal parts at finitely
many poles. Fitting is weighted least squares in a rescaled basis: monomials
in (z - center) / scale and powers of rho_p / (z - p) for each pole p, where
rho_p is the distance from p to the nearest sample. Every basis function is
then bounded by one on the samples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .conjugacy import ConjugacyChart
from .dynamics import (Collision, HolomorphicMap, find_fixed_point,
                       finite_injectivity_check, iterate_array)
from .errors import (ApproximationFailed, IllConditioned, InjectivityViolated, NoDisjointN,
                     PreconditionError)
from .geometry import CompactGridSet, count_holes, relative_hull

COND_LIMIT = 1e14
FALLBACK_RIDGE = 1e-12
BASIS_CAP = 256
DEGREE_LEVELS = (2, 4, 8, 16, 32, 64, 128)
TRAIN_CAP = 600


def _pair(z: complex) -> list:
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True, eq=False)
class LaurentRational:
    """R(z) = sum_k c_k zeta^k + sum_p sum_j c_{p,j} (rho_p / (z - p))^j, zeta = (z - center) / scale.

    ``coefficients`` lists the polynomial part in ascending order, then for
    each pole its orders from ``max_order`` down to 1.
    """

    poly_degree: int
    poles: Tuple[Tuple[complex, int], ...]
    coefficients: np.ndarray
    center: complex = 0j
    scale: float = 1.0
    pole_scales: Tuple[float, ...] = ()

    def __post_init__(self):
        poles = tuple((complex(p), int(k)) for p, k in self.poles)
        object.__setattr__(self, "poles", poles)
        scales = tuple(float(r) for r in self.pole_scales) or tuple(1.0 for _ in poles)
        object.__setattr__(self, "pole_scales", scales)
        c = np.array(self.coefficients, dtype=complex).ravel()
        if c.size != self.n_terms:
            raise PreconditionError(f"expected {self.n_terms} coefficients, got {c.size}")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "center", complex(self.center))
        if len(scales) != len(poles) or not self.scale > 0:
            raise PreconditionError("invalid basis scaling")

    @property
    def n_terms(self) -> int:
        return self.poly_degree + 1 + sum(k for _, k in self.poles)

    @classmethod
    def constant(cls, value: complex = 0j) -> "LaurentRational":
        return cls(0, (), [value])

    def basis(self, z) -> np.ndarray:
        return _basis(np.asarray(z, dtype=complex), self.poly_degree, self.poles,
                      self.center, self.scale, self.pole_scales)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        for p, _ in self.poles:
            if np.any(z == p):
                raise PreconditionError("evaluation at a pole")
        out = self.basis(z.ravel()) @ self.coefficients
        return complex(out[0]) if z.ndim == 0 else out.reshape(z.shape)

    def to_dict(self) -> dict:
        return {
            "poly_degree": self.poly_degree,
            "center": _pair(self.center),
            "scale": self.scale,
            "poles": [{"at": _pair(p), "order": k, "scale": r}
                      for (p, k), r in zip(self.poles, self.pole_scales)],
            "coefficients": [_pair(c) for c in self.coefficients],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LaurentRational":
        return cls(int(d["poly_degree"]),
                   tuple((complex(*q["at"]), int(q["order"])) for q in d["poles"]),
                   [complex(*c) for c in d["coefficients"]],
                   complex(*d["center"]), float(d["scale"]),
                   tuple(float(q["scale"]) for q in d["poles"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LaurentRational":
        return cls.from_dict(json.loads(text))


def _basis(z, degree, poles, center, scale, pole_scales) -> np.ndarray:
    zeta = (z - center) / scale
    cols = [np.ones_like(zeta)]
    for _ in range(degree):
        cols.append(cols[-1] * zeta)
    for (p, k), rho in zip(poles, pole_scales):
        u = rho / (z - p)
        pw = [u]
        for _ in range(k - 1):
            pw.append(pw[-1] * u)
        cols.extend(reversed(pw))
    return np.column_stack(cols)


def _fit_arrays(z, t, pole_spec, poly_degree: int, ridge: float = 0.0, weights=None,
                check_condition: bool = True):
    z = np.asarray(z, dtype=complex).ravel()
    t = np.asarray(t, dtype=complex).ravel()
    if z.size == 0 or z.size != t.size:
        raise PreconditionError("need matching, nonempty sample and target arrays")
    if poly_degree < 0 or ridge < 0:
        raise PreconditionError("poly_degree and ridge must be nonnegative")
    poles = tuple((complex(p), int(k)) for p, k in pole_spec)
    for p, k in poles:
        if k < 1:
            raise PreconditionError("pole orders must be positive")
        if np.any(z == p):
            raise PreconditionError("sample located at a pole")
    lo = complex(z.real.min(), z.imag.min())
    hi = complex(z.real.max(), z.imag.max())
    center = (lo + hi) / 2
    scale = float(np.abs(z - center).max()) or 1.0
    pole_scales = tuple(float(np.abs(z - p).min()) for p, _ in poles)
    A = _basis(z, poly_degree, poles, center, scale, pole_scales)
    sw = np.ones(z.size) if weights is None else np.sqrt(np.asarray(weights, dtype=float))
    U, s, Vh = np.linalg.svd(A * sw[:, None], full_matrices=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if ridge == 0 and check_condition and (cond > COND_LIMIT or A.shape[1] > A.shape[0]):
        raise IllConditioned(f"least-squares condition {cond:.3g} exceeds {COND_LIMIT:g}",
                             condition=float(cond))
    rhs = U.conj().T @ (t * sw)
    if ridge == 0:
        filt = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    else:
        filt = s / (s ** 2 + ridge)
    coef = Vh.conj().T @ (filt * rhs)
    r = LaurentRational(poly_degree, poles, coef, center, scale, pole_scales)
    return r, float(np.abs(A @ coef - t).max())


def fit_rational(samples, pole_spec: Sequence[Tuple[complex, int]] = (), poly_degree: int = 0,
                 ridge: float = 0.0, weights=None):
    """Least-squares rational fit; returns ``(R, max_error)`` over the samples.

    ``samples`` is a sequence of ``(z, target)`` pairs. Raises IllConditioned
    when ``ridge`` is zero and the rescaled system has condition above 1e14.
    """
    pairs = list(samples)
    if not pairs:
        raise PreconditionError("need at least one sample")
    z = np.array([complex(a) for a, _ in pairs])
    t = np.array([complex(b) for _, b in pairs])
    return _fit_arrays(z, t, pole_spec, poly_degree, ridge, weights)


def _robust_fit(z, t, pole_spec, degree, weights):
    try:
        return _fit_arrays(z, t, pole_spec, degree, 0.0, weights)
    except IllConditioned:
        return _fit_arrays(z, t, pole_spec, degree, FALLBACK_RIDGE, weights)


# --- samples of compacts -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampledCompact:
    """Training and 4x-denser validation samples of a compact set."""

    train: np.ndarray
    validate: np.ndarray


def sample_compact(k: CompactGridSet, train_cap: int = TRAIN_CAP) -> SampledCompact:
    """Boundary plus thinned interior for training; 2x2 sub-pixels (rasters) or a
    4x refined closed polyline (point clouds) for validation."""
    if k.is_empty():
        raise PreconditionError("compact set must be nonempty")
    if not k.is_raster:
        p = np.asarray(k.points)
        if p.size == 1:
            return SampledCompact(p.copy(), p.copy())
        nxt = np.roll(p, -1)
        frac = np.arange(4) / 4.0
        dense = (p[:, None] + (nxt - p)[:, None] * frac[None, :]).ravel()
        return SampledCompact(p.copy(), dense)
    centers = k.grid.centers()
    edge = centers[k.boundary_mask()]
    inner = centers[k.mask & ~k.boundary_mask()]
    room = max(train_cap - edge.size, 0)
    if inner.size > room:
        inner = inner[:: int(np.ceil(inner.size / max(room, 1)))] if room else inner[:0]
    h = k.grid.pixel_size / 4
    sub = np.array([-h + 1j * h, h + 1j * h, -h - 1j * h, h - 1j * h])
    dense = (centers[k.mask][:, None] + sub[None, :]).ravel()
    return SampledCompact(np.concatenate([edge, inner]), dense)


def _diameter(pts: np.ndarray) -> float:
    if pts.size < 2:
        return 0.0
    return float(np.hypot(np.ptp(pts.real), np.ptp(pts.imag)))


def _forward(f: HolomorphicMap, z: np.ndarray, n: int) -> np.ndarray:
    w, escaped = iterate_array(f, z, n)
    if escaped.any():
        raise PreconditionError("samples escape under iteration")
    return w


def _check_orbit_injective(w: np.ndarray, z0: complex, n: int, tol: float = 1e-10):
    """Reject sample sets that f^n glues together (the limit could not separate them)."""
    if w.size < 2:
        return
    scale = min(1.0, float(np.abs(w - z0).max()))
    tree = cKDTree(np.column_stack([w.real, w.imag]))
    for i, j in sorted(tree.query_pairs(tol * scale)):
        a, b = w[i], w[j]
        if abs(a - b) < tol * min(1.0, max(abs(a - z0), abs(b - z0))):
            raise InjectivityViolated("two samples share an orbit", pair=[int(i), int(j)], n=int(n))


# --- transitivity ------------------------------------------------------------------

@dataclass
class KeepSet:
    """Where g is pinned: samples, validation samples and the values to preserve."""

    train: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    validate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    @classmethod
    def from_compact(cls, k: Optional[CompactGridSet]) -> "KeepSet":
        if k is None or k.is_empty():
            return cls()
        s = sample_compact(k)
        return cls(s.train, s.validate)

    def extend(self, train: np.ndarray, validate: np.ndarray) -> "KeepSet":
        return KeepSet(np.concatenate([self.train, train]),
                       np.concatenate([self.validate, validate]))


@dataclass(frozen=True)
class StepResult:
    n: int
    r: LaurentRational
    keep_error: float
    target_error: float
    degree: int


def _first_disjoint(f, l_train, keep: KeepSet, margin, n_min, n_max):
    tree = cKDTree(np.column_stack([keep.train.real, keep.train.imag])) if keep.train.size else None
    w = _forward(f, l_train, n_min - 1) if n_min > 1 else l_train.copy()
    for n in range(n_min, n_max + 1):
        w = _forward(f, w, 1)
        if tree is None or tree.query(np.column_stack([w.real, w.imag]))[0].min() > margin:
            return n
    return None


def _step(f: HolomorphicMap, chart: ConjugacyChart, punctures: Sequence[complex],
          g_current: LaurentRational, keep: KeepSet, h: Callable, l_set: SampledCompact,
          target_tol: float, keep_tol: float, n_min: int, n_max: int,
          margin: Optional[float], pixel: float) -> StepResult:
    z0 = chart.z0
    if np.any(np.abs(l_set.train - z0) >= chart.local_radius) or \
            np.any(np.abs(l_set.validate - z0) >= chart.local_radius):
        raise PreconditionError("target compact must lie inside the chart disk")
    if margin is None:
        margin = pixel + 0.1 * _diameter(keep.train)
    n = _first_disjoint(f, l_set.train, keep, margin, n_min, n_max)
    if n is None:
        raise NoDisjointN(f"no N <= {n_max} moves L off the keep-set", n_max=n_max)
    w_train = _forward(f, l_set.train, n)
    w_val = _forward(f, l_set.validate, n)
    _check_orbit_injective(w_val, z0, n)
    h_train = np.asarray(h(l_set.train), dtype=complex)
    h_val = np.asarray(h(l_set.validate), dtype=complex)
    g_keep = g_current(keep.train) if keep.train.size else np.zeros(0, dtype=complex)
    g_keep_val = g_current(keep.validate) if keep.validate.size else np.zeros(0, dtype=complex)

    z = np.concatenate([keep.train, w_train])
    t = np.concatenate([g_keep, h_train])
    wts = np.concatenate([np.full(keep.train.size, keep_tol ** -2),
                          np.full(w_train.size, target_tol ** -2)])
    best = np.inf
    for d in DEGREE_LEVELS:
        spec = [(p, d) for p in punctures]
        if d + 1 + d * len(spec) > BASIS_CAP:
            break
        r, _ = _robust_fit(z, t, spec, d, wts)
        e_keep = float(np.abs(r(keep.validate) - g_keep_val).max()) if keep.validate.size else 0.0
        e_keep = max(e_keep, float(np.abs(r(keep.train) - g_keep).max()) if keep.train.size else 0.0)
        e_tgt = max(float(np.abs(r(w_val) - h_val).max()), float(np.abs(r(w_train) - h_train).max()))
        if e_keep <= keep_tol and e_tgt <= target_tol:
            return StepResult(n, r, e_keep, e_tgt, d)
        best = min(best, max(e_keep / keep_tol, e_tgt / target_tol))
    raise ApproximationFailed("no fit met both tolerances below the degree cap",
                              best_error=float(best), n=int(n))


def _check_keep_convex(k: Optional[CompactGridSet], punctures):
    if k is None or k.is_empty() or not k.is_raster:
        return
    if not np.array_equal(relative_hull(k, punctures).mask, k.mask):
        raise PreconditionError("keep-set has a hole free of punctures; apply relative_hull first")


def _check_hole_free(l_target: CompactGridSet):
    if l_target.is_raster and count_holes(l_target) != 0:
        raise PreconditionError("target compact must have no holes")


def transitivity_step(f: HolomorphicMap, chart: ConjugacyChart, omega_punctures: Sequence[complex],
                      g_current: LaurentRational, k_keep: Optional[CompactGridSet], h_target: Callable,
                      l_target: CompactGridSet, eps: float, n_max: int = 60,
                      margin: Optional[float] = None) -> Tuple[int, LaurentRational]:
    """Smallest N moving L off K, and R with |R - g| < eps on K and |R o f^N - h| < eps on L.

    Both inequalities are checked on 4x-denser validation samples. Pixel-based
    margins use the grid of whichever set is a raster.
    """
    _check_hole_free(l_target)
    _check_keep_convex(k_keep, omega_punctures)
    pixel = next((s.grid.pixel_diagonal for s in (k_keep, l_target) if s is not None and s.is_raster), 0.0)
    res = _step(f, chart, omega_punctures, g_current, KeepSet.from_compact(k_keep), h_target,
                sample_compact(l_target), eps, eps, 1, n_max, margin, pixel)
    return res.n, res.r


# --- schedules -------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleTarget:
    h: Callable
    l_set: CompactGridSet
    eps: float
    label: str = ""


@dataclass
class UniversalSchedule:
    targets: list
    result_g: LaurentRational
    indices: List[int]
    report: List[float]
    degrees: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "errors": list(self.report),
                "degrees": list(self.degrees), "eps": [t.eps for t in self.targets],
                "labels": [t.label for t in self.targets], "g": self.result_g.to_dict()}


def validate_schedule(f: HolomorphicMap, g: LaurentRational, indices: Sequence[int],
                      targets: Sequence[ScheduleTarget]) -> List[float]:
    """Sup error of g o f^n_j - h_j over the validation samples of each L_j."""
    errs = []
    for n, tgt in zip(indices, targets):
        s = sample_compact(tgt.l_set)
        pts = np.concatenate([s.train, s.validate])
        errs.append(float(np.abs(g(_forward(f, pts, n)) - np.asarray(tgt.h(pts))).max()))
    return errs


def build_universal_schedule(f: HolomorphicMap, chart: ConjugacyChart,
                             omega_punctures: Sequence[complex], targets: Sequence[ScheduleTarget],
                             n_max: int = 60) -> UniversalSchedule:
    """Chain transitivity steps so one g has g o f^{n_j} close to h_j for every j.

    Step j must hit h_j within eps_j / 2; it may move g on the earlier images
    by at most min_i eps_i / 2^(j-i+1), so the drift each earlier target
    accumulates stays below eps_i / 2.
    """
    targets = list(targets)
    g = LaurentRational.constant(0j)
    keep = KeepSet()
    indices, degrees = [], []
    for t in targets:
        _check_hole_free(t.l_set)
        if not t.eps > 0:
            raise PreconditionError("tolerances must be positive")
    for j, tgt in enumerate(targets):
        keep_tol = min((targets[i].eps / 2 ** (j - i + 1) for i in range(j)), default=np.inf)
        l_set = sample_compact(tgt.l_set)
        pixel = tgt.l_set.grid.pixel_diagonal if tgt.l_set.is_raster else 0.0
        n_min = indices[-1] + 1 if indices else 1
        try:
            res = _step(f, chart, omega_punctures, g, keep, tgt.h, l_set, tgt.eps / 2,
                        keep_tol, n_min, n_max, None, pixel)
        except (ApproximationFailed, NoDisjointN, PreconditionError, InjectivityViolated) as exc:
            exc.details["target"] = j
            raise
        g = res.r
        indices.append(res.n)
        degrees.append(res.degree)
        keep = keep.extend(_forward(f, l_set.train, res.n), _forward(f, l_set.validate, res.n))
    errs = validate_schedule(f, g, indices, targets)
    for j, (e, tgt) in enumerate(zip(errs, targets)):
        if e > tgt.eps:
            raise ApproximationFailed("final validation failed", best_error=e, target=j)
    return UniversalSchedule(targets, g, indices, errs, degrees)


# --- finite sets -----------------------------------------------------------------------------

def finite_set_universal(f: HolomorphicMap, e: Sequence[complex], omega_punctures: Sequence[complex],
                         value_targets: Sequence[Sequence[complex]], eps: float,
                         n_budget: int = 64, z0: Optional[complex] = None,
                         separation: float = 1e-6) -> UniversalSchedule:
    """One g with |g(f^{N_t}(e_i)) - v_{t,i}| <= eps for every target vector v_t.

    N_t is the first index after N_{t-1} whose orbit points are mutually
    separated and away from the points already pinned; g interpolates all
    pinned values.
    """
    pts = np.array([complex(z) for z in e])
    if pts.size == 0:
        raise PreconditionError("E must be nonempty")
    vecs = [np.asarray(v, dtype=complex).ravel() for v in value_targets]
    if any(v.size != pts.size for v in vecs):
        raise PreconditionError("each target vector needs one value per point of E")
    if z0 is None:
        w, esc = iterate_array(f, pts[:1], 200)
        if esc.any():
            raise PreconditionError("E is not in an attracting basin")
        z0 = find_fixed_point(f, complex(w[0]))
    check = finite_injectivity_check(f, pts, n_budget, center=z0)
    if isinstance(check, Collision):
        raise InjectivityViolated(f"orbits of points {check.i} and {check.j} merge at n={check.n}",
                                  pair=[check.i, check.j], n=check.n)
    pinned = np.zeros(0, dtype=complex)
    values = np.zeros(0, dtype=complex)
    indices = []
    n = 0
    w = pts.copy()
    for v in vecs:
        while True:
            n += 1
            if n > n_budget:
                raise ApproximationFailed("ran out of iterates with separated orbit points", n=n)
            w = _forward(f, w, 1)
            allp = np.concatenate([pinned, w])
            size = max(float(np.abs(allp - z0).max()), 1e-300)
            gaps = np.abs(allp[:, None] - allp[None, :])
            np.fill_diagonal(gaps, np.inf)
            if np.all(gaps > separation * size) and not np.any(w == z0):
                break
        indices.append(n)
        pinned = np.concatenate([pinned, w])
        values = np.concatenate([values, v])
    g, err = _interpolate(pinned, values, omega_punctures, eps)
    errs = []
    for n_t, v in zip(indices, vecs):
        errs.append(float(np.abs(g(_forward(f, pts, n_t)) - v).max()))
    if max(errs) > eps:
        raise ApproximationFailed("interpolation missed a target", best_error=max(errs))
    targets = [ScheduleTarget(None, CompactGridSet.from_points(pts), eps, f"vector{t}")
               for t in range(len(vecs))]
    return UniversalSchedule(targets, g, indices, errs, [g.poly_degree] * len(vecs))


def _interpolate(z, t, punctures, eps):
    """Exact interpolation, first by a polynomial, then with pole terms shared in."""
    m = z.size
    tries = [((), m - 1)]
    usable = [p for p in punctures if not np.any(z == p)]
    for k in range(1, m):
        if usable and k * len(usable) < m:
            tries.append((tuple((p, k) for p in usable), m - 1 - k * len(usable)))
    best = None
    for spec, deg in tries:
        r, err = _fit_arrays(z, t, spec, deg, 0.0, None, check_condition=False)
        if err <= eps:
            return r, err
        if best is None or err < best[1]:
            best = (r, err)
    raise ApproximationFailed("interpolation is too ill-conditioned", best_error=best[1])
