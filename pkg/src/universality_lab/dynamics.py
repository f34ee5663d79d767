"""Holomorphic symbols, their iteration and fixed-point data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import mpmath
import numpy as np
from numpy.polynomial import polynomial as P
from scipy.spatial import cKDTree

from .errors import NonConvergence, NotAFixedPoint, PoleHit, PreconditionError
from .geometry import CompactGridSet, GridSpec

OVERFLOW_GUARD = 1e150
FIXED_POINT_TOL = 1e-12
CLASSIFY_TOL = 1e-9
COLLISION_TOL = 1e-10

KINDS = ("polynomial", "rational", "blaschke")
CLASSES = ("superattracting", "attracting", "neutral", "irrationally_indifferent", "repelling")


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nz = np.flatnonzero(c != 0)
    return c[: nz[-1] + 1] if nz.size else np.zeros(1, dtype=complex)


@dataclass(frozen=True, eq=False)
class HolomorphicMap:
    """A polynomial, rational map or the degree-2 Blaschke product z(z-a)/(1-conj(a)z).

    Coefficients are stored in ascending powers; polynomials carry the
    denominator ``[1]``.
    """

    kind: str
    numerator: np.ndarray
    denominator: np.ndarray
    alpha: Optional[complex] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown map kind {self.kind!r}")
        num = _trim(self.numerator)
        den = _trim(self.denominator)
        if not np.any(den != 0):
            raise PreconditionError("denominator is identically zero")
        for arr in (num, den):
            arr.flags.writeable = False
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    # construction -------------------------------------------------------
    @classmethod
    def polynomial(cls, coeffs: Sequence[complex]) -> "HolomorphicMap":
        return cls("polynomial", np.asarray(coeffs, dtype=complex), np.array([1.0 + 0j]))

    @classmethod
    def rational(cls, num: Sequence[complex], den: Sequence[complex]) -> "HolomorphicMap":
        return cls("rational", np.asarray(num, dtype=complex), np.asarray(den, dtype=complex))

    @classmethod
    def blaschke(cls, alpha: complex = 0.6) -> "HolomorphicMap":
        alpha = complex(alpha)
        if abs(alpha) >= 1:
            raise PreconditionError("Blaschke parameter must satisfy |alpha| < 1")
        return cls("blaschke", np.array([0, -alpha, 1], dtype=complex),
                   np.array([1, -alpha.conjugate()], dtype=complex), alpha)

    @classmethod
    def from_config(cls, cfg: dict) -> "HolomorphicMap":
        kind = cfg.get("kind")
        if kind == "blaschke":
            a = cfg.get("alpha", [0.6, 0.0])
            return cls.blaschke(_as_complex(a))
        if kind == "polynomial":
            return cls.polynomial([_as_complex(c) for c in cfg["coeffs"]])
        if kind == "rational":
            return cls.rational([_as_complex(c) for c in cfg["num"]],
                                [_as_complex(c) for c in cfg["den"]])
        raise PreconditionError(f"unknown map kind {kind!r}")

    def to_config(self) -> dict:
        pair = lambda c: [float(c.real), float(c.imag)]
        if self.kind == "blaschke":
            return {"kind": "blaschke", "alpha": pair(self.alpha)}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": [pair(c) for c in self.numerator]}
        return {"kind": "rational", "num": [pair(c) for c in self.numerator],
                "den": [pair(c) for c in self.denominator]}

    # basic properties ---------------------------------------------------
    @property
    def degree(self) -> int:
        return max(len(self.numerator), len(self.denominator)) - 1

    @property
    def is_polynomial(self) -> bool:
        return len(self.denominator) == 1

    def require_dynamical(self):
        """Charts need a genuine symbol, not a constant or affine map."""
        if self.degree < 2:
            raise PreconditionError("symbol must have degree at least 2")

    # evaluation -----------------------------------------------------------
    def __call__(self, z):
        num = P.polyval(z, self.numerator)
        if self.is_polynomial:
            return num / self.denominator[0]
        return num / P.polyval(z, self.denominator)

    def derivative(self, z):
        dn = P.polyder(self.numerator) if len(self.numerator) > 1 else np.zeros(1)
        if self.is_polynomial:
            return P.polyval(z, dn) / self.denominator[0]
        dd = P.polyder(self.denominator) if len(self.denominator) > 1 else np.zeros(1)
        q = P.polyval(z, self.denominator)
        return (P.polyval(z, dn) * q - P.polyval(z, self.numerator) * P.polyval(z, dd)) / q ** 2

    def taylor(self, z0: complex, order: int) -> np.ndarray:
        """Coefficients c_0..c_order of f(z0 + t) = sum c_k t^k."""
        num = _shift(self.numerator, z0)
        den = _shift(self.denominator, z0)
        if abs(den[0]) == 0:
            raise PoleHit("expansion point is a pole", step=0)
        return series_div(num, den, order)

    def compose_power(self, n: int):
        """Numerator and denominator coefficient arrays of the n-th iterate."""
        p, q = np.array([0, 1], dtype=complex), np.array([1], dtype=complex)
        d = self.degree
        for _ in range(n):
            num = np.zeros(1, dtype=complex)
            den = np.zeros(1, dtype=complex)
            p_pows = [np.array([1], dtype=complex)]
            q_pows = [np.array([1], dtype=complex)]
            for _k in range(d):
                p_pows.append(P.polymul(p_pows[-1], p))
                q_pows.append(P.polymul(q_pows[-1], q))
            for k in range(d + 1):
                term = P.polymul(p_pows[k], q_pows[d - k])
                if k < len(self.numerator):
                    num = P.polyadd(num, self.numerator[k] * term)
                if k < len(self.denominator):
                    den = P.polyadd(den, self.denominator[k] * term)
            p, q = _trim(num), _trim(den)
        return p, q


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]) if len(v) > 1 else 0.0)
    return complex(v)


def _shift(c: np.ndarray, z0: complex) -> np.ndarray:
    """Coefficients of p(z0 + t) in t."""
    out = np.zeros(len(c), dtype=complex)
    basis = np.array([1], dtype=complex)
    lin = np.array([z0, 1], dtype=complex)
    for k, ck in enumerate(c):
        out[: len(basis)] += ck * basis
        basis = P.polymul(basis, lin)
    return out


def series_div(num: np.ndarray, den: np.ndarray, order: int) -> np.ndarray:
    """Power series quotient num/den truncated after t^order (den[0] != 0)."""
    a = np.zeros(order + 1, dtype=complex)
    b = np.zeros(order + 1, dtype=complex)
    a[: min(len(num), order + 1)] = num[: order + 1]
    b[: min(len(den), order + 1)] = den[: order + 1]
    out = np.zeros(order + 1, dtype=complex)
    for k in range(order + 1):
        out[k] = (a[k] - np.dot(out[:k], b[k:0:-1])) / b[0]
    return out


# --- iteration -------------------------------------------------------------

@dataclass(frozen=True)
class Escaped:
    """Orbit left the overflow guard at the given step."""

    step: int


def iterate(f: HolomorphicMap, z: complex, n: int) -> Union[complex, Escaped]:
    if n < 0:
        raise PreconditionError("iteration count must be nonnegative")
    z = complex(z)
    for k in range(1, n + 1):
        if not f.is_polynomial and P.polyval(z, f.denominator) == 0:
            raise PoleHit(f"pole hit at step {k}", step=k)
        z = complex(f(z))
        if not np.isfinite(z):
            if f.is_polynomial:
                return Escaped(k)
            raise PoleHit(f"pole hit at step {k}", step=k)
        if abs(z) > OVERFLOW_GUARD:
            return Escaped(k)
    return z


def iterate_array(f: HolomorphicMap, z: np.ndarray, n: int):
    """Vectorised iterate; returns (values, escaped) with escaped entries set to nan."""
    w = np.array(z, dtype=complex, copy=True)
    escaped = np.zeros(w.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(n):
            w = f(w)
            bad = ~np.isfinite(w) | (np.abs(w) > OVERFLOW_GUARD)
            escaped |= bad
            w[escaped] = np.nan
    return w, escaped


# --- fixed points ------------------------------------------------------------

@dataclass(frozen=True)
class FixedPointInfo:
    z0: complex
    multiplier: complex
    klass: str
    p: Optional[int] = None
    m: Optional[int] = None


def _newton_step(f: HolomorphicMap, z: complex):
    fz = complex(f(z))
    slope = complex(f.derivative(z)) - 1.0
    if slope == 0 or not np.isfinite(fz):
        return None, fz - z
    return z - (fz - z) / slope, fz - z


def find_fixed_point(f: HolomorphicMap, guess: complex, max_steps: int = 100,
                     polish_steps: int = 200) -> complex:
    """Newton iteration on f(z) - z.

    Once the residual is below tolerance, steps continue while they strictly
    reduce it: that takes simple roots to machine precision and pushes
    multiple roots (where Newton is only linear) far enough for the
    multiplier to be classified correctly.
    """
    z = complex(guess)
    for _ in range(max_steps + 1):
        nxt, res = _newton_step(f, z)
        if abs(res) <= FIXED_POINT_TOL:
            break
        if nxt is None:
            raise NonConvergence(f"Newton did not reach a fixed point from {guess}", guess=complex(guess))
        z = nxt
    else:
        raise NonConvergence(f"Newton did not reach a fixed point from {guess}", guess=complex(guess))
    for _ in range(polish_steps):
        if res == 0 or nxt is None:
            break
        nres = complex(f(nxt)) - nxt
        if not abs(nres) < abs(res):
            break
        z = nxt
        nxt, res = _newton_step(f, z)
    return z


def classify_fixed_point(f: HolomorphicMap, z0: complex) -> FixedPointInfo:
    z0 = complex(z0)
    if abs(complex(f(z0)) - z0) > 1e-10:
        raise NotAFixedPoint(f"{z0} is not a fixed point", z0=z0)
    coeffs = f.taylor(z0, 64)
    lam = complex(coeffs[1])
    r = abs(lam)
    if r <= CLASSIFY_TOL:
        nz = [k for k in range(2, len(coeffs)) if abs(coeffs[k]) > CLASSIFY_TOL]
        if not nz:
            raise PreconditionError("f is locally constant at the fixed point")
        return FixedPointInfo(z0, 0j, "superattracting", p=nz[0])
    if abs(lam - 1) <= CLASSIFY_TOL:
        nz = [k for k in range(2, len(coeffs)) if abs(coeffs[k]) > CLASSIFY_TOL]
        if not nz:
            raise PreconditionError("f is the identity near the fixed point")
        return FixedPointInfo(z0, 1 + 0j, "neutral", m=nz[0] - 1)
    if abs(r - 1) <= CLASSIFY_TOL:
        return FixedPointInfo(z0, lam, "irrationally_indifferent")
    if r < 1:
        return FixedPointInfo(z0, lam, "attracting")
    return FixedPointInfo(z0, lam, "repelling")


# --- run-away and basins -------------------------------------------------------

def run_away_index(f: HolomorphicMap, k: CompactGridSet, n_max: int,
                   margin: Optional[float] = None) -> Optional[int]:
    """Smallest N <= n_max with f^N(K) certifiably disjoint from K, else None.

    Every sample of K (all pixel centres of a raster) is pushed forward, since
    f^N(K) can swallow K while f^N of the boundary avoids it.
    """
    if k.is_empty():
        raise PreconditionError("compact set must be nonempty")
    pts = k.sample_points()
    if margin is None:
        margin = k.grid.pixel_diagonal if k.is_raster else 0.0
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    w = pts.astype(complex)
    for n in range(1, n_max + 1):
        w = _step_checked(f, w, n)
        d = tree.query(np.column_stack([w.real, w.imag]))[0]
        if d.min() > margin:
            return n
    return None


def _step_checked(f: HolomorphicMap, w: np.ndarray, n: int) -> np.ndarray:
    with np.errstate(all="ignore"):
        if not f.is_polynomial and np.any(P.polyval(w, f.denominator) == 0):
            raise PoleHit(f"pole hit at step {n}", step=n)
        out = f(w)
    if not np.all(np.isfinite(out)) or np.any(np.abs(out) > OVERFLOW_GUARD):
        raise PoleHit(f"orbit escaped or hit a pole at step {n}", step=n)
    return out


def attraction_radius_ok(f: HolomorphicMap, z0: complex, eps: float, samples: int = 256) -> bool:
    """True when f maps the circle |w - z0| = eps (and so the disk) strictly inside itself."""
    ring = z0 + eps * np.exp(2j * np.pi * np.arange(samples) / samples)
    with np.errstate(all="ignore"):
        img = f(ring)
    return bool(np.all(np.abs(img - z0) < eps))


def basin_raster(f: HolomorphicMap, z0: complex, grid: GridSpec, n_max: int,
                 eps: float) -> CompactGridSet:
    """Pixels whose orbit enters the eps-disk about z0 within n_max steps."""
    z0 = complex(z0)
    if not attraction_radius_ok(f, z0, eps):
        raise PreconditionError(f"eps={eps} is not inside a contracting disk about z0")
    mask, _ = entry_times(f, z0, grid.centers(), n_max, eps)
    return CompactGridSet(grid=grid, mask=mask)


def entry_times(f: HolomorphicMap, z0: complex, z: np.ndarray, n_max: int, radius: float):
    """First k <= n_max with |f^k(z) - z0| < radius; returns (entered, k) arrays (k=-1 if never)."""
    w = np.array(z, dtype=complex, copy=True)
    k = np.full(w.shape, -1, dtype=np.int64)
    inside = np.abs(w - z0) < radius
    k[inside] = 0
    active = ~inside
    with np.errstate(all="ignore"):
        for step in range(1, n_max + 1):
            if not active.any():
                break
            idx = np.nonzero(active)
            w_act = f(w[idx])
            w[idx] = w_act
            dead = ~np.isfinite(w_act) | (np.abs(w_act) > OVERFLOW_GUARD)
            hit = ~dead & (np.abs(w_act - z0) < radius)
            sel = tuple(i[hit] for i in idx)
            k[sel] = step
            done = tuple(i[hit | dead] for i in idx)
            active[done] = False
    return k >= 0, k


# --- finite-set injectivity ------------------------------------------------------

@dataclass(frozen=True)
class InjectiveUpTo:
    n_max: int


@dataclass(frozen=True)
class Collision:
    n: int
    i: int
    j: int


def finite_injectivity_check(f: HolomorphicMap, e: Sequence[complex], n_max: int,
                             center: complex = 0j, tol: float = COLLISION_TOL):
    """First n <= n_max and pair (i, j) whose orbits coincide, else InjectiveUpTo(n_max).

    Orbits are carried in mpmath so that points collapsing onto an attracting
    fixed point do not underflow to the same float. Two orbit points collide
    when |a - b| < tol * min(1, max(|a - center|, |b - center|)): the plain
    absolute test away from ``center``, a relative one close to it.
    """
    pts = [complex(z) for z in e]
    if len(set(pts)) != len(pts):
        raise PreconditionError("points must be distinct")
    c = mpmath.mpc(center)
    num = [mpmath.mpc(x) for x in f.numerator]
    den = [mpmath.mpc(x) for x in f.denominator]
    orbit = [mpmath.mpc(z) for z in pts]
    for n in range(1, n_max + 1):
        for idx, z in enumerate(orbit):
            q = mpmath.polyval(den[::-1], z)
            if q == 0:
                raise PoleHit(f"pole hit at step {n}", step=n)
            orbit[idx] = mpmath.polyval(num[::-1], z) / q
        for i in range(len(orbit)):
            for j in range(i + 1, len(orbit)):
                a, b = orbit[i], orbit[j]
                scale = min(max(mpmath.fabs(a - c), mpmath.fabs(b - c)), 1)
                if a == b or mpmath.fabs(a - b) < tol * scale:
                    return Collision(n, i, j)
    return InjectiveUpTo(n_max)
