"""Linearizing coordinates near attracting, superattracting and parabolic fixed points.

Three chart kinds share one :class:`ConjugacyChart` record:

* ``koenigs``   Phi(f(z)) = lam * Phi(z), Phi'(z0) = 1, extended to the basin by
  pulling back along the orbit.
* ``boettcher`` phi(f(z)) = phi(z)**p, local only.
* ``abel``      Phi(f(z)) = Phi(z) + 1 on one attracting petal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .dynamics import (OVERFLOW_GUARD, FixedPointInfo, HolomorphicMap, _shift,
                       classify_fixed_point, series_div)
from .errors import (BranchAmbiguity, ChartConstructionError, NonConvergence, NotInBasin,
                     NotInChart, NotInPetal, OutOfRange, PreconditionError)

DEFAULT_DEPTH = {"koenigs": 60, "boettcher": 8, "abel": 200}
BASIN_BUDGET = 500
_RING = 512  # boundary samples used in chart verification


@dataclass(frozen=True, eq=False)
class ConjugacyChart:
    f: HolomorphicMap
    info: FixedPointInfo
    kind: str
    local_radius: float
    depth: int
    range_radius: Optional[float] = None      # koenigs: |w| < range_radius lies in Phi(chart disk)
    basin_budget: int = BASIN_BUDGET
    lead: complex = 0j                         # boettcher: leading coefficient a_p
    petal: Optional[int] = None                # abel: petal index 1..m
    petal_radius: Optional[float] = None
    directions: Tuple[float, ...] = ()         # abel: attracting directions (radians)
    abel_poles: Tuple[complex, ...] = ()       # coefficients of w^-1 .. w^-m
    abel_log: complex = 0j
    abel_regular: Tuple[complex, ...] = ()     # coefficients of w^1 .. w^K
    _ratio_num: Optional[np.ndarray] = field(default=None, repr=False)
    _ratio_den: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def z0(self) -> complex:
        return self.info.z0

    @property
    def lam(self) -> complex:
        return self.info.multiplier

    @property
    def p(self) -> Optional[int]:
        return self.info.p

    @property
    def m(self) -> Optional[int]:
        return self.info.m

    def in_disk(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.z0) < self.local_radius

    def with_depth(self, depth: int) -> "ConjugacyChart":
        kw = dict(self.__dict__)
        kw["depth"] = int(depth)
        return ConjugacyChart(**kw)


def _ring(center: complex, radius: float, n: int = _RING) -> np.ndarray:
    return center + radius * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)


def _info(f: HolomorphicMap, z0: complex, allow_linear: bool) -> FixedPointInfo:
    if not allow_linear:
        f.require_dynamical()
    return classify_fixed_point(f, z0)


# --- Koenigs -----------------------------------------------------------------

def koenigs_chart(f: HolomorphicMap, z0: complex, local_radius: Optional[float] = None,
                  depth: int = DEFAULT_DEPTH["koenigs"], allow_linear: bool = False,
                  basin_budget: int = BASIN_BUDGET) -> ConjugacyChart:
    """Build a Koenigs chart at an attracting fixed point.

    When ``local_radius`` is omitted, the largest radius of the form
    ``0.9**k`` (times max(1, |z0|)) is used on which f is a contraction towards
    z0 and Re(f'/lam) > 0 (so f, hence every iterate, is injective there).
    ``allow_linear`` admits degree-1 symbols for synthetic checks.
    """
    info = _info(f, z0, allow_linear)
    if info.klass != "attracting":
        raise PreconditionError(f"Koenigs chart needs an attracting fixed point, got {info.klass}")
    z0 = info.z0
    lam = info.multiplier
    if local_radius is None:
        r = max(1.0, abs(z0))
        for _ in range(200):
            if _koenigs_disk_ok(f, z0, lam, r):
                break
            r *= 0.9
        else:
            raise ChartConstructionError("no contracting univalent disk found")
    else:
        r = float(local_radius)
        if not _koenigs_disk_ok(f, z0, lam, r):
            raise ChartConstructionError(f"radius {r} fails the contraction/univalence check")
    chart = ConjugacyChart(f, info, "koenigs", r, int(depth), basin_budget=basin_budget)
    ring = _ring(z0, r)
    vals = _koenigs_local(chart, ring)
    object.__setattr__(chart, "range_radius", float(np.min(np.abs(vals))) * 0.999)
    return chart


def _koenigs_disk_ok(f, z0, lam, r) -> bool:
    ring = _ring(z0, r)
    with np.errstate(all="ignore"):
        img = f(ring)
        der = f.derivative(ring)
    if not (np.all(np.isfinite(img)) and np.all(np.isfinite(der))):
        return False
    q = np.max(np.abs(img - z0)) / r
    return bool(q < 1.0 and np.min((der / lam).real) > 0)


def _koenigs_local(chart: ConjugacyChart, w: np.ndarray) -> np.ndarray:
    z = np.array(w, dtype=complex, copy=True)
    for _ in range(chart.depth):
        z = chart.f(z)
    return (z - chart.z0) / chart.lam ** chart.depth


def _koenigs_orbit(chart: ConjugacyChart, z: np.ndarray, with_derivative: bool = False):
    """Iterate until the chart disk is reached, then ``depth`` more steps.

    Returns (phi, dphi, ok); ``ok`` is False where the orbit never enters the
    chart disk within the basin budget.
    """
    f, z0, lam = chart.f, chart.z0, chart.lam
    w = np.array(z, dtype=complex, copy=True)
    shape = w.shape
    w = w.ravel()
    n_steps = np.zeros(w.shape, dtype=np.int64)
    remaining = np.where(np.abs(w - z0) < chart.local_radius, chart.depth, -1)
    ok = np.ones(w.shape, dtype=bool)
    dmul = np.ones(w.shape, dtype=complex) if with_derivative else None
    active = np.ones(w.shape, dtype=bool)
    active[remaining == 0] = False
    budget = chart.basin_budget + chart.depth
    with np.errstate(all="ignore"):
        for _ in range(budget):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            wa = w[idx]
            if with_derivative:
                dmul[idx] *= f.derivative(wa) / lam
            wa = f(wa)
            w[idx] = wa
            n_steps[idx] += 1
            bad = ~np.isfinite(wa) | (np.abs(wa) > OVERFLOW_GUARD)
            ok[idx[bad]] = False
            rem = remaining[idx]
            entering = (rem < 0) & (np.abs(wa - z0) < chart.local_radius)
            rem = np.where(entering, chart.depth, rem)
            rem = np.where(rem > 0, rem - np.where(entering, 0, 1), rem)
            remaining[idx] = rem
            finished = bad | (rem == 0)
            active[idx[finished]] = False
    ok &= remaining == 0
    phi = (w - z0) / np.power(lam, n_steps)
    phi[~ok] = np.nan
    if with_derivative:
        dmul[~ok] = np.nan
        return phi.reshape(shape), dmul.reshape(shape), ok.reshape(shape)
    return phi.reshape(shape), None, ok.reshape(shape)


def koenigs_phi(chart: ConjugacyChart, z):
    """Extended Koenigs coordinate; raises NotInBasin if the orbit misses the chart disk."""
    scalar = np.ndim(z) == 0
    phi, _, ok = _koenigs_orbit(chart, np.atleast_1d(np.asarray(z, dtype=complex)))
    if not ok.all():
        bad = np.atleast_1d(np.asarray(z))[~ok][0]
        raise NotInBasin(f"orbit of {bad} does not enter the chart disk", z=complex(bad))
    return complex(phi[0]) if scalar else phi


def koenigs_phi_array(chart: ConjugacyChart, z: np.ndarray):
    """Vectorised Phi with a validity mask instead of exceptions."""
    phi, _, ok = _koenigs_orbit(chart, z)
    return phi, ok


def koenigs_derivative(chart: ConjugacyChart, z):
    """Phi'(z) by the chain rule along the same orbit used for Phi."""
    scalar = np.ndim(z) == 0
    _, dphi, ok = _koenigs_orbit(chart, np.atleast_1d(np.asarray(z, dtype=complex)), True)
    if not ok.all():
        raise NotInBasin("orbit does not enter the chart disk")
    return complex(dphi[0]) if scalar else dphi


def koenigs_inverse(chart: ConjugacyChart, w: complex, tol: float = 1e-10,
                    max_steps: int = 60) -> complex:
    """The point z of the chart disk with Phi(z) = w (Newton from z0 + w)."""
    w = complex(w)
    if abs(w) >= chart.range_radius:
        raise OutOfRange(f"|w|={abs(w):.3g} outside chart range {chart.range_radius:.3g}", w=w)
    z = chart.z0 + w
    for _ in range(max_steps):
        phi, dphi, ok = _koenigs_orbit(chart, np.array([z]), True)
        if not ok[0]:
            raise NonConvergence("Newton iterate left the basin", w=w)
        res = complex(phi[0]) - w
        if abs(res) <= tol:
            if abs(z - chart.z0) >= chart.local_radius:
                raise NonConvergence("Newton converged outside the chart disk", w=w)
            return z
        step = res / complex(dphi[0])
        # damp steps that would leave the chart disk
        while abs(z - step - chart.z0) >= chart.local_radius and abs(step) > 1e-300:
            step *= 0.5
        z = z - step
    raise NonConvergence(f"Newton for the Koenigs inverse did not converge at w={w}", w=w)


def inverse_branch(chart: ConjugacyChart, n: int, w: complex, tol: float = 1e-8) -> complex:
    """The z in the chart disk with f^n(z) = w, via Phi(z) = lam**-n * Phi(w)."""
    if chart.kind != "koenigs":
        raise PreconditionError("inverse branches need a Koenigs chart")
    w = complex(w)
    if n == 0:
        return w
    target = koenigs_phi(chart, w) / chart.lam ** n
    if abs(target) >= chart.range_radius:
        raise OutOfRange(f"w is not in f^{n}(chart disk)", w=w, n=n)
    z = koenigs_inverse(chart, target)
    zn = z
    for _ in range(n):
        zn = complex(chart.f(zn))
    if abs(zn - w) > tol:
        raise NonConvergence(f"inverse branch residual {abs(zn - w):.3g} exceeds {tol}", w=w)
    return z


# --- Boettcher -----------------------------------------------------------------

def boettcher_chart(f: HolomorphicMap, z0: complex, local_radius: Optional[float] = None,
                    depth: int = DEFAULT_DEPTH["boettcher"]) -> ConjugacyChart:
    """Build a Boettcher chart at a superattracting fixed point of local degree p."""
    info = _info(f, z0, False)
    if info.klass != "superattracting":
        raise PreconditionError(f"Boettcher chart needs a superattracting fixed point, got {info.klass}")
    z0, p = info.z0, info.p
    # (f(z0+w) - z0) / w**p as an exact quotient of polynomials in w
    num = _shift(f.numerator, z0)
    den = _shift(f.denominator, z0)
    diff = P.polysub(num, z0 * den) if len(den) else num
    diff = np.concatenate([diff, np.zeros(max(0, p - len(diff)))])
    ratio_num = np.asarray(diff[p:], dtype=complex)
    lead = complex(ratio_num[0] / den[0])
    chart = ConjugacyChart(f, info, "boettcher", 0.0, int(depth), lead=lead,
                           _ratio_num=ratio_num, _ratio_den=np.asarray(lead * den, dtype=complex))
    if local_radius is None:
        r = max(1.0, abs(z0))
        for _ in range(200):
            if _boettcher_disk_ok(chart, r):
                break
            r *= 0.9
        else:
            raise ChartConstructionError("no Boettcher disk found")
    else:
        r = float(local_radius)
        if not _boettcher_disk_ok(chart, r):
            raise ChartConstructionError(f"radius {r} fails the Boettcher disk check")
    object.__setattr__(chart, "local_radius", r)
    return chart


def _ratio(chart: ConjugacyChart, w):
    """(f(z0+w) - z0) / (a_p w**p), equal to 1 at w = 0."""
    return P.polyval(w, chart._ratio_num) / P.polyval(w, chart._ratio_den)


def _boettcher_disk_ok(chart: ConjugacyChart, r: float) -> bool:
    ring = _ring(0j, r)
    with np.errstate(all="ignore"):
        rr = _ratio(chart, ring)
    if not np.all(np.isfinite(rr)):
        return False
    c = abs(chart.lead) * np.max(np.abs(rr))
    return bool(c * r ** (chart.p - 1) < 1 and np.max(np.abs(rr - 1)) < 0.5)


def boettcher_phi(chart: ConjugacyChart, z: complex) -> complex:
    """phi(z) = a**(1/(p-1)) * w * prod_n ratio_n**(1/p**(n+1)), principal branches.

    ratio_n is f(w_n)/(a w_n**p) along the orbit; each correction must stay
    within 0.5 of 1, otherwise the branch choice is ambiguous.
    """
    z = complex(z)
    w = z - chart.z0
    if abs(w) >= chart.local_radius:
        raise NotInChart(f"{z} is outside the Boettcher chart disk", z=z)
    if w == 0:
        return 0j
    p = chart.p
    total = 0j
    wn = w
    for n in range(chart.depth):
        r = complex(_ratio(chart, wn))
        if abs(r - 1) >= 0.5:
            raise BranchAmbiguity(f"branch correction {r} at step {n}", z=z, step=n)
        total += np.log(r) / p ** (n + 1)
        wn = chart.lead * wn ** p * r if abs(wn) > 1e-300 else 0j
    scale = np.exp(np.log(chart.lead) / (p - 1))
    return complex(scale * w * np.exp(total))


# --- Abel (parabolic) --------------------------------------------------------------

def abel_chart(f: HolomorphicMap, z0: complex, petal: int = 1, petal_radius: Optional[float] = None,
               depth: int = DEFAULT_DEPTH["abel"], series_order: int = 12,
               allow_linear: bool = False) -> ConjugacyChart:
    """Build the Abel chart for petal ``petal`` (1..m) at a parabolic fixed point.

    The Fatou coordinate is evaluated as A(f^N(z) - z0) - N where A is the
    truncated formal solution of A(f(w)) = A(w) + 1:
    A(w) = sum_j d_j w^-j + beta log w + sum_k e_k w^k.
    """
    info = _info(f, z0, allow_linear)
    if info.klass != "neutral":
        raise PreconditionError(f"Abel chart needs a neutral fixed point, got {info.klass}")
    m = info.m
    if not 1 <= petal <= m:
        raise PreconditionError(f"petal index must be in 1..{m}")
    K = int(series_order)
    coeffs = f.taylor(info.z0, 3 * m + K + 2)
    a = complex(coeffs[m + 1])
    base = np.angle(-1.0 / a)
    directions = tuple(float((base + 2 * np.pi * k) / m) for k in range(m))
    poles, beta, regular = _abel_series(coeffs, m, K)
    chart = ConjugacyChart(f, info, "abel", 0.0, int(depth), lead=a, petal=petal,
                           directions=directions, abel_poles=poles, abel_log=beta,
                           abel_regular=regular)
    if petal_radius is None:
        rho = 1.0
        for _ in range(60):
            if _petals_invariant(chart, rho):
                break
            rho *= 0.5
        else:
            raise ChartConstructionError("no forward-invariant petal disks found")
    else:
        rho = float(petal_radius)
        if not _petals_invariant(chart, rho):
            raise ChartConstructionError(f"petal radius {rho} is not forward-invariant")
    object.__setattr__(chart, "petal_radius", rho)
    object.__setattr__(chart, "local_radius", 2 * rho)
    return chart


def _fit(a: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=complex)
    out[: min(n, len(a))] = a[:n]
    return out


def _abel_series(c: np.ndarray, m: int, K: int):
    """Solve the formal Abel equation order by order.

    With f(w) = w (1 + E(w)), the residual A(f(w)) - A(w) - 1 at order w^q is
    linear in the unknowns; d_{m-q} first enters at q < m, beta at q = m and
    e_k at q = m + k, so the system is lower triangular.
    """
    Q = m + K
    L = Q + m + 1  # series length needed (w^-m terms pull in m extra orders)
    E = np.zeros(L + 1, dtype=complex)
    E[: L] = c[1: L + 1]
    E[0] = 0.0
    one_plus = E.copy()
    one_plus[0] = 1.0

    def power(s: int) -> np.ndarray:
        if s >= 0:
            out = np.zeros(L + 1, dtype=complex)
            out[0] = 1.0
            for _ in range(s):
                out = _fit(P.polymul(out, one_plus), L + 1)
            return out
        inv = series_div(np.array([1.0 + 0j]), one_plus, L)
        return power_of(inv, -s)

    def power_of(base, s):
        out = np.zeros(L + 1, dtype=complex)
        out[0] = 1.0
        for _ in range(s):
            out = _fit(P.polymul(out, base), L + 1)
        return out

    dE = P.polyder(one_plus)
    log1pE = np.zeros(L + 1, dtype=complex)
    integrand = series_div(dE, one_plus, L)
    log1pE[1:] = integrand[:L] / np.arange(1, L + 1)

    n_unknowns = Q + 1
    A = np.zeros((Q + 1, n_unknowns), dtype=complex)
    rhs = np.zeros(Q + 1, dtype=complex)
    rhs[0] = 1.0
    # columns: d_m .. d_1 (m of them), beta, e_1 .. e_K
    for col, j in enumerate(range(m, 0, -1)):
        s = power(-j)
        s[0] -= 1.0
        for q in range(Q + 1):
            if q + j <= L:
                A[q, col] = s[q + j]
    for q in range(Q + 1):
        A[q, m] = log1pE[q]
    for k in range(1, K + 1):
        s = power(k)
        s[0] -= 1.0
        for q in range(k, Q + 1):
            A[q, m + k] = s[q - k]
    sol = np.linalg.solve(A, rhs)
    poles = tuple(complex(sol[m - j]) for j in range(1, m + 1))  # coefficient of w^-j
    return poles, complex(sol[m]), tuple(complex(x) for x in sol[m + 1:])


def _petal_centers(chart: ConjugacyChart, rho: float):
    return [chart.z0 + rho * np.exp(1j * t) for t in chart.directions]


def _petals_invariant(chart: ConjugacyChart, rho: float) -> bool:
    for c in _petal_centers(chart, rho):
        ring = _ring(c, rho)
        ring = ring[np.abs(ring - chart.z0) > 1e-9 * rho]
        with np.errstate(all="ignore"):
            img = chart.f(ring)
        if not np.all(np.isfinite(img)):
            return False
        if np.any(np.abs(img - c) > rho * (1 + 1e-12)):
            return False
    # petal disks must be pairwise disjoint away from z0
    centers = _petal_centers(chart, rho)
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if abs(centers[i] - centers[j]) < 2 * rho * (1 - 1e-9):
                return False
    return True


def petal_membership(chart: ConjugacyChart, z: complex) -> Optional[int]:
    if chart.kind != "abel":
        raise PreconditionError("petal membership needs a neutral (Abel) chart")
    z = complex(z)
    for k, c in enumerate(_petal_centers(chart, chart.petal_radius), start=1):
        if abs(z - c) < chart.petal_radius:
            return k
    return None


def _abel_asymptotic(chart: ConjugacyChart, w: np.ndarray) -> np.ndarray:
    theta = chart.directions[chart.petal - 1]
    out = np.zeros(np.shape(w), dtype=complex)
    for j, d in enumerate(chart.abel_poles, start=1):
        out += d * w ** (-j)
    out += chart.abel_log * (np.log(w * np.exp(-1j * theta)) + 1j * theta)
    for k, e in enumerate(chart.abel_regular, start=1):
        out += e * w ** k
    return out


def abel_phi(chart: ConjugacyChart, z):
    """Fatou coordinate on the chart's petal: A(f^N(z) - z0) - N with N = depth."""
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    c = _petal_centers(chart, chart.petal_radius)[chart.petal - 1]
    outside = np.abs(zz - c) >= chart.petal_radius
    if outside.any():
        raise NotInPetal(f"{zz[outside][0]} is not in petal {chart.petal}", z=complex(zz[outside][0]))
    w = zz.copy()
    for _ in range(chart.depth):
        w = chart.f(w)
    val = _abel_asymptotic(chart, w - chart.z0) - chart.depth
    return complex(val[0]) if scalar else val


def abel_inverse(chart: ConjugacyChart, target: complex, seed: Optional[complex] = None,
                 tol: float = 1e-10, max_steps: int = 80) -> complex:
    """A point of the petal with Phi(z) = target (Newton with numerical derivative)."""
    c = _petal_centers(chart, chart.petal_radius)[chart.petal - 1]
    z = complex(c if seed is None else seed)
    for _ in range(max_steps):
        val = abel_phi(chart, z)
        res = val - target
        if abs(res) <= tol:
            return z
        h = 1e-7 * max(abs(z - chart.z0), 1e-3)
        d = (abel_phi(chart, z + h) - abel_phi(chart, z - h)) / (2 * h)
        step = res / d
        while abs(z - step - c) >= chart.petal_radius and abs(step) > 1e-300:
            step *= 0.5
        z = z - step
    raise NonConvergence(f"Abel inverse did not converge for {target}")


# --- tabulation ------------------------------------------------------------------

def chart_value_and_residual(chart: ConjugacyChart, z: complex):
    """Chart value and functional-equation residual at z."""
    z = complex(z)
    fz = complex(chart.f(z))
    if chart.kind == "koenigs":
        v = koenigs_phi(chart, z)
        return v, abs(koenigs_phi(chart, fz) - chart.lam * v)
    if chart.kind == "boettcher":
        v = boettcher_phi(chart, z)
        return v, abs(boettcher_phi(chart, fz) - v ** chart.p)
    v = abel_phi(chart, z)
    return v, abs(abel_phi(chart, fz) - v - 1)
