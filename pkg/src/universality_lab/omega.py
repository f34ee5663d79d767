"""Collision pairs under iteration and fiber checks for limit functions of g o f^n.

A limit h of g o f^{n_k} satisfies h(z) = h(w) whenever f^N(z) = f^N(w), i.e.
whenever the chart values agree. The checks here look for sample pairs that
share a chart fiber but not an h-value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.spatial import cKDTree

from .conjugacy import (ConjugacyChart, abel_phi, boettcher_phi, koenigs_phi_array,
                        petal_membership)
from .dynamics import HolomorphicMap, iterate_array
from .errors import DegreeCapExceeded, NotInBasin, PetalCountTooSmall, PreconditionError

DEGREE_CAP = 64
ROOT_TOL = 1e-8


def collision_pairs(f: HolomorphicMap, w: complex, n: int) -> List[complex]:
    """All distinct z with f^n(z) = w, from the roots of P_n - w Q_n."""
    if n < 1:
        raise PreconditionError("n must be at least 1")
    if f.degree ** n > DEGREE_CAP:
        raise DegreeCapExceeded(f"deg f^{n} = {f.degree ** n} exceeds {DEGREE_CAP}",
                                degree=f.degree ** n)
    w = complex(w)
    num, den = f.compose_power(n)
    size = max(len(num), len(den))
    poly = np.zeros(size, dtype=complex)
    poly[: len(num)] += num
    poly[: len(den)] -= w * den
    nz = np.flatnonzero(np.abs(poly) > 0)
    if nz.size == 0:
        raise PreconditionError("f^n is constant equal to w")
    poly = poly[: nz[-1] + 1]
    if poly.size == 1:
        return []
    roots = P.polyroots(poly)
    dpoly = P.polyder(poly)
    polished = []
    for z in roots:
        for _ in range(50):
            d = P.polyval(z, dpoly)
            if d == 0:
                break
            step = P.polyval(z, poly) / d
            z = z - step
            if abs(step) <= 1e-16 * max(1.0, abs(z)):
                break
        polished.append(complex(z))
    out: List[complex] = []
    for z in sorted(polished, key=lambda c: (c.real, c.imag)):
        if not _verified(f, z, w, n):
            continue
        if any(abs(z - u) <= 1e-6 * max(1.0, abs(u)) for u in out):
            continue
        out.append(z)
    return out


def _verified(f: HolomorphicMap, z: complex, w: complex, n: int) -> bool:
    val, esc = iterate_array(f, np.array([z]), n)
    return bool(not esc[0] and abs(val[0] - w) <= ROOT_TOL * max(1.0, abs(w)))


@dataclass
class FiberReport:
    pairs_checked: int
    violations: list
    tol_in: float
    tol_out: float
    fiber_pairs: int = 0
    non_identified: list = field(default_factory=list)

    def to_dict(self) -> dict:
        pair = lambda c: [float(c.real), float(c.imag)]
        return {
            "pairs_checked": self.pairs_checked,
            "fiber_pairs": self.fiber_pairs,
            "tol_in": self.tol_in,
            "tol_out": self.tol_out,
            "violations": [{"z": pair(a), "w": pair(b), "phi_gap": d, "h_gap": e}
                           for a, b, d, e in self.violations],
            "non_identified": [{"z": pair(a), "w": pair(b), "petals": [k, l], "phi_gap": d}
                               for a, b, k, l, d in self.non_identified],
        }


def _values(h: Union[Callable, Sequence[complex]], pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(h(pts) if callable(h) else h, dtype=complex).ravel()
    if vals.size != pts.size:
        raise PreconditionError("need one h-value per point")
    return vals


def chart_values(chart: ConjugacyChart, pts: np.ndarray) -> np.ndarray:
    if chart.kind == "koenigs":
        phi, ok = koenigs_phi_array(chart, pts)
        if not ok.all():
            bad = complex(pts[~ok][0])
            raise NotInBasin(f"{bad} is not in the basin", z=bad)
        return phi
    if chart.kind == "boettcher":
        return np.array([boettcher_phi(chart, z) for z in pts], dtype=complex)
    return np.asarray(abel_phi(chart, pts), dtype=complex)


def _canonical(a: complex, b: complex):
    return (a, b) if (a.real, a.imag) <= (b.real, b.imag) else (b, a)


def _close_pairs(phi: np.ndarray, tol_in: float):
    if phi.size < 2:
        return []
    tree = cKDTree(np.column_stack([phi.real, phi.imag]))
    return [(i, j) for i, j in tree.query_pairs(tol_in) if abs(phi[i] - phi[j]) <= tol_in]


def phi_fiber_check(chart: ConjugacyChart, h, points: Sequence[complex], tol_in: float = 1e-8,
                    tol_out: float = 1e-6) -> FiberReport:
    """Pairs with |Phi(z) - Phi(w)| <= tol_in but |h(z) - h(w)| > tol_out."""
    pts = np.asarray(list(points), dtype=complex).ravel()
    n = pts.size
    if n == 0:
        return FiberReport(0, [], tol_in, tol_out)
    phi = chart_values(chart, pts)
    vals = _values(h, pts)
    close = _close_pairs(phi, tol_in)
    viol = []
    for i, j in close:
        gap = abs(vals[i] - vals[j])
        if gap > tol_out:
            a, b = _canonical(pts[i], pts[j])
            viol.append((complex(a), complex(b), float(abs(phi[i] - phi[j])), float(gap)))
    viol.sort(key=lambda v: (v[0].real, v[0].imag, v[1].real, v[1].imag))
    return FiberReport(n * (n - 1) // 2, viol, tol_in, tol_out, fiber_pairs=len(close))


def phi_star_fiber_check(charts: Sequence[ConjugacyChart], h, points: Sequence[complex],
                         labels: Optional[Sequence[int]] = None, tol_in: float = 1e-8,
                         tol_out: float = 1e-6) -> FiberReport:
    """Fiber check for the petal-indexed coordinate (Phi_k(z), k).

    Only pairs in the same petal can violate; cross-petal pairs with matching
    Abel values are listed as non-identified.
    """
    charts = list(charts)
    if not charts or any(c.kind != "abel" for c in charts):
        raise PreconditionError("need one Abel chart per petal")
    m = charts[0].m
    if m < 2:
        raise PetalCountTooSmall("Phi* only differs from Phi with at least two petals", m=m)
    by_petal = {c.petal: c for c in charts}
    pts = np.asarray(list(points), dtype=complex).ravel()
    if labels is None:
        labels = [petal_membership(charts[0], z) for z in pts]
    labels = np.asarray([-1 if k is None else int(k) for k in labels])
    if labels.size != pts.size:
        raise PreconditionError("need one petal label per point")
    if np.any(labels < 0) or any(int(k) not in by_petal for k in set(labels.tolist())):
        raise PreconditionError("every point needs a petal with a chart")
    vals = _values(h, pts)
    phi = np.zeros(pts.size, dtype=complex)
    for k in set(labels.tolist()):
        sel = labels == k
        phi[sel] = chart_values(by_petal[k], pts[sel])
    viol, cross = [], []
    close = _close_pairs(phi, tol_in)
    for i, j in close:
        d = float(abs(phi[i] - phi[j]))
        if labels[i] == labels[j]:
            gap = abs(vals[i] - vals[j])
            if gap > tol_out:
                a, b = _canonical(pts[i], pts[j])
                viol.append((complex(a), complex(b), d, float(gap)))
        else:
            (a, ka), (b, kb) = sorted([(pts[i], int(labels[i])), (pts[j], int(labels[j]))],
                                      key=lambda t: (t[0].real, t[0].imag))
            cross.append((complex(a), complex(b), ka, kb, d))
    viol.sort(key=lambda v: (v[0].real, v[0].imag, v[1].real, v[1].imag))
    cross.sort(key=lambda v: (v[0].real, v[0].imag, v[1].real, v[1].imag))
    n = pts.size
    return FiberReport(n * (n - 1) // 2, viol, tol_in, tol_out, fiber_pairs=len(close),
                       non_identified=cross)


def omega_limit_estimate(g, f: HolomorphicMap, indices: Sequence[int], points: Sequence[complex],
                         cauchy_tol: float) -> Optional[np.ndarray]:
    """Values of g o f^{n_last} if the last three index evaluations agree to cauchy_tol."""
    idx = [int(n) for n in indices]
    if len(idx) < 3 or any(b <= a for a, b in zip(idx, idx[1:])):
        raise PreconditionError("need at least three strictly increasing indices")
    pts = np.asarray(list(points), dtype=complex).ravel()
    evals = []
    for n in idx[-3:]:
        w, esc = iterate_array(f, pts, n)
        if esc.any():
            return None
        evals.append(np.asarray(g(w), dtype=complex))
    if np.all(np.abs(evals[2] - evals[1]) <= cauchy_tol) and \
            np.all(np.abs(evals[1] - evals[0]) <= cauchy_tol):
        return evals[2]
    return None
