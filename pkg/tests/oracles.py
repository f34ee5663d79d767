"""Slow, obviously-correct reference computations used by the tests."""

from collections import deque

import numpy as np


def hausdorff_bruteforce(a, b):
    def one_side(p, q):
        worst = 0.0
        for x in p:
            best = min(abs(x - y) for y in q)
            worst = max(worst, best)
        return worst

    return max(one_side(list(a), list(b)), one_side(list(b), list(a)))


def holes_bfs(mask):
    """Bounded 4-connected components of the complement, by explicit BFS.

    Returns a list of pixel-coordinate sets, one per hole.
    """
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] or seen[r, c]:
                continue
            queue = deque([(r, c)])
            seen[r, c] = True
            comp, touches = set(), False
            while queue:
                i, j = queue.popleft()
                comp.add((i, j))
                if i in (0, h - 1) or j in (0, w - 1):
                    touches = True
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    a, b = i + di, j + dj
                    if 0 <= a < h and 0 <= b < w and not mask[a, b] and not seen[a, b]:
                        seen[a, b] = True
                        queue.append((a, b))
            if not touches:
                comps.append(comp)
    return comps


def relative_hull_bfs(mask, excluded_pixels):
    out = mask.copy()
    for comp in holes_bfs(mask):
        if not comp & set(excluded_pixels):
            for i, j in comp:
                out[i, j] = True
    return out


def spiral_distance_bruteforce(delta, lam, w, extended, samples=1_000_000, window=40.0):
    """Minimum over a dense uniform grid of spiral parameters."""
    L = np.log(complex(lam))
    r = abs(w)
    s_star = np.log(r / delta) / L.real if r > 0 else 0.0
    lo = s_star - window
    hi = s_star + window
    if not extended:
        lo = max(lo, 0.0)
    best = abs(w) if not extended else np.inf
    if hi > lo:
        t = np.linspace(lo, hi, samples)
        best = min(best, float(np.abs(w - delta * np.exp(t * L)).min()))
    if not extended:
        best = min(best, abs(w - delta))
    return best


def orbit_collision_scan(f, e, n_max, tol=1e-10):
    """First (n, i, j) with |f^n(e_i) - f^n(e_j)| < tol, scanning every pair at every step."""
    orbit = [complex(z) for z in e]
    for n in range(1, n_max + 1):
        orbit = [complex(f(z)) for z in orbit]
        for i in range(len(orbit)):
            for j in range(i + 1, len(orbit)):
                if abs(orbit[i] - orbit[j]) < tol:
                    return n, i, j
    return None


def iterate_naive(f, z, n):
    for _ in range(n):
        z = complex(f(z))
    return z
