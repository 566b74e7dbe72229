"""Independent oracles for checking the synthesis machinery.

Everything in here deliberately avoids the library's propagation code:
images are computed pointwise through vertex enumeration, extension maxima
by grid scanning, matrix exponentials by plain series summation, and ODE
solutions by fixed-step RK4.
"""

from __future__ import annotations

from itertools import product

import numpy as np

GRID = 1e-3


def vertex_image_bounds(mats, offs, lo, hi):
    """Exact bounding box of a box's image under a map sequence.

    Applies the maps pointwise to every vertex (affine maps send vertices
    to the extreme points of each output coordinate) and hulls at the end.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    best_lo = None
    best_hi = None
    for bits in product((0, 1), repeat=lo.size):
        x = np.where(np.asarray(bits, dtype=bool), hi, lo)
        for m, c in zip(mats, offs):
            x = np.asarray(m) @ x + np.asarray(c)
        best_lo = x if best_lo is None else np.minimum(best_lo, x)
        best_hi = x if best_hi is None else np.maximum(best_hi, x)
    return best_lo, best_hi


def _extended_tile(tile_lo, tile_hi, lower_contact, upper_contact, a,
                   symmetric):
    lo = np.asarray(tile_lo, float) - a * np.asarray(lower_contact, float)
    hi = np.asarray(tile_hi, float).copy()
    if symmetric:
        hi = hi + a * np.asarray(upper_contact, float)
    return lo, hi


def grid_max_extension(mats, offs, tile_lo, tile_hi, lower_contact,
                       upper_contact, target_lo, target_hi,
                       symmetric=False, a_cap=500.0, grid=GRID):
    """Largest grid multiple of `grid` whose extended-tile image fits the
    target; None if inclusion already fails at a = 0."""
    target_lo = np.asarray(target_lo, float)
    target_hi = np.asarray(target_hi, float)

    def fits(a: float) -> bool:
        lo, hi = _extended_tile(tile_lo, tile_hi, lower_contact,
                                upper_contact, a, symmetric)
        img_lo, img_hi = vertex_image_bounds(mats, offs, lo, hi)
        return bool(np.all(img_lo >= target_lo - 1e-12)
                    and np.all(img_hi <= target_hi + 1e-12))

    if not fits(0.0):
        return None
    # exponential bracket then grid walk keeps the scan cheap
    a = 0.0
    step = 1.0
    while step >= grid / 2:
        while a + step <= a_cap and fits(a + step):
            a += step
        step /= 2
    return min(a, a_cap)


def brute_force_centralized_extension(joint_maps, base_lo, base_hi, horizon,
                                      depth, symmetric=False, grid=GRID):
    """Re-run generate-and-test with vertex images and grid scanning.

    joint_maps: list of (matrix, offset) per admissible joint mode.
    Returns the ring extension (min over tiles of max over patterns) or
    None on refinement failure.  Mirrors: trivial tiling, bisect every bad
    tile, per-tile best over all patterns of length 1..horizon.
    """
    base_lo = np.asarray(base_lo, float)
    base_hi = np.asarray(base_hi, float)
    n = base_lo.size

    def contacts(lo, hi):
        return (lo == base_lo), (hi == base_hi)

    def tile_best(lo, hi):
        best = None
        low_c, up_c = contacts(lo, hi)
        for length in range(1, horizon + 1):
            for combo in product(range(len(joint_maps)), repeat=length):
                mats = [joint_maps[i][0] for i in combo]
                offs = [joint_maps[i][1] for i in combo]
                a = grid_max_extension(mats, offs, lo, hi, low_c, up_c,
                                       base_lo, base_hi, symmetric, grid=grid)
                if a is not None and (best is None or a > best):
                    best = a
        return best

    tiles = [(base_lo.copy(), base_hi.copy(), 0)]
    while True:
        results = [tile_best(lo, hi) for lo, hi, _ in tiles]
        bad = [i for i, r in enumerate(results) if r is None]
        if not bad:
            return min(results)
        if any(tiles[i][2] >= depth for i in bad):
            return None
        new_tiles = []
        for i, (lo, hi, d) in enumerate(tiles):
            if i in bad:
                mid = 0.5 * (lo + hi)
                for bits in product((0, 1), repeat=n):
                    sel = np.asarray(bits, dtype=bool)
                    new_tiles.append((np.where(sel, mid, lo),
                                      np.where(sel, hi, mid), d + 1))
            else:
                new_tiles.append((lo, hi, d))
        tiles = new_tiles


def series_expm(m, terms=60):
    """Plain series matrix exponential with exact power-of-two scaling."""
    m = np.asarray(m, dtype=float)
    s = 0
    while np.linalg.norm(m / 2.0 ** s, 1) > 0.25:
        s += 1
    scaled = m / 2.0 ** s
    acc = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for k in range(1, terms + 1):
        term = term @ scaled / k
        acc = acc + term
    for _ in range(s):
        acc = acc @ acc
    return acc


def rk4(f, x0, t_end, steps):
    """Fixed-step classic Runge-Kutta integration of x' = f(x)."""
    x = np.asarray(x0, dtype=float)
    h = t_end / steps
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x
