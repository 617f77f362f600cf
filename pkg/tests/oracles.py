"""Independent brute-force reference implementations used to check the
library. These deliberately avoid the code paths (and scipy helpers) that
the library itself uses: flood fill instead of labelling, shift-OR sweeps
instead of morphology kernels, full pairwise scans instead of KD-trees, and
explicit sign enumeration for the Wilcoxon test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def neighbor_offsets(connectivity: int) -> list[tuple[int, int, int]]:
    offs = []
    for dz, dy, dx in itertools.product((-1, 0, 1), repeat=3):
        if (dz, dy, dx) == (0, 0, 0):
            continue
        manhattan = abs(dz) + abs(dy) + abs(dx)
        if connectivity == 6 and manhattan > 1:
            continue
        if connectivity == 18 and manhattan > 2:
            continue
        offs.append((dz, dy, dx))
    return offs


def flood_fill_components(mask: np.ndarray, connectivity: int) -> list[set]:
    """BFS flood fill; returns the partition as a list of voxel-tuple sets."""
    offs = neighbor_offsets(connectivity)
    remaining = {tuple(v) for v in np.argwhere(mask)}
    parts = []
    while remaining:
        seed = remaining.pop()
        comp = {seed}
        queue = [seed]
        while queue:
            z, y, x = queue.pop()
            for dz, dy, dx in offs:
                nb = (z + dz, y + dy, x + dx)
                if nb in remaining:
                    remaining.remove(nb)
                    comp.add(nb)
                    queue.append(nb)
        parts.append(comp)
    return parts


def naive_dilate(mask: np.ndarray, connectivity: int, iterations: int) -> np.ndarray:
    """Any-neighbour-set sweep, repeated per iteration, zero outside."""
    offs = neighbor_offsets(connectivity)
    out = mask.astype(bool).copy()
    for _ in range(iterations):
        prev = out
        out = prev.copy()
        for dz, dy, dx in offs:
            shifted = np.zeros_like(prev)
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            for ax, d in enumerate((dz, dy, dx)):
                if d > 0:
                    dst[ax] = slice(d, None)
                    src[ax] = slice(None, -d)
                elif d < 0:
                    dst[ax] = slice(None, d)
                    src[ax] = slice(-d, None)
            shifted[tuple(dst)] = prev[tuple(src)]
            out |= shifted
    return out


def naive_surface(mask: np.ndarray) -> list[tuple[int, int, int]]:
    """Scan every foreground voxel; keep it if any of its six face
    neighbours is background or outside."""
    dims = mask.shape
    out = []
    for z, y, x in np.argwhere(mask):
        on_surface = False
        for dz, dy, dx in neighbor_offsets(6):
            nz, ny, nx = z + dz, y + dy, x + dx
            if not (0 <= nz < dims[0] and 0 <= ny < dims[1] and 0 <= nx < dims[2]):
                on_surface = True
                break
            if not mask[nz, ny, nx]:
                on_surface = True
                break
        if on_surface:
            out.append((int(z), int(y), int(x)))
    return out


def brute_directed_distances(frm, to, spacing) -> np.ndarray:
    """Full O(n*m) pairwise scan for the minimum distance per from-voxel."""
    sp = np.asarray(spacing, dtype=np.float64)
    a = np.asarray(frm, dtype=np.float64) * sp
    b = np.asarray(to, dtype=np.float64) * sp
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff**2).sum(axis=2)).min(axis=1)


def brute_dice(pred: np.ndarray, gt: np.ndarray) -> float:
    p = {tuple(v) for v in np.argwhere(pred)}
    g = {tuple(v) for v in np.argwhere(gt)}
    if not p and not g:
        return 1.0
    return 2.0 * len(p & g) / (len(p) + len(g))


def brute_assd(pred: np.ndarray, gt: np.ndarray, spacing) -> tuple[float, bool]:
    p_surf = naive_surface(pred)
    g_surf = naive_surface(gt)
    if not p_surf and not g_surf:
        return 0.0, True
    if not p_surf or not g_surf:
        extent = np.array(pred.shape, dtype=np.float64) * np.asarray(spacing)
        return float(np.sqrt((extent**2).sum())), True
    d_pg = brute_directed_distances(p_surf, g_surf, spacing)
    d_gp = brute_directed_distances(g_surf, p_surf, spacing)
    return float((d_pg.sum() + d_gp.sum()) / (len(d_pg) + len(d_gp))), False


def brute_slice_diameter(voxels, spacing) -> tuple[float, int, float]:
    """(short, slice, long): per-slice max-pair long axis, perpendicular
    extent short axis, both plus the mean in-plane spacing; the slice with
    the largest short axis wins, lowest slice on ties."""
    vox = np.asarray(voxels)
    _, sy, sx = (float(s) for s in spacing)
    comp = 0.5 * (sy + sx)
    best = None
    for z in sorted(set(int(v) for v in vox[:, 0])):
        pts = [(float(v[1]) * sy, float(v[2]) * sx) for v in vox if v[0] == z]
        n = len(pts)
        if n == 1:
            long_e, short_e = 0.0, 0.0
        else:
            bi = bj = 0
            bd = -1.0
            for i in range(n):
                for j in range(i + 1, n):
                    d = math.dist(pts[i], pts[j])
                    if d > bd:
                        bd, bi, bj = d, i, j
            long_e = bd
            u0 = (pts[bj][0] - pts[bi][0]) / bd
            u1 = (pts[bj][1] - pts[bi][1]) / bd
            # extent along the perpendicular (-u1, u0) of the long axis
            projs = [p[0] * (-u1) + p[1] * u0 for p in pts]
            short_e = max(projs) - min(projs)
        short = short_e + comp
        if best is None or short > best[0]:
            best = (short, z, long_e + comp)
    return best


def enum_wilcoxon_two_sided(diffs) -> tuple[int, float, float]:
    """Exact two-sided p by enumerating every sign assignment.

    Zero differences are dropped; |d| ranks use average ranks; the statistic
    is min(W+, W-) and the p-value counts assignments at least as extreme.
    Returns (n_effective, W, p).
    """
    d = [float(v) for v in diffs if v != 0.0]
    n = len(d)
    if n == 0:
        return 0, 0.0, 1.0
    # average ranks of |d|
    order = sorted(range(n), key=lambda i: abs(d[i]))
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(d[order[j + 1]]) == abs(d[order[i]]):
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    w_plus = sum(r for r, v in zip(ranks, d) if v > 0)
    w_minus = sum(r for r, v in zip(ranks, d) if v < 0)
    w_obs = min(w_plus, w_minus)
    total = sum(ranks)
    count = 0
    for signs in itertools.product((1, -1), repeat=n):
        s_plus = sum(r for r, s in zip(ranks, signs) if s > 0)
        if min(s_plus, total - s_plus) <= w_obs + 1e-12:
            count += 1
    return n, w_obs, count / 2.0**n
