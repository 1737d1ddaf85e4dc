"""JIT kernels for the per-step hot path.

Everything here operates on raw numpy arrays; the public modules wrap these in
typed APIs. Cell-state codes match mapping.py: 0=Unknown, 1=Free, 2=Occupied.
Grids are indexed [iy, ix]. Angles are radians, distances meters.

Ray traversal uses exact DDA over the cell lattice. Convention: when a ray
crosses a lattice corner exactly (both axis crossings tie), the traversal steps
diagonally, skipping the two edge-adjacent cells.
"""
import math

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)


@njit(cache=True)
def cast_rays(opaque, px, py, angles, max_range, res, depths, clipped):
    """First-hit distances from (px, py) along each angle.

    `opaque` is a uint8 [iy, ix] grid anchored at world cell (0, 0). The start
    cell's own opacity is never tested (rays begin at the pose and step
    outward). Out-of-grid cells are treated as opaque. Writes depths/clipped
    in place.
    """
    h, w = opaque.shape
    cx0 = int(math.floor(px / res))
    cy0 = int(math.floor(py / res))
    for i in range(angles.shape[0]):
        dx = math.cos(angles[i])
        dy = math.sin(angles[i])
        cx = cx0
        cy = cy0
        if dx > 0.0:
            step_x = 1
            t_max_x = ((cx + 1) * res - px) / dx
            t_dx = res / dx
        elif dx < 0.0:
            step_x = -1
            t_max_x = (cx * res - px) / dx
            t_dx = -res / dx
        else:
            step_x = 0
            t_max_x = 1e30
            t_dx = 1e30
        if dy > 0.0:
            step_y = 1
            t_max_y = ((cy + 1) * res - py) / dy
            t_dy = res / dy
        elif dy < 0.0:
            step_y = -1
            t_max_y = (cy * res - py) / dy
            t_dy = -res / dy
        else:
            step_y = 0
            t_max_y = 1e30
            t_dy = 1e30
        depth = max_range
        clip = True
        while True:
            if t_max_x < t_max_y:
                t = t_max_x
                cx += step_x
                t_max_x += t_dx
            elif t_max_y < t_max_x:
                t = t_max_y
                cy += step_y
                t_max_y += t_dy
            else:
                t = t_max_x
                cx += step_x
                cy += step_y
                t_max_x += t_dx
                t_max_y += t_dy
            if t > max_range:
                break
            if cx < 0 or cx >= w or cy < 0 or cy >= h or opaque[cy, cx] != 0:
                depth = t
                clip = False
                break
        depths[i] = depth
        clipped[i] = 1 if clip else 0


@njit(cache=True)
def integrate_scan(cells, ox_cell, oy_cell, px, py, angles, depths, clipped, res):
    """Fuse one scan into a map window.

    Pass 1 marks every cell whose ray-entry distance is strictly below the
    ray's depth as Free (the start cell enters at 0, so it is always marked).
    Pass 2 marks each unclipped ray's hit cell Occupied — after all Free
    writes, so Occupied wins conflicts within one call, while across calls the
    last write wins. Returns the number of cells that left Unknown.

    `cells` is the map array; world cell (cx, cy) lives at
    cells[cy - oy_cell, cx - ox_cell]. The caller must size the window to
    cover the scan's reach.
    """
    h, w = cells.shape
    n_new = 0
    for i in range(angles.shape[0]):
        ray_len = depths[i]
        if ray_len <= 0.0:
            continue
        dx = math.cos(angles[i])
        dy = math.sin(angles[i])
        cx = int(math.floor(px / res))
        cy = int(math.floor(py / res))
        if dx > 0.0:
            step_x = 1
            t_max_x = ((cx + 1) * res - px) / dx
            t_dx = res / dx
        elif dx < 0.0:
            step_x = -1
            t_max_x = (cx * res - px) / dx
            t_dx = -res / dx
        else:
            step_x = 0
            t_max_x = 1e30
            t_dx = 1e30
        if dy > 0.0:
            step_y = 1
            t_max_y = ((cy + 1) * res - py) / dy
            t_dy = res / dy
        elif dy < 0.0:
            step_y = -1
            t_max_y = (cy * res - py) / dy
            t_dy = -res / dy
        else:
            step_y = 0
            t_max_y = 1e30
            t_dy = 1e30
        while True:
            ix = cx - ox_cell
            iy = cy - oy_cell
            if 0 <= ix < w and 0 <= iy < h:
                s = cells[iy, ix]
                if s == 0:
                    n_new += 1
                    cells[iy, ix] = 1
                elif s == 2:
                    cells[iy, ix] = 1
            if t_max_x < t_max_y:
                t = t_max_x
                cx += step_x
                t_max_x += t_dx
            elif t_max_y < t_max_x:
                t = t_max_y
                cy += step_y
                t_max_y += t_dy
            else:
                t = t_max_x
                cx += step_x
                cy += step_y
                t_max_x += t_dx
                t_max_y += t_dy
            if t >= ray_len:
                break
    for i in range(angles.shape[0]):
        if clipped[i] != 0:
            continue
        ray_len = depths[i]
        # Nudge past the hit boundary so the cell *entered* at the hit
        # distance is selected (matches the DDA's corner convention).
        hx = px + (ray_len + 1e-9) * math.cos(angles[i])
        hy = py + (ray_len + 1e-9) * math.sin(angles[i])
        ix = int(math.floor(hx / res)) - ox_cell
        iy = int(math.floor(hy / res)) - oy_cell
        if 0 <= ix < w and 0 <= iy < h:
            if cells[iy, ix] == 0:
                n_new += 1
            cells[iy, ix] = 2
    return n_new


@njit(cache=True)
def passable_mask(cells, unknown_is_free, off_x, off_y):
    """Cells passable after obstacle inflation.

    Occupied cells stamp the disc given by (off_x, off_y) as blocked. Unknown
    cells block only themselves (no inflation) when unknown_is_free is 0.
    """
    h, w = cells.shape
    out = np.ones((h, w), np.uint8)
    n_off = off_x.shape[0]
    for iy in range(h):
        for ix in range(w):
            s = cells[iy, ix]
            if s == 2:
                for k in range(n_off):
                    jx = ix + off_x[k]
                    jy = iy + off_y[k]
                    if 0 <= jx < w and 0 <= jy < h:
                        out[jy, jx] = 0
            elif s == 0 and unknown_is_free == 0:
                out[iy, ix] = 0
    return out


@njit(cache=True)
def frontier_mask(cells):
    """Free cells 4-adjacent to at least one Unknown cell.

    Cells beyond the stored extent count as Unknown, so Free cells on the
    window edge are frontiers.
    """
    h, w = cells.shape
    out = np.zeros((h, w), np.uint8)
    for iy in range(h):
        for ix in range(w):
            if cells[iy, ix] != 1:
                continue
            if ix == 0 or ix == w - 1 or iy == 0 or iy == h - 1:
                out[iy, ix] = 1
            elif (cells[iy, ix - 1] == 0 or cells[iy, ix + 1] == 0
                  or cells[iy - 1, ix] == 0 or cells[iy + 1, ix] == 0):
                out[iy, ix] = 1
    return out


@njit(cache=True)
def _heap_push(hf, hid, size, f, idv):
    i = size
    hf[i] = f
    hid[i] = idv
    while i > 0:
        p = (i - 1) >> 1
        if hf[p] > hf[i] or (hf[p] == hf[i] and hid[p] > hid[i]):
            hf[p], hf[i] = hf[i], hf[p]
            hid[p], hid[i] = hid[i], hid[p]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(hf, hid, size):
    f = hf[0]
    idv = hid[0]
    size -= 1
    hf[0] = hf[size]
    hid[0] = hid[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        m = i
        if left < size and (hf[left] < hf[m] or (hf[left] == hf[m] and hid[left] < hid[m])):
            m = left
        if right < size and (hf[right] < hf[m] or (hf[right] == hf[m] and hid[right] < hid[m])):
            m = right
        if m == i:
            break
        hf[m], hf[i] = hf[i], hf[m]
        hid[m], hid[i] = hid[i], hid[m]
        i = m
    return f, idv, size


@njit(cache=True)
def grid_search(passable, sx, sy, use_goal_mask, goal_mask, gx, gy, use_astar):
    """8-connected shortest path; axial edges cost 1, diagonals sqrt(2).

    Cell ids are ix * h + iy so heap ties resolve lexicographically by
    (ix, iy); with use_goal_mask the first goal cell popped is therefore the
    nearest-by-cost, lexicographically smallest one. With use_astar an octile
    heuristic to (gx, gy) is added (single-goal queries only). The start cell's
    own passability is intentionally not tested (callers exempt the cell the
    agent already occupies from inflation).

    Returns (found, tx, ty, parent) with parent mapping cell id -> predecessor
    id (-1 at the start and for unreached cells).
    """
    h, w = passable.shape
    n = h * w
    g = np.full(n, 1e30, np.float64)
    parent = np.full(n, -1, np.int64)
    closed = np.zeros(n, np.uint8)
    cap = 16 * n + 16
    hf = np.empty(cap, np.float64)
    hid = np.empty(cap, np.int64)
    size = 0
    sid = sx * h + sy
    g[sid] = 0.0
    f0 = 0.0
    if use_astar != 0:
        ax = abs(sx - gx)
        ay = abs(sy - gy)
        mn = min(ax, ay)
        f0 = (ax + ay - 2 * mn) + SQRT2 * mn
    size = _heap_push(hf, hid, size, f0, sid)
    found = 0
    tx = -1
    ty = -1
    while size > 0:
        f, idv, size = _heap_pop(hf, hid, size)
        if closed[idv] != 0:
            continue
        closed[idv] = 1
        ix = idv // h
        iy = idv % h
        if use_goal_mask != 0:
            if goal_mask[iy, ix] != 0:
                found = 1
                tx = ix
                ty = iy
                break
        elif ix == gx and iy == gy:
            found = 1
            tx = ix
            ty = iy
            break
        gc = g[idv]
        for dxn in range(-1, 2):
            for dyn in range(-1, 2):
                if dxn == 0 and dyn == 0:
                    continue
                jx = ix + dxn
                jy = iy + dyn
                if jx < 0 or jx >= w or jy < 0 or jy >= h:
                    continue
                if passable[jy, jx] == 0:
                    continue
                if dxn != 0 and dyn != 0:
                    ng = gc + SQRT2
                else:
                    ng = gc + 1.0
                jid = jx * h + jy
                if ng < g[jid]:
                    g[jid] = ng
                    parent[jid] = idv
                    fv = ng
                    if use_astar != 0:
                        ax = abs(jx - gx)
                        ay = abs(jy - gy)
                        mn = min(ax, ay)
                        fv = ng + (ax + ay - 2 * mn) + SQRT2 * mn
                    size = _heap_push(hf, hid, size, fv, jid)
    return found, tx, ty, parent


@njit(cache=True)
def crop_majority(states, n, sub):
    """Reduce an (n*sub, n*sub) sampled state grid to (n, n) by block majority.

    The vote is over covered (Free/Occupied) samples only; a cell is Unknown
    only when no sample in its block is covered. Occupied wins ties.
    """
    out = np.zeros((n, n), np.uint8)
    for r in range(n):
        for c in range(n):
            n_free = 0
            n_occ = 0
            for a in range(sub):
                for b in range(sub):
                    s = states[r * sub + a, c * sub + b]
                    if s == 1:
                        n_free += 1
                    elif s == 2:
                        n_occ += 1
            if n_occ >= n_free and n_occ > 0:
                out[r, c] = 2
            elif n_free > 0:
                out[r, c] = 1
    return out


def warmup():
    """Force-compile every kernel on tiny inputs (cached across runs)."""
    opaque = np.ones((8, 8), np.uint8)
    opaque[1:7, 1:7] = 0
    depths = np.empty(3)
    clipped = np.empty(3, np.uint8)
    angles = np.array([0.0, 0.7, 2.0])
    cast_rays(opaque, 0.12, 0.13, angles, 3.0, 0.05, depths, clipped)
    cells = np.zeros((16, 16), np.uint8)
    integrate_scan(cells, 0, 0, 0.12, 0.13, angles, depths, clipped, 0.05)
    off = np.array([0, 1, -1], np.int64)
    p = passable_mask(cells, 1, off, off)
    fm = frontier_mask(cells)
    grid_search(p, 2, 2, 1, fm, 0, 0, 0)
    grid_search(p, 2, 2, 0, fm, 5, 5, 1)
    crop_majority(cells, 4, 4)
