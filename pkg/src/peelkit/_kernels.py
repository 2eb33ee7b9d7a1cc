"""Numba-compiled ray traversal and distance kernels.

All kernels are deterministic under any thread count: parallel loops write
only to their own output slots (or set flags monotonically), so results are
bit-identical whether run on 1 or N threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

MAX_HITS_BUFFER = 64   # per-ray hit capacity before truncation to max_hits
DUP_T_TOL = 1e-9       # hits closer than this in t are merged
STACK_SIZE = 128


@njit(cache=True)
def build_bvh_arrays(tri_min, tri_max, centroids, leaf_size,
                     prim, node_min, node_max, node_left, node_right,
                     node_start, node_count):
    """Median-split BVH build over pre-sized node arrays.

    prim arrives as the identity permutation and is reordered in place.
    Returns the number of nodes used."""
    n = tri_min.shape[0]
    n_nodes = 1
    stack_node = np.empty(2 * n + 2, dtype=np.int64)
    stack_lo = np.empty(2 * n + 2, dtype=np.int64)
    stack_hi = np.empty(2 * n + 2, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        for k in range(3):
            bmin = np.inf
            bmax = -np.inf
            cmin = np.inf
            cmax = -np.inf
            for j in range(lo, hi):
                tri = prim[j]
                if tri_min[tri, k] < bmin:
                    bmin = tri_min[tri, k]
                if tri_max[tri, k] > bmax:
                    bmax = tri_max[tri, k]
                if centroids[tri, k] < cmin:
                    cmin = centroids[tri, k]
                if centroids[tri, k] > cmax:
                    cmax = centroids[tri, k]
            node_min[node, k] = bmin
            node_max[node, k] = bmax
            if k == 0:
                ext0 = cmax - cmin
            elif k == 1:
                ext1 = cmax - cmin
            else:
                ext2 = cmax - cmin
        count = hi - lo
        axis = 0
        ext = ext0
        if ext1 > ext:
            axis = 1
            ext = ext1
        if ext2 > ext:
            axis = 2
            ext = ext2
        if count <= leaf_size or ext == 0.0:
            node_left[node] = -1
            node_right[node] = -1
            node_start[node] = lo
            node_count[node] = count
            continue
        keys = np.empty(count)
        for j in range(count):
            keys[j] = centroids[prim[lo + j], axis]
        order = np.argsort(keys)
        tmp = np.empty(count, dtype=np.int64)
        for j in range(count):
            tmp[j] = prim[lo + order[j]]
        for j in range(count):
            prim[lo + j] = tmp[j]
        mid = lo + count // 2
        left = n_nodes
        right = n_nodes + 1
        n_nodes += 2
        node_left[node] = left
        node_right[node] = right
        node_start[node] = 0
        node_count[node] = 0
        stack_node[top] = left
        stack_lo[top] = lo
        stack_hi[top] = mid
        top += 1
        stack_node[top] = right
        stack_lo[top] = mid
        stack_hi[top] = hi
        top += 1
    return n_nodes


@njit(cache=True, inline="always")
def _aabb_hit(ox, oy, oz, ix, iy, iz, bmin, bmax, t_max):
    """Slab test; inv-direction components may be +-inf."""
    t0 = 0.0
    t1 = t_max
    for k in range(3):
        o = ox if k == 0 else (oy if k == 1 else oz)
        inv = ix if k == 0 else (iy if k == 1 else iz)
        lo = (bmin[k] - o) * inv
        hi = (bmax[k] - o) * inv
        if lo > hi:
            lo, hi = hi, lo
        if lo > t0:
            t0 = lo
        if hi < t1:
            t1 = hi
        if t0 > t1:
            return False
    return True


@njit(cache=True, inline="always")
def _ray_triangle(ox, oy, oz, dx, dy, dz, a, b, c):
    """Moller-Trumbore without backface culling.

    Returns (hit, t, u, v); u, v are barycentric weights of vertices b, c.
    """
    e1x = b[0] - a[0]
    e1y = b[1] - a[1]
    e1z = b[2] - a[2]
    e2x = c[0] - a[0]
    e2y = c[1] - a[1]
    e2z = c[2] - a[2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -1e-14 < det < 1e-14:
        return False, 0.0, 0.0, 0.0
    inv_det = 1.0 / det
    tx = ox - a[0]
    ty = oy - a[1]
    tz = oz - a[2]
    u = (tx * px + ty * py + tz * pz) * inv_det
    if u < 0.0 or u > 1.0:
        return False, 0.0, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv_det
    if v < 0.0 or u + v > 1.0:
        return False, 0.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
    return True, t, u, v


@njit(cache=True)
def _collect_hits(ox, oy, oz, dx, dy, dz, t_min, t_max,
                  node_min, node_max, node_left, node_right,
                  node_start, node_count, prim_order, face_ids,
                  tri_a, tri_b, tri_c,
                  buf_t, buf_face, buf_u, buf_v):
    """Gather every intersection with t in (t_min, t_max] into sorted buffers.

    Returns the number of buffered hits (capped at the buffer size, keeping
    the nearest ones)."""
    ix = 1.0 / dx if dx != 0.0 else np.inf
    iy = 1.0 / dy if dy != 0.0 else np.inf
    iz = 1.0 / dz if dz != 0.0 else np.inf
    cap = buf_t.shape[0]
    n = 0
    cutoff = t_max
    stack = np.empty(STACK_SIZE, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _aabb_hit(ox, oy, oz, ix, iy, iz,
                         node_min[node], node_max[node], cutoff):
            continue
        if node_left[node] < 0:
            for k in range(node_start[node], node_start[node] + node_count[node]):
                tri = prim_order[k]
                ok, t, u, v = _ray_triangle(ox, oy, oz, dx, dy, dz,
                                            tri_a[tri], tri_b[tri], tri_c[tri])
                if ok and t_min < t <= cutoff:
                    # insertion sort by t; ties resolved later by dedup
                    if n < cap:
                        n += 1
                    elif t >= buf_t[n - 1]:
                        continue
                    j = n - 1
                    while j > 0 and buf_t[j - 1] > t:
                        buf_t[j] = buf_t[j - 1]
                        buf_face[j] = buf_face[j - 1]
                        buf_u[j] = buf_u[j - 1]
                        buf_v[j] = buf_v[j - 1]
                        j -= 1
                    buf_t[j] = t
                    buf_face[j] = face_ids[tri]
                    buf_u[j] = u
                    buf_v[j] = v
                    if n == cap:
                        cutoff = buf_t[n - 1]
        else:
            stack[top] = node_left[node]
            top += 1
            stack[top] = node_right[node]
            top += 1
    return n


@njit(cache=True)
def _dedup_hits(n, buf_t, buf_face, buf_u, buf_v):
    """Merge runs of near-equal t (shared edges/vertices), keeping the
    record with the smallest face id in each run."""
    if n <= 1:
        return n
    out = 0
    i = 0
    while i < n:
        best = i
        j = i + 1
        while j < n and buf_t[j] - buf_t[j - 1] < DUP_T_TOL:
            if buf_face[j] < buf_face[best]:
                best = j
            j += 1
        buf_t[out] = buf_t[best]
        buf_face[out] = buf_face[best]
        buf_u[out] = buf_u[best]
        buf_v[out] = buf_v[best]
        out += 1
        i = j
    return out


@njit(cache=True, parallel=True)
def trace_rays(origins, dirs, t_min, t_max,
               node_min, node_max, node_left, node_right,
               node_start, node_count, prim_order, face_ids,
               tri_a, tri_b, tri_c, max_hits,
               out_t, out_face, out_u, out_v, out_n):
    """Multi-hit trace of a ray batch; nearest max_hits per ray after dedup."""
    n_rays = origins.shape[0]
    for r in prange(n_rays):
        buf_t = np.empty(MAX_HITS_BUFFER, dtype=np.float64)
        buf_face = np.empty(MAX_HITS_BUFFER, dtype=np.int64)
        buf_u = np.empty(MAX_HITS_BUFFER, dtype=np.float64)
        buf_v = np.empty(MAX_HITS_BUFFER, dtype=np.float64)
        n = _collect_hits(origins[r, 0], origins[r, 1], origins[r, 2],
                          dirs[r, 0], dirs[r, 1], dirs[r, 2], t_min, t_max,
                          node_min, node_max, node_left, node_right,
                          node_start, node_count, prim_order, face_ids,
                          tri_a, tri_b, tri_c, buf_t, buf_face, buf_u, buf_v)
        n = _dedup_hits(n, buf_t, buf_face, buf_u, buf_v)
        if n > max_hits:
            n = max_hits
        out_n[r] = n
        for k in range(n):
            out_t[r, k] = buf_t[k]
            out_face[r, k] = buf_face[k]
            out_u[r, k] = buf_u[k]
            out_v[r, k] = buf_v[k]


@njit(cache=True, parallel=True)
def mark_hit_faces(origins, dirs, t_min, t_max,
                   node_min, node_max, node_left, node_right,
                   node_start, node_count, prim_order, face_ids,
                   tri_a, tri_b, tri_c, hit_mask):
    """Set hit_mask[f] for every face intersected within (t_min, t_max].

    Flags are only ever raised, so concurrent writes commute."""
    n_rays = origins.shape[0]
    for r in prange(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        ix = 1.0 / dx if dx != 0.0 else np.inf
        iy = 1.0 / dy if dy != 0.0 else np.inf
        iz = 1.0 / dz if dz != 0.0 else np.inf
        stack = np.empty(STACK_SIZE, dtype=np.int64)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if not _aabb_hit(ox, oy, oz, ix, iy, iz,
                             node_min[node], node_max[node], t_max):
                continue
            if node_left[node] < 0:
                for k in range(node_start[node], node_start[node] + node_count[node]):
                    tri = prim_order[k]
                    ok, t, u, v = _ray_triangle(ox, oy, oz, dx, dy, dz,
                                                tri_a[tri], tri_b[tri], tri_c[tri])
                    if ok and t_min < t <= t_max:
                        hit_mask[face_ids[tri]] = True
            else:
                stack[top] = node_left[node]
                top += 1
                stack[top] = node_right[node]
                top += 1


@njit(cache=True, inline="always")
def _tri_dist_sq(px, py, pz, a, b, c):
    """Squared distance from point p to triangle abc (Ericson regions)."""
    abx = b[0] - a[0]
    aby = b[1] - a[1]
    abz = b[2] - a[2]
    acx = c[0] - a[0]
    acy = c[1] - a[1]
    acz = c[2] - a[2]
    apx = px - a[0]
    apy = py - a[1]
    apz = pz - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx = px - b[0]
    bpy = py - b[1]
    bpz = pz - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        w = d1 / (d1 - d3)
        qx = apx - w * abx
        qy = apy - w * aby
        qz = apz - w * abz
        return qx * qx + qy * qy + qz * qz
    cpx = px - c[0]
    cpy = py - c[1]
    cpz = pz - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        qx = apx - w * acx
        qy = apy - w * acy
        qz = apz - w * acz
        return qx * qx + qy * qy + qz * qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = px - (b[0] + w * (c[0] - b[0]))
        qy = py - (b[1] + w * (c[1] - b[1]))
        qz = pz - (b[2] + w * (c[2] - b[2]))
        return qx * qx + qy * qy + qz * qz
    denom = va + vb + vc
    wb = vb / denom
    wc = vc / denom
    qx = px - (a[0] + wb * abx + wc * acx)
    qy = py - (a[1] + wb * aby + wc * acy)
    qz = pz - (a[2] + wb * abz + wc * acz)
    return qx * qx + qy * qy + qz * qz


@njit(cache=True, inline="always")
def _aabb_dist_sq(px, py, pz, bmin, bmax):
    d = 0.0
    for k in range(3):
        p = px if k == 0 else (py if k == 1 else pz)
        if p < bmin[k]:
            d += (bmin[k] - p) ** 2
        elif p > bmax[k]:
            d += (p - bmax[k]) ** 2
    return d


@njit(cache=True, parallel=True)
def closest_distances(points, node_min, node_max, node_left, node_right,
                      node_start, node_count, prim_order,
                      tri_a, tri_b, tri_c, out_dist):
    """Exact unsigned distance from each point to the nearest triangle."""
    n_pts = points.shape[0]
    for i in prange(n_pts):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        stack = np.empty(STACK_SIZE, dtype=np.int64)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _aabb_dist_sq(px, py, pz, node_min[node], node_max[node]) >= best:
                continue
            if node_left[node] < 0:
                for k in range(node_start[node], node_start[node] + node_count[node]):
                    tri = prim_order[k]
                    d = _tri_dist_sq(px, py, pz, tri_a[tri], tri_b[tri], tri_c[tri])
                    if d < best:
                        best = d
            else:
                l = node_left[node]
                r = node_right[node]
                dl = _aabb_dist_sq(px, py, pz, node_min[l], node_max[l])
                dr = _aabb_dist_sq(px, py, pz, node_min[r], node_max[r])
                if dl <= dr:
                    stack[top] = r
                    top += 1
                    stack[top] = l
                    top += 1
                else:
                    stack[top] = l
                    top += 1
                    stack[top] = r
                    top += 1
        out_dist[i] = np.sqrt(best)
