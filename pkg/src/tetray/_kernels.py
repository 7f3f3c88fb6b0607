"""Numba-compiled hot loops: point location, partition traversal, ray marching.

Every piece of math exposed at the API level (step size, opacity correction,
field sampling, interval finding, marching) lives here exactly once; the
Python wrappers and the full-frame renderer call the same compiled functions,
so single-ray results and frame pixels agree bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

# Barycentric acceptance tolerance: coordinates >= -BARY_TOL count as inside.
BARY_TOL = 1e-9

_STACK = 128  # BVH traversal stack depth; ample for median-split trees


@njit(cache=True)
def step_size(s1, s2, p, sigma):
    return max(s1 + (s2 - s1) * abs(min(sigma, 1.0) - 1.0) ** p, s1)


@njit(cache=True)
def opacity_correction(alpha, s, s1):
    return 1.0 - (1.0 - alpha) ** (s / s1)


@njit(cache=True)
def slab(ox, oy, oz, dx, dy, dz, lx, ly, lz, hx, hy, hz):
    """Ray/box interval (t0, t1); a miss returns t0 > t1."""
    t0 = -np.inf
    t1 = np.inf
    if dx != 0.0:
        inv = 1.0 / dx
        a = (lx - ox) * inv
        b = (hx - ox) * inv
        if a > b:
            a, b = b, a
        if a > t0:
            t0 = a
        if b < t1:
            t1 = b
    elif ox < lx or ox > hx:
        return 1.0, 0.0
    if dy != 0.0:
        inv = 1.0 / dy
        a = (ly - oy) * inv
        b = (hy - oy) * inv
        if a > b:
            a, b = b, a
        if a > t0:
            t0 = a
        if b < t1:
            t1 = b
    elif oy < ly or oy > hy:
        return 1.0, 0.0
    if dz != 0.0:
        inv = 1.0 / dz
        a = (lz - oz) * inv
        b = (hz - oz) * inv
        if a > b:
            a, b = b, a
        if a > t0:
            t0 = a
        if b < t1:
            t1 = b
    elif oz < lz or oz > hz:
        return 1.0, 0.0
    return t0, t1


@njit(cache=True)
def tf_sample(table, lo, hi, v):
    """Piecewise-linear RGBA lookup, clamped at the domain ends."""
    n = table.shape[0]
    u = (v - lo) / (hi - lo) * (n - 1)
    if u <= 0.0:
        return table[0, 0], table[0, 1], table[0, 2], table[0, 3]
    if u >= n - 1:
        m = n - 1
        return table[m, 0], table[m, 1], table[m, 2], table[m, 3]
    j = int(np.floor(u))
    f = u - j
    r = table[j, 0] + f * (table[j + 1, 0] - table[j, 0])
    g = table[j, 1] + f * (table[j + 1, 1] - table[j, 1])
    b = table[j, 2] + f * (table[j + 1, 2] - table[j, 2])
    a = table[j, 3] + f * (table[j + 1, 3] - table[j, 3])
    return r, g, b, a


@njit(cache=True)
def locate_point(px, py, pz,
                 nlo, nhi, left, right, start, count, prim,
                 tets, tet_orig, tet_inv):
    """Lowest-index tetrahedron containing the point, with its barycentrics.

    Returns (tet_id, l0, l1, l2, l3); tet_id == -1 when no tet contains the
    point. Node boxes are pre-padded at build time so the -BARY_TOL slack
    can never escape the pruning.
    """
    best = np.int64(-1)
    b0 = b1 = b2 = b3 = 0.0
    stack = np.empty(_STACK, dtype=np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if (px < nlo[ni, 0] or px > nhi[ni, 0] or
                py < nlo[ni, 1] or py > nhi[ni, 1] or
                pz < nlo[ni, 2] or pz > nhi[ni, 2]):
            continue
        if left[ni] < 0:
            s = start[ni]
            for k in range(s, s + count[ni]):
                t = prim[k]
                if best >= 0 and t >= best:
                    continue
                qx = px - tet_orig[t, 0]
                qy = py - tet_orig[t, 1]
                qz = pz - tet_orig[t, 2]
                l1 = tet_inv[t, 0, 0] * qx + tet_inv[t, 0, 1] * qy + tet_inv[t, 0, 2] * qz
                l2 = tet_inv[t, 1, 0] * qx + tet_inv[t, 1, 1] * qy + tet_inv[t, 1, 2] * qz
                l3 = tet_inv[t, 2, 0] * qx + tet_inv[t, 2, 1] * qy + tet_inv[t, 2, 2] * qz
                l0 = 1.0 - l1 - l2 - l3
                if l0 >= -BARY_TOL and l1 >= -BARY_TOL and l2 >= -BARY_TOL and l3 >= -BARY_TOL:
                    best = t
                    b0, b1, b2, b3 = l0, l1, l2, l3
        else:
            stack[sp] = left[ni]
            sp += 1
            stack[sp] = right[ni]
            sp += 1
    return best, b0, b1, b2, b3


@njit(cache=True)
def field_at(px, py, pz,
             nlo, nhi, left, right, start, count, prim,
             tets, tet_orig, tet_inv, field_vals, centering):
    """(found, value) at a point; vertex-centered interpolates barycentrically,
    cell-centered is constant per tet."""
    t, l0, l1, l2, l3 = locate_point(px, py, pz, nlo, nhi, left, right,
                                     start, count, prim, tets, tet_orig, tet_inv)
    if t < 0:
        return False, 0.0
    if centering == 0:
        v = (l0 * field_vals[tets[t, 0]] + l1 * field_vals[tets[t, 1]] +
             l2 * field_vals[tets[t, 2]] + l3 * field_vals[tets[t, 3]])
    else:
        v = field_vals[t]
    return True, v


@njit(cache=True)
def field_at_many(pts,
                  nlo, nhi, left, right, start, count, prim,
                  tets, tet_orig, tet_inv, field_vals, centering):
    n = pts.shape[0]
    found = np.zeros(n, dtype=np.bool_)
    vals = np.zeros(n, dtype=np.float64)
    for i in range(n):
        f, v = field_at(pts[i, 0], pts[i, 1], pts[i, 2],
                        nlo, nhi, left, right, start, count, prim,
                        tets, tet_orig, tet_inv, field_vals, centering)
        found[i] = f
        vals[i] = v
    return found, vals


@njit(cache=True)
def next_interval(ox, oy, oz, dx, dy, dz, t_min, t_max, excl_eps, excl_id,
                  nlo, nhi, left, right, start, count, prim,
                  p_lo, p_hi, active):
    """First active partition interval along the ray.

    Candidates are partitions whose slab interval satisfies
    t_exit > t_min + excl_eps and clamped t_enter < t_max, excluding excl_id;
    the winner has the smallest clamped t_enter, ties broken by lower id.
    Returns (pid, t_enter, t_exit) with pid == -1 when none remains.
    """
    best_id = np.int64(-1)
    best_a = np.inf
    best_b = np.inf
    stack = np.empty(_STACK, dtype=np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        a, b = slab(ox, oy, oz, dx, dy, dz,
                    nlo[ni, 0], nlo[ni, 1], nlo[ni, 2],
                    nhi[ni, 0], nhi[ni, 1], nhi[ni, 2])
        if a > b:
            continue
        if b <= t_min + excl_eps:
            continue
        a_cl = a if a > t_min else t_min
        if a_cl >= t_max:
            continue
        if a_cl > best_a:
            continue
        if left[ni] < 0:
            s = start[ni]
            for k in range(s, s + count[ni]):
                pid = prim[k]
                if pid == excl_id or active[pid] == 0:
                    continue
                pa, pb = slab(ox, oy, oz, dx, dy, dz,
                              p_lo[pid, 0], p_lo[pid, 1], p_lo[pid, 2],
                              p_hi[pid, 0], p_hi[pid, 1], p_hi[pid, 2])
                if pa > pb:
                    continue
                if pb <= t_min + excl_eps:
                    continue
                pa_cl = pa if pa > t_min else t_min
                if pa_cl >= t_max:
                    continue
                if pa_cl < best_a or (pa_cl == best_a and pid < best_id):
                    best_id = pid
                    best_a = pa_cl
                    best_b = pb
        else:
            stack[sp] = left[ni]
            sp += 1
            stack[sp] = right[ni]
            sp += 1
    return best_id, best_a, best_b


@njit(cache=True)
def trace_intervals(ox, oy, oz, dx, dy, dz, t_min0, t_max, eps,
                    nlo, nhi, left, right, start, count, prim,
                    p_lo, p_hi, active,
                    out_ids, out_enter, out_exit):
    """Full front-to-back traversal of one ray; returns interval count.

    The first query uses no exclusion epsilon (fresh ray); subsequent queries
    exclude t_exit <= t_min + eps plus the just-visited id.
    """
    t_min = t_min0
    last = np.int64(-1)
    n = 0
    while n < out_ids.shape[0]:
        excl = 0.0 if last < 0 else eps
        pid, a, b = next_interval(ox, oy, oz, dx, dy, dz, t_min, t_max,
                                  excl, last, nlo, nhi, left, right, start,
                                  count, prim, p_lo, p_hi, active)
        if pid < 0:
            break
        out_ids[n] = pid
        out_enter[n] = a
        out_exit[n] = b
        n += 1
        t_min = b - eps
        last = pid
    return n


@njit(cache=True)
def march_range(ox, oy, oz, dx, dy, dz, t0, t1, step, s1, term, phase,
                tf_table, tf_lo, tf_hi,
                nlo, nhi, left, right, start, count, prim,
                tets, tet_orig, tet_inv, field_vals, centering,
                acc_r, acc_g, acc_b, acc_a):
    """Front-to-back compositing along [t0, t1) at positions
    t0 + (k + phase) * step. The k=0 sample is always taken; points outside
    every tet count as samples but contribute nothing.

    Returns (r, g, b, a, samples, terminated).
    """
    samples = 0
    terminated = False
    k = 0
    while True:
        t = t0 + (k + phase) * step
        if k > 0 and t >= t1:
            break
        samples += 1
        found, v = field_at(ox + t * dx, oy + t * dy, oz + t * dz,
                            nlo, nhi, left, right, start, count, prim,
                            tets, tet_orig, tet_inv, field_vals, centering)
        if found:
            r, g, b, a = tf_sample(tf_table, tf_lo, tf_hi, v)
            ca = opacity_correction(a, step, s1)
            w = (1.0 - acc_a) * ca
            acc_r += w * r
            acc_g += w * g
            acc_b += w * b
            acc_a += w
            if acc_a >= term:
                terminated = True
                break
        k += 1
    return acc_r, acc_g, acc_b, acc_a, samples, terminated


@njit(cache=True)
def _hash01(ix, iy):
    # Wang-hash based per-pixel phase in [0, 1); wraps on uint32 overflow.
    h = np.uint32(ix) * np.uint32(73856093) ^ np.uint32(iy) * np.uint32(19349663)
    h = (h ^ np.uint32(61)) ^ (h >> np.uint32(16))
    h = h * np.uint32(9)
    h = h ^ (h >> np.uint32(4))
    h = h * np.uint32(0x27D4EB2D)
    h = h ^ (h >> np.uint32(15))
    return float(h) / 4294967296.0


@njit(cache=True, parallel=True)
def render_frame(cam_pos, cam_right, cam_up, cam_fwd, tan_half, aspect,
                 width, height, jitter,
                 mode, s1, s2, p_pow, term, eps, bg,
                 tf_table, tf_lo, tf_hi,
                 mesh_lo, mesh_hi,
                 b_nlo, b_nhi, b_left, b_right, b_start, b_count, b_prim,
                 p_lo, p_hi, active, sigma,
                 m_nlo, m_nhi, m_left, m_right, m_start, m_count, m_prim,
                 tets, tet_orig, tet_inv, field_vals, centering,
                 out_rgba, out_samples, out_visited, out_ppart, track_ppart):
    """Render one frame. mode: 0 = reference, 1 = skip only, 2 = skip+adaptive.

    Rows are independent (each pixel writes only its own outputs plus its
    row's slice of out_ppart), so the image is identical for any thread count.
    """
    for iy in prange(height):
        for ix in range(width):
            sx = ((ix + 0.5) / width) * 2.0 - 1.0
            sy = 1.0 - ((iy + 0.5) / height) * 2.0
            dx = cam_fwd[0] + sx * aspect * tan_half * cam_right[0] + sy * tan_half * cam_up[0]
            dy = cam_fwd[1] + sx * aspect * tan_half * cam_right[1] + sy * tan_half * cam_up[1]
            dz = cam_fwd[2] + sx * aspect * tan_half * cam_right[2] + sy * tan_half * cam_up[2]
            dn = 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
            dx *= dn
            dy *= dn
            dz *= dn
            ox, oy, oz = cam_pos[0], cam_pos[1], cam_pos[2]
            phase = _hash01(ix, iy) if jitter else 0.5

            acc_r = acc_g = acc_b = acc_a = 0.0
            samples = 0
            visited = 0

            if mode == 0:
                a, b = slab(ox, oy, oz, dx, dy, dz,
                            mesh_lo[0], mesh_lo[1], mesh_lo[2],
                            mesh_hi[0], mesh_hi[1], mesh_hi[2])
                t0 = a if a > 0.0 else 0.0
                # corner grazes shorter than eps integrate to nothing and are
                # dropped, matching the partition-march rule
                if a <= b and b - t0 >= eps:
                    acc_r, acc_g, acc_b, acc_a, samples, _ = march_range(
                        ox, oy, oz, dx, dy, dz, t0, b, s1, s1, term, phase,
                        tf_table, tf_lo, tf_hi,
                        m_nlo, m_nhi, m_left, m_right, m_start, m_count,
                        m_prim, tets, tet_orig, tet_inv, field_vals,
                        centering, acc_r, acc_g, acc_b, acc_a)
            else:
                t_min = 0.0
                last = np.int64(-1)
                while True:
                    excl = 0.0 if last < 0 else eps
                    pid, a, b = next_interval(ox, oy, oz, dx, dy, dz, t_min,
                                              np.inf, excl, last,
                                              b_nlo, b_nhi, b_left, b_right,
                                              b_start, b_count, b_prim,
                                              p_lo, p_hi, active)
                    if pid < 0:
                        break
                    visited += 1
                    terminated = False
                    if b - a >= eps:
                        if mode == 2:
                            s = step_size(s1, s2, p_pow, sigma[pid])
                        else:
                            s = s1
                        acc_r, acc_g, acc_b, acc_a, ns, terminated = march_range(
                            ox, oy, oz, dx, dy, dz, a, b, s, s1, term, phase,
                            tf_table, tf_lo, tf_hi,
                            m_nlo, m_nhi, m_left, m_right, m_start, m_count,
                            m_prim, tets, tet_orig, tet_inv, field_vals,
                            centering, acc_r, acc_g, acc_b, acc_a)
                        samples += ns
                        if track_ppart:
                            out_ppart[iy, pid] += ns
                    if terminated:
                        break
                    t_min = b - eps
                    last = pid

            out_rgba[iy, ix, 0] = acc_r + (1.0 - acc_a) * bg[0]
            out_rgba[iy, ix, 1] = acc_g + (1.0 - acc_a) * bg[1]
            out_rgba[iy, ix, 2] = acc_b + (1.0 - acc_a) * bg[2]
            out_rgba[iy, ix, 3] = acc_a + (1.0 - acc_a) * bg[3]
            out_samples[iy, ix] = samples
            out_visited[iy, ix] = visited
