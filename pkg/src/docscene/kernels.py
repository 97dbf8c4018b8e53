"""Compiled tracing kernels.

Everything here is deterministic given the scene arrays and seed: per-sample
randomness is a counter-based stream keyed by (seed, pixel index, sample
index), never by execution order, so any tiling or thread schedule produces
bit-identical images. Geometry math is float64 throughout with no fast-math,
which keeps BVH traversal exactly equal to brute-force triangle testing.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

JIT = dict(cache=True, nogil=True, error_model="numpy", fastmath=False)

U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_K_PIXEL = U64(0x5851F42D4C957F2D)
_K_SAMPLE = U64(0x14057B7EF767814F)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)
_S11 = U64(11)
_INV_2_53 = 1.0 / 9007199254740992.0

EPS_T = 1e-5  # minimum accepted hit distance / shadow epsilon, meters
STACK_DEPTH = 64


# --- counter-based RNG -----------------------------------------------------------

@njit(**JIT)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(**JIT)
def _rng_key(seed, pixel, sample):
    h = _mix64(seed + _GAMMA)
    h = _mix64(h ^ (pixel * _K_PIXEL + _GAMMA))
    h = _mix64(h ^ (sample * _K_SAMPLE + _GAMMA))
    return h


@njit(**JIT)
def _rng_next(state):
    state = state + _GAMMA
    z = _mix64(state)
    return state, (z >> _S11) * _INV_2_53


# --- intersection ------------------------------------------------------------------

@njit(**JIT)
def _tri_hit(ox, oy, oz, dx, dy, dz,
             ax, ay, az, e1x, e1y, e1z, e2x, e2y, e2z):
    """Moller-Trumbore; returns (t, u, v), t = inf on miss/parallel."""
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-14:
        return np.inf, 0.0, 0.0
    inv = 1.0 / det
    sx = ox - ax
    sy = oy - ay
    sz = oz - az
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf, 0.0, 0.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t, u, v


@njit(**JIT)
def _inv_dir(d):
    """Finite inverse-direction component; zero maps to a huge value so slab
    products never produce NaN."""
    if d > 1e-300 or d < -1e-300:
        return 1.0 / d
    return 1e300


@njit(**JIT)
def _slabs(bmin, bmax, node, ox, oy, oz, ix, iy, iz):
    """Slab interval (tn, tf) of a node AABB along the ray."""
    t1 = (bmin[node, 0] - ox) * ix
    t2 = (bmax[node, 0] - ox) * ix
    if t1 < t2:
        tn = t1
        tf = t2
    else:
        tn = t2
        tf = t1
    t1 = (bmin[node, 1] - oy) * iy
    t2 = (bmax[node, 1] - oy) * iy
    if t1 > t2:
        t1, t2 = t2, t1
    if t1 > tn:
        tn = t1
    if t2 < tf:
        tf = t2
    t1 = (bmin[node, 2] - oz) * iz
    t2 = (bmax[node, 2] - oz) * iz
    if t1 > t2:
        t1, t2 = t2, t1
    if t1 > tn:
        tn = t1
    if t2 < tf:
        tf = t2
    return tn, tf


@njit(**JIT)
def _bvh_nearest(bmin, bmax, bleft, bcount, border, tv0, te1, te2,
                 ox, oy, oz, dx, dy, dz, stack, tstack):
    """Nearest hit beyond EPS_T, near-child-first traversal; ties resolve
    toward the lowest triangle index so the result matches ordered
    brute-force testing exactly."""
    ix = _inv_dir(dx)
    iy = _inv_dir(dy)
    iz = _inv_dir(dz)
    best_t = np.inf
    best_i = -1
    best_u = 0.0
    best_v = 0.0
    stack[0] = 0
    tstack[0] = -np.inf
    sp = 1
    while sp > 0:
        sp -= 1
        if tstack[sp] > best_t:
            continue
        node = stack[sp]
        c = bcount[node]
        if c > 0:
            first = bleft[node]
            for k in range(first, first + c):
                ti = border[k]
                t, u, v = _tri_hit(ox, oy, oz, dx, dy, dz,
                                   tv0[ti, 0], tv0[ti, 1], tv0[ti, 2],
                                   te1[ti, 0], te1[ti, 1], te1[ti, 2],
                                   te2[ti, 0], te2[ti, 1], te2[ti, 2])
                if t > EPS_T and (t < best_t or (t == best_t and ti < best_i)):
                    best_t = t
                    best_i = ti
                    best_u = u
                    best_v = v
        else:
            left = bleft[node]
            right = left + 1
            tnl, tfl = _slabs(bmin, bmax, left, ox, oy, oz, ix, iy, iz)
            tnr, tfr = _slabs(bmin, bmax, right, ox, oy, oz, ix, iy, iz)
            hitl = tnl <= tfl and tfl > EPS_T and tnl <= best_t
            hitr = tnr <= tfr and tfr > EPS_T and tnr <= best_t
            if hitl and hitr:
                if tnl <= tnr:
                    stack[sp] = right
                    tstack[sp] = tnr
                    sp += 1
                    stack[sp] = left
                    tstack[sp] = tnl
                    sp += 1
                else:
                    stack[sp] = left
                    tstack[sp] = tnl
                    sp += 1
                    stack[sp] = right
                    tstack[sp] = tnr
                    sp += 1
            elif hitl:
                stack[sp] = left
                tstack[sp] = tnl
                sp += 1
            elif hitr:
                stack[sp] = right
                tstack[sp] = tnr
                sp += 1
    return best_t, best_i, best_u, best_v


@njit(**JIT)
def _bvh_occluded(bmin, bmax, bleft, bcount, border, tv0, te1, te2,
                  ox, oy, oz, dx, dy, dz, tmax, stack):
    ix = _inv_dir(dx)
    iy = _inv_dir(dy)
    iz = _inv_dir(dz)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        c = bcount[node]
        if c > 0:
            first = bleft[node]
            for k in range(first, first + c):
                ti = border[k]
                t, u, v = _tri_hit(ox, oy, oz, dx, dy, dz,
                                   tv0[ti, 0], tv0[ti, 1], tv0[ti, 2],
                                   te1[ti, 0], te1[ti, 1], te1[ti, 2],
                                   te2[ti, 0], te2[ti, 1], te2[ti, 2])
                if EPS_T < t < tmax:
                    return True
        else:
            left = bleft[node]
            right = left + 1
            tn, tf = _slabs(bmin, bmax, left, ox, oy, oz, ix, iy, iz)
            if tn <= tf and tf > EPS_T and tn <= tmax:
                stack[sp] = left
                sp += 1
            tn, tf = _slabs(bmin, bmax, right, ox, oy, oz, ix, iy, iz)
            if tn <= tf and tf > EPS_T and tn <= tmax:
                stack[sp] = right
                sp += 1
    return False


# --- shading helpers ----------------------------------------------------------------

@njit(**JIT)
def _tex_sample(tex_data, off, tw, th, u, v):
    """Bilinear fetch from a packed RGB float32 texture; clamped addressing,
    v=1 at the top texture row."""
    xw = float(tw - 1)
    yh = float(th - 1)
    x = u * xw
    y = (1.0 - v) * yh
    if x < 0.0:
        x = 0.0
    elif x > xw:
        x = xw
    if y < 0.0:
        y = 0.0
    elif y > yh:
        y = yh
    x0 = int(x)
    y0 = int(y)
    x1 = x0 + 1 if x0 + 1 <= tw - 1 else tw - 1
    y1 = y0 + 1 if y0 + 1 <= th - 1 else th - 1
    fx = x - x0
    fy = y - y0
    b00 = off + (y0 * tw + x0) * 3
    b01 = off + (y0 * tw + x1) * 3
    b10 = off + (y1 * tw + x0) * 3
    b11 = off + (y1 * tw + x1) * 3
    r = ((1.0 - fy) * ((1.0 - fx) * tex_data[b00] + fx * tex_data[b01])
         + fy * ((1.0 - fx) * tex_data[b10] + fx * tex_data[b11]))
    g = ((1.0 - fy) * ((1.0 - fx) * tex_data[b00 + 1] + fx * tex_data[b01 + 1])
         + fy * ((1.0 - fx) * tex_data[b10 + 1] + fx * tex_data[b11 + 1]))
    b = ((1.0 - fy) * ((1.0 - fx) * tex_data[b00 + 2] + fx * tex_data[b01 + 2])
         + fy * ((1.0 - fx) * tex_data[b10 + 2] + fx * tex_data[b11 + 2]))
    return r, g, b


@njit(**JIT)
def _cosine_dir(nx, ny, nz, u1, u2):
    """Cosine-weighted hemisphere direction about the unit normal."""
    s = 1.0 if nz >= 0.0 else -1.0
    a = -1.0 / (s + nz)
    b = nx * ny * a
    t1x = 1.0 + s * nx * nx * a
    t1y = s * b
    t1z = -s * nx
    t2x = b
    t2y = s + ny * ny * a
    t2z = -ny
    r = math.sqrt(u1)
    phi = 2.0 * math.pi * u2
    x = r * math.cos(phi)
    y = r * math.sin(phi)
    z = math.sqrt(max(0.0, 1.0 - u1))
    dx = x * t1x + y * t2x + z * nx
    dy = x * t1y + y * t2y + z * ny
    dz = x * t1z + y * t2z + z * nz
    return dx, dy, dz


# Camera array layout (float64): 0:3 position, 3:6 right, 6:9 up, 9:12 forward
# (roll already applied to right/up), 12 sensor width m, 13 sensor height m,
# 14 focal m, 15 aperture radius m (0 = pinhole), 16 focus distance m,
# 17 image width px, 18 image height px.

@njit(**JIT)
def _pinhole_dir(cam, px, py):
    sx = (px / cam[17] - 0.5) * cam[12]
    sy = (0.5 - py / cam[18]) * cam[13]
    f = cam[14]
    dx = cam[3] * sx + cam[6] * sy + cam[9] * f
    dy = cam[4] * sx + cam[7] * sy + cam[10] * f
    dz = cam[5] * sx + cam[8] * sy + cam[11] * f
    l = math.sqrt(dx * dx + dy * dy + dz * dz)
    return dx / l, dy / l, dz / l


@njit(**JIT)
def _camera_ray(cam, px, py, u1, u2):
    dx, dy, dz = _pinhole_dir(cam, px, py)
    ox, oy, oz = cam[0], cam[1], cam[2]
    ap = cam[15]
    if ap > 0.0:
        cosf = dx * cam[9] + dy * cam[10] + dz * cam[11]
        tf = cam[16] / cosf
        fx = ox + dx * tf
        fy = oy + dy * tf
        fz = oz + dz * tf
        r = ap * math.sqrt(u1)
        phi = 2.0 * math.pi * u2
        lx = r * math.cos(phi)
        ly = r * math.sin(phi)
        ox = ox + cam[3] * lx + cam[6] * ly
        oy = oy + cam[4] * lx + cam[7] * ly
        oz = oz + cam[5] * lx + cam[8] * ly
        dx = fx - ox
        dy = fy - oy
        dz = fz - oz
        l = math.sqrt(dx * dx + dy * dy + dz * dz)
        dx /= l
        dy /= l
        dz /= l
    return ox, oy, oz, dx, dy, dz


# --- render kernels ---------------------------------------------------------------------

@njit(**JIT)
def render_tile(out, x0, x1, y0, y1, spp, max_depth, seed, cam,
                tv0, te1, te2, tng, tuv0, tuv1, tuv2, tobj,
                obj_tex, obj_albedo,
                tex_data, tex_off, tex_w, tex_h,
                bmin, bmax, bleft, bcount, border,
                lkind, lpos, lemit, lu, lv, lnrm, larea, env):
    """Path-trace one tile into out[y0:y1, x0:x1].

    Lambertian surfaces, cosine-sampled bounces, next-event estimation toward
    point and area lights, uniform environment gathered on miss. Fixed depth
    cutoff, no Russian roulette.
    """
    width = out.shape[1]
    inv_pi = 1.0 / math.pi
    nl = lkind.shape[0]
    stack = np.empty(STACK_DEPTH, dtype=np.int32)
    tstack = np.empty(STACK_DEPTH, dtype=np.float64)
    for y in range(y0, y1):
        for x in range(x0, x1):
            accr = 0.0
            accg = 0.0
            accb = 0.0
            pixel = U64(y * width + x)
            for s in range(spp):
                state = _rng_key(seed, pixel, U64(s))
                state, j1 = _rng_next(state)
                state, j2 = _rng_next(state)
                if cam[15] > 0.0:
                    state, a1 = _rng_next(state)
                    state, a2 = _rng_next(state)
                else:
                    a1 = 0.5
                    a2 = 0.5
                ox, oy, oz, dx, dy, dz = _camera_ray(cam, x + j1, y + j2, a1, a2)
                tr = 1.0
                tg = 1.0
                tb = 1.0
                lr = 0.0
                lg = 0.0
                lb = 0.0
                for depth in range(max_depth):
                    t, ti, bu, bv = _bvh_nearest(bmin, bmax, bleft, bcount, border,
                                                 tv0, te1, te2,
                                                 ox, oy, oz, dx, dy, dz,
                                                 stack, tstack)
                    if ti < 0:
                        lr += tr * env[0]
                        lg += tg * env[1]
                        lb += tb * env[2]
                        break
                    hx = ox + dx * t
                    hy = oy + dy * t
                    hz = oz + dz * t
                    nx = tng[ti, 0]
                    ny = tng[ti, 1]
                    nz = tng[ti, 2]
                    if nx * dx + ny * dy + nz * dz > 0.0:
                        nx = -nx
                        ny = -ny
                        nz = -nz
                    oi = tobj[ti]
                    tex = obj_tex[oi]
                    if tex >= 0:
                        w0 = 1.0 - bu - bv
                        uu = w0 * tuv0[ti, 0] + bu * tuv1[ti, 0] + bv * tuv2[ti, 0]
                        vv = w0 * tuv0[ti, 1] + bu * tuv1[ti, 1] + bv * tuv2[ti, 1]
                        ar, ag, ab = _tex_sample(tex_data, tex_off[tex],
                                                 tex_w[tex], tex_h[tex], uu, vv)
                    else:
                        ar = obj_albedo[oi, 0]
                        ag = obj_albedo[oi, 1]
                        ab = obj_albedo[oi, 2]
                    # secondary/shadow ray origin, lifted off the surface
                    px_ = hx + nx * EPS_T
                    py_ = hy + ny * EPS_T
                    pz_ = hz + nz * EPS_T
                    for li in range(nl):
                        if lkind[li] == 0:
                            wx = lpos[li, 0] - px_
                            wy = lpos[li, 1] - py_
                            wz = lpos[li, 2] - pz_
                            dist2 = wx * wx + wy * wy + wz * wz
                            dist = math.sqrt(dist2)
                            wx /= dist
                            wy /= dist
                            wz /= dist
                            cos_s = wx * nx + wy * ny + wz * nz
                            if cos_s <= 0.0:
                                continue
                            if _bvh_occluded(bmin, bmax, bleft, bcount, border,
                                             tv0, te1, te2, px_, py_, pz_,
                                             wx, wy, wz, dist - EPS_T, stack):
                                continue
                            g = cos_s / (4.0 * math.pi * dist2)
                            lr += tr * ar * inv_pi * lemit[li, 0] * g
                            lg += tg * ag * inv_pi * lemit[li, 1] * g
                            lb += tb * ab * inv_pi * lemit[li, 2] * g
                        else:
                            state, s1 = _rng_next(state)
                            state, s2 = _rng_next(state)
                            e1 = 2.0 * s1 - 1.0
                            e2 = 2.0 * s2 - 1.0
                            qx = lpos[li, 0] + e1 * lu[li, 0] + e2 * lv[li, 0]
                            qy = lpos[li, 1] + e1 * lu[li, 1] + e2 * lv[li, 1]
                            qz = lpos[li, 2] + e1 * lu[li, 2] + e2 * lv[li, 2]
                            wx = qx - px_
                            wy = qy - py_
                            wz = qz - pz_
                            dist2 = wx * wx + wy * wy + wz * wz
                            dist = math.sqrt(dist2)
                            wx /= dist
                            wy /= dist
                            wz /= dist
                            cos_s = wx * nx + wy * ny + wz * nz
                            if cos_s <= 0.0:
                                continue
                            cos_l = -(wx * lnrm[li, 0] + wy * lnrm[li, 1] + wz * lnrm[li, 2])
                            if cos_l <= 0.0:
                                continue
                            if _bvh_occluded(bmin, bmax, bleft, bcount, border,
                                             tv0, te1, te2, px_, py_, pz_,
                                             wx, wy, wz, dist - EPS_T, stack):
                                continue
                            g = cos_s * cos_l / dist2 * larea[li]
                            lr += tr * ar * inv_pi * lemit[li, 0] * g
                            lg += tg * ag * inv_pi * lemit[li, 1] * g
                            lb += tb * ab * inv_pi * lemit[li, 2] * g
                    if depth == max_depth - 1:
                        break
                    state, b1 = _rng_next(state)
                    state, b2 = _rng_next(state)
                    dx, dy, dz = _cosine_dir(nx, ny, nz, b1, b2)
                    ox = px_
                    oy = py_
                    oz = pz_
                    tr *= ar
                    tg *= ag
                    tb *= ab
                accr += lr
                accg += lg
                accb += lb
            inv = 1.0 / spp
            out[y, x, 0] = accr * inv
            out[y, x, 1] = accg * inv
            out[y, x, 2] = accb * inv


@njit(**JIT)
def primary_pass(depth_out, seg_out, cam,
                 tv0, te1, te2, tobj, obj_class,
                 bmin, bmax, bleft, bcount, border, miss_label):
    """Depth and segmentation from the unjittered center ray of each pixel
    (aperture center for thin-lens cameras)."""
    h = depth_out.shape[0]
    w = depth_out.shape[1]
    stack = np.empty(STACK_DEPTH, dtype=np.int32)
    tstack = np.empty(STACK_DEPTH, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            dx, dy, dz = _pinhole_dir(cam, x + 0.5, y + 0.5)
            t, ti, bu, bv = _bvh_nearest(bmin, bmax, bleft, bcount, border,
                                         tv0, te1, te2,
                                         cam[0], cam[1], cam[2], dx, dy, dz,
                                         stack, tstack)
            if ti < 0:
                depth_out[y, x] = np.inf
                seg_out[y, x] = miss_label
            else:
                depth_out[y, x] = t
                seg_out[y, x] = obj_class[tobj[ti]]


# --- batch query kernels (ground truth and tests) ---------------------------------------

@njit(**JIT)
def nearest_many(origins, dirs, tv0, te1, te2,
                 bmin, bmax, bleft, bcount, border,
                 t_out, tri_out, u_out, v_out):
    stack = np.empty(STACK_DEPTH, dtype=np.int32)
    tstack = np.empty(STACK_DEPTH, dtype=np.float64)
    for i in range(origins.shape[0]):
        t, ti, u, v = _bvh_nearest(bmin, bmax, bleft, bcount, border,
                                   tv0, te1, te2,
                                   origins[i, 0], origins[i, 1], origins[i, 2],
                                   dirs[i, 0], dirs[i, 1], dirs[i, 2], stack, tstack)
        t_out[i] = t
        tri_out[i] = ti
        u_out[i] = u
        v_out[i] = v


@njit(**JIT)
def occluded_many(origins, dirs, tmax, tv0, te1, te2,
                  bmin, bmax, bleft, bcount, border, out):
    stack = np.empty(STACK_DEPTH, dtype=np.int32)
    for i in range(origins.shape[0]):
        out[i] = _bvh_occluded(bmin, bmax, bleft, bcount, border, tv0, te1, te2,
                               origins[i, 0], origins[i, 1], origins[i, 2],
                               dirs[i, 0], dirs[i, 1], dirs[i, 2], tmax[i], stack)
