"""Physically-based renderer: beauty, depth, and segmentation passes.

The beauty pass is an unbiased Monte Carlo estimate with Lambertian surfaces,
next-event estimation toward finite lights, and a fixed path-depth cutoff.
Depth and segmentation come from the unjittered center ray of each pixel.
Output is a pure function of the scene instance: per-sample randomness is
keyed, so 1 or N worker threads produce bit-identical passes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import bvh as bvhmod, kernels, scene as sc
from .errors import GeometryError, RenderError
from .imageio import linear_to_srgb

DEPTH_MISS = np.inf
SEG_MISS = sc.SEG_MISS


@dataclass(frozen=True)
class RenderSettings:
    """Sampling controls for one render."""

    spp: int = 64
    max_depth: int = 4
    tile: int = 32

    def __post_init__(self):
        if self.spp < 1:
            raise RenderError("spp must be >= 1")
        if self.max_depth < 1:
            raise RenderError("max_depth must be >= 1")
        if self.tile < 8:
            raise RenderError("tile must be >= 8")


@dataclass(eq=False)
class RenderPasses:
    """Linear RGB plus auxiliary passes from one render."""

    rgb: np.ndarray  # (H, W, 3) float32, linear light
    depth: np.ndarray  # (H, W) float32, distance along the primary ray, +inf miss
    seg: np.ndarray  # (H, W) uint8 class labels, 255 miss


class Hit(NamedTuple):
    t: float
    triangle: int
    object_class: int
    u: float
    v: float


def camera_array(camera: sc.CameraModel) -> np.ndarray:
    """Flatten a camera into the kernel layout (roll folded into the basis)."""
    camera.validate_basis()
    right, up, forward = camera.rolled_axes()
    w, h = camera.resolution
    aperture_r = 0.0
    if camera.f_number is not None:
        aperture_r = (camera.focal_mm / camera.f_number) * 0.5e-3
    cam = np.empty(19)
    cam[0:3] = camera.position
    cam[3:6] = right
    cam[6:9] = up
    cam[9:12] = forward
    cam[12] = camera.sensor_width_mm * 1e-3
    cam[13] = camera.sensor_height_mm * 1e-3
    cam[14] = camera.focal_mm * 1e-3
    cam[15] = aperture_r
    cam[16] = camera.focus_distance_m
    cam[17] = float(w)
    cam[18] = float(h)
    return cam


def camera_ray(camera: sc.CameraModel, pixel, key: np.random.Generator | None = None,
               jitter: bool = True):
    """Ray through continuous pixel coordinates (x, y).

    With a key, a sub-pixel jitter in [0,1)^2 is added (matching the render
    kernel's sampling) and thin-lens cameras get an aperture sample; without
    one, the exact coordinates are used with the aperture center. Pass
    jitter=False to keep the sensor point fixed while still sampling the
    aperture.
    """
    cam = camera_array(camera)
    x, y = float(pixel[0]), float(pixel[1])
    u1 = u2 = 0.5
    if key is not None:
        if jitter:
            x += key.random()
            y += key.random()
        if cam[15] > 0.0:
            u1, u2 = key.random(), key.random()
    sx = (x / cam[17] - 0.5) * cam[12]
    sy = (0.5 - y / cam[18]) * cam[13]
    direction = cam[3:6] * sx + cam[6:9] * sy + cam[9:12] * cam[14]
    direction = direction / np.linalg.norm(direction)
    origin = cam[0:3].copy()
    if cam[15] > 0.0:
        cosf = float(direction @ cam[9:12])
        focus_point = origin + direction * (cam[16] / cosf)
        r = cam[15] * math.sqrt(u1)
        phi = 2.0 * math.pi * u2
        origin = origin + cam[3:6] * (r * math.cos(phi)) + cam[6:9] * (r * math.sin(phi))
        direction = focus_point - origin
        direction = direction / np.linalg.norm(direction)
    return origin, direction


class TracedScene:
    """Scene geometry packed for the kernels, plus its BVH.

    Build once per scene (render and every ground-truth query share it).
    """

    def __init__(self, instance: sc.SceneInstance):
        self.instance = instance
        self.camera = instance.camera
        self.geometry = sc.assemble_scene(instance)
        self.document_mesh = self.geometry.document_mesh

        v0s, e1s, e2s, ngs = [], [], [], []
        uv0s, uv1s, uv2s, tobjs = [], [], [], []
        obj_tex, obj_albedo, obj_class = [], [], []
        tex_chunks, tex_off, tex_w, tex_h = [], [], [], []
        offset = 0
        for oi, obj in enumerate(self.geometry.objects):
            mesh = obj.mesh
            tris = mesh.triangles
            p0 = mesh.vertices[tris[:, 0]]
            p1 = mesh.vertices[tris[:, 1]]
            p2 = mesh.vertices[tris[:, 2]]
            v0s.append(p0)
            e1s.append(p1 - p0)
            e2s.append(p2 - p0)
            fn = np.cross(p1 - p0, p2 - p0)
            lens = np.linalg.norm(fn, axis=1)
            lens[lens < 1e-30] = 1.0
            ngs.append(fn / lens[:, None])
            uv0s.append(mesh.uvs[tris[:, 0]])
            uv1s.append(mesh.uvs[tris[:, 1]])
            uv2s.append(mesh.uvs[tris[:, 2]])
            tobjs.append(np.full(len(tris), oi, dtype=np.int32))
            obj_class.append(mesh.object_id)
            if obj.texture is not None:
                data = np.ascontiguousarray(obj.texture.data, dtype=np.float32).ravel()
                obj_tex.append(len(tex_off))
                tex_off.append(offset)
                tex_w.append(obj.texture.width)
                tex_h.append(obj.texture.height)
                tex_chunks.append(data)
                offset += data.size
                obj_albedo.append((0.0, 0.0, 0.0))
            else:
                obj_tex.append(-1)
                obj_albedo.append(tuple(obj.albedo) if obj.albedo is not None else (0.5, 0.5, 0.5))

        self.tv0 = np.ascontiguousarray(np.concatenate(v0s))
        self.te1 = np.ascontiguousarray(np.concatenate(e1s))
        self.te2 = np.ascontiguousarray(np.concatenate(e2s))
        self.tng = np.ascontiguousarray(np.concatenate(ngs))
        self.tuv0 = np.ascontiguousarray(np.concatenate(uv0s))
        self.tuv1 = np.ascontiguousarray(np.concatenate(uv1s))
        self.tuv2 = np.ascontiguousarray(np.concatenate(uv2s))
        self.tobj = np.concatenate(tobjs)
        self.obj_tex = np.asarray(obj_tex, dtype=np.int32)
        self.obj_albedo = np.asarray(obj_albedo, dtype=np.float64)
        self.obj_class = np.asarray(obj_class, dtype=np.int32)
        self.tex_data = (np.concatenate(tex_chunks) if tex_chunks
                         else np.zeros(3, dtype=np.float32))
        self.tex_off = np.asarray(tex_off if tex_off else [0], dtype=np.int64)
        self.tex_w = np.asarray(tex_w if tex_w else [1], dtype=np.int32)
        self.tex_h = np.asarray(tex_h if tex_h else [1], dtype=np.int32)

        tree = bvhmod.build(self.tv0, self.tv0 + self.te1, self.tv0 + self.te2)
        self.bmin = tree.nodes_min
        self.bmax = tree.nodes_max
        self.bleft = tree.left_first
        self.bcount = tree.count
        self.border = tree.tri_order

        lights = self.geometry.lights
        self.lkind = np.zeros(len(lights), dtype=np.int32)
        self.lpos = np.zeros((len(lights), 3))
        self.lemit = np.zeros((len(lights), 3))
        self.lu = np.zeros((len(lights), 3))
        self.lv = np.zeros((len(lights), 3))
        self.lnrm = np.zeros((len(lights), 3))
        self.larea = np.zeros(len(lights))
        for i, light in enumerate(lights):
            if isinstance(light, sc.PointLight):
                self.lkind[i] = 0
                self.lpos[i] = light.position
                self.lemit[i] = light.intensity_w
            elif isinstance(light, sc.AreaLight):
                self.lkind[i] = 1
                self.lpos[i] = light.position
                self.lemit[i] = light.radiance
                n = np.asarray(light.normal, dtype=np.float64)
                n = n / np.linalg.norm(n)
                self.lnrm[i] = n
                helper = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
                u = np.cross(helper, n)
                u /= np.linalg.norm(u)
                v = np.cross(n, u)
                self.lu[i] = u * (0.5 * light.width_m)
                self.lv[i] = v * (0.5 * light.height_m)
                self.larea[i] = light.width_m * light.height_m
            else:
                raise RenderError(f"unsupported finite light {light!r}")
        self.env = np.asarray(self.geometry.env_radiance, dtype=np.float64)

    # --- queries ------------------------------------------------------------

    def nearest(self, origins: np.ndarray, dirs: np.ndarray):
        """Nearest hits for unit-direction rays: (t, triangle, u, v) arrays."""
        origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
        n = len(origins)
        t = np.empty(n)
        tri = np.empty(n, dtype=np.int32)
        u = np.empty(n)
        v = np.empty(n)
        kernels.nearest_many(origins, dirs, self.tv0, self.te1, self.te2,
                             self.bmin, self.bmax, self.bleft, self.bcount,
                             self.border, t, tri, u, v)
        return t, tri, u, v

    def occluded(self, origins: np.ndarray, dirs: np.ndarray, tmax: np.ndarray):
        origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
        tmax = np.ascontiguousarray(tmax, dtype=np.float64).ravel()
        out = np.zeros(len(origins), dtype=np.bool_)
        kernels.occluded_many(origins, dirs, tmax, self.tv0, self.te1, self.te2,
                              self.bmin, self.bmax, self.bleft, self.bcount,
                              self.border, out)
        return out

    def object_class_of_triangle(self, tri: np.ndarray) -> np.ndarray:
        tri = np.asarray(tri)
        out = np.full(tri.shape, SEG_MISS, dtype=np.int32)
        hit = tri >= 0
        out[hit] = self.obj_class[self.tobj[tri[hit]]]
        return out


def prepare_scene(instance: sc.SceneInstance) -> TracedScene:
    """Assemble, pack, and index a scene for rendering and label queries."""
    return TracedScene(instance)


def intersect(traced: TracedScene, origin, direction) -> Hit | None:
    """Nearest triangle hit beyond the ray epsilon, or None.

    Accelerated by the scene BVH; results are identical to brute-force
    all-triangle testing.
    """
    direction = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(direction)
    if abs(norm - 1.0) > 1e-9:
        raise GeometryError("ray direction must be unit length")
    t, tri, u, v = traced.nearest(np.asarray(origin, dtype=np.float64), direction)
    if tri[0] < 0:
        return None
    cls = int(traced.obj_class[traced.tobj[tri[0]]])
    return Hit(t=float(t[0]), triangle=int(tri[0]), object_class=cls,
               u=float(u[0]), v=float(v[0]))


def render(source, threads: int = 1) -> RenderPasses:
    """Render a SceneInstance (or prebuilt TracedScene) into all passes."""
    traced = source if isinstance(source, TracedScene) else prepare_scene(source)
    instance = traced.instance
    settings = instance.render
    cam = camera_array(traced.camera)
    w, h = traced.camera.resolution

    rgb = np.zeros((h, w, 3), dtype=np.float32)
    depth = np.zeros((h, w), dtype=np.float32)
    seg = np.zeros((h, w), dtype=np.uint8)
    seed = np.uint64(instance.seed & 0xFFFFFFFFFFFFFFFF)

    tiles = []
    step = settings.tile
    for y0 in range(0, h, step):
        for x0 in range(0, w, step):
            tiles.append((x0, min(x0 + step, w), y0, min(y0 + step, h)))

    def run_tile(bounds):
        x0, x1, y0, y1 = bounds
        kernels.render_tile(
            rgb, x0, x1, y0, y1, settings.spp, settings.max_depth, seed, cam,
            traced.tv0, traced.te1, traced.te2, traced.tng,
            traced.tuv0, traced.tuv1, traced.tuv2, traced.tobj,
            traced.obj_tex, traced.obj_albedo,
            traced.tex_data, traced.tex_off, traced.tex_w, traced.tex_h,
            traced.bmin, traced.bmax, traced.bleft, traced.bcount, traced.border,
            traced.lkind, traced.lpos, traced.lemit, traced.lu, traced.lv,
            traced.lnrm, traced.larea, traced.env)

    if threads <= 1:
        for bounds in tiles:
            run_tile(bounds)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_tile, tiles))

    kernels.primary_pass(depth, seg, cam, traced.tv0, traced.te1, traced.te2,
                         traced.tobj, traced.obj_class,
                         traced.bmin, traced.bmax, traced.bleft, traced.bcount,
                         traced.border, SEG_MISS)
    return RenderPasses(rgb=rgb, depth=depth, seg=seg)


def tonemap(rgb: np.ndarray) -> np.ndarray:
    """Linear radiance -> display 8-bit sRGB (clip to [0,1], encode, round)."""
    if not np.all(np.isfinite(rgb)):
        raise RenderError("tonemap input must be finite")
    clipped = np.clip(rgb, 0.0, 1.0)
    return np.rint(linear_to_srgb(clipped) * 255.0).astype(np.uint8)
