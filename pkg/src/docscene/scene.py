"""Scene model: document sheet, deformations, camera, lights, background.

World frame: meters, z up, the table surface in the z=0 plane. The document
sheet is built flat and centered at the local origin, deformed, then lifted
onto the table by scene assembly. Camera optics are in millimeters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import rng as rngmod
from .errors import DegenerateCameraError, GeometryError
from .imageio import ImageBuffer

# Segmentation class ids (also the seg-pass pixel values).
OBJ_BACKGROUND = 0
OBJ_DOCUMENT = 1
OBJ_OCCLUDER = 2
OBJ_EXTRA_SHEET = 3
SEG_MISS = 255

SHEET_PRESETS = {
    "us-letter": (0.2159, 0.2794),
    "a4": (0.210, 0.297),
}

# Vertical stacking pitch for pages resting on the table.
SHEET_STACK_PITCH_M = 0.0005


# --- annotations and sheet ----------------------------------------------------

@dataclass(frozen=True)
class FieldAnnotation:
    """Named axis-aligned region of the document in UV coordinates."""

    name: str
    uv_rect: tuple  # (u0, v0, u1, v1)

    def __post_init__(self):
        u0, v0, u1, v1 = self.uv_rect
        if not (0 <= u0 < u1 <= 1 and 0 <= v0 < v1 <= 1):
            raise GeometryError(f"field {self.name!r}: invalid uv_rect {self.uv_rect}")


@dataclass(frozen=True)
class SheetSpec:
    """The base document: physical size, mesh resolution, texture, fields."""

    width_m: float
    height_m: float
    grid_nx: int = 64
    grid_ny: int = 64
    texture: Union[ImageBuffer, tuple] = (0.9, 0.9, 0.9)
    fields: tuple = ()
    class_label: str = ""
    texture_ref: str = ""  # provenance string recorded in metadata, not pixels

    def __post_init__(self):
        if not (self.width_m > 0 and self.height_m > 0):
            raise GeometryError("sheet dimensions must be positive")
        if self.grid_nx < 1 or self.grid_ny < 1:
            raise GeometryError("grid subdivisions must be >= 1")
        if not isinstance(self.texture, ImageBuffer):
            t = tuple(float(c) for c in self.texture)
            if len(t) != 3:
                raise GeometryError("constant texture must be an RGB triple")
            object.__setattr__(self, "texture", t)
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise GeometryError("field names must be unique")
        object.__setattr__(self, "fields", tuple(self.fields))


# --- deformation ---------------------------------------------------------------

@dataclass(frozen=True)
class Bend:
    """Cylindrical bend: in-plane coordinate x along the bend direction maps to
    (R sin(x/R), R (1 - cos(x/R))) with R = 1/curvature, preserving arc length."""

    curvature: float  # 1/m; 0 is the identity
    axis_angle: float = 0.0  # bend direction in the sheet plane, radians

    def __post_init__(self):
        if not math.isfinite(self.curvature):
            raise GeometryError("bend curvature must be finite")


@dataclass(frozen=True)
class Fold:
    """Rotate all vertices on one side of a UV line about that line in 3D.

    The side with positive cross(direction, uv - point) rotates; vertices on
    the line are fixed points. Positive dihedral is a right-hand rotation
    about the fold direction.
    """

    point: tuple  # (u, v)
    direction: tuple  # (du, dv), need not be unit
    dihedral: float  # radians, |dihedral| < pi

    def __post_init__(self):
        if abs(self.dihedral) >= math.pi:
            raise GeometryError("fold dihedral must satisfy |angle| < pi")
        du, dv = self.direction
        if du * du + dv * dv < 1e-18:
            raise GeometryError("fold direction must be nonzero")


@dataclass(frozen=True)
class Roughness:
    """Band-limited noise displacement along local vertex normals."""

    amplitude_m: float
    frequency: float = 2.0  # cycles across the sheet width
    noise_seed: int = 0

    def __post_init__(self):
        if self.amplitude_m < 0:
            raise GeometryError("roughness amplitude must be >= 0")
        if self.frequency <= 0:
            raise GeometryError("roughness frequency must be > 0")


DeformOp = Union[Bend, Fold, Roughness]


@dataclass(frozen=True)
class Deformation:
    """Ordered list of deformation operations, applied as listed."""

    ops: tuple = ()

    def __post_init__(self):
        for op in self.ops:
            if not isinstance(op, (Bend, Fold, Roughness)):
                raise GeometryError(f"unknown deformation op {op!r}")
        object.__setattr__(self, "ops", tuple(self.ops))


# --- triangle mesh ---------------------------------------------------------------

@dataclass(eq=False)
class TriangleMesh:
    """Indexed triangle mesh with per-vertex normals and UVs."""

    vertices: np.ndarray  # (n, 3) float64, meters
    normals: np.ndarray  # (n, 3) float64, unit
    uvs: np.ndarray  # (n, 2) float64 in [0, 1]^2
    triangles: np.ndarray  # (m, 3) int32
    object_id: int = OBJ_DOCUMENT

    def validate(self, check_winding: bool = False) -> None:
        n = len(self.vertices)
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=-1) >= n:
            raise GeometryError("triangle index out of range")
        norms = np.linalg.norm(self.normals, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-6):
            raise GeometryError("normals must be unit length within 1e-6")
        if self.uvs.min(initial=0.0) < -1e-9 or self.uvs.max(initial=0.0) > 1 + 1e-9:
            raise GeometryError("uv coordinates must lie in [0, 1]^2")
        if check_winding:
            seen = {}
            for tri in self.triangles:
                for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                    key = (int(a), int(b))
                    if key in seen:
                        raise GeometryError(f"inconsistent winding: edge {key} repeated")
                    seen[key] = True

    def copy(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices.copy(), self.normals.copy(),
                            self.uvs.copy(), self.triangles.copy(), self.object_id)


def _vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals; degenerate vertices fall back to +z."""
    fn = np.cross(vertices[triangles[:, 1]] - vertices[triangles[:, 0]],
                  vertices[triangles[:, 2]] - vertices[triangles[:, 0]])
    out = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(out, triangles[:, k], fn)
    lens = np.linalg.norm(out, axis=1)
    bad = lens < 1e-20
    out[bad] = (0.0, 0.0, 1.0)
    out[~bad] /= lens[~bad, None]
    return out


def build_sheet_mesh(sheet: SheetSpec) -> TriangleMesh:
    """Planar grid mesh for the sheet, centered at the origin in z=0.

    (nx+1)(ny+1) vertices, 2*nx*ny triangles, UVs spanning [0,1]^2 affinely,
    +v aligned with +y (the document's up direction).
    """
    nx, ny = sheet.grid_nx, sheet.grid_ny
    us = np.linspace(0.0, 1.0, nx + 1)
    vs = np.linspace(0.0, 1.0, ny + 1)
    uu, vv = np.meshgrid(us, vs, indexing="xy")
    verts = np.stack([(uu - 0.5) * sheet.width_m,
                      (vv - 0.5) * sheet.height_m,
                      np.zeros_like(uu)], axis=-1).reshape(-1, 3)
    uvs = np.stack([uu, vv], axis=-1).reshape(-1, 2)

    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    tris = np.empty((2 * nx * ny, 3), dtype=np.int32)
    tris[0::2] = np.stack([v00, v10, v11], axis=1)
    tris[1::2] = np.stack([v00, v11, v01], axis=1)

    normals = np.zeros_like(verts)
    normals[:, 2] = 1.0
    return TriangleMesh(verts, normals, uvs, tris, object_id=OBJ_DOCUMENT)


def _apply_bend(verts: np.ndarray, op: Bend) -> np.ndarray:
    if op.curvature == 0.0:
        return verts
    radius = 1.0 / op.curvature
    d = np.array([math.cos(op.axis_angle), math.sin(op.axis_angle)])
    x = verts[:, 0] * d[0] + verts[:, 1] * d[1]
    out = verts.copy()
    arc = x / radius
    shift = radius * np.sin(arc) - x  # replace the along-axis coordinate
    out[:, 0] += shift * d[0]
    out[:, 1] += shift * d[1]
    out[:, 2] += radius * (1.0 - np.cos(arc))
    return out


def uv_affine_fit(verts: np.ndarray, uvs: np.ndarray) -> np.ndarray:
    """Least-squares affine map M with world ~ u*M[0] + v*M[1] + M[2].

    Exact for planar sheets; the best linear approximation otherwise.
    """
    design = np.column_stack([uvs[:, 0], uvs[:, 1], np.ones(len(uvs))])
    m, _, _, _ = np.linalg.lstsq(design, verts, rcond=None)
    return m


def _apply_fold(verts: np.ndarray, uvs: np.ndarray, op: Fold) -> np.ndarray:
    du, dv = op.direction
    u0, v0 = op.point
    side = du * (uvs[:, 1] - v0) - dv * (uvs[:, 0] - u0)
    moving = side > 0.0

    # Fold axis: the UV line mapped through the sheet's affine UV->world fit.
    m = uv_affine_fit(verts, uvs)
    p0 = u0 * m[0] + v0 * m[1] + m[2]
    axis = du * m[0] + dv * m[1]
    axis /= np.linalg.norm(axis)

    c, s = math.cos(op.dihedral), math.sin(op.dihedral)
    rel = verts[moving] - p0
    # Rodrigues rotation about `axis`.
    rotated = (rel * c
               + np.cross(np.broadcast_to(axis, rel.shape), rel) * s
               + np.outer(rel @ axis, axis) * (1.0 - c))
    out = verts.copy()
    out[moving] = rotated + p0
    return out


def _apply_roughness(verts: np.ndarray, uvs: np.ndarray, normals: np.ndarray,
                     op: Roughness) -> np.ndarray:
    if op.amplitude_m == 0.0:
        return verts
    gen = rngmod.stream(op.noise_seed, "roughness")
    k = 6
    angles = gen.uniform(0.0, 2.0 * math.pi, size=k)
    phases = gen.uniform(0.0, 2.0 * math.pi, size=k)
    freqs = op.frequency * gen.uniform(0.75, 1.25, size=k)
    amps = gen.uniform(0.5, 1.0, size=k)
    g = np.zeros(len(verts))
    for i in range(k):
        coord = np.cos(angles[i]) * uvs[:, 0] + np.sin(angles[i]) * uvs[:, 1]
        g += amps[i] * np.sin(2.0 * math.pi * freqs[i] * coord + phases[i])
    g /= amps.sum()  # |g| <= 1, so displacement magnitude <= amplitude
    return verts + normals * (op.amplitude_m * g)[:, None]


def apply_deformation(mesh: TriangleMesh, deformation: Deformation) -> TriangleMesh:
    """Apply deformation ops in order; recompute vertex normals afterward."""
    verts = mesh.vertices.copy()
    for op in deformation.ops:
        if isinstance(op, Bend):
            verts = _apply_bend(verts, op)
        elif isinstance(op, Fold):
            verts = _apply_fold(verts, mesh.uvs, op)
        elif isinstance(op, Roughness):
            current_normals = _vertex_normals(verts, mesh.triangles)
            verts = _apply_roughness(verts, mesh.uvs, current_normals, op)
    normals = _vertex_normals(verts, mesh.triangles)
    return TriangleMesh(verts, normals, mesh.uvs.copy(), mesh.triangles.copy(),
                        mesh.object_id)


def sheet_plane(mesh: TriangleMesh, tol_m: float = 1e-6):
    """Supporting plane (point, unit normal) if every vertex is within tol_m
    of the best-fit plane, else None."""
    verts = mesh.vertices
    centroid = verts.mean(axis=0)
    centered = verts - centroid
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[2]
    if normal[2] < 0:
        normal = -normal
    deviation = np.abs(centered @ normal).max()
    if deviation >= tol_m:
        return None
    return centroid, normal


def transform_mesh(mesh: TriangleMesh, rotation: np.ndarray | None = None,
                   translation=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Rigidly transform a mesh (rotation then translation)."""
    verts = mesh.vertices
    normals = mesh.normals
    if rotation is not None:
        verts = verts @ rotation.T
        normals = normals @ rotation.T
    verts = verts + np.asarray(translation, dtype=np.float64)
    return TriangleMesh(verts, normals.copy(), mesh.uvs.copy(),
                        mesh.triangles.copy(), mesh.object_id)


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


# --- camera ---------------------------------------------------------------------

@dataclass(eq=False)
class CameraModel:
    """Pinhole or thin-lens camera with square pixels.

    `orientation` is the pre-roll orthonormal basis (right, up, forward);
    roll_theta rotates the sensor about the forward axis. Positive roll makes
    the scene appear rotated counter-clockwise in the image (y down), which is
    the same sign convention the rotation label uses.
    """

    resolution: tuple  # (W, H) pixels
    sensor_width_mm: float = 36.0
    focal_mm: float = 50.0
    f_number: float | None = None  # None => pinhole
    focus_distance_m: float = 1.0
    position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    orientation: tuple = (
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
        np.array([0.0, 0.0, -1.0]),
    )
    roll_theta: float = 0.0

    def __post_init__(self):
        w, h = self.resolution
        if w < 1 or h < 1:
            raise DegenerateCameraError("resolution must be positive")
        if self.focal_mm <= 0 or self.sensor_width_mm <= 0:
            raise DegenerateCameraError("focal length and sensor width must be positive")
        if self.f_number is not None:
            if self.f_number <= 0:
                raise DegenerateCameraError("f-number must be positive")
            if self.focus_distance_m <= 0:
                raise DegenerateCameraError("focus distance must be positive")
        if not (-math.pi < self.roll_theta <= math.pi):
            raise DegenerateCameraError("roll_theta must lie in (-pi, pi]")
        self.position = np.asarray(self.position, dtype=np.float64)
        self.orientation = tuple(np.asarray(a, dtype=np.float64) for a in self.orientation)
        self.validate_basis()

    def validate_basis(self) -> None:
        basis = np.stack(self.orientation)
        if np.any(np.linalg.norm(basis, axis=1) < 1e-12):
            raise DegenerateCameraError("camera basis has a zero-length axis")
        gram = basis @ basis.T
        if np.abs(gram - np.eye(3)).max() >= 1e-9:
            raise DegenerateCameraError("camera basis is not orthonormal")

    @property
    def sensor_height_mm(self) -> float:
        w, h = self.resolution
        return self.sensor_width_mm * h / w

    def rolled_axes(self):
        """(right, up, forward) with the sensor roll applied."""
        right, up, forward = self.orientation
        c, s = math.cos(self.roll_theta), math.sin(self.roll_theta)
        return c * right - s * up, s * right + c * up, forward


def look_at(position, target, roll_theta: float = 0.0, **kwargs) -> CameraModel:
    """Camera at `position` looking at `target`, up-hint +y (then +z)."""
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise DegenerateCameraError("camera position coincides with target")
    forward = forward / norm
    up_hint = np.array([0.0, 1.0, 0.0])
    if np.linalg.norm(np.cross(forward, up_hint)) < 1e-9:
        up_hint = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up_hint)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    up /= np.linalg.norm(up)
    return CameraModel(position=position, orientation=(right, up, forward),
                       roll_theta=roll_theta, **kwargs)


# --- lights -----------------------------------------------------------------------

@dataclass(frozen=True)
class PointLight:
    """Isotropic point emitter; intensity_w is total radiant flux in watts."""

    position: tuple
    intensity_w: float

    def __post_init__(self):
        if self.intensity_w < 0:
            raise GeometryError("light intensity must be >= 0")


@dataclass(frozen=True)
class AreaLight:
    """One-sided rectangular emitter with constant radiance."""

    position: tuple  # center
    normal: tuple  # emission direction
    width_m: float
    height_m: float
    radiance: tuple  # linear RGB

    def __post_init__(self):
        if self.width_m <= 0 or self.height_m <= 0:
            raise GeometryError("area light dimensions must be positive")
        if min(self.radiance) < 0:
            raise GeometryError("radiance must be >= 0")
        n = np.asarray(self.normal, dtype=np.float64)
        if np.linalg.norm(n) < 1e-12:
            raise GeometryError("area light normal must be nonzero")


@dataclass(frozen=True)
class EnvironmentLight:
    """Uniform environment radiance surrounding the scene."""

    radiance: tuple  # linear RGB

    def __post_init__(self):
        if min(self.radiance) < 0:
            raise GeometryError("radiance must be >= 0")


LightSpec = Union[PointLight, AreaLight, EnvironmentLight]


# --- background --------------------------------------------------------------------

@dataclass(frozen=True)
class BackgroundSurface:
    """Table plane underneath the document."""

    albedo: Union[ImageBuffer, tuple] = (0.8, 0.8, 0.8)
    name: str = "surface"
    size_m: float = 3.0


@dataclass(frozen=True)
class Occluder:
    """Opaque quad or box placed over or near the document."""

    kind: str  # "quad" | "box"
    center: tuple
    half_size: tuple  # (hx, hy, hz); hz ignored for quads
    yaw: float = 0.0
    pitch: float = 0.0
    albedo: tuple = (0.3, 0.3, 0.3)

    def __post_init__(self):
        if self.kind not in ("quad", "box"):
            raise GeometryError(f"unknown occluder kind {self.kind!r}")
        if min(self.half_size) < 0:
            raise GeometryError("occluder half sizes must be >= 0")


@dataclass(frozen=True)
class BackgroundSpec:
    """Scene context: table surface, decoy pages, occluders."""

    surface: BackgroundSurface | None = None
    extra_sheets: int = 0
    occluders: tuple = ()

    def __post_init__(self):
        if self.extra_sheets < 0:
            raise GeometryError("extra_sheets must be >= 0")
        object.__setattr__(self, "occluders", tuple(self.occluders))


# --- scene instance ------------------------------------------------------------------

@dataclass(eq=False)
class SceneInstance:
    """A fully resolved randomized scene, ready to render."""

    seed: int
    sheet: SheetSpec
    deformation: Deformation
    camera: CameraModel
    lights: tuple
    background: BackgroundSpec
    render: "RenderSettings"  # noqa: F821 - imported lazily to avoid a cycle
    categorical_choices: dict = field(default_factory=dict)
    resolved_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lights:
            raise GeometryError("scene must have at least one light")
        for occ in self.background.occluders:
            half = np.asarray(occ.half_size) + 1e-9
            rel = rot_x(-occ.pitch) @ (rot_z(-occ.yaw) @ (self.camera.position - np.asarray(occ.center)))
            if np.all(np.abs(rel) <= half):
                raise GeometryError("occluder intersects the camera origin")

    def to_dict(self) -> dict:
        """JSON-ready serialization of every resolved scene value."""
        cam = self.camera
        sheet = self.sheet
        lights = []
        for l in self.lights:
            if isinstance(l, PointLight):
                lights.append({"kind": "point", "position": list(l.position),
                               "intensity_w": l.intensity_w})
            elif isinstance(l, AreaLight):
                lights.append({"kind": "area", "position": list(l.position),
                               "normal": list(l.normal), "width_m": l.width_m,
                               "height_m": l.height_m, "radiance": list(l.radiance)})
            else:
                lights.append({"kind": "environment", "radiance": list(l.radiance)})
        ops = []
        for op in self.deformation.ops:
            if isinstance(op, Bend):
                ops.append({"op": "bend", "curvature": op.curvature,
                            "axis_angle": op.axis_angle})
            elif isinstance(op, Fold):
                ops.append({"op": "fold", "point": list(op.point),
                            "direction": list(op.direction), "dihedral": op.dihedral})
            else:
                ops.append({"op": "roughness", "amplitude_m": op.amplitude_m,
                            "frequency": op.frequency, "noise_seed": op.noise_seed})
        bg = self.background
        return {
            "seed": self.seed,
            "sheet": {
                "width_m": sheet.width_m, "height_m": sheet.height_m,
                "grid_nx": sheet.grid_nx, "grid_ny": sheet.grid_ny,
                "class_label": sheet.class_label, "texture_ref": sheet.texture_ref,
                "fields": [{"name": f.name, "uv_rect": list(f.uv_rect)} for f in sheet.fields],
            },
            "deformation": ops,
            "camera": {
                "resolution": list(cam.resolution),
                "sensor_width_mm": cam.sensor_width_mm,
                "focal_mm": cam.focal_mm,
                "f_number": cam.f_number,
                "focus_distance_m": cam.focus_distance_m,
                "position": list(cam.position),
                "right": list(cam.orientation[0]),
                "up": list(cam.orientation[1]),
                "forward": list(cam.orientation[2]),
                "roll_theta": cam.roll_theta,
            },
            "lights": lights,
            "background": {
                "surface": None if bg.surface is None else {
                    "name": bg.surface.name,
                    "albedo": list(bg.surface.albedo) if not isinstance(bg.surface.albedo, ImageBuffer)
                    else bg.surface.name,
                    "size_m": bg.surface.size_m,
                },
                "extra_sheets": bg.extra_sheets,
                "occluders": [{
                    "kind": o.kind, "center": list(o.center), "half_size": list(o.half_size),
                    "yaw": o.yaw, "pitch": o.pitch, "albedo": list(o.albedo),
                } for o in bg.occluders],
            },
            "render": {"spp": self.render.spp, "max_depth": self.render.max_depth,
                       "tile": self.render.tile},
            "categorical_choices": dict(self.categorical_choices),
            "resolved_params": dict(self.resolved_params),
        }


# --- geometry assembly -----------------------------------------------------------------

@dataclass(eq=False)
class SceneObject:
    """Mesh plus its material (constant albedo or texture)."""

    mesh: TriangleMesh
    albedo: tuple | None = None
    texture: ImageBuffer | None = None


@dataclass(eq=False)
class SceneGeometry:
    """Everything the renderer needs: meshes, finite lights, environment."""

    objects: list
    lights: list  # PointLight / AreaLight only
    env_radiance: np.ndarray  # (3,) float64
    document_mesh: TriangleMesh = None


def _grid_quad(width: float, height: float, object_id: int, z: float = 0.0) -> TriangleMesh:
    spec = SheetSpec(width_m=width, height_m=height, grid_nx=1, grid_ny=1)
    mesh = build_sheet_mesh(spec)
    mesh.object_id = object_id
    mesh.vertices[:, 2] += z
    return mesh


def _box_mesh(half: tuple, object_id: int) -> TriangleMesh:
    hx, hy, hz = half
    corners = np.array([[sx * hx, sy * hy, sz * hz]
                        for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)],
                       dtype=np.float64)
    # CCW when viewed from outside.
    faces = np.array([
        [0, 2, 3], [0, 3, 1],  # bottom (-z)
        [4, 5, 7], [4, 7, 6],  # top (+z)
        [0, 1, 5], [0, 5, 4],  # front (-y)
        [2, 6, 7], [2, 7, 3],  # back (+y)
        [0, 4, 6], [0, 6, 2],  # left (-x)
        [1, 3, 7], [1, 7, 5],  # right (+x)
    ], dtype=np.int32)
    normals = _vertex_normals(corners, faces)
    uvs = np.zeros((8, 2))
    return TriangleMesh(corners, normals, uvs, faces, object_id=object_id)


def document_base_height(extra_sheets: int) -> float:
    """Rest height of the document's plane above the table."""
    return SHEET_STACK_PITCH_M * (extra_sheets + 2)


def assemble_scene(instance: SceneInstance) -> SceneGeometry:
    """Instantiate world-space geometry for a scene instance.

    Decoy page and occluder placement derive from the instance seed, so the
    result is a pure function of the instance.
    """
    objects = []
    sheet = instance.sheet
    bg = instance.background

    doc_mesh = apply_deformation(build_sheet_mesh(sheet), instance.deformation)
    doc_mesh = transform_mesh(doc_mesh, translation=(0.0, 0.0, document_base_height(bg.extra_sheets)))
    if isinstance(sheet.texture, ImageBuffer):
        objects.append(SceneObject(doc_mesh, texture=sheet.texture.as_rgb()))
    else:
        objects.append(SceneObject(doc_mesh, albedo=sheet.texture))

    if bg.surface is not None:
        table = _grid_quad(bg.surface.size_m, bg.surface.size_m, OBJ_BACKGROUND)
        if isinstance(bg.surface.albedo, ImageBuffer):
            objects.append(SceneObject(table, texture=bg.surface.albedo.as_rgb()))
        else:
            objects.append(SceneObject(table, albedo=tuple(bg.surface.albedo)))

    for i in range(bg.extra_sheets):
        gen = rngmod.stream(instance.seed, "decoy", i)
        offset = gen.uniform(-0.02, 0.02, size=2)
        angle = gen.uniform(-0.3, 0.3)
        tone = gen.uniform(0.82, 0.95)
        decoy = _grid_quad(sheet.width_m, sheet.height_m, OBJ_EXTRA_SHEET)
        decoy = transform_mesh(decoy, rotation=rot_z(angle),
                               translation=(offset[0], offset[1],
                                            SHEET_STACK_PITCH_M * (i + 1)))
        objects.append(SceneObject(decoy, albedo=(tone, tone, tone)))

    for occ in bg.occluders:
        if occ.kind == "box":
            mesh = _box_mesh(occ.half_size, OBJ_OCCLUDER)
        else:
            mesh = _grid_quad(2 * occ.half_size[0], 2 * occ.half_size[1], OBJ_OCCLUDER)
        rot = rot_z(occ.yaw) @ rot_x(occ.pitch)
        mesh = transform_mesh(mesh, rotation=rot, translation=occ.center)
        objects.append(SceneObject(mesh, albedo=occ.albedo))

    lights = [l for l in instance.lights if not isinstance(l, EnvironmentLight)]
    env = np.zeros(3)
    for l in instance.lights:
        if isinstance(l, EnvironmentLight):
            env += np.asarray(l.radiance, dtype=np.float64)

    return SceneGeometry(objects=objects, lights=lights, env_radiance=env,
                         document_mesh=doc_mesh)
