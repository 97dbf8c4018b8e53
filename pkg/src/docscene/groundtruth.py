"""Ground-truth labels: projections, homographies, field polygons, rotation.

Conventions (used everywhere, recorded in the manifest header):
- Pixel coordinates are continuous, x right, y down, origin at the top-left
  image corner; the principal point is (W/2, H/2).
- Document-plane coordinates are meters with origin at the sheet center,
  +x along +u and +y along +v (the document's "up").
- Rotation labels are radians in (-pi, pi], positive when the document's up
  axis appears rotated counter-clockwise in the image; for a fronto-parallel
  sheet this equals the camera roll.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import scene as sc
from .errors import (
    DegenerateHomographyError,
    EdgeOnViewError,
    GeometryError,
    NonPlanarSheetError,
    PointBehindCameraError,
)
from .renderer import TracedScene, camera_array

FIELD_BOUNDARY_SAMPLES = 64
FIELD_INTERIOR_SAMPLES = 256  # 16 x 16 stratum centers
_OCCLUSION_SLACK_M = 1e-4


@dataclass(frozen=True)
class AngleLabel:
    """In-image document rotation with its (sin, cos) encoding."""

    theta: float
    sin_theta: float
    cos_theta: float

    @classmethod
    def from_theta(cls, theta: float) -> "AngleLabel":
        return cls(theta=theta, sin_theta=math.sin(theta), cos_theta=math.cos(theta))


@dataclass(eq=False)
class Homography:
    """3x3 map from homogeneous document-plane coordinates (meters) to pixels."""

    matrix: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) document-plane points to (n, 2) pixel points."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        hom = np.column_stack([points, np.ones(len(points))]) @ self.matrix.T
        return hom[:, :2] / hom[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


@dataclass(eq=False)
class ProjectedField:
    """A document field projected into the image."""

    name: str
    polygon: np.ndarray  # (k, 2) pixel points along the uv_rect boundary
    aabb: tuple  # (x0, y0, x1, y1), empty polygon -> zeros
    visibility: float
    fully_in_frame: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "polygon": [[float(p[0]), float(p[1])] for p in self.polygon],
            "aabb": [float(v) for v in self.aabb],
            "visibility": float(self.visibility),
            "fully_in_frame": bool(self.fully_in_frame),
        }


@dataclass(frozen=True)
class DocFrame:
    """World-space frame of a planar sheet: origin at the center, unit in-plane
    axes along +u and +v."""

    origin: np.ndarray
    ex: np.ndarray
    ey: np.ndarray


# --- projection ------------------------------------------------------------------

def project_point(camera: sc.CameraModel, point) -> np.ndarray:
    """Pinhole projection to continuous pixel coordinates.

    Raises PointBehindCameraError when the point's forward component is <= 0.
    Consistent with camera_ray: casting a ray through the returned pixel
    passes through the point.
    """
    cam = camera_array(camera)
    d = np.asarray(point, dtype=np.float64) - cam[0:3]
    z = float(d @ cam[9:12])
    if z <= 0.0:
        raise PointBehindCameraError(f"point {point} is behind the camera (z={z:.6g})")
    x = float(d @ cam[3:6])
    y = float(d @ cam[6:9])
    fx = cam[14] / cam[12] * cam[17]
    fy = cam[14] / cam[13] * cam[18]
    return np.array([cam[17] / 2 + fx * x / z, cam[18] / 2 - fy * y / z])


def _project_many(camera: sc.CameraModel, points: np.ndarray):
    """Vectorized projection; returns (pixels (n,2), in_front (n,) bool)."""
    cam = camera_array(camera)
    d = np.asarray(points, dtype=np.float64) - cam[0:3]
    z = d @ cam[9:12]
    x = d @ cam[3:6]
    y = d @ cam[6:9]
    in_front = z > 0.0
    fx = cam[14] / cam[12] * cam[17]
    fy = cam[14] / cam[13] * cam[18]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = cam[17] / 2 + fx * x / z
        py = cam[18] / 2 - fy * y / z
    return np.column_stack([px, py]), in_front


# --- planar sheet frame and homography ----------------------------------------------

def sheet_frame(mesh: sc.TriangleMesh) -> DocFrame:
    """Document frame of a planar sheet mesh; NonPlanarSheetError otherwise."""
    if sc.sheet_plane(mesh) is None:
        raise NonPlanarSheetError("sheet is not planar; no document frame exists")
    m = sc.uv_affine_fit(mesh.vertices, mesh.uvs)
    origin = 0.5 * m[0] + 0.5 * m[1] + m[2]
    width = np.linalg.norm(m[0])
    height = np.linalg.norm(m[1])
    if width < 1e-12 or height < 1e-12:
        raise NonPlanarSheetError("degenerate sheet parameterization")
    return DocFrame(origin=origin, ex=m[0] / width, ey=m[1] / height)


def homography_doc_to_image(camera: sc.CameraModel, frame: DocFrame) -> Homography:
    """Exact projective map from document-plane meters to pixels.

    Normalized so H[2,2] = 1. Raises DegenerateHomographyError when the
    camera lies in the sheet plane (or the map is otherwise singular).
    """
    cam = camera_array(camera)
    right, up, forward = cam[3:6], cam[6:9], cam[9:12]
    rel = frame.origin - cam[0:3]
    ext = np.column_stack([
        [frame.ex @ right, frame.ex @ up, frame.ex @ forward],
        [frame.ey @ right, frame.ey @ up, frame.ey @ forward],
        [rel @ right, rel @ up, rel @ forward],
    ])
    fx = cam[14] / cam[12] * cam[17]
    fy = cam[14] / cam[13] * cam[18]
    intrinsics = np.array([
        [fx, 0.0, cam[17] / 2],
        [0.0, -fy, cam[18] / 2],
        [0.0, 0.0, 1.0],
    ])
    h = intrinsics @ ext
    if abs(h[2, 2]) < 1e-12:
        raise DegenerateHomographyError("camera lies in the document plane")
    h = h / h[2, 2]
    if abs(np.linalg.det(h)) <= 1e-12:
        raise DegenerateHomographyError("homography is singular for this pose")
    return Homography(h)


def doc_plane_coords(sheet: sc.SheetSpec, uv: np.ndarray) -> np.ndarray:
    """UV -> document-plane meters (origin at the sheet center)."""
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    return np.column_stack([(uv[:, 0] - 0.5) * sheet.width_m,
                            (uv[:, 1] - 0.5) * sheet.height_m])


# --- UV -> world on arbitrary (deformed) sheets ------------------------------------

def uv_to_world(mesh: sc.TriangleMesh, uv: np.ndarray) -> np.ndarray:
    """Map UV points onto the mesh surface via barycentric interpolation
    within the containing UV triangle."""
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    tris = mesh.triangles
    a = mesh.uvs[tris[:, 0]]
    b = mesh.uvs[tris[:, 1]]
    c = mesh.uvs[tris[:, 2]]
    det = (b[:, 1] - c[:, 1]) * (a[:, 0] - c[:, 0]) + (c[:, 0] - b[:, 0]) * (a[:, 1] - c[:, 1])
    safe = np.where(np.abs(det) < 1e-30, 1.0, det)

    dx = uv[:, None, 0] - c[None, :, 0]
    dy = uv[:, None, 1] - c[None, :, 1]
    l1 = ((b[:, 1] - c[:, 1])[None, :] * dx + (c[:, 0] - b[:, 0])[None, :] * dy) / safe
    l2 = ((c[:, 1] - a[:, 1])[None, :] * dx + (a[:, 0] - c[:, 0])[None, :] * dy) / safe
    l3 = 1.0 - l1 - l2
    tol = -1e-9
    inside = (l1 >= tol) & (l2 >= tol) & (l3 >= tol) & (np.abs(det) >= 1e-30)[None, :]
    if not inside.any(axis=1).all():
        missing = uv[~inside.any(axis=1)][0]
        raise GeometryError(f"uv point {tuple(missing)} lies outside the mesh parameterization")
    tri_idx = inside.argmax(axis=1)
    rows = np.arange(len(uv))
    w1 = l1[rows, tri_idx][:, None]
    w2 = l2[rows, tri_idx][:, None]
    w3 = l3[rows, tri_idx][:, None]
    verts = mesh.vertices
    chosen = tris[tri_idx]
    return w1 * verts[chosen[:, 0]] + w2 * verts[chosen[:, 1]] + w3 * verts[chosen[:, 2]]


def _boundary_uv(field: sc.FieldAnnotation, samples_per_edge: int) -> np.ndarray:
    u0, v0, u1, v1 = field.uv_rect
    t = np.arange(samples_per_edge) / samples_per_edge
    bottom = np.column_stack([u0 + (u1 - u0) * t, np.full_like(t, v0)])
    right = np.column_stack([np.full_like(t, u1), v0 + (v1 - v0) * t])
    top = np.column_stack([u1 - (u1 - u0) * t, np.full_like(t, v1)])
    left = np.column_stack([np.full_like(t, u0), v1 - (v1 - v0) * t])
    return np.concatenate([bottom, right, top, left])


def _interior_uv(field: sc.FieldAnnotation, n_side: int) -> np.ndarray:
    u0, v0, u1, v1 = field.uv_rect
    centers = (np.arange(n_side) + 0.5) / n_side
    uu, vv = np.meshgrid(u0 + (u1 - u0) * centers, v0 + (v1 - v0) * centers)
    return np.column_stack([uu.ravel(), vv.ravel()])


def project_field(camera: sc.CameraModel, mesh: sc.TriangleMesh,
                  field: sc.FieldAnnotation, traced: TracedScene) -> ProjectedField:
    """Project a field's uv_rect onto the image with occlusion-aware visibility.

    The polygon is 64 boundary samples mapped through the mesh surface and
    projected; visibility is the fraction of 256 stratified interior samples
    that are in front of the camera, inside the frame, and unoccluded along
    the ray to the camera. Boundary samples behind the camera mark the field
    as out of frame instead of raising.
    """
    w, h = camera.resolution
    boundary_world = uv_to_world(mesh, _boundary_uv(field, FIELD_BOUNDARY_SAMPLES // 4))
    pixels, in_front = _project_many(camera, boundary_world)
    polygon = pixels[in_front]
    if len(polygon):
        aabb = (float(polygon[:, 0].min()), float(polygon[:, 1].min()),
                float(polygon[:, 0].max()), float(polygon[:, 1].max()))
    else:
        aabb = (0.0, 0.0, 0.0, 0.0)
    fully_in_frame = bool(
        in_front.all()
        and (pixels[:, 0] >= 0).all() and (pixels[:, 0] < w).all()
        and (pixels[:, 1] >= 0).all() and (pixels[:, 1] < h).all()
    )

    interior_world = uv_to_world(mesh, _interior_uv(field, int(math.isqrt(FIELD_INTERIOR_SAMPLES))))
    ipix, i_front = _project_many(camera, interior_world)
    in_frame = (i_front & (ipix[:, 0] >= 0) & (ipix[:, 0] < w)
                & (ipix[:, 1] >= 0) & (ipix[:, 1] < h))
    visible = np.zeros(len(interior_world), dtype=bool)
    if in_frame.any():
        cam_pos = np.asarray(camera.position, dtype=np.float64)
        pts = interior_world[in_frame]
        to_pt = pts - cam_pos
        dist = np.linalg.norm(to_pt, axis=1)
        dirs = to_pt / dist[:, None]
        origins = np.broadcast_to(cam_pos, pts.shape).copy()
        blocked = traced.occluded(origins, dirs, dist - _OCCLUSION_SLACK_M)
        visible[in_frame] = ~blocked
    visibility = float(visible.sum() / len(interior_world))
    return ProjectedField(name=field.name, polygon=polygon, aabb=aabb,
                          visibility=visibility, fully_in_frame=fully_in_frame)


# --- rotation label --------------------------------------------------------------------

def rotation_label(camera: sc.CameraModel, mesh: sc.TriangleMesh,
                   delta_uv: float = 0.02) -> AngleLabel:
    """Angle between the projected document up axis and image up.

    Positive = counter-clockwise in image coordinates (y down). Equals the
    camera roll for fronto-parallel sheets. Raises EdgeOnViewError when the
    projected up axis has ~zero length (edge-on view).
    """
    anchors = uv_to_world(mesh, np.array([[0.5, 0.5], [0.5, 0.5 + delta_uv]]))
    p0 = project_point(camera, anchors[0])
    p1 = project_point(camera, anchors[1])
    d = p1 - p0
    if np.hypot(d[0], d[1]) < 1e-9:
        raise EdgeOnViewError("document up axis projects to zero length")
    theta = math.atan2(-d[1], d[0]) - 0.5 * math.pi
    return AngleLabel.from_theta(_wrap(theta))


def rotation_label_from_roll(camera: sc.CameraModel) -> AngleLabel:
    """Restricted-mode label: the camera roll itself (fronto-parallel setups)."""
    return AngleLabel.from_theta(_wrap(camera.roll_theta))


def _wrap(theta: float) -> float:
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


# --- periodic angle loss -------------------------------------------------------------------

def periodic_loss(pred_sin, pred_cos, theta):
    """(pred_sin - sin theta)^2 + (pred_cos - cos theta)^2.

    For normalized predictions (sin t', cos t') this equals 2 - 2 cos(t' - theta).
    Accepts scalars or numpy arrays.
    """
    ds = pred_sin - np.sin(theta)
    dc = pred_cos - np.cos(theta)
    return ds * ds + dc * dc


def encode_angle(theta):
    """theta -> (sin theta, cos theta)."""
    return np.sin(theta), np.cos(theta)


def decode_angle(sin_theta, cos_theta):
    """(sin, cos) -> radians in (-pi, pi]; normalizes implicitly via atan2."""
    s = np.asarray(sin_theta, dtype=np.float64)
    c = np.asarray(cos_theta, dtype=np.float64)
    if np.any((s == 0.0) & (c == 0.0)):
        raise GeometryError("cannot decode the zero vector")
    out = np.arctan2(s, c)
    out = np.where(out <= -math.pi, math.pi, out)
    if out.ndim == 0:
        return float(out)
    return out


# --- per-scene label bundle -------------------------------------------------------------------

def compute_labels(instance: sc.SceneInstance, traced: TracedScene,
                   rotation_mode: str = "general"):
    """All labels for one scene: (AngleLabel, Homography | None, [ProjectedField])."""
    mesh = traced.document_mesh
    camera = instance.camera
    if rotation_mode == "roll":
        angle = rotation_label_from_roll(camera)
    else:
        angle = rotation_label(camera, mesh)
    try:
        hom = homography_doc_to_image(camera, sheet_frame(mesh))
    except NonPlanarSheetError:
        hom = None
    fields = [project_field(camera, mesh, f, traced) for f in instance.sheet.fields]
    return angle, hom, fields
