"""docscene: synthetic documents-in-natural-scenes dataset generator.

Builds randomized 3D scenes of deformable paper sheets textured with document
images, renders them with an embedded path tracer (beauty, depth, and
segmentation passes), and emits exact ground truth: document-to-image
homographies, projected field polygons with visibility, rotation labels, and
a JSON Lines manifest. Everything is deterministic given the spec and seed.
"""

__version__ = "0.1.0"

from .errors import DocSceneError, SpecError
from .imageio import ImageBuffer, constant_image, load_image
from .scene import (
    AreaLight,
    BackgroundSpec,
    BackgroundSurface,
    Bend,
    CameraModel,
    Deformation,
    EnvironmentLight,
    FieldAnnotation,
    Fold,
    Occluder,
    PointLight,
    Roughness,
    SceneInstance,
    SheetSpec,
    TriangleMesh,
    apply_deformation,
    build_sheet_mesh,
    look_at,
    sheet_plane,
)
from .sampler import (
    CategoricalDist,
    ParamRange,
    RandomizationSpec,
    parse_spec,
    sample_categorical,
    sample_continuous,
    sample_scene,
)
from .renderer import (
    RenderPasses,
    RenderSettings,
    TracedScene,
    camera_ray,
    intersect,
    prepare_scene,
    render,
    tonemap,
)
from .groundtruth import (
    AngleLabel,
    Homography,
    ProjectedField,
    decode_angle,
    encode_angle,
    homography_doc_to_image,
    periodic_loss,
    project_field,
    project_point,
    rotation_label,
    sheet_frame,
)

__all__ = [name for name in dir() if not name.startswith("_")]
