import json
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from docscene import scene as sc
from docscene import renderer as rd


def make_doc_texture(width=240, height=320, seed=0):
    """Synthetic text-like page: white paper, dark line blocks, one logo box."""
    gen = np.random.default_rng(seed)
    img = np.full((height, width, 3), 0.92, dtype=np.float32)
    y = 24
    while y < height - 16:
        line_h = int(gen.integers(4, 7))
        x0 = 20
        x1 = int(gen.integers(width // 2, width - 16))
        img[y:y + line_h, x0:x1] = 0.12
        y += line_h + int(gen.integers(4, 9))
    img[10:34, width - 60:width - 12] = (0.75, 0.2, 0.15)  # logo block
    return img


@pytest.fixture(scope="session")
def doc_dir(tmp_path_factory):
    """Input directory with PNG + JPEG documents and one field sidecar."""
    root = tmp_path_factory.mktemp("docs")
    for i, name in enumerate(["invoice.png", "letter.png"]):
        arr = make_doc_texture(seed=i)
        Image.fromarray((np.clip(arr, 0, 1) * 255).astype(np.uint8)).save(root / name)
    arr = make_doc_texture(width=320, height=240, seed=7)
    Image.fromarray((np.clip(arr, 0, 1) * 255).astype(np.uint8)).save(
        root / "receipt.jpg", quality=92)
    sidecar = [{"name": "logo", "uv_rect": [0.70, 0.86, 0.95, 0.97]}]
    (root / "invoice.png.fields.json").write_text(json.dumps(sidecar))
    return root


def flat_sheet(width=0.2159, height=0.2794, nx=8, ny=8, albedo=(0.6, 0.6, 0.6),
               fields=()):
    return sc.SheetSpec(width_m=width, height_m=height, grid_nx=nx, grid_ny=ny,
                        texture=albedo, fields=tuple(fields), class_label="test")


def simple_instance(sheet=None, deformation=None, camera=None, lights=None,
                    background=None, settings=None, seed=1234):
    """Library-level scene for renderer and label tests."""
    sheet = sheet if sheet is not None else flat_sheet()
    camera = camera if camera is not None else sc.look_at(
        (0.0, 0.0, 0.5), (0.0, 0.0, 0.0), resolution=(96, 96))
    lights = lights if lights is not None else (sc.EnvironmentLight((1.0, 1.0, 1.0)),)
    background = background if background is not None else sc.BackgroundSpec(surface=None)
    settings = settings if settings is not None else rd.RenderSettings(spp=16, max_depth=4)
    return sc.SceneInstance(
        seed=seed,
        sheet=sheet,
        deformation=deformation if deformation is not None else sc.Deformation(),
        camera=camera,
        lights=tuple(lights),
        background=background,
        render=settings,
    )
