"""Per-sample output files and the dataset manifest.

Layout under the output directory:

    images/NNNNNN.png        beauty pass, 8-bit sRGB PNG
    depth/NNNNNN_depth.pfm   32-bit float PFM (little-endian), meters along the
                             primary ray; misses stored as the 3.4e38 sentinel
    seg/NNNNNN_seg.png       8-bit paletted PNG, pixel value = class label
    manifest.jsonl           header line + one record per sample

Manifests are byte-stable: record keys are sorted, floats use shortest
round-trip formatting, and records are committed in sample-id order no matter
how renders were scheduled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imageio
from .errors import ManifestError
from .groundtruth import AngleLabel, Homography, ProjectedField
from .renderer import RenderPasses, tonemap

DEPTH_MISS_SENTINEL = np.float32(3.4e38)

SEG_PALETTE = {
    0: (105, 105, 105),  # background surface
    1: (255, 255, 255),  # document sheet
    2: (220, 60, 60),    # occluder
    3: (70, 120, 220),   # extra sheet
    255: (0, 0, 0),      # miss
}

PASS_DEFINITIONS = {
    "rgb": "linear radiance encoded as 8-bit sRGB PNG",
    "depth": {
        "semantics": "euclidean distance along the primary center ray, meters",
        "format": "PFM grayscale, 32-bit float, little-endian (negative scale)",
        "miss_sentinel": float(DEPTH_MISS_SENTINEL),
    },
    "seg": {
        "format": "8-bit paletted PNG; pixel value is the class label",
        "labels": {"0": "background_surface", "1": "document", "2": "occluder",
                   "3": "extra_sheet", "255": "miss"},
    },
    "field_sampling": {"boundary_samples": 64, "interior_samples": 256},
}


# --- PFM -----------------------------------------------------------------------

def write_pfm(path, data: np.ndarray) -> None:
    """Grayscale PFM, rows bottom-to-top, scale -1 (little-endian)."""
    if data.ndim != 2:
        raise ManifestError("PFM writer expects a 2-D array")
    arr = np.asarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{arr.shape[1]} {arr.shape[0]}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.flipud(arr).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ManifestError(f"{path}: not a grayscale PFM file")
        width, height = map(int, fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(width * height * 4), dtype=dtype)
    return np.flipud(data.reshape(height, width)).astype(np.float32)


def write_depth(path, depth: np.ndarray) -> None:
    """Depth pass to PFM with +inf replaced by the declared sentinel."""
    out = np.where(np.isinf(depth), DEPTH_MISS_SENTINEL, depth.astype(np.float32))
    write_pfm(path, out)


def read_depth(path) -> np.ndarray:
    data = read_pfm(path)
    return np.where(data == DEPTH_MISS_SENTINEL, np.float32(np.inf), data)


# --- sample records ----------------------------------------------------------------

@dataclass(eq=False)
class SampleRecord:
    """Everything recorded about one sample."""

    sample_id: int
    image_path: str
    depth_path: str
    seg_path: str
    class_label: str
    scene: dict  # full SceneInstance serialization
    angle: AngleLabel
    homography: Homography | None
    fields: list

    def to_dict(self) -> dict:
        return {
            "type": "sample",
            "sample_id": self.sample_id,
            "image_path": self.image_path,
            "depth_path": self.depth_path,
            "seg_path": self.seg_path,
            "class_label": self.class_label,
            "scene": self.scene,
            "labels": {
                "angle": {
                    "theta": self.angle.theta,
                    "sin_theta": self.angle.sin_theta,
                    "cos_theta": self.angle.cos_theta,
                },
                "homography": (None if self.homography is None
                               else [[float(v) for v in row] for row in self.homography.matrix]),
                "fields": [f.to_dict() if isinstance(f, ProjectedField) else f
                           for f in self.fields],
            },
        }


def sample_file_names(sample_id: int) -> tuple:
    stem = f"{sample_id:06d}"
    return (f"images/{stem}.png", f"depth/{stem}_depth.pfm", f"seg/{stem}_seg.png")


def _seg_png(seg: np.ndarray):
    from PIL import Image

    palette = np.zeros((256, 3), dtype=np.uint8)
    for label, color in SEG_PALETTE.items():
        palette[label] = color
    img = Image.fromarray(seg, mode="P")
    img.putpalette(palette.ravel().tolist())
    return img


def write_sample(out_dir, record: SampleRecord, passes: RenderPasses,
                 depth_png16: bool = False) -> dict:
    """Write all passes for one sample; returns the relative paths written.

    Files are keyed by sample id (NNNNNN), so re-running a job overwrites its
    own outputs deterministically.
    """
    out_dir = Path(out_dir)
    image_rel, depth_rel, seg_rel = sample_file_names(record.sample_id)
    if (record.image_path, record.depth_path, record.seg_path) != (image_rel, depth_rel, seg_rel):
        raise ManifestError(f"sample {record.sample_id}: record paths do not match naming rule")
    for sub in ("images", "depth", "seg"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    imageio.write_png8(out_dir / image_rel, tonemap(passes.rgb))
    write_depth(out_dir / depth_rel, passes.depth)
    _seg_png(passes.seg).save(out_dir / seg_rel, format="PNG")

    written = {"image": image_rel, "depth": depth_rel, "seg": seg_rel}
    if depth_png16:
        rel = f"depth/{record.sample_id:06d}_depth16.png"
        mm = np.clip(np.where(np.isinf(passes.depth), 65.535, passes.depth) * 1000.0,
                     0, 65535).astype(np.uint16)
        imageio.write_png16(out_dir / rel, mm)
        written["depth16"] = rel
    return written


# --- manifest -------------------------------------------------------------------------

def manifest_header(seed: int, count: int, spec_sha256: str, tool_version: str) -> dict:
    return {
        "type": "header",
        "tool": "docscene",
        "version": tool_version,
        "seed": seed,
        "count": count,
        "spec_sha256": spec_sha256,
        "passes": PASS_DEFINITIONS,
    }


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_manifest(out_dir, records, header: dict) -> Path:
    """Header plus one JSON record per line, ordered by sample_id."""
    records = sorted(records, key=lambda r: r.sample_id)
    ids = [r.sample_id for r in records]
    if len(set(ids)) != len(ids):
        raise ManifestError("duplicate sample ids in manifest")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    path = Path(out_dir) / "manifest.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(header) + "\n")
        for record in records:
            fh.write(_dump(record.to_dict()) + "\n")
    return path


def read_manifest(path):
    """Parse a manifest back into (header, [record dicts])."""
    header = None
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("type") == "header":
                if header is not None:
                    raise ManifestError("multiple header lines")
                header = obj
            else:
                records.append(obj)
    if header is None:
        raise ManifestError("manifest has no header line")
    return header, records
