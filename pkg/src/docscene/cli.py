"""Command-line entry point.

    docscene generate --spec spec.yaml --input docs/ --output out/ [--count N]
                      [--seed U64] [--threads N] [--spp N] [--res WxH]
    docscene preview  (same flags; renders sample 0 at reduced spp and writes
                       a beauty/depth/overlay triptych plus preview.json)

Progress goes to stderr; a machine-readable JSON summary goes to stdout.
The output tree is a pure function of (spec bytes, input images, overrides):
reruns and different --threads values produce byte-identical files.

Exit codes: 0 ok, 2 spec error, 3 unusable input, 4 unwritable output,
5 sample/render failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import __version__, dataset, groundtruth, imageio, renderer as rendermod
from . import rng as rngmod, sampler, scene as sc
from .errors import DocSceneError, SpecError

EXIT_SPEC = 2
EXIT_INPUT = 3
EXIT_OUTPUT = 4
EXIT_RENDER = 5

INPUT_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass(eq=False)
class RunConfig:
    spec_path: str
    input_dir: str | None = None
    output_dir: str | None = None
    count: int | None = None
    seed: int | None = None
    threads: int = 1
    spp: int | None = None
    resolution: tuple | None = None
    preview: bool = False

    def __post_init__(self):
        if self.threads < 1:
            raise SpecError("threads must be >= 1")


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docscene",
                                     description="Render randomized document scenes "
                                                 "with exact ground truth.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("generate", "render a dataset"),
                            ("preview", "render sample 0 with a label overlay")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--spec", required=True, help="randomization spec (YAML)")
        p.add_argument("--input", help="directory of base document images")
        p.add_argument("--output", help="output directory")
        p.add_argument("--count", type=int, help="override sample count")
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--spp", type=int, help="override samples per pixel")
        p.add_argument("--res", help="override resolution, WxH")
    return parser


def _parse_res(text: str) -> tuple:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise _CliError(EXIT_SPEC, f"bad --res value {text!r}, expected WxH") from exc


def _load_spec(cfg: RunConfig) -> sampler.RandomizationSpec:
    try:
        spec = sampler.load_spec(cfg.spec_path)
    except OSError as exc:
        raise _CliError(EXIT_SPEC, f"cannot read spec: {exc}") from exc
    except SpecError as exc:
        raise _CliError(EXIT_SPEC, f"spec error: {exc}") from exc
    overrides = {}
    if cfg.count is not None:
        if cfg.count < 0:
            raise _CliError(EXIT_SPEC, "--count must be >= 0")
        overrides["count"] = cfg.count
    if cfg.seed is not None:
        overrides["seed"] = cfg.seed
    if cfg.spp is not None:
        if cfg.spp < 1:
            raise _CliError(EXIT_SPEC, "--spp must be >= 1")
        overrides["spp"] = cfg.spp
    if cfg.resolution is not None:
        overrides["width"], overrides["height"] = cfg.resolution
    if cfg.input_dir is not None:
        overrides["input_dir"] = cfg.input_dir
    if cfg.output_dir is not None:
        overrides["output_dir"] = cfg.output_dir
    return spec.with_overrides(**overrides)


def _list_inputs(spec: sampler.RandomizationSpec) -> list:
    if not spec.input_dir:
        raise _CliError(EXIT_INPUT, "no input directory (use --input or spec input_dir)")
    input_dir = Path(spec.input_dir)
    if not input_dir.is_dir():
        raise _CliError(EXIT_INPUT, f"input directory {input_dir} does not exist")
    files = sorted(p for p in input_dir.iterdir()
                   if p.suffix.lower() in INPUT_EXTENSIONS and p.is_file())
    if not files:
        raise _CliError(EXIT_INPUT, f"input directory {input_dir} has no supported images")
    return files


def _prepare_output(spec: sampler.RandomizationSpec) -> Path:
    if not spec.output_dir:
        raise _CliError(EXIT_OUTPUT, "no output directory (use --output or spec output_dir)")
    out_dir = Path(spec.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise _CliError(EXIT_OUTPUT, f"output directory {out_dir} not writable: {exc}") from exc
    return out_dir


class _DocLibrary:
    """Loads base documents lazily; one SheetSpec template per file."""

    def __init__(self, paths):
        self.paths = paths
        self._cache = {}

    def base_doc(self, path: Path) -> sc.SheetSpec:
        if path not in self._cache:
            texture = imageio.load_image(path)
            width, height = _auto_preset(texture)
            fields = [sc.FieldAnnotation("page", (0.0, 0.0, 1.0, 1.0))]
            sidecar = path.with_suffix(path.suffix + ".fields.json")
            if sidecar.exists():
                for entry in json.loads(sidecar.read_text()):
                    fields.append(sc.FieldAnnotation(entry["name"], tuple(entry["uv_rect"])))
            self._cache[path] = sc.SheetSpec(
                width_m=width, height_m=height, texture=texture,
                fields=tuple(fields), class_label=path.stem, texture_ref=path.name)
        return self._cache[path]


def _auto_preset(texture: imageio.ImageBuffer) -> tuple:
    """Closest paper preset to the texture aspect, orientation-matched."""
    aspect = texture.width / texture.height
    best = min(sc.SHEET_PRESETS.values(),
               key=lambda wh: abs((wh[0] / wh[1]) - min(aspect, 1 / aspect)))
    return (best[1], best[0]) if aspect > 1 else best


def _generate_sample(spec, library, doc_paths, index):
    pick = rngmod.stream(spec.seed, index, "base_doc").integers(0, len(doc_paths))
    doc_path = doc_paths[int(pick)]
    base = library.base_doc(doc_path)
    instance = sampler.sample_scene(spec, base, index)
    traced = rendermod.prepare_scene(instance)
    passes = rendermod.render(traced, threads=1)
    angle, hom, fields = groundtruth.compute_labels(instance, traced,
                                                    rotation_mode=spec.rotation_label)
    image_rel, depth_rel, seg_rel = dataset.sample_file_names(index)
    record = dataset.SampleRecord(
        sample_id=index, image_path=image_rel, depth_path=depth_rel, seg_path=seg_rel,
        class_label=base.class_label, scene=instance.to_dict(),
        angle=angle, homography=hom, fields=fields)
    return record, passes


def _spec_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_generate(cfg: RunConfig) -> dict:
    started = time.perf_counter()
    spec = _load_spec(cfg)
    doc_paths = _list_inputs(spec)
    out_dir = _prepare_output(spec)
    library = _DocLibrary(doc_paths)

    records = []
    errors = []

    def work(index):
        record, passes = _generate_sample(spec, library, doc_paths, index)
        dataset.write_sample(out_dir, record, passes)
        return record

    indices = list(range(spec.count))
    done = 0
    if cfg.threads <= 1 or len(indices) <= 1:
        for index in indices:
            try:
                records.append(work(index))
            except Exception as exc:
                errors.append((index, exc))
                break
            done += 1
            print(f"[{done}/{len(indices)}] sample {index:06d} done", file=sys.stderr, flush=True)
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = {pool.submit(work, index): index for index in indices}
            for future in as_completed(futures):
                index = futures[future]
                try:
                    records.append(future.result())
                except Exception as exc:
                    errors.append((index, exc))
                    for other in futures:
                        other.cancel()
                    break
                done += 1
                print(f"[{done}/{len(indices)}] sample {index:06d} done",
                      file=sys.stderr, flush=True)
    if errors:
        index, exc = errors[0]
        raise _CliError(EXIT_RENDER, f"sample {index:06d} failed: {exc}")

    header = dataset.manifest_header(seed=spec.seed, count=spec.count,
                                     spec_sha256=_spec_sha256(cfg.spec_path),
                                     tool_version=__version__)
    dataset.write_manifest(out_dir, records, header)
    return {
        "command": "generate",
        "samples": len(records),
        "output_dir": str(out_dir),
        "seconds": round(time.perf_counter() - started, 3),
    }


def depth_to_gray(depth: np.ndarray) -> np.ndarray:
    """Preview normalization: min depth -> black, max finite depth -> white."""
    finite = np.isfinite(depth)
    out = np.zeros(depth.shape, dtype=np.uint8)
    if finite.any():
        lo = float(depth[finite].min())
        hi = float(depth[finite].max())
        span = hi - lo if hi > lo else 1.0
        scaled = np.clip((depth - lo) / span, 0.0, 1.0)
        out = np.where(finite, np.rint(scaled * 255.0), 255.0).astype(np.uint8)
    return out


def _overlay_panel(passes, record) -> np.ndarray:
    img = Image.fromarray(rendermod.tonemap(passes.rgb))
    draw = ImageDraw.Draw(img)
    colors = [(255, 210, 40), (80, 220, 255), (255, 90, 200), (140, 255, 120)]
    for i, f in enumerate(record.fields):
        poly = f.polygon if isinstance(f, groundtruth.ProjectedField) else None
        if poly is None or len(poly) < 2:
            continue
        pts = [tuple(p) for p in poly]
        draw.line(pts + [pts[0]], fill=colors[i % len(colors)], width=2)
    return np.asarray(img)


def run_preview(cfg: RunConfig) -> dict:
    started = time.perf_counter()
    spec = _load_spec(cfg)
    if cfg.spp is None:
        spec = spec.with_overrides(spp=min(spec.spp, 16))
    if spec.count == 0:
        spec = spec.with_overrides(count=1)
    doc_paths = _list_inputs(spec)
    out_dir = _prepare_output(spec)
    library = _DocLibrary(doc_paths)

    try:
        record, passes = _generate_sample(spec, library, doc_paths, 0)
    except DocSceneError as exc:
        raise _CliError(EXIT_RENDER, f"sample 000000 failed: {exc}")

    beauty = rendermod.tonemap(passes.rgb)
    depth_panel = np.repeat(depth_to_gray(passes.depth)[:, :, None], 3, axis=2)
    overlay = _overlay_panel(passes, record)
    gap = np.full((beauty.shape[0], 4, 3), 32, dtype=np.uint8)
    strip = np.concatenate([beauty, gap, depth_panel, gap, overlay], axis=1)
    imageio.write_png8(out_dir / "preview.png", strip)
    (out_dir / "preview.json").write_text(
        json.dumps(record.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return {
        "command": "preview",
        "output_dir": str(out_dir),
        "preview": str(out_dir / "preview.png"),
        "seconds": round(time.perf_counter() - started, 3),
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(
            spec_path=args.spec,
            input_dir=args.input,
            output_dir=args.output,
            count=args.count,
            seed=args.seed,
            threads=args.threads,
            spp=args.spp,
            resolution=_parse_res(args.res) if args.res else None,
            preview=args.command == "preview",
        )
        summary = run_preview(cfg) if cfg.preview else run_generate(cfg)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except DocSceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RENDER
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
