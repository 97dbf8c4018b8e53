"""Randomization spec parsing and deterministic scene sampling.

A spec document binds scene parameter paths to uniform ranges (continuous) or
weighted choices (categorical). Unbound parameters take the documented fixed
defaults. Sampling is a pure function of (spec, base document, sample index):
every parameter draws from its own counter-based stream keyed by
(seed, index, path), so samples can be generated in any order, on any number
of threads, with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import imageio, rng as rngmod, scene as sc
from .errors import (
    DuplicatePathError,
    RangeDomainError,
    RangeOrderError,
    SpecError,
    SpecSyntaxError,
    UnknownChoiceError,
    UnknownParameterError,
    WeightError,
)
from .renderer import RenderSettings

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ParamRange:
    """Closed uniform range for a continuous parameter."""

    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise RangeOrderError("range bounds must be finite")
        if self.min > self.max:
            raise RangeOrderError(f"range min {self.min} > max {self.max}")


@dataclass(frozen=True)
class CategoricalDist:
    """Weighted categorical distribution in declaration order."""

    items: tuple  # ((value, weight), ...)

    def __post_init__(self):
        if not self.items:
            raise WeightError("categorical distribution needs at least one item")
        for value, weight in self.items:
            if not (isinstance(weight, (int, float)) and math.isfinite(weight) and weight > 0):
                raise WeightError(f"weight for {value!r} must be a positive number")
        object.__setattr__(self, "items", tuple((str(v), float(w)) for v, w in self.items))

    def values(self):
        return [v for v, _ in self.items]


# --- parameter registry -----------------------------------------------------------
#
# Continuous entries: path -> (default, domain_lo, domain_hi, doc)
# Bounds are inclusive; user ranges must stay inside the domain.

CONTINUOUS_PARAMS = {
    "camera.distance_m": (0.5, 0.05, 10.0, "camera distance from the look-at target"),
    "camera.tilt_rad": (0.0, 0.0, 1.45, "polar angle from straight-down"),
    "camera.azimuth_rad": (0.0, -TWO_PI, TWO_PI, "camera azimuth around the document"),
    "camera.roll_theta": (0.0, -math.pi, math.pi, "sensor roll about the optical axis"),
    "camera.focal_mm": (50.0, 5.0, 300.0, "lens focal length"),
    "camera.f_number": (None, 0.5, 64.0, "aperture f-number; unbound means pinhole"),
    "camera.focus_error_m": (0.0, -0.5, 0.5, "offset added to the exact focus distance"),
    "camera.target_jitter_m": (0.0, 0.0, 0.3, "max look-at offset from the sheet center"),
    "light.intensity_w": (25.0, 0.0, 10000.0, "point light radiant flux"),
    "light.azimuth_rad": (0.7, -TWO_PI, TWO_PI, "key light azimuth"),
    "light.elevation_rad": (0.9, 0.05, 0.5 * math.pi, "key light elevation above the table"),
    "light.distance_m": (0.8, 0.05, 10.0, "key light distance from the sheet center"),
    "light.area_radiance": (8.0, 0.0, 10000.0, "area light radiance (gray)"),
    "light.area_size_m": (0.4, 0.01, 5.0, "area light edge length"),
    "env.radiance": (0.05, 0.0, 100.0, "uniform environment radiance (gray)"),
    "sheet.bend_curvature": (0.0, -30.0, 30.0, "cylindrical bend curvature, 1/m"),
    "sheet.bend_axis_rad": (0.0, -TWO_PI, TWO_PI, "bend direction in the sheet plane"),
    "sheet.fold_dihedral_rad": (0.0, -3.1, 3.1, "fold angle; small values model creases"),
    "sheet.fold_offset": (0.5, 0.05, 0.95, "fold line position across the sheet"),
    "sheet.fold_angle_rad": (0.5 * math.pi, -TWO_PI, TWO_PI, "fold line direction in UV"),
    "sheet.rough_amplitude_m": (0.0, 0.0, 0.02, "surface roughness displacement"),
    "sheet.rough_frequency": (2.0, 0.1, 40.0, "roughness cycles across the sheet width"),
    "noise.sigma": (0.02, 0.0, 0.5, "texture Gaussian noise, used when doc.style=noise"),
    "occluder.size_m": (0.06, 0.005, 0.5, "occluder nominal half size"),
}

CATEGORICAL_PARAMS = {
    "sheet.size": (("auto", "a4", "us-letter"), "auto", "paper size preset"),
    "background.surface": (("white", "wood", "dark", "marble", "green"), "white",
                           "table surface color"),
    "background.extra_sheets": (("0", "1", "2", "3"), "0", "decoy pages under the document"),
    "occluder.count": (("0", "1", "2", "3"), "0", "number of occluding objects"),
    "light.kind": (("point", "area"), "point", "key light type"),
    "doc.style": (("none", "noise", "erode", "dilate"), "none", "texture style noise"),
}

SURFACE_ALBEDOS = {
    "white": (0.85, 0.85, 0.82),
    "wood": (0.42, 0.26, 0.13),
    "dark": (0.08, 0.08, 0.09),
    "marble": (0.75, 0.74, 0.72),
    "green": (0.13, 0.35, 0.16),
}

ROTATION_LABEL_MODES = ("general", "roll")

_TOP_LEVEL_KEYS = {"input_dir", "output_dir", "count", "seed", "render", "params",
                   "rotation_label"}
_RENDER_KEYS = {"width", "height", "spp", "max_depth"}


@dataclass(frozen=True)
class RandomizationSpec:
    """Validated randomization spec plus run defaults."""

    count: int = 1
    seed: int = 0
    width: int = 512
    height: int = 512
    spp: int = 64
    max_depth: int = 4
    input_dir: str | None = None
    output_dir: str | None = None
    rotation_label: str = "general"
    params: dict = field(default_factory=dict)  # path -> ParamRange | CategoricalDist

    def with_overrides(self, **kwargs) -> "RandomizationSpec":
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates)


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that rejects duplicate mapping keys."""


def _strict_mapping(loader, node, deep=False):
    mapping = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in mapping:
            raise DuplicatePathError(
                f"duplicate key {key!r} (line {key_node.start_mark.line + 1})")
        mapping[key] = loader.construct_object(value_node, deep=deep)
    return mapping


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _strict_mapping)


def _require_int(value, what, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"{what} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise SpecError(f"{what} must be >= {minimum}, got {value}")
    return value


def _parse_param(path: str, body) -> object:
    if path in CONTINUOUS_PARAMS:
        if not (isinstance(body, dict) and set(body) == {"min", "max"}):
            raise SpecError(f"{path}: continuous parameters need {{min, max}}")
        try:
            lo, hi = float(body["min"]), float(body["max"])
        except (TypeError, ValueError) as exc:
            raise SpecError(f"{path}: range bounds must be numbers") from exc
        try:
            rng_ = ParamRange(lo, hi)
        except RangeOrderError as exc:
            raise RangeOrderError(f"{path}: {exc}") from None
        _, dom_lo, dom_hi, _ = CONTINUOUS_PARAMS[path]
        if lo < dom_lo or hi > dom_hi:
            raise RangeDomainError(
                f"{path}: range [{lo}, {hi}] outside allowed domain [{dom_lo}, {dom_hi}]")
        return rng_
    if path in CATEGORICAL_PARAMS:
        if not (isinstance(body, dict) and set(body) == {"choices"}
                and isinstance(body["choices"], dict)):
            raise SpecError(f"{path}: categorical parameters need {{choices: {{name: weight}}}}")
        allowed = CATEGORICAL_PARAMS[path][0]
        items = []
        for name, weight in body["choices"].items():
            name = str(name)
            if name not in allowed:
                raise UnknownChoiceError(
                    f"{path}: unknown choice {name!r}; allowed: {', '.join(allowed)}")
            if not (isinstance(weight, (int, float)) and not isinstance(weight, bool)
                    and math.isfinite(weight) and weight > 0):
                raise WeightError(f"{path}: weight for {name!r} must be positive")
            items.append((name, float(weight)))
        return CategoricalDist(tuple(items))
    raise UnknownParameterError(f"unknown parameter path {path!r}")


def parse_spec(text: str) -> RandomizationSpec:
    """Parse and validate a randomization spec document (YAML)."""
    try:
        raw = yaml.load(text, Loader=_StrictLoader)
    except DuplicatePathError:
        raise
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise SpecSyntaxError(f"spec parse error: {exc.problem or exc}", line, column) from None
    except yaml.YAMLError as exc:
        raise SpecSyntaxError(f"spec parse error: {exc}") from None

    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise SpecSyntaxError("spec must be a mapping at the top level")
    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise UnknownParameterError(f"unknown top-level keys: {sorted(unknown)}")

    kwargs = {}
    if "count" in raw:
        kwargs["count"] = _require_int(raw["count"], "count", minimum=0)
    if "seed" in raw:
        kwargs["seed"] = _require_int(raw["seed"], "seed", minimum=0)
    for key in ("input_dir", "output_dir"):
        if key in raw:
            if not isinstance(raw[key], str):
                raise SpecError(f"{key} must be a string")
            kwargs[key] = raw[key]
    if "rotation_label" in raw:
        mode = raw["rotation_label"]
        if mode not in ROTATION_LABEL_MODES:
            raise SpecError(f"rotation_label must be one of {ROTATION_LABEL_MODES}")
        kwargs["rotation_label"] = mode
    if "render" in raw:
        render = raw["render"]
        if not isinstance(render, dict):
            raise SpecError("render must be a mapping")
        unknown = set(render) - _RENDER_KEYS
        if unknown:
            raise UnknownParameterError(f"unknown render keys: {sorted(unknown)}")
        if "width" in render:
            kwargs["width"] = _require_int(render["width"], "render.width", minimum=1)
        if "height" in render:
            kwargs["height"] = _require_int(render["height"], "render.height", minimum=1)
        if "spp" in render:
            kwargs["spp"] = _require_int(render["spp"], "render.spp", minimum=1)
        if "max_depth" in render:
            kwargs["max_depth"] = _require_int(render["max_depth"], "render.max_depth", minimum=1)

    params = {}
    raw_params = raw.get("params", {})
    if raw_params is None:
        raw_params = {}
    if not isinstance(raw_params, dict):
        raise SpecError("params must be a mapping of path -> binding")
    for path, body in raw_params.items():
        path = str(path)
        if path in params:
            raise DuplicatePathError(f"parameter {path!r} bound twice")
        params[path] = _parse_param(path, body)
    kwargs["params"] = params
    return RandomizationSpec(**kwargs)


def load_spec(path) -> RandomizationSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec(fh.read())


# --- elementary draws ----------------------------------------------------------

def sample_continuous(r: ParamRange, gen: np.random.Generator) -> float:
    """Uniform draw on [min, max]; exact at degenerate ranges."""
    if r.min == r.max:
        return r.min
    u = gen.random()
    return r.min + (r.max - r.min) * u


def sample_categorical(d: CategoricalDist, gen: np.random.Generator) -> str:
    """Inverse-CDF draw over normalized weights, left-closed in declaration
    order: item i is selected iff u in [cdf(i-1), cdf(i))."""
    u = gen.random()
    total = sum(w for _, w in d.items)
    acc = 0.0
    for value, weight in d.items:
        acc += weight / total
        if u < acc:
            return value
    return d.items[-1][0]


# --- scene sampling --------------------------------------------------------------

def _resolve_sheet(base_doc: sc.SheetSpec, size_choice: str,
                   style_choice: str, sigma: float, seed: int, index: int) -> sc.SheetSpec:
    width, height = base_doc.width_m, base_doc.height_m
    if size_choice != "auto":
        pw, ph = sc.SHEET_PRESETS[size_choice]
        if isinstance(base_doc.texture, imageio.ImageBuffer) and \
                base_doc.texture.width > base_doc.texture.height:
            pw, ph = ph, pw  # landscape source keeps landscape orientation
        width, height = pw, ph

    texture = base_doc.texture
    if style_choice != "none" and isinstance(texture, imageio.ImageBuffer):
        if style_choice == "noise":
            texture = imageio.gaussian_noise(texture, sigma,
                                             rngmod.stream(seed, index, "style"))
        elif style_choice == "erode":
            texture = imageio.morphology(texture, "erode", 1)
        elif style_choice == "dilate":
            texture = imageio.morphology(texture, "dilate", 1)

    return replace(base_doc, width_m=width, height_m=height, texture=texture)


def sample_scene(spec: RandomizationSpec, base_doc: sc.SheetSpec, index: int) -> sc.SceneInstance:
    """Draw one fully resolved scene. Deterministic in (spec, base_doc, index)."""
    if index < 0 or (spec.count and index >= spec.count):
        raise SpecError(f"sample index {index} outside [0, {spec.count})")

    resolved: dict = {}
    choices: dict = {}

    def draw(path: str) -> float:
        default = CONTINUOUS_PARAMS[path][0]
        binding = spec.params.get(path)
        if binding is None:
            value = default
        else:
            value = sample_continuous(binding, rngmod.stream(spec.seed, index, "param", path))
        if value is not None:
            resolved[path] = float(value)
        return value

    def choose(path: str) -> str:
        binding = spec.params.get(path)
        if binding is None:
            value = CATEGORICAL_PARAMS[path][1]
        else:
            value = sample_categorical(binding, rngmod.stream(spec.seed, index, "param", path))
        choices[path] = value
        return value

    # Sheet and deformation.
    size_choice = choose("sheet.size")
    style_choice = choose("doc.style")
    sigma = draw("noise.sigma")
    sheet = _resolve_sheet(base_doc, size_choice, style_choice, sigma,
                           spec.seed, index)
    deformation = sc.Deformation(ops=(
        sc.Bend(curvature=draw("sheet.bend_curvature"),
                axis_angle=draw("sheet.bend_axis_rad")),
        _make_fold(draw("sheet.fold_offset"), draw("sheet.fold_angle_rad"),
                   draw("sheet.fold_dihedral_rad")),
        sc.Roughness(amplitude_m=draw("sheet.rough_amplitude_m"),
                     frequency=draw("sheet.rough_frequency"),
                     noise_seed=rngmod.derive_seed(spec.seed, index, "rough")),
    ))

    # Background.
    extra_sheets = int(choose("background.extra_sheets"))
    surface_name = choose("background.surface")
    occ_count = int(choose("occluder.count"))
    occ_size = draw("occluder.size_m")
    occluders = []
    half_diag = 0.5 * math.hypot(sheet.width_m, sheet.height_m)
    for i in range(occ_count):
        gen = rngmod.stream(spec.seed, index, "layout", "occluder", i)
        angle = gen.uniform(-math.pi, math.pi)
        radial = gen.uniform(0.35, 0.85) * half_diag
        size = occ_size * gen.uniform(0.6, 1.4)
        kind = "box" if gen.random() < 0.5 else "quad"
        height = gen.uniform(0.005, 0.02)
        hue = gen.uniform(0.05, 0.9, size=3)
        occluders.append(sc.Occluder(
            kind=kind,
            center=(radial * math.cos(angle), radial * math.sin(angle),
                    gen.uniform(0.01, 0.05)),
            half_size=(size, size * gen.uniform(0.5, 1.5), height),
            yaw=gen.uniform(-math.pi, math.pi),
            pitch=gen.uniform(-0.3, 0.3),
            albedo=tuple(hue),
        ))
    background = sc.BackgroundSpec(
        surface=sc.BackgroundSurface(albedo=SURFACE_ALBEDOS[surface_name],
                                     name=surface_name),
        extra_sheets=extra_sheets,
        occluders=tuple(occluders),
    )

    # Camera.
    doc_z = sc.document_base_height(extra_sheets)
    target = np.array([0.0, 0.0, doc_z])
    jitter_mag = draw("camera.target_jitter_m")
    if jitter_mag > 0:
        gen = rngmod.stream(spec.seed, index, "layout", "target")
        jitter_dir = gen.uniform(-math.pi, math.pi)
        jitter_r = jitter_mag * math.sqrt(gen.random())
        target = target + np.array([jitter_r * math.cos(jitter_dir),
                                    jitter_r * math.sin(jitter_dir), 0.0])
    distance = draw("camera.distance_m")
    tilt = draw("camera.tilt_rad")
    azimuth = draw("camera.azimuth_rad")
    position = target + distance * np.array([
        math.sin(tilt) * math.cos(azimuth),
        math.sin(tilt) * math.sin(azimuth),
        math.cos(tilt),
    ])
    f_number = draw("camera.f_number")
    camera = sc.look_at(
        position, target,
        roll_theta=_wrap_angle(draw("camera.roll_theta")),
        resolution=(spec.width, spec.height),
        focal_mm=draw("camera.focal_mm"),
        f_number=f_number,
        focus_distance_m=(distance + draw("camera.focus_error_m")) if f_number else 1.0,
    )

    # Lights.
    lights = []
    kind = choose("light.kind")
    el = draw("light.elevation_rad")
    az = draw("light.azimuth_rad")
    ldist = draw("light.distance_m")
    lpos = target + ldist * np.array([
        math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    if kind == "point":
        lights.append(sc.PointLight(position=tuple(lpos), intensity_w=draw("light.intensity_w")))
    else:
        normal = target - lpos
        normal = normal / np.linalg.norm(normal)
        size = draw("light.area_size_m")
        rad = draw("light.area_radiance")
        lights.append(sc.AreaLight(position=tuple(lpos), normal=tuple(normal),
                                   width_m=size, height_m=size,
                                   radiance=(rad, rad, rad)))
    env = draw("env.radiance")
    if env > 0:
        lights.append(sc.EnvironmentLight(radiance=(env, env, env)))
    if not lights:
        lights.append(sc.EnvironmentLight(radiance=(0.0, 0.0, 0.0)))

    instance = sc.SceneInstance(
        seed=rngmod.derive_seed(spec.seed, index, "scene"),
        sheet=sheet,
        deformation=deformation,
        camera=camera,
        lights=tuple(lights),
        background=background,
        render=RenderSettings(spp=spec.spp, max_depth=spec.max_depth),
        categorical_choices=choices,
        resolved_params=resolved,
    )
    validate_instance(instance, spec)
    return instance


def _make_fold(offset: float, angle: float, dihedral: float) -> sc.Fold:
    direction = (math.cos(angle), math.sin(angle))
    perp = (-direction[1], direction[0])
    point = (0.5 + (offset - 0.5) * perp[0], 0.5 + (offset - 0.5) * perp[1])
    point = (min(max(point[0], 0.0), 1.0), min(max(point[1], 0.0), 1.0))
    return sc.Fold(point=point, direction=direction, dihedral=dihedral)


def _wrap_angle(theta: float) -> float:
    wrapped = math.atan2(math.sin(theta), math.cos(theta))
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


def validate_instance(instance, spec: RandomizationSpec) -> None:
    """Check range/choice membership of every recorded value."""
    for path, value in instance.resolved_params.items():
        binding = spec.params.get(path)
        if isinstance(binding, ParamRange):
            if not (binding.min <= value <= binding.max):
                raise SpecError(f"{path}: sampled {value} outside [{binding.min}, {binding.max}]")
    for path, value in instance.categorical_choices.items():
        binding = spec.params.get(path)
        if isinstance(binding, CategoricalDist):
            if value not in binding.values():
                raise SpecError(f"{path}: choice {value!r} not in distribution")
        else:
            allowed = CATEGORICAL_PARAMS[path][0]
            if value not in allowed:
                raise SpecError(f"{path}: choice {value!r} not allowed")
