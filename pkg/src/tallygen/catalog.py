"""Procedural object-template catalog.

Templates stand in for scanned asset libraries: parametric primitive
families with procedural albedos, three-tier text descriptions, stable
train/val/test splits, and canonical white-background exemplar renders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import meshes
from .config import GeneratorConfig
from .rng import RngStream, stable_hash64

SPLITS = ("train", "val", "test")

# name -> linear RGB
COLORS = {
    "red": (0.75, 0.12, 0.10), "crimson": (0.62, 0.08, 0.18),
    "orange": (0.90, 0.45, 0.08), "amber": (0.88, 0.62, 0.12),
    "yellow": (0.90, 0.82, 0.15), "lime": (0.55, 0.78, 0.14),
    "green": (0.15, 0.55, 0.18), "teal": (0.10, 0.50, 0.48),
    "cyan": (0.12, 0.65, 0.72), "blue": (0.12, 0.28, 0.70),
    "navy": (0.08, 0.12, 0.38), "violet": (0.42, 0.20, 0.62),
    "magenta": (0.72, 0.15, 0.58), "pink": (0.88, 0.48, 0.58),
    "brown": (0.42, 0.26, 0.12), "tan": (0.72, 0.58, 0.38),
    "beige": (0.80, 0.72, 0.58), "grey": (0.48, 0.48, 0.48),
    "white": (0.92, 0.92, 0.92), "black": (0.08, 0.08, 0.08),
    "olive": (0.40, 0.42, 0.14), "coral": (0.90, 0.40, 0.32),
    "turquoise": (0.18, 0.68, 0.60), "lavender": (0.64, 0.56, 0.82),
}

PATTERNS = ("solid", "striped", "checkered", "dotted")

# category -> (shape noun, list of shape variants)
# Each variant: (tag, builder kwargs, clause describing the silhouette).
_BALL = [
    ("round", {"squash": 1.0}, "a perfectly round silhouette"),
    ("soft", {"squash": 0.94}, "a slightly flattened profile"),
    ("squat", {"squash": 0.86}, "a visibly squashed profile"),
    ("tall", {"squash": 1.12}, "a gently elongated profile"),
]
_BLOCK = [
    ("cube", {"wx": 1.0, "wy": 1.0, "wz": 1.0}, "equal square faces"),
    ("brick", {"wx": 1.0, "wy": 0.55, "wz": 0.4}, "a long low body"),
    ("slab", {"wx": 1.0, "wy": 0.85, "wz": 0.28}, "a wide flat body"),
    ("tower", {"wx": 0.45, "wy": 0.45, "wz": 1.0}, "a tall narrow body"),
]
_CAN = [
    ("regular", {"radius": 0.36, "height": 1.0}, "straight vertical sides"),
    ("slim", {"radius": 0.24, "height": 1.0}, "a tall slim body"),
    ("stubby", {"radius": 0.5, "height": 0.62}, "a short wide body"),
    ("barrel", {"radius": 0.44, "height": 0.88}, "a rounded barrel shape"),
]
_PILL = [
    ("classic", {"radius": 0.24, "cyl_height": 0.52}, "rounded ends"),
    ("chunky", {"radius": 0.32, "cyl_height": 0.36}, "a plump rounded body"),
    ("long", {"radius": 0.18, "cyl_height": 0.64}, "a long rounded body"),
    ("bead", {"radius": 0.38, "cyl_height": 0.2}, "an almost spherical body"),
]
_CONE = [
    ("party", {"radius": 0.42, "height": 1.0}, "a sharp point"),
    ("wide", {"radius": 0.55, "height": 0.8}, "a broad base"),
    ("needle", {"radius": 0.3, "height": 1.0}, "a steep narrow taper"),
    ("squat", {"radius": 0.5, "height": 0.55}, "a low squat taper"),
]
_RING = [
    ("donut", {"major": 0.34, "minor": 0.16}, "a thick rim"),
    ("band", {"major": 0.4, "minor": 0.1}, "a slender rim"),
    ("bagel", {"major": 0.3, "minor": 0.2}, "a plump rim"),
    ("hoop", {"major": 0.43, "minor": 0.07}, "a thin hoop profile"),
]
_BOTTLE = [
    ("soda", {"body_radius": 0.3, "body_height": 0.6, "neck_radius": 0.11, "neck_height": 0.28}, "a long narrow neck"),
    ("jar", {"body_radius": 0.4, "body_height": 0.62, "neck_radius": 0.22, "neck_height": 0.14}, "a wide short neck"),
    ("flask", {"body_radius": 0.34, "body_height": 0.45, "neck_radius": 0.09, "neck_height": 0.4}, "a very long thin neck"),
    ("jug", {"body_radius": 0.42, "body_height": 0.7, "neck_radius": 0.16, "neck_height": 0.16}, "a stout rounded body"),
]
_FIGURINE = [
    ("snowman", {}, "two stacked rounded sections"),
    ("pawn", {}, "a cone body with a round head"),
    ("mushroom", {}, "a stem under a wide cap"),
    ("dumbbell", {}, "twin knobs joined by a bar"),
]
_EGG = [
    ("hen", {"squash": 1.32}, "a classic oval profile"),
    ("goose", {"squash": 1.5}, "a strongly elongated oval"),
    ("round", {"squash": 1.18}, "a nearly round oval"),
    ("plump", {"squash": 1.26}, "a plump oval profile"),
]

CATEGORIES: dict[str, tuple[str, list]] = {
    "ball": ("ball", _BALL),
    "block": ("block", _BLOCK),
    "can": ("can", _CAN),
    "pill": ("capsule", _PILL),
    "cone": ("cone", _CONE),
    "ring": ("ring", _RING),
    "bottle": ("bottle", _BOTTLE),
    "figurine": ("figurine", _FIGURINE),
    "egg": ("egg", _EGG),
}


@dataclass(frozen=True)
class DescriptionTriple:
    short: str
    concise: str
    detailed: str

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.short, self.concise, self.detailed)


@dataclass
class AlbedoParams:
    color_name: str
    color: tuple[float, float, float]
    pattern: str
    color2_name: str
    color2: tuple[float, float, float]
    finish: str          # "matte" | "glossy"
    pattern_scale: float


@dataclass
class ObjectTemplate:
    template_id: str
    category: str
    shape_tag: str
    shape_kwargs: dict
    shape_clause: str
    albedo: AlbedoParams
    is_distractor_eligible: bool
    variant_k: int = 0
    split: str = "train"
    _mesh: meshes.TriMesh | None = field(default=None, repr=False, compare=False)

    @property
    def mesh(self) -> meshes.TriMesh:
        if self._mesh is None:
            self._mesh = build_template_mesh(self.category, self.shape_tag, self.shape_kwargs)
        return self._mesh


def _figurine_mesh(tag: str) -> meshes.TriMesh:
    if tag == "snowman":
        parts = [
            meshes.transformed(meshes.uv_sphere(), scale=0.62, offset=(0, 0, 0.31)),
            meshes.transformed(meshes.uv_sphere(), scale=0.44, offset=(0, 0, 0.80)),
            meshes.transformed(meshes.cone(0.4, 1.0), scale=0.24, offset=(0, 0, 1.10)),
        ]
    elif tag == "pawn":
        parts = [
            meshes.transformed(meshes.cone(0.5, 1.0), scale=0.8, offset=(0, 0, 0.4)),
            meshes.transformed(meshes.uv_sphere(), scale=0.34, offset=(0, 0, 0.82)),
        ]
    elif tag == "mushroom":
        parts = [
            meshes.transformed(meshes.cylinder(0.3, 1.0), scale=(0.36, 0.36, 0.6), offset=(0, 0, 0.3)),
            meshes.transformed(meshes.uv_sphere(squash=0.55), scale=0.9, offset=(0, 0, 0.62)),
        ]
    elif tag == "dumbbell":
        parts = [
            meshes.transformed(meshes.uv_sphere(), scale=0.4, offset=(-0.3, 0, 0.2)),
            meshes.transformed(meshes.uv_sphere(), scale=0.4, offset=(0.3, 0, 0.2)),
            meshes.transformed(meshes.cylinder(0.5, 1.0), scale=(0.12, 0.12, 0.62), offset=(0, 0, 0.2)),
        ]
    else:
        raise ValueError(f"unknown figurine {tag!r}")
    return meshes.merge(parts)


def build_template_mesh(category: str, shape_tag: str, kwargs: dict) -> meshes.TriMesh:
    if category == "ball" or category == "egg":
        m = meshes.uv_sphere(**kwargs)
    elif category == "block":
        m = meshes.box(**kwargs)
    elif category == "can":
        m = meshes.cylinder(**kwargs)
    elif category == "pill":
        m = meshes.capsule(**kwargs)
    elif category == "cone":
        m = meshes.cone(**kwargs)
    elif category == "ring":
        m = meshes.torus(**kwargs)
    elif category == "bottle":
        m = meshes.bottle(**kwargs)
    elif category == "figurine":
        m = _figurine_mesh(shape_tag)
    else:
        raise ValueError(f"unknown category {category!r}")
    return meshes.normalize_canonical(m)


def describe(template: ObjectTemplate) -> DescriptionTriple:
    """Three-tier description: short adds nothing, concise one attribute
    clause, detailed at least two."""
    noun = CATEGORIES[template.category][0]
    a = template.albedo
    short = f"{a.color_name} {noun}"

    if a.pattern == "striped":
        pattern_clause = f"{a.color2_name} stripes"
    elif a.pattern == "checkered":
        pattern_clause = f"a {a.color2_name} checkered pattern"
    elif a.pattern == "dotted":
        pattern_clause = f"{a.color2_name} dots"
    else:
        pattern_clause = f"a plain {a.finish} surface"
    concise = f"{a.color_name.capitalize()} {noun} with {pattern_clause}"

    finish_clause = "a soft matte finish" if a.finish == "matte" else "a glossy sheen"
    detailed = (
        f"{a.finish.capitalize()} {a.color_name} {noun} with {pattern_clause}, "
        f"showing {template.shape_clause} and {finish_clause}."
    )

    if template.variant_k > 0:
        suffix = f" variant {template.variant_k + 1}"
        short += suffix
        concise += suffix
        detailed = detailed[:-1] + f",{suffix}."
    return DescriptionTriple(short, concise, detailed)


def assign_split(template_id: str, split_ratios) -> str:
    """Stable hash bucket; depends only on template_id and the ratios."""
    u = stable_hash64("split", template_id) / 2.0 ** 64
    acc = 0.0
    for ratio, label in zip(split_ratios, SPLITS):
        acc += ratio
        if u < acc:
            return label
    return SPLITS[-1]


@dataclass
class AssetCatalog:
    templates: list[ObjectTemplate]
    descriptions: dict[str, DescriptionTriple]

    def __post_init__(self):
        self.by_id = {t.template_id: t for t in self.templates}
        if len(self.by_id) != len(self.templates):
            raise ValueError("duplicate template_id in catalog")

    def split_partition(self, split: str) -> list[ObjectTemplate]:
        return [t for t in self.templates if t.split == split]

    def categories(self) -> set[str]:
        return {t.category for t in self.templates}

    def manifest(self) -> dict:
        entries = []
        for t in self.templates:
            d = self.descriptions[t.template_id]
            entries.append({
                "template_id": t.template_id,
                "category": t.category,
                "shape_tag": t.shape_tag,
                "split": t.split,
                "short": d.short,
                "concise": d.concise,
                "detailed": d.detailed,
                "distractor_eligible": t.is_distractor_eligible,
                "exemplar_path": f"catalog/exemplars/{t.template_id}.png",
            })
        return {"templates": entries}


def build_catalog(config: GeneratorConfig, stream: RngStream) -> AssetCatalog:
    """Build `config.catalog_size` templates cycling through the categories.

    Albedo and shape variants are drawn from the stream; description
    uniqueness per tier is enforced with a deterministic variant suffix.
    """
    size = config.catalog_size
    cat_names = list(CATEGORIES.keys())
    color_names = list(COLORS.keys())
    templates: list[ObjectTemplate] = []
    descriptions: dict[str, DescriptionTriple] = {}
    seen: tuple[set, set, set] = (set(), set(), set())
    combo_seen: set = set()

    for idx in range(size):
        category = cat_names[idx % len(cat_names)]
        noun, variants = CATEGORIES[category]
        # Prefer unseen (shape, color, pattern) combos; retry a few times.
        for _ in range(8):
            tag, kwargs, clause = stream.choice(variants)
            color_name = stream.choice(color_names)
            pattern = stream.choice(PATTERNS)
            color2_name = stream.choice(color_names)
            if color2_name == color_name:
                color2_name = "white" if color_name != "white" else "black"
            combo = (category, tag, color_name, pattern, color2_name)
            if combo not in combo_seen:
                break
        combo_seen.add(combo)
        finish = "matte" if stream.random() < 0.6 else "glossy"
        albedo = AlbedoParams(
            color_name=color_name, color=COLORS[color_name],
            pattern=pattern, color2_name=color2_name, color2=COLORS[color2_name],
            finish=finish, pattern_scale=stream.uniform(0.12, 0.3),
        )
        template = ObjectTemplate(
            template_id=f"{category}-{tag}-{color_name}-{pattern}-{idx:04d}",
            category=category, shape_tag=tag, shape_kwargs=dict(kwargs),
            shape_clause=clause, albedo=albedo,
            is_distractor_eligible=(category != "ring"),
        )
        # Bump the variant discriminator until all three tiers are unique.
        while True:
            triple = describe(template)
            if all(s not in seen[i] for i, s in enumerate(triple.as_tuple())):
                break
            template.variant_k += 1
        for i, s in enumerate(triple.as_tuple()):
            seen[i].add(s)
        template.split = assign_split(template.template_id, config.split_ratios)
        templates.append(template)
        descriptions[template.template_id] = triple

    return AssetCatalog(templates, descriptions)
