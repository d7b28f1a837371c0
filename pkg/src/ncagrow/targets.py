"""Target images: procedural glyphs (heart, gecko, square), PNG loading,
and genome -> target family mappings."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

RGB = tuple[float, float, float]

RED: RGB = (1.0, 0.0, 0.0)
GREEN: RGB = (0.0, 1.0, 0.0)
BLUE: RGB = (0.0, 0.0, 1.0)

# leg order used throughout: (front-left, front-right, back-left, back-right)
LEG_NAMES = ("front-left", "front-right", "back-left", "back-right")


@dataclass
class TargetImage:
    """Premultiplied-alpha RGBA raster in [0,1], sized to the training grid."""

    id: str
    rgba: np.ndarray  # (H, W, 4) float32

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @property
    def width(self) -> int:
        return self.rgba.shape[1]


def _shape_coords(height: int, width: int, box: int, size_scale: float, rotation: float):
    """Pixel-center coordinates in the glyph frame (x right, y up, unit box).

    Rotation by an exact multiple of 90 degrees uses exact trig values so a
    rotated raster is a pixel-exact rotation of the unrotated one.
    """
    ii, jj = np.mgrid[0:height, 0:width]
    x = (jj + 0.5 - width / 2.0) * (2.0 / box)
    y = (height / 2.0 - ii - 0.5) * (2.0 / box)
    deg = rotation % 360.0
    if deg in (0.0, 90.0, 180.0, 270.0):
        cos_t, sin_t = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0),
                        180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}[deg]
    else:
        cos_t, sin_t = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    xs = (x * cos_t + y * sin_t) / size_scale
    ys = (-x * sin_t + y * cos_t) / size_scale
    return xs, ys


def _heart_mask(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    u = x * 1.20
    v = (y + 0.12) * 1.20
    return (u ** 2 + v ** 2 - 1.0) ** 3 - u ** 2 * v ** 3 <= 0.0


def _capsule(x, y, p0, p1, r):
    px, py = p1[0] - p0[0], p1[1] - p0[1]
    t = np.clip(((x - p0[0]) * px + (y - p0[1]) * py) / (px * px + py * py), 0.0, 1.0)
    dx = x - (p0[0] + t * px)
    dy = y - (p0[1] + t * py)
    return dx * dx + dy * dy <= r * r


_LEG_FRONT = (0.12, 0.28)
_LEG_BACK = (-0.44, -0.28)
_LEG_LEFT = (-0.64, -0.20)
_LEG_RIGHT = (0.20, 0.64)
_LEG_RECTS = ((_LEG_LEFT, _LEG_FRONT), (_LEG_RIGHT, _LEG_FRONT),
              (_LEG_LEFT, _LEG_BACK), (_LEG_RIGHT, _LEG_BACK))


def _gecko_mask(x: np.ndarray, y: np.ndarray, legs: Sequence[bool]) -> np.ndarray:
    body = (x / 0.26) ** 2 + ((y + 0.10) / 0.44) ** 2 <= 1.0
    head = x ** 2 + (y - 0.58) ** 2 <= 0.20 ** 2
    tail = (_capsule(x, y, (0.02, -0.50), (0.30, -0.80), 0.07)
            | _capsule(x, y, (0.30, -0.80), (0.55, -0.62), 0.045))
    mask = body | head | tail
    for on, (xr, yr) in zip(legs, _LEG_RECTS):
        if on:
            mask |= (x >= xr[0]) & (x <= xr[1]) & (y >= yr[0]) & (y <= yr[1])
    return mask


def _square_mask(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (np.abs(x) <= 0.72) & (np.abs(y) <= 0.72)


def glyph(
    kind: str,
    color: RGB = RED,
    size_scale: float = 1.0,
    rotation: float = 0.0,
    legs: Sequence[bool] = (True, True, True, True),
    height: int = 40,
    width: int = 40,
    box: int | None = None,
    id: str | None = None,
) -> TargetImage:
    """Deterministic procedural raster of a heart, gecko or square.

    `box` is the glyph's bounding extent in cells (defaults to 70% of the
    short grid side); `size_scale` shrinks the glyph inside that box and
    `rotation` spins it counterclockwise in degrees. `legs` gates the four
    gecko leg rectangles, giving the 16-variant leg family.
    """
    if not 0.0 < size_scale <= 1.0:
        raise ValueError(f"size_scale must lie in (0, 1], got {size_scale}")
    if box is None:
        box = int(round(0.7 * min(height, width)))
    x, y = _shape_coords(height, width, box, size_scale, rotation)
    if kind == "heart":
        mask = _heart_mask(x, y)
    elif kind == "gecko":
        mask = _gecko_mask(x, y, legs)
    elif kind == "square":
        mask = _square_mask(x, y)
    else:
        raise ValueError(f"unknown glyph kind {kind!r}")
    alpha = mask.astype(np.float32)
    rgba = np.empty((height, width, 4), dtype=np.float32)
    for c in range(3):
        rgba[..., c] = alpha * np.float32(color[c])
    rgba[..., 3] = alpha
    if id is None:
        id = f"{kind}-s{size_scale:g}-r{rotation:g}"
        if kind == "gecko":
            id += "-l" + "".join(str(int(bool(b))) for b in legs)
    return TargetImage(id=id, rgba=rgba)


def load_image(path, height: int, width: int, id: str | None = None) -> TargetImage:
    """Load an 8-bit RGBA raster, premultiply alpha, and center it on a
    transparent canvas of the configured grid size."""
    from PIL import Image

    try:
        img = Image.open(path).convert("RGBA")
    except OSError as exc:
        raise ValueError(f"cannot read target image {path}: {exc}") from exc
    if img.height > height or img.width > width:
        raise ValueError(
            f"target image {img.width}x{img.height} larger than grid {width}x{height}"
        )
    raw = np.asarray(img, dtype=np.float32) / 255.0
    raw[..., :3] *= raw[..., 3:4]
    rgba = np.zeros((height, width, 4), dtype=np.float32)
    r0 = (height - img.height) // 2
    c0 = (width - img.width) // 2
    rgba[r0:r0 + img.height, c0:c0 + img.width] = raw
    return TargetImage(id=id or str(path), rgba=rgba)


@dataclass
class TargetFamily:
    """Total mapping from genomes to target images.

    Lookup of a genome outside the trained domain returns None (an
    out-of-training probe, still legal to grow) rather than raising.
    """

    genome_len: int
    targets: dict[str, TargetImage]
    genome_to_id: dict[tuple[int, ...], str]
    description: str = ""

    def __post_init__(self):
        for key, tid in self.genome_to_id.items():
            if len(key) != self.genome_len:
                raise ValueError(f"genome {key} does not have length {self.genome_len}")
            if tid not in self.targets:
                raise ValueError(f"genome {key} maps to unknown target {tid!r}")

    @property
    def domain(self) -> list[tuple[int, ...]]:
        return list(self.genome_to_id.keys())

    def lookup(self, genome: Sequence[float]) -> str | None:
        bits = tuple(float(b) for b in genome)
        if len(bits) != self.genome_len:
            raise ValueError(f"genome length {len(bits)} != family genome_len {self.genome_len}")
        if any(b not in (0.0, 1.0) for b in bits):
            return None
        return self.genome_to_id.get(tuple(int(b) for b in bits))

    def target_for(self, genome: Sequence[float]) -> TargetImage | None:
        tid = self.lookup(genome)
        return self.targets[tid] if tid is not None else None

    def sample_genome(self, rng: np.random.Generator) -> np.ndarray:
        domain = self.domain
        pick = domain[int(rng.integers(len(domain)))]
        return np.asarray(pick, dtype=np.float64)

    def grid_shape(self) -> tuple[int, int]:
        first = next(iter(self.targets.values()))
        return first.height, first.width


def single_target_family(target: TargetImage, description: str = "") -> TargetFamily:
    return TargetFamily(genome_len=0, targets={target.id: target},
                        genome_to_id={(): target.id},
                        description=description or f"single target {target.id}")


_TABLE1_COLORS = (("red", RED), ("green", GREEN), ("blue", BLUE))


def family_from_table(
    table: str | Mapping[tuple[int, ...], TargetImage],
    height: int = 40,
    width: int = 40,
    box: int | None = None,
) -> TargetFamily:
    """Build the two genome schemes used in the experiments.

    "six-organisms": c4 selects the shape (0 gecko, 1 heart) and c5..c7 carry
    a one-hot color (red, green, blue) -> 6 valid genomes, e.g. (0,0,1,0) is
    the green gecko and (1,1,0,0) the red heart.

    "gecko-legs": c4..c7 each gate one leg of a green gecko -> 16 genomes,
    (1,1,1,1) encoding all four legs.

    A mapping of genome tuples to TargetImages defines a custom family.
    """
    if isinstance(table, Mapping):
        targets: dict[str, TargetImage] = {}
        genome_to_id: dict[tuple[int, ...], str] = {}
        length = None
        for key, image in table.items():
            bits = tuple(int(b) for b in key)
            if length is None:
                length = len(bits)
            targets.setdefault(image.id, image)
            genome_to_id[bits] = image.id
        return TargetFamily(genome_len=length or 0, targets=targets,
                            genome_to_id=genome_to_id, description="custom table")

    if table == "six-organisms":
        targets = {}
        genome_to_id = {}
        for ci, (cname, rgb) in enumerate(_TABLE1_COLORS):
            color_bits = tuple(1 if k == ci else 0 for k in range(3))
            for shape_bit, kind in ((0, "gecko"), (1, "heart")):
                tid = f"{cname}-{kind}"
                targets[tid] = glyph(kind, rgb, height=height, width=width, box=box, id=tid)
                genome_to_id[(shape_bit,) + color_bits] = tid
        return TargetFamily(genome_len=4, targets=targets, genome_to_id=genome_to_id,
                            description="six organisms: shape bit + one-hot color")

    if table == "gecko-legs":
        targets = {}
        genome_to_id = {}
        for code in range(16):
            legs = tuple((code >> k) & 1 for k in range(4))
            tid = "gecko-legs-" + "".join(map(str, legs))
            targets[tid] = glyph("gecko", GREEN, legs=[bool(b) for b in legs],
                                 height=height, width=width, box=box, id=tid)
            genome_to_id[legs] = tid
        return TargetFamily(genome_len=4, targets=targets, genome_to_id=genome_to_id,
                            description="16 green geckos, one bit per leg")

    raise ValueError(f"unknown table {table!r}")


def save_target_png(target: TargetImage, path) -> None:
    from PIL import Image

    Image.fromarray(np.round(np.clip(target.rgba, 0, 1) * 255).astype(np.uint8), "RGBA").save(path)
