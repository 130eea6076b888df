"""Deterministic image-space probe degradations.

Three transforms reproduce the degraded probe conditions: separable
Gaussian blur, bilinear down/up resolution reduction, and a parametric
landmark-driven sunglasses compositor. All pixel math accumulates in
float32 and quantizes once with round-half-to-even, so repeated runs are
byte-identical. For combined conditions the order is fixed: sunglasses
are composited first, then blur or resolution reduction (a subject
wearing sunglasses, then degraded by the imaging chain).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DegradeError

LANDMARK_NAMES = ("left_eye", "right_eye", "nose_tip")
LANDMARKS_CSV_HEADER = (
    "image_id,left_eye_x,left_eye_y,right_eye_x,right_eye_y,nose_x,nose_y"
)

DEGRADE_OPS = (
    "blur",
    "lowres",
    "sunglasses",
    "sunglasses+blur",
    "sunglasses+lowres",
)


@dataclass
class AlignedFace:
    """8-bit RGB face crop with named landmarks in pixel coordinates."""

    pixels: np.ndarray  # (height, width, 3) uint8
    landmarks: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise DegradeError("pixels must be (h, w, 3) uint8")
        if p.shape[0] < 16 or p.shape[1] < 16:
            raise DegradeError("image smaller than 16x16")
        for name, (x, y) in self.landmarks.items():
            if not (0 <= x < p.shape[1] and 0 <= y < p.shape[0]):
                raise DegradeError(f"landmark {name!r} outside image bounds")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BlurSpec:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DegradeError("sigma must be > 0")


@dataclass(frozen=True)
class LowResSpec:
    side: int
    resample: str = "bilinear"

    def __post_init__(self):
        if self.side < 1:
            raise DegradeError("side must be >= 1")
        if self.resample != "bilinear":
            raise DegradeError(f"unsupported resample {self.resample!r}")


@dataclass(frozen=True)
class SunglassesSpec:
    """Lens radius is a fraction of the inter-eye distance."""

    lens_scale: float = 0.62
    opacity: float = 1.0
    color: tuple = (12, 12, 12)
    style_seed: int = 0

    def __post_init__(self):
        if not 0 < self.opacity <= 1:
            raise DegradeError("opacity must be in (0, 1]")
        if not self.lens_scale > 0:
            raise DegradeError("lens_scale must be > 0")


def _quantize(acc: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(acc), 0, 255).astype(np.uint8)


def _gauss_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(xs ** 2) / (2.0 * sigma * sigma))
    return (weights / weights.sum()).astype(np.float32)


def gaussian_blur(face: AlignedFace, spec: BlurSpec) -> AlignedFace:
    """Separable Gaussian blur with clamp-to-edge boundaries."""
    kernel = _gauss_kernel(spec.sigma)
    radius = len(kernel) // 2
    img = face.pixels.astype(np.float32)
    padded = np.pad(img, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    horiz = np.zeros_like(img)
    for k, w in enumerate(kernel):
        horiz += w * padded[:, k : k + face.width]
    padded = np.pad(horiz, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    acc = np.zeros_like(img)
    for k, w in enumerate(kernel):
        acc += w * padded[k : k + face.height]
    return AlignedFace(pixels=_quantize(acc), landmarks=dict(face.landmarks))


def _bilinear_resize(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = pixels.shape[:2]
    src_y = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0, in_h - 1)
    src_x = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0, in_w - 1)
    y0 = np.floor(src_y).astype(np.intp)
    x0 = np.floor(src_x).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (src_y - y0).astype(np.float32)[:, None, None]
    wx = (src_x - x0).astype(np.float32)[None, :, None]
    img = pixels.astype(np.float32)
    top = (1 - wx) * img[y0][:, x0] + wx * img[y0][:, x1]
    bottom = (1 - wx) * img[y1][:, x0] + wx * img[y1][:, x1]
    return _quantize((1 - wy) * top + wy * bottom)


def reduce_resolution(face: AlignedFace, spec: LowResSpec) -> AlignedFace:
    """Downsample to side x side, then back up to the original size, so
    downstream feature extraction sees a constant input size."""
    if spec.side > min(face.width, face.height):
        raise DegradeError(
            f"side {spec.side} larger than image "
            f"{face.width}x{face.height}"
        )
    small = _bilinear_resize(face.pixels, spec.side, spec.side)
    restored = _bilinear_resize(small, face.height, face.width)
    return AlignedFace(pixels=restored, landmarks=dict(face.landmarks))


def _styled(spec: SunglassesSpec):
    rng = np.random.default_rng(spec.style_seed)
    lens_scale = spec.lens_scale * (1.0 + rng.uniform(-0.10, 0.10))
    color = np.clip(
        np.asarray(spec.color, dtype=np.int64) + rng.integers(-8, 9, size=3),
        0,
        255,
    ).astype(np.float32)
    return lens_scale, color


def sunglasses_mask(face: AlignedFace, spec: SunglassesSpec) -> np.ndarray:
    """Boolean mask of the sunglasses region (lenses, bridge, temples)."""
    try:
        lx, ly = face.landmarks["left_eye"]
        rx, ry = face.landmarks["right_eye"]
    except KeyError:
        raise DegradeError("missing eye landmarks") from None
    dist = float(np.hypot(rx - lx, ry - ly))
    if dist == 0:
        raise DegradeError("left and right eye landmarks coincide")
    lens_scale, _ = _styled(spec)
    a = lens_scale * dist  # semi-axis along the eye line
    b = 0.75 * a

    theta = np.arctan2(ry - ly, rx - lx)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    mx, my = (lx + rx) / 2.0, (ly + ry) / 2.0
    ys, xs = np.mgrid[0 : face.height, 0 : face.width]
    du, dv = xs - mx, ys - my
    u = du * cos_t + dv * sin_t
    v = -du * sin_t + dv * cos_t

    half = dist / 2.0
    left_lens = ((u + half) / a) ** 2 + (v / b) ** 2 <= 1.0
    right_lens = ((u - half) / a) ** 2 + (v / b) ** 2 <= 1.0
    bridge = (np.abs(u) <= half) & (np.abs(v) <= 0.18 * b)
    temples = (np.abs(u) >= half) & (np.abs(v) <= 0.10 * b)
    return left_lens | right_lens | bridge | temples


def add_sunglasses(face: AlignedFace, spec: SunglassesSpec) -> AlignedFace:
    """Composite synthetic sunglasses over the eye landmarks.

    Pixels outside the mask are bit-identical to the input. style_seed
    deterministically perturbs the lens size (+-10%) and color (+-8
    levels) so corpora get varied styles.
    """
    mask = sunglasses_mask(face, spec)
    _, color = _styled(spec)
    out = face.pixels.copy()
    alpha = np.float32(spec.opacity)
    blended = (1 - alpha) * face.pixels[mask].astype(np.float32) + alpha * color
    out[mask] = _quantize(blended)
    return AlignedFace(pixels=out, landmarks=dict(face.landmarks))


def apply_op(
    face: AlignedFace,
    op: str,
    blur: BlurSpec | None = None,
    lowres: LowResSpec | None = None,
    sunglasses: SunglassesSpec | None = None,
) -> AlignedFace:
    """Apply a named degradation op (sunglasses composited before blur or
    resolution reduction for the combined ops)."""
    if op not in DEGRADE_OPS:
        raise DegradeError(f"unknown op {op!r}")
    steps = op.split("+")
    out = face
    for step in steps:
        if step == "sunglasses":
            if sunglasses is None:
                raise DegradeError("op needs a SunglassesSpec")
            out = add_sunglasses(out, sunglasses)
        elif step == "blur":
            if blur is None:
                raise DegradeError("op needs a BlurSpec")
            out = gaussian_blur(out, blur)
        elif step == "lowres":
            if lowres is None:
                raise DegradeError("op needs a LowResSpec")
            out = reduce_resolution(out, lowres)
    return out


def read_image(path, landmarks: dict | None = None) -> AlignedFace:
    with Image.open(path) as img:
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return AlignedFace(pixels=pixels, landmarks=dict(landmarks or {}))


def write_image(face: AlignedFace, path) -> None:
    Image.fromarray(face.pixels, mode="RGB").save(path, format="PNG")


def load_landmarks(path) -> dict:
    """Landmark sidecar CSV -> {image_id: {landmark: (x, y)}}."""
    expected = LANDMARKS_CSV_HEADER.split(",")
    table = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise DegradeError(f"{path}: bad landmarks header")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise DegradeError(f"{path} line {line}: bad field count")
            try:
                coords = [float(v) for v in row[1:]]
            except ValueError:
                raise DegradeError(
                    f"{path} line {line}: non-numeric coordinate"
                ) from None
            table[row[0]] = {
                "left_eye": (coords[0], coords[1]),
                "right_eye": (coords[2], coords[3]),
                "nose_tip": (coords[4], coords[5]),
            }
    return table
