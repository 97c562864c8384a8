"""Deterministic synthesis of the 18 distortion/transformation variants.

Every registered symbol expands into 19 images: the original plus 18 fixed
variants covering geometric, photometric, and sensor-noise distortions.
The list is canonical and ordered; stochastic variants (noise, salt-and-
pepper) draw from substreams derived solely from ``noise_seed``, so the
same image and spec always produce byte-identical outputs.

Canonical variant list (index 1..18):

====  ========================================
 1-4  rotation +5, -5, +10, -10 degrees
 5-8  translation +10/-10 px in x, +10/-10 px in y
9-10  uniform scale x0.9, x1.1
  11  horizontal shear 0.1
  12  Gaussian blur sigma 1.0
  13  additive Gaussian noise sigma 10 levels
  14  salt-and-pepper, 2% pixel rate
15-16 brightness +15%, -15%
17-18 contrast x0.8, x1.2
====  ========================================

Exposed regions from geometric transforms are filled white, matching the
white slip background.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidImage
from .images import SYMBOL_SIZE, WHITE, to_uint8

VARIANTS_PER_SYMBOL = 19  # original + 18


@dataclass(frozen=True)
class TransformStep:
    index: int
    kind: str
    params: dict = field(default_factory=dict)


def canonical_transforms() -> tuple[TransformStep, ...]:
    """The fixed, ordered list of 18 transform descriptors."""
    steps = [
        TransformStep(1, "rotate", {"degrees": 5.0}),
        TransformStep(2, "rotate", {"degrees": -5.0}),
        TransformStep(3, "rotate", {"degrees": 10.0}),
        TransformStep(4, "rotate", {"degrees": -10.0}),
        TransformStep(5, "translate", {"dx": 10, "dy": 0}),
        TransformStep(6, "translate", {"dx": -10, "dy": 0}),
        TransformStep(7, "translate", {"dx": 0, "dy": 10}),
        TransformStep(8, "translate", {"dx": 0, "dy": -10}),
        TransformStep(9, "scale", {"factor": 0.9}),
        TransformStep(10, "scale", {"factor": 1.1}),
        TransformStep(11, "shear", {"factor": 0.1}),
        TransformStep(12, "blur", {"sigma": 1.0}),
        TransformStep(13, "gauss_noise", {"sigma": 10.0}),
        TransformStep(14, "salt_pepper", {"rate": 0.02}),
        TransformStep(15, "brightness", {"delta": 0.15}),
        TransformStep(16, "brightness", {"delta": -0.15}),
        TransformStep(17, "contrast", {"factor": 0.8}),
        TransformStep(18, "contrast", {"factor": 1.2}),
    ]
    return tuple(steps)


@dataclass(frozen=True)
class AugmentationSpec:
    """The fixed 18-transform recipe plus the seed driving noise variants."""

    transforms: tuple[TransformStep, ...] = field(default_factory=canonical_transforms)
    noise_seed: int = 0

    def __post_init__(self) -> None:
        if len(self.transforms) != 18:
            raise ValueError(f"spec must hold exactly 18 transforms, got {len(self.transforms)}")
        indices = [t.index for t in self.transforms]
        if indices != sorted(indices) or len(set(indices)) != 18:
            raise ValueError("transform indices must be unique and ordered")


def _rotate(img: np.ndarray, degrees: float) -> np.ndarray:
    return ndimage.rotate(
        img.astype(np.float64), degrees, reshape=False, order=1, mode="constant", cval=WHITE
    )


def _translate(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    return ndimage.shift(
        img.astype(np.float64), (dy, dx), order=1, mode="constant", cval=WHITE
    )


def _scale(img: np.ndarray, factor: float) -> np.ndarray:
    # affine about the image center: input = M @ output + offset
    c = (np.asarray(img.shape, dtype=np.float64) - 1.0) / 2.0
    matrix = np.diag([1.0 / factor, 1.0 / factor])
    offset = c - matrix @ c
    return ndimage.affine_transform(
        img.astype(np.float64), matrix, offset=offset, order=1, mode="constant", cval=WHITE
    )


def _shear(img: np.ndarray, factor: float) -> np.ndarray:
    # horizontal shear about the center row: x_in = x_out - f * (y_out - cy)
    cy = (img.shape[0] - 1.0) / 2.0
    matrix = np.array([[1.0, 0.0], [-factor, 1.0]])
    offset = np.array([0.0, factor * cy])
    return ndimage.affine_transform(
        img.astype(np.float64), matrix, offset=offset, order=1, mode="constant", cval=WHITE
    )


def _apply_step(img: np.ndarray, step: TransformStep, noise_seed: int) -> np.ndarray:
    kind, p = step.kind, step.params
    f = img.astype(np.float64)
    if kind == "rotate":
        out = _rotate(img, p["degrees"])
    elif kind == "translate":
        out = _translate(img, p["dx"], p["dy"])
    elif kind == "scale":
        out = _scale(img, p["factor"])
    elif kind == "shear":
        out = _shear(img, p["factor"])
    elif kind == "blur":
        out = ndimage.gaussian_filter(f, sigma=p["sigma"])
    elif kind == "gauss_noise":
        rng = np.random.default_rng([noise_seed, step.index])
        out = f + rng.normal(0.0, p["sigma"], size=f.shape)
    elif kind == "salt_pepper":
        rng = np.random.default_rng([noise_seed, step.index])
        out = f.copy()
        mask = rng.random(f.shape) < p["rate"]
        salt = rng.random(f.shape) < 0.5
        out[mask & salt] = 255.0
        out[mask & ~salt] = 0.0
    elif kind == "brightness":
        out = f + p["delta"] * 255.0
    elif kind == "contrast":
        out = (f - 128.0) * p["factor"] + 128.0
    else:
        raise ValueError(f"unknown transform kind: {kind}")
    return to_uint8(out)


def generate_variations(image: np.ndarray, spec: AugmentationSpec) -> list[np.ndarray]:
    """Return [original] + the 18 variants, all 180 x 180 uint8.

    Pure function of (image, spec): repeated calls are byte-identical.
    """
    arr = np.asarray(image)
    if arr.shape != (SYMBOL_SIZE, SYMBOL_SIZE):
        raise InvalidImage(f"expected {SYMBOL_SIZE}x{SYMBOL_SIZE} image, got shape {arr.shape}")
    arr = arr.astype(np.uint8)
    out = [arr.copy()]
    for step in spec.transforms:
        out.append(_apply_step(arr, step, spec.noise_seed))
    return out
