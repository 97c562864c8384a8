"""Greyscale raster primitives: decoding, letterboxing, saving.

Images are plain 2-D ``uint8`` numpy arrays everywhere in this package.
The canonical symbol/slip size is 180 x 180; anything else is letterboxed
onto a white canvas with the aspect ratio preserved.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InvalidImage

SYMBOL_SIZE = 180
WHITE = 255

ACCEPTED_SUFFIXES = {".png", ".jpg", ".jpeg"}


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPG/JPEG file into a 2-D uint8 greyscale array."""
    p = Path(path)
    if not p.is_file():
        raise InvalidImage(f"no such image file: {p}")
    try:
        with Image.open(p) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise InvalidImage(f"cannot decode {p}: {exc}") from exc


def decode_image(data: bytes) -> np.ndarray:
    """Decode raw PNG/JPG/JPEG bytes into a 2-D uint8 greyscale array."""
    if not data:
        raise InvalidImage("empty image payload")
    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise InvalidImage(f"cannot decode image bytes: {exc}") from exc


def save_png(image: np.ndarray, path: str | Path) -> None:
    """Write a 2-D uint8 array as an 8-bit greyscale PNG."""
    arr = as_grey_array(image)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def as_grey_array(image: np.ndarray) -> np.ndarray:
    """Validate and coerce an array into 2-D uint8 greyscale."""
    arr = np.asarray(image)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidImage(f"expected a non-empty 2-D greyscale array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr.astype(np.float64)), 0, 255).astype(np.uint8)
    return arr


def letterbox(image: np.ndarray, size: int = SYMBOL_SIZE) -> np.ndarray:
    """Fit an image onto a white ``size x size`` canvas, preserving aspect.

    Already-conformant images pass through untouched, which makes the
    normalization idempotent byte-for-byte.
    """
    arr = as_grey_array(image)
    h, w = arr.shape
    if h == size and w == size:
        return arr
    scale = min(size / w, size / h)
    new_w = max(1, round(w * scale))
    new_h = max(1, round(h * scale))
    resized = Image.fromarray(arr, mode="L").resize((new_w, new_h), Image.Resampling.LANCZOS)
    canvas = np.full((size, size), WHITE, dtype=np.uint8)
    top = (size - new_h) // 2
    left = (size - new_w) // 2
    canvas[top : top + new_h, left : left + new_w] = np.asarray(resized, dtype=np.uint8)
    return canvas


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Clip a float array to [0, 255] and round to uint8."""
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)
