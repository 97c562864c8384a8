"""Procedurally drawn stand-in party symbols.

Real symbol curation is out of scope, so the repo ships a deterministic
generator for visually distinct 180 x 180 greyscale glyphs. Each symbol
combines a central primary shape (7 kinds), a large secondary motif on an
anchor ring (7 kinds x 7 positions, unique pair per class), and two small
flourish marks. A rejection loop regenerates a class (deterministically)
until its feature vector is well separated from every class accepted
before it, so the fixture set stays easy to tell apart even after the 18
distortions.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .features import preprocess
from .images import SYMBOL_SIZE, WHITE
from .registry import SymbolRegistry

DEFAULT_FIXTURE_COUNT = 49
_KINDS = 7
_CENTER = (SYMBOL_SIZE - 1) / 2.0 + 0.5  # 90.0
_MAX_PAIR_COSINE = 0.60
_MAX_ATTEMPTS = 40


def _regular_polygon(cx: float, cy: float, r: float, n: int, phase: float) -> list[tuple[float, float]]:
    angles = phase + np.arange(n) * (2 * np.pi / n)
    return [(cx + r * np.sin(a), cy - r * np.cos(a)) for a in angles]


def _star(cx: float, cy: float, r_out: float, r_in: float, n: int = 5) -> list[tuple[float, float]]:
    pts = []
    for k in range(2 * n):
        r = r_out if k % 2 == 0 else r_in
        a = k * np.pi / n
        pts.append((cx + r * np.sin(a), cy - r * np.cos(a)))
    return pts


def _draw_shape(draw: ImageDraw.ImageDraw, kind: int, x: float, y: float, r: float, ink: int) -> None:
    """Shape palette: disc, square frame, triangle, ring, plus, star, diamond."""
    if kind == 0:
        draw.ellipse([x - r, y - r, x + r, y + r], fill=ink)
    elif kind == 1:
        s = r * 0.95
        draw.rectangle([x - s, y - s, x + s, y + s], fill=ink)
        hole = max(s - max(10.0, r * 0.35), 2.0)
        draw.rectangle([x - hole, y - hole, x + hole, y + hole], fill=WHITE)
    elif kind == 2:
        draw.polygon(_regular_polygon(x, y, r, 3, np.pi), fill=ink)
    elif kind == 3:
        draw.ellipse([x - r, y - r, x + r, y + r], fill=ink)
        hole = r * 0.55
        draw.ellipse([x - hole, y - hole, x + hole, y + hole], fill=WHITE)
    elif kind == 4:
        arm = r * 0.38
        draw.rectangle([x - r, y - arm, x + r, y + arm], fill=ink)
        draw.rectangle([x - arm, y - r, x + arm, y + r], fill=ink)
    elif kind == 5:
        draw.polygon(_star(x, y, r, r * 0.45), fill=ink)
    else:
        draw.polygon(_regular_polygon(x, y, r, 4, 0.0), fill=ink)


def _attempt_symbol(index: int, seed: int, attempt: int) -> np.ndarray:
    rng = np.random.default_rng([seed, index, attempt])
    primary = index % _KINDS
    motif = (index // _KINDS) % _KINDS
    img = Image.new("L", (SYMBOL_SIZE, SYMBOL_SIZE), WHITE)
    draw = ImageDraw.Draw(img)
    primary_ink = int(rng.integers(0, 40))
    motif_ink = int(rng.integers(0, 60))
    motif_angle = motif * 2 * np.pi / _KINDS + rng.uniform(-0.15, 0.15)
    mx = _CENTER + 56 * np.sin(motif_angle)
    my = _CENTER - 56 * np.cos(motif_angle)
    _draw_shape(draw, primary, _CENTER, _CENTER, 40.0, primary_ink)
    _draw_shape(draw, motif, mx, my, 32.0, motif_ink)
    for _ in range(2):
        angle = rng.uniform(0, 2 * np.pi)
        for _retry in range(8):
            if abs((angle - motif_angle + np.pi) % (2 * np.pi) - np.pi) > 0.9:
                break
            angle = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(48, 68)
        fx = float(np.clip(_CENTER + dist * np.sin(angle), 22, SYMBOL_SIZE - 22))
        fy = float(np.clip(_CENTER - dist * np.cos(angle), 22, SYMBOL_SIZE - 22))
        _draw_shape(draw, int(rng.integers(0, 3)), fx, fy, float(rng.uniform(12, 18)),
                    int(rng.integers(30, 90)))
    return np.asarray(img, dtype=np.uint8)


def synthetic_symbols(count: int = DEFAULT_FIXTURE_COUNT, seed: int = 7) -> list[np.ndarray]:
    """The fixture glyph set, pairwise-separated in feature space."""
    images: list[np.ndarray] = []
    feats: list[np.ndarray] = []
    for i in range(count):
        best_img, best_cos = None, 2.0
        for attempt in range(_MAX_ATTEMPTS):
            img = _attempt_symbol(i, seed, attempt)
            f = preprocess(img)
            closest = max((float(np.dot(f, g)) for g in feats), default=-1.0)
            if closest < best_cos:
                best_cos, best_img = closest, img
            if closest <= _MAX_PAIR_COSINE:
                break
        images.append(best_img)
        feats.append(preprocess(best_img))
    return images


def make_symbol(index: int, seed: int = 7) -> np.ndarray:
    """Draw fixture symbol ``index`` (deterministic for a given seed).

    Note the rejection loop conditions each symbol on the ones before it,
    so this regenerates symbols 0..index.
    """
    return synthetic_symbols(index + 1, seed)[index]


def fixture_registry(count: int = DEFAULT_FIXTURE_COUNT, seed: int = 7) -> SymbolRegistry:
    """Registry of ``count`` synthetic parties with generated symbols."""
    reg = SymbolRegistry()
    for i, image in enumerate(synthetic_symbols(count, seed)):
        reg.register_symbol(f"fixture-party-{i:02d}", image)
    return reg


def write_fixture_registry(
    directory: str | Path, count: int = DEFAULT_FIXTURE_COUNT, seed: int = 7
) -> Path:
    """Materialise the fixture registry (PNGs + manifest) on disk."""
    return fixture_registry(count, seed).save(directory)
