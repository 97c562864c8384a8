"""Labeled-dataset construction, stratified splitting, and disk layout.

A full dataset is 19 images per registered party (original + 18 variants),
so a 49-party registry yields 931 items. On disk the layout is
``<out>/<party_id>/<variant_index>.png`` plus ``manifest.jsonl`` with one
(path, label, variant_index) record per line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import VARIANTS_PER_SYMBOL, AugmentationSpec, generate_variations
from .errors import EmptyRegistry, InvalidFraction
from .images import load_image, save_png
from .registry import SymbolRegistry

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class DatasetItem:
    image: np.ndarray  # 180 x 180 uint8
    label: str  # party_id
    variant_index: int  # 0 = original


@dataclass
class LabeledDataset:
    items: list[DatasetItem]

    def __len__(self) -> int:
        return len(self.items)

    def labels(self) -> list[str]:
        return sorted({it.label for it in self.items})

    def by_label(self) -> dict[str, list[DatasetItem]]:
        out: dict[str, list[DatasetItem]] = {}
        for it in self.items:
            out.setdefault(it.label, []).append(it)
        return out

    def digest(self) -> str:
        """Content hash used to stamp models with their training data."""
        h = hashlib.sha256()
        for it in self.items:
            h.update(it.label.encode())
            h.update(it.variant_index.to_bytes(2, "big"))
            h.update(it.image.tobytes())
        return h.hexdigest()


def build_labeled_dataset(registry: SymbolRegistry, spec: AugmentationSpec) -> LabeledDataset:
    """Expand every registered symbol into its 19 labeled variants."""
    if len(registry) == 0:
        raise EmptyRegistry("cannot build a dataset from an empty registry")
    items: list[DatasetItem] = []
    for record in registry:
        for vi, img in enumerate(generate_variations(record.image, spec)):
            items.append(DatasetItem(img, record.party_id, vi))
    assert len(items) == VARIANTS_PER_SYMBOL * len(registry)
    return LabeledDataset(items)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_test_positions(
    labels: list[str], train_fraction: float, shuffle_seed: int
) -> set[int]:
    """Positions (into ``labels``) assigned to the test side.

    Per label, round((1 - train_fraction) * n) positions are picked by a
    seeded shuffle; labels are processed in sorted order so the same seed
    always produces the same partition.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidFraction(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(shuffle_seed)
    grouped: dict[str, list[int]] = {}
    for pos, label in enumerate(labels):
        grouped.setdefault(label, []).append(pos)
    test: set[int] = set()
    for label in sorted(grouped):
        positions = grouped[label]
        n_test = _round_half_up((1.0 - train_fraction) * len(positions))
        order = rng.permutation(len(positions))
        test.update(positions[i] for i in order[:n_test])
    return test


def split_dataset(
    dataset: LabeledDataset, train_fraction: float, shuffle_seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified train/test partition; every item lands on exactly one side."""
    test_pos = stratified_test_positions(
        [it.label for it in dataset.items], train_fraction, shuffle_seed
    )
    train_items = [it for i, it in enumerate(dataset.items) if i not in test_pos]
    test_items = [it for i, it in enumerate(dataset.items) if i in test_pos]
    return LabeledDataset(train_items), LabeledDataset(test_items)


# disk layout ----------------------------------------------------------------


def save_dataset(dataset: LabeledDataset, out_dir: str | Path) -> Path:
    """Write images as ``<out>/<label>/<variant_index>.png`` plus manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for it in dataset.items:
        rel = f"{it.label}/{it.variant_index}.png"
        save_png(it.image, out / rel)
        lines.append(
            json.dumps({"path": rel, "label": it.label, "variant_index": it.variant_index})
        )
    manifest = out / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def save_manifest(dataset_items: list[dict], path: str | Path) -> Path:
    """Write a bare manifest (used by ``split`` to reference existing files)."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(
        "\n".join(json.dumps(rec) for rec in dataset_items) + "\n", encoding="utf-8"
    )
    return p


def load_dataset(manifest_path: str | Path) -> LabeledDataset:
    """Load a dataset from a manifest file (or a directory holding one)."""
    p = Path(manifest_path)
    if p.is_dir():
        p = p / MANIFEST_NAME
    base = p.parent
    items: list[DatasetItem] = []
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        items.append(
            DatasetItem(load_image(base / rec["path"]), rec["label"], int(rec["variant_index"]))
        )
    return LabeledDataset(items)
