"""Party-symbol registry: registration, persistence, confusable-pair scan.

The registry is the single source of truth for which parties exist and
what their canonical 180 x 180 greyscale symbol looks like. Party ids are
zero-padded insertion indices, so rebuilding a registry from the same
inputs in the same order reproduces identical ids and therefore identical
datasets.

On disk a registry is a directory of PNG files plus ``manifest.jsonl``
(one JSON record per line: party_id, party_name, image_path), which keeps
the whole thing auditable with standard tools.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicateParty, EmptyRegistry, InvalidImage
from .features import cosine, preprocess
from .images import ACCEPTED_SUFFIXES, letterbox, load_image, save_png

MANIFEST_NAME = "manifest.jsonl"


def _party_id(index: int) -> str:
    return f"{index:03d}"


@dataclass(frozen=True)
class SymbolRecord:
    party_id: str
    party_name: str
    image: np.ndarray  # 180 x 180 uint8


class SymbolRegistry:
    """Ordered collection of registered parties and their symbols."""

    def __init__(self) -> None:
        self._records: list[SymbolRecord] = []
        self._by_name: dict[str, SymbolRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    @property
    def records(self) -> list[SymbolRecord]:
        return list(self._records)

    def party_ids(self) -> list[str]:
        return [r.party_id for r in self._records]

    def get(self, party_id: str) -> SymbolRecord:
        for r in self._records:
            if r.party_id == party_id:
                return r
        raise KeyError(party_id)

    def register_symbol(self, party_name: str, image: np.ndarray) -> SymbolRecord:
        """Store a party symbol, normalised to 180 x 180 on white.

        Raises DuplicateParty if the name is taken and InvalidImage if the
        raster is empty or undecodable. Normalisation is idempotent: a
        180 x 180 input is stored byte-for-byte.
        """
        if not party_name or not party_name.strip():
            raise InvalidImage("party_name must be non-empty")
        if party_name in self._by_name:
            raise DuplicateParty(f"party already registered: {party_name!r}")
        normalized = letterbox(image)
        record = SymbolRecord(_party_id(len(self._records)), party_name, normalized)
        self._records.append(record)
        self._by_name[party_name] = record
        return record

    def find_similar_symbols(
        self, similarity_threshold: float
    ) -> list[tuple[str, str, float]]:
        """All unordered pairs whose feature similarity reaches the threshold.

        Similarity is cosine on preprocessed features rescaled to [0, 1]
        via (s + 1) / 2; identical symbols score 1.0. Pairs are returned
        once, sorted descending by similarity (ties by id pair).
        """
        if not self._records:
            raise EmptyRegistry("registry holds no symbols")
        if not 0.0 <= similarity_threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {similarity_threshold}")
        feats = [preprocess(r.image) for r in self._records]
        pairs: list[tuple[str, str, float]] = []
        for i in range(len(self._records)):
            for j in range(i + 1, len(self._records)):
                s = (cosine(feats[i], feats[j]) + 1.0) / 2.0
                if s >= similarity_threshold:
                    pairs.append((self._records[i].party_id, self._records[j].party_id, s))
        pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
        return pairs

    # persistence -----------------------------------------------------------

    def save(self, directory: str | Path) -> Path:
        """Write symbol PNGs plus manifest.jsonl; returns the manifest path."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        lines = []
        for r in self._records:
            image_name = f"{r.party_id}.png"
            save_png(r.image, d / image_name)
            lines.append(
                json.dumps(
                    {"party_id": r.party_id, "party_name": r.party_name, "image_path": image_name},
                    ensure_ascii=False,
                )
            )
        manifest = d / MANIFEST_NAME
        manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return manifest

    @classmethod
    def load(cls, directory: str | Path) -> "SymbolRegistry":
        """Load a registry from a directory.

        With a ``manifest.jsonl`` present the manifest order wins;
        otherwise every image file in the directory is registered in
        sorted-filename order with the file stem as the party name.
        """
        d = Path(directory)
        reg = cls()
        manifest = d / MANIFEST_NAME
        if manifest.is_file():
            for line in manifest.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                image = load_image(d / rec["image_path"])
                reg.register_symbol(rec["party_name"], image)
            return reg
        files = sorted(
            p for p in d.iterdir() if p.suffix.lower() in ACCEPTED_SUFFIXES
        ) if d.is_dir() else []
        if not files:
            raise EmptyRegistry(f"no symbol images found under {d}")
        for p in files:
            reg.register_symbol(p.stem, load_image(p))
        return reg
