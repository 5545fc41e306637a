"""Dataset manifests: JSON Lines, one record per line.

Record schema: {"id": str, "hr": path, "mask": path|null, "split": "train"|"test"}.
Relative paths resolve against the manifest's directory.  Records without a
mask get an all-ones mask at load time (the whole image counts as ROI).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

VALID_SPLITS = ("train", "test")


class ManifestError(Exception):
    pass


@dataclass(frozen=True)
class SampleRecord:
    id: str
    hr_path: Path
    mask_path: Path | None
    split: str


@dataclass(frozen=True)
class DatasetIndex:
    records: tuple[SampleRecord, ...]
    scale: int
    patch_size: int
    manifest_path: Path | None = None
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {r.id: r for r in self.records})

    def __len__(self) -> int:
        return len(self.records)

    def split(self, name: str) -> tuple[SampleRecord, ...]:
        return tuple(r for r in self.records if r.split == name)

    def get(self, record_id: str) -> SampleRecord:
        return self._by_id[record_id]


def load_manifest(path, scale: int = 4, patch_size: int = 64) -> DatasetIndex:
    """Parse and validate a JSON Lines manifest into a DatasetIndex.

    Every referenced file must exist; a missing file raises a ManifestError
    naming the offending record, a malformed line raises one naming the line
    number.  An empty manifest yields a valid empty index.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not readable: {path}")
    base = path.parent
    records = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}: line {lineno} is not an object")
            try:
                rec_id = str(obj["id"])
                hr = obj["hr"]
                split = obj["split"]
            except KeyError as exc:
                raise ManifestError(f"{path}: line {lineno} missing key {exc}") from exc
            if split not in VALID_SPLITS:
                raise ManifestError(
                    f"{path}: line {lineno}: split {split!r} not in {VALID_SPLITS}"
                )
            if rec_id in seen_ids:
                raise ManifestError(f"{path}: duplicate record id {rec_id!r} on line {lineno}")
            seen_ids.add(rec_id)
            hr_path = (base / hr).resolve() if not Path(hr).is_absolute() else Path(hr)
            if not hr_path.is_file():
                raise ManifestError(f"record {rec_id!r}: missing HR image {hr_path}")
            mask = obj.get("mask")
            mask_path = None
            if mask is not None:
                mask_path = (base / mask).resolve() if not Path(mask).is_absolute() else Path(mask)
                if not mask_path.is_file():
                    raise ManifestError(f"record {rec_id!r}: missing mask file {mask_path}")
            records.append(SampleRecord(rec_id, hr_path, mask_path, split))
    return DatasetIndex(tuple(records), scale=scale, patch_size=patch_size, manifest_path=path)


def write_manifest(records, path) -> None:
    """Write records (dicts or SampleRecords) as JSON Lines."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if isinstance(rec, SampleRecord):
                rec = {
                    "id": rec.id,
                    "hr": str(rec.hr_path),
                    "mask": None if rec.mask_path is None else str(rec.mask_path),
                    "split": rec.split,
                }
            fh.write(json.dumps(rec) + "\n")
