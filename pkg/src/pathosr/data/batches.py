"""Deterministic mini-batch sampling with lazy LR synthesis.

Batch composition is a pure function of (seed, iteration): epoch e uses the
permutation seeded by (seed, e), batches within the epoch are consecutive
slices and the last one may be short.  Purity makes checkpoint resume exact
without serializing sampler state.

LR images are synthesized on first use and cached in memory (bounded LRU);
setting PATHOSR_CACHE_DIR additionally caches them on disk.
"""

from __future__ import annotations

import hashlib
import math
import os
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .degrade import synthesize_lr
from .images import load_image, load_mask
from .manifest import DatasetIndex, SampleRecord

CACHE_ENV_VAR = "PATHOSR_CACHE_DIR"


@dataclass
class SamplePair:
    id: str
    hr: np.ndarray
    lr: np.ndarray
    mask: np.ndarray
    split: str


def epoch_permutation(n_records: int, seed: int, epoch: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    return rng.permutation(n_records)


def batch_record_ids(index_ids, n: int, seed: int, iteration: int) -> list:
    """Record ids for the given iteration (0-based) at batch size n."""
    total = len(index_ids)
    if total == 0:
        raise ValueError("index is empty")
    if n <= total:
        per_epoch = math.ceil(total / n)
        epoch, slot = divmod(iteration, per_epoch)
        perm = epoch_permutation(total, seed, epoch)
        picks = perm[slot * n:min(total, (slot + 1) * n)]
    else:
        # batch larger than the dataset: wrap epochs, reshuffling each
        start = iteration * n
        picks = []
        epoch = start // total
        pos = start % total
        perm = epoch_permutation(total, seed, epoch)
        while len(picks) < n:
            picks.append(perm[pos])
            pos += 1
            if pos == total:
                epoch += 1
                pos = 0
                perm = epoch_permutation(total, seed, epoch)
    return [index_ids[i] for i in picks]


def materialize(record: SampleRecord, scale: int) -> SamplePair:
    """Load one record from disk and synthesize its LR counterpart."""
    hr = load_image(record.hr_path)
    if record.mask_path is None:
        mask = np.ones(hr.shape[:2], dtype=np.uint8)
    else:
        mask = load_mask(record.mask_path)
        if mask.shape != hr.shape[:2]:
            raise ValueError(
                f"record {record.id!r}: mask {mask.shape} does not match image {hr.shape[:2]}"
            )
    lr = synthesize_lr(hr, scale)
    return SamplePair(record.id, hr, lr, mask, record.split)


class Batcher:
    """Single-consumer batch iterator over one split of a DatasetIndex."""

    def __init__(self, index: DatasetIndex, batch_size: int, seed: int,
                 split: str = "train", cache_size: int = 64):
        if len(index) == 0:
            raise ValueError("index is empty")
        self.index = index
        self.batch_size = batch_size
        self.seed = seed
        self.record_ids = [r.id for r in index.split(split)]
        if not self.record_ids:
            raise ValueError(f"index has no {split!r} records")
        self.iteration = 0
        self._cache: OrderedDict[str, SamplePair] = OrderedDict()
        self._cache_size = cache_size

    def ids_for_iteration(self, iteration: int) -> list:
        return batch_record_ids(self.record_ids, self.batch_size, self.seed, iteration)

    def _disk_cache_path(self, record: SampleRecord):
        root = os.environ.get(CACHE_ENV_VAR)
        if not root:
            return None
        stamp = f"{record.hr_path}:{os.path.getmtime(record.hr_path)}:{self.index.scale}"
        digest = hashlib.sha256(stamp.encode()).hexdigest()[:24]
        return os.path.join(root, f"lr_{record.id}_{digest}.npz")

    def _materialize(self, record_id: str) -> SamplePair:
        if record_id in self._cache:
            self._cache.move_to_end(record_id)
            return self._cache[record_id]
        record = self.index.get(record_id)
        disk_path = self._disk_cache_path(record)
        if disk_path and os.path.exists(disk_path):
            blob = np.load(disk_path)
            pair = SamplePair(record_id, blob["hr"], blob["lr"], blob["mask"], record.split)
        else:
            pair = materialize(record, self.index.scale)
            if disk_path:
                os.makedirs(os.path.dirname(disk_path), exist_ok=True)
                np.savez(disk_path, hr=pair.hr, lr=pair.lr, mask=pair.mask)
        self._cache[record_id] = pair
        while len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return pair

    def next_batch(self) -> list[SamplePair]:
        """Materialize the next deterministic batch and advance."""
        ids = self.ids_for_iteration(self.iteration)
        self.iteration += 1
        return [self._materialize(i) for i in ids]
