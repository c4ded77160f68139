"""Digit data: IDX ingestion, role splits, operational stream with label shift,
and a small synthetic fixture."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .exceptions import CapacityError, ConsistencyError, FormatError, ParameterError, TruncatedFileError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

TRAIN_SIZE = 1000
VERIFICATION_SIZE = 500
BATCH_SIZE = 1000

FORMS = ("A", "B", "C")
ROLES = ("train", "verification", "pool", "operational")


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FormSpec:
    """Which digits each input form accepts.

    A form collects the digits it was designed for: ``A`` takes digits
    without straight strokes, ``B`` digits made of straight strokes only and
    ``C`` the rest.
    """

    allowed_labels: Mapping[str, frozenset] = field(
        default_factory=lambda: {
            "A": frozenset({0, 3, 6, 8, 9}),
            "B": frozenset({1, 4, 7}),
            "C": frozenset({2, 5}),
        }
    )

    def __post_init__(self):
        allowed = {str(k): frozenset(int(v) for v in vs) for k, vs in self.allowed_labels.items()}
        if set(allowed) != set(FORMS):
            raise ParameterError(f"form ids must be {FORMS}, got {sorted(allowed)}")
        seen = [label for labels in allowed.values() for label in labels]
        if sorted(seen) != list(range(10)):
            raise ParameterError("allowed label sets must partition the digits 0..9")
        object.__setattr__(self, "allowed_labels", allowed)

    def form_of(self, labels):
        """Form id for each label (vectorised)."""
        lookup = np.empty(10, dtype="<U1")
        for form, labs in self.allowed_labels.items():
            lookup[list(labs)] = form
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise ParameterError("labels must lie in 0..9")
        return lookup[labels]

    def allowed_mask(self):
        """Boolean matrix ``M[f, y]`` telling whether form ``FORMS[f]`` accepts ``y``."""
        mask = np.zeros((len(FORMS), 10), dtype=bool)
        for i, form in enumerate(FORMS):
            mask[i, list(self.allowed_labels[form])] = True
        return mask


DEFAULT_FORMS = FormSpec()


@dataclass(frozen=True)
class ShiftSpec:
    swap_pairs: tuple = ((2, 7),)
    start_cycle: int = 4

    def __post_init__(self):
        pairs = tuple(tuple(sorted(int(v) for v in p)) for p in self.swap_pairs)
        flat = [v for p in pairs for v in p]
        if any(len(p) != 2 or p[0] == p[1] for p in pairs):
            raise ParameterError(f"swap pairs must hold two distinct labels: {self.swap_pairs}")
        if len(set(flat)) != len(flat):
            raise ParameterError(f"swap pairs must be disjoint: {self.swap_pairs}")
        if any(v < 0 or v > 9 for v in flat):
            raise ParameterError("swap pairs must use labels 0..9")
        object.__setattr__(self, "swap_pairs", pairs)

    def mapping(self):
        table = np.arange(10)
        for a, b in self.swap_pairs:
            table[a], table[b] = b, a
        return table

    def active(self, cycle):
        return bool(self.swap_pairs) and cycle >= self.start_cycle


@dataclass(frozen=True)
class Example:
    pixels: np.ndarray
    true_label: int | None
    form_id: str
    origin_cycle: int = 0


@dataclass(frozen=True, eq=False)
class Observed:
    """What monitoring sees of operational inputs: pixels and source form, no labels."""

    pixels: np.ndarray
    forms: np.ndarray

    def __len__(self):
        return len(self.forms)


@dataclass(frozen=True, eq=False)
class LabeledSet:
    """Column-oriented collection of labeled examples.

    ``ids`` index into the pool the examples were loaded from, which keeps
    role splits auditable for disjointness.
    """

    pixels: np.ndarray
    labels: np.ndarray
    forms: np.ndarray
    ids: np.ndarray
    origin_cycle: np.ndarray
    role: str = "pool"

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2:
            raise ParameterError("pixels must be a 2-d array")
        n = len(pixels)
        for name in ("labels", "forms", "ids", "origin_cycle"):
            if len(getattr(self, name)) != n:
                raise ConsistencyError(f"{name} has {len(getattr(self, name))} entries, expected {n}")
        if self.role not in ROLES:
            raise ParameterError(f"unknown role {self.role!r}")
        object.__setattr__(self, "pixels", _frozen(pixels))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        object.__setattr__(self, "forms", _frozen(self.forms, "<U1"))
        object.__setattr__(self, "ids", _frozen(self.ids, np.int64))
        object.__setattr__(self, "origin_cycle", _frozen(self.origin_cycle, np.int64))

    @classmethod
    def from_arrays(cls, pixels, labels, *, role="pool", form_spec=DEFAULT_FORMS, ids=None, origin_cycle=0):
        labels = np.asarray(labels, dtype=np.int64)
        n = len(labels)
        return cls(
            pixels=pixels,
            labels=labels,
            forms=form_spec.form_of(labels),
            ids=np.arange(n) if ids is None else ids,
            origin_cycle=np.full(n, origin_cycle) if np.isscalar(origin_cycle) else origin_cycle,
            role=role,
        )

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> Example:
        return Example(self.pixels[i], int(self.labels[i]), str(self.forms[i]), int(self.origin_cycle[i]))

    def __iter__(self) -> Iterator[Example]:
        return (self[i] for i in range(len(self)))

    @property
    def n_features(self):
        return self.pixels.shape[1]

    def subset(self, index, role=None):
        index = np.asarray(index)
        return LabeledSet(
            self.pixels[index],
            self.labels[index],
            self.forms[index],
            self.ids[index],
            self.origin_cycle[index],
            role or self.role,
        )

    def observed(self) -> Observed:
        return Observed(self.pixels, self.forms)

    def with_labels(self, labels, form_spec=DEFAULT_FORMS):
        """Same inputs under different true labels; forms follow the labels."""
        labels = np.asarray(labels, dtype=np.int64)
        return LabeledSet(self.pixels, labels, form_spec.form_of(labels), self.ids, self.origin_cycle, self.role)

    def with_role(self, role):
        return LabeledSet(self.pixels, self.labels, self.forms, self.ids, self.origin_cycle, role)

    def concat(self, other, role=None):
        if other.n_features != self.n_features:
            raise ConsistencyError("cannot concatenate sets with different input dimensions")
        return LabeledSet(
            np.vstack([self.pixels, other.pixels]),
            np.concatenate([self.labels, other.labels]),
            np.concatenate([self.forms, other.forms]),
            np.concatenate([self.ids, other.ids]),
            np.concatenate([self.origin_cycle, other.origin_cycle]),
            role or self.role,
        )


def _read_bytes(path):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (EOFError, gzip.BadGzipFile) as exc:
            raise TruncatedFileError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def read_idx_images(path):
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise TruncatedFileError(f"{path}: header needs 16 bytes, file has {len(raw)}")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise FormatError(f"{path}: image magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")
    expected = 16 + count * rows * cols
    if len(raw) < expected:
        raise TruncatedFileError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16)
    return data.reshape(count, rows * cols), (rows, cols)


def read_idx_labels(path):
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise TruncatedFileError(f"{path}: header needs 8 bytes, file has {len(raw)}")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise FormatError(f"{path}: label magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")
    if len(raw) < 8 + count:
        raise TruncatedFileError(f"{path}: expected {8 + count} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).astype(np.int64)


def write_idx(images_path, labels_path, images, labels, shape=(28, 28)):
    """Write uint8 images (N x rows*cols) and labels as an uncompressed IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, len(images), *shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def load_idx(images_path, labels_path, form_spec=DEFAULT_FORMS) -> LabeledSet:
    """Load an IDX image/label pair (optionally gzipped) into a pool set.

    Pixels are scaled by 1/255.
    """
    images, _ = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise ConsistencyError(f"{len(images)} images but {len(labels)} labels")
    if labels.size and labels.max() > 9:
        raise FormatError(f"{labels_path}: label {labels.max()} outside 0..9")
    return LabeledSet.from_arrays(images / 255.0, labels, role="pool", form_spec=form_spec)


def bundled_mnist_paths():
    """Paths of the 10,000-digit MNIST subset shipped with the package."""
    root = resources.files("daic") / "_data"
    return (
        Path(str(root / "mnist10k-images-idx3-ubyte.gz")),
        Path(str(root / "mnist10k-labels-idx1-ubyte.gz")),
    )


def required_pool_size(cycles, batch_size=BATCH_SIZE):
    return TRAIN_SIZE + VERIFICATION_SIZE + cycles * batch_size


def make_splits(pool: LabeledSet, seed, cycles=8, batch_size=BATCH_SIZE):
    """Uniform random disjoint split into train (1000), verification (500) and the remainder."""
    need = required_pool_size(cycles, batch_size)
    if len(pool) < need:
        raise CapacityError(f"pool holds {len(pool)} examples, {need} needed for {cycles} cycles")
    order = np.random.default_rng(seed).permutation(len(pool))
    train = pool.subset(order[:TRAIN_SIZE], role="train")
    verification = pool.subset(order[TRAIN_SIZE : TRAIN_SIZE + VERIFICATION_SIZE], role="verification")
    rest = pool.subset(order[TRAIN_SIZE + VERIFICATION_SIZE :], role="pool")
    return train, verification, rest


def apply_shift(batch: LabeledSet, shift: ShiftSpec, form_spec=DEFAULT_FORMS) -> LabeledSet:
    """Swap true labels per ``shift`` and re-derive forms from the new labels; pixels untouched."""
    return batch.with_labels(shift.mapping()[batch.labels], form_spec)


def draw_operational_batch(
    pool: LabeledSet, cycle, shift: ShiftSpec, seed, batch_size=BATCH_SIZE, form_spec=DEFAULT_FORMS
) -> LabeledSet:
    """Fresh operational inputs for ``cycle`` (1-based).

    Batches of different cycles under the same seed never overlap: the pool is
    permuted once per seed and consumed block by block.
    """
    if cycle < 1:
        raise ParameterError(f"cycles are numbered from 1, got {cycle}")
    stop = cycle * batch_size
    if stop > len(pool):
        raise CapacityError(f"pool of {len(pool)} exhausted at cycle {cycle} ({stop} examples needed)")
    order = np.random.default_rng(seed).permutation(len(pool))
    block = pool.subset(order[stop - batch_size : stop], role="operational")
    block = LabeledSet(
        block.pixels,
        block.labels,
        form_spec.form_of(block.labels),
        block.ids,
        np.full(len(block), cycle),
        "operational",
    )
    if shift.active(cycle):
        block = apply_shift(block, shift, form_spec)
    return block


# fixed seed: prototypes do not depend on the caller's seed
_PROTOTYPE_SEED = 7


def synth_prototypes(n_classes=10, dim=64):
    rng = np.random.default_rng(_PROTOTYPE_SEED)
    return (rng.random((n_classes, dim)) > 0.5).astype(np.float64) * 0.8 + 0.1


def synth_generate(n, n_classes=10, noise=0.1, seed=0, dim=64, form_spec=DEFAULT_FORMS) -> LabeledSet:
    """Prototype-plus-uniform-noise data in ``[0, 1]^dim`` with balanced classes."""
    if not 1 <= n_classes <= 10:
        raise ParameterError(f"n_classes must be in 1..10, got {n_classes}")
    if n < n_classes:
        raise ParameterError(f"n={n} must be at least n_classes={n_classes}")
    if not 0 <= noise <= 0.5:
        raise ParameterError(f"noise must lie in [0, 0.5], got {noise}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % n_classes)
    protos = synth_prototypes(n_classes, dim)
    pixels = protos[labels] + rng.uniform(-noise, noise, size=(n, dim))
    return LabeledSet.from_arrays(np.clip(pixels, 0.0, 1.0), labels, role="pool", form_spec=form_spec)


def check_disjoint(sets: Sequence[LabeledSet]):
    seen = set()
    for s in sets:
        ids = set(s.ids.tolist())
        if ids & seen:
            return False
        seen |= ids
    return True
