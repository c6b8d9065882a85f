"""Core domain types: labeled datasets, example distributions, label lists, seeded streams.

Instances are hashable keys: strings, integers, or tuples of floats (feature
vectors). Labels are dense non-negative integers 0..L-1 internally; file
loaders remap arbitrary integer labels on ingestion and remember the mapping.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    AllZeroWeights,
    InvalidParams,
    InvalidWeight,
    ListLookupError,
)

InstanceKey = "str | int | tuple[float, ...]"

_NORMALIZE_MAX_PASSES = 8


def as_instance_key(x):
    """Coerce a raw instance into a hashable key (lists/arrays become float tuples)."""
    if isinstance(x, (str, int)):
        return x
    if isinstance(x, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in x)
    if isinstance(x, float):
        return (x,)
    raise InvalidParams(f"unsupported instance type: {type(x).__name__}")


def stable_digest(obj) -> str:
    """Short stable hash of a plain-python object, used for behavior fingerprints."""
    payload = repr(obj).encode("utf-8")
    return hashlib.blake2b(payload, digest_size=12).hexdigest()


@dataclass(frozen=True)
class LabeledExample:
    instance: object
    label: int


@dataclass(frozen=True)
class Dataset:
    """An ordered multiset of labeled examples over a dense label alphabet."""

    examples: tuple
    alphabet: tuple

    def __post_init__(self):
        if len(self.examples) == 0:
            raise InvalidParams("dataset needs at least one example")
        if len(self.alphabet) < 2:
            raise InvalidParams("label alphabet needs at least two labels")
        if tuple(self.alphabet) != tuple(range(len(self.alphabet))):
            raise InvalidParams("internal alphabet must be dense 0..L-1")
        for ex in self.examples:
            if ex.label not in self.alphabet:
                raise InvalidParams(f"label {ex.label} outside alphabet")

    @property
    def m(self) -> int:
        return len(self.examples)

    @cached_property
    def instances(self) -> tuple:
        return tuple(ex.instance for ex in self.examples)

    @cached_property
    def labels(self) -> np.ndarray:
        arr = np.array([ex.label for ex in self.examples], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def unique_instances(self) -> tuple:
        """Distinct instance keys in first-seen order."""
        seen = {}
        for x in self.instances:
            if x not in seen:
                seen[x] = len(seen)
        return tuple(seen.keys())

    @cached_property
    def group_ids(self) -> np.ndarray:
        """Index of each example's instance within unique_instances."""
        pos = {x: i for i, x in enumerate(self.unique_instances)}
        arr = np.array([pos[x] for x in self.instances], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    def subset(self, indices) -> list:
        return [self.examples[i] for i in indices]


def make_dataset(pairs: Iterable, alphabet=None) -> Dataset:
    """Build a Dataset from (instance, label) pairs, inferring the alphabet if absent."""
    examples = tuple(LabeledExample(as_instance_key(x), int(y)) for x, y in pairs)
    if not examples:
        raise InvalidParams("dataset needs at least one example")
    if alphabet is None:
        top = max(ex.label for ex in examples)
        alphabet = tuple(range(max(top + 1, 2)))
    return Dataset(examples=examples, alphabet=tuple(alphabet))


@dataclass(frozen=True)
class ExampleDistribution:
    """A probability vector over the examples of some dataset."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise InvalidWeight("distribution must be a non-empty 1-d vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidWeight("distribution entries must be finite and non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise InvalidWeight(f"distribution sums to {w.sum()!r}, not 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def entropy(self) -> float:
        w = self.weights[self.weights > 0]
        return float(-(w * np.log(w)).sum())


def normalize(weights) -> ExampleDistribution:
    """Scale non-negative weights to a probability vector.

    The output sum is within one ulp of 1. A short fixed-point loop absorbs
    the drift a single division can leave behind, so the sum usually lands on
    exactly 1.0, and then renormalizing returns the same array bit for bit.
    Some inputs oscillate forever one ulp around 1 instead of settling; the
    loop breaks plain two-cycles canonically (smaller |sum - 1| wins, ties on
    bytes) and otherwise stops at the pass cap, so renormalizing is always
    deterministic and moves no entry by more than one ulp.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidWeight("weights must be a non-empty 1-d vector")
    if not np.all(np.isfinite(w)):
        raise InvalidWeight("weights must be finite")
    if np.any(w < 0):
        raise InvalidWeight("weights must be non-negative")
    total = float(w.sum())
    if total == 0.0:
        raise AllZeroWeights("cannot normalize an all-zero weight vector")
    v = w / total
    prev = None
    for _ in range(_NORMALIZE_MAX_PASSES):
        s = float(v.sum())
        if s == 1.0:
            break
        v2 = v / s
        if np.array_equal(v2, v):
            break
        if prev is not None and np.array_equal(v2, prev):
            v = min(v, v2, key=lambda u: (abs(float(u.sum()) - 1.0), u.tobytes()))
            break
        prev = v
        v = v2
    return ExampleDistribution(weights=v)


def _tag_to_int(tag) -> int:
    digest = hashlib.blake2b(repr(tag).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class RandomStream:
    """A seeded random source addressed by a derivation path.

    Two streams built from the same (seed, path) produce identical draw
    sequences; child streams with distinct tags are independent by
    construction. A single stream instance is meant for sequential use only.
    """

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        self._gen = None

    def child(self, *tags) -> "RandomStream":
        return RandomStream(self.seed, self.path + tuple(tags))

    def generator(self) -> np.random.Generator:
        if self._gen is None:
            spawn_key = tuple(_tag_to_int(t) for t in self.path)
            self._gen = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=spawn_key))
            )
        return self._gen

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path})"


def sample_indices(dist: ExampleDistribution, count: int, rng: RandomStream) -> np.ndarray:
    """Draw `count` example indices i.i.d. (with replacement) from `dist`."""
    if count < 1:
        raise InvalidParams("sample count must be at least 1")
    return rng.generator().choice(dist.size, size=count, replace=True, p=dist.weights)


def sample_iid(dist: ExampleDistribution, dataset: Dataset, count: int, rng: RandomStream) -> list:
    """Draw `count` labeled examples i.i.d. from `dist` over `dataset`."""
    if dist.size != dataset.m:
        raise InvalidParams("distribution and dataset sizes differ")
    return dataset.subset(sample_indices(dist, count, rng))


class ListFunction:
    """A map from instances to short duplicate-free label lists.

    Three backing kinds:
      * ``explicit-table``: a finite table of instance -> list entries.
      * ``universal``: every instance maps to the whole alphabet (the
        "no hint yet" sentinel; audits treat it as the unbounded-list case).
      * ``composed``: lists are computed on demand by a closure, with an
        optional table of precomputed entries taking precedence.
    """

    __slots__ = ("kind", "declared_size", "entries", "alphabet", "extend", "name")

    def __init__(self, kind, declared_size, entries=None, alphabet=None, extend=None, name=""):
        if declared_size < 1:
            raise InvalidParams("declared list size must be at least 1")
        if kind not in ("explicit-table", "universal", "composed"):
            raise InvalidParams(f"unknown list-function kind: {kind}")
        if entries is not None:
            for key, lst in entries.items():
                if len(set(lst)) != len(lst):
                    raise InvalidParams(f"duplicate labels in list for {key!r}")
                if len(lst) > declared_size:
                    raise InvalidParams(
                        f"list for {key!r} has {len(lst)} labels, max {declared_size}"
                    )
        self.kind = kind
        self.declared_size = int(declared_size)
        self.entries = dict(entries) if entries is not None else None
        self.alphabet = tuple(alphabet) if alphabet is not None else None
        self.extend = extend
        self.name = name or kind

    @classmethod
    def explicit(cls, entries: dict, declared_size: int, name="") -> "ListFunction":
        entries = {k: tuple(v) for k, v in entries.items()}
        return cls("explicit-table", declared_size, entries=entries, name=name)

    @classmethod
    def universal(cls, alphabet, name="universal") -> "ListFunction":
        alphabet = tuple(alphabet)
        return cls("universal", len(alphabet), alphabet=alphabet, name=name)

    @classmethod
    def composed(cls, extend: Callable, declared_size: int, entries=None, name="") -> "ListFunction":
        entries = {k: tuple(v) for k, v in entries.items()} if entries else None
        return cls("composed", declared_size, entries=entries, extend=extend, name=name)

    @property
    def is_universal(self) -> bool:
        return self.kind == "universal"

    def __call__(self, x) -> tuple:
        if self.kind == "universal":
            return self.alphabet
        if self.entries is not None and x in self.entries:
            return self.entries[x]
        if self.extend is not None:
            lst = tuple(self.extend(x))
            if len(lst) > self.declared_size:
                lst = lst[: self.declared_size]
            return lst
        raise ListLookupError(f"no list for instance {x!r}")

    def __repr__(self):
        return f"ListFunction({self.name}, k={self.declared_size})"


def ordered_dedup(items) -> tuple:
    seen = set()
    out = []
    for v in items:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return tuple(out)


# ---------------------------------------------------------------------------
# Dataset files: one JSON object per line, {"x": <key>, "y": <int label>}.
# ---------------------------------------------------------------------------


def load_dataset(path, alphabet_size=None):
    """Read a JSON-lines dataset file.

    External labels may be arbitrary integers; they are remapped to dense
    0..L-1 in sorted order. Returns (dataset, label_map) where label_map sends
    external label -> internal label.
    """
    raw = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if "x" not in row or "y" not in row:
                raise InvalidParams(f"{path}:{line_no}: rows need 'x' and 'y' fields")
            raw.append((as_instance_key(row["x"]), int(row["y"])))
    if not raw:
        raise InvalidParams(f"{path}: empty dataset file")
    observed = sorted({y for _, y in raw})
    label_map = {y: i for i, y in enumerate(observed)}
    size = len(observed) if alphabet_size is None else int(alphabet_size)
    if size < len(observed):
        raise InvalidParams("alphabet_size smaller than the number of observed labels")
    size = max(size, 2)
    pairs = [(x, label_map[y]) for x, y in raw]
    return make_dataset(pairs, alphabet=range(size)), label_map


def save_dataset(dataset: Dataset, path, label_map=None):
    """Write a dataset as JSON lines, optionally mapping labels back to external ids."""
    inverse = None
    if label_map is not None:
        inverse = {v: k for k, v in label_map.items()}
    with open(path, "w", encoding="utf-8") as fh:
        for ex in dataset.examples:
            x = list(ex.instance) if isinstance(ex.instance, tuple) else ex.instance
            y = inverse[ex.label] if inverse else ex.label
            fh.write(json.dumps({"x": x, "y": int(y)}) + "\n")
