"""Deterministic datasets and the ``ADANN1`` tensor container.

Container layout (all integers little-endian)::

    b"ADANN1" | uint16 version | uint64 header length | UTF-8 JSON header | payloads

The header lists each tensor's name, dtype, shape, byte offset (relative to
the payload start) and byte count, plus a free-form ``metadata`` object.
Payloads are raw little-endian binary64 (or int64) arrays in header order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .base_model import BaseWeights
from .lirk import OdeSystem
from .mlp import MlpWeights
from .problems import ProblemSpec, ReferenceSolver, get_problem, reference_solve

MAGIC = b"ADANN1"
VERSION = 1
_DTYPES = {"float64": "<f8", "int64": "<i8"}


class ContainerError(ValueError):
    pass


def save(path, tensors: dict, metadata: dict | None = None):
    entries, blobs, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        kind = "int64" if np.issubdtype(arr.dtype, np.integer) else "float64"
        data = np.ascontiguousarray(arr, dtype=_DTYPES[kind]).tobytes()
        entries.append({"name": name, "dtype": kind, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"metadata": metadata or {}, "tensors": entries},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HQ", VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load(path) -> tuple[dict, dict]:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ContainerError(f"{path}: not an ADANN1 container")
    pos = len(MAGIC)
    if len(raw) < pos + 10:
        raise ContainerError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<HQ", raw, pos)
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    pos += 10
    if len(raw) < pos + hlen:
        raise ContainerError(f"{path}: truncated header")
    try:
        header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: corrupt header") from exc
    base = pos + hlen
    tensors = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        if start + e["nbytes"] > len(raw):
            raise ContainerError(f"{path}: truncated payload for tensor {e['name']!r}")
        arr = np.frombuffer(raw, dtype=_DTYPES[e["dtype"]], count=e["nbytes"] // 8, offset=start)
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(arr.dtype.newbyteorder("="))
    return tensors, header["metadata"]


# --- datasets ---------------------------------------------------------------


@dataclass
class Dataset:
    """Fine-grid initial samples and coarse-grid reference terminal values."""

    problem: str
    inputs: np.ndarray
    targets: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have the same number of rows")

    def __len__(self):
        return len(self.inputs)

    def coarse_inputs(self) -> np.ndarray:
        return get_problem(self.problem).restrict(self.inputs)

    def pair(self) -> tuple[np.ndarray, np.ndarray]:
        """``(coarse inputs, targets)``, the form the models train on."""
        return self.coarse_inputs(), self.targets


def sample_rng(seed: int, k: int) -> np.random.Generator:
    """Generator for sample ``k``: independent of batch layout and worker count."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))


def sample_inputs(problem: ProblemSpec, seed: int, indices, law=None) -> np.ndarray:
    law = law or problem.law
    fine = problem.fine_grid
    return np.stack([law.sample(sample_rng(seed, k), fine) for k in indices])


def generate_dataset(problem: ProblemSpec, n: int, seed: int, law=None,
                     solver: ReferenceSolver | None = None) -> Dataset:
    if n < 1:
        raise ValueError("need at least one sample")
    law = law or problem.law
    solver = solver or problem.reference
    fine = solver.fine_grid(problem.grid)
    system = OdeSystem(fine.laplacian(sparse=True), problem.nonlinearity)
    chunk = max(1, 2**23 // fine.n_unknowns)
    inputs = np.empty((n, fine.n_unknowns))
    targets = np.empty((n, problem.d))
    for start in range(0, n, chunk):
        idx = range(start, min(start + chunk, n))
        g = np.stack([law.sample(sample_rng(seed, k), fine) for k in idx])
        try:
            targets[idx.start : idx.stop] = reference_solve(problem, g, solver, system)
        except Exception as exc:
            raise RuntimeError(f"reference solve failed in samples {idx.start}..{idx.stop - 1}") from exc
        inputs[idx.start : idx.stop] = g
    meta = {
        "problem": problem.name,
        "seed": int(seed),
        "n": int(n),
        "fine_grid": asdict(fine),
        "reference": asdict(solver),
        "law": asdict(law),
    }
    return Dataset(problem.name, inputs, targets, meta)


SPLIT_NAMES = ("train", "validation", "selection", "test")


def split_dataset(d: Dataset, fractions=(0.75, 0.0625, 0.0625, 0.125)) -> dict:
    """Contiguous disjoint slices in generation order."""
    fractions = np.asarray(fractions, dtype=float)
    if len(fractions) != len(SPLIT_NAMES) or np.any(fractions < 0) or abs(fractions.sum() - 1) > 1e-9:
        raise ValueError(f"need {len(SPLIT_NAMES)} nonnegative fractions summing to 1, got {fractions}")
    bounds = np.concatenate([[0], np.round(np.cumsum(fractions) * len(d)).astype(int)])
    bounds[-1] = len(d)
    return {
        name: Dataset(d.problem, d.inputs[a:b], d.targets[a:b], {**d.metadata, "split": name, "rows": [int(a), int(b)]})
        for name, a, b in zip(SPLIT_NAMES, bounds[:-1], bounds[1:])
    }


def save_dataset(path, d: Dataset):
    save(path, {"inputs": d.inputs, "targets": d.targets}, {"kind": "dataset", "problem": d.problem, **d.metadata})


def load_dataset(path) -> Dataset:
    tensors, meta = load(path)
    if meta.get("kind") != "dataset":
        raise ContainerError(f"{path}: not a dataset container")
    meta = dict(meta)
    meta.pop("kind")
    return Dataset(meta["problem"], tensors["inputs"], tensors["targets"], meta)


# --- checkpoints ------------------------------------------------------------


def save_checkpoint(path, W: BaseWeights, theta: MlpWeights | None = None, eps: float = 0.0,
                    metadata: dict | None = None):
    tensors = {"base": W.W, "epsilon": np.array([eps], dtype=float)}
    if theta is not None:
        for l, (w, b) in enumerate(zip(theta.weights, theta.biases)):
            tensors[f"diff.{l}.weight"] = w
            tensors[f"diff.{l}.bias"] = b
    save(path, tensors, {"kind": "checkpoint", **(metadata or {})})


def load_checkpoint(path):
    """Returns ``(BaseWeights, MlpWeights or None, eps, metadata)``."""
    tensors, meta = load(path)
    if meta.get("kind") != "checkpoint":
        raise ContainerError(f"{path}: not a checkpoint container")
    n_layers = sum(1 for k in tensors if k.endswith(".weight"))
    theta = None
    if n_layers:
        theta = MlpWeights([tensors[f"diff.{l}.weight"] for l in range(n_layers)],
                           [tensors[f"diff.{l}.bias"] for l in range(n_layers)])
    return BaseWeights(tensors["base"]), theta, float(tensors["epsilon"][0]), meta
