"""Trained model containers and their on-disk formats.

The local mapping model is stored in a versioned binary container (.mfm):

    magic           8 bytes  b"MFMODEL\\0"
    version         uint32   container version (currently 1)
    schema hash     32 bytes sha256 of the parameter schema
    k               uint32   selected parameters per facet
    n_vertices      uint32
    n_faces         uint32
    flags           uint32   bit 0: embedded specs, bit 1: embedded data
    means           19 float64
    stds            19 float64
    mean mesh       n_vertices*3 float64, then n_faces*3 uint32
    masks           n_faces * 3 bytes (19-bit bitsets, packbits order)
    matrices        n_faces * 9 * (k+1) float64, row-major
    [specs]         uint64 length + JSON bytes       (flag bit 0)
    [training data] uint64 row count + rows*19 float64 (flag bit 1)

All integers and floats are little-endian. A JSON sidecar (same path plus
".json") records training metadata; it is informative only and not required
to load the model. The global PCA baseline uses a plain .npz file.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measure import MeasurementSpecSet, specs_from_json, specs_to_json
from .mesh import TriangleMesh
from .schema import N_PARAMETERS, schema_hash

MAGIC = b"MFMODEL\x00"
MODEL_VERSION = 1
FLAG_SPECS = 1
FLAG_DATA = 2


class ModelFormatError(ValueError):
    pass


@dataclass
class MappingModel:
    """Mean mesh plus per-facet relevance masks and mapping matrices."""

    mean_mesh: TriangleMesh
    masks: np.ndarray  # (m, 19) bool
    matrices: np.ndarray  # (m, 9, k+1) float64
    means: np.ndarray  # (19,)
    stds: np.ndarray  # (19,)
    k: int
    version: int = MODEL_VERSION
    specs: MeasurementSpecSet | None = None
    training_data: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        m = self.mean_mesh.n_faces
        self.masks = np.asarray(self.masks, dtype=bool).reshape(m, N_PARAMETERS)
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        if self.matrices.shape != (m, 9, self.k + 1):
            raise ModelFormatError(
                f"matrices shape {self.matrices.shape} != ({m}, 9, {self.k + 1})"
            )
        if not (self.masks.sum(axis=1) == self.k).all():
            raise ModelFormatError("every relevance mask must select exactly k parameters")
        if not np.isfinite(self.matrices).all():
            raise ModelFormatError("mapping matrices contain non-finite entries")
        self.means = np.asarray(self.means, dtype=np.float64).reshape(N_PARAMETERS)
        self.stds = np.asarray(self.stds, dtype=np.float64).reshape(N_PARAMETERS)

    @property
    def n_faces(self) -> int:
        return self.mean_mesh.n_faces

    def mask_indices(self) -> np.ndarray:
        """Selected column indices per facet, shape (m, k)."""
        return np.argsort(~self.masks, axis=1, kind="stable")[:, : self.k]


@dataclass
class GlobalModel:
    """PCA basis over stacked deformations plus a parameter regression."""

    mean_mesh: TriangleMesh
    basis: np.ndarray  # (9m, d), orthonormal columns
    deform_mean: np.ndarray  # (9m,)
    coef: np.ndarray  # (20, d): z-scored params + intercept -> coefficients
    means: np.ndarray
    stds: np.ndarray
    d: int

    def __post_init__(self) -> None:
        gram = self.basis.T @ self.basis
        if np.abs(gram - np.eye(self.d)).max() > 1e-8:
            raise ModelFormatError("PCA basis columns are not orthonormal")


def save_model(model: MappingModel, path) -> None:
    path = Path(path)
    m = model.n_faces
    flags = (FLAG_SPECS if model.specs is not None else 0) | (
        FLAG_DATA if model.training_data is not None else 0
    )
    little = "<"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(little + "I", model.version))
        fh.write(schema_hash())
        fh.write(
            struct.pack(
                little + "IIII",
                model.k,
                model.mean_mesh.n_vertices,
                m,
                flags,
            )
        )
        fh.write(model.means.astype("<f8").tobytes())
        fh.write(model.stds.astype("<f8").tobytes())
        fh.write(model.mean_mesh.vertices.astype("<f8").tobytes())
        fh.write(model.mean_mesh.faces.astype("<u4").tobytes())
        fh.write(np.packbits(model.masks, axis=1).tobytes())
        fh.write(model.matrices.astype("<f8").tobytes())
        if model.specs is not None:
            blob = specs_to_json(model.specs)
            fh.write(struct.pack(little + "Q", len(blob)))
            fh.write(blob)
        if model.training_data is not None:
            fh.write(struct.pack(little + "Q", len(model.training_data)))
            fh.write(np.asarray(model.training_data, dtype="<f8").tobytes())
    sidecar = {
        "format": "bodyreshape-mapping-model",
        "version": model.version,
        **{key: model.metadata.get(key) for key in ("n", "k", "seed", "dataset_checksum")},
    }
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ModelFormatError(f"truncated model file while reading {what}")
    return data


def load_model(path) -> MappingModel:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 8, "magic")
        if magic != MAGIC:
            raise ModelFormatError(f"{path} is not a mapping-model file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {version}")
        stored_hash = _read_exact(fh, 32, "schema hash")
        if stored_hash != schema_hash():
            raise ModelFormatError(
                "model was trained against a different parameter schema"
            )
        k, nv, m, flags = struct.unpack("<IIII", _read_exact(fh, 16, "header"))
        means = np.frombuffer(_read_exact(fh, 19 * 8, "means"), dtype="<f8").copy()
        stds = np.frombuffer(_read_exact(fh, 19 * 8, "stds"), dtype="<f8").copy()
        vertices = np.frombuffer(
            _read_exact(fh, nv * 3 * 8, "mean mesh vertices"), dtype="<f8"
        ).reshape(nv, 3)
        faces = np.frombuffer(
            _read_exact(fh, m * 3 * 4, "mean mesh faces"), dtype="<u4"
        ).reshape(m, 3)
        packed = np.frombuffer(_read_exact(fh, m * 3, "masks"), dtype=np.uint8)
        masks = np.unpackbits(packed.reshape(m, 3), axis=1)[:, :N_PARAMETERS].astype(bool)
        mats = np.frombuffer(
            _read_exact(fh, m * 9 * (k + 1) * 8, "mapping matrices"), dtype="<f8"
        ).reshape(m, 9, k + 1)
        specs = None
        training = None
        if flags & FLAG_SPECS:
            (blob_len,) = struct.unpack("<Q", _read_exact(fh, 8, "specs length"))
            specs = specs_from_json(_read_exact(fh, blob_len, "specs"))
        if flags & FLAG_DATA:
            (rows,) = struct.unpack("<Q", _read_exact(fh, 8, "data length"))
            training = np.frombuffer(
                _read_exact(fh, rows * 19 * 8, "training data"), dtype="<f8"
            ).reshape(rows, 19)
        trailing = fh.read(1)
        if trailing:
            raise ModelFormatError("trailing bytes after model payload")
    metadata = {}
    sidecar = path.with_suffix(path.suffix + ".json")
    if sidecar.exists():
        try:
            with open(sidecar, "r", encoding="utf-8") as fh:
                metadata = json.load(fh)
        except (OSError, json.JSONDecodeError):
            metadata = {}
    return MappingModel(
        mean_mesh=TriangleMesh(vertices, faces.astype(np.int64)),
        masks=masks,
        matrices=mats.copy(),
        means=means,
        stds=stds,
        k=int(k),
        version=version,
        specs=specs,
        training_data=None if training is None else training.copy(),
        metadata=metadata,
    )


def save_global_model(model: GlobalModel, path) -> None:
    np.savez(
        path,
        format=np.bytes_(b"bodyreshape-global-model"),
        schema=np.frombuffer(schema_hash(), dtype=np.uint8),
        vertices=model.mean_mesh.vertices,
        faces=model.mean_mesh.faces,
        basis=model.basis,
        deform_mean=model.deform_mean,
        coef=model.coef,
        means=model.means,
        stds=model.stds,
        d=np.int64(model.d),
    )


def load_global_model(path) -> GlobalModel:
    with np.load(path) as data:
        if bytes(data["format"]) != b"bodyreshape-global-model":
            raise ModelFormatError(f"{path} is not a global-model file")
        if bytes(data["schema"].tobytes()) != schema_hash():
            raise ModelFormatError("global model was trained against a different schema")
        return GlobalModel(
            mean_mesh=TriangleMesh(data["vertices"], data["faces"]),
            basis=data["basis"],
            deform_mean=data["deform_mean"],
            coef=data["coef"],
            means=data["means"],
            stds=data["stds"],
            d=int(data["d"]),
        )
