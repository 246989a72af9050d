"""The 19-parameter anthropometric schema and parameter value containers.

Parameter ids are 1-based and stable. Every parameter matrix in this package
stores one column per parameter, in id order. Internal units are millimeters
for lengths and circumferences, kilograms for weight.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

N_PARAMETERS = 19

WEIGHT_CAP_KG = 400.0
LENGTH_CAP_MM = 3000.0


@dataclass(frozen=True)
class ParameterDescriptor:
    """One anthropometric measurement definition."""

    id: int
    key: str
    name: str
    kind: str  # "weight" | "length" | "circumference"
    unit: str  # "kg" | "mm"


_ROWS = [
    (1, "weight", "weight", "weight", "kg"),
    (2, "height", "height", "length", "mm"),
    (3, "neck", "neck", "circumference", "mm"),
    (4, "chest", "chest", "circumference", "mm"),
    (5, "belly_button_waist", "belly button waist", "circumference", "mm"),
    (6, "gluteal_hip", "gluteal hip", "circumference", "mm"),
    (7, "neck_shoulder_elbow_wrist", "neck shoulder elbow wrist", "length", "mm"),
    (8, "crotch_knee_floor", "crotch knee floor", "length", "mm"),
    (9, "across_back_shoulder_neck", "across back shoulder neck", "length", "mm"),
    (10, "neck_to_gluteal_hip", "neck to gluteal hip", "length", "mm"),
    (11, "natural_waist", "natural waist", "circumference", "mm"),
    (12, "maximum_hip", "maximum hip", "circumference", "mm"),
    (13, "natural_waist_rise", "natural waist rise", "length", "mm"),
    (14, "shoulder_to_midhand", "shoulder to midhand", "length", "mm"),
    (15, "upper_arm", "upper arm", "circumference", "mm"),
    (16, "wrist", "wrist", "circumference", "mm"),
    (17, "outer_natural_waist_to_floor", "outer natural waist to floor", "length", "mm"),
    (18, "knee", "knee", "circumference", "mm"),
    (19, "maximum_thigh", "maximum thigh", "circumference", "mm"),
]

PARAMETERS: tuple[ParameterDescriptor, ...] = tuple(ParameterDescriptor(*r) for r in _ROWS)

KEY_TO_INDEX: dict[str, int] = {p.key: p.id - 1 for p in PARAMETERS}
PARAMETER_KEYS: tuple[str, ...] = tuple(p.key for p in PARAMETERS)
LENGTH_INDICES: tuple[int, ...] = tuple(p.id - 1 for p in PARAMETERS if p.unit == "mm")
WEIGHT_INDEX = 0


class SchemaError(ValueError):
    """Raised when parameter names or values violate the schema."""


def schema_hash() -> bytes:
    """SHA-256 over the canonical schema definition (32 bytes).

    Model files and measurement-spec files embed this hash so that models,
    specs and request payloads can be checked for schema agreement.
    """
    canon = json.dumps([[p.id, p.key, p.name, p.kind, p.unit] for p in PARAMETERS])
    return hashlib.sha256(canon.encode()).digest()


def parameter_index(name: str) -> int:
    """Resolve a parameter key (or display name) to its 0-based column index."""
    if name in KEY_TO_INDEX:
        return KEY_TO_INDEX[name]
    for p in PARAMETERS:
        if p.name == name:
            return p.id - 1
    raise SchemaError(
        f"unknown parameter {name!r}; valid names: {', '.join(PARAMETER_KEYS)}"
    )


def value_cap(index: int) -> float:
    return WEIGHT_CAP_KG if index == WEIGHT_INDEX else LENGTH_CAP_MM


@dataclass
class ParameterVector:
    """19 anthropometric values with a per-entry presence mask.

    ``values[i]`` is meaningful only where ``present[i]`` is True; absent
    entries are carried as NaN so accidental use surfaces immediately.
    """

    values: np.ndarray
    present: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).reshape(N_PARAMETERS).copy()
        if self.present is None:
            self.present = np.isfinite(self.values)
        self.present = np.asarray(self.present, dtype=bool).reshape(N_PARAMETERS).copy()
        self.values[~self.present] = np.nan

    @property
    def complete(self) -> bool:
        return bool(self.present.all())

    def check_ranges(self) -> None:
        """Reject non-positive or implausibly large present values."""
        bad = []
        for i in np.flatnonzero(self.present):
            v = self.values[i]
            if not np.isfinite(v) or v <= 0.0 or v >= value_cap(i):
                bad.append(f"{PARAMETER_KEYS[i]}={v!r}")
        if bad:
            raise SchemaError(
                "parameter values out of range (must be > 0 and below "
                f"{WEIGHT_CAP_KG} kg / {LENGTH_CAP_MM} mm): " + ", ".join(bad)
            )

    @classmethod
    def from_dict(cls, mapping: dict[str, float]) -> "ParameterVector":
        values = np.full(N_PARAMETERS, np.nan)
        for name, value in mapping.items():
            idx = parameter_index(name)
            try:
                values[idx] = float(value)
            except (TypeError, ValueError):
                raise SchemaError(f"parameter {name!r} has non-numeric value {value!r}")
        vec = cls(values)
        vec.check_ranges()
        return vec

    @classmethod
    def complete_from_array(cls, values: np.ndarray) -> "ParameterVector":
        vec = cls(np.asarray(values, dtype=np.float64), np.ones(N_PARAMETERS, dtype=bool))
        if not np.isfinite(vec.values).all():
            raise SchemaError("complete parameter vector contains non-finite entries")
        return vec

    def to_dict(self, include_missing: bool = False) -> dict[str, float]:
        out = {}
        for i, key in enumerate(PARAMETER_KEYS):
            if self.present[i]:
                out[key] = float(self.values[i])
            elif include_missing:
                out[key] = None  # type: ignore[assignment]
        return out


def load_parameter_csv(path) -> np.ndarray:
    """Read an n x 19 parameter matrix from CSV with a key header row."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        cols = [h for h in header if h]
        if cols[:1] == ["body"]:
            cols = cols[1:]
            skip = 1
        else:
            skip = 0
        if tuple(cols) != PARAMETER_KEYS:
            raise SchemaError(f"CSV columns {cols} do not match the parameter schema")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")[skip:]
            rows.append([float(x) for x in parts])
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != N_PARAMETERS:
        raise SchemaError("CSV does not contain 19 parameter columns")
    return data


def save_parameter_csv(path, data: np.ndarray, body_ids: list[str] | None = None) -> None:
    data = np.asarray(data, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        if body_ids is not None:
            fh.write("body," + ",".join(PARAMETER_KEYS) + "\n")
            for bid, row in zip(body_ids, data):
                fh.write(bid + "," + ",".join(repr(float(x)) for x in row) + "\n")
        else:
            fh.write(",".join(PARAMETER_KEYS) + "\n")
            for row in data:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
