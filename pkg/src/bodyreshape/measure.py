"""Extracting anthropometric parameters from a mesh via control-point specs.

A measurement spec binds each of the 19 parameters to template vertex
indices. Because every body in a dataset instantiates the same template
topology, the same indices are valid on every mesh. Four modes exist:

* ``circumference-loop``: sum of chords around an ordered closed loop.
* ``polyline``: sum of chords along an open point sequence.
* ``axis-extent``: max minus min vertical (z) coordinate of the points.
* ``volume-weight``: enclosed volume times a body density.

Chords are straight point-to-point distances, not geodesics. Specs are data:
they live in a versioned JSON document carrying the schema hash and a
checksum of the template face array they were authored for.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .mesh import TriangleMesh, is_closed, mesh_volume
from .schema import N_PARAMETERS, PARAMETERS, ParameterVector, schema_hash

SPEC_FORMAT = "bodyreshape-measurement-specs"
SPEC_VERSION = 1
DEFAULT_DENSITY_KG_M3 = 1000.0

MODES = ("circumference-loop", "polyline", "axis-extent", "volume-weight")


class MeasurementError(ValueError):
    """Invalid measurement spec or unmeasurable mesh."""


@dataclass(frozen=True)
class MeasurementSpec:
    """Control-point recipe for one parameter."""

    parameter_id: int
    mode: str
    points: tuple[int, ...] = ()
    density_kg_m3: float = DEFAULT_DENSITY_KG_M3

    def validate(self, n_vertices: int) -> None:
        if self.mode not in MODES:
            raise MeasurementError(f"unknown measurement mode {self.mode!r}")
        if self.mode == "circumference-loop" and len(self.points) < 8:
            raise MeasurementError(
                f"parameter {self.parameter_id}: circumference loop needs >= 8 "
                f"control points, got {len(self.points)}"
            )
        if self.mode == "polyline" and len(self.points) < 2:
            raise MeasurementError(
                f"parameter {self.parameter_id}: polyline needs >= 2 control points"
            )
        if self.mode == "axis-extent" and len(self.points) < 2:
            raise MeasurementError(
                f"parameter {self.parameter_id}: axis extent needs >= 2 control points"
            )
        for p in self.points:
            if not 0 <= p < n_vertices:
                raise MeasurementError(
                    f"parameter {self.parameter_id}: control point {p} out of range "
                    f"(template has {n_vertices} vertices)"
                )


@dataclass
class MeasurementSpecSet:
    """All 19 specs plus the template identity they were authored against."""

    specs: tuple[MeasurementSpec, ...]
    template_face_count: int
    template_face_checksum: str
    version: int = SPEC_VERSION
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = sorted(s.parameter_id for s in self.specs)
        if ids != list(range(1, N_PARAMETERS + 1)):
            raise MeasurementError("spec set must define each parameter id 1..19 exactly once")
        self.specs = tuple(sorted(self.specs, key=lambda s: s.parameter_id))

    def spec_for(self, parameter_id: int) -> MeasurementSpec:
        return self.specs[parameter_id - 1]


def face_checksum(faces: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(faces, dtype=np.int64).tobytes()).hexdigest()


def measure(mesh: TriangleMesh, specs: MeasurementSpecSet) -> ParameterVector:
    """Measure all 19 parameters of one mesh; every entry comes back present."""
    if mesh.n_faces != specs.template_face_count:
        raise MeasurementError(
            f"mesh has {mesh.n_faces} faces but specs were authored for "
            f"{specs.template_face_count}"
        )
    values = np.empty(N_PARAMETERS)
    volume = None
    for spec in specs.specs:
        spec.validate(mesh.n_vertices)
        idx = spec.parameter_id - 1
        if spec.mode == "volume-weight":
            if volume is None:
                if not is_closed(mesh):
                    raise MeasurementError(
                        "volume-weight needs a closed mesh; this mesh has boundary "
                        "or non-manifold edges"
                    )
                volume = mesh_volume(mesh)
            values[idx] = volume * 1e-9 * spec.density_kg_m3  # mm^3 -> m^3
        elif spec.mode == "axis-extent":
            z = mesh.vertices[list(spec.points), 2]
            values[idx] = float(z.max() - z.min())
        else:
            pts = mesh.vertices[list(spec.points)]
            if spec.mode == "circumference-loop":
                nxt = np.roll(pts, -1, axis=0)
            else:
                nxt = pts[1:]
                pts = pts[:-1]
            values[idx] = float(np.linalg.norm(nxt - pts, axis=1).sum())
    return ParameterVector(values, np.ones(N_PARAMETERS, dtype=bool))


def extract_dataset(meshes, specs: MeasurementSpecSet) -> np.ndarray:
    """Measure a list of meshes into an (n, 19) parameter matrix."""
    rows = []
    for i, mesh in enumerate(meshes):
        try:
            rows.append(measure(mesh, specs).values)
        except MeasurementError as exc:
            raise MeasurementError(f"body {i}: {exc}")
    return np.asarray(rows, dtype=np.float64)


def save_specs(specs: MeasurementSpecSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(specs_to_json(specs))


def specs_to_json(specs: MeasurementSpecSet) -> bytes:
    return (json.dumps(_spec_doc(specs), indent=1) + "\n").encode()


def _spec_doc(specs: MeasurementSpecSet) -> dict:
    return {
        "format": SPEC_FORMAT,
        "version": specs.version,
        "schema": schema_hash().hex(),
        "template": {
            "face_count": specs.template_face_count,
            "face_checksum": specs.template_face_checksum,
        },
        "parameters": [
            {
                "id": s.parameter_id,
                "key": PARAMETERS[s.parameter_id - 1].key,
                "name": PARAMETERS[s.parameter_id - 1].name,
                "mode": s.mode,
                "points": list(s.points),
                **(
                    {"density_kg_m3": s.density_kg_m3}
                    if s.mode == "volume-weight"
                    else {}
                ),
            }
            for s in specs.specs
        ],
        **({"extra": specs.extra} if specs.extra else {}),
    }


def _specs_from_doc(doc: dict) -> MeasurementSpecSet:
    if doc.get("format") != SPEC_FORMAT:
        raise MeasurementError("not a measurement-spec document")
    if doc.get("version") != SPEC_VERSION:
        raise MeasurementError(f"unsupported spec version {doc.get('version')}")
    if doc.get("schema") != schema_hash().hex():
        raise MeasurementError("spec document was authored for a different parameter schema")
    tmpl = doc["template"]
    specs = []
    for entry in doc["parameters"]:
        specs.append(
            MeasurementSpec(
                parameter_id=int(entry["id"]),
                mode=entry["mode"],
                points=tuple(int(p) for p in entry.get("points", [])),
                density_kg_m3=float(entry.get("density_kg_m3", DEFAULT_DENSITY_KG_M3)),
            )
        )
    out = MeasurementSpecSet(
        specs=tuple(specs),
        template_face_count=int(tmpl["face_count"]),
        template_face_checksum=str(tmpl["face_checksum"]),
        version=int(doc["version"]),
        extra=doc.get("extra", {}),
    )
    for s in out.specs:
        if s.mode in ("circumference-loop", "polyline", "axis-extent") and not s.points:
            raise MeasurementError(f"parameter {s.parameter_id}: missing control points")
        if s.mode == "circumference-loop" and len(s.points) < 8:
            raise MeasurementError(
                f"parameter {s.parameter_id}: circumference loop needs >= 8 points"
            )
        if s.mode == "polyline" and len(s.points) < 2:
            raise MeasurementError(f"parameter {s.parameter_id}: polyline needs >= 2 points")
    return out


def load_specs(path) -> MeasurementSpecSet:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return _specs_from_doc(doc)


def specs_from_json(data: bytes) -> MeasurementSpecSet:
    return _specs_from_doc(json.loads(data.decode()))
