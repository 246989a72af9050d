"""HTTP service exposing the reshaping pipeline.

Endpoints:

* ``GET /api/health``: liveness probe.
* ``GET /api/schema``: the 19 parameter descriptors plus the served model's
  training mean and standard deviation per parameter (slider ranges).
* ``POST /api/reshape``: flat JSON map of parameter name to value, plus the
  reserved keys ``seed`` (int) and ``format`` (``json-mesh`` or ``obj``).
  Returns the full imputed parameter set, per-parameter imputed flags, the
  re-measured achieved values and the mesh payload.

The loaded model, its prefactorized solver and the training matrix are
immutable shared state; each request only allocates its own vectors, so
concurrent requests are safe. Responses are deterministic: identical request
bodies (including the seed) produce byte-identical JSON.
"""
from __future__ import annotations

import base64
import io
import logging
import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .impute import ImputationError
from .mesh import ReconstructionSolver
from .model import MappingModel
from .schema import (
    N_PARAMETERS,
    PARAMETER_KEYS,
    PARAMETERS,
    ParameterVector,
    SchemaError,
)
from .synthesize import ReshapeConfig, SynthesisError, reshape

logger = logging.getLogger("bodyreshape.service")

RESERVED_KEYS = {"seed", "format"}
FORMATS = ("json-mesh", "obj")


def _mesh_payload(mesh, fmt: str) -> dict:
    if fmt == "obj":
        buf = io.StringIO()
        buf.write(f"# {mesh.n_vertices} vertices, {mesh.n_faces} faces\n")
        for x, y, z in mesh.vertices:
            buf.write(f"v {x:.6f} {y:.6f} {z:.6f}\n")
        for a, b, c in mesh.faces:
            buf.write(f"f {a + 1} {b + 1} {c + 1}\n")
        return {"obj_base64": base64.b64encode(buf.getvalue().encode()).decode()}
    return {
        "vertices": [float(v) for v in mesh.vertices.ravel()],
        "faces": [int(f) for f in mesh.faces.ravel()],
    }


def create_app(
    model: MappingModel,
    data: np.ndarray | None = None,
    static_dir: str | None = None,
    default_seed: int = 0,
) -> FastAPI:
    app = FastAPI(title="bodyreshape", docs_url=None, redoc_url=None)
    training = data if data is not None else model.training_data
    # warm the factorization so the first request does not pay for it
    ReconstructionSolver(model.mean_mesh, 0)

    schema_payload = {
        "parameters": [
            {
                "id": p.id,
                "key": p.key,
                "name": p.name,
                "kind": p.kind,
                "unit": p.unit,
                "mean": float(model.means[p.id - 1]),
                "std": float(model.stds[p.id - 1]),
            }
            for p in PARAMETERS
        ],
        "faces": int(model.n_faces),
        "k": int(model.k),
    }

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/api/schema")
    def schema() -> JSONResponse:
        return JSONResponse(content=schema_payload)

    @app.post("/api/reshape")
    async def reshape_endpoint(request: Request) -> Response:
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"errors": {"_body": "invalid JSON"}})
        if not isinstance(body, dict):
            return JSONResponse(
                status_code=400, content={"errors": {"_body": "expected a JSON object"}}
            )

        errors: dict[str, str] = {}
        seed = default_seed
        fmt = "json-mesh"
        params: dict[str, float] = {}
        for key, value in body.items():
            if key == "seed":
                if not isinstance(value, int) or isinstance(value, bool):
                    errors["seed"] = "seed must be an integer"
                else:
                    seed = value
            elif key == "format":
                if value not in FORMATS:
                    errors["format"] = f"format must be one of {', '.join(FORMATS)}"
                else:
                    fmt = value
            elif key not in PARAMETER_KEYS:
                errors[key] = (
                    "unknown parameter; valid names: " + ", ".join(PARAMETER_KEYS)
                )
            elif not isinstance(value, (int, float)) or isinstance(value, bool):
                errors[key] = "value must be a number"
            else:
                params[key] = float(value)
        if not params and not errors:
            errors["_body"] = "at least one parameter required"
        if errors:
            return JSONResponse(status_code=400, content={"errors": errors})

        try:
            partial = ParameterVector.from_dict(params)
        except SchemaError as exc:
            return JSONResponse(status_code=400, content={"errors": {"_body": str(exc)}})

        try:
            result = reshape(model, partial, data=training, config=ReshapeConfig(seed=seed))
        except (SchemaError, ImputationError, SynthesisError) as exc:
            return JSONResponse(status_code=400, content={"errors": {"_body": str(exc)}})
        except Exception:
            incident = uuid.uuid4().hex
            logger.exception("reshape failed (incident %s)", incident)
            return JSONResponse(
                status_code=500, content={"error": "internal error", "id": incident}
            )

        content = {
            "parameters": {
                k: float(result.parameters.values[i]) for i, k in enumerate(PARAMETER_KEYS)
            },
            "imputed": {k: bool(result.imputed[i]) for i, k in enumerate(PARAMETER_KEYS)},
            "achieved": (
                {k: float(result.achieved.values[i]) for i, k in enumerate(PARAMETER_KEYS)}
                if result.achieved is not None
                else None
            ),
            "seed": seed,
            "model": {"k": int(model.k), "faces": int(model.n_faces)},
            "mesh": _mesh_payload(result.mesh, fmt),
        }
        return JSONResponse(content=content)

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
