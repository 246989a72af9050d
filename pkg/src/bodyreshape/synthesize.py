"""Online synthesis: impute, predict per-facet deformations, rebuild the mesh.

Prediction is affine in the parameters: each facet gathers its masked,
z-scored parameter entries, appends 1, and multiplies by its mapping matrix.
Facets whose mask excludes a parameter are bit-for-bit unaffected by edits to
it, which is what keeps single-parameter edits local at the deformation
level. The reconstruction solve couples all vertices, so vertex positions are
only approximately local; that is inherent to the least-squares formulation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .impute import ImputerConfig, impute
from .measure import measure
from .mesh import AnchorConstraint, TriangleMesh, reconstruct_vertices
from .model import GlobalModel, MappingModel
from .schema import (
    N_PARAMETERS,
    PARAMETER_KEYS,
    ParameterVector,
    SchemaError,
    parameter_index,
    value_cap,
)


class SynthesisError(ValueError):
    pass


@dataclass(frozen=True)
class ReshapeConfig:
    seed: int = 0
    imputer: ImputerConfig = field(default_factory=ImputerConfig)
    floor_align: bool = True


@dataclass
class ReshapeResult:
    mesh: TriangleMesh
    parameters: ParameterVector  # the full 19-entry input after imputation
    imputed: np.ndarray  # (19,) bool, True where the value was filled in
    achieved: ParameterVector | None  # re-measured from the output mesh


def _check_complete(params: ParameterVector) -> np.ndarray:
    if not params.complete:
        missing = [PARAMETER_KEYS[i] for i in np.flatnonzero(~params.present)]
        raise SynthesisError(f"parameters missing: {', '.join(missing)}")
    if not np.isfinite(params.values).all():
        raise SynthesisError("parameters contain non-finite values")
    return params.values


def predict_deformations(model: MappingModel | GlobalModel, params: ParameterVector) -> np.ndarray:
    """Per-facet 3x3 deformation gradients for a complete parameter vector."""
    values = _check_complete(params)
    z = (values - model.means) / model.stds
    if isinstance(model, GlobalModel):
        coeffs = np.append(z, 1.0) @ model.coef
        stacked = model.deform_mean + model.basis @ coeffs
        out = stacked.reshape(model.mean_mesh.n_faces, 3, 3)
    else:
        gathered = z[model.mask_indices()]  # (m, k)
        aug = np.concatenate([gathered, np.ones((len(gathered), 1))], axis=1)
        out = np.einsum("fij,fj->fi", model.matrices, aug).reshape(-1, 3, 3)
    if not np.isfinite(out).all():
        raise SynthesisError("predicted deformations are non-finite (corrupt model?)")
    return out


def _rebuild(model: MappingModel | GlobalModel, deformations: np.ndarray, floor_align: bool) -> TriangleMesh:
    anchor = AnchorConstraint(0, model.mean_mesh.vertices[0])
    mesh = reconstruct_vertices(model.mean_mesh, deformations, anchor)
    if floor_align:
        verts = mesh.vertices.copy()
        verts[:, 2] -= verts[:, 2].min()
        mesh = mesh.with_vertices(verts)
    return mesh


def _result(
    model: MappingModel | GlobalModel,
    full: ParameterVector,
    imputed: np.ndarray,
    config: ReshapeConfig,
) -> ReshapeResult:
    deformations = predict_deformations(model, full)
    mesh = _rebuild(model, deformations, config.floor_align)
    achieved = None
    specs = getattr(model, "specs", None)
    if specs is not None:
        achieved = measure(mesh, specs)
    return ReshapeResult(mesh=mesh, parameters=full, imputed=imputed, achieved=achieved)


def reshape(
    model: MappingModel,
    partial: ParameterVector,
    data: np.ndarray | None = None,
    config: ReshapeConfig = ReshapeConfig(),
) -> ReshapeResult:
    """Impute missing parameters, predict deformations, rebuild the mesh.

    ``data`` is the training parameter matrix used by the imputer; when None,
    the matrix embedded in the model file is used.
    """
    if not partial.present.any():
        raise SynthesisError("at least one parameter must be provided")
    partial.check_ranges()
    if data is None:
        data = model.training_data
    if data is None and not partial.complete:
        raise SynthesisError(
            "model has no embedded training matrix; pass one to impute missing values"
        )
    imputed = ~partial.present
    if partial.complete:
        full = ParameterVector(partial.values.copy(), partial.present.copy())
    else:
        imp_config = ImputerConfig(
            method=config.imputer.method,
            sweeps=config.imputer.sweeps,
            chains=config.imputer.chains,
            seed=config.seed,
            knn_k=config.imputer.knn_k,
        )
        full = impute(partial, data, imp_config)
    return _result(model, full, imputed, config)


def edit_from_mean(
    model: MappingModel | GlobalModel,
    parameter: int | str,
    delta: float | None = None,
    sigmas: float | None = None,
    config: ReshapeConfig = ReshapeConfig(),
) -> ReshapeResult:
    """Reshape the training-mean body with one parameter adjusted.

    The adjustment is either an absolute delta (mm, or kg for weight) or a
    multiple of the parameter's training standard deviation. No imputation
    happens; the other 18 entries stay at their training means.
    """
    if isinstance(parameter, str):
        idx = parameter_index(parameter)
    else:
        if not 1 <= parameter <= N_PARAMETERS:
            raise SchemaError(f"parameter id {parameter} must be in 1..{N_PARAMETERS}")
        idx = parameter - 1
    if (delta is None) == (sigmas is None):
        raise SynthesisError("specify exactly one of delta or sigmas")
    amount = float(delta) if delta is not None else float(sigmas) * float(model.stds[idx])
    values = model.means.copy()
    values[idx] += amount
    if not 0.0 < values[idx] < value_cap(idx):
        raise SynthesisError(
            f"edited value {values[idx]:.1f} for {PARAMETER_KEYS[idx]} is outside "
            f"the sane range (0, {value_cap(idx)})"
        )
    full = ParameterVector(values, np.ones(N_PARAMETERS, dtype=bool))
    return _result(model, full, np.zeros(N_PARAMETERS, dtype=bool), config)
