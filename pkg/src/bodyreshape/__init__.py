"""Anthropometric 3D body reshaping toolkit.

Train per-facet linear maps from 19 body measurements to mesh deformations,
impute missing user measurements, and rebuild watertight body meshes by
sparse least squares. See the README for the CLI and HTTP service.
"""

from .impute import ImputerConfig, benchmark_imputers, impute
from .measure import (
    MeasurementSpec,
    MeasurementSpecSet,
    extract_dataset,
    load_specs,
    measure,
    save_specs,
)
from .mesh import (
    AnchorConstraint,
    MeshError,
    ObjParseError,
    ReconstructionSolver,
    TriangleMesh,
    deformation_gradients,
    facet_frame,
    facet_frames,
    is_closed,
    load_mesh,
    mesh_volume,
    reconstruct_vertices,
    save_mesh,
)
from .model import GlobalModel, MappingModel, load_global_model, load_model, save_global_model, save_model
from .schema import PARAMETERS, ParameterVector, SchemaError, schema_hash
from .synthesize import ReshapeConfig, ReshapeResult, edit_from_mean, predict_deformations, reshape
from .synthetic import GeneratorConfig, SyntheticDataset, build_template, generate, write_dataset
from .train import (
    TrainOptions,
    facet_targets,
    fit_facet_mapping,
    rfe_select,
    train_global_baseline,
    train_model,
)
from .evaluate import MaeReport, locality_report, reconstruction_mae, split_indices

__version__ = "0.1.0"
