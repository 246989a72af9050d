"""Offline training: per-facet feature selection and mapping matrices.

For each facet, the determinants of its deformation gradients across the
dataset form a scalar target describing how much that facet's local volume
responds to body variation. Recursive feature elimination repeatedly fits a
linear model of that target on the z-scored parameter columns and prunes the
weakest column until ``k`` remain; the surviving columns become the facet's
relevance mask. A 9x(k+1) mapping matrix is then fit from the masked,
z-scored parameters (plus an intercept) to the flattened gradient entries.

A global baseline is trained for comparison: PCA over the stacked per-body
deformation vectors plus one linear regression from all 19 parameters to the
component coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measure import MeasurementSpecSet, extract_dataset
from .mesh import TriangleMesh, deformation_gradients
from .model import GlobalModel, MappingModel
from .schema import N_PARAMETERS, PARAMETER_KEYS

DUPLICATE_CORR_TOL = 1e-10
MIN_TRAINING_MESHES = 20


class TrainingError(ValueError):
    pass


def training_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard deviations; constant columns get std 1.

    A constant column carries no information (its z-scores are all zero) but
    must not poison the scaling, so its std is replaced by 1. Degenerate
    datasets of identical bodies then still train to intercept-only maps.
    """
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > 0.0, stds, 1.0)
    return means, stds


def zscore(x: np.ndarray, stats: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    means, stds = stats
    return (x - means) / stds


def _check_duplicate_columns(z: np.ndarray) -> None:
    """Reject pairs of perfectly correlated (duplicate up to affine) columns."""
    norms = np.linalg.norm(z, axis=0)
    active = norms > 0
    if active.sum() < 2:
        return
    zn = z[:, active] / norms[active]
    corr = zn.T @ zn
    ii, jj = np.triu_indices(len(corr), k=1)
    dup = np.abs(np.abs(corr[ii, jj]) - 1.0) < DUPLICATE_CORR_TOL
    if dup.any():
        act_idx = np.flatnonzero(active)
        pairs = [
            f"{PARAMETER_KEYS[act_idx[a]]}/{PARAMETER_KEYS[act_idx[b]]}"
            for a, b in zip(ii[dup], jj[dup])
        ]
        raise TrainingError(
            "parameter matrix is rank deficient, duplicate columns: " + ", ".join(pairs)
        )


def facet_targets(gradient_sets: np.ndarray, facet: int) -> np.ndarray:
    """Determinant of each body's gradient at one facet, shape (n,)."""
    gradient_sets = np.asarray(gradient_sets, dtype=np.float64)
    if gradient_sets.ndim != 4 or gradient_sets.shape[2:] != (3, 3):
        raise TrainingError("gradient_sets must have shape (n, m, 3, 3)")
    if len(gradient_sets) < 2:
        raise TrainingError("need at least 2 bodies")
    if not 0 <= facet < gradient_sets.shape[1]:
        raise TrainingError(f"facet index {facet} out of range")
    dets = np.linalg.det(gradient_sets[:, facet])
    if not np.isfinite(dets).all():
        raise TrainingError(f"non-finite determinant at facet {facet}")
    return dets


def _rfe_on_gram(
    gram: np.ndarray, xty: np.ndarray, k: int
) -> np.ndarray:
    """RFE over normal equations; gram/xty include the trailing intercept."""
    surviving = list(range(N_PARAMETERS))
    while len(surviving) > k:
        cols = surviving + [N_PARAMETERS]
        sub = gram[np.ix_(cols, cols)]
        rhs = xty[cols]
        coef, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        weights = np.abs(coef[:-1])
        weakest = weights.min()
        # remove the largest schema id among the (usually single) minimum
        drop_pos = max(i for i, w in enumerate(weights) if w == weakest)
        surviving.pop(drop_pos)
    mask = np.zeros(N_PARAMETERS, dtype=bool)
    mask[surviving] = True
    return mask


def rfe_select(
    x: np.ndarray,
    y: np.ndarray,
    k: int,
    stats: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Recursive feature elimination on a single facet's determinant targets.

    Fits least squares (with intercept) of ``y`` on the surviving z-scored
    columns, drops the column with the smallest absolute weight (ties go to
    the larger schema id) and repeats until ``k`` columns remain. Returns a
    19-entry boolean mask.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[1] != N_PARAMETERS:
        raise TrainingError(f"parameter matrix must be (n, {N_PARAMETERS})")
    if len(x) != len(y):
        raise TrainingError("X and Y row counts differ")
    if not 1 <= k <= N_PARAMETERS:
        raise TrainingError(f"k={k} must be in 1..{N_PARAMETERS}")
    if len(x) <= N_PARAMETERS:
        raise TrainingError(f"need more than {N_PARAMETERS} rows, got {len(x)}")
    if not np.isfinite(y).all():
        raise TrainingError("targets contain non-finite entries")
    if stats is None:
        stats = training_stats(x)
    z = zscore(x, stats)
    _check_duplicate_columns(z)
    design = np.column_stack([z, np.ones(len(z))])
    gram = design.T @ design
    xty = design.T @ y
    return _rfe_on_gram(gram, xty, k)


def fit_facet_mapping(
    x: np.ndarray,
    mask: np.ndarray,
    facet_gradients: np.ndarray,
    stats: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Least-squares map from masked z-scored parameters to gradient entries.

    ``facet_gradients`` is (n, 9), rows being row-major flattened 3x3
    gradients. Returns a 9x(k+1) matrix whose last column is the intercept.
    """
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool).reshape(N_PARAMETERS)
    g = np.asarray(facet_gradients, dtype=np.float64)
    if g.ndim != 2 or g.shape[1] != 9:
        raise TrainingError("facet gradients must be (n, 9)")
    k = int(mask.sum())
    if k < 1:
        raise TrainingError("mask selects no parameters")
    if len(x) <= k + 1:
        raise TrainingError(
            f"need more than k+1={k + 1} rows to fit a 9x{k + 1} mapping, got {len(x)}"
        )
    if stats is None:
        stats = training_stats(x)
    z = zscore(x, stats)[:, mask]
    design = np.column_stack([z, np.ones(len(z))])
    coef, *_ = np.linalg.lstsq(design, g, rcond=None)
    return coef.T  # (9, k+1)


@dataclass(frozen=True)
class TrainOptions:
    seed: int | None = None
    embed_data: bool = True
    embed_specs: bool = True
    progress: bool = False


def dataset_gradients(meshes: list[TriangleMesh], mean_mesh: TriangleMesh) -> np.ndarray:
    """Deformation gradients of every body against the mean, (n, m, 3, 3)."""
    out = np.empty((len(meshes), mean_mesh.n_faces, 3, 3))
    for i, mesh in enumerate(meshes):
        out[i] = deformation_gradients(mean_mesh, mesh)
    return out


def mean_mesh_of(meshes: list[TriangleMesh]) -> TriangleMesh:
    first = meshes[0]
    for i, mesh in enumerate(meshes[1:], start=1):
        if not first.same_topology(mesh):
            raise TrainingError(f"mesh {i} does not share the template topology")
    stacked = np.stack([m.vertices for m in meshes])
    return first.with_vertices(stacked.mean(axis=0))


def train_model(
    meshes: list[TriangleMesh],
    specs: MeasurementSpecSet,
    k: int = 9,
    options: TrainOptions = TrainOptions(),
) -> MappingModel:
    """Train the per-facet local mapping model on a fixed-topology dataset."""
    if len(meshes) < MIN_TRAINING_MESHES:
        raise TrainingError(f"need >= {MIN_TRAINING_MESHES} meshes, got {len(meshes)}")
    mean_mesh = mean_mesh_of(meshes)
    x = extract_dataset(meshes, specs)
    grads = dataset_gradients(meshes, mean_mesh)
    n, m = grads.shape[:2]
    stats = training_stats(x)
    z = zscore(x, stats)
    _check_duplicate_columns(z)

    design = np.column_stack([z, np.ones(n)])
    gram = design.T @ design
    flat = grads.reshape(n, m, 9)
    dets = np.linalg.det(grads)
    if not np.isfinite(dets).all():
        bad = int(np.flatnonzero(~np.isfinite(dets).all(axis=0))[0])
        raise TrainingError(f"non-finite determinant targets at facet {bad}")

    masks = np.zeros((m, N_PARAMETERS), dtype=bool)
    mats = np.empty((m, 9, k + 1))
    xt = design.T  # (20, n)
    for f in range(m):
        xty = xt @ dets[:, f]
        mask = _rfe_on_gram(gram, xty, k)
        masks[f] = mask
        cols = np.append(np.flatnonzero(mask), N_PARAMETERS)
        sub = gram[np.ix_(cols, cols)]
        rhs = design[:, cols].T @ flat[:, f, :]
        coef, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        mats[f] = coef.T
        if options.progress and f % 500 == 0:
            print(f"  facet {f}/{m}")

    import hashlib

    checksum = hashlib.sha256(x.tobytes() + mean_mesh.faces.tobytes()).hexdigest()
    return MappingModel(
        mean_mesh=mean_mesh,
        masks=masks,
        matrices=mats,
        means=stats[0],
        stds=stats[1],
        k=k,
        specs=specs if options.embed_specs else None,
        training_data=x if options.embed_data else None,
        metadata={
            "n": n,
            "k": k,
            "seed": options.seed,
            "dataset_checksum": checksum,
        },
    )


def train_global_baseline(
    meshes: list[TriangleMesh],
    specs: MeasurementSpecSet,
    d: int = 19,
) -> GlobalModel:
    """PCA over stacked deformations plus one parameters-to-coefficients fit."""
    if len(meshes) < 2:
        raise TrainingError("need at least 2 meshes")
    mean_mesh = mean_mesh_of(meshes)
    x = extract_dataset(meshes, specs)
    grads = dataset_gradients(meshes, mean_mesh)
    n, m = grads.shape[:2]
    if not 1 <= d <= min(n - 1, 9 * m):
        raise TrainingError(f"d={d} must be in 1..min(n-1, 9m)={min(n - 1, 9 * m)}")
    stacked = grads.reshape(n, 9 * m)
    deform_mean = stacked.mean(axis=0)
    centered = stacked - deform_mean
    # economy SVD: rows n << columns 9m
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:d].T  # (9m, d), orthonormal columns
    scores = centered @ basis
    stats = training_stats(x)
    design = np.column_stack([zscore(x, stats), np.ones(n)])
    coef, *_ = np.linalg.lstsq(design, scores, rcond=None)  # (20, d)
    return GlobalModel(
        mean_mesh=mean_mesh,
        basis=basis,
        deform_mean=deform_mean,
        coef=coef,
        means=stats[0],
        stds=stats[1],
        d=d,
    )
