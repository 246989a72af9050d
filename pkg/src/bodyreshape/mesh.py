"""Triangle meshes, OBJ I/O, per-facet deformation gradients and reconstruction.

All geometry is in millimeters. Meshes are immutable after construction and a
whole dataset shares one face array (fixed topology), so deformations of any
body can be expressed per facet against a common reference.

The per-facet frame is the 3x3 matrix ``V = [v2-v1, v3-v1, v4-v1]`` whose
third column is a synthetic fourth vertex offset along the unit normal,
scaled to sqrt(2 * area). The deformation gradient of a facet between two
meshes is ``Q = V_target @ inv(V_reference)``. Reconstruction inverts that
relation in the least-squares sense: given target gradients for every facet,
it solves one sparse linear system for vertex positions, with the synthetic
fourth vertices kept as free auxiliary unknowns and a single anchored vertex
eliminating the translational null space.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as sparse_linalg

MIN_FACE_AREA_MM2 = 1e-8


class MeshError(ValueError):
    """Invalid mesh topology or geometry."""


class ObjParseError(MeshError):
    """Malformed OBJ content; message names the offending line."""


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangle mesh: (n, 3) float64 vertices, (m, 3) int64 faces."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError("face index out of range")
        if f.size:
            degen = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degen.any():
                raise MeshError(f"face {int(np.flatnonzero(degen)[0])} repeats a vertex")
            areas = _face_areas(v, f)
            small = areas <= MIN_FACE_AREA_MM2
            if small.any():
                raise MeshError(
                    f"degenerate face {int(np.flatnonzero(small)[0])}: "
                    f"area {areas[small].min():.3e} mm^2"
                )
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        return TriangleMesh(vertices, self.faces)

    def same_topology(self, other: "TriangleMesh") -> bool:
        return self.faces.shape == other.faces.shape and bool(
            np.array_equal(self.faces, other.faces)
        )


@dataclass(frozen=True)
class AnchorConstraint:
    """Pins one vertex to an exact position, fixing global translation."""

    vertex_index: int
    position: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64).reshape(3)
        )


def _face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    e1 = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    e2 = vertices[faces[:, 2]] - vertices[faces[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def load_mesh(path) -> TriangleMesh:
    """Parse an ASCII Wavefront OBJ file with triangular faces.

    Only ``v`` and ``f`` records contribute; normals, texture coordinates,
    groups and comments are ignored. Face indices are 1-based. Any
    non-triangular face, malformed number or out-of-range index raises
    :class:`ObjParseError` naming the line.
    """
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ObjParseError(f"vertex with fewer than 3 coordinates at line {lineno}")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError:
                    raise ObjParseError(f"malformed vertex coordinate at line {lineno}")
            elif tag == "f":
                idx = parts[1:]
                if len(idx) != 3:
                    raise ObjParseError(f"non-triangular face at line {lineno}")
                face = []
                for item in idx:
                    head = item.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise ObjParseError(f"malformed face index at line {lineno}")
                    if i <= 0:
                        raise ObjParseError(f"non-positive face index at line {lineno}")
                    face.append(i - 1)
                faces.append(face)
            # vn / vt / s / o / g / usemtl / mtllib are irrelevant here
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and f.max() >= len(vertices):
        raise ObjParseError(f"face index {int(f.max()) + 1} exceeds vertex count {len(vertices)}")
    try:
        return TriangleMesh(np.asarray(vertices, dtype=np.float64).reshape(-1, 3), f)
    except MeshError as exc:
        raise ObjParseError(f"invalid mesh in {path}: {exc}")


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write an ASCII OBJ. Coordinates keep 6 decimals (1e-6 mm round trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {mesh.n_vertices} vertices, {mesh.n_faces} faces\n")
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.6f} {y:.6f} {z:.6f}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def facet_frames(mesh: TriangleMesh) -> np.ndarray:
    """All per-facet frames, shape (m, 3, 3); columns are edge1, edge2, normal.

    The normal column is the unit normal scaled by sqrt(2 * area), which keeps
    the frame well conditioned even for thin triangles.
    """
    v = mesh.vertices
    f = mesh.faces
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    n = np.cross(e1, e2)
    ln = np.linalg.norm(n, axis=1)
    small = ln <= 2.0 * MIN_FACE_AREA_MM2
    if small.any():
        raise MeshError(f"degenerate facet {int(np.flatnonzero(small)[0])}")
    n = n / np.sqrt(ln)[:, None]
    frames = np.empty((len(f), 3, 3))
    frames[:, :, 0] = e1
    frames[:, :, 1] = e2
    frames[:, :, 2] = n
    return frames


def facet_frame(mesh: TriangleMesh, facet: int) -> np.ndarray:
    """Frame of a single facet (see :func:`facet_frames`)."""
    if not 0 <= facet < mesh.n_faces:
        raise MeshError(f"facet index {facet} out of range")
    v = mesh.vertices
    i, j, k = mesh.faces[facet]
    e1 = v[j] - v[i]
    e2 = v[k] - v[i]
    n = np.cross(e1, e2)
    ln = np.linalg.norm(n)
    if ln <= 2.0 * MIN_FACE_AREA_MM2:
        raise MeshError(f"degenerate facet {facet}")
    return np.column_stack((e1, e2, n / np.sqrt(ln)))


def deformation_gradients(reference: TriangleMesh, target: TriangleMesh) -> np.ndarray:
    """Per-facet 3x3 gradients taking reference facets onto target facets.

    Returns shape (m, 3, 3) where entry f is
    ``facet_frames(target)[f] @ inv(facet_frames(reference)[f])``.
    """
    if not reference.same_topology(target):
        raise MeshError("reference and target meshes do not share topology")
    ref_inv = np.linalg.inv(facet_frames(reference))
    return facet_frames(target) @ ref_inv


def mesh_volume(mesh: TriangleMesh) -> float:
    """Signed volume in mm^3 (positive for consistently outward orientation).

    Open meshes simply return the signed tetrahedron sum; closure is the
    caller's concern (see :func:`is_closed`).
    """
    v = mesh.vertices
    f = mesh.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    return float(np.einsum("ij,ij->i", np.cross(a, b), c).sum() / 6.0)


def is_closed(mesh: TriangleMesh) -> bool:
    """True when every edge is shared by exactly two oppositely wound faces."""
    f = mesh.faces
    half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    order = np.lexsort((half[:, 1], half[:, 0]))
    half = half[order]
    # each directed edge must appear exactly once, and its reverse exactly once
    if len(half) != len(np.unique(half, axis=0)):
        return False
    rev = half[:, ::-1]
    merged = np.concatenate([half, rev])
    uniq, counts = np.unique(merged, axis=0, return_counts=True)
    return bool((counts == 2).all()) and len(uniq) * 2 == len(merged)


def vertex_components(mesh: TriangleMesh) -> tuple[int, np.ndarray]:
    """Connected components of the vertex-edge graph: (count, labels)."""
    f = mesh.faces
    rows = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    cols = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    data = np.ones(len(rows), dtype=np.int8)
    adj = sparse.coo_matrix((data, (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices))
    return csgraph.connected_components(adj, directed=False)


class ReconstructionSolver:
    """Prefactorized least-squares solver mapping facet gradients to vertices.

    The system matrix depends only on the reference mesh and the anchored
    vertex index, so one factorization serves every reconstruction against
    the same template. Instances are immutable after construction; ``solve``
    is serialized with an internal lock because the SuperLU handle is not
    reentrant, while right-hand sides are per-call locals.
    """

    def __init__(self, reference: TriangleMesh, anchor_index: int):
        if not 0 <= anchor_index < reference.n_vertices:
            raise MeshError(f"anchor index {anchor_index} out of range")
        ncomp, labels = vertex_components(reference)
        if ncomp > 1:
            sizes = np.bincount(labels)
            detail = ", ".join(
                f"component {c}: {sizes[c]} vertices" for c in range(ncomp)
            )
            raise MeshError(
                f"mesh has {ncomp} connected components and a single anchor "
                f"cannot fix them all ({detail})"
            )
        self.reference = reference
        self.anchor_index = int(anchor_index)
        self._lock = threading.Lock()

        m = reference.n_faces
        nv = reference.n_vertices
        w = np.linalg.inv(facet_frames(reference))  # (m, 3, 3)
        f = reference.faces

        # Unknowns per axis: nv vertex coordinates plus one synthetic fourth
        # vertex per facet. Row (f, b) of A expresses entry (axis, b) of
        # V_target(f) @ w[f]; the same A serves all three axes.
        rows = np.repeat(np.arange(3 * m), 4)
        cols = np.empty((m, 3, 4), dtype=np.int64)
        cols[:, :, 0] = f[:, 0][:, None]
        cols[:, :, 1] = f[:, 1][:, None]
        cols[:, :, 2] = f[:, 2][:, None]
        cols[:, :, 3] = (nv + np.arange(m))[:, None]
        data = np.empty((m, 3, 4))
        data[:, :, 0] = -w.sum(axis=1)
        data[:, :, 1] = w[:, 0, :]
        data[:, :, 2] = w[:, 1, :]
        data[:, :, 3] = w[:, 2, :]
        a = sparse.coo_matrix(
            (data.ravel(), (rows, cols.ravel())), shape=(3 * m, nv + m)
        ).tocsc()

        keep = np.ones(nv + m, dtype=bool)
        keep[anchor_index] = False
        self._anchor_col = a[:, [anchor_index]]
        self._a = a[:, keep]
        gram = (self._a.T @ self._a).tocsc()
        self._lu = sparse_linalg.splu(gram)
        self._keep = keep

    def solve(self, gradients: np.ndarray, anchor_position: np.ndarray) -> np.ndarray:
        """Vertex positions (n, 3) minimizing the stacked frame residual."""
        m = self.reference.n_faces
        gradients = np.asarray(gradients, dtype=np.float64)
        if gradients.shape != (m, 3, 3):
            raise MeshError(
                f"expected {m} gradients of shape 3x3, got {gradients.shape}"
            )
        anchor_position = np.asarray(anchor_position, dtype=np.float64).reshape(3)
        nv = self.reference.n_vertices
        out = np.empty((nv + m, 3))
        anchor_dense = self._anchor_col.toarray().ravel()
        with self._lock:
            for axis in range(3):
                rhs = gradients[:, axis, :].ravel() - anchor_dense * anchor_position[axis]
                atb = self._a.T @ rhs
                x = self._lu.solve(atb)
                full = np.empty(nv + m)
                full[self._keep] = x
                full[self.anchor_index] = anchor_position[axis]
                out[:, axis] = full
                # normal-equation residual check (relative)
                gram_x = self._a.T @ (self._a @ x)
                denom = float(np.linalg.norm(atb)) or 1.0
                rel = float(np.linalg.norm(gram_x - atb)) / denom
                if rel > 1e-8:
                    raise MeshError(
                        f"reconstruction solve did not converge: relative normal "
                        f"residual {rel:.3e} on axis {axis}"
                    )
        return out[:nv]


_SOLVER_CACHE: dict[tuple, ReconstructionSolver] = {}
_SOLVER_CACHE_MAX = 8


def _cached_solver(reference: TriangleMesh, anchor_index: int) -> ReconstructionSolver:
    import hashlib

    key = (
        hashlib.sha256(reference.vertices.tobytes()).digest(),
        hashlib.sha256(reference.faces.tobytes()).digest(),
        anchor_index,
    )
    solver = _SOLVER_CACHE.get(key)
    if solver is None:
        solver = ReconstructionSolver(reference, anchor_index)
        if len(_SOLVER_CACHE) >= _SOLVER_CACHE_MAX:
            _SOLVER_CACHE.pop(next(iter(_SOLVER_CACHE)))
        _SOLVER_CACHE[key] = solver
    return solver


def reconstruct_vertices(
    reference: TriangleMesh,
    gradients: np.ndarray,
    anchor: AnchorConstraint,
) -> TriangleMesh:
    """Rebuild a mesh whose facet gradients best match ``gradients``.

    Solves the sparse normal equations once per (reference, anchor index)
    pair and caches the factorization, so repeated reconstructions against
    one template only pay for the solve.
    """
    solver = _cached_solver(reference, anchor.vertex_index)
    vertices = solver.solve(gradients, anchor.position)
    return reference.with_vertices(vertices)
