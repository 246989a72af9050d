"""Deterministic synthetic parametric-body generator with known ground truth.

The template is a single watertight column of stacked elliptical cross
sections: a ring grid between two cap vertices, grouped into named bands
(foot, calf, knee, ..., chest, head). Bands bind the schema's measurement
names to geometry in a stylized way:

* every circumference parameter scales the cross section of one band, and is
  measured on a chord loop around that band's center ring;
* the shoulder-width parameter scales the shoulder band and is measured as a
  two-point chord across it;
* every non-height length parameter sets the vertical scale of one contiguous
  span of bands and is measured as the vertical extent between two rings
  inside that span;
* height closes the system: the head span's vertical scale is solved so the
  cap-to-cap extent equals the sampled height.

Because each scale is realized exactly and measurement loops sit on rings
with a single-band blend weight of one, the generator's planted dependencies
are recoverable from the data: outside blend bands, facets of a region move
only when that region's parameters move. On top of the parameter-driven
shape, each body gets a smooth random radial "individuality" field built from
low-frequency angular harmonics. The harmonics average out around closed
loops, so measured circumferences stay within a fraction of a percent of
their sampled targets while facet-level deformations carry substantial
variation that no parameter explains (as real bodies do).

Weight is derived, not sampled: enclosed volume times density. The returned
parameter matrix always contains the values measured from the emitted meshes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .measure import (
    DEFAULT_DENSITY_KG_M3,
    MeasurementSpec,
    MeasurementSpecSet,
    face_checksum,
    load_specs,
    measure,
    save_specs,
)
from .mesh import TriangleMesh, load_mesh, save_mesh
from .schema import N_PARAMETERS, load_parameter_csv, save_parameter_csv

X_ASPECT = 1.15
Y_ASPECT = 0.85
MIN_SEGMENTS = 8
MIN_STATURE_SCALE = 0.25
TARGET_CLIP_SIGMAS = 3.5


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class BandSpec:
    """One horizontal slab of the template column."""

    name: str
    extent: float  # template z extent, mm
    radius: float  # mean cross-section radius, mm
    parameter: int | None = None  # schema id realized by this band's girth
    width: bool = False  # parameter measured as a diameter chord, not a loop


@dataclass(frozen=True)
class SpanSpec:
    """Contiguous bands whose vertical scale one length parameter controls."""

    name: str
    bands: tuple[str, ...]
    parameter: int | None  # None marks the stature-driven remainder span


DEFAULT_BANDS: tuple[BandSpec, ...] = (
    BandSpec("foot", 60.0, 45.0),
    BandSpec("ankle", 70.0, 38.0),
    BandSpec("calf", 190.0, 55.0),
    BandSpec("knee", 90.0, 58.8, parameter=18),
    BandSpec("thigh", 250.0, 89.0, parameter=19),
    BandSpec("maximum_hip", 70.0, 147.8, parameter=12),
    BandSpec("gluteal_hip", 80.0, 151.0, parameter=6),
    BandSpec("belly", 100.0, 127.1, parameter=5),
    BandSpec("natural_waist", 100.0, 117.6, parameter=11),
    BandSpec("chest", 160.0, 143.0, parameter=4),
    BandSpec("shoulder", 70.0, 191.3, parameter=9, width=True),
    BandSpec("upper_arm", 80.0, 46.1, parameter=15),
    BandSpec("wrist", 60.0, 26.2, parameter=16),
    BandSpec("neck", 70.0, 60.4, parameter=3),
    BandSpec("head", 260.0, 90.0),
)

DEFAULT_SPANS: tuple[SpanSpec, ...] = (
    SpanSpec("legs", ("foot", "ankle", "calf", "knee", "thigh"), parameter=8),
    SpanSpec("pelvis", ("maximum_hip", "gluteal_hip"), parameter=13),
    SpanSpec("lower_torso", ("belly", "natural_waist"), parameter=10),
    SpanSpec("upper_torso", ("chest", "shoulder"), parameter=17),
    SpanSpec("arms", ("upper_arm", "wrist"), parameter=14),
    SpanSpec("neck", ("neck",), parameter=7),
    SpanSpec("head", ("head",), parameter=None),
)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-body unexplained shape variation (smooth radial harmonics)."""

    angular_modes: int = 22
    angular_amplitude: float = 0.025
    uniform_modes: int = 2
    uniform_amplitude: float = 0.002


@dataclass(frozen=True)
class SamplingSpec:
    """Factor-model correlation structure for the sampled parameters.

    Lengths load mainly on a stature factor, girths mainly on a girth factor,
    with small cross loadings; the implied correlation matrix is positive
    semidefinite by construction. Standard deviations default to fractions of
    the template's own measured values (co-designed means).
    """

    stature_loading: float = 0.85
    girth_loading: float = 0.65
    stature_cross: float = 0.25  # girths on the stature factor
    girth_cross: float = 0.10  # lengths on the girth factor
    length_std_frac: float = 0.035
    girth_std_frac: float = 0.06
    width_std_frac: float = 0.05
    stds: dict[int, float] | None = None  # explicit overrides by schema id


@dataclass(frozen=True)
class GeneratorConfig:
    count: int = 300
    seed: int = 0
    segments: int = 24
    rings: int = 52
    bands: tuple[BandSpec, ...] = DEFAULT_BANDS
    spans: tuple[SpanSpec, ...] = DEFAULT_SPANS
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    noise_scale: float = 1.0
    std_scale: float = 1.0
    density_kg_m3: float = DEFAULT_DENSITY_KG_M3


def full_resolution_config(**kwargs) -> GeneratorConfig:
    """Config at the production mesh resolution (12500 vertices, 25000 facets)."""
    return GeneratorConfig(segments=50, rings=250, **kwargs)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _allocate_rings(config: GeneratorConfig) -> list[int]:
    bands = config.bands
    mins = [3 if b.parameter is not None else 2 for b in bands]
    total_min = sum(mins)
    if config.rings < total_min:
        raise GeneratorError(
            f"rings={config.rings} too small; this band layout needs >= {total_min}"
        )
    extents = np.array([b.extent for b in bands])
    extra = config.rings - total_min
    shares = extents / extents.sum() * extra
    counts = np.floor(shares).astype(int)
    remainder = extra - counts.sum()
    # largest remainders win; ties resolved by band order
    order = np.argsort(-(shares - counts), kind="stable")
    for i in order[:remainder]:
        counts[i] += 1
    return [m + int(c) for m, c in zip(mins, counts)]


@dataclass
class SyntheticTemplate:
    """Template geometry plus everything needed to realize parameter targets."""

    config: GeneratorConfig
    mesh: TriangleMesh
    ring_z: np.ndarray  # (R,) template ring heights
    ring_weights: np.ndarray  # (R, n_bands) partition of unity
    ring_rx: np.ndarray  # (R,) template x radii
    ring_ry: np.ndarray  # (R,)
    cos_t: np.ndarray  # (segments,)
    sin_t: np.ndarray
    band_param: list[int | None]
    span_of_band: np.ndarray  # (n_bands,) span index
    span_lo: np.ndarray  # (n_spans,) template z of span bottom
    span_extent: np.ndarray
    span_param: list[int | None]
    span_meas_base: np.ndarray  # template-measured span extents
    stature_span: int
    facet_region: np.ndarray  # (m,) band index per facet
    pure_facets: np.ndarray  # (m,) bool
    specs: MeasurementSpecSet
    base_values: np.ndarray  # (19,) template measurements
    mode_freq: np.ndarray
    mode_phase: np.ndarray
    mode_kind: np.ndarray  # 0: uniform, 1: cos t, 2: sin t, 3: cos 2t, 4: sin 2t
    mode_amp: np.ndarray

    @property
    def n_bands(self) -> int:
        return len(self.config.bands)

    @property
    def height(self) -> float:
        return float(sum(b.extent for b in self.config.bands))

    def region_parameters(self) -> dict[str, tuple[int, ...]]:
        """Planted dependency list per region (band name -> schema ids)."""
        out: dict[str, tuple[int, ...]] = {}
        for b, band in enumerate(self.config.bands):
            deps: list[int] = []
            if band.parameter is not None:
                deps.append(band.parameter)
            span_pid = self.span_param[self.span_of_band[b]]
            deps.append(span_pid if span_pid is not None else 2)
            out[band.name] = tuple(dict.fromkeys(deps))
        return out

    # -- body realization ----------------------------------------------------

    def scales_from_targets(self, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(band girth scales, span vertical scales) realizing the targets."""
        targets = np.asarray(targets, dtype=np.float64).reshape(N_PARAMETERS)
        t_span = np.ones(len(self.span_param))
        solved_extent = 0.0
        for g, pid in enumerate(self.span_param):
            if pid is None:
                continue
            t_span[g] = targets[pid - 1] / self.span_meas_base[g]
            solved_extent += t_span[g] * self.span_extent[g]
        head_extent = self.span_extent[self.stature_span]
        stature = (targets[1] - solved_extent) / head_extent
        if not np.isfinite(stature) or stature <= MIN_STATURE_SCALE:
            raise GeneratorError(
                f"height target {targets[1]:.1f} is inconsistent with the span "
                f"targets (stature scale {stature:.3f})"
            )
        t_span[self.stature_span] = stature
        band_scale = np.ones(self.n_bands)
        for b, band in enumerate(self.config.bands):
            if band.parameter is not None:
                band_scale[b] = targets[band.parameter - 1] / self.base_values[band.parameter - 1]
        band_scale[self.span_of_band == self.stature_span] = stature
        if (band_scale <= 0).any() or (t_span <= 0).any():
            raise GeneratorError("parameter targets imply non-positive scales")
        return band_scale, t_span

    def _map_z(self, z: np.ndarray, t_span: np.ndarray) -> np.ndarray:
        offsets = np.concatenate([[0.0], np.cumsum(t_span * self.span_extent)])
        idx = np.clip(
            np.searchsorted(self.span_lo, z, side="right") - 1, 0, len(t_span) - 1
        )
        return offsets[idx] + t_span[idx] * (z - self.span_lo[idx])

    def _noise_field(self, coeffs: np.ndarray) -> np.ndarray:
        """Radial multiplier per (ring, segment)."""
        zt = self.ring_z / self.height
        theta = np.arctan2(self.sin_t, self.cos_t)
        axial = np.sin(
            2.0 * np.pi * self.mode_freq[:, None] * zt[None, :] + self.mode_phase[:, None]
        )  # (K, R)
        angular = np.ones((len(self.mode_kind), len(theta)))
        angular[self.mode_kind == 1] = np.cos(theta)
        angular[self.mode_kind == 2] = np.sin(theta)
        angular[self.mode_kind == 3] = np.cos(2 * theta)
        angular[self.mode_kind == 4] = np.sin(2 * theta)
        weights = coeffs * self.mode_amp * self.config.noise_scale
        return 1.0 + np.einsum("k,kr,ks->rs", weights, axial, angular)

    def body_from_targets(
        self, targets: np.ndarray, noise_coeffs: np.ndarray | None = None
    ) -> TriangleMesh:
        """Realize one body mesh from a 19-entry target vector (weight ignored)."""
        band_scale, t_span = self.scales_from_targets(targets)
        scale_r = self.ring_weights @ band_scale  # (R,)
        if noise_coeffs is None:
            rho = 1.0
        else:
            rho = self._noise_field(np.asarray(noise_coeffs, dtype=np.float64))
        x = self.ring_rx[:, None] * self.cos_t[None, :] * scale_r[:, None] * rho
        y = self.ring_ry[:, None] * self.sin_t[None, :] * scale_r[:, None] * rho
        z = np.broadcast_to(self._map_z(self.ring_z, t_span)[:, None], x.shape)
        nv = self.mesh.n_vertices
        verts = np.empty((nv, 3))
        verts[0] = (0.0, 0.0, 0.0)
        verts[1 : nv - 1, 0] = x.ravel()
        verts[1 : nv - 1, 1] = y.ravel()
        verts[1 : nv - 1, 2] = z.ravel()
        top = float(np.cumsum(t_span * self.span_extent)[-1])
        verts[nv - 1] = (0.0, 0.0, top)
        return self.mesh.with_vertices(verts)

    # -- sampling --------------------------------------------------------------

    def sampled_ids(self) -> np.ndarray:
        return np.arange(2, N_PARAMETERS + 1)

    def target_stds(self) -> np.ndarray:
        """Per-parameter sampling std (19,); weight entry is zero (derived)."""
        s = self.config.sampling
        stds = np.zeros(N_PARAMETERS)
        for b in self.config.bands:
            if b.parameter is not None:
                frac = s.width_std_frac if b.width else s.girth_std_frac
                stds[b.parameter - 1] = frac * self.base_values[b.parameter - 1]
        for pid in self.span_param:
            if pid is not None:
                stds[pid - 1] = s.length_std_frac * self.base_values[pid - 1]
        stds[1] = s.length_std_frac * self.base_values[1]  # height
        if s.stds:
            for pid, value in s.stds.items():
                stds[pid - 1] = value
        return stds * self.config.std_scale

    def correlation(self) -> np.ndarray:
        """Correlation matrix over the 18 sampled parameters (ids 2..19)."""
        s = self.config.sampling
        ids = self.sampled_ids()
        girth_ids = {b.parameter for b in self.config.bands if b.parameter is not None}
        loadings = np.zeros((len(ids), 2))
        for row, pid in enumerate(ids):
            if pid in girth_ids:
                loadings[row] = (s.stature_cross, s.girth_loading)
            else:
                loadings[row] = (s.stature_loading, s.girth_cross)
        uniq = 1.0 - (loadings**2).sum(axis=1)
        if (uniq < 0).any():
            raise GeneratorError("factor loadings exceed unit variance")
        corr = loadings @ loadings.T + np.diag(uniq)
        eigs = np.linalg.eigvalsh(corr)
        if eigs.min() < -1e-10:
            raise GeneratorError("invalid correlation matrix (not positive semidefinite)")
        return corr

    def sample_targets(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """(count, 19) target matrix; the weight column is NaN (derived)."""
        ids = self.sampled_ids()
        stds = self.target_stds()
        corr = self.correlation()
        chol = np.linalg.cholesky(corr + 1e-12 * np.eye(len(ids)))
        normals = rng.standard_normal((count, len(ids)))
        normals = np.clip(normals @ chol.T, -TARGET_CLIP_SIGMAS, TARGET_CLIP_SIGMAS)
        targets = np.full((count, N_PARAMETERS), np.nan)
        for col, pid in enumerate(ids):
            idx = pid - 1
            targets[:, idx] = self.base_values[idx] + stds[idx] * normals[:, col]
        return targets


def build_template(config: GeneratorConfig) -> SyntheticTemplate:
    if config.segments < MIN_SEGMENTS:
        raise GeneratorError(f"segments must be >= {MIN_SEGMENTS}")
    band_names = [b.name for b in config.bands]
    if len(set(band_names)) != len(band_names):
        raise GeneratorError("duplicate band names")
    span_of_band = np.full(len(config.bands), -1)
    stature_span = -1
    for g, span in enumerate(config.spans):
        if span.parameter is None:
            if stature_span >= 0:
                raise GeneratorError("exactly one span must be stature-driven (parameter None)")
            stature_span = g
        for name in span.bands:
            if name not in band_names:
                raise GeneratorError(f"span {span.name} references unknown band {name}")
            b = band_names.index(name)
            if span_of_band[b] >= 0:
                raise GeneratorError(f"band {name} appears in two spans")
            span_of_band[b] = g
    if stature_span < 0:
        raise GeneratorError("exactly one span must be stature-driven (parameter None)")
    if (span_of_band < 0).any():
        missing = [band_names[i] for i in np.flatnonzero(span_of_band < 0)]
        raise GeneratorError(f"bands not covered by any span: {', '.join(missing)}")
    # spans must be contiguous, bottom to top
    if not (np.diff(span_of_band) >= 0).all():
        raise GeneratorError("spans must cover contiguous bands in bottom-up order")

    ring_counts = _allocate_rings(config)
    extents = np.array([b.extent for b in config.bands])
    band_lo = np.concatenate([[0.0], np.cumsum(extents)[:-1]])
    band_hi = band_lo + extents

    ring_z = []
    ring_band = []
    for b, count in enumerate(ring_counts):
        cell = extents[b] / count
        for i in range(count):
            ring_z.append(band_lo[b] + cell * (i + 0.5))
            ring_band.append(b)
    ring_z = np.asarray(ring_z)
    ring_band = np.asarray(ring_band)
    n_rings = len(ring_z)

    # partition-of-unity band weights via smoothstep ramps at internal boundaries
    boundaries = band_hi[:-1]
    widths = np.empty(len(boundaries))
    for j in range(len(boundaries)):
        cell_lo = extents[j] / ring_counts[j]
        cell_hi = extents[j + 1] / ring_counts[j + 1]
        widths[j] = 0.9 * min(cell_lo, cell_hi)
    ramps = np.column_stack(
        [np.ones(n_rings)]
        + [_smoothstep((ring_z - (boundaries[j] - widths[j])) / (2 * widths[j])) for j in range(len(boundaries))]
        + [np.zeros(n_rings)]
    )
    ring_weights = ramps[:, :-1] - ramps[:, 1:]  # (R, n_bands)

    # template radius profile: blended band radii, elliptical cross sections
    radii = np.array([b.radius for b in config.bands])
    ring_r = ring_weights @ radii
    ring_rx = ring_r * X_ASPECT
    ring_ry = ring_r * Y_ASPECT

    ns = config.segments
    theta = 2.0 * np.pi * np.arange(ns) / ns
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)

    height = float(extents.sum())
    nv = n_rings * ns + 2
    verts = np.empty((nv, 3))
    verts[0] = (0.0, 0.0, 0.0)
    verts[1 : nv - 1, 0] = (ring_rx[:, None] * cos_t[None, :]).ravel()
    verts[1 : nv - 1, 1] = (ring_ry[:, None] * sin_t[None, :]).ravel()
    verts[1 : nv - 1, 2] = np.repeat(ring_z, ns)
    verts[nv - 1] = (0.0, 0.0, height)

    def ring_vertex(r: int, s: int) -> int:
        return 1 + r * ns + (s % ns)

    faces = []
    for s in range(ns):
        faces.append((0, ring_vertex(0, s + 1), ring_vertex(0, s)))
    for r in range(n_rings - 1):
        for s in range(ns):
            a = ring_vertex(r, s)
            b2 = ring_vertex(r, s + 1)
            c = ring_vertex(r + 1, s + 1)
            d = ring_vertex(r + 1, s)
            faces.append((a, b2, c))
            faces.append((a, c, d))
    for s in range(ns):
        faces.append((nv - 1, ring_vertex(n_rings - 1, s), ring_vertex(n_rings - 1, s + 1)))
    mesh = TriangleMesh(verts, np.asarray(faces, dtype=np.int64))

    # region assignment by facet centroid height; purity by vertex band weights
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    facet_region = np.clip(
        np.searchsorted(band_lo, centroids[:, 2], side="right") - 1, 0, len(config.bands) - 1
    )
    vertex_pure = np.zeros(nv, dtype=bool)
    vertex_pure[0] = True
    vertex_pure[nv - 1] = True
    pure_ring = np.isclose(ring_weights.max(axis=1), 1.0, atol=1e-12)
    vertex_pure[1 : nv - 1] = np.repeat(pure_ring, ns)
    pure_facets = vertex_pure[mesh.faces].all(axis=1)

    # spans
    n_spans = len(config.spans)
    span_lo = np.empty(n_spans)
    span_extent = np.empty(n_spans)
    for g in range(n_spans):
        members = np.flatnonzero(span_of_band == g)
        span_lo[g] = band_lo[members[0]]
        span_extent[g] = extents[members].sum()
    span_param = [s.parameter for s in config.spans]

    # measurement specs, co-designed with the template
    rings_of_band = [np.flatnonzero(ring_band == b) for b in range(len(config.bands))]
    specs: list[MeasurementSpec] = []
    specs.append(MeasurementSpec(1, "volume-weight", density_kg_m3=config.density_kg_m3))
    specs.append(MeasurementSpec(2, "axis-extent", points=(0, nv - 1)))
    for b, band in enumerate(config.bands):
        if band.parameter is None:
            continue
        mid = rings_of_band[b][len(rings_of_band[b]) // 2]
        ring_ids = tuple(ring_vertex(mid, s) for s in range(ns))
        if band.width:
            specs.append(
                MeasurementSpec(
                    band.parameter, "polyline", points=(ring_vertex(mid, 0), ring_vertex(mid, ns // 2))
                )
            )
        else:
            specs.append(MeasurementSpec(band.parameter, "circumference-loop", points=ring_ids))
    span_ring_pairs = {}
    for g, span in enumerate(config.spans):
        members = np.flatnonzero(span_of_band == g)
        bottom_ring = rings_of_band[members[0]][0]
        top_ring = rings_of_band[members[-1]][-1]
        span_ring_pairs[g] = (bottom_ring, top_ring)
        if span.parameter is not None:
            pts = tuple(ring_vertex(bottom_ring, s) for s in range(ns)) + tuple(
                ring_vertex(top_ring, s) for s in range(ns)
            )
            specs.append(MeasurementSpec(span.parameter, "axis-extent", points=pts))
    spec_set = MeasurementSpecSet(
        specs=tuple(specs),
        template_face_count=mesh.n_faces,
        template_face_checksum=face_checksum(mesh.faces),
        extra={"generator": {"segments": ns, "rings": int(n_rings)}},
    )

    base_values = measure(mesh, spec_set).values
    span_meas_base = np.array(
        [ring_z[span_ring_pairs[g][1]] - ring_z[span_ring_pairs[g][0]] for g in range(n_spans)]
    )

    # Angular noise uses only the first harmonics: cos t and sin t sum to zero
    # around a full symmetric ring (and vanish at the width chord's theta of 0
    # and pi), so measured circumferences and widths track their targets while
    # facet-level deformations still carry strong unexplained variation.
    noise = config.noise
    k_total = noise.uniform_modes + noise.angular_modes
    mode_kind = np.zeros(k_total, dtype=np.int64)
    mode_kind[noise.uniform_modes :] = 1 + np.arange(noise.angular_modes) % 2
    mode_freq = 0.5 + 0.35 * np.arange(k_total)
    mode_phase = 2.399963 * np.arange(k_total)  # golden-angle spacing
    mode_amp = np.where(mode_kind == 0, noise.uniform_amplitude, noise.angular_amplitude)

    return SyntheticTemplate(
        config=config,
        mesh=mesh,
        ring_z=ring_z,
        ring_weights=ring_weights,
        ring_rx=ring_rx,
        ring_ry=ring_ry,
        cos_t=cos_t,
        sin_t=sin_t,
        band_param=[b.parameter for b in config.bands],
        span_of_band=span_of_band,
        span_lo=span_lo,
        span_extent=span_extent,
        span_param=span_param,
        span_meas_base=span_meas_base,
        stature_span=stature_span,
        facet_region=facet_region,
        pure_facets=pure_facets,
        specs=spec_set,
        base_values=base_values,
        mode_freq=mode_freq,
        mode_phase=mode_phase,
        mode_kind=mode_kind,
        mode_amp=mode_amp,
    )


@dataclass
class DatasetGroundTruth:
    """What the generator planted, for dependency-recovery experiments."""

    region_names: list[str]
    facet_region: np.ndarray  # (m,) index into region_names
    region_parameters: dict[str, tuple[int, ...]]
    pure_facets: np.ndarray  # (m,) bool
    sampled_targets: np.ndarray  # (n, 19); weight column NaN


@dataclass
class SyntheticDataset:
    meshes: list[TriangleMesh]
    parameters: np.ndarray  # (n, 19) measured from the meshes
    specs: MeasurementSpecSet
    ground_truth: DatasetGroundTruth
    template: SyntheticTemplate


def generate(config: GeneratorConfig = GeneratorConfig()) -> SyntheticDataset:
    """Generate ``config.count`` bodies; deterministic for a given config."""
    if config.count < 1:
        raise GeneratorError("count must be >= 1")
    template = build_template(config)
    rng = np.random.default_rng(config.seed)
    targets = template.sample_targets(rng, config.count)
    coeffs = rng.standard_normal((config.count, len(template.mode_amp)))
    meshes = []
    rows = np.empty((config.count, N_PARAMETERS))
    for i in range(config.count):
        body = template.body_from_targets(targets[i], coeffs[i])
        meshes.append(body)
        rows[i] = measure(body, template.specs).values
    truth = DatasetGroundTruth(
        region_names=[b.name for b in config.bands],
        facet_region=template.facet_region.copy(),
        region_parameters=template.region_parameters(),
        pure_facets=template.pure_facets.copy(),
        sampled_targets=targets,
    )
    return SyntheticDataset(
        meshes=meshes,
        parameters=rows,
        specs=template.specs,
        ground_truth=truth,
        template=template,
    )


# -- disk layout ---------------------------------------------------------------


def write_dataset(dataset: SyntheticDataset, outdir) -> None:
    """Write bodies/*.obj, parameters.csv, specs.json and dependencies.json."""
    outdir = Path(outdir)
    (outdir / "bodies").mkdir(parents=True, exist_ok=True)
    ids = []
    for i, mesh in enumerate(dataset.meshes):
        name = f"body_{i:04d}"
        ids.append(name)
        save_mesh(mesh, outdir / "bodies" / f"{name}.obj")
    save_parameter_csv(outdir / "parameters.csv", dataset.parameters, body_ids=ids)
    save_specs(dataset.specs, outdir / "specs.json")
    truth = dataset.ground_truth
    doc = {
        "region_names": truth.region_names,
        "facet_regions": truth.facet_region.tolist(),
        "region_parameters": {k: list(v) for k, v in truth.region_parameters.items()},
        "pure_facets": truth.pure_facets.astype(int).tolist(),
        "generator": {
            "count": dataset.template.config.count,
            "seed": dataset.template.config.seed,
            "segments": dataset.template.config.segments,
            "rings": dataset.template.config.rings,
            "noise_scale": dataset.template.config.noise_scale,
            "std_scale": dataset.template.config.std_scale,
        },
    }
    with open(outdir / "dependencies.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_dataset_dir(path) -> tuple[list[TriangleMesh], np.ndarray, MeasurementSpecSet]:
    """Load a dataset directory written by :func:`write_dataset`."""
    path = Path(path)
    specs = load_specs(path / "specs.json")
    params = load_parameter_csv(path / "parameters.csv")
    body_dir = path / "bodies"
    meshes = [load_mesh(p) for p in sorted(body_dir.glob("*.obj"))]
    if not meshes:
        raise GeneratorError(f"no OBJ bodies found under {body_dir}")
    return meshes, params, specs


def load_dependencies(path) -> dict:
    with open(Path(path), "r", encoding="utf-8") as fh:
        return json.load(fh)
