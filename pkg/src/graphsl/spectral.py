"""Spectral bounds on metric graphs via truncation and positive solutions.

Four families of computations share the assembled forms:

* ``inf_spectrum``: bottom of the spectrum approximated from above by
  Dirichlet truncations over an exhaustion (monotone nonincreasing).
* ``ap_check`` / ``positive_solution``: the positive-solution test.  If a
  trial value sits strictly below the Dirichlet bottom on a compact piece,
  the operator minus the trial value admits a strictly positive solution
  there, obtained by solving the lifted boundary problem with unit data;
  values at or above the Dirichlet bottom are refuted or indeterminate.
* ``persson_limit``: bottom of the essential spectrum as the limit of
  Dirichlet problems on the complements of the exhaustion, realized on
  annuli between two levels (nonincreasing in the outer level,
  nondecreasing in the inner level).
* supporting constructions: the weighted cutoff profile between a level and
  its halo, the edgewise sup-bound constant, the ground-state transform
  identity, and two-sided bounds of normalized positive solutions on a
  fixed compact piece.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.sparse.linalg import splu

from .coeff import CoefficientField, _gauss_rule, edge_integral
from .eig import smallest_eigenpair
from .errors import HypothesisError, IntegrabilityError, SolverError
from .fem import (
    AssembledForms,
    DirichletTruncationSpec,
    GraphMesh,
    assemble,
    build_mesh,
    edge_sample_data,
    kirchhoff_residual,
)
from .graph import Exhaustion, MetricGraph

BC_DIRICHLET = "dirichlet"  # forms vanish on the host graph boundary
BC_FREE = "free"            # no condition at the host graph boundary


def _check_bc(bc: str) -> None:
    if bc not in (BC_DIRICHLET, BC_FREE):
        raise SolverError(f"unknown boundary flavor {bc!r}")


def subgraph_vertices(g: MetricGraph, edge_ids) -> frozenset:
    out = set()
    for eid in edge_ids:
        e = g.edge(eid)
        out.add(e.src)
        out.add(e.dst)
    return frozenset(out)


def dirichlet_vertices(g: MetricGraph, edge_ids, include_host_boundary: bool) -> frozenset:
    """Vertices of the subgraph that carry a Dirichlet condition.

    Always includes interface vertices (incident to an edge outside the
    subgraph); host-graph boundary vertices are added for the flavor with
    vanishing boundary values.
    """
    sub = set(edge_ids)
    verts = subgraph_vertices(g, sub)
    cut = {v for v in verts if any(eid not in sub for eid in g.adjacency[v])}
    if include_host_boundary:
        cut |= set(g.boundary & verts)
    return frozenset(cut)


def _solve_level(g, field, edge_ids, h, include_host_boundary, domain, tol):
    spec = DirichletTruncationSpec(
        vertices=dirichlet_vertices(g, edge_ids, include_host_boundary)
    )
    mesh = build_mesh(g, h, edges=edge_ids, constraints=spec)
    forms = assemble(mesh, field, domain=domain)
    return smallest_eigenpair(forms, tol=tol), forms


# --- inf spectrum -------------------------------------------------------------


@dataclass
class LevelEstimate:
    level: int
    value: float
    residual: float
    ndofs: int


@dataclass
class SpectralReport:
    """Monotone trace of Dirichlet truncation eigenvalues over an exhaustion."""

    bc: str
    h: float
    rows: list[LevelEstimate]
    estimate: float
    error_proxy: float
    touched_host_boundary: bool


def inf_spectrum(
    g: MetricGraph,
    field: CoefficientField,
    exhaustion: Exhaustion,
    bc: str = BC_DIRICHLET,
    h: float = 0.05,
    tol: float = 1e-6,
    levels=None,
) -> SpectralReport:
    """Upper approximation of the spectral bottom over exhaustion levels.

    Each level solves the Dirichlet-truncated problem on its edge set; the
    values are nonincreasing (checked within 10*tol) and the last one is
    the reported estimate.
    """
    _check_bc(bc)
    if levels is None:
        levels = range(len(exhaustion.levels))
    rows: list[LevelEstimate] = []
    prev = math.inf
    for n in levels:
        if n < 0 or n > exhaustion.max_level:
            raise SolverError(f"level {n} outside exhaustion range 0..{exhaustion.max_level}")
        edge_ids = exhaustion.levels[n]
        if not edge_ids:
            continue
        result, _ = _solve_level(
            g, field, edge_ids, h, bc == BC_DIRICHLET, f"level-{n}", tol
        )
        if result.value > prev + 10.0 * tol:
            raise SolverError(
                f"truncation values must not increase: level {n} gave {result.value} "
                f"after {prev}"
            )
        rows.append(LevelEstimate(n, result.value, result.residual, len(result.vector)))
        prev = result.value
    if not rows:
        raise SolverError("no nonempty exhaustion level was requested")
    error_proxy = abs(rows[-2].value - rows[-1].value) if len(rows) > 1 else math.inf
    top = rows[-1].level
    touched = exhaustion.haloes[top] >= frozenset(e.id for e in g.edges)
    return SpectralReport(
        bc=bc,
        h=h,
        rows=rows,
        estimate=rows[-1].value,
        error_proxy=error_proxy,
        touched_host_boundary=touched,
    )


# --- positive solutions -------------------------------------------------------


@dataclass
class PositiveSolutionCert:
    """Strictly positive nodal solution of (l - lam) y = 0 on a level.

    ``values`` holds the nodal vector over the unconstrained mesh, equal to
    one on the level boundary before normalization and to one at the root
    after.  Flux imbalances at free vertices document the Kirchhoff
    matching quality.
    """

    lam: float
    level: int
    mesh: GraphMesh
    values: np.ndarray
    min_value: float
    max_value: float
    root: str
    boundary_vertices: frozenset
    kirchhoff_residuals: dict
    dirichlet_bottom: float
    forms: AssembledForms = dataclass_field(repr=False, default=None)


def positive_solution(
    g: MetricGraph,
    field: CoefficientField,
    exhaustion: Exhaustion,
    lam: float,
    level: int,
    h: float = 0.05,
    tol: float = 1e-6,
    _known_bottom: float | None = None,
) -> PositiveSolutionCert:
    """Construct the positive solution certificate on one exhaustion level.

    Requires ``lam`` below the Dirichlet bottom of the level by more than
    ``tol``; solves the interior problem with unit boundary data, then
    normalizes to one at the root.  A nonpositive nodal value would violate
    the discrete minimum principle and raises SolverError.
    """
    if level < 0 or level > exhaustion.max_level:
        raise SolverError(f"level {level} outside exhaustion range")
    edge_ids = exhaustion.levels[level]
    if not edge_ids:
        raise SolverError(f"exhaustion level {level} contains no edges")
    bottom = _known_bottom
    if bottom is None:
        result, _ = _solve_level(g, field, edge_ids, h, True, f"level-{level}", tol)
        bottom = result.value
    if not (lam < bottom - tol):
        raise SolverError(
            f"trial value {lam} is not below the Dirichlet bottom {bottom} by {tol}"
        )
    boundary = dirichlet_vertices(g, edge_ids, include_host_boundary=True)
    if not boundary:
        raise SolverError(
            "level has no boundary vertices; the lifted boundary problem is empty"
        )
    mesh = build_mesh(g, h, edges=edge_ids, constraints=None)
    forms = assemble(mesh, field, domain=f"level-{level}-free")
    K, M = forms.pencil()
    A = (K - lam * M).tocsc()
    bdofs = np.array(sorted(mesh.vertex_dof[v] for v in boundary), dtype=np.int64)
    mask = np.ones(mesh.n_free, dtype=bool)
    mask[bdofs] = False
    idofs = np.flatnonzero(mask)
    y = np.ones(mesh.n_free)
    if idofs.size:
        aii = A[np.ix_(idofs, idofs)].tocsc()
        rhs = -np.asarray(A[np.ix_(idofs, bdofs)].sum(axis=1)).ravel()
        try:
            lu = splu(aii)
        except RuntimeError as exc:
            raise SolverError(f"interior solve failed: {exc}") from exc
        y[idofs] = lu.solve(rhs)
    root = exhaustion.root
    if root not in mesh.vertex_dof:
        raise SolverError(f"root {root!r} is not a vertex of level {level}")
    root_value = y[mesh.vertex_dof[root]]
    if not (root_value > 0 and np.isfinite(root_value)):
        raise SolverError(
            f"solution value {root_value} at the root blocks normalization; "
            "minimum principle violated"
        )
    y = y / root_value
    min_value = float(np.min(y))
    max_value = float(np.max(y))
    if min_value <= 0:
        bad = int(np.argmin(y))
        raise SolverError(
            "positive solution construction failed: nodal minimum "
            f"{min_value:.6g} at dof {bad} (trial value too close to the bottom "
            "or minimum principle violated)"
        )
    kirch = {}
    for v in sorted(subgraph_vertices(g, edge_ids) - boundary):
        kirch[v] = kirchhoff_residual(mesh, field, y, v)
    return PositiveSolutionCert(
        lam=float(lam),
        level=int(level),
        mesh=mesh,
        values=y,
        min_value=min_value,
        max_value=max_value,
        root=root,
        boundary_vertices=boundary,
        kirchhoff_residuals=kirch,
        dirichlet_bottom=float(bottom),
        forms=forms,
    )


@dataclass
class APResult:
    """Outcome of the positive-solution test at one trial value."""

    kind: str              # "certificate" | "refutation" | "indeterminate"
    lam: float
    level: int
    dirichlet_bottom: float
    margin: float          # lam - dirichlet_bottom
    cert: PositiveSolutionCert | None = None


def ap_check(
    g: MetricGraph,
    field: CoefficientField,
    exhaustion: Exhaustion,
    lam: float,
    level: int,
    h: float = 0.05,
    tol: float = 1e-6,
) -> APResult:
    """Positive-solution test of a trial value against one level.

    Returns a certificate (with the constructed solution) when the trial
    value is below the level's Dirichlet bottom by more than ``tol``, a
    refutation when above by more than ``tol``, and indeterminate inside
    the band.
    """
    if level < 0 or level > exhaustion.max_level:
        raise SolverError(f"level {level} outside exhaustion range")
    edge_ids = exhaustion.levels[level]
    if not edge_ids:
        raise SolverError(f"exhaustion level {level} contains no edges")
    result, _ = _solve_level(g, field, edge_ids, h, True, f"level-{level}", tol)
    bottom = result.value
    margin = lam - bottom
    if lam < bottom - tol:
        cert = positive_solution(
            g, field, exhaustion, lam, level, h=h, tol=tol, _known_bottom=bottom
        )
        return APResult("certificate", lam, level, bottom, margin, cert)
    if lam > bottom + tol:
        return APResult("refutation", lam, level, bottom, margin, None)
    return APResult("indeterminate", lam, level, bottom, margin, None)


# --- persson exhaustion limit ---------------------------------------------------


@dataclass
class PerssonRow:
    inner: int
    outer: int
    value: float
    residual: float


@dataclass
class PerssonTrace:
    """Two-index trace of annulus eigenvalues and the extracted limit.

    For fixed inner level the values decrease in the outer level (larger
    annulus, richer form domain) toward the complement problem; over inner
    levels they increase toward the bottom of the essential spectrum.  The
    estimate is the certified upper value at the largest inner level; the
    bracket pairs a geometric extrapolation of the outer sequence with that
    upper value.
    """

    bc: str
    h: float
    rows: list[PerssonRow]
    per_level: dict
    estimate: float
    bracket: tuple
    touched_host_boundary: bool


def _annulus_edges(exhaustion: Exhaustion, n: int, N: int) -> frozenset:
    return exhaustion.levels[N] - exhaustion.levels[n]


def _extrapolate(seq: list[float]) -> float:
    if len(seq) < 3:
        return seq[-1]
    d1 = seq[-2] - seq[-1]
    d0 = seq[-3] - seq[-2]
    if d0 <= 0 or d1 <= 0 or d1 >= d0:
        return seq[-1]
    ratio = d1 / d0
    return seq[-1] - d1 * ratio / (1.0 - ratio)


def persson_limit(
    g: MetricGraph,
    field: CoefficientField,
    exhaustion: Exhaustion,
    inner_levels,
    outer_levels,
    bc: str = BC_DIRICHLET,
    h: float = 0.05,
    tol: float = 1e-6,
    workers: int = 1,
) -> PerssonTrace:
    """Estimate the bottom of the essential spectrum by annulus exhaustion.

    For each inner level n the outer level N sweeps upward until the
    decrement of the annulus eigenvalue drops below ``tol``; monotonicity
    violations beyond 10*tol abort.  Deterministic for any worker count.
    """
    _check_bc(bc)
    inner_levels = sorted(set(int(n) for n in inner_levels))
    outer_levels = sorted(set(int(N) for N in outer_levels))
    if not inner_levels or not outer_levels:
        raise SolverError("persson needs nonempty inner and outer level lists")
    if max(outer_levels) > exhaustion.max_level:
        raise SolverError("outer levels exceed the exhaustion range")
    for n in inner_levels:
        if not [N for N in outer_levels if N > n]:
            raise SolverError(f"no outer level exceeds inner level {n}")

    def sweep(n: int) -> list[PerssonRow]:
        out = []
        prev = None
        for N in [N for N in outer_levels if N > n]:
            edge_ids = _annulus_edges(exhaustion, n, N)
            if not edge_ids:
                raise SolverError(f"annulus between levels {n} and {N} is empty")
            result, _ = _solve_level(
                g, field, edge_ids, h, bc == BC_DIRICHLET, f"annulus-{n}-{N}", tol
            )
            value = result.value
            if prev is not None and value > prev + 10.0 * tol:
                raise SolverError(
                    f"annulus values must not increase in the outer level: "
                    f"({n},{N}) gave {value} after {prev}"
                )
            out.append(PerssonRow(n, N, value, result.residual))
            if prev is not None and prev - value < tol:
                break
            prev = value
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sweeps = list(pool.map(sweep, inner_levels))
    else:
        sweeps = [sweep(n) for n in inner_levels]

    rows: list[PerssonRow] = []
    per_level: dict[int, float] = {}
    prev_final = None
    for n, sweep_rows in zip(inner_levels, sweeps):
        rows.extend(sweep_rows)
        final = sweep_rows[-1].value
        if prev_final is not None and final < prev_final - 10.0 * tol:
            raise SolverError(
                f"per-level values must not decrease in the inner level: "
                f"level {n} gave {final} after {prev_final}"
            )
        per_level[n] = final
        prev_final = final
    last_seq = [row.value for row in sweeps[-1]]
    upper = last_seq[-1]
    lower = min(_extrapolate(last_seq), upper)
    max_outer_used = max(row.outer for row in rows)
    touched = exhaustion.haloes[max_outer_used] >= frozenset(e.id for e in g.edges)
    return PerssonTrace(
        bc=bc,
        h=h,
        rows=rows,
        per_level=per_level,
        estimate=upper,
        bracket=(lower, upper),
        touched_host_boundary=touched,
    )


# --- cutoff profiles ------------------------------------------------------------


@dataclass
class EdgeCutoffProfile:
    """Sampled profile of the cutoff on one halo edge.

    ``rate`` is the constant value of sqrt(p/w) * |phi'| on the edge, the
    reciprocal of the edge integral of sqrt(w/p); ``check_values`` holds
    that quantity recomputed pointwise from coefficient samples.
    """

    edge_id: str
    offsets: np.ndarray
    values: np.ndarray
    rate: float
    check_values: np.ndarray
    rises_from_src: bool


@dataclass
class CutoffFunction:
    """Weighted cutoff between a level and the rest of the graph.

    Zero on the level, one beyond its halo; on each halo edge the profile
    climbs with slope proportional to sqrt(w/p), which makes the weighted
    steepness sqrt(p/w)*|phi'| constant along the edge.
    """

    level: int
    zero_edges: frozenset
    one_edges: frozenset
    profiles: dict
    sup_weighted_derivative: float

    def value(self, edge_id: str, offset: float) -> float:
        if edge_id in self.zero_edges:
            return 0.0
        if edge_id in self.one_edges:
            return 1.0
        profile = self.profiles[edge_id]
        return float(np.interp(offset, profile.offsets, profile.values))


def cutoff_build(
    g: MetricGraph,
    field: CoefficientField,
    exhaustion: Exhaustion,
    level: int,
    samples_per_edge: int = 129,
) -> CutoffFunction:
    """Build the weighted cutoff profile for one exhaustion level."""
    if level < 0 or level > exhaustion.max_level:
        raise SolverError(f"level {level} outside exhaustion range")
    zero = exhaustion.levels[level]
    halo_only = exhaustion.haloes[level] - zero
    one = frozenset(e.id for e in g.edges) - exhaustion.haloes[level]
    dist = g.vertex_distances(exhaustion.root)
    nodes, weights = _gauss_rule(field.quad_order)
    profiles = {}
    sup_rate = 0.0
    for eid in sorted(halo_only):
        e = g.edge(eid)
        xs = np.linspace(0.0, e.length, samples_per_edge)
        breaks = np.asarray(field.breakpoints(eid))
        if breaks.size:
            xs = np.unique(np.concatenate([xs, breaks]))
        increments = np.zeros(len(xs) - 1)
        for i in range(len(xs) - 1):
            lo, hi = xs[i], xs[i + 1]
            px = 0.5 * (hi - lo) * (nodes + 1.0) + lo
            integrand = np.sqrt(field.evaluate(eid, "w", px) / field.evaluate(eid, "p", px))
            if not np.all(np.isfinite(integrand)):
                raise IntegrabilityError(f"sqrt(w/p) not integrable on edge {eid!r}")
            increments[i] = 0.5 * (hi - lo) * float(np.dot(weights, integrand))
        cumulative = np.concatenate([[0.0], np.cumsum(increments)])
        total = cumulative[-1]
        if not (total > 0 and math.isfinite(total)):
            raise IntegrabilityError(f"edge integral of sqrt(w/p) degenerate on {eid!r}")
        rises_from_src = dist[e.src] <= level + 1e-12
        values = cumulative / total if rises_from_src else 1.0 - cumulative / total
        rate = 1.0 / total
        pw = np.sqrt(field.evaluate(eid, "p", xs) / field.evaluate(eid, "w", xs))
        wp = np.sqrt(field.evaluate(eid, "w", xs) / field.evaluate(eid, "p", xs))
        check_values = pw * wp / total
        profiles[eid] = EdgeCutoffProfile(
            edge_id=eid,
            offsets=xs,
            values=values,
            rate=rate,
            check_values=check_values,
            rises_from_src=rises_from_src,
        )
        sup_rate = max(sup_rate, rate)
    return CutoffFunction(
        level=level,
        zero_edges=zero,
        one_edges=one,
        profiles=profiles,
        sup_weighted_derivative=sup_rate,
    )


# --- edgewise sup bound -----------------------------------------------------------


@dataclass
class SobolevEstimate:
    """Constants in sup_e |f|^2 <= eps * int_e p|f'|^2 + C * int_e w|f|^2.

    ``delta`` is the window length below half the shortest edge such that
    every within-edge window of that length has integral of 1/p below
    eps/2; ``window_mass`` is the least integral of w over half-length
    windows; the constant is 2 divided by that mass.
    """

    epsilon: float
    delta: float
    window_mass: float
    constant: float


def _window_starts(length: float, window: float, count: int, breakpoints) -> np.ndarray:
    span = length - window
    if span < 0:
        return np.zeros(0)
    starts = np.linspace(0.0, span, count)
    extra = []
    for b in breakpoints:
        for s in (b - window, b):
            if 0.0 <= s <= span:
                extra.append(s)
    if extra:
        starts = np.unique(np.concatenate([starts, np.asarray(extra)]))
    return starts


def sobolev_constant(
    g: MetricGraph,
    field: CoefficientField,
    epsilon: float,
    starts_per_edge: int = 65,
) -> SobolevEstimate:
    """Constructive constants for the edgewise sup bound.

    Bisects for the largest admissible window length delta strictly below
    half the shortest edge, then takes the worst half-window mass of w.
    """
    if epsilon <= 0:
        raise HypothesisError("epsilon must be positive")
    half_min = g.min_edge_length / 2.0

    def admissible(delta: float) -> bool:
        for e in g.edges:
            breaks = field.breakpoints(e.id)
            for s in _window_starts(e.length, delta, starts_per_edge, breaks):
                if edge_integral(field, e.id, "1/p", s, s + delta) >= epsilon / 2.0:
                    return False
        return True

    hi = half_min * (1.0 - 1e-12)
    lo = 0.0
    if admissible(hi):
        delta = hi
    else:
        tiny = half_min * 1e-9
        if not admissible(tiny):
            raise HypothesisError(
                "no admissible window length: 1/p too large near some point"
            )
        lo = tiny
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                lo = mid
            else:
                hi = mid
        delta = lo
    mass = math.inf
    for e in g.edges:
        breaks = field.breakpoints(e.id)
        for s in _window_starts(e.length, delta / 2.0, starts_per_edge, breaks):
            mass = min(mass, edge_integral(field, e.id, "w", s, s + delta / 2.0))
    if not (mass > 0 and math.isfinite(mass)):
        raise HypothesisError("window mass of w is not positive")
    return SobolevEstimate(
        epsilon=float(epsilon),
        delta=float(delta),
        window_mass=float(mass),
        constant=2.0 / float(mass),
    )


# --- ground state transform ---------------------------------------------------------


@dataclass
class GSTReport:
    lhs: float        # form value of the trial function
    rhs: float        # transformed representation through the positive solution
    residual: float   # |lhs - rhs| / (1 + |lhs|)


def ground_state_transform_check(
    field: CoefficientField,
    cert: PositiveSolutionCert,
    trial: np.ndarray,
    lam: float,
) -> GSTReport:
    """Compare the form of a trial function with its ground-state transform.

    With y the certificate solution at ``lam`` and g = trial / y nodal, the
    form of the trial equals the weighted gradient energy of g against y
    plus lam times the weighted mass of g*y; the discrete residual shrinks
    at first order under mesh refinement.
    """
    mesh = cert.mesh
    trial = np.asarray(trial, dtype=float)
    if trial.shape != (mesh.n_free,):
        raise SolverError(
            f"trial vector has shape {trial.shape}, mesh has {mesh.n_free} dofs"
        )
    scale = float(np.max(np.abs(trial))) or 1.0
    for v in cert.boundary_vertices:
        if abs(mesh.value_at_vertex(trial, v)) > 1e-12 * scale:
            raise SolverError(f"trial function must vanish at boundary vertex {v!r}")
    forms = cert.forms if cert.forms is not None else assemble(mesh, field)
    K, _ = forms.pencil()
    lhs = float(trial @ (K @ trial))
    y = cert.values
    gt = trial / y
    rhs = 0.0
    for eid in mesh.edge_ids:
        data = edge_sample_data(mesh, field, eid)
        yv = mesh.edge_values(y, eid)
        gv = mesh.edge_values(gt, eid)
        y0 = yv[:-1][data.cell_idx]
        y1 = yv[1:][data.cell_idx]
        g0 = gv[:-1][data.cell_idx]
        g1 = gv[1:][data.cell_idx]
        y_interp = y0 * (1.0 - data.tloc) + y1 * data.tloc
        g_interp = g0 * (1.0 - data.tloc) + g1 * data.tloc
        g_slope = (gv[1:] - gv[:-1]) / data.hcell
        rhs += float(np.dot(data.wq, data.p * (g_slope[data.cell_idx] * y_interp) ** 2))
        rhs += lam * float(np.dot(data.wq, data.w * (g_interp * y_interp) ** 2))
    residual = abs(lhs - rhs) / (1.0 + abs(lhs))
    return GSTReport(lhs=lhs, rhs=rhs, residual=residual)


# --- two-sided bounds on a fixed compact piece ----------------------------------------


@dataclass
class HarnackBounds:
    """Extremes of normalized positive solutions over a fixed level.

    ``rows`` holds (certificate level, sup, inf) restricted to the edges of
    level ``m``; ``upper``/``lower`` are the running extremes across all
    certificates, two-sided bounds independent of the certificate level.
    """

    level: int
    upper: float
    lower: float
    rows: list


def harnack_probe(certs, exhaustion: Exhaustion, m: int) -> HarnackBounds:
    """Probe two-sided bounds of normalized certificates on level ``m``."""
    if not certs:
        raise SolverError("no certificates supplied")
    lam0 = certs[0].lam
    target_edges = exhaustion.levels[m]
    if not target_edges:
        raise SolverError(f"exhaustion level {m} contains no edges")
    rows = []
    upper = -math.inf
    lower = math.inf
    for cert in certs:
        if abs(cert.lam - lam0) > 1e-12 * max(1.0, abs(lam0)):
            raise SolverError("certificates probe different trial values")
        root_val = cert.values[cert.mesh.vertex_dof[cert.root]]
        if abs(root_val - 1.0) > 1e-10:
            raise SolverError("certificate is not normalized at the root")
        missing = target_edges - set(cert.mesh.edge_ids)
        if missing:
            raise SolverError(
                f"certificate at level {cert.level} does not cover level {m}"
            )
        vals = np.concatenate(
            [cert.mesh.edge_values(cert.values, eid) for eid in sorted(target_edges)]
        )
        sup = float(np.max(vals))
        inf = float(np.min(vals))
        rows.append((cert.level, sup, inf))
        upper = max(upper, sup)
        lower = min(lower, inf)
    return HarnackBounds(level=m, upper=upper, lower=lower, rows=rows)
