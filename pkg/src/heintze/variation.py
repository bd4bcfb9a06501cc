"""Q-variation packing experiments.

A packing of a box E by the images of integral unit cubes under e^{tA}
is enumerated in the preimage: lattice cells [z, z+1)^n (half-open, so
the packing is genuinely disjoint) that meet the closed parallelotope
e^{-tA}(E).  Oscillations of linear functionals over the image cells are
exact closed forms, so V_Q = (cell count) * osc^Q needs no sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapExceededError
from .linalg import check_matrix, check_vector
from .metric import _canonical_chains

DEFAULT_MAX_CELLS = 10_000_000
_CHUNK = 200_000


@dataclass(frozen=True, eq=False)
class PackingSpec:
    """One packing instance: canonical matrix, scale t, target box, cap."""

    a: np.ndarray
    t: float
    box: np.ndarray  # shape (2, n): rows are the lower/upper corners
    max_cells: int = DEFAULT_MAX_CELLS

    def __post_init__(self):
        a = check_matrix(self.a)
        if _canonical_chains(a) is None:
            raise ValueError(
                "packing matrix must be in canonical real-part Jordan form"
            )
        object.__setattr__(self, "a", a)
        box = np.asarray(self.box, dtype=float)
        if box.shape != (2, a.shape[0]):
            raise ValueError(f"box must have shape (2, {a.shape[0]})")
        if not np.all(np.isfinite(box)) or not np.all(box[1] > box[0]):
            raise ValueError("box must be non-degenerate (upper > lower)")
        object.__setattr__(self, "box", box)
        if not math.isfinite(self.t):
            raise ValueError("t must be finite")
        if self.max_cells < 1:
            raise ValueError("max_cells must be positive")

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class TestFunction:
    """A linear functional on R^n (the only oscillation-exact choice)."""

    __test__ = False  # not a pytest class, despite the name

    vector: tuple

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)) or not np.any(v != 0):
            raise ValueError("functional must be a finite nonzero vector")
        object.__setattr__(self, "vector", tuple(float(x) for x in v))

    @classmethod
    def coordinate(cls, n: int, index: int) -> "TestFunction":
        if not 0 <= index < n:
            raise ValueError(f"coordinate index {index} out of range for n={n}")
        v = np.zeros(n)
        v[index] = 1.0
        return cls(tuple(v))

    @classmethod
    def from_vector(cls, ell) -> "TestFunction":
        return cls(tuple(np.asarray(ell, dtype=float)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vector)


@dataclass(frozen=True)
class VariationRow:
    t: float
    q: float
    cells: int
    value: float


@dataclass(frozen=True)
class ExponentFit:
    q: float
    slope: float
    predicted: float
    residual: float
    classification: str


@dataclass(frozen=True)
class VariationReport:
    rows: tuple
    fits: tuple
    correction_note: str


def volume_estimate(spec: PackingSpec) -> float:
    """Expected cell count e^{-t tr(A)} * Vol(box) (volume scaling of e^{tA})."""
    vol = float(np.prod(spec.box[1] - spec.box[0]))
    return math.exp(-spec.t * float(np.trace(spec.a))) * vol


def _ensure_cap(spec: PackingSpec) -> None:
    est = volume_estimate(spec)
    if est > spec.max_cells:
        raise CapExceededError(
            f"estimated cell count {est:.6g} exceeds max_cells "
            f"{spec.max_cells}; raise the cap or shrink |t|/box"
        )


def _preimage(spec: PackingSpec):
    """Base point and generator matrix of e^{-tA}(box)."""
    m = scipy.linalg.expm(-spec.t * spec.a)
    base = m @ spec.box[0]
    gens = m * (spec.box[1] - spec.box[0])[None, :]
    return base, gens


def _axis_range(lo: float, hi: float):
    """Integer z with [z, z+1) meeting the closed interval [lo, hi]."""
    return math.floor(lo), math.floor(hi)


def _sat_axes(gens: np.ndarray) -> np.ndarray:
    """Facet normals of the Minkowski sum of the unit cube and the
    preimage parallelotope: null vectors of (n-1)-subsets of the 2n
    generators.  Complete separating-axis set for two parallelotopes."""
    n = gens.shape[0]
    all_gens = np.hstack([np.eye(n), gens])
    axes = []
    for subset in itertools.combinations(range(2 * n), n - 1):
        sub = all_gens[:, subset].T
        if n == 1:
            axes.append(np.array([1.0]))
            continue
        _, s, vt = np.linalg.svd(sub, full_matrices=True)
        if s.size == 0 or s[-1] <= 1e-12 * s[0]:
            continue  # subset does not span an (n-1)-dim subspace
        normal = vt[-1]
        nz = np.flatnonzero(np.abs(normal) > 1e-13)
        if nz.size == 0:
            continue
        normal = normal / np.linalg.norm(normal)
        if normal[nz[0]] < 0:
            normal = -normal
        axes.append(normal)
    if not axes:
        return np.eye(n)
    stacked = np.unique(np.round(np.array(axes), 12), axis=0)
    return stacked


def enumerate_packing(spec: PackingSpec) -> np.ndarray:
    """Lattice base points z of the half-open cells [z, z+1)^n meeting
    e^{-tA}(box), in lexicographic order.

    Bounding-box candidates from the preimage corners, then an exact
    separating-axis test per candidate (ties on oblique axes count as
    intersecting; coordinate axes apply the half-open convention).
    """
    _ensure_cap(spec)
    base, gens = _preimage(spec)
    n = spec.n

    lo_proj = base + np.minimum(gens, 0.0).sum(axis=1)
    hi_proj = base + np.maximum(gens, 0.0).sum(axis=1)
    ranges = [_axis_range(lo_proj[i], hi_proj[i]) for i in range(n)]
    counts = [zmax - zmin + 1 for zmin, zmax in ranges]
    total = 1
    for c in counts:
        total *= max(c, 0)
    if total <= 0:
        return np.zeros((0, n), dtype=int)
    if total > 40 * spec.max_cells:
        raise CapExceededError(
            f"candidate bounding box holds {total} cells "
            f"(estimate {volume_estimate(spec):.6g}); cap {spec.max_cells}"
        )

    axes = _sat_axes(gens)
    # preimage projection interval per axis
    proj_base = axes @ base
    proj_g = axes @ gens
    p_lo = proj_base + np.minimum(proj_g, 0.0).sum(axis=1)
    p_hi = proj_base + np.maximum(proj_g, 0.0).sum(axis=1)
    # cube projection offsets relative to a . z
    c_lo = np.minimum(axes, 0.0).sum(axis=1)
    c_hi = np.maximum(axes, 0.0).sum(axis=1)

    grids = [np.arange(zmin, zmax + 1) for zmin, zmax in ranges]
    # chunk over the largest axis so the cross product of the remaining
    # axes stays small whatever direction the box is elongated in
    lead = int(np.argmax(counts))
    rest_axes = [i for i in range(n) if i != lead]
    rest_total = max(1, total // max(counts[lead], 1))
    chunk_rows = max(1, _CHUNK // rest_total)
    lead_grid = grids[lead]
    rest_mesh = None
    if n > 1:
        rest_mesh = np.stack(
            [g.ravel() for g in np.meshgrid(
                *[grids[i] for i in rest_axes], indexing="ij")],
            axis=1,
        )
    kept = []
    kept_count = 0
    for start in range(0, len(lead_grid), chunk_rows):
        block_lead = lead_grid[start : start + chunk_rows]
        if rest_mesh is not None:
            z = np.empty((len(block_lead) * len(rest_mesh), n))
            z[:, lead] = np.repeat(block_lead, len(rest_mesh))
            z[:, rest_axes] = np.tile(rest_mesh, (len(block_lead), 1))
        else:
            z = block_lead[:, None].astype(float)
        keep = np.ones(len(z), dtype=bool)
        proj = z @ axes.T
        for k in range(len(axes)):
            keep &= (proj[:, k] + c_lo[k] <= p_hi[k]) & (
                proj[:, k] + c_hi[k] >= p_lo[k]
            )
        # half-open upper faces along coordinate axes
        for i in range(n):
            keep &= (z[:, i] + 1.0 > lo_proj[i]) & (z[:, i] <= hi_proj[i])
        kept_z = z[keep].astype(int)
        kept_count += len(kept_z)
        if kept_count > spec.max_cells:
            raise CapExceededError(
                f"enumerated more than max_cells {spec.max_cells} cells "
                f"(estimate {volume_estimate(spec):.6g})"
            )
        if len(kept_z):
            kept.append(kept_z)
    if not kept:
        return np.zeros((0, n), dtype=int)
    out = np.vstack(kept)
    return out[np.lexsort(out.T[::-1])]


def count_cells(spec: PackingSpec) -> int:
    """Exact cell count; per-axis product for diagonal matrices, full
    enumeration otherwise."""
    _ensure_cap(spec)
    if np.count_nonzero(spec.a - np.diag(np.diag(spec.a))) == 0:
        base, gens = _preimage(spec)
        lo = base + np.minimum(gens, 0.0).sum(axis=1)
        hi = base + np.maximum(gens, 0.0).sum(axis=1)
        total = 1
        for i in range(spec.n):
            zmin, zmax = _axis_range(lo[i], hi[i])
            total *= max(zmax - zmin + 1, 0)
        return total
    return len(enumerate_packing(spec))


def oscillation(a, t: float, u: TestFunction, cell=None) -> float:
    """Oscillation of the linear functional u over any image cell
    e^{tA}(z + [0,1]^n): sum_i |(u e^{tA})_i|, independent of z."""
    a = check_matrix(a)
    row = u.as_array() @ scipy.linalg.expm(t * a)
    return float(np.sum(np.abs(row)))


def variation_sum(spec: PackingSpec, u: TestFunction, q: float) -> float:
    """V_Q over the packing: (cell count) * oscillation^Q."""
    if q < 1:
        raise ValueError("Q must be at least 1")
    cells = count_cells(spec)
    osc = oscillation(spec.a, spec.t, u)
    return cells * osc**q


def fit_exponents(a, u: TestFunction, box, t_grid, q_list,
                  max_cells: int = DEFAULT_MAX_CELLS) -> VariationReport:
    """Least-squares slopes of log V_Q against t, per Q.

    The predicted exponential rate is Q*lam_max - tr(A); the slope fit
    deliberately ignores the polynomial-in-|t| correction factor (noted
    in the report) since it is subdominant on desk-scale grids.
    """
    a = check_matrix(a)
    t_grid = [float(t) for t in t_grid]
    if len(t_grid) < 3:
        raise ValueError("need at least 3 grid points")
    if any(y <= x for x, y in zip(t_grid, t_grid[1:])):
        raise ValueError("t grid must be strictly increasing")
    if any(t >= -1 for t in t_grid):
        raise ValueError("all grid t must be < -1")
    q_list = [float(q) for q in q_list]
    lam_max = float(np.max(np.diag(a)))
    trace = float(np.trace(a))

    rows = []
    logs = {q: [] for q in q_list}
    for t in t_grid:
        spec = PackingSpec(a, t, np.asarray(box, dtype=float), max_cells)
        cells = count_cells(spec)
        if cells <= 0:
            raise ValueError(f"packing at t={t} is empty")
        osc = oscillation(a, t, u)
        for q in q_list:
            value = cells * osc**q
            rows.append(VariationRow(t, q, cells, value))
            logs[q].append(math.log(value))

    fits = []
    ts = np.asarray(t_grid)
    for q in q_list:
        ys = np.asarray(logs[q])
        slope, intercept = np.polyfit(ts, ys, 1)
        resid = float(np.sqrt(np.mean((ys - (slope * ts + intercept)) ** 2)))
        if slope < -0.1:
            label = "diverging"
        elif slope > 0.1:
            label = "vanishing"
        else:
            label = "critical"
        fits.append(
            ExponentFit(q, float(slope), q * lam_max - trace, resid, label)
        )
    note = (
        "slope fit captures the exponential rate only; the polynomial "
        "factor |t|^((1-n)Q) is ignored and absorbed by tolerances"
    )
    return VariationReport(tuple(rows), tuple(fits), note)
