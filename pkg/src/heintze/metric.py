"""The parabolic visual quasimetric D_A on the boundary R^n.

D_A(x, y) = e^{t*} where t* is the smallest real number with
|e^{-tA}(x - y)| = 1.  The solver locates the smallest zero of
g(t) = log |e^{-tA}(y - x)|:

* diagonal A: g is strictly decreasing, plain vectorized bisection;
* canonical single-eigenvalue A (block diagonal lam*I + N chains):
  |e^{-tN}v|^2 is an explicit polynomial, so the zeros of g are isolated
  exactly between the real critical points of e^{-2*lam*t} * P(t);
* general A: a certified left endpoint t_lo with g > 0 on (-inf, t_lo]
  (operator-norm bound with a sampled constant, safety factor 2), then a
  left-to-right scan at scan_step to the first sign change, then
  bisection to t_tol.

All evaluators are pure and vectorized over batches of difference
vectors; results for a given batch are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SolverError
from .linalg import check_matrix, check_vector
from .spectral import (
    DEFAULT_CLUSTER_TOL,
    RealPartJordanForm,
    real_part_jordan_form,
)

_CRIT_IMAG_TOL = 1e-9
_CERT_MARGIN = 0.05


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the smallest-root search."""

    scan_step: float = 1e-2
    t_tol: float = 1e-12
    bracket_margin: float = 5.0

    def __post_init__(self):
        if min(self.scan_step, self.t_tol, self.bracket_margin) <= 0:
            raise ValueError("solver parameters must be positive")
        if not self.t_tol < self.scan_step:
            raise ValueError("t_tol must be smaller than scan_step")


def _canonical_chains(a):
    """Chains [(lam, size, offset), ...] if A is block-diagonal with
    lam*I + N blocks (exact structural test), else None."""
    n = a.shape[0]
    off_diag = a - np.diag(np.diag(a))
    super_diag = np.diag(a, k=1) if n > 1 else np.array([])
    probe = off_diag.copy()
    if n > 1:
        probe -= np.diag(super_diag, k=1)
    if np.count_nonzero(probe) != 0:
        return None
    if not np.all(np.isin(super_diag, (0.0, 1.0))):
        return None
    chains = []
    i = 0
    while i < n:
        j = i
        while j < n - 1 and a[j, j + 1] == 1.0:
            if a[j + 1, j + 1] != a[i, i]:
                return None
            j += 1
        lam = float(a[i, i])
        if lam <= 0.0:
            return None
        chains.append((lam, j - i + 1, i))
        i = j + 1
    return chains


class BoundarySpace:
    """A boundary (R^n, D_A): the matrix plus cached spectral data.

    Value-immutable after construction (internal caches are populated
    lazily but never change results); all evaluators are pure, so
    concurrent batch evaluation is safe and per-batch deterministic.
    Boundary points are plain finite float vectors.
    """

    def __init__(self, a, solver: SolverConfig | None = None,
                 tol: float = DEFAULT_CLUSTER_TOL):
        self.a = check_matrix(a)
        self.n = self.a.shape[0]
        self.solver = solver if solver is not None else SolverConfig()
        self.form: RealPartJordanForm = real_part_jordan_form(self.a, tol)
        self.lambda_min = self.form.lambda_min
        self.lambda_max = self.form.lambda_max
        self.max_block = self.form.max_block
        self.chains = _canonical_chains(self.a)
        if self.chains is not None and all(s == 1 for _, s, _ in self.chains):
            self._mode = "diagonal"
        elif self.chains is not None and len({c[0] for c in self.chains}) == 1:
            self._mode = "single"
        else:
            self._mode = "general"
        self._ca = None
        self._sub_spaces = {}

    # -- structure helpers -------------------------------------------------

    @property
    def eigenvalue_count(self) -> int:
        """Number of distinct eigenvalues (chains grouped by lambda)."""
        if self.chains is None:
            return len({lam for lam, _ in self.form.blocks})
        return len({c[0] for c in self.chains})

    def projection_indices(self):
        """Coordinates of pi_A (single-eigenvalue canonical form only):
        every size-1 chain plus the last coordinate of each longer chain."""
        self._require_single()
        idx = []
        for _, size, off in self.chains:
            idx.append(off + size - 1)
        return np.array(sorted(idx), dtype=int)

    def interior_indices(self):
        """Fiber coordinates: all but the last coordinate of each chain."""
        self._require_single()
        idx = []
        for _, size, off in self.chains:
            idx.extend(range(off, off + size - 1))
        return np.array(idx, dtype=int)

    def _require_single(self):
        if self._mode not in ("single",) and not (
            self._mode == "diagonal" and self.eigenvalue_count == 1
        ):
            raise ValueError(
                "operation requires a canonical single-eigenvalue matrix"
            )

    def _reduced_space(self, key, builder):
        if key not in self._sub_spaces:
            self._sub_spaces[key] = builder()
        return self._sub_spaces[key]

    # -- general-path machinery ---------------------------------------------

    def _general_constant(self) -> float:
        """Sampled bound C with ||e^{tA}|| <= C e^{t lam_min} (1+|t|)^{m-1}
        for t <= 0 (and by symmetry of the estimate, for -t as well)."""
        if self._ca is None:
            span = self.solver.bracket_margin * 50.0
            shifted = self.a - self.lambda_min * np.eye(self.n)
            best = 1.0
            for tau in np.linspace(-span, 0.0, 2001):
                val = np.linalg.norm(scipy.linalg.expm(tau * shifted), 2)
                val *= (1.0 + abs(tau)) ** (1 - self.max_block)
                if val > best:
                    best = val
            self._ca = 2.0 * best  # documented safety factor
        return self._ca

    def _bump_general_constant(self):
        self._ca = (self._ca or 2.0) * 2.0

    def _step_matrix(self, h: float) -> np.ndarray:
        return scipy.linalg.expm(-h * self.a)


# ---------------------------------------------------------------------------
# root finding


def _roots_diagonal(space: BoundarySpace, v: np.ndarray) -> np.ndarray:
    diag = np.diag(space.a)
    v2 = v * v
    logs = np.where(v2 > 0, np.log(np.where(v2 > 0, v2, 1.0)), -np.inf)

    def g(t):
        e = logs - np.outer(t, 2.0 * diag)
        mx = np.max(e, axis=1)
        return 0.5 * (mx + np.log(np.sum(np.exp(e - mx[:, None]), axis=1)))

    guess = np.log(np.linalg.norm(v, axis=1)) / space.lambda_min
    lo = guess.copy()
    hi = guess.copy()
    step = 1.0
    for _ in range(200):
        bad = g(lo) <= 0
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step *= 2.0
    else:
        raise SolverError("failed to bracket from the left (diagonal path)")
    step = 1.0
    for _ in range(200):
        bad = g(hi) > 0
        if not bad.any():
            break
        hi = np.where(bad, hi + step, hi)
        step *= 2.0
    else:
        raise SolverError("failed to bracket from the right (diagonal path)")
    _bisect_to_tol(g, lo, hi, space.solver.t_tol)
    return 0.5 * (lo + hi)


def _bisect_to_tol(g, lo, hi, t_tol):
    """In-place bisection; finishes at machine precision when that is
    finer than t_tol (t_tol stays the guaranteed bound)."""
    for _ in range(200):
        stop = np.minimum(t_tol, 4e-16 * np.maximum(1.0, np.abs(lo)))
        if np.all(hi - lo <= stop):
            break
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        np.copyto(lo, np.where(pos, mid, lo))
        np.copyto(hi, np.where(pos, hi, mid))


def _single_poly_coeffs(space: BoundarySpace, v: np.ndarray) -> np.ndarray:
    """Coefficients (ascending) of P(t) = |e^{-tN_blocks} v|^2 per row."""
    m = v.shape[0]
    max_size = max(size for _, size, _ in space.chains)
    p = np.zeros((m, 2 * max_size - 1))
    for _, size, off in space.chains:
        for i in range(size):
            span = size - i
            c = np.empty((m, span))
            for q in range(span):
                c[:, q] = v[:, off + i + q] * ((-1.0) ** q / math.factorial(q))
            for q1 in range(span):
                for q2 in range(span):
                    p[:, q1 + q2] += c[:, q1] * c[:, q2]
    return p


def _poly_eval(coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Horner evaluation of per-row ascending coefficients at per-row t."""
    acc = np.zeros(t.shape)
    for k in range(coeffs.shape[1] - 1, -1, -1):
        acc = acc * t + coeffs[:, k]
    return acc


def _real_critical_points(r_coeffs: np.ndarray):
    """Real roots of each row's polynomial via companion eigenvalues.

    Returns a (m, deg) array padded with +inf, sorted ascending per row.
    """
    m, width = r_coeffs.shape
    deg = width - 1
    out = np.full((m, max(deg, 1)), np.inf)
    if deg == 0:
        return out
    monic = r_coeffs / r_coeffs[:, -1][:, None]
    comp = np.zeros((m, deg, deg))
    comp[:, 1:, :-1] = np.eye(deg - 1)
    comp[:, :, -1] = -monic[:, :-1]
    roots = np.linalg.eigvals(comp)
    real = np.abs(roots.imag) <= _CRIT_IMAG_TOL * (1.0 + np.abs(roots.real))
    vals = np.where(real, roots.real, np.inf)
    vals.sort(axis=1)
    out[:, :deg] = vals
    return out


def _roots_single(space: BoundarySpace, v: np.ndarray) -> np.ndarray:
    lam = space.chains[0][0]
    p = _single_poly_coeffs(space, v)
    m = p.shape[0]
    t_tol = space.solver.t_tol
    result = np.empty(m)

    # group rows by true polynomial degree (top coefficients are exact
    # products of the input coordinates, so an exact zero test is sound)
    degree = np.zeros(m, dtype=int)
    for k in range(p.shape[1] - 1, 0, -1):
        mask = (degree == 0) & (p[:, k] != 0.0)
        degree[mask] = k

    const = degree == 0
    if const.any():
        result[const] = np.log(p[const, 0]) / (2.0 * lam)

    for d in np.unique(degree[~const]):
        rows = np.where(degree == d)[0]
        pc = p[rows, : d + 1]

        def g(t, pc=pc):
            return -lam * t + 0.5 * np.log(_poly_eval(pc, t))

        # critical points: real roots of P'(t) - 2 lam P(t)
        rc = np.empty((len(rows), d + 1))
        rc[:, :] = -2.0 * lam * pc
        rc[:, :-1] += pc[:, 1:] * np.arange(1, d + 1)
        crit = _real_critical_points(rc)

        crit_safe = np.where(np.isfinite(crit), crit, 0.0)
        gc_raw = np.stack(
            [g(crit_safe[:, j]) for j in range(crit.shape[1])], axis=1
        )
        gc = np.where(np.isfinite(crit), gc_raw, np.inf)
        neg = gc <= 0
        first = np.where(neg.any(axis=1), neg.argmax(axis=1), crit.shape[1])

        k = len(rows)
        lo = np.empty(k)
        hi = np.empty(k)
        expand_lo = np.zeros(k, bool)
        expand_hi = np.zeros(k, bool)
        guess = 0.5 * np.log(pc[:, 0].clip(min=np.finfo(float).tiny)) / lam
        for i in range(k):
            f = first[i]
            finite = np.isfinite(crit[i])
            if f < crit.shape[1] and np.isfinite(crit[i, f]):
                hi[i] = crit[i, f]
                if f > 0 and np.isfinite(crit[i, f - 1]):
                    lo[i] = crit[i, f - 1]
                else:
                    lo[i] = crit[i, f] - 1.0
                    expand_lo[i] = True
            else:
                anchor = crit[i][finite][-1] if finite.any() else guess[i]
                lo[i] = anchor
                hi[i] = anchor + 1.0
                expand_hi[i] = True
                if not finite.any():
                    expand_lo[i] = True

        step = 1.0
        for _ in range(200):
            bad = expand_lo & (g(lo) <= 0)
            if not bad.any():
                break
            lo = np.where(bad, lo - step, lo)
            step *= 2.0
        else:
            raise SolverError("failed to bracket from the left (single path)")
        step = 1.0
        for _ in range(200):
            bad = expand_hi & (g(hi) > 0)
            if not bad.any():
                break
            hi = np.where(bad, hi + step, hi)
            step *= 2.0
        else:
            raise SolverError("failed to bracket from the right (single path)")

        _bisect_to_tol(g, lo, hi, t_tol)
        result[rows] = 0.5 * (lo + hi)
    return result


def _certified_left(norms, lam, mblk, ca, margin):
    t0 = min(0.0, 1.0 - (mblk - 1) / lam)
    target = math.log(ca) - np.log(norms) + margin
    t = np.minimum(t0, -target / lam)
    gap = 1.0
    for _ in range(200):
        h = -lam * t - (mblk - 1) * np.log1p(np.abs(t))
        bad = h < target
        if not bad.any():
            return t
        t = np.where(bad, np.minimum(t, t0) - gap, t)
        gap *= 2.0
    raise SolverError("could not certify a left bracket endpoint")


def _certified_right(norms, lam, mblk, ca, margin):
    t0 = max(0.0, (mblk - 1) / lam - 1.0)
    target = math.log(ca) + np.log(norms) + margin
    t = np.maximum(t0, target / lam)
    gap = 1.0
    for _ in range(200):
        h = lam * t - (mblk - 1) * np.log1p(np.abs(t))
        bad = h < target
        if not bad.any():
            return t
        t = np.where(bad, np.maximum(t, t0) + gap, t)
        gap *= 2.0
    raise SolverError("could not certify a right bracket endpoint")


def _exact_g(space, v_rows, t_vals):
    out = np.empty(len(v_rows))
    for tv in np.unique(t_vals):
        mask = t_vals == tv
        e = scipy.linalg.expm(-tv * space.a)
        out[mask] = np.log(np.linalg.norm(v_rows[mask] @ e.T, axis=1))
    return out


def _roots_general(space: BoundarySpace, v: np.ndarray) -> np.ndarray:
    cfg = space.solver
    lam, mblk = space.lambda_min, space.max_block
    norms = np.linalg.norm(v, axis=1)
    h = cfg.scan_step

    for _ in range(12):
        ca = space._general_constant()
        t_lo = _certified_left(norms, lam, mblk, ca, _CERT_MARGIN)
        t_lo = h * np.floor(t_lo / h)
        if np.all(_exact_g(space, v, t_lo) > 0):
            break
        space._bump_general_constant()
    else:
        raise SolverError(
            "left-endpoint certification failed repeatedly; "
            f"matrix = {space.a.tolist()}"
        )
    t_hi = _certified_right(norms, lam, mblk, ca, _CERT_MARGIN)

    w = np.empty_like(v)
    for tv in np.unique(t_lo):
        mask = t_lo == tv
        e = scipy.linalg.expm(-tv * space.a)
        w[mask] = v[mask] @ e.T

    step = space._step_matrix(h)
    t = t_lo.copy()
    left_w = w.copy()
    left_t = t.copy()
    active = np.ones(len(v), bool)
    span = float(np.max(t_hi) - np.min(t_lo))
    max_steps = int(math.ceil(span / h)) + 2
    if max_steps > 50_000_000:
        raise SolverError(
            f"scan of {max_steps} steps exceeds the hard cap; "
            f"|v| range [{norms.min():.3g}, {norms.max():.3g}], "
            f"matrix = {space.a.tolist()}"
        )
    for _ in range(max_steps):
        if not active.any():
            break
        wn = w[active] @ step.T
        gn = np.log(np.linalg.norm(wn, axis=1))
        idx = np.where(active)[0]
        flipped = gn <= 0
        hit = idx[flipped]
        left_w[hit] = w[hit]
        left_t[hit] = t[hit]
        w[idx] = wn
        t[idx] += h
        active[hit] = False
        over = active & (t > t_hi)
        if over.any():
            # exact re-check: certification guarantees a sign change by t_hi
            rows = np.where(over)[0]
            g_exact = _exact_g(space, v[rows], t[rows])
            if np.any(g_exact > 0):
                raise SolverError(
                    "scan exhausted the certified range without a sign "
                    f"change for {int(np.sum(g_exact > 0))} vector(s); "
                    f"matrix = {space.a.tolist()}"
                )
            # marching drift hid the flip: rebuild the bracket-left state
            # from exact evaluations at t - h
            t_left = t[rows] - h
            if np.any(_exact_g(space, v[rows], t_left) <= 0):
                raise SolverError(
                    "scan drift exceeded one step near the certified right "
                    f"endpoint; matrix = {space.a.tolist()}"
                )
            for tv in np.unique(t_left):
                mask = rows[t_left == tv]
                e = scipy.linalg.expm(-tv * space.a)
                left_w[mask] = v[mask] @ e.T
            left_t[rows] = t_left
            active[rows] = False
    if active.any():
        raise SolverError("scan step cap reached without a sign change")

    width = h
    rounds = int(math.ceil(math.log2(h / min(cfg.t_tol, 1e-15)))) + 1
    for _ in range(rounds):
        width *= 0.5
        m_half = space._step_matrix(width)
        trial = left_w @ m_half.T
        adv = np.log(np.linalg.norm(trial, axis=1)) > 0
        left_w = np.where(adv[:, None], trial, left_w)
        left_t = left_t + np.where(adv, width, 0.0)
    return left_t + 0.5 * width


def _dist_from_diffs(space: BoundarySpace, diffs: np.ndarray) -> np.ndarray:
    diffs = np.atleast_2d(np.asarray(diffs, dtype=float))
    if diffs.shape[1] != space.n:
        raise ValueError(f"expected vectors of dimension {space.n}")
    out = np.zeros(diffs.shape[0])
    nz = np.linalg.norm(diffs, axis=1) > 0
    if not nz.any():
        return out
    v = diffs[nz]
    if space._mode == "diagonal":
        roots = _roots_diagonal(space, v)
    elif space._mode == "single":
        roots = _roots_single(space, v)
    else:
        roots = _roots_general(space, v)
    out[nz] = np.exp(roots)
    return out


# ---------------------------------------------------------------------------
# public operations


def dist(space: BoundarySpace, x, y) -> float:
    """D_A(x, y); exactly 0 when x == y."""
    x = check_vector(x, space.n)
    y = check_vector(y, space.n)
    return float(_dist_from_diffs(space, (y - x)[None, :])[0])


def dist_pairs(space: BoundarySpace, x, y) -> np.ndarray:
    """Vectorized D_A over aligned batches of points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("point batches must have identical shapes")
    return _dist_from_diffs(space, y - x)


def quasimetric_constant(space: BoundarySpace, samples: int = 10_000,
                         seed: int = 0, box_radius: float = 5.0) -> float:
    """Empirical lower bound for the quasimetric constant M.

    Sup over sampled triples of D(x,z) / (D(x,y) + D(y,z)); this never
    overestimates the true constant.  A fraction of the triples repeats
    a point (y = z), which realizes ratio 1 exactly, so with a few
    samples the bound is at least 1 as the true constant always is.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box_radius, box_radius, (3, samples, space.n))
    x, y, z = pts
    repeat = rng.random(samples) < 0.125
    y[repeat] = z[repeat]
    dxz = dist_pairs(space, x, z)
    den = dist_pairs(space, x, y) + dist_pairs(space, y, z)
    ok = den > 0
    if not ok.any():
        return 0.0
    return float(np.max(dxz[ok] / den[ok]))


def _single_lambda(space: BoundarySpace) -> float:
    space._require_single()
    return space.chains[0][0]


def fiber_restriction_check(space: BoundarySpace, p, p2):
    """(D_A(p, p'), D_{A(1)}(x, x')) for two points in a common pi_A fiber.

    The two values are computed by independent solver runs; the fiber
    restriction identity says they agree.
    """
    _single_lambda(space)
    p = check_vector(p, space.n)
    p2 = check_vector(p2, space.n)
    pi_idx = space.projection_indices()
    if not np.array_equal(p[pi_idx], p2[pi_idx]):
        raise ValueError("points are not in a common fiber of pi_A")
    inner = space.interior_indices()
    if inner.size == 0:
        return 0.0, 0.0
    d_full = dist(space, p, p2)

    def build():
        from .spectral import canonical_matrix

        lam = space.chains[0][0]
        blocks = tuple(
            (lam, size - 1) for _, size, _ in space.chains if size >= 2
        )
        blocks = tuple(sorted(blocks, key=lambda b: (b[0], -b[1])))
        form = RealPartJordanForm(blocks, sum(s for _, s in blocks))
        return BoundarySpace(canonical_matrix(form), space.solver)

    # A(1) keeps the chain order; sizes sorted descending already because
    # interior_indices stacks chains in matrix order
    reduced = space._reduced_space("a1", build)
    # stack interior coordinates chain by chain to match A(1)'s block order
    order = np.argsort([-(s - 1) for _, s, _ in space.chains if s >= 2],
                       kind="stable")
    xs, xs2 = [], []
    big = [c for c in space.chains if c[1] >= 2]
    for j in order:
        _, size, off = big[j]
        xs.append(p[off : off + size - 1])
        xs2.append(p2[off : off + size - 1])
    x = np.concatenate(xs)
    x2 = np.concatenate(xs2)
    return d_full, dist(reduced, x, x2)


def fiber_hausdorff(space: BoundarySpace, y, y2) -> float:
    """Closed-form Hausdorff distance |y - y'|^(1/lam) between pi_A fibers."""
    lam = _single_lambda(space)
    k = space.projection_indices().size
    y = check_vector(y, k)
    y2 = check_vector(y2, k)
    gap = float(np.linalg.norm(y2 - y))
    return gap ** (1.0 / lam)


def point_to_fiber(space: BoundarySpace, p, y2, samples: int = 10_000,
                   seed: int = 0) -> float:
    """Sampled distance from p to the fiber pi_A^{-1}(y').

    One-sided: every sample is a genuine distance to a fiber point, so
    the estimate approaches the true value from above.
    """
    lam = _single_lambda(space)
    p = check_vector(p, space.n)
    pi_idx = space.projection_indices()
    y2 = check_vector(y2, pi_idx.size)
    inner = space.interior_indices()
    gap = float(np.linalg.norm(y2 - p[pi_idx]))
    if inner.size == 0 or gap == 0.0:
        q = p.copy()
        q[pi_idx] = y2
        return dist(space, p, q)
    t0 = math.log(gap) / lam
    width = 4.0 * (1.0 + gap) * (1.0 + abs(t0)) ** (space.max_block - 1)
    rng = np.random.default_rng(seed)
    rounds = 5
    per_round = max(2, samples // rounds)
    center = p[inner].astype(float)
    best = math.inf
    for _ in range(rounds):
        free = center + rng.uniform(-width, width, (per_round, inner.size))
        free[0] = center  # always evaluate the incumbent
        q = np.tile(p, (per_round, 1))
        q[:, inner] = free
        q[:, pi_idx] = y2
        d = dist_pairs(space, np.tile(p, (per_round, 1)), q)
        j = int(np.argmin(d))
        if d[j] < best:
            best = float(d[j])
            center = free[j]
        width *= 0.3
    return best


def block_distance_check(space: BoundarySpace, x, y_top,
                         samples: int = 10_000, seed: int = 0):
    """(sampled distance from x to the slab V_1 x .. x V_{k-1} x {y_k},
    D_{A_k}(x_k, y_k)) for a multi-eigenvalue canonical matrix.

    The sampled estimate is one-sided (>= the closed form).
    """
    if space.chains is None:
        raise ValueError("operation requires a canonical block-diagonal matrix")
    lams = sorted({c[0] for c in space.chains})
    if len(lams) < 2:
        raise ValueError("operation requires at least two distinct eigenvalues")
    x = check_vector(x, space.n)
    lam_top = lams[-1]
    top = [c for c in space.chains if c[0] == lam_top]
    top_idx = np.concatenate(
        [np.arange(off, off + size) for _, size, off in top]
    )
    free_idx = np.setdiff1d(np.arange(space.n), top_idx)
    y_top = check_vector(y_top, top_idx.size)

    def build():
        from .spectral import canonical_matrix

        blocks = tuple(
            sorted(((lam, s) for lam, s, _ in top), key=lambda b: (b[0], -b[1]))
        )
        form = RealPartJordanForm(blocks, sum(s for _, s in blocks))
        return BoundarySpace(canonical_matrix(form), space.solver)

    sub = space._reduced_space(("top", lam_top), build)
    order = np.argsort([-s for _, s, _ in top], kind="stable")
    xk = np.concatenate([x[top[j][2] : top[j][2] + top[j][1]] for j in order])
    yk = []
    pos = 0
    segs = []
    for _, size, _ in top:
        segs.append(y_top[pos : pos + size])
        pos += size
    yk = np.concatenate([segs[j] for j in order])
    closed = dist(sub, xk, yk)

    if free_idx.size == 0:
        return closed, closed
    rng = np.random.default_rng(seed)
    rounds = 5
    per_round = max(2, samples // rounds)
    center = x[free_idx].astype(float)
    width = 4.0 * (1.0 + closed)
    best = math.inf
    for _ in range(rounds):
        free = center + rng.uniform(-width, width, (per_round, free_idx.size))
        free[0] = center  # always evaluate the incumbent
        q = np.tile(x, (per_round, 1))
        q[:, free_idx] = free
        q[:, top_idx] = y_top
        d = dist_pairs(space, np.tile(x, (per_round, 1)), q)
        j = int(np.argmin(d))
        if d[j] < best:
            best = float(d[j])
            center = free[j]
        width *= 0.3
    return best, closed
