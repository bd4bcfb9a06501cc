"""Boundary self-maps: construction, theoretical biLipschitz bounds and
empirical distortion measurements.

The Jordan-block family F(x) = (a_0 I + a_1 N + ... + a_{n-2} N^{n-2}) x
+ v + (C(x_n), 0, ..., 0)^T with Lipschitz C exhausts the quasisymmetric
self-maps of (R^n, D_{J_n}); C is represented as a piecewise-linear
function so its Lipschitz constant is exact and the family is closed
under composition by symbolic recombination.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import check_matrix, check_vector, nilpotent_exp, nilpotent_shift
from .metric import BoundarySpace, dist_pairs


# ---------------------------------------------------------------------------
# piecewise-linear functions


@dataclass(frozen=True)
class PiecewiseLinear:
    """PWL function given by knots [(y, value), ...]; beyond the end
    knots it continues with the terminal segment slopes (constant for a
    single knot)."""

    knots: tuple

    def __post_init__(self):
        ks = tuple((float(y), float(v)) for y, v in self.knots)
        if not ks:
            raise ValueError("need at least one knot")
        ys = [y for y, _ in ks]
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise ValueError("knot positions must be strictly increasing")
        if not all(math.isfinite(y) and math.isfinite(v) for y, v in ks):
            raise ValueError("knots must be finite")
        object.__setattr__(self, "knots", ks)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls(((0.0, value),))

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "PiecewiseLinear":
        if slope == 0.0:
            return cls.constant(intercept)
        return cls(((0.0, intercept), (1.0, intercept + slope)))

    def _arrays(self):
        ys = np.array([y for y, _ in self.knots])
        vs = np.array([v for _, v in self.knots])
        return ys, vs

    def slopes(self) -> np.ndarray:
        ys, vs = self._arrays()
        if len(ys) == 1:
            return np.zeros(1)
        return np.diff(vs) / np.diff(ys)

    def lipschitz(self) -> float:
        return float(np.max(np.abs(self.slopes())))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ys, vs = self._arrays()
        if len(ys) == 1:
            return np.full(y.shape, vs[0])
        out = np.interp(y, ys, vs)
        sl = self.slopes()
        out = np.where(y < ys[0], vs[0] + sl[0] * (y - ys[0]), out)
        out = np.where(y > ys[-1], vs[-1] + sl[-1] * (y - ys[-1]), out)
        return out

    def scaled(self, k: float) -> "PiecewiseLinear":
        return PiecewiseLinear(tuple((y, k * v) for y, v in self.knots))

    def compose_affine(self, a: float, b: float) -> "PiecewiseLinear":
        """The function y -> self(a*y + b), a != 0 (exact reparametrization)."""
        if a == 0.0:
            raise ValueError("affine coefficient must be nonzero")
        ks = [((y - b) / a, v) for y, v in self.knots]
        ks.sort(key=lambda kv: kv[0])
        return PiecewiseLinear(tuple(ks))

    def add(self, other: "PiecewiseLinear") -> "PiecewiseLinear":
        """Exact sum; sentinel knots past both ends preserve the
        extension slopes."""
        ys = sorted(
            {y for y, _ in self.knots} | {y for y, _ in other.knots}
        )
        ys = [ys[0] - 1.0] + ys + [ys[-1] + 1.0]
        grid = np.array(ys)
        vals = self(grid) + other(grid)
        return PiecewiseLinear(tuple(zip(grid.tolist(), vals.tolist())))


# ---------------------------------------------------------------------------
# map specs


@dataclass(frozen=True)
class Translation:
    v: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "v", tuple(float(x) for x in check_vector(self.v))
        )

    @property
    def n(self):
        return len(self.v)


@dataclass(frozen=True, eq=False)
class LinearMap:
    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", check_matrix(self.m))

    @property
    def n(self):
        return self.m.shape[0]


@dataclass(frozen=True)
class Shear:
    """x -> x + (C(x_n), 0, ..., 0)^T."""

    n: int
    c: PiecewiseLinear

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("shear needs dimension >= 2")


@dataclass(frozen=True)
class PolyNilpotent:
    """x -> (a_0 I + a_1 N + ... + a_{n-1} N^{n-1}) x, a_0 != 0."""

    coeffs: tuple

    def __post_init__(self):
        cs = tuple(float(c) for c in self.coeffs)
        if not cs or cs[0] == 0.0:
            raise ValueError("leading coefficient a_0 must be nonzero")
        object.__setattr__(self, "coeffs", cs)

    @property
    def n(self):
        return len(self.coeffs)


@dataclass(frozen=True)
class JordanFamilyMap:
    """The full quasisymmetric family on (R^n, D_{J_n})."""

    n: int
    a: tuple  # a_0 .. a_{n-2}
    v: tuple
    c: PiecewiseLinear

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("jordan_family needs dimension >= 2")
        a = tuple(float(x) for x in self.a)
        if len(a) != self.n - 1 or a[0] == 0.0:
            raise ValueError("need a_0 .. a_{n-2} with a_0 != 0")
        v = tuple(float(x) for x in check_vector(self.v, self.n))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class Composition:
    maps: tuple

    def __post_init__(self):
        if not self.maps:
            raise ValueError("composition needs at least one map")
        ns = {m.n for m in self.maps}
        if len(ns) != 1:
            raise ValueError("composed maps must share a dimension")
        object.__setattr__(self, "maps", tuple(self.maps))

    @property
    def n(self):
        return self.maps[0].n


def poly_in_nilpotent(n: int, coeffs) -> np.ndarray:
    """sum_k coeffs[k] N^k as an n x n matrix."""
    shift = nilpotent_shift(n)
    out = np.zeros((n, n))
    power = np.eye(n)
    for k, c in enumerate(coeffs):
        if k > 0:
            power = power @ shift
        out += c * power
    return out


def eval_map_batch(spec, x) -> np.ndarray:
    """Apply a map spec to a batch of points (rows)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.n:
        raise ValueError(f"expected points of dimension {spec.n}")
    if isinstance(spec, Translation):
        return x + np.asarray(spec.v)
    if isinstance(spec, LinearMap):
        return x @ spec.m.T
    if isinstance(spec, Shear):
        out = x.copy()
        out[:, 0] += spec.c(x[:, -1])
        return out
    if isinstance(spec, PolyNilpotent):
        return x @ poly_in_nilpotent(spec.n, spec.coeffs).T
    if isinstance(spec, JordanFamilyMap):
        p = poly_in_nilpotent(spec.n, spec.a)
        out = x @ p.T + np.asarray(spec.v)
        out[:, 0] += spec.c(x[:, -1])
        return out
    if isinstance(spec, Composition):
        for inner in reversed(spec.maps):
            x = eval_map_batch(inner, x)
        return x
    raise TypeError(f"unknown map spec {type(spec).__name__}")


def eval_map(spec, x) -> np.ndarray:
    return eval_map_batch(spec, np.asarray(x, dtype=float)[None, :])[0]


def compose_jordan(f: JordanFamilyMap, g: JordanFamilyMap) -> JordanFamilyMap:
    """Symbolic recombination of f o g, again of jordan_family form.

    Products of polynomials in N are truncated at N^{n-1}; the surviving
    N^{n-1} x term equals x_n e_1 and is folded into the C part.
    """
    if f.n != g.n:
        raise ValueError("dimension mismatch")
    n = f.n
    full = [0.0] * n
    for i, fi in enumerate(f.a):
        for j, gj in enumerate(g.a):
            if i + j < n:
                full[i + j] += fi * gj
    coeffs = tuple(full[: n - 1])
    pf = poly_in_nilpotent(n, f.a)
    v_new = tuple((pf @ np.asarray(g.v) + np.asarray(f.v)).tolist())
    c_new = g.c.scaled(f.a[0]).add(f.c.compose_affine(g.a[0], g.v[-1]))
    if full[n - 1] != 0.0:
        c_new = c_new.add(PiecewiseLinear.linear(full[n - 1]))
    return JordanFamilyMap(n, coeffs, v_new, c_new)


# ---------------------------------------------------------------------------
# JSON wire format


def _pwl_to_json(c: PiecewiseLinear):
    return {"knots": [[y, v] for y, v in c.knots]}


def _pwl_from_json(doc) -> PiecewiseLinear:
    return PiecewiseLinear(tuple((y, v) for y, v in doc["knots"]))


def map_to_json_dict(spec):
    if isinstance(spec, Translation):
        return {"kind": "translation", "v": list(spec.v)}
    if isinstance(spec, LinearMap):
        return {"kind": "linear", "M": spec.m.tolist()}
    if isinstance(spec, Shear):
        return {"kind": "shear", "n": spec.n, "C": _pwl_to_json(spec.c)}
    if isinstance(spec, PolyNilpotent):
        return {"kind": "poly_nilpotent", "n": spec.n,
                "coeffs": list(spec.coeffs)}
    if isinstance(spec, JordanFamilyMap):
        return {
            "kind": "jordan_family",
            "n": spec.n,
            "a": list(spec.a),
            "v": list(spec.v),
            "C": _pwl_to_json(spec.c),
        }
    if isinstance(spec, Composition):
        return {
            "kind": "composition",
            "maps": [map_to_json_dict(m) for m in spec.maps],
        }
    raise TypeError(f"unknown map spec {type(spec).__name__}")


def map_from_json_dict(doc):
    kind = doc.get("kind")
    if kind == "translation":
        return Translation(tuple(doc["v"]))
    if kind == "linear":
        return LinearMap(np.asarray(doc["M"], dtype=float))
    if kind == "shear":
        return Shear(int(doc["n"]), _pwl_from_json(doc["C"]))
    if kind == "poly_nilpotent":
        return PolyNilpotent(tuple(doc["coeffs"]))
    if kind == "jordan_family":
        return JordanFamilyMap(
            int(doc["n"]),
            tuple(doc["a"]),
            tuple(doc["v"]),
            _pwl_from_json(doc["C"]),
        )
    if kind == "composition":
        return Composition(tuple(map_from_json_dict(m) for m in doc["maps"]))
    raise ValueError(f"unknown map kind {kind!r}")


def load_map(path):
    with open(path, encoding="utf-8") as fh:
        return map_from_json_dict(json.load(fh))


def save_map(path, spec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(map_to_json_dict(spec), fh)
        fh.write("\n")


# ---------------------------------------------------------------------------
# theoretical biLipschitz bounds


def q_exp_nilpotent(n: int, u) -> np.ndarray:
    """Q(e^{uN}) = sum_{k=0}^{n-1} (n-k) (u^k / k!)^2 (even in u)."""
    u = np.asarray(u, dtype=float)
    total = np.zeros(u.shape)
    for k in range(n):
        total += (n - k) * (u**k / math.factorial(k)) ** 2
    return total


def _largest_root(fn, tol: float = 1e-12) -> float:
    """Largest real root of fn (fn -> +inf right of it, -inf far left)."""
    hi = 1.0
    for _ in range(60):
        if fn(hi) > 0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("no positive tail found while bracketing")
    lo = hi
    step = 0.05
    for _ in range(200_000):
        lo -= step
        if fn(lo) <= 0:
            break
        step *= 1.1
    else:
        raise RuntimeError("no sign change found while bracketing")
    hi = lo + step
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shear_bilip_bound(n: int, lipschitz: float) -> float:
    """e^a with a the largest u solving e^u = (1+L) sqrt(Q(e^{uN})).

    Any shear x + (C(x_n), 0, .., 0) with L-Lipschitz C distorts
    D_{J_n} by at most this factor in either direction.
    """
    if lipschitz < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    if n == 1:
        return 1.0
    a = _largest_root(
        lambda u: u - math.log1p(lipschitz)
        - 0.5 * math.log(float(q_exp_nilpotent(n, u)))
    )
    return math.exp(max(a, 0.0))


def _nilpotent_coeff_mul(p, q, n):
    out = [0.0] * n
    for i, pi in enumerate(p):
        if pi == 0.0:
            continue
        for j, qj in enumerate(q):
            if i + j < n:
                out[i + j] += pi * qj
    return out


def nilpotent_poly_inverse(coeffs) -> tuple:
    """Coefficients of B_2^{-1} via the finite Neumann series
    a_0^{-1} (I + beta + ... + beta^{n-1}), beta = -(a_1 N + ...)/a_0."""
    n = len(coeffs)
    if coeffs[0] == 0.0:
        raise ValueError("leading coefficient a_0 must be nonzero")
    beta = [0.0] + [-c / coeffs[0] for c in coeffs[1:]]
    acc = [1.0] + [0.0] * (n - 1)
    term = [1.0] + [0.0] * (n - 1)
    for _ in range(1, n):
        term = _nilpotent_coeff_mul(term, beta, n)
        acc = [x + y for x, y in zip(acc, term)]
    return tuple(c / coeffs[0] for c in acc)


def _q_nilpotent_poly(coeffs) -> float:
    n = len(coeffs)
    return float(sum((n - k) * c * c for k, c in enumerate(coeffs)))


def poly_bilip_bound(n: int, coeffs) -> float:
    """e^{max(a, a')} with a, a' the largest u solving
    e^u = sqrt(Q(e^{uN}) Q(B)) for B = B_2 and B = B_2^{-1}."""
    coeffs = tuple(float(c) for c in coeffs)
    if len(coeffs) != n:
        raise ValueError(f"need exactly {n} coefficients")
    if coeffs[0] == 0.0:
        raise ValueError("leading coefficient a_0 must be nonzero")
    roots = []
    for cs in (coeffs, nilpotent_poly_inverse(coeffs)):
        qb = _q_nilpotent_poly(cs)
        roots.append(
            _largest_root(
                lambda u, qb=qb: u
                - 0.5 * math.log(float(q_exp_nilpotent(n, u)) * qb)
            )
        )
    return math.exp(max(max(roots), 0.0))


def jordan_family_bound(spec: JordanFamilyMap) -> float:
    """Distortion bound for the full family map via its decomposition
    into translation * shear * nilpotent-polynomial.

    The shear factor in the decomposition carries C(y / a_0), so its
    Lipschitz constant is L(C) / |a_0|.
    """
    shear_l = spec.c.lipschitz() / abs(spec.a[0])
    poly = poly_bilip_bound(spec.n, spec.a + (0.0,))
    return shear_bilip_bound(spec.n, shear_l) * poly


# ---------------------------------------------------------------------------
# empirical estimators


def empirical_bilip(spec, space: BoundarySpace, samples: int = 10_000,
                    seed: int = 0, box_radius: float = 5.0):
    """(min, max) of dist(Fx, Fy) / dist(x, y) over sampled pairs."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box_radius, box_radius, (samples, space.n))
    y = rng.uniform(-box_radius, box_radius, (samples, space.n))
    d1 = dist_pairs(space, x, y)
    ok = d1 > 0
    fx = eval_map_batch(spec, x[ok])
    fy = eval_map_batch(spec, y[ok])
    d2 = dist_pairs(space, fx, fy)
    ratios = d2 / d1[ok]
    return float(np.min(ratios)), float(np.max(ratios))


def transfer_check(a, b, m, s: float, samples: int = 10_000, seed: int = 0,
                   box_radius: float = 5.0):
    """(min, max) of D_B(Mx, My) / D_A(x, y)^s over sampled pairs.

    Report only: finite stable ratios exhibit the snowflake-biLipschitz
    relation between the two boundaries.
    """
    m = check_matrix(m)
    if 1.0 / np.linalg.cond(m) < 1e-12:
        raise ValueError("transfer matrix M is singular")
    space_a = BoundarySpace(a)
    space_b = BoundarySpace(b)
    if space_a.n != space_b.n or m.shape[0] != space_a.n:
        raise ValueError("dimension mismatch")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box_radius, box_radius, (samples, space_a.n))
    y = rng.uniform(-box_radius, box_radius, (samples, space_a.n))
    da = dist_pairs(space_a, x, y)
    ok = da > 0
    db = dist_pairs(space_b, x[ok] @ m.T, y[ok] @ m.T)
    ratios = db / da[ok] ** s
    return float(np.min(ratios)), float(np.max(ratios))


@dataclass(frozen=True)
class DistortionRadius:
    radius: float
    sup_out: float
    inf_out: float
    sup_ratio: float
    inf_ratio: float
    samples: int
    failures: int


@dataclass(frozen=True)
class DistortionReport:
    rows: tuple

    @property
    def limit_sup_ratio(self) -> float:
        """Ratio at the smallest tabulated radius (reported, not claimed)."""
        return self.rows[-1].sup_ratio

    @property
    def limit_inf_ratio(self) -> float:
        return self.rows[-1].inf_ratio


def distortion_profile(spec, space: BoundarySpace, x, radii,
                       samples_per_radius: int = 200,
                       seed: int = 0,
                       special_family: bool = False) -> DistortionReport:
    """Annulus estimates of the pointwise distortion of F at x.

    Per radius r: sup of dist(Fx, Fx') over x' with dist(x, x') in
    [0.9r, r] and inf over [r, 1.1r].  Sample points are placed exactly
    on target spheres using the dilation similarity (e^{sA} scales D_A
    by e^s), so annulus misses only arise from degenerate directions.
    One shared direction is placed at distance exactly r in both annuli,
    which keeps sup >= inf structurally.

    With ``special_family=True`` the annulus sampling is replaced by the
    conformality probe along the explicit point family at heights
    t = log r (the family realizes dist(x, x_t) = e^t exactly); this is
    the variant whose small-r limit the conformality test pins down.
    """
    x = check_vector(x, space.n)
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(
        b >= a for a, b in zip(radii, radii[1:])
    ):
        raise ValueError("radii must be positive and strictly decreasing")
    if special_family:
        rows = []
        for r in radii:
            ratio = float(conformal_probe(spec, space.n, [math.log(r)],
                                          base=x)[0])
            rows.append(
                DistortionRadius(r, ratio * r, ratio * r, ratio, ratio, 1, 0)
            )
        return DistortionReport(tuple(rows))
    rng = np.random.default_rng(seed)
    rows = []
    k = samples_per_radius
    for r in radii:
        dirs = rng.normal(size=(k, space.n))
        norms = np.linalg.norm(dirs, axis=1)
        good = norms > 0
        failures = int(np.sum(~good))
        dirs = dirs[good] / norms[good][:, None]
        base_d = dist_pairs(space, np.tile(x, (len(dirs), 1)), x + dirs)
        targets_hi = r * rng.uniform(0.9, 1.0, len(dirs))
        targets_lo = r * rng.uniform(1.0, 1.1, len(dirs))
        targets_hi[0] = r
        targets_lo[0] = r
        pts = {"hi": [], "lo": []}
        for label, targets in (("hi", targets_hi), ("lo", targets_lo)):
            for i in range(len(dirs)):
                s = math.log(targets[i] / base_d[i])
                pts[label].append(x + scipy.linalg.expm(s * space.a) @ dirs[i])
        fx = eval_map_batch(spec, x[None, :])
        sup_vals = dist_pairs(
            space, np.tile(fx, (len(dirs), 1)),
            eval_map_batch(spec, np.array(pts["hi"])),
        )
        inf_vals = dist_pairs(
            space, np.tile(fx, (len(dirs), 1)),
            eval_map_batch(spec, np.array(pts["lo"])),
        )
        sup_out = float(np.max(sup_vals))
        inf_out = float(np.min(inf_vals))
        rows.append(
            DistortionRadius(
                r, sup_out, inf_out, sup_out / r, inf_out / r,
                len(dirs), failures,
            )
        )
    return DistortionReport(tuple(rows))


@dataclass(frozen=True, eq=False)
class QSProfile:
    """Scatter of (input ratio, output ratio) with its monotone upper
    envelope (a candidate eta gauge)."""

    ratios_in: np.ndarray
    ratios_out: np.ndarray
    envelope_out: np.ndarray
    skipped: int

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.ratios_in, t, side="right") - 1
        vals = np.where(idx >= 0, self.envelope_out[np.maximum(idx, 0)], 0.0)
        return vals


def qs_profile(spec, space: BoundarySpace, triples: int = 10_000,
               seed: int = 0, box_radius: float = 5.0) -> QSProfile:
    """Sampled quasisymmetry profile of F over random triples."""
    if triples < 1:
        raise ValueError("need at least one triple")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box_radius, box_radius, (3, triples, space.n))
    x, y, z = pts
    dxy = dist_pairs(space, x, y)
    dxz = dist_pairs(space, x, z)
    ok = (dxy > 0) & (dxz > 0)
    skipped = int(np.sum(~ok))
    fx = eval_map_batch(spec, x[ok])
    fy = eval_map_batch(spec, y[ok])
    fz = eval_map_batch(spec, z[ok])
    oxy = dist_pairs(space, fx, fy)
    oxz = dist_pairs(space, fx, fz)
    inner = (oxz > 0)
    rin = (dxy[ok] / dxz[ok])[inner]
    rout = (oxy / oxz)[inner]
    skipped += int(np.sum(~inner))
    order = np.argsort(rin, kind="stable")
    rin = rin[order]
    rout = rout[order]
    return QSProfile(rin, rout, np.maximum.accumulate(rout), skipped)


def conformal_probe(spec, n: int, t_values, base=None) -> np.ndarray:
    """Horospherical distortion along the special point family of the
    conformality test on (R^n, D_{J_n}).

    The family is x_t = base + e^{tN}(0, .., 0, e^t)^T; the probe
    returns |e^{-tN}(F(x_t) - F(base))| / e^t per t.  For a shear with C
    differentiable at the base height this converges (t -> -inf) to
    sqrt(1 + C'(0)^2): equal to 1 iff the map is conformal at the point,
    and reached exactly at every t when C is globally affine.
    """
    if base is None:
        base = np.zeros(n)
    base = check_vector(base, n)
    t_values = np.asarray(t_values, dtype=float)
    ratios = np.empty(t_values.shape)
    f_base = eval_map(spec, base)
    for i, t in enumerate(t_values):
        tail = math.exp(t) * nilpotent_exp(n, t)[:, -1]
        xt = base + tail
        diff = eval_map(spec, xt) - f_base
        ratios[i] = float(
            np.linalg.norm(nilpotent_exp(n, -t) @ diff) / math.exp(t)
        )
    return ratios
