"""Markovian coefficient family and admissible-jump construction.

The equation coefficient is f(t, x) = phi(pS_t - x) * phi(x) * g(t, x)
where pS is the predictable projection of 1 - Z, phi is a smooth clamp
that is exactly the identity on [-1, 1], and g is a smooth compactly
supported vector function built from bumps and plateaus.  The two clamp
factors confine solutions to the tube [0, 1 - Z]: f vanishes at both
of its boundaries.

Jump admissibility: a candidate jump vector z of the driving martingale Y
is admissible at a step when

* 2 |g(t, x)' z| < 1 + dm          for all x      (keeps the atom weight positive)
* df/dx(t, x)' z > -(1 + dm)       for all x      (one-step map stays monotone)

Both quantities are linear in z, so scaling a candidate down far enough
always works; `build_y` walks a power-of-two ladder to pick the largest
admissible scale per node, which preserves exact zero conditional means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .grids import PathBundle, philox_stream
from .tree import ScenarioTree

__all__ = [
    "smoothstep",
    "smoothstep_deriv",
    "smooth_clamp",
    "smooth_clamp_deriv",
    "BumpSpec",
    "PlateauSpec",
    "ComponentSpec",
    "CoefficientSpec",
    "NaturalPair",
    "evaluate_f",
    "evaluate_f_x",
    "jump_set_margin",
    "build_y",
    "check_pair_conditions",
]


# ---------------------------------------------------------------------------
# smooth primitives

def _bump_exp(u):
    """exp(-1/u) for u > 0, exactly 0 elsewhere (all derivatives vanish)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    pos = u > 0.0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / u[pos])
    return out


def smoothstep(u):
    """C-infinity monotone step: exactly 0 for u <= 0 and 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    b1 = _bump_exp(u)
    b2 = _bump_exp(1.0 - u)
    out = np.empty(u.shape)
    lo = u <= 0.0
    hi = u >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    out[mid] = b1[mid] / (b1[mid] + b2[mid])
    return out


def smoothstep_deriv(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    mid = (u > 0.0) & (u < 1.0)
    um = u[mid]
    b1 = np.exp(-1.0 / um)
    b2 = np.exp(-1.0 / (1.0 - um))
    num = b1 * b2 * (1.0 / um**2 + 1.0 / (1.0 - um) ** 2)
    out[mid] = num / (b1 + b2) ** 2
    return out


def _phi_tail_tables():
    # phi continues past 1 with slope 1 - smoothstep((t-1)/2) and flattens at
    # t = 3; the integrand is flat to all orders at both endpoints, so the
    # trapezoid sum converges far faster than the table resolution suggests
    t = np.linspace(1.0, 3.0, 4097)
    slope = 1.0 - smoothstep((t - 1.0) / 2.0)
    h = t[1] - t[0]
    vals = 1.0 + np.concatenate([[0.0], np.cumsum((slope[1:] + slope[:-1]) * (0.5 * h))])
    vals = np.minimum(vals, 2.0)
    curv = float(np.max(np.abs(np.diff(slope))) / h)
    return t, vals, curv


_TAIL_T, _TAIL_PHI, _PHI_CURV_MAX = _phi_tail_tables()


def smooth_clamp(x):
    """Odd, smooth, nondecreasing; exactly x on [-1, 1]; saturates near 2.

    |phi| <= 2 and |phi(x)| <= |x| everywhere.  The identity region is a
    bitwise pass-through, which downstream exactness arguments rely on.
    """
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    tail = np.sign(x) * np.interp(a, _TAIL_T, _TAIL_PHI)
    out = np.where(a <= 1.0, x, tail)
    return out if out.ndim else float(out)


def smooth_clamp_deriv(x):
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    out = np.where(a <= 1.0, 1.0, 1.0 - smoothstep((a - 1.0) / 2.0))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# coefficient specification

@dataclass(frozen=True)
class BumpSpec:
    """Smooth bump height * exp(1 - 1/(1-y^2)) with y = (x-center)/width."""

    center: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0.0:
            raise ConfigurationError("bump width must be positive")

    def value(self, x):
        y = (np.asarray(x, dtype=float) - self.center) / self.width
        out = np.zeros(y.shape)
        inside = np.abs(y) < 1.0
        yi = y[inside]
        out[inside] = self.height * np.exp(1.0 - 1.0 / (1.0 - yi**2))
        return out

    def deriv(self, x):
        y = (np.asarray(x, dtype=float) - self.center) / self.width
        out = np.zeros(y.shape)
        inside = np.abs(y) < 1.0
        yi = y[inside]
        core = np.exp(1.0 - 1.0 / (1.0 - yi**2))
        out[inside] = self.height * core * (-2.0 * yi / (1.0 - yi**2) ** 2) / self.width
        return out

    def support(self):
        return self.center - self.width, self.center + self.width


@dataclass(frozen=True)
class PlateauSpec:
    """Smooth plateau: exactly `height` on [lo, hi], zero outside the ramps."""

    lo: float
    hi: float
    ramp: float
    height: float

    def __post_init__(self):
        if self.ramp <= 0.0 or self.hi < self.lo:
            raise ConfigurationError("plateau needs hi >= lo and a positive ramp")

    def _args(self, x):
        x = np.asarray(x, dtype=float)
        left = (x - (self.lo - self.ramp)) / self.ramp
        right = ((self.hi + self.ramp) - x) / self.ramp
        return left, right

    def value(self, x):
        left, right = self._args(x)
        return self.height * smoothstep(left) * smoothstep(right)

    def deriv(self, x):
        left, right = self._args(x)
        dl = smoothstep_deriv(left) / self.ramp
        dr = -smoothstep_deriv(right) / self.ramp
        return self.height * (dl * smoothstep(right) + smoothstep(left) * dr)

    def support(self):
        return self.lo - self.ramp, self.hi + self.ramp


@dataclass(frozen=True)
class ComponentSpec:
    """One component of g: a sum of bumps and plateaus, optional affine time weight."""

    bumps: tuple = ()
    plateaus: tuple = ()
    time_affine: tuple = (1.0, 0.0)

    def weight(self, t):
        a, b = self.time_affine
        return a + b * t

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for piece in list(self.bumps) + list(self.plateaus):
            out = out + piece.value(x)
        return self.weight(t) * out

    def deriv(self, t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for piece in list(self.bumps) + list(self.plateaus):
            out = out + piece.deriv(x)
        return self.weight(t) * out

    def support(self):
        pieces = list(self.bumps) + list(self.plateaus)
        if not pieces:
            return None
        spans = [p.support() for p in pieces]
        return min(s[0] for s in spans), max(s[1] for s in spans)


@dataclass(frozen=True)
class CoefficientSpec:
    """Vector coefficient g plus the scan-grid resolution for margin suprema."""

    components: tuple
    x_resolution: int = 2048

    def __post_init__(self):
        if not self.components:
            raise ConfigurationError("need at least one coefficient component")
        if self.x_resolution < 16:
            raise ConfigurationError("x_resolution too small")

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def is_autonomous(self) -> bool:
        return all(c.time_affine[1] == 0.0 for c in self.components)

    def support(self):
        spans = [c.support() for c in self.components if c.support() is not None]
        if not spans:
            return 0.0, 1.0
        return min(s[0] for s in spans), max(s[1] for s in spans)

    def scan_grid(self, n: int | None = None) -> np.ndarray:
        lo, hi = self.support()
        return np.linspace(lo, hi, n or self.x_resolution)

    def g_value(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([c.value(t, x) for c in self.components])

    def g_deriv(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([c.deriv(t, x) for c in self.components])

    def bound_g(self, t) -> float:
        return float(np.max(np.abs(self.g_value(t, self.scan_grid())), initial=0.0))

    def bound_g_deriv(self, t) -> float:
        return float(np.max(np.abs(self.g_deriv(t, self.scan_grid())), initial=0.0))

    def lipschitz_bound(self, t) -> float:
        """Global Lipschitz constant of x -> f(t, x) from the factor bounds."""
        return 4.0 * self.bound_g(t) + 4.0 * self.bound_g_deriv(t)


def evaluate_f(spec: CoefficientSpec, t: float, x, pred_one_minus_z) -> np.ndarray:
    """f(t, x) = phi(pS - x) phi(x) g(t, x); shape (m,) + broadcast shape."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(pred_one_minus_z, dtype=float)
    return smooth_clamp(p - x) * smooth_clamp(x) * spec.g_value(t, x)


def evaluate_f_x(spec: CoefficientSpec, t: float, x, pred_one_minus_z) -> np.ndarray:
    """Exact x-derivative of f (phi has a closed-form derivative)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(pred_one_minus_z, dtype=float)
    phi_gap = smooth_clamp(p - x)
    dphi_gap = smooth_clamp_deriv(p - x)
    phi_x = smooth_clamp(x)
    dphi_x = smooth_clamp_deriv(x)
    g = spec.g_value(t, x)
    gx = spec.g_deriv(t, x)
    return -dphi_gap * phi_x * g + phi_gap * (dphi_x * g + phi_x * gx)


# ---------------------------------------------------------------------------
# jump admissibility

def _dot_components(vec, arrays):
    # fixed-order contraction over the component axis
    out = vec[0] * arrays[0]
    for j in range(1, len(vec)):
        out = out + vec[j] * arrays[j]
    return out


def jump_set_margin(spec, t, dm, z, pred_one_minus_z, n_grid=None):
    """Margins of the two admissibility conditions for one jump vector z.

    margin_a = (1 + dm) - sup_x 2|g(t,x)'z|
    margin_b = (1 + dm) + inf_x df/dx(t,x)'z

    z is admissible iff both are strictly positive.  Suprema are taken on a
    dense grid over the support of g; off the support both quantities
    vanish, which the inf and sup include analytically.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (spec.m,):
        raise GridMismatchError(f"jump vector needs {spec.m} components")
    xs = spec.scan_grid(n_grid)
    gz = _dot_components(z, spec.g_value(t, xs))
    sup_a = 2.0 * float(np.max(np.abs(gz), initial=0.0))
    fxz = _dot_components(z, evaluate_f_x(spec, t, xs, pred_one_minus_z))
    inf_b = min(float(np.min(fxz, initial=0.0)), 0.0)
    return (1.0 + dm) - sup_a, (1.0 + dm) + inf_b


class _StepMarginOracle:
    """Per-step margin machinery shared by the tree and bundle builders.

    For fixed t and candidate branch values, sup_x 2|g'z_b| does not depend
    on the state, while inf_x df/dx'z_b depends on it only through the
    predictable pS.  The oracle evaluates g once per step and offers either
    an exact per-state scan (trees) or a conservative lookup table over a
    pS grid (large path bundles) whose cells are endpoint minima padded by
    a Lipschitz-in-pS correction.
    """

    def __init__(self, spec, t, cand, n_grid=None):
        self.spec = spec
        self.cand = cand  # (m, b) candidate branch values
        self.xs = spec.scan_grid(n_grid)
        g = spec.g_value(t, self.xs)
        gx = spec.g_deriv(t, self.xs)
        phi_x = smooth_clamp(self.xs)
        dphi_x = smooth_clamp_deriv(self.xs)
        nb = cand.shape[1]
        self.gz = np.stack([_dot_components(cand[:, b], g) for b in range(nb)])
        gxz = np.stack([_dot_components(cand[:, b], gx) for b in range(nb)])
        self.sup_a = 2.0 * np.max(np.abs(self.gz), axis=1, initial=0.0)  # (b,)
        # inf_x df/dx'z_b = min_x of -phi'(pS - x) g0_b + phi(pS - x) g1_b
        self.g0 = phi_x * self.gz
        self.g1 = dphi_x * self.gz + phi_x * gxz

    def inf_b_exact(self, ps) -> np.ndarray:
        """(states, b) exact grid infima at the given predictable states."""
        ps = np.atleast_1d(np.asarray(ps, dtype=float))
        nb = self.g0.shape[0]
        out = np.empty((ps.size, nb))
        chunk = max(1, (1 << 22) // self.xs.size)
        for lo in range(0, ps.size, chunk):
            gap = ps[lo : lo + chunk, None] - self.xs[None, :]
            phi_gap = smooth_clamp(gap)
            dphi_gap = smooth_clamp_deriv(gap)
            for b in range(nb):
                vals = -dphi_gap * self.g0[b] + phi_gap * self.g1[b]
                out[lo : lo + chunk, b] = np.minimum(vals.min(axis=1), 0.0)
        return out

    def build_table(self, n_cells: int = 128):
        ps_grid = np.linspace(0.0, 1.0, n_cells + 1)
        node_vals = self.inf_b_exact(ps_grid)  # (cells+1, b)
        lip = _PHI_CURV_MAX * np.max(np.abs(self.g0), axis=1, initial=0.0) + np.max(
            np.abs(self.g1), axis=1, initial=0.0
        )
        step = ps_grid[1] - ps_grid[0]
        self._table_grid = ps_grid
        self._table_cells = np.minimum(node_vals[:-1], node_vals[1:]) - lip * step

    def inf_b_table(self, ps) -> np.ndarray:
        idx = np.clip(
            np.searchsorted(self._table_grid, ps, side="right") - 1,
            0,
            self._table_cells.shape[0] - 1,
        )
        return self._table_cells[idx]


# ---------------------------------------------------------------------------
# Y construction

_LADDER_GUARD = 1e-9  # keeps selected rungs strictly inside the margin


@dataclass
class NaturalPair:
    """Coefficient spec plus an admissible driving martingale Y.

    ``y_coeffs[driver]`` holds predictable per-component coefficients; each
    Y_j is driver-linear up to a one-ulp recentring residue on the last
    branch, so brackets computed from the coefficients are accurate to
    rounding.  ``rho`` is the selected ladder scale per node or path step;
    margins are realized per step at child level.  Exact zero conditional
    means hold because candidates are recentred patterns and rho is a
    predictable power of two.
    """

    spec: CoefficientSpec
    model: object
    carrier: object
    drivers: tuple
    scale: float
    seed: int
    ladder_depth: int
    candidates: np.ndarray  # (steps, m, branches) recentred branch values
    y_coeffs: dict
    y_increments: object  # bundle: (m, paths, steps); tree: list of (m, nodes_k)
    rho: object
    margin_a: object
    margin_b: object

    @property
    def is_tree(self) -> bool:
        return isinstance(self.carrier, ScenarioTree)

    @property
    def m(self) -> int:
        return self.spec.m

    def y_step(self, k: int):
        """(m, children/paths) realized increments of step k."""
        if self.is_tree:
            return self.y_increments[k - 1]
        return self.y_increments[:, :, k - 1]

    def min_margins(self):
        if self.is_tree:
            a = min(float(np.min(lvl)) for lvl in self.margin_a)
            b = min(float(np.min(lvl)) for lvl in self.margin_b)
        else:
            a = float(np.min(self.margin_a))
            b = float(np.min(self.margin_b))
        return a, b


def _draw_candidates(spec, imodel, grid, drivers, scale, seed):
    """(steps, m, b) exactly mean-zero candidate branch patterns."""
    for d in drivers:
        if imodel.block_of(d) is not imodel.block_of(drivers[0]):
            raise ConfigurationError("candidate drivers must share one block")
    blk = imodel.block_of(drivers[0])
    pats = [imodel.pattern(d) for d in drivers]
    gen = philox_stream(seed, "y-candidates")
    theta = gen.uniform(0.0, 2.0 * np.pi, size=(grid.steps, spec.m))
    cand = np.empty((grid.steps, spec.m, blk.n_branches))
    for k in range(grid.steps):
        for j in range(spec.m):
            if len(pats) == 1:
                raw = scale * pats[0]
            else:
                raw = scale * (np.cos(theta[k, j]) * pats[0] + np.sin(theta[k, j]) * pats[1])
            # recentre the last branch with the block's exact reduction
            acc = 0.0
            for p, v in zip(blk.probs[:-1], raw[:-1]):
                acc += p * float(v)
            raw = raw.copy()
            raw[-1] = -acc / blk.probs[-1]
            cand[k, j] = raw
    return cand, blk


def _ladder_select(bound, depth):
    """Largest power-of-two rung strictly below the bound (guarded), else 0."""
    rho = np.zeros(bound.shape)
    for exp in range(depth + 1):
        rung = 2.0**-exp
        rho = np.where((rho == 0.0) & (rung < bound * (1.0 - _LADDER_GUARD)), rung, rho)
    return rho


def _rho_bounds(one_plus_dm, sup_a, inf_b):
    """Upper bounds on the admissible scale per branch, combined by min.

    Condition a needs rho * sup_a < 1 + dm; condition b needs
    rho * (-inf_b) < 1 + dm.  Inputs broadcast to (..., b); the branch axis
    is reduced away.
    """
    cap_a = np.where(sup_a > 0.0, one_plus_dm / np.where(sup_a > 0.0, sup_a, 1.0), np.inf)
    neg = -inf_b
    cap_b = np.where(neg > 0.0, one_plus_dm / np.where(neg > 0.0, neg, 1.0), np.inf)
    return np.minimum(cap_a, cap_b).min(axis=-1)


def _coeff_split(cand_km, drivers, pats):
    """Express a candidate as sum_d coeff_d * pattern_d (per component)."""
    if len(drivers) == 1:
        ref = pats[0]
        b = int(np.argmax(np.abs(ref)))
        return [cand_km[:, b] / ref[b]]
    a = np.stack([p[:2] for p in pats], axis=1)  # rows branches, cols drivers
    sol = np.linalg.solve(a, cand_km[:, :2].T)
    return [sol[0], sol[1]]


def build_y(
    spec: CoefficientSpec,
    model,
    seed: int = 0,
    scale: float = 1.0,
    drivers: tuple = ("diff", "jump"),
    ladder_depth: int = 10,
    table_cells: int = 128,
) -> NaturalPair:
    """Construct an admissible Y on the survival model's carrier.

    Candidates are mean-zero mixtures of the named driver patterns; at each
    (node, step) the largest rho in {1, 1/2, ..., 2^-ladder_depth, 0} is
    chosen such that every branch outcome (dm_b, rho * z_b) passes
    `jump_set_margin`.  Trees get exact per-node scans; bundles use the
    conservative pS table (still strictly admissible, at worst one rung
    lower in rare borderline states).
    """
    carrier = model.carrier
    imodel = carrier.model
    cand, blk = _draw_candidates(spec, imodel, carrier.grid, drivers, scale, seed)
    args = (spec, model, carrier, imodel, cand, blk, drivers, scale, seed, ladder_depth)
    if isinstance(carrier, ScenarioTree):
        return _build_y_tree(*args)
    if isinstance(carrier, PathBundle):
        return _build_y_bundle(*args, table_cells)
    raise ConfigurationError(f"unsupported carrier {type(carrier).__name__}")


def _build_y_tree(spec, model, tree, imodel, cand, blk, drivers, scale, seed, ladder_depth):
    n = tree.depth
    tri_branch = tree._block_branch[blk.name]
    pats = [imodel.pattern(d) for d in drivers]
    y_inc, rho_levels, ma_levels, mb_levels = [], [], [], []
    coeffs = {d: [] for d in drivers}
    for k in range(1, n + 1):
        oracle = _StepMarginOracle(spec, tree.grid.times[k], cand[k - 1])
        ps = model.pred_one_minus_z[k - 1]
        inf_b = oracle.inf_b_exact(ps)  # (parents, b) over block branches
        dm = model.tilde_m_increments[k - 1].reshape(len(ps), tree.branching)
        one_plus_dm = 1.0 + dm
        # per-branch quantities live on block branches; expand them onto the
        # combined children through the block's branch index
        sup_a_child = oracle.sup_a[tri_branch]
        inf_b_child = inf_b[:, tri_branch]
        bound = _rho_bounds(one_plus_dm, sup_a_child[None, :], inf_b_child)
        rho = _ladder_select(bound, ladder_depth)
        dy = (rho[None, :, None] * cand[k - 1][:, None, tri_branch]).reshape(spec.m, -1)
        y_inc.append(dy)
        rho_levels.append(rho)
        ma_levels.append((one_plus_dm - rho[:, None] * sup_a_child[None, :]).reshape(-1))
        mb_levels.append((one_plus_dm + rho[:, None] * inf_b_child).reshape(-1))
        split = _coeff_split(cand[k - 1], drivers, pats)
        for d, c in zip(drivers, split):
            coeffs[d].append(rho[None, :] * c[:, None])
    return NaturalPair(
        spec=spec,
        model=model,
        carrier=tree,
        drivers=drivers,
        scale=scale,
        seed=seed,
        ladder_depth=ladder_depth,
        candidates=cand,
        y_coeffs=coeffs,
        y_increments=y_inc,
        rho=rho_levels,
        margin_a=ma_levels,
        margin_b=mb_levels,
    )


def _build_y_bundle(
    spec, model, bundle, imodel, cand, blk, drivers, scale, seed, ladder_depth, table_cells
):
    grid = bundle.grid
    n = grid.steps
    p = bundle.n_paths
    branch = bundle.branches[blk.name]
    pats = [imodel.pattern(d) for d in drivers]
    coeff_mats = {d: np.empty((spec.m, p, n)) for d in drivers}
    y_inc = np.empty((spec.m, p, n))
    rho_mat = np.empty((p, n))
    ma_mat = np.empty((p, n))
    mb_mat = np.empty((p, n))
    rows = np.arange(p)
    for k in range(1, n + 1):
        oracle = _StepMarginOracle(spec, grid.times[k], cand[k - 1])
        oracle.build_table(table_cells)
        ps = model.pred_one_minus_z[:, k - 1]
        inf_b = oracle.inf_b_table(ps)  # (paths, b) conservative
        # admissibility must cover every branch outcome of dm, not just the
        # realized one; rebuild the branch values from the coefficients
        dm_branch = 0.0
        for d, c in model.tilde_m_coeffs.items():
            dm_branch = dm_branch + c[:, k - 1 : k] * imodel.pattern(d)[None, :]
        one_plus_dm = 1.0 + dm_branch
        bound = _rho_bounds(one_plus_dm, oracle.sup_a[None, :], inf_b)
        rho = _ladder_select(bound, ladder_depth)
        bk = branch[:, k - 1]
        rho_mat[:, k - 1] = rho
        y_inc[:, :, k - 1] = rho[None, :] * cand[k - 1][:, bk]
        dm_real = model.tilde_m_increments[:, k - 1]
        ma_mat[:, k - 1] = (1.0 + dm_real) - rho * oracle.sup_a[bk]
        mb_mat[:, k - 1] = (1.0 + dm_real) + rho * inf_b[rows, bk]
        split = _coeff_split(cand[k - 1], drivers, pats)
        for d, c in zip(drivers, split):
            coeff_mats[d][:, :, k - 1] = rho[None, :] * c[:, None]
    return NaturalPair(
        spec=spec,
        model=model,
        carrier=bundle,
        drivers=drivers,
        scale=scale,
        seed=seed,
        ladder_depth=ladder_depth,
        candidates=cand,
        y_coeffs=coeff_mats,
        y_increments=y_inc,
        rho=rho_mat,
        margin_a=ma_mat,
        margin_b=mb_mat,
    )


# ---------------------------------------------------------------------------
# pair conditions (i)(ii)(iii)

def _x_prev(pair, x_values, k):
    if pair.is_tree:
        return x_values[k - 1]
    return x_values[:, k - 1]


def _f_at_children(pair, model, x_prev, k, t):
    if pair.is_tree:
        f = evaluate_f(pair.spec, t, x_prev, model.pred_one_minus_z[k - 1])
        return np.stack([pair.carrier.lift(row) for row in f])
    return evaluate_f(pair.spec, t, x_prev, model.pred_one_minus_z[:, k - 1])


def check_pair_conditions(pair, model, x_values, x_prime_values=None, window=None, tiny=1e-12):
    """Pointwise admissibility report for a solution (and optional partner).

    (i)   dm - f(X)'dY / (pS - X-) > -1          where pS != X-
    (ii)  dm + f(X)'dY / X-        >= -1         where X- != 0 (strictness flagged)
    (iii) dm + (f(X) - f(X'))'dY / (X- - X'-) >= -1   where X- != X'-

    plus the equivalent one-step-map monotonicity form of (iii); the report
    records whether the two forms agree.  Violations are counted below
    -1e-12 slack; the function reports and never raises.
    """
    grid = pair.carrier.grid
    lo, hi = window if window is not None else (1, grid.steps)
    slack_i, slack_ii, slack_iii = [], [], []
    strict_ii = True
    agree = True
    for k in range(lo, hi + 1):
        t = grid.times[k]
        if pair.is_tree:
            dm = model.tilde_m_increments[k - 1]
            ps = pair.carrier.lift(model.pred_one_minus_z[k - 1])
        else:
            dm = model.tilde_m_increments[:, k - 1]
            ps = model.pred_one_minus_z[:, k - 1]
        dy = pair.y_step(k)
        x_prev = _x_prev(pair, x_values, k)
        x_child = pair.carrier.lift(x_prev) if pair.is_tree else x_prev
        fdy = _dot_components(_f_at_children(pair, model, x_prev, k, t), dy)
        denom = ps - x_child
        ok = np.abs(denom) > tiny
        if np.any(ok):
            slack_i.append((1.0 + dm[ok]) - fdy[ok] / denom[ok])
        ok = np.abs(x_child) > tiny
        if np.any(ok):
            s = (1.0 + dm[ok]) + fdy[ok] / x_child[ok]
            slack_ii.append(s)
            strict_ii = strict_ii and bool(np.all(s > 0.0))
        if x_prime_values is not None:
            xp_prev = _x_prev(pair, x_prime_values, k)
            xp_child = pair.carrier.lift(xp_prev) if pair.is_tree else xp_prev
            fpdy = _dot_components(_f_at_children(pair, model, xp_prev, k, t), dy)
            denom = x_child - xp_child
            ok = np.abs(denom) > tiny
            if np.any(ok):
                s = (1.0 + dm[ok]) + (fdy[ok] - fpdy[ok]) / denom[ok]
                slack_iii.append(s)
                # equivalent form: the one-step map is monotone between the
                # two states iff the slack is nonnegative
                map_x = x_child[ok] + x_child[ok] * dm[ok] + fdy[ok]
                map_xp = xp_child[ok] + xp_child[ok] * dm[ok] + fpdy[ok]
                map_diff = map_x - map_xp
                same = np.abs(map_diff - denom[ok] * s) <= 1e-10 * (1.0 + np.abs(map_diff))
                agree = agree and bool(np.all(same))

    def summarize(chunks):
        if not chunks:
            return {"checked": 0, "min_slack": None, "violations": 0}
        allv = np.concatenate(chunks)
        return {
            "checked": int(allv.size),
            "min_slack": float(allv.min()),
            "violations": int(np.sum(allv < -1e-12)),
        }

    rep_i = summarize(slack_i)
    rep_ii = summarize(slack_ii)
    rep_iii = summarize(slack_iii)
    passed = (
        (rep_i["checked"] == 0 or rep_i["min_slack"] > 0.0)
        and rep_ii["violations"] == 0
        and rep_iii["violations"] == 0
        and agree
    )
    return {
        "condition_i": rep_i,
        "condition_ii": rep_ii,
        "condition_ii_strict": strict_ii,
        "condition_iii": rep_iii,
        "monotone_map_agrees": agree,
        "pass": bool(passed),
    }
