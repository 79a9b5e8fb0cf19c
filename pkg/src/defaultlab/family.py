"""Solve the driving equation and build the increasing martingale family.

One solver step from state x is

    x_next = (x + x * dm) + F,   F = sum_j f_j(t_k, x) * dY_j,

with the same canonical grouping the survival generator uses for 1 - Z
(there pS = x bitwise on steps with dA = 0).  That shared grouping makes
two identities exact in floats: a step with dA = 0 maps 1 - Z_{k-1} to
1 - Z_k bitwise, so consecutive family members collapse there and the
u-increment of the family carries zero mass off the support of dA.  The
family member M^u is the solution started at (u, 1 - Z_u); it is a
martingale by construction because dm and dY have zero conditional mean
and the coefficients are predictable.

The flow is the same recursion from an arbitrary start, together with
the variational derivative D_k = D_{k-1} ((1 + dm_k) + df/dx' dY_k),
which governs how the family depends on u through the one-step atom
identity

    (1 - Z_k) - one step from 1 - Z_{k-1} = kappa_k * dA_k,
    kappa_k = (1 + dm_k) - (1 - Z_{k-1}) g(t_k, 1 - Z_{k-1})' dY_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import evaluate_f, evaluate_f_x, _dot_components
from .errors import ConfigurationError, GridMismatchError, SolverInconsistencyError
from .tree import verify_im_axioms

__all__ = [
    "MartingaleFamily",
    "Flow",
    "solve_natural",
    "build_family",
    "flow_solve",
    "kappa_values",
    "one_step_atom_residuals",
    "family_regularity",
]


def _start_level(pair, x, size):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.full(size, float(x))
    if x.shape != (size,):
        raise GridMismatchError(f"start value needs shape ({size},), got {x.shape}")
    return x.copy()


def _one_step(pair, model, k: int, x_prev):
    """Map the state at k-1 to the state at k (child/path layout)."""
    grid = pair.carrier.grid
    if pair.is_tree:
        ps = model.pred_one_minus_z[k - 1]
        f = evaluate_f(pair.spec, grid.times[k], x_prev, ps)
        xc = pair.carrier.lift(x_prev)
        dm = model.tilde_m_increments[k - 1]
        fdy = _dot_components(
            [pair.carrier.lift(row) for row in f], [row for row in pair.y_step(k)]
        )
    else:
        ps = model.pred_one_minus_z[:, k - 1]
        f = evaluate_f(pair.spec, grid.times[k], x_prev, ps)
        xc = x_prev
        dm = model.tilde_m_increments[:, k - 1]
        fdy = _dot_components([row for row in f], [row for row in pair.y_step(k)])
    return (xc + xc * dm) + fdy


def solve_natural(pair, model, u: int, x):
    """Solve from X_u = x forward; x may be a scalar or a level array.

    Trees return a level list with entries below u set to None; bundles
    return a (paths, steps+1) array with nan below u.  The start column is
    the given x bitwise.
    """
    carrier = pair.carrier
    n = carrier.grid.steps
    if not 0 <= u <= n:
        raise ConfigurationError(f"start index {u} outside grid")
    if pair.is_tree:
        levels = [None] * u + [_start_level(pair, x, carrier.n_nodes(u))]
        for k in range(u + 1, n + 1):
            levels.append(_one_step(pair, model, k, levels[-1]))
        return levels
    out = np.full((carrier.n_paths, n + 1), np.nan)
    out[:, u] = _start_level(pair, x, carrier.n_paths)
    for k in range(u + 1, n + 1):
        out[:, k] = _one_step(pair, model, k, out[:, k - 1])
    return out


@dataclass
class MartingaleFamily:
    """Family of solutions M^u started at (u, 1 - Z_u), u on the grid.

    ``values(u)`` returns the stored solution (level list on trees, a
    (paths, steps+1) array on bundles); ``terminal(u)`` its final slice.
    The full-mass member is identically one and exposed separately since
    it carries the beyond-horizon atom.  ``report`` holds the invariant
    verification.
    """

    pair: object
    model: object
    u_indices: list
    values_by_u: dict
    report: dict = field(default_factory=dict)
    storage: str = "full"
    terminal_by_u: dict = field(default_factory=dict)

    @property
    def carrier(self):
        return self.pair.carrier

    @property
    def is_tree(self) -> bool:
        return self.pair.is_tree

    @property
    def one_minus_z(self):
        return self.model.s

    def values(self, u: int):
        if self.storage == "terminal":
            raise ConfigurationError("family stores terminal slices only")
        return self.values_by_u[u]

    def terminal(self, u: int):
        if self.storage == "terminal":
            return self.terminal_by_u[u]
        vals = self.values_by_u[u]
        if self.is_tree:
            return vals[-1]
        return vals[:, -1]

    def terminal_infinity(self):
        return np.ones_like(np.asarray(self.terminal(self.u_indices[-1])))


def _verify_family_bundle(family, tol):
    model = family.model
    s = model.s
    n = model.grid.steps
    checks = []

    def record(name, violation):
        checks.append(
            {"name": name, "max_violation": float(violation), "pass": bool(violation <= tol)}
        )

    worst_start = 0.0
    worst_low = 0.0
    worst_high = 0.0
    for u in family.u_indices:
        vals = family.values(u)
        worst_start = max(worst_start, float(np.max(np.abs(vals[:, u] - s[:, u]))))
        window = vals[:, u:]
        worst_low = max(worst_low, float(np.max(-window)))
        worst_high = max(worst_high, float(np.max(window - s[:, u:])))
    record("starts_at_one_minus_z", worst_start)
    record("nonnegative", worst_low)
    record("bounded_by_one_minus_z", worst_high)

    worst_mono = 0.0
    us = family.u_indices
    for lo, hi in zip(us[:-1], us[1:]):
        diff = family.values(lo)[:, hi:] - family.values(hi)[:, hi:]
        worst_mono = max(worst_mono, float(np.max(diff)))
    record("nondecreasing_in_u", worst_mono)

    if us[-1] == n:
        z_term = 1.0 - s[:, n]
        record(
            "terminal_normalization",
            float(np.max(np.abs(family.values(us[-1])[:, n] + z_term - 1.0))),
        )
    return {"checks": checks, "pass": all(c["pass"] for c in checks)}


def _build_family_terminal(pair, model, u_indices, tol):
    """Bundle family keeping only terminal slices; checks still run on the
    full transient solution per u, so nothing is weakened by the storage."""
    s = model.s
    n = model.grid.steps
    worst = {"starts_at_one_minus_z": 0.0, "nonnegative": 0.0,
             "bounded_by_one_minus_z": 0.0, "nondecreasing_in_u": 0.0}
    terminal = {}
    prev_sol = None
    for u in u_indices:
        sol = solve_natural(pair, model, u, s[:, u])
        worst["starts_at_one_minus_z"] = max(
            worst["starts_at_one_minus_z"], float(np.max(np.abs(sol[:, u] - s[:, u])))
        )
        window = sol[:, u:]
        worst["nonnegative"] = max(worst["nonnegative"], float(np.max(-window)))
        worst["bounded_by_one_minus_z"] = max(
            worst["bounded_by_one_minus_z"], float(np.max(window - s[:, u:]))
        )
        if prev_sol is not None:
            worst["nondecreasing_in_u"] = max(
                worst["nondecreasing_in_u"], float(np.max(prev_sol[:, u:] - sol[:, u:]))
            )
        terminal[u] = sol[:, -1].copy()
        prev_sol = sol
    checks = [
        {"name": name, "max_violation": val, "pass": val <= tol} for name, val in worst.items()
    ]
    if u_indices and u_indices[-1] == n:
        resid = float(np.max(np.abs(terminal[n] + (1.0 - s[:, n]) - 1.0)))
        checks.append(
            {"name": "terminal_normalization", "max_violation": resid, "pass": resid <= tol}
        )
    report = {"checks": checks, "pass": all(c["pass"] for c in checks)}
    return MartingaleFamily(
        pair=pair,
        model=model,
        u_indices=u_indices,
        values_by_u={},
        report=report,
        storage="terminal",
        terminal_by_u=terminal,
    )


def build_family(pair, model, u_indices=None, tol: float = 1e-12, keep: str = "full") -> MartingaleFamily:
    """Solve M^u from (u, 1 - Z_u) for each requested u and verify invariants.

    On a tree the full axiom battery (including the exact martingale
    property through the enumeration oracle) runs and any violation beyond
    `tol` raises; on bundles the pathwise invariants (start value, bounds,
    monotonicity in u, terminal normalization) are hard assertions at the
    same tolerance, while martingale-property checks are statistical and
    live in the Monte Carlo suites.  ``u_indices`` defaults to the whole
    grid.  ``keep="terminal"`` (bundles only) stores just the terminal
    slice per u to bound memory on wide bundles; every invariant is still
    checked on the full solution before it is dropped.
    """
    n = pair.carrier.grid.steps
    if u_indices is None:
        u_indices = list(range(n + 1))
    u_indices = sorted(int(u) for u in u_indices)
    if u_indices and (u_indices[0] < 0 or u_indices[-1] > n):
        raise ConfigurationError("u indices outside the grid")
    if keep not in ("full", "terminal"):
        raise ConfigurationError(f"unknown storage mode {keep!r}")
    if keep == "terminal" and pair.is_tree:
        raise ConfigurationError("terminal storage is a bundle option")
    if keep == "terminal":
        family = _build_family_terminal(pair, model, u_indices, tol)
    else:
        s = model.s
        values = {}
        for u in u_indices:
            start = s[u] if pair.is_tree else s[:, u]
            values[u] = solve_natural(pair, model, u, start)
        family = MartingaleFamily(
            pair=pair, model=model, u_indices=u_indices, values_by_u=values
        )
        if pair.is_tree:
            family.report = verify_im_axioms(pair.carrier, family, tol=tol)
        else:
            family.report = _verify_family_bundle(family, tol)
    if not family.report["pass"]:
        worst = max(c["max_violation"] for c in family.report["checks"])
        raise SolverInconsistencyError(
            f"family invariant violation {worst:.3e} beyond tolerance {tol:.1e}"
        )
    return family


@dataclass
class Flow:
    """Solution values and variational derivative from one start (u, x)."""

    pair: object
    model: object
    u: int
    x0: object
    values: object
    deriv: object

    def at(self, k: int):
        if self.pair.is_tree:
            return self.values[k]
        return self.values[:, k]

    def deriv_at(self, k: int):
        if self.pair.is_tree:
            return self.deriv[k]
        return self.deriv[:, k]


def flow_solve(pair, model, u: int, x) -> Flow:
    """Same recursion as solve_natural plus D_k, the derivative in x.

    D_k = D_{k-1} * ((1 + dm_k) + df/dx(t_k, X_{k-1})' dY_k), D_u = 1.
    The value recursion shares solve_natural's step verbatim, so a flow
    started at (u, 1 - Z_u) reproduces the family member bitwise.
    """
    carrier = pair.carrier
    grid = carrier.grid
    n = grid.steps
    if not 0 <= u <= n:
        raise ConfigurationError(f"start index {u} outside grid")
    spec = pair.spec
    if pair.is_tree:
        levels = [None] * u + [_start_level(pair, x, carrier.n_nodes(u))]
        deriv = [None] * u + [np.ones(carrier.n_nodes(u))]
        for k in range(u + 1, n + 1):
            x_prev = levels[-1]
            fx = evaluate_f_x(spec, grid.times[k], x_prev, model.pred_one_minus_z[k - 1])
            fxdy = _dot_components(
                [carrier.lift(row) for row in fx], [row for row in pair.y_step(k)]
            )
            dm = model.tilde_m_increments[k - 1]
            levels.append(_one_step(pair, model, k, x_prev))
            deriv.append(carrier.lift(deriv[-1]) * ((1.0 + dm) + fxdy))
        return Flow(pair=pair, model=model, u=u, x0=x, values=levels, deriv=deriv)
    p = carrier.n_paths
    vals = np.full((p, n + 1), np.nan)
    der = np.full((p, n + 1), np.nan)
    vals[:, u] = _start_level(pair, x, p)
    der[:, u] = 1.0
    for k in range(u + 1, n + 1):
        x_prev = vals[:, k - 1]
        fx = evaluate_f_x(spec, grid.times[k], x_prev, model.pred_one_minus_z[:, k - 1])
        fxdy = _dot_components([row for row in fx], [row for row in pair.y_step(k)])
        dm = model.tilde_m_increments[:, k - 1]
        vals[:, k] = _one_step(pair, model, k, x_prev)
        der[:, k] = der[:, k - 1] * ((1.0 + dm) + fxdy)
    return Flow(pair=pair, model=model, u=u, x0=x, values=vals, deriv=der)


def kappa_values(pair, model, k: int):
    """One-step atom density kappa_k at child (tree) or path granularity.

    kappa_k = (1 + dm_k) - (1 - Z_{k-1}) * g(t_k, 1 - Z_{k-1})' dY_k; the
    strict-pair margins keep these strictly positive.
    """
    grid = pair.carrier.grid
    spec = pair.spec
    if pair.is_tree:
        s_prev = model.s[k - 1]
        g = spec.g_value(grid.times[k], s_prev)
        dm = model.tilde_m_increments[k - 1]
        gdy = _dot_components(
            [pair.carrier.lift(row) for row in g], [row for row in pair.y_step(k)]
        )
        return (1.0 + dm) - pair.carrier.lift(s_prev) * gdy
    s_prev = model.s[:, k - 1]
    g = spec.g_value(grid.times[k], s_prev)
    dm = model.tilde_m_increments[:, k - 1]
    gdy = _dot_components([row for row in g], [row for row in pair.y_step(k)])
    return (1.0 + dm) - s_prev * gdy


def one_step_atom_residuals(pair, model):
    """Per-step max residual of (1-Z_k) - [one step from 1-Z_{k-1}] = kappa_k dA_k.

    The identity is the discrete default-atom formula; with dA_k = 0.0 both
    sides vanish bitwise because the solver shares the survival generator's
    update grouping.
    """
    n = pair.carrier.grid.steps
    out = np.empty(n)
    for k in range(1, n + 1):
        kap = kappa_values(pair, model, k)
        if pair.is_tree:
            image = _one_step(pair, model, k, model.s[k - 1])
            diff = model.s[k] - image
            da = pair.carrier.lift(model.a_increments[k - 1])
        else:
            image = _one_step(pair, model, k, model.s[:, k - 1])
            diff = model.s[:, k] - image
            da = model.a_increments[:, k - 1]
        out[k - 1] = float(np.max(np.abs(diff - kap * da)))
    return out


def _lift_to(tree, arr, from_level: int, to_level: int):
    if to_level < from_level:
        raise GridMismatchError("cannot lift downward")
    return np.repeat(arr, tree.branching ** (to_level - from_level))


def family_regularity(pair, model, family, v: int, t: int) -> dict:
    """Regularity report around grid time v, observed at grid time t > v.

    Contents: the residual of the jump identity

        M^v_k - M^{v-1}_k = Xi^v_k(1 - Z_v) - Xi^v_k(1 - Z_v - kappa_v dA_v)

    over k in [v, t]; the left and right difference quotients of
    u -> M^u_t over one grid cell against the flow-derivative predictions
    D_t * kappa_v (left) and D_t (right); and kappa statistics.  The grid
    refinement sweeps that drive the quotients to their limits live in the
    suites.  Quotients need strictly positive compensator increments at
    steps v and v + 1.
    """
    n = pair.carrier.grid.steps
    if not 1 <= v < t <= n:
        raise ConfigurationError("need 1 <= v < t <= steps")
    for u in (v - 1, v, v + 1):
        if u not in family.values_by_u:
            raise ConfigurationError(f"family must contain u = {u}")
    tree = pair.carrier if pair.is_tree else None
    kap = kappa_values(pair, model, v)
    if pair.is_tree:
        s_v = model.s[v]
        da_v = _lift_to(tree, model.a_increments[v - 1], v - 1, v)
        da_next = _lift_to(tree, model.a_increments[v], v, v + 1)
    else:
        s_v = model.s[:, v]
        da_v = model.a_increments[:, v - 1]
        da_next = model.a_increments[:, v]
    if np.min(da_v) <= 0.0 or np.min(da_next) <= 0.0:
        raise ConfigurationError("difference quotients need dA > 0 at v and v + 1")
    m_prev = family.values(v - 1)
    m_v = family.values(v)
    m_next = family.values(v + 1)

    flow_hi = flow_solve(pair, model, v, s_v)
    flow_lo = flow_solve(pair, model, v, s_v - kap * da_v)

    jump_resid = 0.0
    for k in range(v, t + 1):
        lhs = (m_v[k] - m_prev[k]) if pair.is_tree else (m_v[:, k] - m_prev[:, k])
        rhs = flow_hi.at(k) - flow_lo.at(k)
        jump_resid = max(jump_resid, float(np.max(np.abs(lhs - rhs))))

    d_t = flow_hi.deriv_at(t)
    if pair.is_tree:
        kap_t = _lift_to(tree, kap, v, t)
        quot_left = (m_v[t] - m_prev[t]) / _lift_to(tree, da_v, v, t)
        quot_right = (m_next[t] - m_v[t]) / _lift_to(tree, da_next, v + 1, t)
    else:
        kap_t = kap
        quot_left = (m_v[:, t] - m_prev[:, t]) / da_v
        quot_right = (m_next[:, t] - m_v[:, t]) / da_next
    return {
        "v": v,
        "t": t,
        "jump_identity_residual": jump_resid,
        "left_quotient_residual": float(np.max(np.abs(quot_left - d_t * kap_t))),
        "right_quotient_residual": float(np.max(np.abs(quot_right - d_t))),
        "kappa_min": float(np.min(kap)),
        "kappa_max": float(np.max(kap)),
    }
