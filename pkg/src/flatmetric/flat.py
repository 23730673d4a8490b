"""Exact Flat Metric between discrete measures.

The flat (Kantorovich-Rubinstein) distance between ``mu = sum a_n delta_{x_n}``
and ``nu = sum b_m delta_{y_m}`` is the unbalanced transport cost::

    min_{pi >= 0}  sum d(x_n, y_m) pi_nm + lam |a - pi 1|_1 + lam |b - pi^T 1|_1

Any optimal plan can be taken with ``pi 1 <= a`` and ``pi^T 1 <= b``: mass
shipped in excess of an atom's weight pays ``lam`` on the marginal mismatch
and ``d >= 0`` on transport, so cutting it back never raises the objective.
Under those constraints the two TV terms are ``lam (|a| - |pi|)`` and
``lam (|b| - |pi|)``, leaving the capacitated transportation problem::

    min  sum (d_nm - 2 lam) pi_nm + lam (|a| + |b|)
    s.t. pi >= 0,  pi 1 <= a,  pi^T 1 <= b

Edges with ``d_nm >= 2 lam`` have nonnegative reduced cost and are dropped.
The reduced problem is solved exactly with successive shortest paths; the
dual potentials certify optimality against the finite-dimensional dual LP::

    max  <a, f> - <b, g>   s.t.  |f_n - g_m| <= d_nm,  |f|, |g| <= lam
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import chain

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _mcf
from ._mcf import SolverError
from ._validation import check_positive
from .measures import DiscreteMeasure, distance_matrix, total_mass

__all__ = [
    "TransportPlan",
    "DualPotentials",
    "Move",
    "Stay",
    "Creation",
    "Destruction",
    "TransportDecomposition",
    "FlatMetricResult",
    "ReducedProblem",
    "SolverError",
    "flat_metric",
    "reduce_to_transportation",
    "solve_transportation",
    "solve_dual_lp",
    "decompose_plan",
    "flat_metric_bruteforce",
    "wasserstein1",
]

DUALITY_TOL = 1e-9
MASS_TOL = 1e-12
BRUTEFORCE_MAX = 7


@dataclass(frozen=True)
class TransportPlan:
    """Sparse plan: ``mass[k]`` moves from gt atom ``rows[k]`` to det atom ``cols[k]``."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple

    def __len__(self):
        return int(self.mass.shape[0])

    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.mass.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.mass)
        return out

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.mass, minlength=self.shape[0])

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.mass, minlength=self.shape[1])

    def transpose(self) -> "TransportPlan":
        order = np.lexsort((self.rows, self.cols))
        return TransportPlan(
            self.cols[order], self.rows[order], self.mass[order], (self.shape[1], self.shape[0])
        )

    @classmethod
    def empty(cls, shape):
        return cls(np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp), np.zeros(0), tuple(shape))


@dataclass(frozen=True)
class DualPotentials:
    """Potentials ``f`` on gt atoms and ``g`` on det atoms, in the units of ``lam``."""

    f: np.ndarray
    g: np.ndarray

    def value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return float(np.dot(mu.weights, self.f) - np.dot(nu.weights, self.g))

    def max_violation(self, dist: np.ndarray, lam: float) -> float:
        """Largest violation of the box and Lipschitz constraints (0 when feasible)."""
        viol = 0.0
        if self.f.size:
            viol = max(viol, float(np.max(np.abs(self.f))) - lam)
        if self.g.size:
            viol = max(viol, float(np.max(np.abs(self.g))) - lam)
        if self.f.size and self.g.size:
            viol = max(viol, float(np.max(np.abs(self.f[:, None] - self.g[None, :]) - dist)))
        return max(viol, 0.0)


@dataclass(frozen=True)
class Move:
    gt: int
    det: int
    mass: float
    distance: float
    cost: float


@dataclass(frozen=True)
class Stay:
    """Mass matched between coincident atoms; zero cost, listed for bookkeeping."""

    gt: int
    det: int
    mass: float


@dataclass(frozen=True)
class Creation:
    gt: int
    mass: float
    cost: float


@dataclass(frozen=True)
class Destruction:
    det: int
    mass: float
    cost: float


@dataclass(frozen=True)
class TransportDecomposition:
    """Per-event breakdown of a plan: moves, creations at gt atoms, destructions at det atoms."""

    moves: tuple = ()
    creations: tuple = ()
    destructions: tuple = ()
    stays: tuple = ()

    @property
    def total_cost(self) -> float:
        return math.fsum(e.cost for e in chain(self.moves, self.creations, self.destructions))

    @property
    def move_cost(self) -> float:
        return math.fsum(e.cost for e in self.moves)

    @property
    def creation_cost(self) -> float:
        return math.fsum(e.cost for e in self.creations)

    @property
    def destruction_cost(self) -> float:
        return math.fsum(e.cost for e in self.destructions)

    def is_empty(self) -> bool:
        return not (self.moves or self.creations or self.destructions)

    def counts(self) -> dict:
        return {
            "moves": len(self.moves),
            "creations": len(self.creations),
            "destructions": len(self.destructions),
        }


@dataclass(frozen=True)
class FlatMetricResult:
    value: float
    plan: TransportPlan
    potentials: DualPotentials
    dual_value: float
    duality_gap: float
    decomposition: TransportDecomposition
    lam: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class ReducedProblem:
    """Capacitated transportation problem equivalent to the unbalanced one.

    Edge ``k`` joins gt atom ``rows[k]`` and det atom ``cols[k]`` with cost
    ``costs[k] = dist[k] - 2 lam < 0``. Capacities are expressed in units of
    ``mass_unit``: when every atom on both sides carries the same weight the
    capacities are all 1 and the solver runs on exact integers.
    """

    rows: np.ndarray
    cols: np.ndarray
    dist: np.ndarray
    costs: np.ndarray
    row_cap: np.ndarray
    col_cap: np.ndarray
    mass_unit: float
    constant: float
    lam: float
    shape: tuple = field(default=(0, 0))


def _check_pair(mu, nu, lam):
    if not isinstance(mu, DiscreteMeasure) or not isinstance(nu, DiscreteMeasure):
        raise TypeError("mu and nu must be DiscreteMeasure instances")
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch ({mu.dim} != {nu.dim})")
    return check_positive(lam, "lam")


def reduce_to_transportation(mu: DiscreteMeasure, nu: DiscreteMeasure, lam, dist=None) -> ReducedProblem:
    lam = _check_pair(mu, nu, lam)
    if dist is None:
        dist = distance_matrix(mu, nu)
    rows, cols = np.nonzero(dist < 2.0 * lam)  # row-major, i.e. lexicographic (n, m)
    d = dist[rows, cols]

    wa, wb = mu.uniform_weight(), nu.uniform_weight()
    common = wa if mu.n_atoms else wb
    if common is not None and all(
        side.n_atoms == 0 or w == common for side, w in ((mu, wa), (nu, wb))
    ):
        unit = common
        row_cap = np.ones(mu.n_atoms)
        col_cap = np.ones(nu.n_atoms)
    else:
        unit = 1.0
        row_cap = np.asarray(mu.weights, dtype=np.float64)
        col_cap = np.asarray(nu.weights, dtype=np.float64)

    return ReducedProblem(
        rows=rows.astype(np.intp),
        cols=cols.astype(np.intp),
        dist=d,
        costs=d - 2.0 * lam,
        row_cap=row_cap,
        col_cap=col_cap,
        mass_unit=unit,
        constant=lam * (total_mass(mu) + total_mass(nu)),
        lam=lam,
        shape=(mu.n_atoms, nu.n_atoms),
    )


def _solve(problem: ReducedProblem):
    """Run the flow solver; returns flows in capacity units plus the row/column duals.

    Connected components of the edge graph are independent problems and are
    solved one at a time.
    """
    n, m = problem.shape
    cap_scale = max(np.max(problem.row_cap, initial=0.0), np.max(problem.col_cap, initial=0.0), 1e-300)
    cap_tol = MASS_TOL * cap_scale
    cost_tol = 1e-13 * problem.lam
    flow = np.zeros(len(problem.rows))
    u = np.zeros(n)
    v = np.zeros(m)
    adj = coo_matrix(
        (np.ones(len(problem.rows)), (problem.rows, n + problem.cols)), shape=(n + m, n + m)
    )
    _, label = connected_components(adj, directed=False)
    edge_label = label[problem.rows]
    order = np.argsort(edge_label, kind="stable")
    bounds = np.flatnonzero(np.diff(edge_label[order])) + 1
    for edges in np.split(order, bounds):
        if len(edges) == 1:
            # isolated pair with negative cost: ship as much as both sides allow
            e = edges[0]
            n_, m_ = problem.rows[e], problem.cols[e]
            a, b = problem.row_cap[n_], problem.col_cap[m_]
            flow[e] = min(a, b)
            if a <= b:
                u[n_] = -problem.costs[e]
            else:
                v[m_] = -problem.costs[e]
            continue
        r = problem.rows[edges]
        c = problem.cols[edges]
        row_ids, r_local = np.unique(r, return_inverse=True)
        col_ids, c_local = np.unique(c, return_inverse=True)
        f_c, u_c, v_c = _mcf.solve(
            len(row_ids),
            len(col_ids),
            r_local,
            c_local,
            problem.costs[edges],
            problem.row_cap[row_ids],
            problem.col_cap[col_ids],
            cap_tol=cap_tol,
            cost_tol=cost_tol,
        )
        flow[edges] = f_c
        u[row_ids] = u_c
        v[col_ids] = v_c
    return flow, u, v


def _plan_from_flow(problem, flow):
    keep = flow > 0
    return TransportPlan(
        problem.rows[keep].copy(),
        problem.cols[keep].copy(),
        flow[keep] * problem.mass_unit,
        problem.shape,
    )


def solve_transportation(problem: ReducedProblem) -> TransportPlan:
    """Exact optimal plan of the reduced problem (in mass units of the measures)."""
    if len(problem.rows) == 0:
        return TransportPlan.empty(problem.shape)
    flow, _, _ = _solve(problem)
    return _plan_from_flow(problem, flow)


def _reduced_value(problem, flow) -> float:
    """Objective in the original form: transport + lam * (created + destroyed)."""
    n, m = problem.shape
    out = np.bincount(problem.rows, weights=flow, minlength=n)
    inc = np.bincount(problem.cols, weights=flow, minlength=m)
    created = np.clip(problem.row_cap - out, 0.0, None)
    destroyed = np.clip(problem.col_cap - inc, 0.0, None)
    transport = math.fsum((problem.dist * flow).tolist())
    residual = math.fsum(created.tolist()) + math.fsum(destroyed.tolist())
    return problem.mass_unit * (transport + problem.lam * residual)


def _repair_potentials(f, g, dist, lam):
    """Two c-transform passes that make (f, g) feasible for the full dual.

    Starting from an optimal solution of the reduced dual (``f <= lam``,
    ``g >= -lam``, ``f_n - g_m <= d_nm``) each pass can only improve the
    objective, and by the triangle inequality the result also satisfies
    ``g_m - f_n <= d_nm`` and the remaining box bounds.
    """
    f = np.clip(f, -lam, lam)
    g = np.clip(g, -lam, lam)
    if f.size and g.size:
        g = np.maximum(-lam, np.max(f[:, None] - dist, axis=0))
        f = np.minimum(lam, np.min(g[None, :] + dist, axis=1))
    elif f.size:
        f = np.full_like(f, lam)
    elif g.size:
        g = np.full_like(g, -lam)
    return f, g


def _flat_oriented(mu, nu, lam, dist):
    problem = reduce_to_transportation(mu, nu, lam, dist=dist)
    if len(problem.rows):
        flow, u, v = _solve(problem)
    else:
        flow = np.zeros(0)
        u = np.zeros(mu.n_atoms)
        v = np.zeros(nu.n_atoms)
    value = _reduced_value(problem, flow)
    plan = _plan_from_flow(problem, flow)
    f = lam - np.clip(u, 0.0, 2.0 * lam)
    g = np.clip(v, 0.0, 2.0 * lam) - lam
    f, g = _repair_potentials(f, g, dist, lam)
    return value, plan, DualPotentials(f, g)


def flat_metric(mu: DiscreteMeasure, nu: DiscreteMeasure, lam, tol=DUALITY_TOL, verify_lp=False) -> FlatMetricResult:
    """Flat Metric between two discrete measures, with plan, potentials and decomposition.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
        Ground truth and reconstruction. Either may be the zero measure.
    lam : float
        Creation/destruction cost per unit mass, in the coordinate unit (nm).
        Transport over more than ``2 * lam`` never happens.
    tol : float
        Relative duality-gap tolerance; a larger gap raises :class:`SolverError`.
    verify_lp : bool
        Additionally solve the dense dual LP and check it against the primal.
        Intended for small instances.

    Returns
    -------
    FlatMetricResult
        ``value`` reads as nm when ``mu`` has unit mass.
    """
    lam = _check_pair(mu, nu, lam)
    # Solve in a canonical orientation so that swapping the arguments is exact.
    swap = nu.key() < mu.key()
    a, b = (nu, mu) if swap else (mu, nu)
    dist = distance_matrix(a, b)
    value, plan, pot = _flat_oriented(a, b, lam, dist)
    if swap:
        plan = plan.transpose()
        pot = DualPotentials(-pot.g, -pot.f)
        dist = dist.T

    dual_value = pot.value(mu, nu)
    gap = abs(value - dual_value)
    scale = max(1.0, abs(value))
    if gap > tol * scale or pot.max_violation(dist, lam) > tol * max(1.0, lam):
        raise SolverError(f"duality check failed: primal {value!r}, dual {dual_value!r}")
    if verify_lp:
        _, lp_value = solve_dual_lp(mu, nu, lam)
        if abs(lp_value - value) > tol * scale:
            raise SolverError(f"dual LP disagrees: primal {value!r}, LP {lp_value!r}")

    decomposition = decompose_plan(mu, nu, plan, lam, dist=dist)
    return FlatMetricResult(
        value=value,
        plan=plan,
        potentials=pot,
        dual_value=dual_value,
        duality_gap=gap,
        decomposition=decomposition,
        lam=lam,
    )


def solve_dual_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, lam):
    """Dense dual LP solved with HiGHS; returns ``(DualPotentials, value)``.

    Maximizes ``<a, f> - <b, g>`` over ``|f_n - g_m| <= d_nm`` and
    ``|f|, |g| <= lam``. Independent of the combinatorial solver.
    """
    lam = _check_pair(mu, nu, lam)
    n, m = mu.n_atoms, nu.n_atoms
    if n + m == 0:
        return DualPotentials(np.zeros(0), np.zeros(0)), 0.0
    c = np.concatenate([-np.asarray(mu.weights), np.asarray(nu.weights)])
    A_ub = b_ub = None
    if n and m:
        dist = distance_matrix(mu, nu)
        nm = n * m
        A = np.zeros((nm, n + m))
        idx = np.arange(nm)
        A[idx, np.repeat(np.arange(n), m)] = 1.0
        A[idx, n + np.tile(np.arange(m), n)] = -1.0
        A_ub = np.vstack([A, -A])
        b_ub = np.concatenate([dist.ravel(), dist.ravel()])
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[(-lam, lam)] * (n + m),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise SolverError(f"dual LP failed: {res.message}")
    x = res.x
    pot = DualPotentials(x[:n].copy(), x[n:].copy())
    return pot, float(-res.fun)


def decompose_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, plan: TransportPlan, lam, dist=None) -> TransportDecomposition:
    """Split a feasible plan into moves, creations (gt side) and destructions (det side).

    Residual masses below the mass tolerance are dropped. Raises
    ``ValueError`` when the plan ships more than an atom's weight.
    """
    lam = _check_pair(mu, nu, lam)
    if plan.shape != (mu.n_atoms, nu.n_atoms):
        raise ValueError(f"plan shape {plan.shape} does not match measures")
    if dist is None:
        dist = distance_matrix(mu, nu)
    tol = MASS_TOL * max(
        np.max(mu.weights, initial=0.0), np.max(nu.weights, initial=0.0), 1.0e-300
    )
    if np.any(plan.mass < 0):
        raise ValueError("plan has negative entries")
    created = np.asarray(mu.weights) - plan.row_sums()
    destroyed = np.asarray(nu.weights) - plan.col_sums()
    if np.any(created < -tol) or np.any(destroyed < -tol):
        raise ValueError("infeasible plan: transported mass exceeds atom weight")

    moves, stays = [], []
    for n, m, mass in plan.entries():
        d = float(dist[n, m])
        if d > 0.0:
            moves.append(Move(n, m, mass, d, d * mass))
        else:
            stays.append(Stay(n, m, mass))
    creations = tuple(
        Creation(n, float(r), lam * float(r)) for n, r in enumerate(created) if r > tol
    )
    destructions = tuple(
        Destruction(m, float(r), lam * float(r)) for m, r in enumerate(destroyed) if r > tol
    )
    return TransportDecomposition(tuple(moves), creations, destructions, tuple(stays))


def flat_metric_bruteforce(mu: DiscreteMeasure, nu: DiscreteMeasure, lam) -> float:
    """Reference value by exhaustive search over partial matchings.

    Only valid for uniform atom weights (the same ``w`` on both sides), where
    an optimal plan is a partial matching. Enumerates every subset of the
    smaller side that gets matched, keeping the cheapest assignment of each
    subset, then adds ``lam * w`` per unmatched atom on either side.
    """
    lam = _check_pair(mu, nu, lam)
    weights = np.concatenate([mu.weights, nu.weights])
    if weights.size == 0:
        return 0.0
    w = float(weights[0])
    if np.any(weights != w):
        raise ValueError("brute force requires identical weights on every atom")
    n, m = mu.n_atoms, nu.n_atoms
    if min(n, m) > BRUTEFORCE_MAX:
        raise ValueError(f"instance too large for brute force (min(N, M) = {min(n, m)})")
    dist = distance_matrix(mu, nu)
    if n > m:
        dist = dist.T
    small, large = dist.shape

    # best[mask]: least total distance matching exactly the small-side atoms in mask
    best = [math.inf] * (1 << small)
    best[0] = 0.0
    for i in range(large):
        nxt = best[:]
        for mask in range(1 << small):
            if best[mask] == math.inf:
                continue
            for j in range(small):
                if not mask >> j & 1:
                    cand = best[mask] + dist[j, i]
                    if cand < nxt[mask | 1 << j]:
                        nxt[mask | 1 << j] = cand
        best = nxt

    total = math.inf
    for mask, moved in enumerate(best):
        k = bin(mask).count("1")
        total = min(total, w * moved + lam * w * (n - k) + lam * w * (m - k))
    return total


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure, rtol=1e-9) -> float:
    """Balanced 1-Wasserstein distance (Euclidean ground cost) via a dense LP."""
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch ({mu.dim} != {nu.dim})")
    ma, mb = total_mass(mu), total_mass(nu)
    if mu.n_atoms == 0 or nu.n_atoms == 0:
        raise ValueError("wasserstein1 needs two nonzero measures")
    if abs(ma - mb) > rtol * max(ma, mb):
        raise ValueError(f"unequal masses ({ma!r} vs {mb!r})")
    n, m = mu.n_atoms, nu.n_atoms
    dist = distance_matrix(mu, nu)
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    # rescale the column marginal so both sides sum to exactly the same total
    b = np.asarray(nu.weights) * (ma / mb)
    res = linprog(
        dist.ravel(),
        A_eq=A_eq,
        b_eq=np.concatenate([mu.weights, b]),
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise SolverError(f"transport LP failed: {res.message}")
    return float(res.fun)
