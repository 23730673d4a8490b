"""Successive-shortest-path solver for capacitated bipartite transportation.

Solves::

    min  sum_e cost_e * flow_e
    s.t. flow >= 0,  row sums <= row_cap,  column sums <= col_cap

on a sparse edge set. The amount of flow is free: augmentation stops as soon
as the cheapest augmenting path is no longer negative. Nodes are laid out as
``0 = source``, ``1..N = rows``, ``N+1..N+M = columns``, ``N+M+1 = sink``.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

INF = math.inf


class SolverError(ArithmeticError):
    """Internal inconsistency in the exact solver (never expected on valid input)."""


class _Graph:
    __slots__ = ("head", "to", "cap", "cost", "flow")

    def __init__(self, n_nodes):
        self.head = [[] for _ in range(n_nodes)]
        self.to = []
        self.cap = []
        self.cost = []
        self.flow = []

    def add(self, u, v, cap, cost):
        # forward arc at even index, reverse at odd index
        k = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0.0]
        self.cost += [cost, -cost]
        self.flow += [0.0, 0.0]
        self.head[u].append(k)
        self.head[v].append(k + 1)
        return k

    def residual(self, k):
        if k & 1:
            return self.flow[k ^ 1]
        return self.cap[k] - self.flow[k]


def solve(n_rows, n_cols, rows, cols, costs, row_cap, col_cap, cap_tol=0.0, cost_tol=0.0):
    """Return ``(flow, row_dual, col_dual)``.

    ``row_dual`` and ``col_dual`` are nonnegative multipliers of the row and
    column capacity constraints satisfying ``cost_e + u_n + v_m >= 0`` on
    every edge with complementary slackness, i.e. an optimal dual solution.
    """
    n_edges = len(rows)
    src, snk = 0, n_rows + n_cols + 1
    g = _Graph(n_rows + n_cols + 2)
    for n in range(n_rows):
        g.add(src, 1 + n, float(row_cap[n]), 0.0)
    for m in range(n_cols):
        g.add(1 + n_rows + m, snk, float(col_cap[m]), 0.0)
    edge_arcs = [
        g.add(1 + int(rows[e]), 1 + n_rows + int(cols[e]), INF, float(costs[e]))
        for e in range(n_edges)
    ]

    if n_edges:
        _augment_all(g, src, snk, n_rows, cap_tol, cost_tol)

    flow = np.array([g.flow[k] for k in edge_arcs], dtype=np.float64)
    phi = _bellman_ford_potentials(g, src, snk, cap_tol, cost_tol)
    row_dual = np.maximum(0.0, phi[1 : 1 + n_rows] - phi[src])
    col_dual = np.maximum(0.0, phi[snk] - phi[1 + n_rows : 1 + n_rows + n_cols])
    return flow, row_dual, col_dual


def _augment_all(g, src, snk, n_rows, cap_tol, cost_tol):
    n_nodes = len(g.head)
    # Initial potentials: the residual graph is a DAG source -> rows -> columns -> sink.
    phi = [0.0] * n_nodes
    for u in range(1, 1 + n_rows):
        for k in g.head[u]:
            if not k & 1:
                v = g.to[k]
                phi[v] = min(phi[v], g.cost[k])
    phi[snk] = min(phi[1 + n_rows : snk], default=0.0)

    max_rounds = 4 * n_nodes + 4 * len(g.to) + 16
    for _ in range(max_rounds):
        dist, pred = _dijkstra(g, src, phi, cap_tol)
        if dist[snk] == INF:
            return
        path_cost = dist[snk] + phi[snk] - phi[src]
        if path_cost >= -cost_tol:
            return
        for v in range(n_nodes):
            if dist[v] < INF:
                phi[v] += dist[v]
        # bottleneck along the path
        delta = INF
        v = snk
        while v != src:
            k = pred[v]
            delta = min(delta, g.residual(k))
            v = g.to[k ^ 1]
        if not delta > cap_tol or delta == INF:
            raise SolverError(f"degenerate augmenting path (bottleneck {delta})")
        v = snk
        while v != src:
            k = pred[v]
            if k & 1:
                g.flow[k ^ 1] -= delta
            else:
                g.flow[k] += delta
            v = g.to[k ^ 1]
    raise SolverError("augmentation did not terminate")


def _dijkstra(g, src, phi, cap_tol):
    n_nodes = len(g.head)
    dist = [INF] * n_nodes
    pred = [-1] * n_nodes
    done = [False] * n_nodes
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        pu = phi[u]
        for k in g.head[u]:
            if g.residual(k) <= cap_tol:
                continue
            v = g.to[k]
            if done[v]:
                continue
            rc = g.cost[k] + pu - phi[v]
            if rc < 0.0:
                rc = 0.0  # rounding noise only; exact reduced costs are nonnegative
            nd = d + rc
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = k
                heapq.heappush(heap, (nd, v))
    return dist, pred


def _bellman_ford_potentials(g, src, snk, cap_tol, cost_tol):
    """Shortest distances from a virtual root joined to every node at cost 0.

    Runs on the final residual graph extended by a free ``sink -> source``
    arc (and its reverse when flow is positive), which turns the free-amount
    flow problem into a circulation.
    """
    n_nodes = len(g.head)
    total = sum(g.flow[k] for k in g.head[src] if not k & 1)
    extra = [(snk, src, 0.0)]
    if total > cap_tol:
        extra.append((src, snk, 0.0))

    phi = [0.0] * n_nodes
    in_queue = [True] * n_nodes
    count = [0] * n_nodes
    queue = deque(range(n_nodes))
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        pu = phi[u]
        arcs = [(g.to[k], g.cost[k]) for k in g.head[u] if g.residual(k) > cap_tol]
        arcs += [(v, c) for (a, v, c) in extra if a == u]
        for v, c in arcs:
            nd = pu + c
            if nd < phi[v] - cost_tol:
                phi[v] = nd
                if not in_queue[v]:
                    count[v] += 1
                    if count[v] > n_nodes + 1:
                        raise SolverError("negative cycle in residual graph: plan is not optimal")
                    in_queue[v] = True
                    queue.append(v)
    return np.asarray(phi)
