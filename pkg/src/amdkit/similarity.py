"""Inter-task distances over mask distributions and embeddings, plus RSA.

Wasserstein distances use the Hamming metric between masks (expected bit
flips). Three exact solvers cover different sizes, dispatched automatically:

  - transportation simplex (authored, Bland's rule): supports <= 256 a side,
    also produces the coupling;
  - min-cost-flow LP on the hypercube graph (scipy HiGHS): any support size
    as long as d <= 14; exact because Hamming is the shortest-path metric of
    the hypercube, making W1 a flow problem with unit edge costs;
  - bipartite LP (scipy HiGHS): reference path for mid-size supports.

Supports larger than ``size_limit`` are truncated to the smallest mass-
(1 - 1e-6) covering sets and renormalized; beyond the bipartite limit a
log-domain Sinkhorn (eps = 1e-3) approximation is used and flagged in the
result. The solver and retained mass always travel with the answer so output
metadata can record them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import rankdata

from ._util import atomic_write_text, fmt
from .amd import MaskDistribution
from .isc import ISCModel

SIMPLEX_LIMIT = 256
FLOW_LP_LIMIT = 14  # max d for the hypercube flow formulation
PLAN_LP_LIMIT = 1024
TRUNCATION_MASS = 1.0 - 1e-6


@dataclass
class DistanceMatrix:
    """Symmetric T x T matrix of pairwise values over tasks.

    ``orientation`` distinguishes distances (zero diagonal) from similarities
    (cosine, MPC), so downstream rank analyses know which way is "closer".
    """

    metric_id: str
    values: np.ndarray
    orientation: str  # "distance" | "similarity"
    task_names: tuple[str, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        T = len(self.task_names)
        if self.values.shape != (T, T):
            raise ValueError(f"values shape {self.values.shape} != ({T}, {T})")
        if self.orientation not in ("distance", "similarity"):
            raise ValueError(f"bad orientation {self.orientation!r}")
        if np.abs(self.values - self.values.T).max() > 1e-8:
            raise ValueError(f"{self.metric_id} matrix is not symmetric")
        if self.orientation == "distance" and np.abs(np.diag(self.values)).max() > 1e-9:
            raise ValueError(f"{self.metric_id} distance has nonzero diagonal")

    def upper_triangle(self) -> np.ndarray:
        iu = np.triu_indices(len(self.task_names), k=1)
        return self.values[iu]

    def save_csv(self, path) -> None:
        lines = ["task," + ",".join(self.task_names)]
        for name, row in zip(self.task_names, self.values):
            lines.append(name + "," + ",".join(fmt(v) for v in row))
        atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass
class TransportPlan:
    """Optimal coupling between two mask distributions.

    Rows index ``row_masks`` (support of P), columns ``col_masks`` (support
    of Q); entries are joint mass, so rows sum to P and columns to Q.
    """

    coupling: np.ndarray
    row_masks: np.ndarray
    col_masks: np.ndarray
    cost: float

    def validate(self, p: np.ndarray, q: np.ndarray, tol: float = 1e-9) -> None:
        if (self.coupling < -tol).any():
            raise ValueError("negative coupling mass")
        if np.abs(self.coupling.sum(axis=1) - p).max() > tol:
            raise ValueError("row marginals do not match P")
        if np.abs(self.coupling.sum(axis=0) - q).max() > tol:
            raise ValueError("column marginals do not match Q")
        dist = hamming_matrix(self.row_masks, self.col_masks)
        if abs(float((self.coupling * dist).sum()) - self.cost) > tol:
            raise ValueError("stored cost disagrees with coupling")


@dataclass
class WassersteinResult:
    cost: float
    solver: str  # "simplex" | "flow_lp" | "bipartite_lp" | "sinkhorn"
    retained_p: float
    retained_q: float
    plan: TransportPlan | None = None

    def __float__(self) -> float:
        return self.cost


def hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Hamming distances between packed masks, shape (len(a), len(b))."""
    x = np.bitwise_xor(np.asarray(a, dtype=np.uint64)[:, None],
                       np.asarray(b, dtype=np.uint64)[None, :])
    out = np.zeros(x.shape, dtype=np.float64)
    while x.any():
        out += (x & 1).astype(np.float64)
        x >>= np.uint64(1)
    return out


def _dense_probs(dist: MaskDistribution) -> np.ndarray:
    full = np.zeros(1 << dist.d)
    full[dist.support] = dist.probabilities()
    return full


def sym_kl(P: MaskDistribution, Q: MaskDistribution) -> float:
    """Symmetrized KL divergence in bits: (KL(P||Q) + KL(Q||P)) / 2.

    Both distributions get add-eps smoothing (eps = 1e-12 / 2^d on every
    cell, renormalized) so sampled supports with missing masks stay finite.
    Cells outside both supports carry identical smoothed mass and cancel, so
    only the union of supports is materialized.
    """
    if P.d != Q.d:
        raise ValueError(f"mask width mismatch: {P.d} != {Q.d}")
    n = 1 << P.d
    eps = 1e-12 / n
    union = np.union1d(P.support, Q.support)

    def on_union(dist: MaskDistribution) -> np.ndarray:
        probs = np.zeros(len(union))
        idx = np.searchsorted(union, dist.support)
        probs[idx] = dist.probabilities()
        return (probs + eps) / (1.0 + eps * n)

    p, q = on_union(P), on_union(Q)
    kl_pq = float((p * np.log2(p / q)).sum())
    kl_qp = float((q * np.log2(q / p)).sum())
    return 0.5 * (kl_pq + kl_qp)


def _truncate(dist: MaskDistribution, size_limit: int) -> tuple[np.ndarray, np.ndarray, float]:
    """(support, probs, retained mass): smallest covering set if oversized."""
    probs = dist.probabilities()
    keep = probs > 0.0
    support, probs = dist.support[keep], probs[keep]
    if (1 << dist.d) <= size_limit or len(support) <= size_limit:
        return support, probs, 1.0
    order = np.argsort(probs)[::-1]
    cum = np.cumsum(probs[order])
    cut = int(np.searchsorted(cum, TRUNCATION_MASS)) + 1
    kept = np.sort(order[:cut])
    retained = float(probs[kept].sum())
    return support[kept], probs[kept] / retained, retained


def transportation_simplex(supply: np.ndarray, demand: np.ndarray,
                           cost: np.ndarray,
                           max_iter: int = 200_000) -> tuple[np.ndarray, float]:
    """Exact OT by the transportation simplex (MODI) with Bland's rule.

    Northwest-corner start, spanning-tree potentials, entering cell = lowest
    flat index with negative reduced cost, leaving cell = lowest index among
    the minimum donors. Bland's rule makes cycling impossible, so hitting
    max_iter indicates a bug, not a hard instance.
    """
    supply = np.asarray(supply, dtype=np.float64).copy()
    demand = np.asarray(demand, dtype=np.float64).copy()
    n, m = len(supply), len(demand)
    if cost.shape != (n, m):
        raise ValueError(f"cost shape {cost.shape} != ({n}, {m})")
    if abs(supply.sum() - demand.sum()) > 1e-9:
        raise ValueError("supply and demand masses differ")
    demand[-1] += supply.sum() - demand.sum()  # absorb float drift

    x = np.zeros((n, m))
    basis: list[tuple[int, int]] = []
    s, t = supply.copy(), demand.copy()
    i = j = 0
    while len(basis) < n + m - 1:
        q = min(s[i], t[j])
        x[i, j] = q
        basis.append((i, j))
        s[i] -= q
        t[j] -= q
        if len(basis) == n + m - 1:
            break
        # staircase walk; boundary moves are forced so float drift in the
        # exhaustion test cannot step off the grid
        if j == m - 1:
            i += 1
        elif i == n - 1:
            j += 1
        elif s[i] <= t[j]:
            i += 1
        else:
            j += 1

    for _ in range(max_iter):
        u = np.full(n, np.nan)
        v = np.full(m, np.nan)
        row_adj: list[list[int]] = [[] for _ in range(n)]
        col_adj: list[list[int]] = [[] for _ in range(m)]
        for bi, bj in basis:
            row_adj[bi].append(bj)
            col_adj[bj].append(bi)
        u[0] = 0.0
        stack = [(True, 0)]
        while stack:
            is_row, k = stack.pop()
            if is_row:
                for bj in row_adj[k]:
                    if np.isnan(v[bj]):
                        v[bj] = cost[k, bj] - u[k]
                        stack.append((False, bj))
            else:
                for bi in col_adj[k]:
                    if np.isnan(u[bi]):
                        u[bi] = cost[bi, k] - v[k]
                        stack.append((True, bi))

        rc = cost - u[:, None] - v[None, :]
        for bi, bj in basis:
            rc[bi, bj] = 0.0
        neg = np.flatnonzero(rc.ravel() < -1e-11)
        if neg.size == 0:
            return x, float((x * cost).sum())
        ei, ej = divmod(int(neg[0]), m)

        # unique tree path row(ei) -> col(ej); cycle = path + entering cell
        parent: dict[tuple[bool, int], tuple[bool, int]] = {}
        start, goal = (True, ei), (False, ej)
        stack = [start]
        seen = {start}
        while stack:
            node = stack.pop()
            if node == goal:
                break
            is_row, k = node
            nbrs = ((False, bj) for bj in row_adj[k]) if is_row else \
                   ((True, bi) for bi in col_adj[k])
            for nb in nbrs:
                if nb not in seen:
                    seen.add(nb)
                    parent[nb] = node
                    stack.append(nb)
        path_nodes = [goal]
        while path_nodes[-1] != start:
            path_nodes.append(parent[path_nodes[-1]])
        # walk col(ej) .. row(ei); consecutive nodes are basis cells
        cells = []
        for a, b in zip(path_nodes, path_nodes[1:]):
            (ra, ka), (rb, kb) = a, b
            cells.append((ka, kb) if ra else (kb, ka))
        minus = cells[0::2]  # alternate signs, starting at the col(ej) edge
        plus = [(ei, ej)] + cells[1::2]
        theta, leave = min((x[c], c) for c in minus)
        for c in plus:
            x[c] += theta
        for c in minus:
            x[c] -= theta
        x[leave] = 0.0
        basis.remove(leave)
        basis.append((ei, ej))
    raise RuntimeError("transportation simplex failed to converge (bug)")


def _flow_lp_cost(p_dense: np.ndarray, q_dense: np.ndarray, d: int) -> float:
    """W1 as min-cost flow on the hypercube: one unit-cost arc per bit flip."""
    n = 1 << d
    nodes = np.arange(n)
    heads = np.concatenate([nodes ^ (1 << i) for i in range(d)])
    tails = np.tile(nodes, d)
    e = d * n
    rows = np.concatenate([tails, heads])
    cols = np.concatenate([np.arange(e), np.arange(e)])
    data = np.concatenate([np.ones(e), -np.ones(e)])
    a_eq = sparse.coo_matrix((data, (rows, cols)), shape=(n, e)).tocsr()
    res = linprog(np.ones(e), A_eq=a_eq, b_eq=p_dense - q_dense,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"flow LP failed: {res.message}")
    return float(res.fun)


def _bipartite_lp(p: np.ndarray, q: np.ndarray,
                  cost: np.ndarray) -> tuple[np.ndarray, float]:
    n, m = cost.shape
    idx = np.arange(n * m)
    rows = np.concatenate([idx // m, n + idx % m])
    cols = np.concatenate([idx, idx])
    a_eq = sparse.coo_matrix((np.ones(2 * n * m), (rows, cols)),
                             shape=(n + m, n * m)).tocsr()
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([p, q]),
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"bipartite LP failed: {res.message}")
    return res.x.reshape(n, m), float(res.fun)


def _sinkhorn_log(p: np.ndarray, q: np.ndarray, cost: np.ndarray,
                  eps: float = 1e-3, max_iter: int = 5000,
                  tol: float = 1e-9) -> tuple[np.ndarray, float]:
    if cost.size > 64_000_000:
        raise ValueError(
            f"supports {cost.shape} too large even for the entropic fallback; "
            "lower size_limit to force harder truncation")
    logp, logq = np.log(p), np.log(q)
    f = np.zeros(len(p))
    g = np.zeros(len(q))
    ker = -cost / eps
    for _ in range(max_iter):
        f = eps * (logp - _lse_rows(ker + g[None, :] / eps))
        g = eps * (logq - _lse_rows((ker + f[:, None] / eps).T))
        plan = np.exp(ker + f[:, None] / eps + g[None, :] / eps)
        if np.abs(plan.sum(axis=1) - p).max() < tol:
            break
    return plan, float((plan * cost).sum())


def _lse_rows(a: np.ndarray) -> np.ndarray:
    hi = a.max(axis=1, keepdims=True)
    return (hi + np.log(np.exp(a - hi).sum(axis=1, keepdims=True))).ravel()


def wasserstein_hamming(P: MaskDistribution, Q: MaskDistribution,
                        size_limit: int = 4096,
                        return_plan: bool = False) -> WassersteinResult:
    """Optimal-transport distance between mask distributions, in bit flips."""
    if P.d != Q.d:
        raise ValueError(f"mask width mismatch: {P.d} != {Q.d}")
    d = P.d
    sup_p, pp, ret_p = _truncate(P, size_limit)
    sup_q, qq, ret_q = _truncate(Q, size_limit)
    n, m = len(pp), len(qq)

    if return_plan:
        if max(n, m) <= SIMPLEX_LIMIT:
            plan_mat, cost = transportation_simplex(
                pp, qq, hamming_matrix(sup_p, sup_q))
            solver = "simplex"
        elif max(n, m) <= PLAN_LP_LIMIT:
            plan_mat, cost = _bipartite_lp(pp, qq, hamming_matrix(sup_p, sup_q))
            solver = "bipartite_lp"
        else:
            raise ValueError(
                f"coupling for supports {n}x{m} exceeds {PLAN_LP_LIMIT} a side")
        plan = TransportPlan(coupling=plan_mat, row_masks=sup_p,
                             col_masks=sup_q, cost=cost)
        return WassersteinResult(cost, solver, ret_p, ret_q, plan)

    if max(n, m) <= SIMPLEX_LIMIT:
        _, cost = transportation_simplex(pp, qq, hamming_matrix(sup_p, sup_q))
        solver = "simplex"
    elif d <= FLOW_LP_LIMIT:
        dense_p = np.zeros(1 << d)
        dense_p[sup_p] = pp
        dense_q = np.zeros(1 << d)
        dense_q[sup_q] = qq
        cost = _flow_lp_cost(dense_p, dense_q, d)
        solver = "flow_lp"
    elif max(n, m) <= size_limit:
        _, cost = _bipartite_lp(pp, qq, hamming_matrix(sup_p, sup_q))
        solver = "bipartite_lp"
    else:
        _, cost = _sinkhorn_log(pp, qq, hamming_matrix(sup_p, sup_q))
        solver = "sinkhorn"
    return WassersteinResult(cost, solver, ret_p, ret_q, None)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("need two equal-length vectors")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points, got {len(x)}")
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise ValueError("zero variance input")
    return float((xc * yc).sum() / denom)


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Rank correlation with mean-rank tie handling."""
    return pearson(rankdata(x), rankdata(y))


def mpc(grid: np.ndarray, t1: int, t2: int, method: str = "pearson") -> float:
    """Mask-performance correlation between two tasks.

    ``grid`` holds accuracies with masks on rows and tasks on columns; both
    tasks must have been evaluated on the same mask set. Pearson by default
    (accuracies are interval-scaled); Spearman available for rank-only use.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError("grid must be masks x tasks")
    if method == "pearson":
        return pearson(grid[:, t1], grid[:, t2])
    if method == "spearman":
        return spearman(grid[:, t1], grid[:, t2])
    raise ValueError(f"unknown method {method!r}")


def mpc_matrix(grid: np.ndarray, task_names: tuple[str, ...],
               method: str = "pearson") -> DistanceMatrix:
    T = len(task_names)
    values = np.eye(T)
    for i in range(T):
        for j in range(i + 1, T):
            values[i, j] = values[j, i] = mpc(grid, i, j, method)
    return DistanceMatrix("mpc", values, "similarity", tuple(task_names))


def sym_kl_matrix(dists: list[MaskDistribution],
                  task_names: tuple[str, ...]) -> DistanceMatrix:
    T = len(dists)
    values = np.zeros((T, T))
    for i in range(T):
        for j in range(i + 1, T):
            values[i, j] = values[j, i] = sym_kl(dists[i], dists[j])
    return DistanceMatrix("sym_kl", values, "distance", tuple(task_names))


def wasserstein_matrix(dists: list[MaskDistribution],
                       task_names: tuple[str, ...],
                       size_limit: int = 4096,
                       ) -> tuple[DistanceMatrix, dict]:
    """Pairwise W1 plus metadata (solvers used, worst retained mass)."""
    T = len(dists)
    values = np.zeros((T, T))
    solvers: set[str] = set()
    min_retained = 1.0
    for i in range(T):
        for j in range(i + 1, T):
            res = wasserstein_hamming(dists[i], dists[j], size_limit=size_limit)
            values[i, j] = values[j, i] = res.cost
            solvers.add(res.solver)
            min_retained = min(min_retained, res.retained_p, res.retained_q)
    meta = {"solvers": sorted(solvers), "min_retained_mass": min_retained,
            "size_limit": size_limit}
    return DistanceMatrix("wasserstein", values, "distance",
                          tuple(task_names)), meta


def vector_distances(model: ISCModel,
                     task_names: tuple[str, ...] | None = None,
                     ) -> tuple[DistanceMatrix, DistanceMatrix]:
    """(cosine similarity, Euclidean distance) over the task embeddings."""
    T = model.n_tasks
    if task_names is None:
        task_names = tuple(f"task{t:02d}" for t in range(T))
    h = np.stack([model.task_representation(t) for t in range(T)])
    norms = np.linalg.norm(h, axis=1)
    cos = (h @ h.T) / np.outer(norms, norms)
    np.fill_diagonal(cos, 1.0)
    sq = (h[:, None, :] - h[None, :, :]) ** 2
    euc = np.sqrt(sq.sum(axis=2))
    np.fill_diagonal(euc, 0.0)
    return (DistanceMatrix("cosine", cos, "similarity", tuple(task_names)),
            DistanceMatrix("euclidean", euc, "distance", tuple(task_names)))


@dataclass
class RSAResult:
    """Absolute Spearman correlations between metrics' task-pair rankings."""

    metric_ids: tuple[str, ...]
    values: np.ndarray

    def save_csv(self, path) -> None:
        lines = ["metric," + ",".join(self.metric_ids)]
        for name, row in zip(self.metric_ids, self.values):
            lines.append(name + "," + ",".join(fmt(v) for v in row))
        atomic_write_text(path, "\n".join(lines) + "\n")


def rsa(matrices: list[DistanceMatrix]) -> RSAResult:
    """|Spearman| between the strict upper triangles of every matrix pair."""
    if len(matrices) < 2:
        raise ValueError("need at least two matrices")
    T = len(matrices[0].task_names)
    for mat in matrices:
        if len(mat.task_names) != T:
            raise ValueError("matrices cover different task sets")
    tris = [mat.upper_triangle() for mat in matrices]
    k = len(matrices)
    values = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            values[i, j] = values[j, i] = abs(spearman(tris[i], tris[j]))
    return RSAResult(tuple(mat.metric_id for mat in matrices), values)
