"""Distance matrices, MDS embeddings, and embedding-quality measures."""

from __future__ import annotations

import heapq
import warnings
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.spatial.distance import cdist


def pairwise_euclidean(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    d = cdist(points, points)
    np.fill_diagonal(d, 0.0)
    return d


def _neighbor_lists(dist: np.ndarray, m: int) -> list[list[tuple[int, float]]]:
    n = dist.shape[0]
    masked = dist.copy()
    np.fill_diagonal(masked, np.inf)
    order = np.argsort(masked, axis=1, kind="stable")
    adjacency: list[dict[int, float]] = [dict() for _ in range(n)]
    for i in range(n):
        for j in order[i, :m]:
            j = int(j)
            adjacency[i][j] = dist[i, j]
            adjacency[j][i] = dist[i, j]
    return [sorted(adj.items()) for adj in adjacency]


def _connected(adjacency: list[list[tuple[int, float]]]) -> bool:
    n = len(adjacency)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        node = stack.pop()
        for nb, _ in adjacency[node]:
            if not seen[nb]:
                seen[nb] = True
                stack.append(nb)
    return bool(seen.all())


def _dijkstra(adjacency: list[list[tuple[int, float]]], source: int) -> np.ndarray:
    n = len(adjacency)
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        for nb, w in adjacency[node]:
            nd = d + w
            if nd < dist[nb]:
                dist[nb] = nd
                heapq.heappush(heap, (nd, nb))
    return dist


def geodesic_distances(points: np.ndarray, return_neighbor_size: bool = False):
    """Shortest-path distances over the smallest connected m-NN graph.

    The neighbor count m grows from 2 until the symmetrized graph is
    connected; edge weights are Euclidean distances and all-pairs paths come
    from one Dijkstra run per source.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    euclid = pairwise_euclidean(points)
    adjacency = None
    m_used = None
    for m in range(2, n):
        adjacency = _neighbor_lists(euclid, m)
        if _connected(adjacency):
            m_used = m
            break
    if m_used is None:  # n == 2, or everything coincident
        m_used = max(n - 1, 1)
        adjacency = _neighbor_lists(euclid, m_used)
    out = np.vstack([_dijkstra(adjacency, i) for i in range(n)])
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 0.0)
    if return_neighbor_size:
        return out, m_used
    return out


def classical_mds(dist: np.ndarray, dim: int) -> np.ndarray:
    """Torgerson MDS: double-center the squared distances and eigendecompose.

    Coordinates use the top ``dim`` nonnegative eigenpairs; missing positive
    directions are zero-padded with a warning. Axis signs are fixed by making
    each axis's largest-magnitude coordinate positive, so the output is fully
    deterministic.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if not np.allclose(dist, dist.T, atol=1e-10):
        raise ValueError("distance matrix must be symmetric")
    if dim > n - 1:
        raise ValueError("dim must be <= n - 1")
    center = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * center @ (dist * dist) @ center
    b = (b + b.T) / 2.0
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    # eigenvalue dust from a rank-deficient configuration is not a real axis
    cutoff = max(float(evals[0]), 0.0) * 1e-12
    positive = int((evals > cutoff).sum())
    take = min(dim, positive)
    if take < dim:
        warnings.warn(
            f"only {positive} positive eigenvalues; padding {dim - take} zero axes"
        )
    coords = np.zeros((n, dim))
    if take:
        coords[:, :take] = evecs[:, :take] * np.sqrt(evals[:take])
    for axis in range(dim):
        col = coords[:, axis]
        peak = int(np.argmax(np.abs(col)))
        if col[peak] < 0.0:
            coords[:, axis] = -col
    return coords


def _raw_stress(dist: np.ndarray, coords: np.ndarray) -> float:
    delta = dist - cdist(coords, coords)
    return float(np.sum(np.triu(delta, 1) ** 2))


def smacof_mds(
    dist: np.ndarray,
    dim: int,
    rng: np.random.Generator,
    iters: int = 500,
    tol: float = 1e-9,
    init: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stress majorization from a seeded random start.

    Returns (coords, stress_history). Majorization guarantees the raw stress
    never increases; an update that fails to improve at numerical precision
    is rejected and iteration stops, so the recorded history is monotone.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if init is not None:
        coords = np.array(init, dtype=float)
    else:
        scale = float(dist.max()) or 1.0
        coords = rng.standard_normal((n, dim)) * (scale / 4.0)
    history = [_raw_stress(dist, coords)]
    for _ in range(iters):
        d_now = cdist(coords, coords)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d_now > 0.0, dist / d_now, 0.0)
        b = -ratio
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        new_coords = (b @ coords) / n
        stress = _raw_stress(dist, new_coords)
        if stress > history[-1]:
            break  # at the numerical floor; keep the better configuration
        coords = new_coords
        improvement = history[-1] - stress
        history.append(stress)
        if improvement < tol * max(history[-2], 1e-300):
            break
    return coords, np.array(history)


def knn_sets(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of each row's k nearest neighbors, self excluded.

    Ties are broken by index order so neighbor sets are reproducible.
    """
    n = dist.shape[0]
    if not (0 < k < n):
        raise ValueError("require 0 < k < n")
    masked = dist.copy()
    np.fill_diagonal(masked, np.inf)
    return np.argsort(masked, axis=1, kind="stable")[:, :k]


def neighborhood_preservation(d_orig: np.ndarray, d_embed: np.ndarray, k: int) -> float:
    """Average fraction of original-space k-NN retained in the embedding."""
    orig = knn_sets(d_orig, k)
    embed = knn_sets(d_embed, k)
    n = d_orig.shape[0]
    shared = 0
    for i in range(n):
        shared += len(set(orig[i].tolist()) & set(embed[i].tolist()))
    return shared / (n * k)


def stress_measure(d_orig: np.ndarray, d_embed: np.ndarray) -> float:
    """Normalized squared distance discrepancy between the two spaces."""
    if d_orig.shape != d_embed.shape:
        raise ValueError("distance matrices must share a shape")
    denom = float(np.sum(d_embed * d_embed))
    if denom == 0.0:
        raise ValueError("embedding distances are all zero")
    return float(np.sum((d_orig - d_embed) ** 2)) / denom


def pne(d_orig: np.ndarray, d_embed: np.ndarray, k: int) -> float:
    """Preservation Neighborhood Error: squared distortion over the k-NN of
    each point in the original space (misses) plus in the embedding space
    (false positives), averaged with a 1/(2n) factor."""
    orig = knn_sets(d_orig, k)
    embed = knn_sets(d_embed, k)
    n = d_orig.shape[0]
    total = 0.0
    sq = (d_orig - d_embed) ** 2
    for i in range(n):
        total += sq[i, orig[i]].sum() / k
        total += sq[i, embed[i]].sum() / k
    return total / (2.0 * n)


def select_k(
    d_orig_fn: Callable[[], np.ndarray],
    d_embed_fn: Callable[[np.random.Generator, int, int], np.ndarray],
    k_range: Iterable[int],
    runs: int = 50,
    seed: int = 0,
) -> tuple[int, list[dict]]:
    """Pick the k minimizing the median PNE across seeded runs.

    ``d_orig_fn()`` supplies the original-space distances once;
    ``d_embed_fn(rng, k, run)`` supplies the embedding-space distances for a
    given neighborhood size within a seeded run (the embedding may depend on
    k, and the per-run rng carries the stochastic part, e.g. an MDS start).
    Returns the argmin (smallest k on ties) plus the full per-run table.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range is empty")
    d_orig = d_orig_fn()
    children = np.random.SeedSequence(seed).spawn(runs)
    rows: list[dict] = []
    per_k: dict[int, list[float]] = {k: [] for k in ks}
    for run, child in enumerate(children):
        rng = np.random.default_rng(child)
        for k in ks:
            value = pne(d_orig, d_embed_fn(rng, k, run), k)
            per_k[k].append(value)
            rows.append({"k": k, "run": run, "pne": value})
    medians = np.array([np.median(per_k[k]) for k in ks])
    return ks[int(np.argmin(medians))], rows


def write_distance_tsv(path, dist: np.ndarray, ids: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join([""] + list(ids)) + "\n")
        for name, row in zip(ids, dist):
            fh.write("\t".join([name] + [repr(float(v)) for v in row]) + "\n")


def read_distance_tsv(path) -> tuple[np.ndarray, list[str]]:
    with open(path, encoding="utf-8") as fh:
        ids = fh.readline().rstrip("\n").split("\t")[1:]
        rows = []
        for line in fh:
            rows.append([float(v) for v in line.rstrip("\n").split("\t")[1:]])
    return np.array(rows), ids
