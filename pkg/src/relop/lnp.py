"""Linear Neighborhood Propagation over Euclidean or geodesic geometry."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .manifold import geodesic_distances, knn_sets, pairwise_euclidean, smacof_mds

DIVERGENCE_LIMIT = 1e6

# structurally rank-deficient local Gram systems (k above the ambient
# dimension) get the standard LLE conditioning; otherwise the system is
# solved exactly, falling back to a tiny ridge only on singular input
STRUCTURAL_RIDGE = 1e-3
FALLBACK_RIDGES = (1e-12, 1e-9, 1e-6, 1e-3)


@dataclass
class WeightMatrix:
    """Row-stochastic local reconstruction weights.

    ``indices[i]`` lists point i's k neighbors and ``weights[i]`` their
    coefficients, which sum to one per row; entries may be negative.
    """

    indices: np.ndarray  # (n, k) int
    weights: np.ndarray  # (n, k) float

    @property
    def n_points(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def row_sums(self) -> np.ndarray:
        return self.weights.sum(axis=1)


def _regularized(gram: np.ndarray, k: int, ambient_dim: int) -> np.ndarray:
    if k <= ambient_dim:
        return gram
    trace = float(np.trace(gram))
    ridge = STRUCTURAL_RIDGE * (trace / k if trace > 0.0 else 1.0)
    return gram + ridge * np.eye(k)


def _affine_solve(gram: np.ndarray, k: int) -> np.ndarray:
    ones = np.ones(k)
    try:
        w = np.linalg.solve(gram, ones)
        if np.isfinite(w).all() and abs(w.sum()) > 1e-12:
            return w / w.sum()
    except np.linalg.LinAlgError:
        pass
    trace = float(np.trace(gram))
    scale = trace / k if trace > 0.0 else 1.0
    for eps in FALLBACK_RIDGES:
        try:
            w = np.linalg.solve(gram + eps * scale * np.eye(k), ones)
        except np.linalg.LinAlgError:
            continue
        if np.isfinite(w).all() and abs(w.sum()) > 1e-12:
            return w / w.sum()
    raise np.linalg.LinAlgError("local Gram system could not be stabilized")


def _simplex_solve(gram: np.ndarray, k: int, max_pivots: int = 200) -> np.ndarray:
    """Minimize w'Gw subject to sum(w)=1, w>=0 (Lawson-Hanson active set).

    KKT: on the free set w is the normalized solution of G_ff w = 1; clamped
    coordinates need dual value 2(Gw)_j - lambda >= 0.
    """
    trace = float(np.trace(gram))
    scale = trace / k if trace > 0.0 else 1.0
    free = np.ones(k, dtype=bool)
    w = np.full(k, 1.0 / k)
    for _ in range(max_pivots):
        idx = np.where(free)[0]
        sub = gram[np.ix_(idx, idx)]
        try:
            wf = np.linalg.solve(sub, np.ones(idx.size))
        except np.linalg.LinAlgError:
            wf = np.linalg.solve(
                sub + FALLBACK_RIDGES[0] * scale * np.eye(idx.size), np.ones(idx.size)
            )
        total = wf.sum()
        if not np.isfinite(wf).all() or abs(total) < 1e-12:
            wf = np.linalg.solve(
                sub + STRUCTURAL_RIDGE * scale * np.eye(idx.size), np.ones(idx.size)
            )
            total = wf.sum()
        wf = wf / total
        if wf.min() < -1e-12:
            free[idx[int(np.argmin(wf))]] = False
            if not free.any():
                return np.full(k, 1.0 / k)
            continue
        w = np.zeros(k)
        w[idx] = np.clip(wf, 0.0, None)
        w /= w.sum()
        lam = 2.0 / max(total, 1e-300)
        dual = 2.0 * (gram @ w) - lam
        clamped = np.where(~free)[0]
        if clamped.size == 0 or dual[clamped].min() >= -1e-9 * max(abs(lam), 1.0):
            return w
        free[clamped[int(np.argmin(dual[clamped]))]] = True
    return w


def reconstruction_weights(
    points: np.ndarray,
    k: int,
    metric: str = "euclidean",
    nonnegative: bool = False,
) -> WeightMatrix:
    """Weights that best reconstruct each point from its k nearest neighbors.

    Neighbors are ranked under ``metric`` (geodesic ranks by shortest-path
    distance over the point cloud); the local Gram system G w = 1 is solved
    per point and normalized to sum to one. ``nonnegative=True`` adds the
    w >= 0 constraint, which makes the downstream propagation matrix
    sub-stochastic and therefore contractive.
    """
    points = np.asarray(points, dtype=float)
    n, dim = points.shape
    if not (0 < k < n):
        raise ValueError("require 0 < k < n")
    if metric == "euclidean":
        dist = pairwise_euclidean(points)
    elif metric == "geodesic":
        dist = geodesic_distances(points)
    else:
        raise ValueError(f"unknown metric: {metric}")
    neighbors = knn_sets(dist, k)
    weights = np.empty((n, k))
    for i in range(n):
        diffs = points[i] - points[neighbors[i]]
        gram = _regularized(diffs @ diffs.T, k, dim)
        if nonnegative:
            weights[i] = _simplex_solve(gram, k)
        else:
            weights[i] = _affine_solve(gram, k)
    return WeightMatrix(indices=neighbors, weights=weights)


def unfold(
    points: np.ndarray,
    rng: np.random.Generator,
    iters: int = 500,
    tol: float = 1e-9,
) -> np.ndarray:
    """Flatten the point cloud by embedding its geodesic distances via
    stress-majorization MDS at the original dimensionality."""
    points = np.asarray(points, dtype=float)
    geo = geodesic_distances(points)
    coords, _ = smacof_mds(geo, points.shape[1], rng, iters=iters, tol=tol)
    return coords


def propagate(
    weight_matrix: WeightMatrix,
    initial_labels: Mapping[int, int],
    n_classes: int,
    tol: float = 1e-9,
    max_iters: int = 10000,
) -> np.ndarray:
    """Iterate label reconstruction to a fixed point.

    Labeled rows stay clamped to their one-hot vectors; unlabeled rows start
    at zero and are updated synchronously from the previous iteration until
    the largest entry change falls below ``tol``. Divergence (entries beyond
    1e6) and hitting ``max_iters`` are reported as warnings.
    """
    n = weight_matrix.n_points
    labels = np.zeros((n, n_classes))
    for i, c in initial_labels.items():
        if not (0 <= c < n_classes):
            raise ValueError(f"class {c} out of range")
        labels[i, c] = 1.0
    unlabeled = np.array(
        [i for i in range(n) if i not in initial_labels], dtype=np.int64
    )
    if unlabeled.size == 0:
        return labels
    # partitioned dense form of the row update: L_u <- W_uu L_u + W_ul L_l
    dense = np.zeros((unlabeled.size, n))
    rows = np.repeat(np.arange(unlabeled.size), weight_matrix.k)
    np.add.at(
        dense,
        (rows, weight_matrix.indices[unlabeled].ravel()),
        weight_matrix.weights[unlabeled].ravel(),
    )
    w_uu = dense[:, unlabeled]
    labeled_idx = np.array(sorted(initial_labels), dtype=np.int64)
    bias = dense[:, labeled_idx] @ labels[labeled_idx]
    current = labels[unlabeled]
    for _ in range(max_iters):
        updated = w_uu @ current + bias
        delta = float(np.abs(updated - current).max())
        current = updated
        if not np.isfinite(updated).all() or np.abs(updated).max() > DIVERGENCE_LIMIT:
            labels[unlabeled] = current
            warnings.warn("label propagation diverged (weights are not contractive)")
            return labels
        if delta < tol:
            labels[unlabeled] = current
            return labels
    labels[unlabeled] = current
    warnings.warn(f"label propagation did not converge within {max_iters} iterations")
    return labels


def discretize(label_matrix: np.ndarray) -> np.ndarray:
    """One-hot each row at its argmax; ties go to the lowest class index."""
    out = np.zeros_like(label_matrix)
    out[np.arange(label_matrix.shape[0]), np.argmax(label_matrix, axis=1)] = 1.0
    return out


def lle_embedding(weight_matrix: WeightMatrix, dim: int) -> np.ndarray:
    """The low-dimensional configuration a weight matrix reconstructs best.

    Bottom eigenvectors of (I-W)'(I-W) with the constant mode dropped,
    scaled by sqrt(n); this is how the reconstruction quality of W at a
    given neighborhood size is judged (one embedding per k)."""
    n = weight_matrix.n_points
    if not (0 < dim < n):
        raise ValueError("require 0 < dim < n")
    dense = np.zeros((n, n))
    rows = np.repeat(np.arange(n), weight_matrix.k)
    np.add.at(dense, (rows, weight_matrix.indices.ravel()), weight_matrix.weights.ravel())
    m = np.eye(n) - dense
    m = m.T @ m
    _, vectors = np.linalg.eigh(m)
    return vectors[:, 1 : dim + 1] * np.sqrt(n)


@dataclass
class LnpProblem:
    points: np.ndarray
    initial_labels: dict[int, int]
    n_classes: int
    k: int
    metric: str = "euclidean"
    seed: int = 0
    ids: Optional[list[str]] = None
    # the prediction path needs a contractive propagation matrix, so it
    # defaults to the constrained weight solve; flip to compare with the
    # unconstrained variant (divergence is then monitored and reported)
    nonnegative_weights: bool = True
    propagate_tol: float = 1e-9
    propagate_max_iters: int = 10000
    smacof_iters: int = 500
    smacof_tol: float = 1e-9


def predict(problem: LnpProblem) -> tuple[np.ndarray, np.ndarray]:
    """Run the full propagation pipeline; returns (classes, soft scores).

    The geodesic variant first unfolds the cloud, then finds neighbors and
    weights on the unfolded coordinates.
    """
    points = np.asarray(problem.points, dtype=float)
    if problem.metric == "geodesic":
        rng = np.random.default_rng(problem.seed)
        points = unfold(
            points, rng, iters=problem.smacof_iters, tol=problem.smacof_tol
        )
    elif problem.metric != "euclidean":
        raise ValueError(f"unknown metric: {problem.metric}")
    wm = reconstruction_weights(points, problem.k, nonnegative=problem.nonnegative_weights)
    soft = propagate(
        wm,
        problem.initial_labels,
        problem.n_classes,
        tol=problem.propagate_tol,
        max_iters=problem.propagate_max_iters,
    )
    classes = np.argmax(soft, axis=1)
    return classes, soft


@dataclass
class SweepRow:
    metric: str
    label_count: int
    k: int
    run: int
    errors: int


def _draw_balanced_labels(
    truth: np.ndarray,
    label_count: int,
    n_classes: int,
    rng: np.random.Generator,
) -> dict[int, int]:
    per_class = label_count // n_classes
    initial: dict[int, int] = {}
    for c in range(n_classes):
        members = np.where(truth == c)[0]
        take = min(per_class, members.size)
        picked = rng.choice(members, size=take, replace=False)
        for i in picked:
            initial[int(i)] = c
    return initial


def sensitivity_sweep(
    points: np.ndarray,
    truth: np.ndarray,
    label_counts: Sequence[int],
    k_range: Iterable[int],
    runs: int = 50,
    seed: int = 0,
    metrics: Sequence[str] = ("euclidean", "geodesic"),
    nonnegative: bool = True,
    propagate_tol: float = 1e-9,
    propagate_max_iters: int = 10000,
) -> list[SweepRow]:
    """Prediction-error table over metric x label budget x k x seeded run.

    Initial labels are balanced draws from the truth; errors are counted on
    unlabeled entities only. Every cell is reproducible from ``seed``.
    """
    points = np.asarray(points, dtype=float)
    truth = np.asarray(truth, dtype=np.int64)
    n = points.shape[0]
    n_classes = int(truth.max()) + 1
    ks = [k for k in sorted(set(int(k) for k in k_range)) if 0 < k < n]
    if not ks:
        raise ValueError("k_range has no usable values")
    rows: list[SweepRow] = []
    euclid_weights = {
        k: reconstruction_weights(points, k, nonnegative=nonnegative) for k in ks
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # divergent cells still score as errors
        for metric_id, metric in enumerate(metrics):
            for run in range(runs):
                rng = np.random.default_rng(
                    np.random.SeedSequence([seed, metric_id, run])
                )
                if metric == "geodesic":
                    unfolded = unfold(points, rng)
                    weights_by_k = {
                        k: reconstruction_weights(unfolded, k, nonnegative=nonnegative)
                        for k in ks
                    }
                else:
                    weights_by_k = euclid_weights
                for label_count in sorted(label_counts):
                    initial = _draw_balanced_labels(truth, label_count, n_classes, rng)
                    unlabeled = np.array(
                        [i for i in range(n) if i not in initial], dtype=np.int64
                    )
                    for k in ks:
                        soft = propagate(
                            weights_by_k[k],
                            initial,
                            n_classes,
                            tol=propagate_tol,
                            max_iters=propagate_max_iters,
                        )
                        predicted = np.argmax(soft, axis=1)
                        errors = int(
                            (predicted[unlabeled] != truth[unlabeled]).sum()
                        ) if unlabeled.size else 0
                        rows.append(SweepRow(metric, label_count, k, run, errors))
    return rows


def sweep_medians(rows: Sequence[SweepRow]) -> dict[tuple[str, int, int], tuple[float, float, float]]:
    """Median and 2.5/97.5 percentile band per (metric, label_count, k)."""
    cells: dict[tuple[str, int, int], list[int]] = {}
    for row in rows:
        cells.setdefault((row.metric, row.label_count, row.k), []).append(row.errors)
    out = {}
    for key, values in cells.items():
        arr = np.array(values, dtype=float)
        out[key] = (
            float(np.median(arr)),
            float(np.percentile(arr, 2.5)),
            float(np.percentile(arr, 97.5)),
        )
    return out


def evaluate_fixture(
    predictions: Mapping[str, str],
    truth: Mapping[str, str],
) -> tuple[int, list[str]]:
    """Count and list disagreements between aligned entity->label mappings."""
    if set(predictions) != set(truth):
        raise ValueError("prediction and truth entity sets differ")
    misses = sorted(e for e in truth if predictions[e] != truth[e])
    return len(misses), misses
