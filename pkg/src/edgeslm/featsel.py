"""The five feature-analysis procedures: lasso, RFE, PCA, random-forest
importance and correlation filtering, over numeric matrices.

Selection results are reporting artifacts: nothing downstream applies them
unless explicitly asked to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import learner

METHODS = ("lasso", "rfe", "pca", "random_forest", "correlation")


@dataclass(frozen=True)
class SelectionResult:
    method: str
    scores: tuple[float, ...]
    kept: tuple[int, ...]
    params: dict = field(default_factory=dict)
    converged: bool = True
    flags: tuple[str, ...] = ()


def standardize(X: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Per-column zero mean, unit variance (population sigma).

    Constant columns map to all zeros and are returned as flagged indices.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = [j for j in range(X.shape[1]) if std[j] == 0.0]
    safe = np.where(std == 0.0, 1.0, std)
    Z = (X - mean) / safe
    Z[:, constant] = 0.0
    return Z, constant


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    """Pearson matrix; zero-variance pairs get correlation 0, diagonal 1."""
    Z, constant = standardize(X)
    n = Z.shape[0]
    R = Z.T @ Z / n
    for j in constant:
        R[j, :] = 0.0
        R[:, j] = 0.0
    np.fill_diagonal(R, 1.0)
    return R


def correlation_filter(X: np.ndarray, threshold: float = 0.9) -> SelectionResult:
    """Drop, for each pair with |r| > threshold, the later-indexed feature."""
    R = correlation_matrix(X)
    d = R.shape[0]
    dropped: set[int] = set()
    for i in range(d):
        if i in dropped:
            continue
        for j in range(i + 1, d):
            if j not in dropped and abs(R[i, j]) > threshold:
                dropped.add(j)
    kept = tuple(j for j in range(d) if j not in dropped)
    # score = largest off-diagonal |r| involving the feature
    scores = []
    for j in range(d):
        off = [abs(R[j, k]) for k in range(d) if k != j]
        scores.append(max(off) if off else 0.0)
    return SelectionResult(method="correlation", scores=tuple(scores), kept=kept,
                           params={"threshold": threshold})


def soft_threshold(z: float, lam: float) -> float:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def lasso(X: np.ndarray, y: np.ndarray, lam: float, tol: float = 1e-6,
          max_iter: int = 10_000) -> tuple[SelectionResult, np.ndarray]:
    """Cyclic coordinate descent for (1/2n)||y - Xb||^2 + lam*||b||_1.

    X is assumed standardized and y centered (applied internally otherwise
    would change the solution; callers standardize explicitly). Converged
    when the largest coefficient change in a sweep drops below tol.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    col_sq = (X * X).sum(axis=0) / n
    beta = np.zeros(d)
    residual = y.copy()
    converged = False
    for _ in range(max_iter):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = (X[:, j] @ residual) / n + col_sq[j] * old
            new = soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                residual += X[:, j] * (old - new)
                beta[j] = new
            max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            converged = True
            break
    kept = tuple(int(j) for j in np.flatnonzero(beta))
    result = SelectionResult(method="lasso", scores=tuple(abs(b) for b in beta), kept=kept,
                             params={"lambda": lam, "tol": tol, "max_iter": max_iter},
                             converged=converged)
    return result, beta


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lam at which every coefficient is zero: max_j |X_j.y| / n."""
    n = X.shape[0]
    return float(np.max(np.abs(X.T @ y)) / n)


def lasso_kkt_residuals(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float):
    """Per-coordinate subgradient residuals for optimality checking.

    Returns (corr, beta) where corr_j = X_j.(y - Xb)/n; at an optimum
    |corr_j| <= lam when beta_j == 0 and corr_j == lam*sign(beta_j) otherwise.
    """
    n = X.shape[0]
    r = y - X @ beta
    return X.T @ r / n


def _jacobi_eigh(A: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Cyclic Jacobi rotations on a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns), unsorted.
    """
    A = np.array(A, dtype=float)
    d = A.shape[0]
    V = np.eye(d)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, (A * A).sum() - (np.diag(A) ** 2).sum()))
        if off < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if abs(A[p, q]) < tol / (d * d + 1):
                    continue
                theta = 0.5 * math.atan2(2 * A[p, q], A[q, q] - A[p, p])
                c, s = math.cos(theta), math.sin(theta)
                J = np.eye(d)
                J[p, p] = c
                J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    return np.diag(A).copy(), V


def pca(X: np.ndarray, k: int):
    """PCA of standardized X via cyclic Jacobi eigendecomposition.

    Returns (components k x d, explained_variance length k, SelectionResult).
    Components are rows, variance-descending; the selection ranks features by
    their largest absolute loading across the kept components.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if not (1 <= k <= d):
        raise ValueError(f"k must be in [1, {d}]")
    Z, _ = standardize(X)
    cov = Z.T @ Z / Z.shape[0]
    eigvals, eigvecs = _jacobi_eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    components = eigvecs[:, order].T[:k]
    explained = eigvals[:k]
    flags = tuple(f"component {i} has ~zero variance"
                  for i in range(k) if explained[i] < 1e-12)

    loading_scores = np.abs(components).max(axis=0)
    ranked = np.argsort(-loading_scores, kind="stable")
    kept = tuple(int(j) for j in sorted(ranked[:k]))
    result = SelectionResult(method="pca", scores=tuple(float(s) for s in loading_scores),
                             kept=kept, params={"k": k}, flags=flags)
    return components, explained, result


def transform_pca(X: np.ndarray, components: np.ndarray) -> np.ndarray:
    Z, _ = standardize(X)
    return Z @ components.T


def rfe(X: np.ndarray, y: np.ndarray, n_keep: int, step: int = 1,
        config: learner.TrainConfig | None = None) -> SelectionResult:
    """Recursive feature elimination wrapping the built-in linear classifier.

    Repeatedly refit on surviving features and drop the `step` smallest
    |weight| features until n_keep remain. Scores record elimination order
    (higher = survived longer; kept features share the top score).
    """
    if n_keep < 1:
        raise ValueError("n_keep must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = X.shape[1]
    config = config or learner.TrainConfig(epochs=8, learning_rate=5e-2, seed=0)
    surviving = list(range(d))
    scores = [0.0] * d
    round_no = 0
    while len(surviving) > n_keep:
        round_no += 1
        Z, _ = standardize(X[:, surviving])
        w, _b = learner.fit_linear(Z, y, config)
        order = np.argsort(np.abs(w))
        n_drop = min(step, len(surviving) - n_keep)
        for pos in order[:n_drop]:
            scores[surviving[pos]] = float(round_no)
        surviving = [surviving[pos] for pos in sorted(set(range(len(surviving))) - set(order[:n_drop]))]
    top = float(round_no + 1)
    for j in surviving:
        scores[j] = top
    return SelectionResult(method="rfe", scores=tuple(scores), kept=tuple(sorted(surviving)),
                           params={"n_keep": n_keep, "step": step})


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "prediction")

    def __init__(self, prediction=None, feature=None, threshold=None, left=None, right=None):
        self.prediction = prediction
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float((p * p).sum())


def _best_split(X, y, feat_candidates):
    n = len(y)
    total1 = float(np.sum(y == 1))
    total0 = n - total1
    parent_gini = _gini(np.array([total0, total1]))
    best = None  # (gain, feature, threshold)
    for j in feat_candidates:
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        left1 = np.cumsum(ys)[:-1].astype(float)
        nl = np.arange(1, n, dtype=float)
        nr = n - nl
        left0 = nl - left1
        right1 = total1 - left1
        right0 = total0 - left0
        gini_left = 1.0 - (left0 * left0 + left1 * left1) / (nl * nl)
        gini_right = 1.0 - (right0 * right0 + right1 * right1) / (nr * nr)
        gain = parent_gini - (nl * gini_left + nr * gini_right) / n
        gain[xs[:-1] == xs[1:]] = -np.inf
        i = int(np.argmax(gain))
        if np.isfinite(gain[i]) and (best is None or gain[i] > best[0] + 1e-15):
            best = (float(gain[i]), j, 0.5 * (xs[i] + xs[i + 1]))
    return best


def _grow_tree(X, y, depth, max_depth, rng, n_sub, importances):
    counts = np.array([np.sum(y == 0), np.sum(y == 1)], dtype=float)
    majority = int(counts[1] >= counts[0])
    if depth >= max_depth or counts.min() == 0 or len(y) < 2:
        return _TreeNode(prediction=majority)
    d = X.shape[1]
    feats = rng.choice(d, size=n_sub, replace=False)
    best = _best_split(X, y, feats)
    if best is None or best[0] <= 0:
        return _TreeNode(prediction=majority)
    gain, j, thr = best
    importances[j] += gain * len(y)
    mask = X[:, j] <= thr
    left = _grow_tree(X[mask], y[mask], depth + 1, max_depth, rng, n_sub, importances)
    right = _grow_tree(X[~mask], y[~mask], depth + 1, max_depth, rng, n_sub, importances)
    return _TreeNode(feature=j, threshold=thr, left=left, right=right)


def random_forest_importance(X: np.ndarray, y: np.ndarray, n_trees: int = 100,
                             max_depth: int = 8, seed: int = 0,
                             n_keep: int | None = None) -> SelectionResult:
    """Mean-impurity-decrease importances from bagged Gini CART trees with
    sqrt(n_features) candidates per split, normalized to sum 1."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, d = X.shape
    params = {"n_trees": n_trees, "max_depth": max_depth, "seed": seed}
    if len(np.unique(y)) < 2:
        return SelectionResult(method="random_forest", scores=(0.0,) * d, kept=(),
                               params=params, flags=("single-class target",))
    rng = np.random.default_rng(seed)
    n_sub = max(1, int(math.sqrt(d)))
    importances = np.zeros(d)
    for _ in range(n_trees):
        idx = rng.integers(0, n, size=n)
        _grow_tree(X[idx], y[idx], 0, max_depth, rng, n_sub, importances)
    total = importances.sum()
    if total > 0:
        importances = importances / total
    if n_keep is None:
        n_keep = max(1, d // 2)
    ranked = np.argsort(-importances, kind="stable")
    kept = tuple(int(j) for j in sorted(ranked[:n_keep]))
    return SelectionResult(method="random_forest", scores=tuple(float(s) for s in importances),
                           kept=kept, params=params)


def export_selection_csv(results: list[SelectionResult], feature_names: list[str]) -> str:
    lines = ["feature,method,score,kept"]
    for res in results:
        for j, name in enumerate(feature_names):
            lines.append(f"{name},{res.method},{res.scores[j]:.6f},{int(j in res.kept)}")
    return "\n".join(lines) + "\n"
