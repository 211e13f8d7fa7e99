"""Per-concert Gaussian mixture on rhythmogram rows and its posteriors.

A mixture is always fitted on the frames of a single recording; there is
no cross-concert model.  Posterior vectors replace the raw 201-lag rows
as a low-dimensional rhythm descriptor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .errors import DegenerateMixtureError

DEFAULT_K = 5
DEFAULT_SEED = 7
VAR_FLOOR = 1e-6
MIN_WEIGHT = 1e-6


@dataclass
class Clustering:
    labels: np.ndarray
    centroids: np.ndarray
    wcv: float


@dataclass
class ElbowDiagnostic:
    m_values: list
    wcv: list
    suggestion: int | None


@dataclass
class GmmModel:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    log_likelihood: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "weights": self.weights.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GmmModel":
        model = cls(np.asarray(d["means"], float), np.asarray(d["variances"], float),
                    np.asarray(d["weights"], float))
        if model.k != int(d.get("k", model.k)):
            raise ValueError("k does not match the number of components")
        return model

    @classmethod
    def from_json(cls, text: str) -> "GmmModel":
        return cls.from_dict(json.loads(text))


@dataclass
class PosteriorSequence:
    matrix: np.ndarray

    @property
    def classes(self) -> np.ndarray:
        """Argmax component per frame (ties go to the lower index)."""
        return np.argmax(self.matrix, axis=1)


# ---------------------------------------------------------------------------
# k-means


def _lloyd(x, centroids, max_iter):
    labels = None
    for _ in range(max_iter):
        d = cdist(x, centroids, "sqeuclidean")
        new = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for m in range(len(centroids)):
            members = labels == m
            if members.any():
                centroids[m] = x[members].mean(axis=0)
            else:
                far = np.argmax(d[np.arange(len(x)), labels])
                centroids[m] = x[far]
                labels[far] = m
                d[far] = 0.0
    d = ((x - centroids[labels]) ** 2).sum()
    return labels, centroids, float(d)


def kmeans(rows, M: int, seed: int = DEFAULT_SEED, n_init: int = 10,
           max_iter: int = 300, init=None) -> Clustering:
    """Lloyd's k-means, best of ``n_init`` seeded restarts by total
    within-cluster variation.

    ``init`` optionally adds one restart from the given centroids.
    """
    x = np.asarray(rows, dtype=np.float64)
    if M < 1:
        raise ValueError("M must be >= 1")
    uniq = np.unique(x, axis=0)
    if M > len(uniq):
        raise ValueError(f"M={M} exceeds the {len(uniq)} distinct rows")
    rng = np.random.default_rng(seed)
    starts = [uniq[rng.choice(len(uniq), M, replace=False)] for _ in range(n_init)]
    if init is not None:
        starts.append(np.asarray(init, dtype=np.float64))
    best = None
    for c0 in starts:
        labels, cents, wcv = _lloyd(x, c0.copy(), max_iter)
        if best is None or wcv < best.wcv:
            best = Clustering(labels, cents, wcv)
    return best


def elbow_k(rows, m_range, seed: int = DEFAULT_SEED) -> ElbowDiagnostic:
    """Within-cluster variation over ``m_range`` and the elbow suggestion.

    Each M also restarts from the previous solution plus the worst-fit
    point, so the reported curve cannot increase with M.  The suggestion
    maximizes the discrete second difference and is ``None`` with fewer
    than three candidates.
    """
    m_values = [int(m) for m in m_range]
    if not m_values or any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ValueError("m_range must be non-empty and ascending")
    x = np.asarray(rows, dtype=np.float64)
    wcv = []
    prev = None
    for m in m_values:
        init = None
        if prev is not None:
            extra = m - len(prev.centroids)
            resid = ((x - prev.centroids[prev.labels]) ** 2).sum(axis=1)
            far = np.argsort(-resid, kind="stable")[:extra]
            init = np.vstack([prev.centroids, x[far]])
            if len(np.unique(init, axis=0)) < m:
                init = None
        prev = kmeans(x, m, seed, init=init)
        wcv.append(prev.wcv)
    suggestion = None
    if len(m_values) >= 3:
        w = np.asarray(wcv)
        second = w[:-2] - 2 * w[1:-1] + w[2:]
        suggestion = m_values[1 + int(np.argmax(second))]
    return ElbowDiagnostic(m_values, wcv, suggestion)


# ---------------------------------------------------------------------------
# Diagonal-covariance EM


def _log_joint(x, means, variances, weights):
    """log w_k + log N(x | mu_k, diag var_k), shape (N, k)."""
    maha = np.empty((len(x), len(weights)))
    for m in range(len(weights)):
        diff = x - means[m]
        maha[:, m] = (diff * diff) @ (1.0 / variances[m])
    logdet = np.log(variances).sum(axis=1)
    d = x.shape[1]
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logw - 0.5 * (d * np.log(2 * np.pi) + logdet + maha)


def _em(x, k, seed, max_iter, tol, var_floor):
    n = len(x)
    cl = kmeans(x, k, seed)
    counts = np.bincount(cl.labels, minlength=k).astype(float)
    weights = counts / n
    means = cl.centroids.copy()
    variances = np.empty_like(means)
    for m in range(k):
        members = x[cl.labels == m]
        variances[m] = members.var(axis=0) if len(members) else x.var(axis=0)
    variances = np.maximum(variances, var_floor)

    history = []
    for _ in range(max_iter):
        lj = _log_joint(x, means, variances, weights)
        norm = logsumexp(lj, axis=1)
        ll = float(norm.mean())
        if history and ll - history[-1] < tol:
            history.append(ll)
            break
        history.append(ll)
        resp = np.exp(lj - norm[:, None])
        nk = resp.sum(axis=0)
        weights = nk / n
        if np.any(weights < MIN_WEIGHT):
            return None
        means = (resp.T @ x) / nk[:, None]
        variances = np.empty_like(means)
        for m in range(k):
            diff = x - means[m]
            variances[m] = resp[:, m] @ (diff * diff) / nk[m]
        variances = np.maximum(variances, var_floor)
    else:
        lj = _log_joint(x, means, variances, weights)
        history.append(float(logsumexp(lj, axis=1).mean()))
    return GmmModel(means, variances, weights, history)


def fit_gmm(rows, k: int = DEFAULT_K, seed: int = DEFAULT_SEED, max_iter: int = 200,
            tol: float = 1e-6, var_floor: float = VAR_FLOOR) -> GmmModel:
    """Maximum-likelihood diagonal GMM with k-means initialization.

    EM stops when the mean per-frame log-likelihood gains less than
    ``tol`` or after ``max_iter`` iterations.  ``log_likelihood`` on the
    returned model records the per-frame value before each M-step.  A
    component whose weight collapses triggers one reseeded restart.
    """
    x = np.asarray(getattr(rows, "matrix", rows), dtype=np.float64)
    if len(x) < 10 * k:
        raise ValueError(f"need at least {10 * k} rows to fit {k} components")
    try:
        model = _em(x, k, seed, max_iter, tol, var_floor)
        if model is None:
            model = _em(x, k, seed + 1, max_iter, tol, var_floor)
    except ValueError as exc:
        raise DegenerateMixtureError(f"degenerate mixture: {exc}") from exc
    if model is None:
        raise DegenerateMixtureError("degenerate mixture")
    return model


def posteriors(model: GmmModel, rg) -> PosteriorSequence:
    """Component posteriors for every frame, computed in the log domain."""
    x = np.asarray(getattr(rg, "matrix", rg), dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValueError(f"feature dimension {x.shape[-1]} != model dimension {model.dim}")
    lj = _log_joint(x, model.means, model.variances, model.weights)
    lj -= lj.max(axis=1, keepdims=True)
    p = np.exp(lj)
    p /= p.sum(axis=1, keepdims=True)
    return PosteriorSequence(p)
