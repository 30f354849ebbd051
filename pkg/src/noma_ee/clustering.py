"""Greedy two-user clustering by channel correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import ConfigError, DegenerateChannelError, PairingInfeasibleError


@dataclass(frozen=True)
class PairScore:
    i: int
    j: int
    corr: float
    gain_diff: float


@dataclass(frozen=True)
class Cluster:
    strong: int
    weak: int
    score: PairScore

    def swapped(self) -> "Cluster":
        return Cluster(strong=self.weak, weak=self.strong, score=self.score)


def _as_matrix(channels) -> np.ndarray:
    rows = [getattr(h, "vector", h) for h in channels]
    return np.atleast_2d(np.asarray(rows, dtype=complex))


def correlation(h_i, h_j) -> float:
    """``|h_i h_j^H| / (||h_i|| ||h_j||)``, clipped into [0, 1]."""
    a = np.asarray(getattr(h_i, "vector", h_i), dtype=complex)
    b = np.asarray(getattr(h_j, "vector", h_j), dtype=complex)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateChannelError("correlation is undefined for a zero channel")
    return float(min(1.0, abs(np.vdot(b, a)) / (na * nb)))


def pair_scores(channels, epsilon: float = 0.0) -> list[PairScore]:
    """All pairs with correlation >= ``epsilon``, best first.

    Ordering is by correlation descending, then gain difference descending,
    then index order.
    """
    H = _as_matrix(channels)
    norms = np.linalg.norm(H, axis=1)
    if np.any(norms == 0):
        raise DegenerateChannelError("zero-norm channel in pairing pool")
    corr = np.minimum(np.abs(H @ H.conj().T) / np.outer(norms, norms), 1.0)
    iu, ju = np.triu_indices(len(H), k=1)
    c = corr[iu, ju]
    keep = c >= epsilon
    iu, ju, c = iu[keep], ju[keep], c[keep]
    gd = np.abs(norms[iu] - norms[ju])
    # lexsort: last key is primary
    order = np.lexsort((ju, iu, -gd, -c))
    return [PairScore(int(iu[k]), int(ju[k]), float(c[k]), float(gd[k])) for k in order]


def pair_users(channels, n_clusters: int, epsilon: float = 0.8) -> list[Cluster]:
    """Accept pairs in decreasing correlation while both users are free.

    Raises PairingInfeasibleError if fewer than ``n_clusters`` disjoint pairs
    with correlation >= ``epsilon`` can be formed this way.
    """
    if n_clusters < 1:
        raise ConfigError(f"n_clusters must be >= 1, got {n_clusters!r}")
    H = _as_matrix(channels)
    norms = np.linalg.norm(H, axis=1)
    used: set[int] = set()
    clusters: list[Cluster] = []
    for score in pair_scores(H, epsilon):
        if score.i in used or score.j in used:
            continue
        used.update((score.i, score.j))
        if norms[score.i] >= norms[score.j]:
            clusters.append(Cluster(score.i, score.j, score))
        else:
            clusters.append(Cluster(score.j, score.i, score))
        if len(clusters) == n_clusters:
            return clusters
    raise PairingInfeasibleError(
        f"only {len(clusters)} of {n_clusters} clusters reach correlation >= {epsilon}"
    )


class UserPairer(BaseEstimator):
    """Estimator wrapper around :func:`pair_users`.

    After ``fit`` the selected clusters are in ``clusters_`` and the
    ``(n_clusters, 2)`` index array ``[strong, weak]`` in ``labels_``.
    """

    def __init__(self, n_clusters=8, epsilon=0.8):
        self.n_clusters = n_clusters
        self.epsilon = epsilon

    def fit(self, X, y=None):
        self.clusters_ = pair_users(X, self.n_clusters, self.epsilon)
        self.labels_ = np.array([[c.strong, c.weak] for c in self.clusters_], dtype=int)
        return self

    def transform(self, X):
        """Gather channels into an ``(n_clusters, 2, n_tx)`` array."""
        H = _as_matrix(X)
        return H[self.labels_]

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)
