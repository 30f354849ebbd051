"""Hybrid analog/digital precoding for two-user clusters.

The analog stage picks, for every cluster, one steering vector from the
union of both users' path responses. The digital stage zero-forces the
strong users' effective channels, so only weak users see inter-cluster
interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .channel import ArrayConfig, UserChannel, steering_matrix
from .exceptions import ConfigError, OrderingError, PrecoderSingularError

COND_MAX = 1e8
ZF_CERT_REL = 1e-6


@dataclass
class HybridPrecoder:
    analog: np.ndarray  # n_tx x n_rf
    digital_cols: np.ndarray  # n_rf x L, column l is v_l

    @property
    def n_rf(self) -> int:
        return self.analog.shape[1]

    @property
    def n_clusters(self) -> int:
        return self.digital_cols.shape[1]

    def beams(self) -> np.ndarray:
        """Overall per-cluster beams ``B v_l`` as columns (n_tx x L)."""
        return self.analog @ self.digital_cols


@dataclass
class EffectiveGains:
    """Per-cluster scalar gains seen by the power allocator.

    ``alpha[l, i]`` is the noise-normalised beam gain of user ``i`` (0 strong,
    1 weak) in 1/W. ``beta[l, j]`` is the interference leaking from cluster
    ``j``'s beam onto cluster ``l``'s weak user, relative to its own beam.
    The diagonal of ``beta`` is ignored.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        L = self.alpha.shape[0]
        if self.beta is None:
            self.beta = np.zeros((L, L))
        self.beta = np.asarray(self.beta, dtype=float).reshape(L, L).copy()
        np.fill_diagonal(self.beta, 0.0)
        if self.alpha.shape != (L, 2):
            raise ConfigError(f"alpha must have shape (L, 2), got {self.alpha.shape}")
        if not np.all(np.isfinite(self.alpha)) or np.any(self.alpha <= 0):
            raise ConfigError("alpha entries must be finite and > 0")
        if not np.all(np.isfinite(self.beta)) or np.any(self.beta < 0):
            raise ConfigError("beta entries must be finite and >= 0")

    @property
    def n_clusters(self) -> int:
        return self.alpha.shape[0]

    def ordering_violations(self) -> np.ndarray:
        return np.flatnonzero(self.alpha[:, 0] < self.alpha[:, 1])

    def subset(self, idx) -> "EffectiveGains":
        idx = np.asarray(idx)
        return EffectiveGains(self.alpha[idx], self.beta[np.ix_(idx, idx)])


def build_codebook(h1: UserChannel, h2: UserChannel, config: ArrayConfig) -> np.ndarray:
    """Steering vectors of every path of both users, as columns (n_tx x 2F)."""
    aods = np.concatenate([h1.aods, h2.aods])
    return steering_matrix(aods, config)


def beam_scores(h1, h2, codebook: np.ndarray) -> np.ndarray:
    """``|h1 f| + |h2 f|`` for every codebook column ``f``."""
    v1 = np.asarray(getattr(h1, "vector", h1))
    v2 = np.asarray(getattr(h2, "vector", h2))
    return np.abs(v1 @ codebook) + np.abs(v2 @ codebook)


def select_analog_beam(h1, h2, codebook: np.ndarray) -> np.ndarray:
    """Best-matching shared beam; ties go to the lowest candidate index."""
    codebook = np.atleast_2d(codebook)
    if codebook.shape[1] == 0:
        raise ConfigError("empty codebook")
    return codebook[:, int(np.argmax(beam_scores(h1, h2, codebook)))]


def ranked_beams(h1, h2, codebook: np.ndarray) -> np.ndarray:
    """Codebook column indices from best to worst (stable on ties)."""
    return np.argsort(-beam_scores(h1, h2, codebook), kind="stable")


def analog_matrix(pairs, config: ArrayConfig, n_rf: int | None = None) -> np.ndarray:
    """Analog beamformer for ``L`` clusters on ``n_rf >= L`` RF chains.

    The first ``L`` columns are each cluster's best beam. Remaining chains are
    handed out round-robin over clusters, each carrying that cluster's next
    best beam not already in use by it.
    """
    L = len(pairs)
    n_rf = L if n_rf is None else int(n_rf)
    if n_rf < L:
        raise ConfigError(f"n_rf={n_rf} cannot serve {L} clusters")
    books = [build_codebook(h1, h2, config) for h1, h2 in pairs]
    ranks = [ranked_beams(h1, h2, cb) for (h1, h2), cb in zip(pairs, books)]
    cols = [books[l][:, ranks[l][0]] for l in range(L)]
    used_aods = [[np.concatenate([h1.aods, h2.aods])[ranks[l][0]]]
                 for l, (h1, h2) in enumerate(pairs)]
    cursor = [1] * L
    extra = n_rf - L
    l = 0
    stalled = 0
    while extra > 0:
        h1, h2 = pairs[l]
        aods = np.concatenate([h1.aods, h2.aods])
        while cursor[l] < len(ranks[l]) and aods[ranks[l][cursor[l]]] in used_aods[l]:
            cursor[l] += 1
        if cursor[l] < len(ranks[l]):
            k = ranks[l][cursor[l]]
            cols.append(books[l][:, k])
            used_aods[l].append(aods[k])
            cursor[l] += 1
            extra -= 1
            stalled = 0
        else:
            stalled += 1
            if stalled >= L:
                raise ConfigError(f"codebooks too small to fill {n_rf} RF chains")
        l = (l + 1) % L
    return np.column_stack(cols)


def _row_normalize(H: np.ndarray):
    norms = np.linalg.norm(H, axis=1)
    if np.any(norms == 0):
        raise PrecoderSingularError("zero effective channel row")
    return H / norms[:, None], norms


def _checked_inverse(M: np.ndarray, cond_max: float) -> np.ndarray:
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > cond_max:
        raise PrecoderSingularError(f"Gram matrix condition number {cond:.3g} exceeds {cond_max:.0e}")
    return np.linalg.inv(M)


def zf_digital(H: np.ndarray, cond_max: float = COND_MAX, metric: np.ndarray | None = None) -> np.ndarray:
    """Zero-forcing precoder ``H^H (H H^H)^-1`` for a full-row-rank ``H``.

    Rows are normalised before the condition check, so path-loss spread
    between users does not count as ill-conditioning (ZF ignores row scale).
    With ``metric = B^H B`` the precoder instead minimises ``||B v||`` per
    column: ``G^-1 H^H (H G^-1 H^H)^-1``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    Hn, norms = _row_normalize(H)
    if metric is None:
        X = Hn.conj().T
    else:
        X = np.linalg.lstsq(metric, Hn.conj().T, rcond=None)[0]
    return X @ _checked_inverse(Hn @ X, cond_max) / norms[None, :]


def build_precoder(strong_channels: np.ndarray, analog: np.ndarray,
                   cond_max: float = COND_MAX) -> HybridPrecoder:
    """ZF on the effective strong-user channels, columns scaled to ``||B v_l|| = 1``.

    With more RF chains than clusters the ZF solution is not unique; the one
    of least radiated norm ``||B v_l||`` is taken, which maximises each strong
    user's gain and never does worse than leaving the extra chains idle.
    """
    H_eff = np.asarray(strong_channels, dtype=complex) @ analog
    metric = None
    if analog.shape[1] > H_eff.shape[0]:
        metric = analog.conj().T @ analog
    V = zf_digital(H_eff, cond_max, metric)
    scale = np.linalg.norm(analog @ V, axis=0)
    return HybridPrecoder(analog=analog, digital_cols=V / scale)


def effective_gains(channels: np.ndarray, precoder: HybridPrecoder, sigma2: float,
                    check_ordering: bool = True) -> EffectiveGains:
    """Noise-normalised gains ``alpha`` and leakage ratios ``beta``.

    ``channels`` has shape ``(L, 2, n_tx)`` with index 0 the strong user.
    Raises OrderingError (with the offending clusters in ``.clusters``) when a
    strong user ends up weaker than its partner after precoding.
    """
    channels = np.asarray(channels, dtype=complex)
    W = precoder.beams()
    g_strong = channels[:, 0, :] @ W  # L x L, [l, j] = h_{l,1} B v_j
    g_weak = channels[:, 1, :] @ W
    L = channels.shape[0]

    off = ~np.eye(L, dtype=bool)
    leak = np.abs(g_strong[off])
    bound = ZF_CERT_REL * np.repeat(np.linalg.norm(channels[:, 0, :], axis=1), L - 1)
    if np.any(leak >= bound):
        raise PrecoderSingularError("zero-forcing leakage on a strong user exceeds the certificate")

    own_s = np.abs(np.diag(g_strong)) ** 2
    own_w = np.abs(np.diag(g_weak)) ** 2
    alpha = np.column_stack([own_s, own_w]) / sigma2
    beta = np.abs(g_weak) ** 2 / own_w[:, None]
    gains = EffectiveGains(alpha, beta)
    if check_ordering:
        bad = gains.ordering_violations()
        if bad.size:
            err = OrderingError(f"clusters {bad.tolist()} violate strong/weak ordering")
            err.clusters = bad
            raise err
    return gains


def identity_analog(n_tx: int) -> np.ndarray:
    return np.eye(n_tx, dtype=complex)


class HybridBeamformer(BaseEstimator, TransformerMixin):
    """Fit the hybrid precoder to a list of ``(strong, weak)`` channel pairs.

    ``transform`` returns the :class:`EffectiveGains` of the fitted pairs.
    Clusters whose ordering flips after precoding are relabelled once and the
    ZF stage recomputed; the swapped cluster indices are kept in
    ``swapped_``. ``digital=True`` replaces the analog stage by the identity.
    """

    def __init__(self, noise_power=1.0, n_rf=None, digital=False, cond_max=COND_MAX,
                 spacing_over_wavelength=0.5):
        self.noise_power = noise_power
        self.n_rf = n_rf
        self.digital = digital
        self.cond_max = cond_max
        self.spacing_over_wavelength = spacing_over_wavelength

    def fit(self, X, y=None):
        pairs = [tuple(p) for p in X]
        if not pairs:
            raise ConfigError("no clusters to precode")
        n_tx = pairs[0][0].vector.size
        config = ArrayConfig(n_tx, self.spacing_over_wavelength)
        if self.digital:
            analog = identity_analog(n_tx)
        else:
            analog = analog_matrix(pairs, config, self.n_rf)
        channels = np.array([[h1.vector, h2.vector] for h1, h2 in pairs])
        precoder = build_precoder(channels[:, 0, :], analog, self.cond_max)
        swapped = np.array([], dtype=int)
        try:
            gains = effective_gains(channels, precoder, self.noise_power)
        except OrderingError as err:
            swapped = err.clusters
            channels[swapped] = channels[swapped, ::-1]
            precoder = build_precoder(channels[:, 0, :], analog, self.cond_max)
            gains = effective_gains(channels, precoder, self.noise_power)
        self.precoder_ = precoder
        self.channels_ = channels
        self.swapped_ = swapped
        self.gains_ = gains
        return self

    def transform(self, X):
        """Effective gains of ``X`` under the fitted precoder and labelling."""
        channels = np.array([[h1.vector, h2.vector] for h1, h2 in X])
        channels[self.swapped_] = channels[self.swapped_, ::-1]
        return effective_gains(channels, self.precoder_, self.noise_power, check_ordering=False)

    def fit_transform(self, X, y=None):
        return self.fit(X).gains_
