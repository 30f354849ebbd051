"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigError


def check_gains(X, beta=None):
    """Coerce ``X`` into an EffectiveGains.

    Accepts an EffectiveGains (returned as is) or an ``(L, 2)`` alpha array
    with an optional ``(L, L)`` beta.
    """
    from .precoding import EffectiveGains

    if isinstance(X, EffectiveGains):
        return X
    alpha = check_array(X, dtype=float, ensure_min_samples=1)
    if alpha.shape[1] != 2:
        raise ConfigError(f"alpha must have two columns (strong, weak), got {alpha.shape}")
    if beta is not None:
        beta = check_array(beta, dtype=float)
    return EffectiveGains(alpha, beta)


def check_powers(p, n_clusters=None):
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ConfigError(f"powers must have shape (L, 2), got {p.shape}")
    if n_clusters is not None and p.shape[0] != n_clusters:
        raise ConfigError(f"expected {n_clusters} clusters of powers, got {p.shape[0]}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ConfigError("powers must be finite and non-negative")
    return p
