"""First-order bounds used by the successive convex approximation steps.

Each bound is tight at its expansion point and lies below the function it
approximates on the stated domain.
"""
from __future__ import annotations

import numpy as np


def qol_bound(h, w, beta, w0, beta0):
    """Affine minorant of ``|h^H w|^2 / beta`` around ``(w0, beta0)``.

    Valid for ``beta > 0``; ``beta0`` must be positive. Vectors live on the
    last axis, so leading axes broadcast.
    """
    beta0 = np.asarray(beta0, dtype=float)
    if np.any(beta0 <= 0):
        raise ValueError("beta0 must be positive")
    h = np.asarray(h)
    a0 = np.sum(np.conj(h) * w0, axis=-1)   # h^H w0
    a = np.sum(np.conj(h) * w, axis=-1)     # h^H w
    # Re(w0^H h h^H w) = Re(conj(h^H w0) * h^H w)
    return 2.0 * np.real(np.conj(a0) * a) / beta0 - (np.abs(a0) / beta0) ** 2 * beta


def ratio_bound(r, z, r0, z0):
    """Affine minorant of ``r^2 / z`` around ``(r0, z0)``, valid for ``z > 0``."""
    z0 = np.asarray(z0, dtype=float)
    if np.any(z0 <= 0):
        raise ValueError("z0 must be positive")
    q = np.asarray(r0, dtype=float) / z0
    return 2.0 * q * r - q ** 2 * z


def inv1p_tangent(gamma, gamma0):
    """Tangent of ``1 / (1 + gamma)`` at ``gamma0``; a minorant by convexity."""
    gamma0 = np.asarray(gamma0, dtype=float)
    if np.any(gamma0 < 0):
        raise ValueError("gamma0 must be nonnegative")
    return 1.0 / (1.0 + gamma0) - (gamma - gamma0) / (1.0 + gamma0) ** 2


def log_quadratic_bound(gamma, gamma0):
    """Concave quadratic minorant of ``log(1 + gamma)`` on ``gamma >= 0``.

    Uses that the derivative of ``log(1 + x)`` is 1-Lipschitz for ``x >= 0``.
    """
    gamma = np.asarray(gamma, dtype=float)
    gamma0 = np.asarray(gamma0, dtype=float)
    if np.any(gamma < 0) or np.any(gamma0 < 0):
        raise ValueError("arguments must be nonnegative")
    d = gamma - gamma0
    return np.log1p(gamma0) + d / (1.0 + gamma0) - 0.5 * d ** 2
