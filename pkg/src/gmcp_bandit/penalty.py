"""Minimax concave penalty (MCP) and the l1 proximal step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenaltyParams:
    lam: float
    a: float = 2.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        if not self.a > 0:
            raise ValueError(f"a must be > 0, got {self.a!r}")


def mcp_penalty(x, params: PenaltyParams):
    """MCP value: ``lam*|x| - x**2/(2a)`` below the knot ``a*lam``, ``a*lam**2/2`` beyond."""
    lam, a = params.lam, params.a
    ax = np.abs(x)
    out = np.where(ax < a * lam, lam * ax - ax**2 / (2.0 * a), 0.5 * a * lam**2)
    return float(out) if np.ndim(out) == 0 else out


def mcp_derivative(x_abs, params: PenaltyParams):
    """Derivative of the MCP in ``|x|``: ``max(0, lam - |x|/a)``."""
    x_abs = np.asarray(x_abs, dtype=float)
    if np.any(x_abs < 0):
        raise ValueError("mcp_derivative expects a nonnegative argument")
    out = np.maximum(0.0, params.lam - x_abs / params.a)
    return float(out) if out.ndim == 0 else out


def soft_threshold(z, gamma):
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return float(out) if np.ndim(out) == 0 else out
