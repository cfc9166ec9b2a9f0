"""Composite Gauss-Legendre rules on explicit breakpoints."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _reference_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(breakpoints, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``order``-point Gauss-Legendre rule on every panel.

    ``breakpoints`` must be strictly increasing; panel ``k`` spans
    ``[breakpoints[k], breakpoints[k + 1]]``.
    """
    b = np.asarray(breakpoints, dtype=float)
    if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
        raise ValueError("breakpoints must be a strictly increasing 1-D sequence")
    x, w = _reference_rule(order)
    half = 0.5 * np.diff(b)
    mid = 0.5 * (b[1:] + b[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def uniform_breakpoints(start: float, stop: float, max_width: float) -> np.ndarray:
    """Equal panels covering ``[start, stop]`` none wider than ``max_width``."""
    count = max(1, int(np.ceil((stop - start) / max_width)))
    return np.linspace(start, stop, count + 1)
