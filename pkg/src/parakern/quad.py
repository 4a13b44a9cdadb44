"""Small quadrature building blocks shared across modules."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gl_rule(order: int):
    return np.polynomial.legendre.leggauss(order)


@lru_cache(maxsize=16)
def laguerre_rule(order: int):
    return np.polynomial.laguerre.laggauss(order)


def composite_gl(a: float, b: float, panels: int, order: int = 8):
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    xs, ws = gl_rule(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
    weights = (half[:, None] * ws[None, :]).ravel()
    return nodes, weights


def sigma_graded(tau_lo: float, tau_hi: float, step: float, order: int = 4,
                 refine_below: float | None = None):
    """Quadrature for integrals d tau on [tau_lo, tau_hi] graded by tau = sigma^2.

    Returns (taus, weights) with weights carrying the 2 sigma Jacobian.  The
    sigma mesh is uniform of spacing ~step, halved below sigma = refine_below
    (integrands concentrate there when a truncation radius sits at sigma).
    """
    s_lo, s_hi = np.sqrt(max(tau_lo, 0.0)), np.sqrt(tau_hi)
    if s_hi <= s_lo:
        return np.empty(0), np.empty(0)
    pieces = []
    if refine_below is not None and s_lo < refine_below < s_hi:
        pieces.append((s_lo, refine_below, 0.5 * step))
        pieces.append((refine_below, s_hi, step))
    elif refine_below is not None and s_hi <= refine_below:
        pieces.append((s_lo, s_hi, 0.5 * step))
    else:
        pieces.append((s_lo, s_hi, step))
    taus, wts = [], []
    for lo, hi, st in pieces:
        panels = max(2, int(np.ceil((hi - lo) / st)))
        s, w = composite_gl(lo, hi, panels, order)
        taus.append(s * s)
        wts.append(2.0 * s * w)
    return np.concatenate(taus), np.concatenate(wts)
