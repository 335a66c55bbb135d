"""Vectorised adaptive Gauss-Kronrod (7/15) quadrature.

The integrand is called with a 1-D array holding the nodes of every active
subinterval at once, which is much cheaper than scalar callbacks when the
integrand is a numpy expression.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError

# Kronrod abscissae (positive half, descending to 0) and weights; the Gauss
# 7-point rule uses every second Kronrod node.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes on [-1, 1]
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[9, 11, 13]] = _WG[2::-1]
_WG15[7] = _WG[3]


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error: float
    n_eval: int
    n_intervals: int


def gauss_kronrod(f, a: float, b: float, rtol: float = 1e-4, atol: float = 0.0,
                  initial_intervals: int = 1, breakpoints=(), geometric: bool = False,
                  max_intervals: int = 2000) -> QuadResult:
    """Integrate ``f`` over [a, b] until the summed |K15 - G7| estimate meets tolerance.

    ``geometric`` spaces the initial subintervals evenly in log(x), which
    suits integrands with power-law tails.
    """
    if not b > a:
        raise ValueError("need b > a")
    if geometric:
        if a <= 0:
            raise ValueError("geometric spacing needs a > 0")
        edges = np.geomspace(a, b, initial_intervals + 1)
    else:
        edges = np.linspace(a, b, initial_intervals + 1)
    inner = [p for p in breakpoints if a < p < b]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    lo, hi = edges[:-1], edges[1:]
    done_val = 0.0
    done_err = 0.0
    n_eval = 0
    val = err = None
    while True:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
        fx = np.asarray(f(x), float).reshape(len(lo), 15)
        n_eval += fx.size
        if not np.all(np.isfinite(fx)):
            raise IntegrationError("integrand is not finite on the integration domain")
        k = half * (fx @ _WK)
        g = half * (fx @ _WG15)
        val = k
        err = np.abs(k - g)
        total = done_val + val.sum()
        total_err = done_err + err.sum()
        tol = max(atol, rtol * abs(total))
        if total_err <= tol:
            return QuadResult(float(total), float(total_err), n_eval, len(lo))
        if len(lo) * 2 > max_intervals:
            achieved = total_err / abs(total) if total != 0 else np.inf
            raise IntegrationError(
                f"no convergence after {n_eval} evaluations; achieved rtol {achieved:.2e}", achieved
            )
        # retire intervals whose error is already negligible, bisect the rest
        share = tol / max(len(lo), 1)
        keep = err > 0.1 * share
        done_val += val[~keep].sum()
        done_err += err[~keep].sum()
        if not keep.any():
            raise IntegrationError("error budget exhausted by retired intervals", total_err / abs(total))
        lo, hi, mid = lo[keep], hi[keep], mid[keep]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
