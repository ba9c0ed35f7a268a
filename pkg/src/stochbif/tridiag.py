"""Thomas algorithm for the tridiagonal systems of the implicit Fokker-Planck step.

The matrix is stored as three length-n bands::

    sub[i]  * u[i-1] + diag[i] * u[i] + sup[i] * u[i+1] = rhs[i]

with ``sub[0]`` and ``sup[n-1]`` ignored.  The factorization is computed once
per operator and reused for every step; the right-hand side may carry several
columns (one per initial condition), which are solved in a single sweep.
"""

from __future__ import annotations

import numba
import numpy as np

from .errors import SingularSystemError

PIVOT_FLOOR = 1e-300
# Densities below this are flushed to zero: subnormal arithmetic is ~100x slower.
FLUSH_FLOOR = 1e-280


class ThomasFactors:
    """LU factors of a tridiagonal matrix, without pivoting."""

    def __init__(self, sub, inv_beta, gamma):
        self.sub = sub
        self.inv_beta = inv_beta
        self.gamma = gamma

    @property
    def n(self) -> int:
        return self.inv_beta.size


@numba.njit(cache=True)
def _factor(sub, diag, sup):
    n = diag.size
    inv_beta = np.empty(n)
    gamma = np.zeros(n)
    beta = diag[0]
    worst = abs(beta)
    inv_beta[0] = 1.0 / beta if beta != 0.0 else 0.0
    for i in range(n - 1):
        gamma[i] = sup[i] * inv_beta[i]
        beta = diag[i + 1] - sub[i + 1] * gamma[i]
        if abs(beta) < worst:
            worst = abs(beta)
        inv_beta[i + 1] = 1.0 / beta if beta != 0.0 else 0.0
    return inv_beta, gamma, worst


def factor(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray) -> ThomasFactors:
    """Factor the tridiagonal matrix given by its bands.

    Raises SingularSystemError if any pivot falls below 1e-300 in magnitude.
    """
    sub = np.ascontiguousarray(sub, dtype=np.float64)
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    sup = np.ascontiguousarray(sup, dtype=np.float64)
    if not (sub.shape == diag.shape == sup.shape) or diag.ndim != 1:
        raise ValueError("bands must be 1-D arrays of equal length")
    inv_beta, gamma, worst = _factor(sub, diag, sup)
    if not worst >= PIVOT_FLOOR:
        raise SingularSystemError(f"tridiagonal pivot {worst:.3e} below {PIVOT_FLOOR:g}")
    return ThomasFactors(sub, inv_beta, gamma)


@numba.njit(cache=True)
def _solve_into(sub, inv_beta, gamma, rhs, out):
    # Solves column-wise; afterwards clips round-off negatives per column and
    # returns, per column, the largest pre-clip negativity relative to max(p).
    n, k = rhs.shape
    for j in range(k):
        out[0, j] = rhs[0, j] * inv_beta[0]
    for i in range(1, n):
        s = sub[i]
        ib = inv_beta[i]
        for j in range(k):
            out[i, j] = (rhs[i, j] - s * out[i - 1, j]) * ib
    for i in range(n - 2, -1, -1):
        g = gamma[i]
        for j in range(k):
            out[i, j] -= g * out[i + 1, j]
    neg = np.zeros(k)
    top = np.zeros(k)
    for i in range(n):
        for j in range(k):
            v = out[i, j]
            if v < neg[j]:
                neg[j] = v
            elif 0.0 < v < FLUSH_FLOOR:
                out[i, j] = 0.0
            elif v > top[j]:
                top[j] = v
    ratio = np.zeros(k)
    for j in range(k):
        if neg[j] < 0.0:
            ratio[j] = -neg[j] / top[j] if top[j] > 0.0 else np.inf
            for i in range(n):
                if out[i, j] < 0.0:
                    out[i, j] = 0.0
    return ratio


def solve(factors: ThomasFactors, rhs: np.ndarray,
          out: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Solve with precomputed factors; ``rhs`` may be 1-D or (n, k).

    Returns ``(solution, negativity)`` where ``negativity[j]`` is the largest
    negative entry of column j relative to its maximum before clipping.
    Negative entries are always set to zero in the returned solution.
    """
    one_d = rhs.ndim == 1
    b = np.ascontiguousarray(rhs.reshape(rhs.shape[0], -1), dtype=np.float64)
    if out is None:
        out = np.empty_like(b)
    ratio = _solve_into(factors.sub, factors.inv_beta, factors.gamma, b, out)
    if one_d:
        return out[:, 0], ratio
    return out, ratio

