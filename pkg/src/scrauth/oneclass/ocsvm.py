"""One-class SVM with an RBF kernel, solved in the dual by SMO.

The dual is scaled so the coefficients sum to one::

    min_a  1/2 a^T Q a     s.t.  0 <= a_i <= 1/(nu n),  sum_i a_i = 1

with ``Q_ij = exp(-gamma |x_i - x_j|^2)``. The decision function is
``sum_i a_i k(x_i, x) - rho``; nonnegative means accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import ParameterError, SolverError

TAU = 1e-12


def rbf_kernel(a, b, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean"))


def scale_gamma(x) -> float:
    """``1 / (n_features * var(x))`` over every entry; 1.0 for constant data."""
    x = np.asarray(x, dtype=np.float64)
    var = x.var()
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0


def dual_objective(q, alpha) -> float:
    return 0.5 * float(alpha @ q @ alpha)


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    gap: float
    n_iter: int


def solve_dual(q, upper: float, tol: float = 1e-6, max_iter: int = 1_000_000) -> SmoResult:
    """Pairwise SMO with second-order working-set selection.

    Stops when the maximal KKT violation ``max_up(-G) - min_low(-G)`` drops
    below ``tol``.
    """
    n = q.shape[0]
    alpha = np.zeros(n)
    m = min(int(np.floor(1.0 / upper)), n)
    alpha[:m] = upper
    if m < n:
        alpha[m] = 1.0 - m * upper
    grad = q @ alpha
    diag = np.diag(q).copy()

    for it in range(max_iter):
        up = alpha < upper
        low = alpha > 0
        neg = -grad
        i = int(np.argmax(np.where(up, neg, -np.inf)))
        gmax = neg[i]
        gmin = np.min(np.where(low, neg, np.inf))
        gap = gmax - gmin
        if gap < tol:
            break
        b = gmax + grad  # = G_j - G_i
        cand = low & (b > 0)
        a = np.maximum(diag[i] + diag - 2 * q[i], TAU)
        score = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        delta = min(b[j] / a[j], upper - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        # pin bounds exactly so the working sets stay clean
        if upper - alpha[i] < 1e-15:
            alpha[i] = upper
        if alpha[j] < 1e-15:
            alpha[j] = 0.0
        grad += delta * (q[:, i] - q[:, j])
    else:
        raise SolverError(
            f"SMO did not reach tolerance {tol} in {max_iter} iterations",
            {"gap": float(gap), "n": n, "upper": upper},
        )

    free = (alpha > 0) & (alpha < upper)
    if free.any():
        rho = float(np.mean(grad[free]))
    else:
        at_upper = grad[alpha >= upper]
        at_zero = grad[alpha <= 0]
        lo = at_upper.max() if at_upper.size else -np.inf
        hi = at_zero.min() if at_zero.size else np.inf
        rho = float((lo + hi) / 2) if np.isfinite(lo) and np.isfinite(hi) else float(lo if np.isfinite(lo) else hi)
    return SmoResult(alpha, rho, float(gap), it)


@dataclass
class OcsvmModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    rho: float
    gamma: float
    nu: float
    n_train: int
    gap: float = 0.0

    kind = "ocsvm"

    @property
    def upper(self) -> float:
        return 1.0 / (self.nu * self.n_train)

    def decision(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return rbf_kernel(x, self.support_vectors, self.gamma) @ self.dual_coefficients - self.rho

    def accepts(self, x) -> np.ndarray:
        return self.decision(x) >= 0


def canonical_order(x) -> np.ndarray:
    """Row order independent of how the training set was shuffled."""
    return np.lexsort(x.T[::-1])


def ocsvm_fit(features, nu: float = 0.01, gamma="scale", seed: int = 0, tol: float = 1e-6,
              max_iter: int = 1_000_000) -> OcsvmModel:
    """Fit a one-class SVM.

    ``gamma`` is ``"scale"`` or a positive number. Training rows are sorted
    before solving, so the fitted model does not depend on their order;
    ``seed`` is accepted for interface symmetry and is unused because the
    solver is deterministic.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ParameterError("one-class SVM needs at least 2 training points")
    if not 0 < nu <= 1:
        raise ParameterError("nu must lie in (0, 1]")
    g = scale_gamma(x) if gamma == "scale" else float(gamma)
    if g <= 0:
        raise ParameterError("gamma must be positive")
    x = x[canonical_order(x)]
    n = x.shape[0]
    q = rbf_kernel(x, x, g)
    res = solve_dual(q, 1.0 / (nu * n), tol, max_iter)
    sv = res.alpha > 0
    return OcsvmModel(x[sv].copy(), res.alpha[sv].copy(), res.rho, g, float(nu), n, res.gap)
