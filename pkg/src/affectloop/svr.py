"""Epsilon-tube support vector regression with a Gaussian kernel.

Trained by sequential minimal optimization on the standard 2n-variable
dual (alpha, alpha* in [0, C], sum(alpha - alpha*) = 0), selecting the
maximal violating pair each step. check_kkt evaluates the optimality
conditions directly from the dual solution, independent of the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError


def gaussian_kernel(a, b, scale: float) -> np.ndarray:
    """k(x, y) = exp(-||x - y||^2 / (2 scale^2)), pairwise over rows."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    sq = (
        (a * a).sum(axis=1)[:, None]
        + (b * b).sum(axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * scale * scale))


@dataclass
class SvrFit:
    """Dual solution of one epsilon-SVR problem."""

    beta: np.ndarray          # alpha - alpha*, one per training row
    bias: float
    iterations: int
    residual: float           # final KKT violation m - M

    def support_mask(self, tol: float = 1e-12) -> np.ndarray:
        return np.abs(self.beta) > tol


def smo_train(K, y, c: float = 1.0, epsilon: float = 0.1,
              tol: float = 1e-3, max_iter: int = None) -> SvrFit:
    """Solve the epsilon-SVR dual given a precomputed kernel matrix."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if max_iter is None:
        max_iter = max(20_000, 200 * n)

    alpha = np.zeros(n)
    astar = np.zeros(n)
    u = np.zeros(n)  # K @ (alpha - astar)
    neg_inf = -np.inf
    pos_inf = np.inf

    it = 0
    residual = np.inf
    for it in range(1, max_iter + 1):
        d = y - u
        # candidate bias values -a_t G_t; I_up entries bound b from below,
        # I_low entries from above
        up_a = np.where(alpha < c, d - epsilon, neg_inf)
        up_s = np.where(astar > 0, d + epsilon, neg_inf)
        low_a = np.where(alpha > 0, d - epsilon, pos_inf)
        low_s = np.where(astar < c, d + epsilon, pos_inf)

        i_a = int(np.argmax(up_a))
        i_s = int(np.argmax(up_s))
        if up_a[i_a] >= up_s[i_s]:
            i, i_block, m = i_a, 0, up_a[i_a]
        else:
            i, i_block, m = i_s, 1, up_s[i_s]

        j_a = int(np.argmin(low_a))
        j_s = int(np.argmin(low_s))
        if low_a[j_a] <= low_s[j_s]:
            j, j_block, M = j_a, 0, low_a[j_a]
        else:
            j, j_block, M = j_s, 1, low_s[j_s]

        residual = m - M
        if residual <= tol:
            break

        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        step = residual / max(eta, 1e-12)
        cap_i = (c - alpha[i]) if i_block == 0 else astar[i]
        cap_j = alpha[j] if j_block == 0 else (c - astar[j])
        step = min(step, cap_i, cap_j)
        if step <= 0.0:
            break  # numerically pinned against the box

        if i_block == 0:
            alpha[i] += step
        else:
            astar[i] -= step
        if j_block == 0:
            alpha[j] -= step
        else:
            astar[j] += step
        u += step * (K[:, i] - K[:, j])
    else:
        raise ConvergenceError(
            f"SMO did not reach tol={tol} within {max_iter} iterations",
            residual=residual,
        )

    # b is feasible anywhere in [M, m]; at the optimum the interval has
    # collapsed to within tol
    if np.isfinite(m) and np.isfinite(M):
        bias = 0.5 * (m + M)
    else:
        bias = float(m if np.isfinite(m) else M)
    return SvrFit(beta=alpha - astar, bias=float(bias), iterations=it, residual=float(residual))


def check_kkt(K, y, beta, bias, c: float, epsilon: float) -> float:
    """Maximum KKT violation of a dual solution, computed from scratch.

    Evaluates the epsilon-SVR optimality conditions pointwise: interior
    dual variables pin the residual to the tube edge, bound variables may
    only exceed it, zero variables must sit inside the tube. Returns the
    worst violation magnitude (0 means optimal).
    """
    beta = np.asarray(beta, dtype=float)
    y = np.asarray(y, dtype=float)
    err = np.asarray(K, dtype=float) @ beta + bias - y  # f(x_i) - y_i
    bound = 1e-8 * c
    worst = abs(float(beta.sum()))
    for b_i, e_i in zip(beta, err):
        if abs(b_i) <= bound:
            worst = max(worst, abs(e_i) - epsilon)
        elif b_i >= c - bound:
            worst = max(worst, e_i + epsilon)          # need err <= -eps
        elif b_i > 0:
            worst = max(worst, abs(e_i + epsilon))     # need err == -eps
        elif b_i <= -c + bound:
            worst = max(worst, epsilon - e_i)          # need err >= eps
        else:
            worst = max(worst, abs(e_i - epsilon))     # need err == eps
    return max(worst, 0.0)


@dataclass
class SvrModel:
    """Trained regressor: support vectors, dual coefficients, bias."""

    support_vectors: np.ndarray
    coefficients: np.ndarray
    bias: float
    scale: float
    c: float
    epsilon: float
    iterations: int = 0
    residual: float = 0.0
    _sv_sq: np.ndarray = field(default=None, repr=False, compare=False)

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.support_vectors.size == 0:
            return np.full(x.shape[0], self.bias)
        if self._sv_sq is None:
            self._sv_sq = (self.support_vectors * self.support_vectors).sum(axis=1)
        sq = (
            (x * x).sum(axis=1)[:, None]
            + self._sv_sq[None, :]
            - 2.0 * x @ self.support_vectors.T
        )
        np.maximum(sq, 0.0, out=sq)
        k = np.exp(-sq / (2.0 * self.scale * self.scale))
        return k @ self.coefficients + self.bias

    def to_dict(self) -> dict:
        return {
            "kernel_scale": self.scale,
            "c": self.c,
            "epsilon": self.epsilon,
            "support_vectors": self.support_vectors.tolist(),
            "coefficients": self.coefficients.tolist(),
            "bias": self.bias,
            "iterations": self.iterations,
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SvrModel":
        return cls(
            support_vectors=np.asarray(obj["support_vectors"], dtype=float).reshape(-1, 6)
            if obj["support_vectors"]
            else np.zeros((0, 6)),
            coefficients=np.asarray(obj["coefficients"], dtype=float),
            bias=float(obj["bias"]),
            scale=float(obj["kernel_scale"]),
            c=float(obj["c"]),
            epsilon=float(obj["epsilon"]),
            iterations=int(obj.get("iterations", 0)),
            residual=float(obj.get("residual", 0.0)),
        )


def fit_svr(X, y, scale: float, c: float = 1.0, epsilon: float = 0.1,
            tol: float = 1e-3, K=None) -> SvrModel:
    """Train one epsilon-SVR; keeps only rows with nonzero dual weight."""
    X = np.asarray(X, dtype=float)
    if K is None:
        K = gaussian_kernel(X, X, scale)
    fit = smo_train(K, y, c=c, epsilon=epsilon, tol=tol)
    mask = fit.support_mask()
    return SvrModel(
        support_vectors=X[mask].copy(),
        coefficients=fit.beta[mask].copy(),
        bias=fit.bias,
        scale=scale,
        c=c,
        epsilon=epsilon,
        iterations=fit.iterations,
        residual=fit.residual,
    )
