"""Regularized maximum-likelihood estimation from dueling observations.

Observations are difference vectors with binary outcomes, at either the arm
level or the key-term level; both levels enter one likelihood.  The fit is
Newton's method with step-halving on the strictly concave objective

    sum_s [ o_s * d_s^T theta - m(d_s^T theta) ] - (lam / 2) ||theta||^2,

where m is the antiderivative of the link.  When the fit leaves the unit
ball it is pulled back by minimizing || g(theta) - g(theta_hat) ||_{M^-1}
over the ball, with g the regularized mean-value map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, StructuralError
from .glm import DesignMatrix, LinkFunction

__all__ = [
    "ARM_LEVEL",
    "KEYTERM_LEVEL",
    "InteractionHistory",
    "ThetaEstimate",
    "log_likelihood",
    "score",
    "mean_map",
    "mle_fit",
    "project_theta",
    "dueling_radius",
]

ARM_LEVEL = 0
KEYTERM_LEVEL = 1

_MAX_DIFF_NORM = 2.0 + 1e-9


class InteractionHistory:
    """Append-only store of dueling observations.

    Keeps difference vectors, outcomes, and the level tag in growing buffers
    so fits can read contiguous array views without copying.
    """

    __slots__ = ("dim", "_diffs", "_outcomes", "_levels", "n")

    def __init__(self, dim: int, capacity: int = 64):
        self.dim = int(dim)
        self._diffs = np.empty((capacity, self.dim))
        self._outcomes = np.empty(capacity)
        self._levels = np.empty(capacity, dtype=np.int8)
        self.n = 0

    def append(self, diff, outcome: int, level: int) -> None:
        diff = np.asarray(diff, dtype=float)
        if diff.shape != (self.dim,):
            raise StructuralError(f"difference vector must have shape ({self.dim},)")
        if float(np.linalg.norm(diff)) > _MAX_DIFF_NORM:
            raise StructuralError("difference vector norm exceeds 2")
        if outcome not in (0, 1):
            raise StructuralError("outcome must be 0 or 1")
        if level not in (ARM_LEVEL, KEYTERM_LEVEL):
            raise StructuralError("unknown observation level")
        if self.n == len(self._outcomes):
            grow = max(2 * self.n, 64)
            self._diffs = np.resize(self._diffs, (grow, self.dim))
            self._outcomes = np.resize(self._outcomes, grow)
            self._levels = np.resize(self._levels, grow)
        self._diffs[self.n] = diff
        self._outcomes[self.n] = outcome
        self._levels[self.n] = level
        self.n += 1

    @property
    def diffs(self) -> np.ndarray:
        return self._diffs[: self.n]

    @property
    def outcomes(self) -> np.ndarray:
        return self._outcomes[: self.n]

    @property
    def levels(self) -> np.ndarray:
        return self._levels[: self.n]

    def count(self, level: int) -> int:
        return int(np.count_nonzero(self.levels == level))

    def __len__(self) -> int:
        return self.n


@dataclass
class ThetaEstimate:
    theta_raw: np.ndarray
    theta_proj: np.ndarray
    projected: bool
    newton_iters: int
    grad_norm: float


def log_likelihood(history: InteractionHistory, theta, lam: float, link: LinkFunction) -> float:
    """Regularized log-likelihood of ``theta`` under both observation levels."""
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    theta = np.asarray(theta, dtype=float)
    reg = 0.5 * lam * float(theta @ theta)
    if len(history) == 0:
        return -reg
    z = history.diffs @ theta
    return float(history.outcomes @ z - link.antiderivative(z).sum()) - reg


def score(history: InteractionHistory, theta, lam: float, link: LinkFunction) -> np.ndarray:
    """Gradient of the regularized log-likelihood; zero exactly at the MLE."""
    theta = np.asarray(theta, dtype=float)
    if len(history) == 0:
        return -lam * theta
    z = history.diffs @ theta
    return history.diffs.T @ (history.outcomes - link.mu(z)) - lam * theta


def mean_map(history: InteractionHistory, theta, lam: float, link: LinkFunction) -> np.ndarray:
    """Regularized mean-value map g(theta) = sum mu(d^T theta) d + lam theta."""
    theta = np.asarray(theta, dtype=float)
    if len(history) == 0:
        return lam * theta
    z = history.diffs @ theta
    return history.diffs.T @ np.asarray(link.mu(z)) + lam * theta


def _hessian(history: InteractionHistory, theta, lam: float, link: LinkFunction) -> np.ndarray:
    d = history.dim
    h = lam * np.eye(d)
    if len(history):
        w = np.asarray(link.mu_prime(history.diffs @ theta))
        h += history.diffs.T @ (w[:, None] * history.diffs)
    return h


def mle_fit(
    history: InteractionHistory,
    lam: float,
    link: LinkFunction,
    tol: float = 1e-8,
    max_iters: int = 100,
    theta0=None,
    design: DesignMatrix | None = None,
) -> ThetaEstimate:
    """Newton fit of the regularized MLE, with projection onto the unit ball.

    ``theta0`` warm-starts the solve (the objective is strictly concave, so
    the solution does not depend on it).  ``design`` supplies the norm used
    by the projection step; when omitted a fresh lam/kappa1-regularized
    matrix built from the history is used.
    """
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    theta = np.zeros(history.dim) if theta0 is None else np.asarray(theta0, dtype=float).copy()

    mu_f, slope_f, anti_f = link.raw_funcs()
    diffs = history.diffs
    outcomes = history.outcomes
    eye = lam * np.eye(history.dim)

    def value(th):
        z = diffs @ th
        return float(outcomes @ z - anti_f(z).sum()) - 0.5 * lam * float(th @ th)

    z = diffs @ theta
    grad = diffs.T @ (outcomes - mu_f(z)) - lam * theta
    grad_norm = math.sqrt(float(grad @ grad))
    iters = 0
    while grad_norm > tol:
        if iters >= max_iters:
            raise NumericalError(
                f"MLE Newton failed to converge: ||score|| = {grad_norm:.3e} "
                f"after {max_iters} iterations"
            )
        w = slope_f(z)
        hess = diffs.T @ (w[:, None] * diffs) + eye
        step = np.linalg.solve(hess, grad)
        f0 = float(outcomes @ z - anti_f(z).sum()) - 0.5 * lam * float(theta @ theta)
        slack = 1e-13 * (1.0 + abs(f0))  # tolerate round-off near the optimum
        scale = 1.0
        while scale > 2.0 ** -40:
            if value(theta + scale * step) >= f0 - slack:
                break
            scale *= 0.5
        theta = theta + scale * step
        z = diffs @ theta
        grad = diffs.T @ (outcomes - mu_f(z)) - lam * theta
        grad_norm = math.sqrt(float(grad @ grad))
        iters += 1

    norm = float(np.linalg.norm(theta))
    if norm > 1.0:
        if design is None:
            design = DesignMatrix(history.dim, lam / link.kappa1)
            for row in history.diffs:
                design.update(row)
        proj = project_theta(theta, history, lam, link, design)
        return ThetaEstimate(theta, proj, True, iters, grad_norm)
    return ThetaEstimate(theta, theta.copy(), False, iters, grad_norm)


def project_theta(
    theta_raw,
    history: InteractionHistory,
    lam: float,
    link: LinkFunction,
    design: DesignMatrix,
    rel_tol: float = 1e-10,
    max_iters: int = 500,
) -> np.ndarray:
    """Pull an out-of-ball estimate back to the unit ball.

    Minimizes F(theta) = ||g(theta) - g(theta_raw)||^2_{M^-1} by projected
    gradient descent from the radially shrunk start, with backtracking and a
    relative-decrease stop.  Returns the best iterate seen; the result is
    always feasible.
    """
    theta_raw = np.asarray(theta_raw, dtype=float)
    raw_norm = float(np.linalg.norm(theta_raw))
    if raw_norm <= 1.0:
        return theta_raw.copy()
    mu_f, slope_f, _ = link.raw_funcs()
    m_inv = design.m_inv
    diffs = history.diffs if len(history) else None
    if diffs is None:
        g_target = lam * theta_raw
    else:
        g_target = diffs.T @ mu_f(diffs @ theta_raw) + lam * theta_raw

    def objective_parts(th):
        # returns F(th), M^-1 residual, and the utility pass for reuse
        z = diffs @ th if diffs is not None else None
        g = lam * th if z is None else diffs.T @ mu_f(z) + lam * th
        r = g - g_target
        w = m_inv @ r
        return float(r @ w), w, z

    def gradient(th, w, z):
        # 2 J(th) M^-1 r with J = sum mu'(d^T th) d d^T + lam I
        if diffs is None:
            return 2.0 * lam * w
        return 2.0 * (diffs.T @ (slope_f(z) * (diffs @ w)) + lam * w)

    theta = theta_raw / raw_norm
    f_cur, w, z = objective_parts(theta)
    best_theta, best_f = theta.copy(), f_cur
    step = 1.0
    prev_theta = None
    prev_grad = None
    floor = 1e-24  # below any scale the confidence radius can distinguish
    for _ in range(max_iters):
        if f_cur <= floor:
            break
        grad = gradient(theta, w, z)
        if prev_grad is not None:
            dth = theta - prev_theta
            dgr = grad - prev_grad
            curv = float(dth @ dgr)
            if curv > 0.0:  # Barzilai-Borwein trial step, safeguarded below
                step = min(max(float(dth @ dth) / curv, 1e-12), 1e12)
        prev_theta, prev_grad = theta, grad
        moved = False
        scale = step
        for _halving in range(30):
            cand = theta - scale * grad
            nrm = math.sqrt(float(cand @ cand))
            if nrm > 1.0:
                cand = cand / nrm
            f_new, w_new, z_new = objective_parts(cand)
            if f_new < f_cur:
                moved = True
                break
            scale *= 0.5
        if not moved:
            break
        rel = (f_cur - f_new) / max(f_cur, 1e-300)
        theta, f_cur, w, z = cand, f_new, w_new, z_new
        if f_cur < best_f:
            best_theta, best_f = theta.copy(), f_cur
        if rel < rel_tol:
            break
        step = scale * 2.0
    return best_theta


def dueling_radius(
    t: int,
    b_of_t: float,
    d: int,
    lam: float,
    kappa1: float,
    noise_level: float = 0.5,
    delta: float = 0.1,
    theta_norm_bound: float = 1.0,
) -> float:
    """Confidence radius for pairwise estimates after round t.

    (2 / kappa1) * (R sqrt(d log((1 + 4 kappa1 (t + b(t)) / (d lam)) / delta))
                    + sqrt(lam kappa1) * ||theta||-bound)
    with R the sub-Gaussian level of the feedback noise (1/2 for coin flips).
    """
    if min(t, d, lam, kappa1, noise_level) <= 0:
        raise DomainError("t, d, lam, kappa1, and noise level must be positive")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if b_of_t < 0.0:
        raise DomainError("b(t) must be nonnegative")
    arg = (1.0 + 4.0 * kappa1 * (t + b_of_t) / (d * lam)) / delta
    if arg <= 0.0:
        raise DomainError("log argument must be positive")
    inner = d * math.log(arg)
    if inner < 0.0:
        raise DomainError("radius radicand is negative")
    return (2.0 / kappa1) * (
        noise_level * math.sqrt(inner) + math.sqrt(lam * kappa1) * theta_norm_bound
    )
