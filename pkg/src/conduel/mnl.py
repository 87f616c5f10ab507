"""Multinomial-logit choice policies: choice probabilities, the multinomial
MLE, optimistic utilities, and exact cardinality-constrained assortment
optimization via threshold bisection.

A choice observation offers up to q features (arms or key-terms); the user
picks one of them or the outside option.  The likelihood is unregularized;
identifiability comes from the forced-exploration initialization phase, and
a vanishing ridge enters the Newton solve only for conditioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .dueling import RoundRecord
from .errors import DomainError, NumericalError, StructuralError
from .glm import DesignMatrix
from .spanner import Spanner

__all__ = [
    "MNL_KINDS",
    "ARM_LEVEL",
    "KEYTERM_LEVEL",
    "MnlConfig",
    "ChoiceHistory",
    "mnl_probs",
    "mnl_log_likelihood",
    "mnl_score",
    "mnl_mle_fit",
    "mnl_radius",
    "ucb_utilities",
    "optimal_assortment",
    "expected_revenue",
    "MnlPolicy",
]

MNL_KINDS = ("conmnl", "conmnl-ucb", "conmnl-random", "ucb-mnl")

ARM_LEVEL = 0
KEYTERM_LEVEL = 1

OUTSIDE = -1

# Shares the rationale of the dueling radius shrink: the closed-form radius
# constants are dominated by 1/kappa2 and would drown every utility signal.
DEFAULT_MNL_RADIUS_SCALE = 0.05


@dataclass
class MnlConfig:
    q: int = 4
    t0: int = 50
    kappa2: float = 0.005
    radius_scale: float = DEFAULT_MNL_RADIUS_SCALE
    radius_const: float | None = None
    tol: float = 1e-8
    max_iters: int = 100
    design_reg: float = 1e-6  # numerical only; the likelihood has no ridge


class ChoiceHistory:
    """Append-only store of choice observations in padded buffers."""

    __slots__ = ("dim", "width", "_feats", "_mask", "_chosen", "_levels", "n")

    def __init__(self, dim: int, width: int, capacity: int = 64):
        if width < 1:
            raise StructuralError("offer width must be at least 1")
        self.dim = int(dim)
        self.width = int(width)
        self._feats = np.zeros((capacity, self.width, self.dim))
        self._mask = np.zeros((capacity, self.width), dtype=bool)
        self._chosen = np.empty(capacity, dtype=np.int64)
        self._levels = np.empty(capacity, dtype=np.int8)
        self.n = 0

    def append(self, offered, chosen: int, level: int) -> None:
        offered = np.asarray(offered, dtype=float)
        if offered.ndim != 2 or offered.shape[1] != self.dim:
            raise StructuralError(f"offered features must be (m, {self.dim})")
        m = offered.shape[0]
        if not 1 <= m <= self.width:
            raise StructuralError(f"offer size must be in [1, {self.width}]")
        if not (chosen == OUTSIDE or 0 <= chosen < m):
            raise StructuralError("chosen index out of range")
        if level not in (ARM_LEVEL, KEYTERM_LEVEL):
            raise StructuralError("unknown observation level")
        if self.n == len(self._chosen):
            grow = max(2 * self.n, 64)
            feats = np.zeros((grow, self.width, self.dim))
            feats[: self.n] = self._feats[: self.n]
            mask = np.zeros((grow, self.width), dtype=bool)
            mask[: self.n] = self._mask[: self.n]
            self._feats, self._mask = feats, mask
            self._chosen = np.resize(self._chosen, grow)
            self._levels = np.resize(self._levels, grow)
        self._feats[self.n, :m] = offered
        self._feats[self.n, m:] = 0.0
        self._mask[self.n, :m] = True
        self._mask[self.n, m:] = False
        self._chosen[self.n] = chosen
        self._levels[self.n] = level
        self.n += 1

    @property
    def feats(self):
        return self._feats[: self.n]

    @property
    def mask(self):
        return self._mask[: self.n]

    @property
    def chosen(self):
        return self._chosen[: self.n]

    @property
    def levels(self):
        return self._levels[: self.n]

    def count(self, level: int) -> int:
        return int(np.count_nonzero(self.levels == level))

    def __len__(self) -> int:
        return self.n


def mnl_probs(theta, offered):
    """Choice probabilities over the offered items plus the outside option.

    p_i = exp(x_i^T theta) / (1 + sum_j exp(x_j^T theta)); the outside option
    carries the 1.  Max-shifted so arbitrarily large utilities stay finite.
    """
    offered = np.asarray(offered, dtype=float)
    if offered.ndim != 2 or offered.shape[0] < 1:
        raise DomainError("offered set must contain at least one item")
    z = offered @ np.asarray(theta, dtype=float)
    shift = max(float(z.max()), 0.0)
    e = np.exp(z - shift)
    e0 = math.exp(-shift)
    den = e0 + float(e.sum())
    return e / den, e0 / den


def _masked_parts(history: ChoiceHistory, theta):
    z = np.einsum("nwd,d->nw", history.feats, np.asarray(theta, dtype=float))
    z = np.where(history.mask, z, -np.inf)
    shift = np.maximum(z.max(axis=1), 0.0)
    e = np.exp(z - shift[:, None])
    e0 = np.exp(-shift)
    den = e0 + e.sum(axis=1)
    return z, shift, e, e0, den


def mnl_log_likelihood(history: ChoiceHistory, theta) -> float:
    """Sum of log-probabilities of the recorded choices (both levels)."""
    if len(history) == 0:
        return 0.0
    z, shift, e, e0, den = _masked_parts(history, theta)
    rows = np.arange(len(history))
    picked = np.where(history.chosen >= 0, z[rows, np.maximum(history.chosen, 0)], 0.0)
    return float(np.sum(picked - shift - np.log(den)))


def mnl_score(history: ChoiceHistory, theta) -> np.ndarray:
    """Gradient of the choice log-likelihood; zero at the MLE."""
    theta = np.asarray(theta, dtype=float)
    if len(history) == 0:
        return np.zeros(history.dim if hasattr(history, "dim") else theta.shape[0])
    _, _, e, _, den = _masked_parts(history, theta)
    p = e / den[:, None]
    one_hot = np.zeros_like(p)
    rows = np.arange(len(history))
    sel = history.chosen >= 0
    one_hot[rows[sel], history.chosen[sel]] = 1.0
    return np.einsum("nw,nwd->d", one_hot - p, history.feats)


def _mnl_hessian(history: ChoiceHistory, theta) -> np.ndarray:
    _, _, e, _, den = _masked_parts(history, theta)
    p = e / den[:, None]
    a = np.einsum("nw,nwd,nwe->de", p, history.feats, history.feats)
    xbar = np.einsum("nw,nwd->nd", p, history.feats)
    return a - xbar.T @ xbar


def mnl_mle_fit(
    history: ChoiceHistory,
    tol: float = 1e-8,
    max_iters: int = 100,
    theta0=None,
) -> np.ndarray:
    """Newton maximizer of the multinomial log-likelihood (warm-startable)."""
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    dim = history.dim
    theta = np.zeros(dim) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if len(history) == 0:
        return theta

    n = len(history)
    width = history.width
    flat = history.feats.reshape(n * width, dim)
    mask = history.mask
    rows = np.arange(n)
    chosen = history.chosen
    picked_col = np.maximum(chosen, 0)
    has_pick = chosen >= 0
    one_hot = np.zeros((n, width))
    one_hot[rows[has_pick], chosen[has_pick]] = 1.0
    oh_flat = one_hot.ravel()
    neg_inf = np.where(mask, 0.0, -np.inf)

    def parts(th):
        z = (flat @ th).reshape(n, width) + neg_inf
        shift = np.maximum(z.max(axis=1), 0.0)
        e = np.exp(z - shift[:, None])
        den = np.exp(-shift) + e.sum(axis=1)
        picked = np.where(has_pick, z[rows, picked_col], 0.0)
        value = float(np.sum(picked - shift - np.log(den)))
        return value, e / den[:, None]

    def value_only(th):
        z = (flat @ th).reshape(n, width) + neg_inf
        shift = np.maximum(z.max(axis=1), 0.0)
        den = np.exp(-shift) + np.exp(z - shift[:, None]).sum(axis=1)
        picked = np.where(has_pick, z[rows, picked_col], 0.0)
        return float(np.sum(picked - shift - np.log(den)))

    f0, p = parts(theta)
    grad = (oh_flat - p.ravel()) @ flat
    grad_norm = float(np.linalg.norm(grad))
    iters = 0
    ridge = 1e-8 * np.eye(dim)  # solve conditioning only
    while grad_norm > tol:
        if iters >= max_iters:
            raise NumericalError(
                f"choice-model Newton failed to converge: ||score|| = {grad_norm:.3e}"
            )
        xbar = (p[:, None, :] @ history.feats)[:, 0, :]
        hess = flat.T @ (p.reshape(-1, 1) * flat) - xbar.T @ xbar
        step = np.linalg.solve(hess + ridge, grad)
        slack = 1e-13 * (1.0 + abs(f0))
        scale = 1.0
        while scale > 2.0 ** -40:
            if value_only(theta + scale * step) >= f0 - slack:
                break
            scale *= 0.5
        theta = theta + scale * step
        if not np.all(np.isfinite(theta)):
            raise NumericalError("choice-model estimate diverged")
        f0, p = parts(theta)
        grad = (oh_flat - p.ravel()) @ flat
        grad_norm = float(np.linalg.norm(grad))
        iters += 1
    return theta


def mnl_radius(t: int, b_of_t: float, d: int, kappa2: float) -> float:
    """Confidence radius (1 / 2 kappa2) sqrt(2 d log(1 + (b(t)+t)/d) + 2 log t)."""
    if t < 1:
        raise DomainError("round index must be at least 1")
    if kappa2 <= 0.0 or d <= 0:
        raise DomainError("kappa2 and d must be positive")
    if b_of_t < 0.0:
        raise DomainError("b(t) must be nonnegative")
    return (0.5 / kappa2) * math.sqrt(
        2.0 * d * math.log(1.0 + (b_of_t + t) / d) + 2.0 * math.log(t)
    )


def ucb_utilities(theta, design: DesignMatrix, alpha: float, pool_feats) -> np.ndarray:
    """Optimistic utility x^T theta + alpha ||x||_{M^-1} per arm."""
    if alpha < 0.0:
        raise DomainError("alpha must be nonnegative")
    pool_feats = np.asarray(pool_feats, dtype=float)
    return pool_feats @ np.asarray(theta, dtype=float) + alpha * np.sqrt(
        design.inv_quad_rows(pool_feats)
    )


def optimal_assortment(z, revenues, q: int, tol: float = 1e-10, max_iters: int = 200) -> np.ndarray:
    """Exact revenue-optimal assortment of size at most q.

    Bisection on the revenue threshold: at threshold lam the best candidate
    set keeps the up-to-q items with the largest positive (r_i - lam) *
    exp(z_i), and the optimal revenue is the fixed point lam = revenue of
    that set.  Ties go to the lowest id; the empty set is allowed when no
    revenue is positive.  Utilities may be arbitrarily large: weights are
    max-shifted.
    """
    z = np.asarray(z, dtype=float)
    r = np.asarray(revenues, dtype=float)
    if z.shape != r.shape or z.ndim != 1:
        raise DomainError("utilities and revenues must be matching vectors")
    if q < 1:
        raise DomainError("assortment size cap must be at least 1")
    shift = max(float(z.max()), 0.0)
    v = np.exp(z - shift)
    v0 = math.exp(-shift)

    def pick(lam):
        s = (r - lam) * v
        order = np.argsort(-s, kind="stable")[:q]
        return order[s[order] > 0.0]

    def value(sel):
        den = v0 + float(v[sel].sum())
        return float((r[sel] * v[sel]).sum() / den)

    lo = min(0.0, float(r.min()))
    hi = max(0.0, float(r.max()))  # clamped at 0 so the bracket holds when all r < 0
    sel = pick(lo)
    for _ in range(max_iters):
        lam = 0.5 * (lo + hi)
        sel = pick(lam)
        val = value(sel)
        if abs(val - lam) <= tol:
            break
        if val > lam:
            lo = lam
        else:
            hi = lam
    return np.sort(sel)


def expected_revenue(offered_feats, theta, revenues) -> float:
    """sum_j r_j p_j(C, theta); zero for an empty offer."""
    offered_feats = np.asarray(offered_feats, dtype=float)
    if offered_feats.shape[0] == 0:
        return 0.0
    p, _ = mnl_probs(theta, offered_feats)
    return float(np.asarray(revenues, dtype=float) @ p)


class MnlPolicy:
    """Choice-model policy with a forced-exploration initialization phase.

    Rounds up to t0 offer random size-q assortments and (for conversational
    kinds) query q spanner key-terms per conversation, recording outcomes and
    growing the design matrix with every offered feature.  Afterwards each
    round refits the MLE, forms optimistic utilities, and offers the exact
    revenue-optimal assortment.  The plain kind skips conversations.
    """

    def __init__(
        self,
        kind: str,
        keyterm_feats: np.ndarray,
        spanner: Spanner | None,
        stream: streams.RunStream,
        config: MnlConfig | None = None,
    ):
        if kind not in MNL_KINDS:
            raise DomainError(f"unknown choice-model policy kind {kind!r}")
        self.kind = kind
        self.keyterm_feats = np.asarray(keyterm_feats, dtype=float)
        self.spanner = spanner
        self.stream = stream
        self.config = config or MnlConfig()
        self.d = self.keyterm_feats.shape[1]
        self.design = DesignMatrix(self.d, self.config.design_reg)
        self.history = ChoiceHistory(self.d, width=self.config.q)
        self.theta = np.zeros(self.d)
        self.converses = kind != "ucb-mnl"
        self._curvature_checked = False
        if self.converses and spanner is None:
            raise StructuralError("conversational choice policies require a spanner")

    def radius(self, t: int, b_of_t: float) -> float:
        cfg = self.config
        if cfg.radius_const is not None:
            return cfg.radius_const
        return cfg.radius_scale * mnl_radius(t, b_of_t, self.d, cfg.kappa2)

    def _select_keyterms(self, t, b_of_t, rng_sel) -> np.ndarray:
        q = self.config.q
        if t <= self.config.t0 or self.kind == "conmnl":
            members = np.asarray(self.spanner.member_ids)
            return members[rng_sel.integers(len(members), size=q)]
        if self.kind == "conmnl-random":
            return rng_sel.integers(self.keyterm_feats.shape[0], size=q)
        # conmnl-ucb: the q key-terms with the largest optimistic utility
        alpha = self.radius(t, b_of_t)
        u = ucb_utilities(self.theta, self.design, alpha, self.keyterm_feats)
        return np.sort(np.argsort(-u, kind="stable")[:q])

    def play_round(
        self, pool_ids, pool_feats, oracle, t, n_conversations, b_of_t, revenues
    ) -> RoundRecord:
        cfg = self.config
        conversations = []
        if self.converses and n_conversations > 0:
            rng_sel = self.stream.at(t, streams.KEYTERM_SELECT)
            rng_fb = self.stream.at(t, streams.KEYTERM_CHOICE_FEEDBACK)
            for _ in range(n_conversations):
                kt = self._select_keyterms(t, b_of_t, rng_sel)
                offered = self.keyterm_feats[kt]
                chosen = oracle.choice(offered, rng_fb)
                self.history.append(offered, chosen, KEYTERM_LEVEL)
                for row in offered:
                    self.design.update(row)
                conversations.append((kt, chosen))

        n_pool = len(pool_ids)
        if t <= cfg.t0:
            rng_a = self.stream.at(t, streams.ASSORTMENT_RANDOM)
            sel = np.sort(rng_a.choice(n_pool, size=min(cfg.q, n_pool), replace=False))
        else:
            if not self._curvature_checked:
                smallest = float(np.linalg.eigvalsh(self.design.m)[0])
                if smallest <= cfg.design_reg + 1e-9:
                    raise NumericalError(
                        "initialization phase left the design matrix singular; "
                        "increase t0 or the assortment size"
                    )
                self._curvature_checked = True
            self.theta = mnl_mle_fit(
                self.history, tol=cfg.tol, max_iters=cfg.max_iters, theta0=self.theta
            )
            alpha = self.radius(t, b_of_t)
            z = ucb_utilities(self.theta, self.design, alpha, pool_feats)
            sel = optimal_assortment(z, revenues, cfg.q)

        if sel.size:
            offered = pool_feats[sel]
            chosen = oracle.choice(offered, self.stream.at(t, streams.CHOICE_FEEDBACK))
            self.history.append(offered, chosen, ARM_LEVEL)
            for row in offered:
                self.design.update(row)
            chosen_id = int(pool_ids[sel[chosen]]) if chosen >= 0 else OUTSIDE
        else:
            chosen = OUTSIDE
            chosen_id = OUTSIDE
        return RoundRecord(
            outcome=chosen_id,
            conversations=conversations,
            n_candidates=n_pool,
            assortment=np.asarray(sel, dtype=int),
        )
