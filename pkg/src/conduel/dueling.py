"""Dueling-bandit policies: the conversational GLM algorithm, its key-term
selection variants, the no-conversation baselines, and the adapted
linear-bandit baselines.

Every policy exposes ``play_round``; the harness owns pools, schedules, and
regret accounting.  All randomness flows through (seed, round, purpose)
substreams, so two policies that make the same kind of draws see the same
random numbers under the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .errors import DomainError, StructuralError
from .estimator import (
    ARM_LEVEL,
    KEYTERM_LEVEL,
    InteractionHistory,
    ThetaEstimate,
    dueling_radius,
    mle_fit,
)
from .glm import DesignMatrix, LinkFunction
from .spanner import Spanner

__all__ = [
    "DUEL_KINDS",
    "DuelConfig",
    "RoundRecord",
    "select_keyterm_pair",
    "build_candidate_set",
    "select_arm_pair",
    "DuelPolicy",
    "RconucbPolicy",
    "make_duel_policy",
]

# GLM policies with a conversation module, without one, and the adapted
# linear-bandit baselines (which keep their own ridge state and absolute
# single-arm regret accounting).
CONVERSATIONAL_KINDS = ("conduel", "conduel-random", "conduel-maxinp")
PLAIN_KINDS = ("maxinp", "random-opt")
RCONUCB_KINDS = ("rconucb-posneg", "rconucb-diff")
DUEL_KINDS = CONVERSATIONAL_KINDS + PLAIN_KINDS + RCONUCB_KINDS

# Empirical shrink applied to the theoretical confidence radius.  The
# closed-form radius is a high-probability bound whose constants are far too
# conservative to act on directly (it exceeds the largest possible utility
# gap for every horizon we run); all GLM dueling policies share this
# calibration.  The adapted linear baselines keep their standard width.
DEFAULT_RADIUS_SCALE = 0.03


@dataclass
class DuelConfig:
    lam: float = 1.0
    delta: float = 0.1
    kappa1: float | None = None  # None: take the link's slope floor
    noise_level: float = 0.5
    theta_norm_bound: float = 1.0
    radius_scale: float = DEFAULT_RADIUS_SCALE
    radius_const: float | None = None  # fixed radius override for diagnostics
    pair_mode: str = "sampled_first"  # or "full_maxinp"
    tol: float = 1e-8
    max_iters: int = 100


@dataclass
class RoundRecord:
    """What one round produced; regret is attributed by the harness."""

    pair: tuple | None = None  # positions within the round's pool
    pair_ids: tuple | None = None  # arm ids
    outcome: int | None = None
    conversations: list = field(default_factory=list)  # (k, k', outcome)
    n_candidates: int = 0
    assortment: np.ndarray | None = None  # positions offered by choice policies


def select_keyterm_pair(kind, rng_sel, spanner: Spanner, keyterm_feats, design: DesignMatrix):
    """Pick the key-term pair to query for one conversation.

    conduel draws two members independently from the spanner (they may
    coincide; a coincident pair is a no-op update).  conduel-random draws
    from the whole key-term set.  conduel-maxinp takes the pair with the
    largest difference norm under the current inverse design matrix, ties to
    the lowest id pair.
    """
    n = keyterm_feats.shape[0]
    if n == 0:
        raise StructuralError("key-term set is empty")
    if kind == "conduel":
        ids = spanner.member_ids
        return ids[int(rng_sel.integers(len(ids)))], ids[int(rng_sel.integers(len(ids)))]
    if kind == "conduel-random":
        return int(rng_sel.integers(n)), int(rng_sel.integers(n))
    if kind == "conduel-maxinp":
        return _max_info_pair(keyterm_feats, design)
    raise DomainError(f"policy kind {kind!r} does not converse")


def _max_info_pair(feats: np.ndarray, design: DesignMatrix, block: int = 512):
    """argmax over pairs of ||x_k - x_k'||_{M^-1}; first hit in row-major order."""
    n = feats.shape[0]
    proj = feats @ design.m_inv  # n x d
    quad = np.einsum("ij,ij->i", proj, feats)
    best_val, best_pair = -np.inf, (0, min(1, n - 1))
    for start in range(0, n, block):
        stop = min(start + block, n)
        cross = proj[start:stop] @ feats.T  # rows x n
        dist2 = quad[start:stop, None] + quad[None, :] - 2.0 * cross
        # upper triangle only: canonical (low, high) pairs, ties to lowest
        cols = np.arange(n)[None, :]
        rows = np.arange(start, stop)[:, None]
        dist2[cols <= rows] = -np.inf
        flat = int(np.argmax(dist2))
        r, c = divmod(flat, n)
        val = float(dist2[r, c])
        if val > best_val:  # strict: earliest block wins ties
            best_val, best_pair = val, (start + r, c)
    return best_pair


def build_candidate_set(pool_feats, theta_proj, design: DesignMatrix, alpha: float) -> np.ndarray:
    """Positions of arms whose optimistic estimate beats every pool member.

    Keeps a iff (x_a - x_a')^T theta + alpha ||x_a - x_a'||_{M^-1} > 0 for all
    other a' (strict; self-comparison excluded).  Numerically empty output
    falls back to the whole pool.
    """
    if alpha < 0.0:
        raise DomainError("alpha must be nonnegative")
    pool_feats = np.asarray(pool_feats, dtype=float)
    util = pool_feats @ np.asarray(theta_proj, dtype=float)
    gram = pool_feats @ design.m_inv @ pool_feats.T
    diag = np.diag(gram).copy()
    dist = np.sqrt(np.clip(diag[:, None] + diag[None, :] - 2.0 * gram, 0.0, None))
    ucb = util[:, None] - util[None, :] + alpha * dist
    np.fill_diagonal(ucb, np.inf)
    keep = np.nonzero(ucb.min(axis=1) > 0.0)[0]
    if keep.size == 0:
        return np.arange(pool_feats.shape[0])
    return keep


def select_arm_pair(mode, candidates, pool_feats, design: DesignMatrix, rng_sel):
    """Pick the duel pair from the candidate positions.

    ``sampled_first``: first arm uniform, second the most uncertain against
    it.  ``full_maxinp``: most uncertain pair overall.  ``random``: both
    uniform without replacement.  Ties resolve to the lowest position pair; a
    single candidate duels itself.
    """
    candidates = np.asarray(candidates, dtype=int)
    if candidates.size == 0:
        raise StructuralError("candidate set is empty")
    if candidates.size == 1:
        a = int(candidates[0])
        return a, a
    feats = pool_feats[candidates]
    if mode == "sampled_first":
        first = int(rng_sel.integers(candidates.size))
        gaps = feats - feats[first]
        second = int(np.argmax(design.inv_quad_rows(gaps)))
        return int(candidates[first]), int(candidates[second])
    if mode == "full_maxinp":
        gram = feats @ design.m_inv @ feats.T
        diag = np.diag(gram).copy()
        dist2 = diag[:, None] + diag[None, :] - 2.0 * gram
        dist2[np.tril_indices(candidates.size)] = -np.inf  # canonical (low, high)
        flat = int(np.argmax(dist2))  # row-major: lowest pair wins ties
        i, j = divmod(flat, candidates.size)
        return int(candidates[i]), int(candidates[j])
    if mode == "random":
        i, j = rng_sel.choice(candidates.size, size=2, replace=False)
        return int(candidates[i]), int(candidates[j])
    raise DomainError(f"unknown pair selection mode {mode!r}")


class DuelPolicy:
    """GLM dueling policy driven by the shared Newton estimate.

    Conversational kinds spend the round's conversation budget on key-term
    duels before refitting; the plain kinds skip that phase entirely, which
    makes a zero-budget conversational run and its plain counterpart
    trace-identical under one seed.
    """

    def __init__(
        self,
        kind: str,
        link: LinkFunction,
        keyterm_feats: np.ndarray,
        spanner: Spanner | None,
        stream: streams.RunStream,
        config: DuelConfig | None = None,
    ):
        if kind not in CONVERSATIONAL_KINDS + PLAIN_KINDS:
            raise DomainError(f"unknown GLM dueling policy kind {kind!r}")
        self.kind = kind
        self.link = link
        self.keyterm_feats = np.asarray(keyterm_feats, dtype=float)
        self.spanner = spanner
        self.stream = stream
        self.config = config or DuelConfig()
        self.kappa1 = self.config.kappa1 if self.config.kappa1 is not None else link.kappa1
        self.d = self.keyterm_feats.shape[1]
        self.design = DesignMatrix(self.d, self.config.lam / self.kappa1)
        self.history = InteractionHistory(self.d)
        zero = np.zeros(self.d)
        self.estimate = ThetaEstimate(zero, zero.copy(), False, 0, 0.0)
        self.converses = kind in CONVERSATIONAL_KINDS
        if self.converses and kind == "conduel" and spanner is None:
            raise StructuralError("conduel requires a spanner")

    def radius(self, t: int, b_of_t: float) -> float:
        cfg = self.config
        if cfg.radius_const is not None:
            return cfg.radius_const
        return cfg.radius_scale * dueling_radius(
            t,
            b_of_t,
            self.d,
            cfg.lam,
            self.kappa1,
            cfg.noise_level,
            cfg.delta,
            cfg.theta_norm_bound,
        )

    def play_round(self, pool_ids, pool_feats, oracle, t, n_conversations, b_of_t) -> RoundRecord:
        cfg = self.config
        conversations = []
        if self.converses and n_conversations > 0:
            rng_sel = self.stream.at(t, streams.KEYTERM_SELECT)
            rng_fb = self.stream.at(t, streams.KEYTERM_FEEDBACK)
            for _ in range(n_conversations):
                k1, k2 = select_keyterm_pair(
                    self.kind, rng_sel, self.spanner, self.keyterm_feats, self.design
                )
                diff = self.keyterm_feats[k1] - self.keyterm_feats[k2]
                won = oracle.duel(self.keyterm_feats[k1], self.keyterm_feats[k2], rng_fb)
                self.history.append(diff, won, KEYTERM_LEVEL)
                self.design.update(diff)
                conversations.append((k1, k2, won))

        self.estimate = mle_fit(
            self.history,
            cfg.lam,
            self.link,
            tol=cfg.tol,
            max_iters=cfg.max_iters,
            theta0=self.estimate.theta_raw,
            design=self.design,
        )
        # policies without a conversation module have no key-term observations,
        # so their radius counts arm rounds only
        alpha = self.radius(t, b_of_t if self.converses else 0.0)
        candidates = build_candidate_set(pool_feats, self.estimate.theta_proj, self.design, alpha)
        mode = "random" if self.kind == "random-opt" else cfg.pair_mode
        i, j = select_arm_pair(
            mode, candidates, pool_feats, self.design, self.stream.at(t, streams.ARM_SELECT)
        )
        won = oracle.duel(pool_feats[i], pool_feats[j], self.stream.at(t, streams.ARM_FEEDBACK))
        diff = pool_feats[i] - pool_feats[j]
        self.history.append(diff, won, ARM_LEVEL)
        self.design.update(diff)
        return RoundRecord(
            pair=(i, j),
            pair_ids=(int(pool_ids[i]), int(pool_ids[j])),
            outcome=won,
            conversations=conversations,
            n_candidates=int(len(candidates)),
        )


class RconucbPolicy:
    """Adapted relative-feedback linear baseline.

    Two ridge regressions: key-term duels become absolute observations
    (posneg: winner 1, loser 0; diff: winner-minus-loser difference with
    label 1), and the key-term estimate is blended into the arm-level ridge
    as a prior with weight one half.  Arm selection is single-arm linear UCB
    on a Bernoulli(sigmoid(utility)) click; the round record repeats the
    single arm so the harness attributes the full utility gap.
    """

    prior_weight = 0.5

    def __init__(
        self,
        kind: str,
        link: LinkFunction,
        keyterm_feats: np.ndarray,
        spanner: Spanner | None,
        stream: streams.RunStream,
        config: DuelConfig | None = None,
    ):
        if kind not in RCONUCB_KINDS:
            raise DomainError(f"unknown linear baseline kind {kind!r}")
        self.kind = kind
        self.link = link
        self.keyterm_feats = np.asarray(keyterm_feats, dtype=float)
        self.stream = stream
        self.config = config or DuelConfig()
        self.d = self.keyterm_feats.shape[1]
        lam = self.config.lam
        self.arm_design = DesignMatrix(self.d, lam)
        self.arm_b = np.zeros(self.d)
        self.key_design = DesignMatrix(self.d, lam)
        self.key_b = np.zeros(self.d)

    def radius(self, t: int) -> float:
        # the baseline runs with its own standard width, not the calibrated
        # shrink the GLM policies share
        cfg = self.config
        if cfg.radius_const is not None:
            return cfg.radius_const
        lam, d = cfg.lam, self.d
        return math.sqrt(lam) * cfg.theta_norm_bound + cfg.noise_level * math.sqrt(
            2.0 * math.log(1.0 / cfg.delta) + d * math.log(1.0 + t / (d * lam))
        )

    def play_round(self, pool_ids, pool_feats, oracle, t, n_conversations, b_of_t) -> RoundRecord:
        conversations = []
        if n_conversations > 0:
            rng_sel = self.stream.at(t, streams.KEYTERM_SELECT)
            rng_fb = self.stream.at(t, streams.KEYTERM_FEEDBACK)
            n_key = self.keyterm_feats.shape[0]
            for _ in range(n_conversations):
                k1 = int(rng_sel.integers(n_key))
                k2 = int(rng_sel.integers(n_key))
                won = oracle.duel(self.keyterm_feats[k1], self.keyterm_feats[k2], rng_fb)
                win, lose = (k1, k2) if won else (k2, k1)
                if self.kind == "rconucb-posneg":
                    self.key_design.update(self.keyterm_feats[win])
                    self.key_b += self.keyterm_feats[win]
                    self.key_design.update(self.keyterm_feats[lose])
                else:
                    diff = self.keyterm_feats[win] - self.keyterm_feats[lose]
                    self.key_design.update(diff)
                    self.key_b += diff
                conversations.append((k1, k2, won))

        lam = self.config.lam
        theta_key = self.key_design.m_inv @ self.key_b
        theta = self.arm_design.m_inv @ (self.arm_b + self.prior_weight * lam * theta_key)
        ucb = pool_feats @ theta + self.radius(t) * np.sqrt(
            self.arm_design.inv_quad_rows(pool_feats)
        )
        a = int(np.argmax(ucb))
        click = oracle.click(pool_feats[a], self.stream.at(t, streams.ARM_FEEDBACK))
        self.arm_design.update(pool_feats[a])
        self.arm_b += click * pool_feats[a]
        return RoundRecord(
            pair=(a, a),
            pair_ids=(int(pool_ids[a]), int(pool_ids[a])),
            outcome=click,
            conversations=conversations,
            n_candidates=len(pool_ids),
        )


def make_duel_policy(kind, link, keyterm_feats, spanner, stream, config=None):
    if kind in RCONUCB_KINDS:
        return RconucbPolicy(kind, link, keyterm_feats, spanner, stream, config)
    return DuelPolicy(kind, link, keyterm_feats, spanner, stream, config)
