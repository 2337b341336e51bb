"""Dual-margin classification loss with stable logit-space evaluation.

The loss scores a prediction against *two* partitions of the class set at
once: the target class ``t`` versus everything else, and a caller-supplied
*plausible set* ``S`` (with ``t`` forced in) versus its complement ``N``.
In probability space it reads

    loss(p, t, S) = log(1 + alpha * (1 - p_t) / p_t + beta * (1 - p_S) / p_S)

where ``p_S`` is the total probability of the plausible set.  With
``alpha = 1, beta = 0`` this is exactly cross-entropy; shrinking ``alpha``
and growing ``beta`` makes allocation to ``S`` the primary objective and
the exact target a tie-breaker.

The probability form divides by ``p_t`` and ``p_S`` and is unusable at
extreme logits, so it is kept only as a reference oracle
(:func:`loss_from_probs`).  The production path (:func:`loss_from_logits`)
rewrites the loss as a pool of three terms,

    loss = LSE{ 0, log(alpha) + lse(z, C-{t}) - z_t,
                   log(beta)  + lse(z, N) - lse(z, S) }

built from masked log-sum-exp scores.  Every intermediate is a difference
of LSE values, so nothing overflows for any finite logit magnitude, and
the analytic gradient (:func:`grad_from_logits`) is computed from the same
quantities with all exponents <= 0.

Conventions for empty/disabled terms: a zero weight or an empty index set
makes the corresponding pooled term -inf, i.e. it simply drops out of the
pool.  The constant 0 term is always present, so the loss is non-negative.

All arithmetic is float64.  Every function here is pure and thread-safe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossParams",
    "PlausibleSet",
    "LossBreakdown",
    "masked_lse",
    "softmax",
    "loss_from_probs",
    "loss_from_logits",
    "grad_from_logits",
    "sets_from_q",
    "batch_loss",
    "batch_loss_and_grad",
]

_REDUCTIONS = ("mean", "sum", "none")


@dataclass
class LossParams:
    """Weights for the two margins plus the batch reduction mode.

    ``alpha`` weighs the target-vs-rest odds, ``beta`` the plausible-vs-
    implausible odds.  Both must be non-negative; both zero is almost
    always a configuration mistake (the loss is then identically 0), so it
    is rejected unless ``allow_degenerate`` is set.
    """

    alpha: float
    beta: float
    reduction: str = "mean"
    allow_degenerate: bool = False

    def __post_init__(self) -> None:
        self.alpha = float(self.alpha)
        self.beta = float(self.beta)
        if not (self.alpha >= 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (self.beta >= 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if self.reduction not in _REDUCTIONS:
            raise ValueError(f"reduction must be one of {_REDUCTIONS}, got {self.reduction!r}")
        if self.alpha == 0.0 and self.beta == 0.0 and not self.allow_degenerate:
            raise ValueError("alpha and beta are both zero; pass allow_degenerate=True if intended")


@dataclass
class PlausibleSet:
    """Boolean membership mask over classes plus the target index.

    The target is always forced into the set, mirroring how per-label sets
    are read off a plausibility matrix at consumption time.
    """

    mask: np.ndarray
    target: int

    def __post_init__(self) -> None:
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 1 or mask.size < 1:
            raise ValueError("mask must be a non-empty 1-D boolean array")
        target = int(self.target)
        if not 0 <= target < mask.size:
            raise ValueError(f"target {target} out of range for {mask.size} classes")
        mask[target] = True
        self.mask = mask
        self.target = target

    @property
    def class_count(self) -> int:
        return int(self.mask.size)

    @classmethod
    def from_indices(cls, class_count: int, members, target: int) -> "PlausibleSet":
        mask = np.zeros(class_count, dtype=bool)
        mask[np.asarray(list(members), dtype=int)] = True
        return cls(mask=mask, target=target)


@dataclass
class LossBreakdown:
    """All intermediates of one logit-space evaluation.

    ``loss = LSE{constant_term, target_term, set_term}``.  The three pooled
    terms are the constant 0, the weighted target-vs-rest log-odds, and the
    weighted set-vs-complement log-odds; either margin term may be -inf
    when its weight is zero or its index set is empty.
    """

    constant_term: float
    target_term: float
    set_term: float
    z_target: float
    z_plausible: float
    z_implausible: float
    z_non_target: float
    loss: float

    def as_dict(self) -> dict[str, float]:
        return {
            "constant_term": self.constant_term,
            "target_term": self.target_term,
            "set_term": self.set_term,
            "z_target": self.z_target,
            "z_plausible": self.z_plausible,
            "z_implausible": self.z_implausible,
            "z_non_target": self.z_non_target,
            "loss": self.loss,
        }


def masked_lse(values, mask) -> float:
    """log(sum(exp(values[mask]))) with max-subtraction; -inf on empty mask.

    The maximum over the selected entries is subtracted before
    exponentiation, so no intermediate exponential can overflow regardless
    of the magnitude of the inputs.
    """
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if values.ndim != 1 or mask.ndim != 1:
        raise ValueError("values and mask must be 1-D")
    if values.shape != mask.shape:
        raise ValueError(f"length mismatch: values {values.shape} vs mask {mask.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    if not mask.any():
        return float("-inf")
    selected = values[mask]
    m = selected.max()
    return float(m + np.log(np.exp(selected - m).sum()))


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def loss_from_probs(p, pset: PlausibleSet, params: LossParams) -> float:
    """Probability-form reference evaluation (the slow oracle path).

    Complement masses are accumulated as explicit sums over the complement
    indices rather than as ``1 - p_t`` / ``1 - p_S``, which keeps the ratios
    exact when a set covers (nearly) the whole simplex.  Raises ValueError
    when ``p_t`` or ``p_S`` is zero: this path cannot represent infinite
    loss, use the logit form instead.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("p must be a non-empty 1-D array")
    if p.size != pset.class_count:
        raise ValueError("p and plausible set disagree on class count")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities must sum to 1, got {p.sum()!r}")
    t = pset.target
    p_t = p[t]
    p_set = p[pset.mask].sum()
    if p_t <= 0.0:
        raise ValueError("p_t is zero: infinite loss; evaluate in logit space instead")
    if p_set <= 0.0:
        raise ValueError("p_S is zero: infinite loss; evaluate in logit space instead")
    p_rest = p[np.arange(p.size) != t].sum()
    p_out = p[~pset.mask].sum()
    return float(np.log1p(params.alpha * (p_rest / p_t) + params.beta * (p_out / p_set)))


def _log_or_neg_inf(w: float) -> float:
    return math.log(w) if w > 0.0 else float("-inf")


def _rows_masked_lse(Z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise masked LSE for a (B, C) batch; -inf rows where mask is empty."""
    masked = np.where(mask, Z, -np.inf)
    m = masked.max(axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(np.where(mask, Z - safe[:, None], -np.inf))
    s = e.sum(axis=1)
    out = np.where(s > 0.0, safe + np.log(np.where(s > 0.0, s, 1.0)), -np.inf)
    return out


def _pool(term_a: np.ndarray, term_b: np.ndarray) -> np.ndarray:
    """Elementwise LSE{0, term_a, term_b} with full relative accuracy.

    When both terms are <= 0 the result is log1p(exp(a) + exp(b)), which
    stays accurate for losses far below machine epsilon; otherwise the
    usual max-subtraction applies.
    """
    m = np.maximum(0.0, np.maximum(term_a, term_b))
    out = np.empty_like(m)
    small = m == 0.0
    out[small] = np.log1p(np.exp(term_a[small]) + np.exp(term_b[small]))
    big = ~small
    out[big] = m[big] + np.log(
        np.exp(-m[big]) + np.exp(term_a[big] - m[big]) + np.exp(term_b[big] - m[big])
    )
    return out


def _eval_batch(Z: np.ndarray, set_masks: np.ndarray, targets: np.ndarray, alpha: float, beta: float):
    """Vectorized forward pass. Returns per-sample losses plus intermediates."""
    B, C = Z.shape
    idx = np.arange(B)
    log_alpha = _log_or_neg_inf(alpha)
    log_beta = _log_or_neg_inf(beta)

    z_t = Z[idx, targets]
    not_t = np.ones((B, C), dtype=bool)
    not_t[idx, targets] = False
    z_non_target = _rows_masked_lse(Z, not_t)
    z_plausible = _rows_masked_lse(Z, set_masks)
    z_implausible = _rows_masked_lse(Z, ~set_masks)

    term_a = log_alpha + z_non_target - z_t
    term_b = log_beta + z_implausible - z_plausible
    losses = _pool(term_a, term_b)
    return losses, term_a, term_b, z_t, z_plausible, z_implausible, z_non_target


def _grad_batch(
    Z: np.ndarray,
    set_masks: np.ndarray,
    targets: np.ndarray,
    alpha: float,
    beta: float,
    losses: np.ndarray,
    term_a: np.ndarray,
    term_b: np.ndarray,
    z_t: np.ndarray,
    z_plausible: np.ndarray,
) -> np.ndarray:
    """Per-sample gradients d loss / d z, shape (B, C).

    Each additive contribution is exp() of a quantity that is <= 0 by
    construction (every term is a fraction of the pooled total), so the
    gradient inherits the stability of the forward pass.
    """
    B, C = Z.shape
    idx = np.arange(B)
    log_alpha = _log_or_neg_inf(alpha)
    log_beta = _log_or_neg_inf(beta)

    # alpha part: +alpha*exp(z_c - z_t)/total on c != t, -(pooled alpha term) on t.
    arg_a = log_alpha + Z - (z_t + losses)[:, None]
    arg_a[idx, targets] = -np.inf
    grad = np.exp(arg_a)
    grad[idx, targets] -= np.exp(term_a - losses)

    # beta part: +beta*exp(z_n - z_S)/total on the complement, and the set
    # members give back the pooled beta term split by their within-set softmax.
    arg_b = np.where(set_masks, -np.inf, log_beta + Z - (z_plausible + losses)[:, None])
    grad += np.exp(arg_b)
    arg_s = np.where(set_masks, (term_b - losses)[:, None] + Z - z_plausible[:, None], -np.inf)
    grad -= np.exp(arg_s)
    return grad


def _validate_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size < 1:
        raise ValueError("logits must be a non-empty 1-D array")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    if z.size == 1:
        warnings.warn(
            "single-class input: both margin terms vanish and the loss is 0",
            RuntimeWarning,
            stacklevel=3,
        )
    return z


def loss_from_logits(z, pset: PlausibleSet, params: LossParams) -> LossBreakdown:
    """Stable logit-space evaluation; returns the full term breakdown.

    Agrees with :func:`loss_from_probs` on softmax(z) to ~1e-12 relative
    for moderate logits and stays finite for any finite logit magnitude.
    """
    z = _validate_logits(z)
    if z.size != pset.class_count:
        raise ValueError("logits and plausible set disagree on class count")
    Z = z[None, :]
    masks = pset.mask[None, :]
    targets = np.array([pset.target])
    losses, term_a, term_b, z_t, z_s, z_n, z_nt = _eval_batch(Z, masks, targets, params.alpha, params.beta)
    return LossBreakdown(
        constant_term=0.0,
        target_term=float(term_a[0]),
        set_term=float(term_b[0]),
        z_target=float(z_t[0]),
        z_plausible=float(z_s[0]),
        z_implausible=float(z_n[0]),
        z_non_target=float(z_nt[0]),
        loss=float(losses[0]),
    )


def grad_from_logits(z, pset: PlausibleSet, params: LossParams) -> np.ndarray:
    """Analytic gradient of :func:`loss_from_logits` with respect to z."""
    z = _validate_logits(z)
    if z.size != pset.class_count:
        raise ValueError("logits and plausible set disagree on class count")
    Z = z[None, :]
    masks = pset.mask[None, :]
    targets = np.array([pset.target])
    losses, term_a, term_b, z_t, z_s, _, _ = _eval_batch(Z, masks, targets, params.alpha, params.beta)
    grad = _grad_batch(Z, masks, targets, params.alpha, params.beta, losses, term_a, term_b, z_t, z_s)
    return grad[0]


def sets_from_q(q: np.ndarray, targets) -> np.ndarray:
    """Per-sample membership masks: column ``t`` of Q with the target forced in.

    Returns a (B, C) boolean matrix; row b is the plausible set for
    ``targets[b]``.
    """
    q = np.asarray(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"Q must be square, got shape {q.shape}")
    C = q.shape[0]
    targets = np.asarray(targets, dtype=int)
    if targets.ndim != 1:
        raise ValueError("targets must be 1-D")
    if targets.size and (targets.min() < 0 or targets.max() >= C):
        raise ValueError(f"targets out of range [0, {C})")
    masks = q.astype(bool)[:, targets].T.copy()
    masks[np.arange(targets.size), targets] = True
    return masks


def _validate_batch(Z, targets) -> tuple[np.ndarray, np.ndarray]:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ValueError("Z must be a (batch, classes) array")
    if not np.all(np.isfinite(Z)):
        raise ValueError("logits must be finite")
    targets = np.asarray(targets, dtype=int)
    if targets.shape != (Z.shape[0],):
        raise ValueError("targets must have one entry per batch row")
    if Z.shape[1] == 1:
        warnings.warn(
            "single-class input: both margin terms vanish and the loss is 0",
            RuntimeWarning,
            stacklevel=3,
        )
    return Z, targets


def batch_loss(Z, targets, q, params: LossParams):
    """Batched loss over per-sample sets read from the columns of Q.

    Returns a scalar under mean/sum reduction, or the per-sample vector
    when ``params.reduction == "none"``.
    """
    Z, targets = _validate_batch(Z, targets)
    masks = sets_from_q(q, targets)
    losses, *_ = _eval_batch(Z, masks, targets, params.alpha, params.beta)
    return _reduce(losses, params.reduction)


def batch_loss_and_grad(Z, targets, q, params: LossParams):
    """Batched loss plus the gradient of the reduced loss w.r.t. Z.

    Under ``reduction="none"`` the gradient rows are the per-sample
    gradients (i.e. the Jacobian diagonal blocks stacked as (B, C)).
    """
    Z, targets = _validate_batch(Z, targets)
    masks = sets_from_q(q, targets)
    losses, term_a, term_b, z_t, z_s, _, _ = _eval_batch(Z, masks, targets, params.alpha, params.beta)
    grads = _grad_batch(Z, masks, targets, params.alpha, params.beta, losses, term_a, term_b, z_t, z_s)
    if params.reduction == "mean":
        grads = grads / Z.shape[0]
    return _reduce(losses, params.reduction), grads


def _reduce(losses: np.ndarray, reduction: str):
    if reduction == "mean":
        return float(losses.mean())
    if reduction == "sum":
        return float(losses.sum())
    return losses
