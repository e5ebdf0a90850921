"""Loss terms and the Sinkhorn-Knopp code solver.

Every differentiable operation returns its value together with the analytic
gradient; codes produced by the solver are plain constants (stop-gradient),
so nothing downstream differentiates through them. All kernels run in
float64 with fixed reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_CLAMP = 1e-12  # cross-entropy guard for log(0)


@dataclass(frozen=True)
class Temperatures:
    tau_sup: float = 0.07
    tau_u: float = 0.05

    def __post_init__(self):
        if not (self.tau_sup > 0 and self.tau_u > 0):
            raise ValueError("temperatures must be positive")


@dataclass(frozen=True)
class SinkhornSpec:
    epsilon: float = 0.05
    n_iters: int = 3

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n_iters < 1:
            raise ValueError("n_iters must be >= 1")


@dataclass(frozen=True)
class AssignmentBatch:
    """Per-batch projected features Z, similarity softmax P, and codes Q.

    Z is B x D' with unit rows, P is B x K row-stochastic, Q is K x B
    nonnegative with total mass 1.
    """

    Z: np.ndarray
    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        if np.max(np.abs(np.linalg.norm(self.Z, axis=1) - 1.0)) > 1e-9:
            raise ValueError("rows of Z must be unit-norm")
        if np.max(np.abs(self.P.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("rows of P must sum to 1")
        if self.Q.min() < 0 or abs(self.Q.sum() - 1.0) > 1e-6:
            raise ValueError("Q must be nonnegative with total mass 1")
        if self.Q.shape != (self.P.shape[1], self.P.shape[0]):
            raise ValueError("Q must be K x B for a B x K similarity matrix")


def sup_con_loss(
    z_views: np.ndarray, labels: np.ndarray, tau_sup: float
) -> tuple[float, np.ndarray]:
    """Supervised contrastive loss over a stacked multiview batch.

    Each row is one view; positives of an anchor are the other views sharing
    its label. Anchors without positives are skipped; the loss is the mean
    over remaining anchors of the -log softmax mass on positives, with the
    denominator ranging over all other rows. Similarity is the plain dot
    product (rows are unit-norm by precondition).

    Returns (loss, dloss/dz_views).
    """
    z = np.asarray(z_views, dtype=np.float64)
    labels = np.asarray(labels)
    m = z.shape[0]
    if m < 4:
        raise ValueError("need at least two instances with two views each")
    if labels.shape != (m,):
        raise ValueError("labels must match the number of rows")
    sims = (z @ z.T) / tau_sup
    np.fill_diagonal(sims, -np.inf)
    pos = (labels[:, None] == labels[None, :]) & ~np.eye(m, dtype=bool)
    n_pos = pos.sum(axis=1)
    active = n_pos > 0
    if not active.any():
        raise ValueError("no positive pairs in batch")
    # log softmax over the n != i candidates, max-subtracted for stability
    row_max = sims.max(axis=1, keepdims=True)
    shifted = sims - row_max
    exp = np.exp(shifted)
    log_z = np.log(exp.sum(axis=1, keepdims=True)) + row_max
    log_prob = np.where(pos, sims - log_z, 0.0)  # diagonal is -inf; mask first
    per_anchor = -log_prob.sum(axis=1)[active] / n_pos[active]
    loss = float(per_anchor.mean())

    softmax = exp / exp.sum(axis=1, keepdims=True)
    coeff = np.zeros_like(sims)
    coeff[active] = (
        softmax[active] - pos[active] / n_pos[active][:, None]
    ) / active.sum()
    grad = (coeff @ z + coeff.T @ z) / tau_sup
    return loss, grad


def prototype_probs(z: np.ndarray, prototypes: np.ndarray, tau_u: float) -> np.ndarray:
    """Row-wise softmax of feature-prototype cosine scores at temperature tau_u."""
    scores = (np.asarray(z, dtype=np.float64) @ prototypes.T) / tau_u
    scores -= scores.max(axis=1, keepdims=True)
    p = np.exp(scores)
    p /= p.sum(axis=1, keepdims=True)
    return p


def sinkhorn_codes(scores: np.ndarray, spec: SinkhornSpec) -> np.ndarray:
    """Entropy-regularized equipartition codes for a K x B score matrix.

    Alternating row/column scaling drives row sums toward 1/K and column
    sums toward 1/B (columns normalized last); a final global normalization
    pins the total mass to 1. The result carries no gradient channel.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError(f"scores must be 2-D, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    k, b = s.shape
    q = np.exp((s - s.max()) / spec.epsilon)
    q /= q.sum()
    for _ in range(spec.n_iters):
        q /= q.sum(axis=1, keepdims=True) * k
        q /= q.sum(axis=0, keepdims=True) * b
    q /= q.sum()
    return q


def js_consistency_loss(p: np.ndarray, q: np.ndarray) -> tuple[float, np.ndarray]:
    """Jensen-Shannon divergence between two K-simplex vectors.

    q is a constant (a code column); the gradient is with respect to p only.
    Natural-log entropies, 0 log 0 = 0. Value lies in [0, ln 2].
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mid = 0.5 * (p + q)
    loss = float(_entropy(mid) - 0.5 * (_entropy(p) + _entropy(q)))
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = 0.5 * np.log(p / mid)
    grad[~np.isfinite(grad)] = 0.0  # boundary of the simplex: 0 log 0 terms
    return loss, grad


def _entropy(p: np.ndarray) -> float:
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def swapped_prediction_loss(
    p_w: np.ndarray, p_s: np.ndarray, q_w: np.ndarray, q_s: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-view swapped prediction: each view's softmax predicts the other
    view's code.

    Code columns are rescaled by B so the targets are distributions over the
    K prototypes; codes are constants, so gradients flow only into p_w, p_s.
    Returns (loss, dloss/dp_w, dloss/dp_s).
    """
    p_w = np.asarray(p_w, dtype=np.float64)
    p_s = np.asarray(p_s, dtype=np.float64)
    b = p_w.shape[0]
    t_s = q_s.T * b  # B x K target distributions
    t_w = q_w.T * b
    pw_safe = np.maximum(p_w, LOG_CLAMP)
    ps_safe = np.maximum(p_s, LOG_CLAMP)
    loss = float(
        (-(t_s * np.log(pw_safe)).sum() - (t_w * np.log(ps_safe)).sum()) / b
    )
    grad_pw = np.where(p_w > LOG_CLAMP, -t_s / pw_safe / b, 0.0)
    grad_ps = np.where(p_s > LOG_CLAMP, -t_w / ps_safe / b, 0.0)
    return loss, grad_pw, grad_ps


def softmax_backward(p: np.ndarray, grad_p: np.ndarray) -> np.ndarray:
    """Pull a gradient on softmax outputs back to the (pre-temperature) logits."""
    inner = (grad_p * p).sum(axis=1, keepdims=True)
    return p * (grad_p - inner)


def assignment_batch(
    z: np.ndarray, prototypes: np.ndarray, tau_u: float, sink: SinkhornSpec
) -> AssignmentBatch:
    """Bundle one view's Z with its similarity softmax and Sinkhorn codes."""
    p = prototype_probs(z, prototypes, tau_u)
    q = sinkhorn_codes((z @ prototypes.T).T, sink)
    return AssignmentBatch(Z=np.asarray(z, dtype=np.float64), P=p, Q=q)
