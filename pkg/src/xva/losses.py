"""Training objectives: two-branch classification, co-relation alignment
between the class distributions of the two views, and feature transfer.
"""

from dataclasses import dataclass

from .autodiff import (
    add,
    constant,
    cross_entropy,
    l2_distance,
    log_shift,
    mul,
    outer,
    scale,
    softmax_t,
    stop_gradient,
    sub,
    tsum,
)
from .errors import ConfigError

ACP_LOG_EPS = 1e-10


@dataclass
class LossWeights:
    lambda_cls: float = 1.0
    lambda_acp: float = 0.5
    lambda_kt: float = 0.5
    temperature: float = 1.0


def acp_loss(tape, s, g, temperature=1.0, both_sides=False, frozen_target=None):
    """Cross-entropy between the class co-relation matrices of two branches.

    Both logit vectors are softened at `temperature`, their outer products
    form co-relation matrices P (first branch) and Q (second branch), and the
    loss is -sum_jk P_jk log(Q_jk + eps). P acts as the target side and is
    detached unless both_sides is set; gradients always flow through Q.

    `frozen_target` substitutes a fixed P matrix; gradient verification uses
    it to pin the detached side across finite-difference evaluations.
    """
    if s.value.shape[0] < 2:
        raise ConfigError(f"co-relation loss needs at least 2 classes, got {s.value.shape[0]}")
    if frozen_target is not None:
        p_mat = constant(frozen_target)
    else:
        p_mat = outer(tape, softmax_t(tape, s, temperature))
        if not both_sides:
            p_mat = stop_gradient(p_mat)
    q = softmax_t(tape, g, temperature)
    q_mat = outer(tape, q)
    return scale(tape, tsum(tape, mul(tape, p_mat, log_shift(tape, q_mat, ACP_LOG_EPS))), -1.0)


def kt_loss(tape, f_exo, f_ego, squared=False):
    """Transfer loss between pooled features: plain L2 norm of the gap.

    The squared variant is available for comparison but the default follows
    the unsquared norm.
    """
    if squared:
        d = sub(tape, f_exo, f_ego)
        return tsum(tape, mul(tape, d, d))
    return l2_distance(tape, f_exo, f_ego)


def cls_loss(tape, s, g, label):
    """Sum of the two branches' classification cross-entropies."""
    return add(tape, cross_entropy(tape, s, label), cross_entropy(tape, g, label))


def total_loss(tape, s, g, f_exo, f_ego, label, weights: LossWeights,
               use_acp=True, use_kt=True, acp_both_sides=False, kt_squared=False,
               acp_frozen_target=None):
    """Weighted sum of the three objectives plus a per-component breakdown.

    Disabled components are skipped entirely (not just zero-weighted) and
    report 0.0 in the breakdown.
    """
    l_cls = cls_loss(tape, s, g, label)
    total = scale(tape, l_cls, weights.lambda_cls)
    parts = {"cls": float(l_cls.value), "acp": 0.0, "kt": 0.0}
    if use_acp:
        l_acp = acp_loss(tape, s, g, weights.temperature, both_sides=acp_both_sides,
                         frozen_target=acp_frozen_target)
        parts["acp"] = float(l_acp.value)
        total = add(tape, total, scale(tape, l_acp, weights.lambda_acp))
    if use_kt:
        l_kt = kt_loss(tape, f_exo, f_ego, squared=kt_squared)
        parts["kt"] = float(l_kt.value)
        total = add(tape, total, scale(tape, l_kt, weights.lambda_kt))
    parts["total"] = float(total.value)
    return total, parts
