"""Invariance mining over groups of third-person features.

A group of feature maps is reduced, rectified and factorized against a
dictionary shared across the group; the low-rank reconstruction is mapped
back and added to each input as a residual. The dictionary's initialisation
is primed across batches with an exponential moving average, so it
accumulates the recurring interaction structure.

The factorization itself is treated as a constant during backpropagation:
gradients reach the backbone through the identity term of the residual sum,
and reach the residual conv with the reconstruction as a fixed input. The
reduction conv is consequently a fixed random projection.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .autodiff import add, constant, conv2d
from .errors import ConfigError, ContractError, ShapeError


@dataclass
class NmfConfig:
    rank: int = 16
    iterations: int = 6
    epsilon: float = 1e-12   # guards both update denominators
    alpha: float = 0.9       # dictionary EMA coefficient


@dataclass
class NmfResult:
    W: np.ndarray            # (c, r) dictionary, nonnegative
    H: np.ndarray            # (r, k) coefficients, nonnegative
    M: np.ndarray            # (c, k) reconstruction W @ H
    residual_error: float    # Frobenius norm of X - M
    errors: list = field(default_factory=list)  # error after init and each round


class DictionaryState:
    """Persisted initial dictionary, updated only between batches."""

    def __init__(self, w0: np.ndarray):
        w0 = np.asarray(w0, dtype=np.float64)
        if w0.ndim != 2:
            raise ShapeError(f"dictionary must be 2D, got shape {w0.shape}")
        if w0.min() < 0:
            raise ContractError("dictionary init must be nonnegative")
        self.w0 = w0.copy()

    @classmethod
    def init_random(cls, channels: int, rank: int, rng) -> "DictionaryState":
        # strictly positive draw in (0,1]: zero atoms would stay dead under
        # multiplicative updates
        return cls(1.0 - rng.random((channels, rank)))


def nmf_factorize(X, w0, cfg: NmfConfig, h0=None) -> NmfResult:
    """Factorize a nonnegative matrix X (c,k) as W @ H with W init w0.

    Runs `cfg.iterations` rounds of multiplicative updates, H first then W
    within each round, both denominators guarded by cfg.epsilon:

        H <- H * (W^T X) / (W^T W H + eps)
        W <- W * (X H^T) / (W H H^T + eps)

    H starts from `h0` when given, else from all-ones, which keeps the solve
    a pure function of (X, w0, cfg). Nonnegativity of W and H is preserved by
    construction and the reconstruction error never increases (up to float
    rounding introduced by the epsilon guard).
    """
    X = np.asarray(X, dtype=np.float64)
    W = np.array(w0, dtype=np.float64)
    if X.ndim != 2 or W.ndim != 2:
        raise ShapeError(f"nmf operands must be 2D, got X {X.shape}, W0 {W.shape}")
    c, k = X.shape
    if cfg.rank > c:
        raise ConfigError(f"rank {cfg.rank} exceeds channel dimension {c}")
    if cfg.iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {cfg.iterations}")
    if W.shape != (c, cfg.rank):
        raise ShapeError(f"dictionary shape {W.shape} does not match ({c},{cfg.rank})")
    if X.min() < 0:
        raise ContractError("nmf input X must be nonnegative")
    if W.min() < 0:
        raise ContractError("nmf dictionary init must be nonnegative")
    if h0 is None:
        H = np.ones((cfg.rank, k), dtype=np.float64)
    else:
        H = np.array(h0, dtype=np.float64)
        if H.shape != (cfg.rank, k):
            raise ShapeError(f"h0 shape {H.shape} does not match ({cfg.rank},{k})")
        if H.min() < 0:
            raise ContractError("nmf h0 must be nonnegative")

    eps = cfg.epsilon
    errors = [float(np.linalg.norm(X - W @ H))]
    for _ in range(cfg.iterations):
        H *= (W.T @ X) / (W.T @ W @ H + eps)
        W *= (X @ H.T) / (W @ (H @ H.T) + eps)
        errors.append(float(np.linalg.norm(X - W @ H)))
    M = W @ H
    return NmfResult(W=W, H=H, M=M, residual_error=errors[-1], errors=errors)


def dictionary_ema_update(state: DictionaryState, w_mean, alpha: float) -> DictionaryState:
    """Blend the batch-averaged converged dictionary into the persisted init."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0,1], got {alpha}")
    w_mean = np.asarray(w_mean, dtype=np.float64)
    if w_mean.shape != state.w0.shape:
        raise ShapeError(f"dictionary mean shape {w_mean.shape} != {state.w0.shape}")
    if w_mean.min() < 0:
        raise ContractError("dictionary mean must be nonnegative")
    state.w0 = alpha * state.w0 + (1.0 - alpha) * w_mean
    return state


def aim_forward(tape, z_nodes, store, state: DictionaryState, cfg: NmfConfig, frozen=None):
    """Mine shared structure from a group of feature nodes.

    Each input is reduced by a fixed 1x1 conv and rectified, the group is
    concatenated column-wise and factorized against state.w0, and the
    reconstruction slices are mapped back per input through the trainable
    residual conv:  out_i = z_i + conv_res(M_i).

    `frozen` substitutes a previously computed NmfResult for the solve (used
    by gradient checking, where the factorization must not move between
    evaluations). Returns (list of output nodes, NmfResult).
    """
    z_nodes = list(z_nodes)
    if not z_nodes:
        raise ContractError("aim_forward needs at least one input")
    shape = z_nodes[0].value.shape
    for z in z_nodes:
        if z.value.shape != shape:
            raise ShapeError("aim_forward inputs differ in shape")
    _, h, w = shape
    hw = h * w
    cp = store.weights["aim.red.w"].shape[0]

    if frozen is not None:
        result = frozen
    else:
        red_w = store.weights["aim.red.w"]
        red_b = store.weights["aim.red.b"]
        xs = []
        for z in z_nodes:
            a = kernels.conv2d_forward(np.ascontiguousarray(z.value), red_w, red_b, 1, 0)
            xs.append(np.maximum(a, 0.0).reshape(cp, hw))
        result = nmf_factorize(np.concatenate(xs, axis=1), state.w0, cfg)

    res_w = tape.param("aim.res.w")
    res_b = tape.param("aim.res.b")
    outs = []
    for i, z in enumerate(z_nodes):
        m_i = result.M[:, i * hw:(i + 1) * hw].reshape(cp, h, w)
        outs.append(add(tape, z, conv2d(tape, constant(m_i), res_w, res_b, stride=1, pad=0)))
    return outs, result


def best_rank1_error_2x2(X) -> float:
    """Analytic best rank-1 approximation error of a 2x2 matrix.

    Independent oracle for the factorizer: the optimal error equals the
    second singular value, computed here in closed form from the eigenvalues
    of X^T X (quadratic formula, no iterative solver involved).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (2, 2):
        raise ShapeError(f"oracle is specific to 2x2 inputs, got {X.shape}")
    g = X.T @ X
    tr = g[0, 0] + g[1, 1]
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    disc = max(tr * tr / 4.0 - det, 0.0)
    lam_min = tr / 2.0 - np.sqrt(disc)
    return float(np.sqrt(max(lam_min, 0.0)))
