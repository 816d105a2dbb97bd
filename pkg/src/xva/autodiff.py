"""Minimal reverse-mode automatic differentiation on a tape.

Every primitive appends one record (output node, input nodes, backward
closure) to the Tape; `backward` walks the records in exact reverse order
and accumulates gradients, then flushes parameter gradients into the
owning ParamStore. Values are float64 ndarrays throughout; forward passes
are pure numpy and therefore bit-reproducible for identical inputs.
"""

import numpy as np

from . import kernels
from .errors import ContractError, NumericError, ParameterError, ShapeError


class ParamStore:
    """Named weights plus parallel same-shape gradient buffers."""

    def __init__(self):
        self.weights = {}
        self.grads = {}

    def add(self, name: str, value) -> None:
        if name in self.weights:
            raise ContractError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=np.float64)
        self.weights[name] = arr
        self.grads[name] = np.zeros_like(arr)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def names(self):
        return list(self.weights)

    def __contains__(self, name):
        return name in self.weights


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "grad", "name", "gradless")

    def __init__(self, value, name=None, gradless=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.name = name
        self.gradless = gradless


class Tape:
    """Ordered record of primitive applications, bound to one ParamStore."""

    def __init__(self, store: ParamStore):
        self.store = store
        self._records = []
        self._param_nodes = {}

    def param(self, name: str) -> Node:
        """Leaf node for a stored parameter; one node per name per tape."""
        node = self._param_nodes.get(name)
        if node is None:
            node = Node(self.store.weights[name], name=name)
            self._param_nodes[name] = node
        return node

    def record(self, out: Node, inputs, backward_fn) -> None:
        self._records.append((out, tuple(inputs), backward_fn))

    def __len__(self):
        return len(self._records)


def constant(value) -> Node:
    """Untracked node; no gradient ever flows into it."""
    return Node(value, gradless=True)


def backward(tape: Tape, loss: Node) -> None:
    """Populate parameter gradients of a scalar loss recorded on `tape`.

    Parameters that never appeared on the tape keep their (zero) gradient.
    """
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    loss.grad = np.ones_like(loss.value)
    for out, inputs, backward_fn in reversed(tape._records):
        if out.grad is None:
            continue
        grads = backward_fn(out.grad)
        for node, g in zip(inputs, grads):
            if g is None or node.gradless:
                continue
            if node.grad is None:
                node.grad = g
            else:
                node.grad = node.grad + g
    for name, node in tape._param_nodes.items():
        if node.grad is not None:
            tape.store.grads[name] += node.grad


# --- primitives -------------------------------------------------------------

def add(tape, a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value + b.value)
    tape.record(out, (a, b), lambda g: (g, g))
    return out


def sub(tape, a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"sub shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value - b.value)
    tape.record(out, (a, b), lambda g: (g, -g))
    return out


def mul(tape, a: Node, b: Node) -> Node:
    """Elementwise product."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value * b.value)
    av, bv = a.value, b.value
    tape.record(out, (a, b), lambda g: (g * bv, g * av))
    return out


def scale(tape, x: Node, c: float) -> Node:
    out = Node(x.value * c)
    tape.record(out, (x,), lambda g: (g * c,))
    return out


def tsum(tape, x: Node) -> Node:
    """Sum of all elements, as a scalar node."""
    out = Node(x.value.sum())
    shape = x.value.shape
    tape.record(out, (x,), lambda g: (np.broadcast_to(g, shape).copy(),))
    return out


def log_shift(tape, x: Node, eps: float) -> Node:
    """log(x + eps); the shift keeps exact zeros finite."""
    shifted = x.value + eps
    if shifted.min() <= 0:
        raise NumericError("log_shift input must stay positive after the shift")
    out = Node(np.log(shifted))
    tape.record(out, (x,), lambda g: (g / shifted,))
    return out


def relu(tape, x: Node) -> Node:
    """max(x,0); the subgradient at exactly 0 is taken as 0."""
    out = Node(np.maximum(x.value, 0.0))
    mask = x.value > 0.0
    tape.record(out, (x,), lambda g: (g * mask,))
    return out


def conv2d(tape, x: Node, weight: Node, bias: Node, stride=1, pad=0) -> Node:
    """2D cross-correlation of (cin,h,w) with (cout,cin,kh,kw) plus bias."""
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    if pad < 0:
        raise ParameterError(f"pad must be >= 0, got {pad}")
    xv, wv, bv = x.value, weight.value, bias.value
    if xv.ndim != 3 or wv.ndim != 4:
        raise ShapeError(f"conv2d wants x (cin,h,w) and weight (cout,cin,kh,kw), got {xv.shape}, {wv.shape}")
    cin, h, win = xv.shape
    cout, wcin, kh, kw = wv.shape
    if wcin != cin:
        raise ShapeError(f"conv2d channel mismatch: input {cin}, kernel {wcin}")
    if bv.shape != (cout,):
        raise ShapeError(f"conv2d bias must be ({cout},), got {bv.shape}")
    if h + 2 * pad < kh or win + 2 * pad < kw:
        raise ShapeError(f"kernel {kh}x{kw} does not fit padded input {h + 2 * pad}x{win + 2 * pad}")
    xc = np.ascontiguousarray(xv)
    out = Node(kernels.conv2d_forward(xc, np.ascontiguousarray(wv), np.ascontiguousarray(bv), stride, pad))
    need_x = not x.gradless

    def bwd(g):
        g = np.ascontiguousarray(g)
        gx = kernels.conv2d_backward_input(g, wv, stride, pad, h, win) if need_x else None
        gw = kernels.conv2d_backward_weight(g, xc, kh, kw, stride, pad)
        gb = g.sum(axis=(1, 2))
        return (gx, gw, gb)

    tape.record(out, (x, weight, bias), bwd)
    return out


def fc(tape, x: Node, weight: Node, bias: Node) -> Node:
    """Fully connected layer: weight (n,d) @ x (d,) + bias (n,)."""
    xv, wv, bv = x.value, weight.value, bias.value
    if xv.ndim != 1 or wv.ndim != 2 or wv.shape[1] != xv.shape[0] or bv.shape != (wv.shape[0],):
        raise ShapeError(f"fc shape mismatch: x {xv.shape}, weight {wv.shape}, bias {bv.shape}")
    out = Node(wv @ xv + bv)
    tape.record(out, (x, weight, bias), lambda g: (wv.T @ g, np.outer(g, xv), g))
    return out


def gap(tape, x: Node) -> Node:
    """Global average pooling (c,h,w) -> (c,)."""
    if x.value.ndim != 3:
        raise ShapeError(f"gap expects (c,h,w), got {x.value.shape}")
    c, h, w = x.value.shape
    out = Node(x.value.mean(axis=(1, 2)))
    inv = 1.0 / (h * w)
    tape.record(out, (x,), lambda g: (np.broadcast_to(g[:, None, None] * inv, (c, h, w)).copy(),))
    return out


def mean_stack(tape, xs) -> Node:
    """Mean over a list of same-shape nodes."""
    xs = list(xs)
    if not xs:
        raise ContractError("mean_stack needs at least one node")
    shape = xs[0].value.shape
    for x in xs:
        if x.value.shape != shape:
            raise ShapeError("mean_stack inputs differ in shape")
    inv = 1.0 / len(xs)
    out = Node(sum(x.value for x in xs) * inv)
    tape.record(out, tuple(xs), lambda g: tuple(g * inv for _ in xs))
    return out


def softmax_t(tape, logits: Node, temperature=1.0) -> Node:
    """Temperature softmax over a logit vector node."""
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    z = logits.value / temperature
    z = z - z.max()
    e = np.exp(z)
    p = e / e.sum()
    out = Node(p)

    def bwd(g):
        return ((p * (g - np.dot(p, g))) / temperature,)

    tape.record(out, (logits,), bwd)
    return out


def outer(tape, p: Node) -> Node:
    """Outer product p p^T of a vector with itself."""
    if p.value.ndim != 1:
        raise ShapeError(f"outer expects a vector, got {p.value.shape}")
    pv = p.value
    out = Node(np.outer(pv, pv))
    tape.record(out, (p,), lambda g: ((g + g.T) @ pv,))
    return out


def cross_entropy(tape, logits: Node, label: int) -> Node:
    """-log softmax(logits)[label], computed stably."""
    z = logits.value
    if z.ndim != 1:
        raise ShapeError(f"cross_entropy expects a logit vector, got {z.shape}")
    if not 0 <= label < z.shape[0]:
        raise ParameterError(f"label {label} out of range for {z.shape[0]} classes")
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    out = Node(lse - z[label])
    p = np.exp(z - lse)

    def bwd(g):
        gz = p.copy()
        gz[label] -= 1.0
        return (g * gz,)

    tape.record(out, (logits,), bwd)
    return out


def l2_distance(tape, a: Node, b: Node) -> Node:
    """Euclidean norm ||a - b|| of two vectors (zero-safe gradient)."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"l2_distance shape mismatch: {a.value.shape} vs {b.value.shape}")
    d = a.value - b.value
    n = float(np.sqrt((d * d).sum()))
    out = Node(n)

    def bwd(g):
        if n == 0.0:
            z = np.zeros_like(d)
            return (z, z.copy())
        gd = g * d / n
        return (gd, -gd)

    tape.record(out, (a, b), bwd)
    return out


def stop_gradient(x: Node) -> Node:
    """Detach a node: same value, no gradient path."""
    return Node(x.value.copy(), gradless=True)


# --- training utilities ------------------------------------------------------

def sgd_step(store: ParamStore, lr: float) -> None:
    """w <- w - lr * g for every parameter, then zero the gradients."""
    for name, w in store.weights.items():
        g = store.grads[name]
        w -= lr * g
        if not np.isfinite(w).all():
            raise NumericError(f"parameter {name!r} became non-finite after sgd step")
        g[...] = 0.0


def grad_check(loss_fn, store: ParamStore, coords_per_param=4, step=1e-5, rng=None,
               params=None, skip_nonsmooth=False):
    """Compare analytic gradients with central finite differences.

    `loss_fn(tape)` must rebuild the same scalar loss from the store's current
    weights on every call (close over fixed inputs; hold any internal
    factorization fixed, since detached sub-results are deliberately not
    differentiated). Returns (max_rel_err, per_param dict), where the relative
    error is |a-n| / max(|a|,|n|,1e-8) maximised over sampled coordinates.

    With `skip_nonsmooth`, a coordinate whose forward and backward one-sided
    quotients disagree is probed again at half the step: smooth curvature
    shrinks the asymmetry proportionally (and the half-step central estimate
    is kept), while a rectifier kink inside the probe window keeps it flat,
    in which case the coordinate is rejected and resampled. Subgradients at
    kinks are genuinely not comparable against difference quotients.
    """
    rng = rng or np.random.default_rng(0)
    store.zero_grads()
    tape = Tape(store)
    loss = loss_fn(tape)
    backward(tape, loss)
    analytic = {k: v.copy() for k, v in store.grads.items()}
    store.zero_grads()

    def eval_loss():
        return float(loss_fn(Tape(store)).value)

    base = eval_loss()

    def probe(flat, i, h):
        """(central estimate, relative fwd/bwd asymmetry) at step h."""
        orig = flat[i]
        flat[i] = orig + h
        lp = eval_loss()
        flat[i] = orig - h
        lm = eval_loss()
        flat[i] = orig
        fwd = (lp - base) / h
        bwd = (base - lm) / h
        asym = abs(fwd - bwd) / max(abs(fwd), abs(bwd), 1e-8)
        return (lp - lm) / (2.0 * h), asym

    per_param = {}
    for name in params if params is not None else sorted(store.weights):
        flat = store.weights[name].reshape(-1)
        aflat = analytic[name].reshape(-1)
        k = min(coords_per_param, flat.size)
        order = rng.permutation(flat.size)
        worst = 0.0
        taken = 0
        for i in order:
            if taken >= k:
                break
            numeric, asym = probe(flat, i, step)
            if skip_nonsmooth and asym > 1e-4:
                half, half_asym = probe(flat, i, step / 2.0)
                if half_asym > 0.75 * asym:
                    continue
                numeric = half
            rel = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-8)
            worst = max(worst, rel)
            taken += 1
        per_param[name] = worst
    return (max(per_param.values()) if per_param else 0.0), per_param


def kaiming_uniform(rng, shape) -> np.ndarray:
    """Fan-in scaled uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in))."""
    fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else int(shape[0])
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)
