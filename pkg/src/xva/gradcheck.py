"""Finite-difference verification of every primitive and the full objective.

Each check builds a scalar loss from one primitive (non-scalar outputs are
contracted against a fixed random projection) and compares analytic
gradients with central differences. The full-model check holds the
factorization fixed across evaluations, matching its constant-during-backprop
contract.
"""

import numpy as np

from .autodiff import (
    ParamStore,
    Tape,
    constant,
    conv2d,
    cross_entropy,
    fc,
    gap,
    grad_check,
    l2_distance,
    mul,
    relu,
    softmax_t,
    tsum,
)
from .config import RunConfig
from .data import SampleGroup
from .losses import acp_loss, kt_loss, total_loss, LossWeights
from .model import CrossViewModel
from .tensor import softmax_t as tensor_softmax


def _projected(tape, node, proj):
    return tsum(tape, mul(tape, node, constant(proj)))


def check_layers(seed: int) -> dict:
    """Max relative FD error per primitive, one random instance per call."""
    rng = np.random.default_rng(seed)
    fd_rng = np.random.default_rng(seed + 10_000)
    results = {}

    def run(name, store, loss_fn, params=None):
        err, _ = grad_check(loss_fn, store, coords_per_param=4, rng=fd_rng, params=params)
        results[name] = err

    store = ParamStore()
    store.add("x", rng.normal(size=(3, 8, 8)))
    store.add("w", 0.5 * rng.normal(size=(4, 3, 3, 3)))
    store.add("b", rng.normal(size=4))
    proj = rng.normal(size=(4, 4, 4))
    run("conv2d", store,
        lambda t: _projected(t, conv2d(t, t.param("x"), t.param("w"), t.param("b"),
                                       stride=2, pad=1), proj))

    store = ParamStore()
    store.add("x", rng.normal(size=20))
    proj = rng.normal(size=20)
    run("relu", store, lambda t: _projected(t, relu(t, t.param("x")), proj))

    store = ParamStore()
    store.add("x", rng.normal(size=6))
    store.add("w", rng.normal(size=(4, 6)))
    store.add("b", rng.normal(size=4))
    proj = rng.normal(size=4)
    run("fc", store,
        lambda t: _projected(t, fc(t, t.param("x"), t.param("w"), t.param("b")), proj))

    store = ParamStore()
    store.add("x", rng.normal(size=(3, 5, 5)))
    proj = rng.normal(size=3)
    run("gap", store, lambda t: _projected(t, gap(t, t.param("x")), proj))

    store = ParamStore()
    store.add("x", rng.normal(size=6))
    proj = rng.normal(size=6)
    run("softmax_t", store, lambda t: _projected(t, softmax_t(t, t.param("x"), 0.7), proj))

    store = ParamStore()
    store.add("x", rng.normal(size=5))
    run("cross_entropy", store, lambda t: cross_entropy(t, t.param("x"), 2))

    store = ParamStore()
    store.add("a", rng.normal(size=7))
    store.add("b", rng.normal(size=7))
    run("l2_distance", store, lambda t: l2_distance(t, t.param("a"), t.param("b")))
    run("kt_squared", store, lambda t: kt_loss(t, t.param("a"), t.param("b"), squared=True))

    store = ParamStore()
    store.add("s", rng.normal(size=5))
    store.add("g", rng.normal(size=5))
    # default variant detaches the target side, so only g carries gradient
    run("acp(target detached)", store,
        lambda t: acp_loss(t, t.param("s"), t.param("g"), 0.8), params=["g"])
    run("acp(both sides)", store,
        lambda t: acp_loss(t, t.param("s"), t.param("g"), 0.8, both_sides=True))
    return results


def _tiny_config(aim_on=True):
    return RunConfig(image_size=32, channels=8, nmf_channels=4, rank=3, head_dim=6,
                     n_classes=3, n_exo=2, aim=aim_on)


def check_full_objective(seed: int, aim_on=True, acp_both_sides=False) -> float:
    """FD check of the weighted three-part objective through the whole model.

    Detached sub-results must not move between finite-difference evaluations,
    so the factorization and (in the default variant) the target co-relation
    matrix are computed once at the base point and held fixed.
    """
    cfg = _tiny_config(aim_on)
    rng = np.random.default_rng(seed)
    model = CrossViewModel(cfg, rng=rng)
    group = SampleGroup(
        exo_images=[rng.uniform(0.0, 1.0, size=(3, 32, 32)) for _ in range(cfg.n_exo)],
        ego_image=rng.uniform(0.0, 1.0, size=(3, 32, 32)),
        label=1, affordance="", object_id="")
    weights = LossWeights(1.0, 0.5, 0.5, 1.0)

    base = model.forward_train(Tape(model.store), group)
    frozen = base.nmf if aim_on else None
    target = None
    if not acp_both_sides:
        p = tensor_softmax(base.s.value, weights.temperature)
        target = np.outer(p, p)

    def loss_fn(tape):
        out = model.forward_train(tape, group, frozen_nmf=frozen)
        loss, _ = total_loss(tape, out.s, out.g, out.f_exo, out.f_ego, group.label, weights,
                             acp_both_sides=acp_both_sides, acp_frozen_target=target)
        return loss

    err, _ = grad_check(loss_fn, model.store, coords_per_param=2,
                        rng=np.random.default_rng(seed + 20_000), skip_nonsmooth=True)
    return err


def run_suite(n_seeds=20) -> dict:
    """Worst relative error of every check across seeds 0..n_seeds-1."""
    worst = {}
    for seed in range(n_seeds):
        for name, err in check_layers(seed).items():
            worst[name] = max(worst.get(name, 0.0), err)
        for name, err in (
            ("full objective (mining on)", check_full_objective(seed, True)),
            ("full objective (mining off)", check_full_objective(seed, False)),
            ("full objective (both-sides)", check_full_objective(seed, True, acp_both_sides=True)),
        ):
            worst[name] = max(worst.get(name, 0.0), err)
    return worst
