"""Wires backbone, invariance mining, adaptation convs, the shared head conv
and the shared classifier into the training and inference graphs.

The head conv and classifier exist once and are referenced by both branches,
so weight sharing is structural rather than copied. Inference runs the
first-person branch only; no groups or factorization are involved.
"""

from dataclasses import dataclass

import numpy as np

from . import aim
from .autodiff import ParamStore, Node, Tape, conv2d, constant, fc, gap, kaiming_uniform, mean_stack, relu
from .config import RunConfig
from .errors import ConfigError, ShapeError
from .rng import substream

DICT_KEY = "aim.dictionary.w0"


@dataclass
class ForwardOutputs:
    s: Node          # exocentric logits
    g: Node          # egocentric logits
    f_exo: Node      # pooled exocentric feature
    f_ego: Node      # pooled egocentric feature
    d_ego: Node      # egocentric head feature map (CAM input)
    nmf: "aim.NmfResult | None"


class CrossViewModel:
    """All trainable state plus the persisted dictionary."""

    def __init__(self, cfg: RunConfig, rng=None):
        self.cfg = cfg
        self.nmf_cfg = aim.NmfConfig(rank=cfg.rank, iterations=cfg.nmf_iters, alpha=cfg.nmf_alpha)
        self.store = ParamStore()
        self.dict_state = None
        self._build(rng if rng is not None else substream(cfg.seed, "init"))

    # backbone: three blocks of conv3x3 / relu / 2x2 stride-2 downsampling
    # conv, so spatial extent divides by 8 overall
    def _block_plan(self):
        c = self.cfg.channels
        return [max(1, c // 4), max(1, c // 2), c]

    def _backbone_prefixes(self):
        if self.cfg.share_backbone:
            return ("backbone", "backbone")
        return ("backbone_exo", "backbone_ego")

    def _build(self, rng):
        cfg = self.cfg

        def add_conv(name, cout, cin, k):
            self.store.add(f"{name}.w", kaiming_uniform(rng, (cout, cin, k, k)))
            self.store.add(f"{name}.b", np.zeros(cout))

        for prefix in dict.fromkeys(self._backbone_prefixes()):
            cin = 3
            for bi, cout in enumerate(self._block_plan()):
                add_conv(f"{prefix}.b{bi}.conv", cout, cin, 3)
                add_conv(f"{prefix}.b{bi}.pool", cout, cout, 2)
                cin = cout
        c = cfg.channels
        add_conv("aim.red", cfg.nmf_channels, c, 1)
        add_conv("aim.res", c, cfg.nmf_channels, 1)
        add_conv("ego.c1", c, c, 3)
        add_conv("ego.c2", c, c, 3)
        add_conv("head", cfg.head_dim, c, 3)
        self.store.add("fc.w", kaiming_uniform(rng, (cfg.n_classes, cfg.head_dim)))
        self.store.add("fc.b", np.zeros(cfg.n_classes))
        self.dict_state = aim.DictionaryState.init_random(cfg.nmf_channels, cfg.rank, rng)

    def _backbone(self, tape, image, prefix):
        expected = (3, self.cfg.image_size, self.cfg.image_size)
        if image.shape != expected:
            raise ShapeError(f"expected image of shape {expected}, got {image.shape}")
        x = constant(image)
        for bi in range(3):
            x = conv2d(tape, x, tape.param(f"{prefix}.b{bi}.conv.w"),
                       tape.param(f"{prefix}.b{bi}.conv.b"), stride=1, pad=1)
            x = relu(tape, x)
            x = conv2d(tape, x, tape.param(f"{prefix}.b{bi}.pool.w"),
                       tape.param(f"{prefix}.b{bi}.pool.b"), stride=2, pad=0)
        return x

    def _ego_path(self, tape, image):
        """backbone -> two adaptation convs -> shared head -> GAP -> shared fc."""
        _, ego_prefix = self._backbone_prefixes()
        z = self._backbone(tape, image, ego_prefix)
        f_map = conv2d(tape, z, tape.param("ego.c1.w"), tape.param("ego.c1.b"), stride=1, pad=1)
        f_map = conv2d(tape, f_map, tape.param("ego.c2.w"), tape.param("ego.c2.b"), stride=1, pad=1)
        d = conv2d(tape, f_map, tape.param("head.w"), tape.param("head.b"), stride=1, pad=1)
        f_vec = gap(tape, d)
        g = fc(tape, f_vec, tape.param("fc.w"), tape.param("fc.b"))
        return g, f_vec, d

    def forward_train(self, tape, group, frozen_nmf=None) -> ForwardOutputs:
        """Full two-branch training graph over one sample group."""
        exo_prefix, _ = self._backbone_prefixes()
        z_list = [self._backbone(tape, im, exo_prefix) for im in group.exo_images]
        if self.cfg.aim:
            f_list, nmf_res = aim.aim_forward(
                tape, z_list, self.store, self.dict_state, self.nmf_cfg, frozen=frozen_nmf)
        else:
            f_list, nmf_res = z_list, None
        d_list = [conv2d(tape, f, tape.param("head.w"), tape.param("head.b"), stride=1, pad=1)
                  for f in f_list]
        f_exo = gap(tape, mean_stack(tape, d_list))
        s = fc(tape, f_exo, tape.param("fc.w"), tape.param("fc.b"))
        g, f_ego, d_ego = self._ego_path(tape, group.ego_image)
        return ForwardOutputs(s=s, g=g, f_exo=f_exo, f_ego=f_ego, d_ego=d_ego, nmf=nmf_res)

    def forward_infer(self, image):
        """Egocentric-only inference: returns (logits, head feature map)."""
        tape = Tape(self.store)
        g, _, d = self._ego_path(tape, image)
        return g.value, d.value

    # --- persistence ---------------------------------------------------------

    def state_tensors(self) -> dict:
        state = dict(self.store.weights)
        state[DICT_KEY] = self.dict_state.w0
        return state

    def load_state(self, tensors: dict) -> None:
        expected = set(self.store.weights) | {DICT_KEY}
        got = set(tensors)
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ConfigError(f"checkpoint incompatible: missing {missing}, unexpected {extra}")
        for name, w in self.store.weights.items():
            if tensors[name].shape != w.shape:
                raise ConfigError(
                    f"checkpoint incompatible: {name} has shape {tensors[name].shape}, "
                    f"model wants {w.shape}")
            w[...] = tensors[name]
        if tensors[DICT_KEY].shape != self.dict_state.w0.shape:
            raise ConfigError(
                f"checkpoint incompatible: {DICT_KEY} has shape {tensors[DICT_KEY].shape}, "
                f"model wants {self.dict_state.w0.shape}")
        self.dict_state = aim.DictionaryState(tensors[DICT_KEY])
