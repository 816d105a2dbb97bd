"""Command-line interface.

Exit codes: 0 success, 1 config/data/format error, 2 numeric failure.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import gradcheck as gradcheck_mod
from .aim import NmfConfig, nmf_factorize
from .cam import compute_cam, postprocess
from .config import RunConfig, format_config, parse_config
from .data import SynthConfig, generate_synthetic
from .errors import ConfigError, NumericError, XvaError
from .fileio import read_ppm, read_tensor, write_pgm, write_tensor
from .train import ablate, evaluate, load_model, train


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(path)


def cmd_synth(args):
    cfg = SynthConfig(n_affordances=args.n_affordances, n_objects=args.n_objects,
                      images_per_object=args.images_per, size=args.size, seed=args.seed)
    counts = generate_synthetic(cfg, args.out)
    print(f"wrote {counts['exo']} exocentric and {counts['ego']} egocentric "
          f"images under {args.out}")
    return 0


def cmd_train(args):
    cfg = _load_config(args.config)
    result = train(args.data, cfg, args.out)
    final = result.history[-1]["total"] if result.history else float("nan")
    print(f"trained {cfg.epochs} epochs, final mean loss {final:.4f}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def cmd_eval(args):
    cfg = _load_config(args.config)
    if args.split:
        cfg = replace(cfg, split=args.split)
    model = load_model(cfg, args.checkpoint)
    report, _ = evaluate(args.data, cfg, model, out_dir=args.out)
    print(report.to_text())
    return 0


def cmd_cam(args):
    cfg = _load_config(args.config)
    model = load_model(cfg, args.checkpoint)
    img = read_ppm(args.image)
    side = img.shape[1]
    if side < cfg.image_size:
        raise ConfigError(f"image side {side} smaller than configured {cfg.image_size}")
    off = (side - cfg.image_size) // 2
    img = np.ascontiguousarray(img[:, off:off + cfg.image_size, off:off + cfg.image_size])
    _, d_map = model.forward_infer(img)
    raw = compute_cam(d_map, model.store.weights["fc.w"], args.affordance)
    heat = postprocess(raw, cfg.image_size, cfg.image_size,
                       affordance=args.affordance, image_id=os.path.basename(args.image),
                       relu_first=cfg.cam_relu)
    write_tensor(args.out + ".xvt", heat.map)
    write_pgm(args.out + ".pgm", heat.map)
    print(f"wrote {args.out}.xvt and {args.out}.pgm")
    return 0


def cmd_nmf(args):
    X = read_tensor(args.input)
    if X.ndim != 2:
        raise ConfigError(f"nmf input must be a 2D tensor, got shape {X.shape}")
    cfg = NmfConfig(rank=args.rank, iterations=args.iters)
    rng = np.random.default_rng(args.seed)
    w0 = 1.0 - rng.random((X.shape[0], args.rank))
    result = nmf_factorize(X, w0, cfg)
    os.makedirs(args.out, exist_ok=True)
    write_tensor(os.path.join(args.out, "W.xvt"), result.W)
    write_tensor(os.path.join(args.out, "H.xvt"), result.H)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as f:
        f.write(f"input {args.input} shape {X.shape[0]}x{X.shape[1]} "
                f"rank {args.rank} iterations {args.iters} seed {args.seed}\n")
        for i, err in enumerate(result.errors):
            f.write(f"iter {i:3d}  error {err:.9f}\n")
    print(f"final reconstruction error {result.residual_error:.6f}")
    return 0


def cmd_gradcheck(args):
    worst = gradcheck_mod.run_suite(args.seeds)
    width = max(len(k) for k in worst)
    failed = False
    for name in sorted(worst):
        status = "ok" if worst[name] <= args.tol else "FAIL"
        if status == "FAIL":
            failed = True
        print(f"{name:<{width}}  max rel err {worst[name]:.3e}  {status}")
    if failed:
        print(f"gradient check exceeded tolerance {args.tol}", file=sys.stderr)
        return 2
    return 0


def cmd_ablate(args):
    cfg = _load_config(args.config)
    rows = ablate(args.data, cfg, args.out)
    print(f"wrote {len(rows)} ablation rows to {os.path.join(args.out, 'ablation.csv')}")
    return 0


def cmd_config(args):
    print(format_config(_load_config(args.config)), end="")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="xva", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic cross-view dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--n-objects", type=int, default=10)
    s.add_argument("--n-affordances", type=int, default=5)
    s.add_argument("--images-per", type=int, default=6)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train a model on a dataset directory")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--config")
    s.add_argument("--split", choices=("seen", "unseen"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("cam", help="write the activation heatmap for one image")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--config")
    s.add_argument("--image", required=True)
    s.add_argument("--affordance", type=int, required=True)
    s.add_argument("--out", required=True, help="output path prefix")
    s.set_defaults(func=cmd_cam)

    s = sub.add_parser("nmf", help="factorize a .xvt matrix")
    s.add_argument("--input", required=True)
    s.add_argument("--rank", type=int, required=True)
    s.add_argument("--iters", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_nmf)

    s = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    s.add_argument("--seeds", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("ablate", help="train/evaluate all component on/off combinations")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("config", help="print the effective configuration")
    s.add_argument("--config")
    s.set_defaults(func=cmd_config)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 2
    except XvaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
