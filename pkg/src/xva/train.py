"""Training loop orchestration, evaluation driver, and the ablation table."""

import os
from dataclasses import dataclass, replace

import numpy as np

from .aim import dictionary_ema_update
from .autodiff import Tape, backward, sgd_step
from .cam import compute_cam, postprocess
from .config import RunConfig, format_config, gt_sigma
from .data import AccessLog, load_eval_items, load_group, load_manifest, make_sample_groups
from .errors import ConfigError, ContractError, NumericError
from .fileio import read_checkpoint, write_checkpoint
from .losses import LossWeights, total_loss
from .metrics import MetricReport, evaluate_split
from .model import CrossViewModel
from .rng import substream

# ablation rows in conventional table order: none, singles, pairs, full
ABLATION_COMBOS = (
    (False, False, False),
    (True, False, False),
    (False, True, False),
    (False, False, True),
    (True, True, False),
    (True, False, True),
    (False, True, True),
    (True, True, True),
)


@dataclass
class TrainResult:
    model: CrossViewModel
    out_dir: str
    checkpoint_path: str
    history: list
    access_log: AccessLog


def _check_classes(manifest, cfg):
    if len(manifest.affordances) != cfg.n_classes:
        raise ConfigError(
            f"config says {cfg.n_classes} classes but dataset has "
            f"{len(manifest.affordances)} affordances: {manifest.affordances}")


def _epoch_lr(cfg, epoch):
    if cfg.lr_step_every > 0:
        return cfg.lr * cfg.lr_step_gamma ** (epoch // cfg.lr_step_every)
    return cfg.lr


def train(data_root, cfg: RunConfig, out_dir) -> TrainResult:
    """Train a model from scratch and leave checkpoints plus a loss log behind.

    The loop touches images and labels only; annotation files are never read
    (the returned AccessLog proves it). All randomness flows from cfg.seed
    through named substreams, so identical (seed, config, data) reproduce
    identical output bytes.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8") as f:
        f.write(format_config(cfg))

    log = AccessLog()
    manifest = load_manifest(data_root, cfg.split, cfg.seed)
    _check_classes(manifest, cfg)
    model = CrossViewModel(cfg)
    weights = LossWeights(cfg.lambda_cls, cfg.lambda_acp, cfg.lambda_kt, cfg.temperature)

    ckpt_path = os.path.join(out_dir, "model.xvc")
    write_checkpoint(ckpt_path, model.state_tensors())

    history = []
    kept_epochs = []
    for epoch in range(cfg.epochs):
        lr = _epoch_lr(cfg, epoch)
        aug_rng = substream(cfg.seed, "augment", epoch)
        groups = make_sample_groups(manifest, cfg.n_exo, cfg.seed, epoch)
        sums = np.zeros(4)
        for step, spec in enumerate(groups):
            sample = load_group(spec, cfg.image_size, aug_rng, log)
            tape = Tape(model.store)
            out = model.forward_train(tape, sample)
            loss, parts = total_loss(
                tape, out.s, out.g, out.f_exo, out.f_ego, sample.label, weights,
                use_acp=cfg.acp, use_kt=cfg.kt,
                acp_both_sides=cfg.acp_both_sides, kt_squared=cfg.kt_squared)
            if not np.isfinite(parts["total"]):
                raise NumericError(
                    f"non-finite loss at epoch {epoch} step {step}: "
                    f"cls={parts['cls']} acp={parts['acp']} kt={parts['kt']}")
            backward(tape, loss)
            sgd_step(model.store, lr)
            if cfg.aim and out.nmf is not None:
                # batch = one group, so the converged W is its own batch mean
                dictionary_ema_update(model.dict_state, out.nmf.W, cfg.nmf_alpha)
            sums += (parts["cls"], parts["acp"], parts["kt"], parts["total"])
        means = sums / max(len(groups), 1)
        history.append({"epoch": epoch, "cls": means[0], "acp": means[1],
                        "kt": means[2], "total": means[3]})

        epoch_path = os.path.join(out_dir, f"epoch_{epoch:03d}.xvc")
        write_checkpoint(epoch_path, model.state_tensors())
        kept_epochs.append(epoch_path)
        if len(kept_epochs) > 2:
            os.remove(kept_epochs.pop(0))
        write_checkpoint(ckpt_path, model.state_tensors())

    with open(os.path.join(out_dir, "loss_log.csv"), "w", encoding="utf-8") as f:
        f.write("epoch,L_cls,L_ACP,L_KT,total\n")
        for row in history:
            f.write(f"{row['epoch']},{row['cls']:.6f},{row['acp']:.6f},"
                    f"{row['kt']:.6f},{row['total']:.6f}\n")

    if log.annotation_reads != 0:
        raise ContractError(
            f"training read {log.annotation_reads} annotation files; "
            "supervision must come from affordance labels only")
    return TrainResult(model=model, out_dir=out_dir, checkpoint_path=ckpt_path,
                       history=history, access_log=log)


def model_predictor(model: CrossViewModel, cfg: RunConfig):
    """Wrap a trained model as an EvalItem -> heatmap callable."""
    fc_w = model.store.weights["fc.w"]

    def predict(item):
        _, d_map = model.forward_infer(item.image)
        raw = compute_cam(d_map, fc_w, item.affordance_id)
        heat = postprocess(raw, item.image.shape[1], item.image.shape[2],
                           affordance=item.affordance_id, image_id=item.image_id,
                           relu_first=cfg.cam_relu)
        return heat.map

    return predict


def evaluate(data_root, cfg: RunConfig, model: CrossViewModel, out_dir=None):
    """Evaluate on the test side of the configured split; optionally write reports."""
    log = AccessLog()
    manifest = load_manifest(data_root, cfg.split, cfg.seed)
    _check_classes(manifest, cfg)
    items = load_eval_items(manifest, cfg.image_size, log)
    report = evaluate_split(items, model_predictor(model, cfg), gt_sigma(cfg), split=cfg.split)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_metric_report(report, out_dir)
    return report, log


def write_metric_report(report: MetricReport, out_dir):
    base = os.path.join(out_dir, f"metrics_{report.split}")
    with open(base + ".csv", "w", encoding="utf-8") as f:
        f.write(report.to_csv())
    with open(base + ".txt", "w", encoding="utf-8") as f:
        f.write(report.to_text())


def load_model(cfg: RunConfig, checkpoint_path) -> CrossViewModel:
    model = CrossViewModel(cfg)
    model.load_state(read_checkpoint(checkpoint_path))
    return model


def ablate(data_root, base_cfg: RunConfig, out_dir):
    """Train and evaluate every on/off combination of the three components.

    All runs share the base seed; the output table has one row per
    combination with KLD/SIM/NSS columns for both splits.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for use_aim, use_acp, use_kt in ABLATION_COMBOS:
        tag = f"aim{int(use_aim)}_acp{int(use_acp)}_kt{int(use_kt)}"
        row = {"aim": use_aim, "acp": use_acp, "kt": use_kt}
        for split in ("seen", "unseen"):
            cfg = replace(base_cfg, aim=use_aim, acp=use_acp, kt=use_kt, split=split)
            run_dir = os.path.join(out_dir, "runs", f"{tag}_{split}")
            result = train(data_root, cfg, run_dir)
            report, _ = evaluate(data_root, cfg, result.model, out_dir=run_dir)
            row[f"{split}_kld"] = report.kld
            row[f"{split}_sim"] = report.sim
            row[f"{split}_nss"] = report.nss
        rows.append(row)

    with open(os.path.join(out_dir, "ablation.csv"), "w", encoding="utf-8") as f:
        f.write("aim,acp,kt,seen_kld,seen_sim,seen_nss,unseen_kld,unseen_sim,unseen_nss\n")
        for row in rows:
            f.write(f"{int(row['aim'])},{int(row['acp'])},{int(row['kt'])},"
                    f"{row['seen_kld']:.6f},{row['seen_sim']:.6f},{row['seen_nss']:.6f},"
                    f"{row['unseen_kld']:.6f},{row['unseen_sim']:.6f},{row['unseen_nss']:.6f}\n")
    return rows
