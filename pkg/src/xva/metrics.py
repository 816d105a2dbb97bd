"""Heatmap evaluation: KLD / SIM / NSS plus point-annotation rendering.

Conventions, fixed here once for the whole package:
  * KLD treats the ground truth as Q and the prediction as P, i.e. it
    integrates Q log(Q/P) over pixels after normalising both maps to sum 1.
  * NSS standardises the prediction with the population (1/n) deviation and
    averages at the annotated points (nearest pixel); a constant map scores 0.
  * Point annotations are (x, y) with x the column, 0-indexed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EvaluationError

EPS = 1e-10


def points_to_heatmap(points, h: int, w: int, sigma: float) -> np.ndarray:
    """Render annotation points as a peak-normalised sum of Gaussians.

    Each point contributes exp(-((x-x0)^2+(y-y0)^2)/(2 sigma^2)); the summed
    map is rescaled so its maximum is 1. No points yields the zero map.
    """
    if sigma <= 0:
        raise DataError(f"sigma must be positive, got {sigma}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return np.zeros((h, w))
    for x, y in pts:
        if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
            raise DataError(f"annotation point ({x},{y}) outside {w}x{h} bounds")
    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    out = np.zeros((h, w))
    inv = 1.0 / (2.0 * sigma * sigma)
    for x, y in pts:
        out += np.exp(-((xx - x) ** 2 + (yy - y) ** 2) * inv)
    return out / out.max()


def _normalize_pair(prediction, gt_map):
    p = np.asarray(prediction, dtype=np.float64)
    q = np.asarray(gt_map, dtype=np.float64)
    if p.shape != q.shape:
        raise EvaluationError(f"map shapes differ: {p.shape} vs {q.shape}")
    ps, qs = p.sum(), q.sum()
    if ps <= 0 or qs <= 0:
        raise EvaluationError("cannot normalise an all-zero map")
    return p / ps, q / qs


def kld(prediction, gt_map) -> float:
    """KL divergence of the ground truth from the prediction (lower is better)."""
    p, q = _normalize_pair(prediction, gt_map)
    return float(np.sum(q * np.log(q / (p + EPS) + EPS)))


def sim(prediction, gt_map) -> float:
    """Histogram intersection of the normalised maps, in [0,1] (higher is better)."""
    p, q = _normalize_pair(prediction, gt_map)
    return float(np.minimum(p, q).sum())


def nss(prediction, points) -> float:
    """Mean standardised prediction value at the annotated points."""
    p = np.asarray(prediction, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise EvaluationError("NSS needs at least one annotated point")
    h, w = p.shape
    std = p.std()
    if std == 0:
        return 0.0
    z = (p - p.mean()) / std
    vals = []
    for x, y in pts:
        xi = int(np.rint(x))
        yi = int(np.rint(y))
        if not (0 <= xi < w and 0 <= yi < h):
            raise DataError(f"annotation point ({x},{y}) outside {w}x{h} bounds")
        vals.append(z[yi, xi])
    return float(np.mean(vals))


@dataclass
class EvalItem:
    """One (image, affordance) evaluation pair, fully loaded."""
    image: np.ndarray          # (3,h,w) input for the predictor
    points: np.ndarray         # (n,2) annotation points in output coords
    affordance_id: int
    affordance: str
    image_id: str


@dataclass
class MetricReport:
    split: str
    n_evaluated: int
    n_skipped: int
    kld: float
    sim: float
    nss: float
    per_affordance: list = field(default_factory=list)  # (name, count, kld, sim, nss)

    def to_csv(self) -> str:
        lines = ["split,affordance,count,kld,sim,nss"]
        lines.append(f"{self.split},OVERALL,{self.n_evaluated},"
                     f"{self.kld:.6f},{self.sim:.6f},{self.nss:.6f}")
        for name, count, k, s, n in self.per_affordance:
            lines.append(f"{self.split},{name},{count},{k:.6f},{s:.6f},{n:.6f}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [
            f"evaluation report [{self.split}]",
            f"samples evaluated: {self.n_evaluated}   skipped: {self.n_skipped}",
            f"mean KLD {self.kld:.4f}   mean SIM {self.sim:.4f}   mean NSS {self.nss:.4f}",
            "",
            f"{'affordance':<16} {'count':>5} {'KLD':>8} {'SIM':>8} {'NSS':>8}",
        ]
        for name, count, k, s, n in self.per_affordance:
            lines.append(f"{name:<16} {count:>5} {k:>8.4f} {s:>8.4f} {n:>8.4f}")
        return "\n".join(lines) + "\n"


def evaluate_split(items, predictor, sigma: float, split="") -> MetricReport:
    """Score a predictor over loaded evaluation items.

    `predictor(item)` returns a nonnegative heatmap at the item's image
    resolution. Items without annotation points, or whose metrics degenerate
    (all-zero maps), are skipped and counted. Aggregation is an unweighted
    mean, overall and per affordance, so the result is order-independent.
    """
    per_aff = {}
    skipped = 0
    for item in items:
        if item.points.shape[0] == 0:
            skipped += 1
            continue
        h, w = item.image.shape[1], item.image.shape[2]
        try:
            pred = predictor(item)
            gt = points_to_heatmap(item.points, h, w, sigma)
            scores = (kld(pred, gt), sim(pred, gt), nss(pred, item.points))
        except EvaluationError:
            skipped += 1
            continue
        per_aff.setdefault(item.affordance, []).append(scores)

    if not any(per_aff.values()):
        raise EvaluationError(f"no evaluable samples in split {split!r}")

    rows = []
    all_scores = []
    for name in sorted(per_aff):
        arr = np.asarray(per_aff[name])
        all_scores.append(arr)
        rows.append((name, arr.shape[0], *(float(m) for m in arr.mean(axis=0))))
    stacked = np.concatenate(all_scores)
    mean_kld, mean_sim, mean_nss = (float(m) for m in stacked.mean(axis=0))
    return MetricReport(split=split, n_evaluated=int(stacked.shape[0]), n_skipped=skipped,
                        kld=mean_kld, sim=mean_sim, nss=mean_nss, per_affordance=rows)
