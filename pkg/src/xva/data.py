"""Synthetic cross-view dataset, directory ingestion and group sampling.

Directory layout (mirrors a view/affordance/object hierarchy so real data
can be converted in later):

    root/exocentric/<affordance>/<object>/exo_###.ppm
    root/egocentric/<affordance>/<object>/ego_###.ppm
    root/annotations/<affordance>/<object>/ego_###.csv   lines "x,y"

Images are stored with a crop margin of size//8 on each side; training takes
random crops back to `size` (plus horizontal flips) and evaluation takes the
center crop. All file reads go through an AccessLog so the trainer can prove
it never touched an annotation file.
"""

import colorsys
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .fileio import read_ppm, write_ppm
from .metrics import EvalItem
from .rng import substream

EXO_DIR = "exocentric"
EGO_DIR = "egocentric"
ANN_DIR = "annotations"

# part-region anchors cycled over affordance ids
_ANCHORS = ("left", "right", "top", "bottom", "center")

_AFFORDANCE_NAMES = ("hold", "press", "lift", "pour", "cut",
                     "swing", "scoop", "twist", "brush", "carry")


@dataclass
class AccessLog:
    """Counts file reads per category; the weak-supervision proof hinges on it."""
    image_reads: int = 0
    annotation_reads: int = 0


@dataclass
class SynthConfig:
    n_affordances: int = 5
    n_objects: int = 10
    images_per_object: int = 6   # per view
    size: int = 64               # training crop size; stored side adds size//8 margin
    occluder_count: tuple = (1, 3)
    occluder_scale: tuple = (0.10, 0.18)  # radius as a fraction of the stored side
    points_per_image: int = 6
    seed: int = 0

    def validate(self):
        if self.n_objects < self.n_affordances:
            raise ConfigError(f"need n_objects >= n_affordances, got {self.n_objects} < {self.n_affordances}")
        if self.size < 32:
            raise ConfigError(f"image size must be >= 32, got {self.size}")
        if self.images_per_object < 1 or self.points_per_image < 1:
            raise ConfigError("images_per_object and points_per_image must be >= 1")
        return self

    @property
    def stored_side(self):
        return self.size + self.size // 8


@dataclass
class SampleGroup:
    """One training unit: a group of exocentric images plus one egocentric."""
    exo_images: list
    ego_image: np.ndarray
    label: int
    affordance: str
    object_id: str


@dataclass
class ManifestEntry:
    view: str
    affordance: str
    object_id: str
    image_path: str
    annotation_path: str | None = None


@dataclass
class DatasetManifest:
    root: str
    split_mode: str
    seed: int
    affordances: list
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def affordance_id(self, name):
        return self.affordances.index(name)

    def _objects(self, entries):
        return {e.object_id for e in entries}

    def check_invariants(self):
        train_obj = self._objects(self.train)
        test_obj = self._objects(self.test)
        if self.split_mode == "unseen":
            if train_obj & test_obj:
                raise DataError(f"unseen split leaked objects: {sorted(train_obj & test_obj)}")
        elif not test_obj <= train_obj:
            raise DataError(f"seen split has test-only objects: {sorted(test_obj - train_obj)}")
        return self


# --- synthetic generation ----------------------------------------------------

def _affordance_name(i, n):
    if n <= len(_AFFORDANCE_NAMES):
        return _AFFORDANCE_NAMES[i]
    return f"aff{i:02d}"


def _marker_color(aff_id, n_aff):
    return np.array(colorsys.hsv_to_rgb(aff_id / n_aff, 0.95, 0.95))


def _body_color(aff_id, obj_id=0):
    """Muted body fill, shared across an affordance's objects (slight per-object
    shade jitter). A deliberate shortcut: body colour predicts the label in
    clean first-person images, but the exocentric clutter reuses the same
    palette, so only the marker stays reliable across views."""
    hue = (aff_id * 0.61803 + 0.37) % 1.0
    value = 0.45 + 0.02 * ((obj_id * 37) % 10)
    return np.array(colorsys.hsv_to_rgb(hue, 0.35, value))


def _marker_rect(bx, by, bw, bh, anchor):
    if anchor == "left":
        return bx, by, max(2, int(bw * 0.32)), bh
    if anchor == "right":
        mw = max(2, int(bw * 0.32))
        return bx + bw - mw, by, mw, bh
    if anchor == "top":
        return bx, by, bw, max(2, int(bh * 0.32))
    if anchor == "bottom":
        mh = max(2, int(bh * 0.32))
        return bx, by + bh - mh, bw, mh
    mw, mh = max(2, int(bw * 0.44)), max(2, int(bh * 0.44))
    return bx + (bw - mw) // 2, by + (bh - mh) // 2, mw, mh


def render_scene(rng, cfg: SynthConfig, body_color, marker_color, anchor, exocentric):
    """Draw one scene; returns (image (3,S,S), marker rect, points (n,2)).

    Egocentric scenes show the clean object; exocentric scenes are smaller
    in frame and overlaid with interactor blobs near the part region.
    """
    side = cfg.stored_side
    margin = cfg.size // 8
    img = np.empty((3, side, side))
    base = rng.uniform(0.06, 0.18, size=3)
    img[:] = base[:, None, None]
    img += rng.normal(0.0, 0.015, size=img.shape)

    usable = side - 2 * margin
    lo, hi = (0.30, 0.48) if exocentric else (0.52, 0.74)
    bw = int(rng.uniform(lo, hi) * usable)
    bh = int(rng.uniform(lo, hi) * usable)
    bw, bh = max(bw, 10), max(bh, 10)
    bx = int(rng.integers(margin, side - margin - bw + 1))
    by = int(rng.integers(margin, side - margin - bh + 1))
    img[:, by:by + bh, bx:bx + bw] = body_color[:, None, None]

    mx, my, mw, mh = _marker_rect(bx, by, bw, bh, anchor)
    img[:, my:my + mh, mx:mx + mw] = marker_color[:, None, None]
    # stripe texture: every other 2px row darkened
    rows = np.arange(my, my + mh)
    dark = rows[(rows // 2) % 2 == 1]
    img[:, dark, mx:mx + mw] = (marker_color * 0.55)[:, None, None]

    if exocentric:
        yy = np.arange(side)[:, None]
        xx = np.arange(side)[None, :]
        n_occ = int(rng.integers(cfg.occluder_count[0], cfg.occluder_count[1] + 1))
        for _ in range(n_occ):
            cx = mx + mw / 2 + rng.normal(0.0, 0.6 * max(mw, mh))
            cy = my + mh / 2 + rng.normal(0.0, 0.6 * max(mw, mh))
            r = rng.uniform(*cfg.occluder_scale) * side
            ratio = rng.uniform(0.6, 1.4)
            color = np.array(colorsys.hsv_to_rgb(rng.uniform(0, 1), rng.uniform(0.15, 0.45),
                                                 rng.uniform(0.35, 0.75)))
            mask = ((xx - cx) / r) ** 2 + ((yy - cy) / (r * ratio)) ** 2 <= 1.0
            img[:, mask] = color[:, None]

    points = np.stack([rng.integers(mx, mx + mw, size=cfg.points_per_image),
                       rng.integers(my, my + mh, size=cfg.points_per_image)], axis=1)
    return np.clip(img, 0.0, 1.0), (mx, my, mw, mh), points


def generate_synthetic(cfg: SynthConfig, root) -> dict:
    """Write a full synthetic dataset tree; deterministic under cfg.seed."""
    cfg.validate()
    rng = substream(cfg.seed, "synth")
    os.makedirs(root, exist_ok=True)
    counts = {"exo": 0, "ego": 0}
    for obj in range(cfg.n_objects):
        aff_id = obj % cfg.n_affordances
        aff = _affordance_name(aff_id, cfg.n_affordances)
        obj_name = f"obj{obj:02d}"
        body = _body_color(obj)
        marker = _marker_color(aff_id, cfg.n_affordances)
        anchor = _ANCHORS[aff_id % len(_ANCHORS)]
        ego_dir = os.path.join(root, EGO_DIR, aff, obj_name)
        exo_dir = os.path.join(root, EXO_DIR, aff, obj_name)
        ann_dir = os.path.join(root, ANN_DIR, aff, obj_name)
        for d in (ego_dir, exo_dir, ann_dir):
            os.makedirs(d, exist_ok=True)
        for k in range(cfg.images_per_object):
            img, _, points = render_scene(rng, cfg, body, marker, anchor, exocentric=False)
            write_ppm(os.path.join(ego_dir, f"ego_{k:03d}.ppm"), img)
            with open(os.path.join(ann_dir, f"ego_{k:03d}.csv"), "w", encoding="utf-8") as f:
                for x, y in points:
                    f.write(f"{x},{y}\n")
            counts["ego"] += 1
        for k in range(cfg.images_per_object):
            img, _, _ = render_scene(rng, cfg, body, marker, anchor, exocentric=True)
            write_ppm(os.path.join(exo_dir, f"exo_{k:03d}.ppm"), img)
            counts["exo"] += 1
    with open(os.path.join(root, "synth.txt"), "w", encoding="utf-8") as f:
        f.write(f"n_affordances = {cfg.n_affordances}\n"
                f"n_objects = {cfg.n_objects}\n"
                f"images_per_object = {cfg.images_per_object}\n"
                f"size = {cfg.size}\n"
                f"points_per_image = {cfg.points_per_image}\n"
                f"seed = {cfg.seed}\n")
    return counts


# --- ingestion ---------------------------------------------------------------

def read_points(path, width, height, log: AccessLog | None = None) -> np.ndarray:
    """Parse an annotation CSV; every point must lie inside width x height."""
    if log is not None:
        log.annotation_reads += 1
    points = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'x,y', got {raw.strip()!r}")
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric coordinate {raw.strip()!r}") from None
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                raise DataError(f"{path}:{lineno}: point ({x},{y}) outside {width}x{height}")
            points.append((x, y))
    return np.asarray(points, dtype=np.float64).reshape(-1, 2)


def read_image(path, log: AccessLog | None = None) -> np.ndarray:
    if log is not None:
        log.image_reads += 1
    return read_ppm(path)


def _scan_view(root, view):
    """Collect {(affordance, object): [file paths]} for one view directory."""
    base = os.path.join(root, view)
    found = {}
    if not os.path.isdir(base):
        return found
    for aff in sorted(os.listdir(base)):
        aff_dir = os.path.join(base, aff)
        if not os.path.isdir(aff_dir):
            continue
        for obj in sorted(os.listdir(aff_dir)):
            obj_dir = os.path.join(aff_dir, obj)
            if not os.path.isdir(obj_dir):
                continue
            files = sorted(f for f in os.listdir(obj_dir) if f.endswith(".ppm"))
            if files:
                found[(aff, obj)] = [os.path.join(obj_dir, f) for f in files]
    return found


def load_manifest(root, split_mode="seen", seed=0) -> DatasetManifest:
    """Walk the dataset tree and produce a validated, seeded train/test split.

    Seen: egocentric images of every object are split between train and test.
    Unseen: objects themselves are partitioned per affordance; exocentric
    images of test objects are never used.
    """
    if split_mode not in ("seen", "unseen"):
        raise ConfigError(f"split mode must be 'seen' or 'unseen', got {split_mode!r}")
    exo = _scan_view(root, EXO_DIR)
    ego = _scan_view(root, EGO_DIR)
    if not exo and not ego:
        raise DataError(f"no dataset found under {root!r}")

    warnings = []
    keys = sorted(set(exo) | set(ego))
    pairs = []
    for key in keys:
        if key not in ego:
            warnings.append(f"object {key[1]} ({key[0]}): no egocentric images, excluded")
        elif key not in exo:
            warnings.append(f"object {key[1]} ({key[0]}): no exocentric images, excluded")
        else:
            pairs.append(key)
    if not pairs:
        raise DataError(f"no object has both views under {root!r}")

    affordances = sorted({aff for aff, _ in pairs})
    rng = substream(seed, "split")
    manifest = DatasetManifest(root=root, split_mode=split_mode, seed=seed,
                               affordances=affordances, warnings=warnings)

    def ann_path(aff, obj, image_path):
        stem = os.path.splitext(os.path.basename(image_path))[0]
        path = os.path.join(root, ANN_DIR, aff, obj, stem + ".csv")
        return path if os.path.isfile(path) else None

    def ego_entry(aff, obj, path):
        return ManifestEntry(EGO_DIR, aff, obj, path, ann_path(aff, obj, path))

    if split_mode == "seen":
        for aff, obj in pairs:
            manifest.train.extend(ManifestEntry(EXO_DIR, aff, obj, p) for p in exo[(aff, obj)])
            files = list(ego[(aff, obj)])
            rng.shuffle(files)
            n_test = len(files) // 2 if len(files) > 1 else 0
            if n_test == 0:
                warnings.append(f"object {obj} ({aff}): single egocentric image kept in train")
            for i, p in enumerate(files):
                entry = ego_entry(aff, obj, p)
                (manifest.test if i < n_test else manifest.train).append(entry)
    else:
        for aff in affordances:
            objs = sorted(obj for a, obj in pairs if a == aff)
            rng.shuffle(objs)
            n_test = len(objs) // 2 if len(objs) > 1 else 0
            if n_test == 0:
                warnings.append(f"affordance {aff}: single object, nothing held out")
            test_objs = set(objs[:n_test])
            for obj in objs:
                if obj in test_objs:
                    manifest.test.extend(ego_entry(aff, obj, p) for p in ego[(aff, obj)])
                else:
                    manifest.train.extend(ManifestEntry(EXO_DIR, aff, obj, p) for p in exo[(aff, obj)])
                    manifest.train.extend(ego_entry(aff, obj, p) for p in ego[(aff, obj)])
    return manifest.check_invariants()


# --- sampling and loading ----------------------------------------------------

@dataclass
class GroupSpec:
    """Paths for one training group, before any file is opened."""
    ego: ManifestEntry
    exo: list
    label: int
    affordance: str
    object_id: str


def make_sample_groups(manifest: DatasetManifest, n_exo: int, seed: int, epoch: int = 0):
    """One epoch's group sequence, deterministic under (seed, epoch).

    For every egocentric training image, draws n_exo exocentric images with
    the same affordance label without replacement; a pool is reshuffled only
    once exhausted mid-epoch.
    """
    if n_exo < 1:
        raise ConfigError(f"group size must be >= 1, got {n_exo}")
    rng = substream(seed, "sampler", epoch)
    ego_entries = [e for e in manifest.train if e.view == EGO_DIR]
    pools = {}
    for aff in manifest.affordances:
        pools[aff] = [e for e in manifest.train if e.view == EXO_DIR and e.affordance == aff]
    for aff in sorted({e.affordance for e in ego_entries}):
        if len(pools[aff]) < n_exo:
            raise ConfigError(
                f"affordance class '{aff}' has only {len(pools[aff])} exocentric "
                f"training images, need at least {n_exo}")

    order = list(range(len(ego_entries)))
    rng.shuffle(order)
    cursors = {aff: len(pool) for aff, pool in pools.items()}  # force initial shuffle
    groups = []
    for idx in order:
        ego = ego_entries[idx]
        pool = pools[ego.affordance]
        if cursors[ego.affordance] + n_exo > len(pool):
            rng.shuffle(pool)
            cursors[ego.affordance] = 0
        at = cursors[ego.affordance]
        exo_entries = pool[at:at + n_exo]
        cursors[ego.affordance] = at + n_exo
        groups.append(GroupSpec(ego=ego, exo=exo_entries,
                                label=manifest.affordance_id(ego.affordance),
                                affordance=ego.affordance, object_id=ego.object_id))
    return groups


def _augment(img, size, rng):
    """Random crop from the stored margin plus horizontal flip."""
    margin = img.shape[1] - size
    oy = int(rng.integers(0, margin + 1))
    ox = int(rng.integers(0, margin + 1))
    out = img[:, oy:oy + size, ox:ox + size]
    if rng.random() < 0.5:
        out = out[:, :, ::-1]
    return np.ascontiguousarray(out)


def load_group(spec: GroupSpec, size: int, rng, log: AccessLog | None = None) -> SampleGroup:
    """Materialise a GroupSpec into augmented image tensors."""
    exo = [_augment(read_image(e.image_path, log), size, rng) for e in spec.exo]
    ego = _augment(read_image(spec.ego.image_path, log), size, rng)
    return SampleGroup(exo_images=exo, ego_image=ego, label=spec.label,
                       affordance=spec.affordance, object_id=spec.object_id)


def load_eval_items(manifest: DatasetManifest, size: int, log: AccessLog | None = None):
    """Center-cropped test images with their annotation points shifted to match."""
    items = []
    for entry in manifest.test:
        img = read_image(entry.image_path, log)
        stored = img.shape[1]
        off = (stored - size) // 2
        crop = np.ascontiguousarray(img[:, off:off + size, off:off + size])
        if entry.annotation_path is None:
            points = np.zeros((0, 2))
        else:
            points = read_points(entry.annotation_path, stored, stored, log)
            if points.shape[0]:
                points = points - off
                keep = ((points[:, 0] >= 0) & (points[:, 0] <= size - 1)
                        & (points[:, 1] >= 0) & (points[:, 1] <= size - 1))
                points = points[keep]
        items.append(EvalItem(image=crop, points=points,
                              affordance_id=manifest.affordance_id(entry.affordance),
                              affordance=entry.affordance,
                              image_id=os.path.basename(entry.image_path)))
    return items
