"""Named deterministic random substreams.

One user-facing seed fans out into independent generators per consumer
(weight init, group sampler, augmentation, ...) so that switching one
component on or off never perturbs the random draws of another.
"""

import numpy as np

# Fixed ids; never reorder or reuse, or old seeds stop reproducing.
_STREAM_IDS = {
    "init": 0,
    "sampler": 1,
    "augment": 2,
    "synth": 3,
    "split": 4,
    "nmf": 5,
    "eval": 6,
}


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return the generator for `name`, optionally keyed further (e.g. by epoch)."""
    if name not in _STREAM_IDS:
        raise KeyError(f"unknown rng stream {name!r}")
    key = (_STREAM_IDS[name],) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
