"""Run configuration: parsing, validation, and the canonical echo format.

Config files are line-oriented `key = value` text with `#` comments. Every
key is validated; unknown keys are rejected with their line number. The echo
written next to run outputs round-trips through the parser.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    lr: float = 1e-3
    epochs: int = 20
    n_exo: int = 3            # third-person images per training group
    rank: int = 16            # dictionary rank
    nmf_iters: int = 6
    nmf_alpha: float = 0.9    # dictionary EMA coefficient
    temperature: float = 1.0
    lambda_cls: float = 1.0
    lambda_acp: float = 0.5
    lambda_kt: float = 0.5
    seed: int = 0
    aim: bool = True
    acp: bool = True
    kt: bool = True
    image_size: int = 64
    channels: int = 32        # backbone output channels
    nmf_channels: int = 16    # reduced channel dim fed to the factorizer
    head_dim: int = 32        # shared head conv output channels
    n_classes: int = 5
    split: str = "seen"
    sigma: float = 8.0        # annotation blur in pixels at 224px reference scale
    share_backbone: bool = True
    acp_both_sides: bool = False
    kt_squared: bool = False
    cam_relu: bool = False
    lr_step_every: int = 0    # epochs between lr decays; 0 keeps lr constant
    lr_step_gamma: float = 0.1


def _parse_bool(text):
    t = text.lower()
    if t in ("true", "on", "1"):
        return True
    if t in ("false", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {int: int, float: float, bool: _parse_bool, str: str}

# key -> (predicate, human-readable requirement)
_RANGES = {
    "lr": (lambda v: v > 0, "must be positive"),
    "epochs": (lambda v: v >= 0, "must be >= 0"),
    "n_exo": (lambda v: v >= 1, "must be >= 1"),
    "rank": (lambda v: v >= 1, "must be >= 1"),
    "nmf_iters": (lambda v: v >= 1, "must be >= 1"),
    "nmf_alpha": (lambda v: 0.0 <= v <= 1.0, "must lie in [0,1]"),
    "temperature": (lambda v: v > 0, "must be positive"),
    "lambda_cls": (lambda v: v >= 0, "must be >= 0"),
    "lambda_acp": (lambda v: v >= 0, "must be >= 0"),
    "lambda_kt": (lambda v: v >= 0, "must be >= 0"),
    "seed": (lambda v: v >= 0, "must be >= 0"),
    "image_size": (lambda v: v >= 32 and v % 8 == 0, "must be >= 32 and divisible by 8"),
    "channels": (lambda v: v >= 4, "must be >= 4"),
    "nmf_channels": (lambda v: v >= 1, "must be >= 1"),
    "head_dim": (lambda v: v >= 1, "must be >= 1"),
    "n_classes": (lambda v: v >= 2, "must be >= 2"),
    "split": (lambda v: v in ("seen", "unseen"), "must be 'seen' or 'unseen'"),
    "sigma": (lambda v: v > 0, "must be positive"),
    "lr_step_every": (lambda v: v >= 0, "must be >= 0"),
    "lr_step_gamma": (lambda v: 0 < v <= 1, "must lie in (0,1]"),
}


def validate_config(cfg: RunConfig) -> RunConfig:
    """Check per-field ranges and cross-field consistency."""
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        rule = _RANGES.get(f.name)
        if rule and not rule[0](value):
            raise ConfigError(f"config key '{f.name}' {rule[1]}, got {value}")
    if cfg.nmf_channels > cfg.channels:
        raise ConfigError(
            f"nmf_channels ({cfg.nmf_channels}) cannot exceed channels ({cfg.channels})")
    if cfg.rank > cfg.nmf_channels:
        raise ConfigError(f"rank ({cfg.rank}) cannot exceed nmf_channels ({cfg.nmf_channels})")
    return cfg


def parse_config(path) -> RunConfig:
    """Parse a config file, applying defaults for absent keys."""
    types = {f.name: f.type for f in fields(RunConfig)}
    # dataclass field types arrive as strings under deferred annotations
    typemap = {"int": int, "float": float, "bool": bool, "str": str}
    cfg = RunConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown config key '{key}'")
            ftype = types[key]
            if isinstance(ftype, str):
                ftype = typemap[ftype]
            try:
                parsed = _PARSERS[ftype](value)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: cannot parse value {value!r} for key '{key}'") from None
            rule = _RANGES.get(key)
            if rule and not rule[0](parsed):
                raise ConfigError(f"{path}:{lineno}: key '{key}' {rule[1]}, got {parsed}")
            setattr(cfg, key, parsed)
    return validate_config(cfg)


def format_config(cfg: RunConfig) -> str:
    """Canonical text form of the effective config (parseable back)."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def gt_sigma(cfg: RunConfig) -> float:
    """Annotation blur in pixels at the configured resolution."""
    return cfg.sigma * cfg.image_size / 224.0
