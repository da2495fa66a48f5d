"""Built-in defaults and the flat key=value config file format.

Resolution order everywhere in the CLI: explicit flag > config file >
the defaults below.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ParseError

DEFAULTS = {
    # pipeline fps and geometry
    "fps": 24,
    "target_height": 500.0,     # pose scale normalization, px
    # preprocessing
    "jitter_threshold": 10.0,   # px, spike smoothing
    "distance_threshold": 100.0,  # px, invalid-frame filtering
    # cross-modal model
    "dim": 16,
    "hidden_size": 100,
    "lr": 1e-4,
    "dropout": 0.1,
    "epochs": 500,
    "batch": 16,
    "margin": 1.0,
    # alignment
    "omega_a": 8,
    "omega_b": 24,
    "tsd_th": 5.0,
    "disc_threshold": 10.0,
    # evaluation
    "tolerance": 2,
    # audio
    "sample_rate": 16000,
}


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def load_config(path) -> dict:
    """Read a flat ``key = value`` config file (``#`` starts a comment)."""
    out = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        out[key.strip()] = _parse_value(raw)
    return out


def resolve(key: str, flag_value=None, config: dict | None = None):
    """Pick a setting by precedence: CLI flag, config file, default."""
    if flag_value is not None:
        return flag_value
    if config and key in config:
        return config[key]
    return DEFAULTS[key]
