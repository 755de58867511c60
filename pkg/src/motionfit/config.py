"""
Pipeline configuration.

Settings come from three layers, later ones winning: built-in defaults,
a key-value file, command-line flags. The file holds one ``key = value``
per line, ``#`` starts a comment::

    # motionfit.cfg
    up = z
    units = m
    lambda = 5.0
    beta = 0.1
    eps_pen = 0.0
    s_init = 220
    i_start = 100
    i_end = 1300
    rate = 0.1
    joint_limits = /path/to/limits.json
    seed = 42

The file path is taken from ``--config`` or, failing that, from the
``MOTIONFIT_CONFIG`` environment variable.
"""

import configparser
import os
from dataclasses import dataclass, fields, replace

from .errors import InvalidInputError, ParseError

ENV_VAR = "MOTIONFIT_CONFIG"
UNIT_SCALE = {"m": 1.0, "cm": 0.01, "mm": 0.001}

# file key -> (field name, type)
_KEYS = {
    "up": ("up", str),
    "units": ("units", str),
    "lambda": ("lam", float),
    "beta": ("beta", float),
    "eps_pen": ("eps_pen", float),
    "s_init": ("s_init", float),
    "i_start": ("i_start", int),
    "i_end": ("i_end", int),
    "rate": ("rate", float),
    "joint_limits": ("joint_limits", str),
    "seed": ("seed", int),
}


@dataclass(frozen=True)
class PipelineConfig:
    up: str = "z"
    units: str = "m"
    lam: float = 5.0
    beta: float = 0.1
    eps_pen: float = 0.0
    s_init: float = 220.0
    i_start: int = 100
    i_end: int = 1300
    rate: float = 0.1
    joint_limits: str = None
    seed: int = 42

    def __post_init__(self):
        if self.up not in ("z", "y"):
            raise InvalidInputError(f"up must be 'z' or 'y', got {self.up!r}")
        if self.units not in UNIT_SCALE:
            raise InvalidInputError(f"units must be one of {sorted(UNIT_SCALE)}, got {self.units!r}")
        if not self.lam > 0:
            raise InvalidInputError("lambda must be positive")
        if self.beta < 0 or self.eps_pen < 0:
            raise InvalidInputError("beta and eps_pen must be non-negative")

    @property
    def scale(self):
        """Factor converting input lengths to meters."""
        return UNIT_SCALE[self.units]

    def override(self, **values):
        """Copy with every non-None value replaced."""
        known = {f.name for f in fields(self)}
        bad = set(values) - known
        if bad:
            raise InvalidInputError(f"unknown config fields: {sorted(bad)}")
        return replace(self, **{k: v for k, v in values.items() if v is not None})


def parse_config_text(text, source="<config>"):
    """Field values from key-value text (only the keys present)."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string("[motionfit]\n" + text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ParseError(f"{source}: {exc.message.splitlines()[0]}",
                         line=None if line is None else line - 1) from None
    out = {}
    for key, raw in cp["motionfit"].items():
        if key not in _KEYS:
            raise ParseError(f"{source}: unknown key {key!r}")
        name, typ = _KEYS[key]
        try:
            out[name] = typ(raw)
        except ValueError:
            raise ParseError(f"{source}: bad value {raw!r} for {key!r}") from None
    return out


def load_config(path=None, environ=None, **flags):
    """Defaults, then the config file (``path`` or ``$MOTIONFIT_CONFIG``),
    then the non-None ``flags``."""
    environ = os.environ if environ is None else environ
    path = path or environ.get(ENV_VAR) or None
    cfg = PipelineConfig()
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidInputError(f"cannot read config {path!r}: {exc.strerror}") from None
        cfg = cfg.override(**parse_config_text(text, source=path))
    return cfg.override(**flags)
