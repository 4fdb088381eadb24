"""Coupled quantum van der Pol oscillators. All rates in units of gamma1."""

import json as _json

from ._qvdp import *  # noqa: F401,F403
from ._qvdp import __version__, run_sweep as _run_sweep


def run_sweep(config, out_dir, workers=1, resume=True):
    """Run a sweep from a config dict (or JSON text) and return the report."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _run_sweep(text, str(out_dir), workers, resume)
