"""Seismic monitoring with a frozen GPT-2 backbone.

Thin wrapper over the C++ core: synthetic seismogram generation, label
construction, the embedder/patching/decoder-block model, losses, metrics and
the training/evaluation pipeline.
"""

from seismollm._core import *  # noqa: F401,F403
from seismollm._core import __version__  # noqa: F401
