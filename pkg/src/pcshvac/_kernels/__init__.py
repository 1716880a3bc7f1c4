"""Kernel backend selection: compiled extension with pure-numpy fallback.

``make_evaluator`` returns the compiled evaluator when the extension built
successfully, unless ``PCSHVAC_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from .data import KernelData
from .pure import PureEvaluator

try:  # pragma: no cover - depends on the build environment
    from .core import CoreEvaluator
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover
    CoreEvaluator = None
    HAVE_COMPILED = False


def backend_name() -> str:
    if HAVE_COMPILED and os.environ.get("PCSHVAC_PURE_PYTHON") != "1":
        return "compiled"
    return "pure"


def make_evaluator(data: KernelData):
    if backend_name() == "compiled":
        return CoreEvaluator(data)
    return PureEvaluator(data)
