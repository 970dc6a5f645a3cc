"""Action-conditioned video prediction laboratory.

Thin wrapper over the native module: dataset generation, the three-phase
training loop, evaluation metrics and the gradient-check suite.
"""

try:
    from acvg._acvg import *  # noqa: F401,F403  (installed layout)
except ImportError:  # in-tree layout: module sits on PYTHONPATH directly
    from _acvg import *  # noqa: F401,F403

__version__ = "0.1.0"
