"""Cross-view affordance grounding at desk scale.

Learns where an object supports an action from groups of third-person
interaction images, transfers that knowledge to clean first-person images
using only class labels as supervision, and localises the region at test
time via class activation maps. Ships its own tape autodiff, a shared-
dictionary nonnegative factorizer, heatmap metrics, and a synthetic
cross-view benchmark.
"""

from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
