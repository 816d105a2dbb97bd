"""Hot-kernel backend selection.

Prefers the compiled Cython extension; falls back to the numpy reference
implementation when the extension is absent or XVA_NO_EXT is set.
"""

import os

if os.environ.get("XVA_NO_EXT"):
    from . import pyref as _impl
else:
    try:
        from . import _convext as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pyref as _impl

BACKEND = _impl.NAME

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weight = _impl.conv2d_backward_weight
bilinear_resize = _impl.bilinear_resize
