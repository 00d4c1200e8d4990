"""Accumulated spectrograms of Gabor multipliers on lattices."""

import os as _os

# thread count for the BLAS backends, honoured only if set before numpy loads
if "ACCSPEC_THREADS" in _os.environ:
    for _v in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_v, _os.environ["ACCSPEC_THREADS"])

__version__ = "0.1.0"

from .errors import AccspecError  # noqa: E402
from .lattice_geom import Ball, ConvexPolygon, Lattice2, Rect, parse_mask  # noqa: E402
from .window_kernel import Window, ambiguity, canonical_tight_window  # noqa: E402

__all__ = ["AccspecError", "Ball", "ConvexPolygon", "Lattice2", "Rect", "Window",
           "ambiguity", "canonical_tight_window", "parse_mask", "__version__"]
