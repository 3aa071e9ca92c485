"""Distributional regression with transfer across studies.

Quantile-function responses under the 2-Wasserstein geometry: global/local
weighted regression, sample-size-weighted aggregation across source studies,
norm-prox bias correction, adaptive source selection, and the synthetic
benchmark runner. Thin wrapper over the native `_watl` extension.
"""

try:
    from watl._watl import *  # noqa: F401,F403  (installed layout)
    from watl._watl import __doc__ as _native_doc  # noqa: F401
except ImportError:  # build-tree layout: extension next to this package
    from _watl import *  # noqa: F401,F403
