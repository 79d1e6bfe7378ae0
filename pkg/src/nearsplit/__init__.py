"""Near-field wideband THz channel estimation under beam-split.

Library layout:
- `wavefield`: array geometry, spherical steering vectors, focus-point maps
- `config`: system-level parameter bundle
- `channel`: multipath scenario sampling and channel synthesis
- `dictionary`: physical-grid steering dictionaries (split-aware and not)
- `estimators`: pilot sounding, LS / LMMSE / sparse-recovery estimators
- `fedlearn`: federated training on estimator-labeled data, overhead counts
- `harness`: seeded Monte-Carlo experiment driver and CSV emission
- `cli`: `nearsplit` command-line entry point
"""
from ._version import __version__

__all__ = ["__version__"]
