"""Zero-/few-shot anomaly classification and segmentation toolkit.

CLIP patch features are projected into the text embedding space by per-stage
linear heads and compared against normal/abnormal prompt ensembles; reference
memory banks add a nearest-neighbour map in the few-shot setting.
"""

__version__ = "0.1.0"
