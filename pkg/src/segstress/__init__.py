"""segstress: a segmentation-robustness workbench.

Corrupt ground-truth cell masks (missing cells, under/over-segmentation),
train and evaluate segmenters under corruption, measure cross-dataset
transfer deltas, and run bootstrapped self-training - all reproducible
from synthetic data at desk scale.
"""

__version__ = "0.1.0"
