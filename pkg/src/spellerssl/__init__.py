"""Self-supervised P300 speller decoding toolkit.

Submodules: autodiff (tensor engine), fourier (mixed-radix DFT), optim
(AdamW, one-cycle schedule), preprocessing (filtering, resampling,
epoching, masking), unet (backbone + pretraining), erphead (classifier
+ fine-tuning), aggregation (code-aligned windows), decode (speller
prediction), metrics (CRR/F1/FDR/ITR), data (EPB container, synthetic
datasets, checkpoints), pipeline (evaluation), cli (command line).
"""

__version__ = "0.1.0"
