"""trajaudit: privacy auditing for generative trajectory models.

Trains desk-scale GAN and diffusion targets on trajectory data, mounts
white-box membership-inference attacks against them, quantifies leakage
with ROC/AUC, and offers DP-SGD hardening plus a brute-force verifier
for discrete (epsilon, delta)-DP mechanisms.
"""

from trajaudit.harness import __version__

__all__ = ["__version__"]
