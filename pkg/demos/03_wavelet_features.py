"""
Wavelet features
================

The relay current is cut to 80 samples per phase and split by one level of
the db2 transform; approximation and detail halves form the 120 features.
"""

# %%
import numpy as np

from faultzone.wavefeat import WINDOW, dwt_level1, idwt_level1

t = np.arange(WINDOW) / 4000.0
for freq in (50.0, 500.0, 1500.0):
    a, d = dwt_level1(np.sin(2 * np.pi * freq * t))
    print("%6.0f Hz  detail share %.4f" % (freq, d @ d / (a @ a + d @ d)))

# %%
# The transform is orthonormal, so it inverts exactly.
x = np.random.default_rng(0).normal(size=WINDOW)
a, d = dwt_level1(x)
print("reconstruction error", np.abs(idwt_level1(a, d) - x).max())
