"""Numpy fallback for the stepping kernels; same contracts as _kernels.pyx."""

import numpy as np


def history_update_two_level(hist, decay, w1, w2, u1, u2, omega, out):
    hist *= decay[:, None]
    hist += w1[:, None] * u1
    hist += w2[:, None] * u2
    np.dot(omega, hist, out=out)


def history_update_one_level(hist, decay, w, v, omega, out):
    hist *= decay[:, None]
    hist += w[:, None] * v
    np.dot(omega, hist, out=out)
