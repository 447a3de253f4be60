"""Desk-scale digit dataset for the accuracy experiments.

The 8x8 scikit-learn digits are bilinearly upsampled to 14x14 (196
features, matching the 196-64-32-32-10 reference topology) and scaled
to [0, 1].  Split and ordering are fully determined by the seed.
"""

from __future__ import annotations

import numpy as np
from sklearn.datasets import load_digits

__all__ = ["load_digits_14x14", "bilinear_resize"]


def bilinear_resize(images: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of a (n, h, w) stack."""
    n, h, w = images.shape
    ys = np.linspace(0.0, h - 1.0, out_h)
    xs = np.linspace(0.0, w - 1.0, out_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]
    rows0 = images[:, y0, :]
    rows1 = images[:, y1, :]
    rows = rows0 * (1.0 - fy) + rows1 * fy          # (n, out_h, w)
    cols0 = rows[:, :, x0]
    cols1 = rows[:, :, x1]
    return cols0 * (1.0 - fx) + cols1 * fx


def load_digits_14x14(seed: int = 0, test_fraction: float = 0.2,
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(x_train, y_train, x_test, y_test) with 196 features in [0, 1]."""
    ds = load_digits()
    images = ds.images / 16.0
    up = bilinear_resize(images, 14, 14).reshape(len(images), -1)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(up))
    n_test = int(len(up) * test_fraction)
    test_idx = order[:n_test]
    train_idx = order[n_test:]
    return (up[train_idx], ds.target[train_idx],
            up[test_idx], ds.target[test_idx])
