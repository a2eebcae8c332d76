"""Pure-numpy implementations of the hot kernels (fallback backend)."""

import numpy as np

# kernel codes shared with the compiled backend
INDICATOR, EPANECHNIKOV, TGAUSS = 0, 1, 2


def window_stats(x, x0, h, exps, kernel_code):
    """Count of points with ``K > 0`` and the score sum ``sum_i K_i Psi_i``.

    ``x`` is (n, d), ``exps`` the (p, d) integer exponent table.
    """
    x = np.asarray(x, dtype=np.float64)
    t = (x - x0) / h
    inside = np.all(np.abs(t) <= 1.0, axis=1)
    t = t[inside]
    if kernel_code == INDICATOR:
        k = np.ones(t.shape[0])
    elif kernel_code == EPANECHNIKOV:
        k = np.prod(0.75 * (1.0 - t * t), axis=1)
    else:
        k = np.exp(-0.5 * np.sum(t * t, axis=1))
    keep = k > 0
    t, k = t[keep], k[keep]
    phi = np.ones((t.shape[0], exps.shape[0]))
    for axis in range(exps.shape[1]):
        phi *= np.power(t[:, axis : axis + 1], exps[:, axis][None, :])
    return int(t.shape[0]), phi.T @ k


def box_muller(u1, u2):
    """Standard normals from two arrays of uniforms; ``u1`` must lie in (0, 1]."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    r = np.sqrt(-2.0 * np.log(u1))
    a = 2.0 * np.pi * u2
    out = np.empty(2 * u1.shape[0])
    out[0::2] = r * np.cos(a)
    out[1::2] = r * np.sin(a)
    return out
