"""Reference implementations of the hot loops, used when the compiled core is absent."""

import numpy as np


def nodal_sweep(cond, cap, inv_l, inc, omegas):
    """Terminal impedance matrices inc^T Y(w)^-1 inc over a frequency grid.

    Singular points come back as NaN so the caller decides how to report them.
    """
    n_t = inc.shape[1]
    out = np.empty((len(omegas), n_t, n_t), dtype=complex)
    for k, w in enumerate(omegas):
        y = cond + 1j * w * cap + inv_l / (1j * w)
        try:
            out[k] = inc.T @ np.linalg.solve(y, inc)
        except np.linalg.LinAlgError:
            out[k] = np.nan
    return out


def ordered_product(mats):
    """mats[-1] @ ... @ mats[1] @ mats[0] for a stack of square complex matrices."""
    mats = np.asarray(mats, dtype=complex)
    out = np.eye(mats.shape[1], dtype=complex)
    for m in mats:
        out = m @ out
    return out
