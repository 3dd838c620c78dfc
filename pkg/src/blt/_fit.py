"""Log-log slope fitting shared by the asymptotics and symbol diagnostics."""

import numpy as np


class FitDegenerate(RuntimeError):
    """Errors underflow: the formula is exact on the window."""


def loglog_fit(x, y, floor=1e-300):
    """Least-squares slope and r^2 of log y against log x.

    Raises FitDegenerate when y is essentially zero across the window.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.max(y) < 1e-13 * max(np.max(x), 1.0) ** 0 or np.all(y < floor):
        raise FitDegenerate("error magnitudes underflow; nothing to fit")
    keep = y > floor
    if keep.sum() < max(3, len(x) // 2):
        raise FitDegenerate("too few nonzero errors to fit")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = np.sum((ly - pred) ** 2)
    ss_tot = np.sum((ly - np.mean(ly)) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)
