"""Independent numerical-integration oracle for the smoothing posterior.

Integrates the unnormalized joint posterior of (location, precision) on a
grid: normal likelihood times normal location prior times gamma precision
prior. No conjugate algebra is reused; only elementary density formulas.
"""

import math

import numpy as np


def _log_joint(t, nu, y, mu, sigma2, n0, eta):
    """log of likelihood * location prior * precision prior on a (t, nu) grid.

    t: precision grid (column), nu: location grid (row).
    """
    y = np.asarray(y)
    n = len(y)
    a = eta / sigma2  # gamma shape (prior mean 1/sigma2, variance 1/(eta*sigma2))
    b = eta  # gamma rate
    sq = ((y[None, None, :] - nu[None, :, None]) ** 2).sum(axis=2)  # (1, n_nu)
    t_col = t[:, None]
    return (
        0.5 * n * np.log(t_col / (2 * math.pi))
        - 0.5 * t_col * sq
        + 0.5 * np.log(n0 * t_col / (2 * math.pi))
        - 0.5 * n0 * t_col * (nu[None, :] - mu) ** 2
        + (a - 1) * np.log(t_col)
        - b * t_col
    )


def posterior_mean_precision_by_integration(
    y, mu, sigma2, m, delta, eta, n_t=3000, n_nu=1500
):
    """E[1/tau^2 | y] by trapezoid quadrature over precision and location."""
    y = list(y)
    n = len(y)
    n0 = m / delta
    y_bar = sum(y) / n
    ss = sum((v - y_bar) ** 2 for v in y)

    span = max(math.sqrt(ss / n) if n > 1 else 0.0, math.sqrt(sigma2),
               abs(y_bar - mu), 0.05)
    nu = np.linspace(min(y_bar, mu) - 12 * span, max(y_bar, mu) + 12 * span, n_nu)

    t_scale = max(1.0 / sigma2, n / (ss + 1e-12) if ss > 0 else 1.0 / sigma2)
    lo_factor, hi_factor = 1e-5, 1e4
    for _ in range(8):
        t = np.exp(
            np.linspace(
                math.log(t_scale * lo_factor), math.log(t_scale * hi_factor), n_t
            )
        )
        log_f = _log_joint(t, nu, y, mu, sigma2, n0, eta)
        log_f_t = np.logaddexp.reduce(log_f, axis=1)  # up to nu grid spacing const
        peak = log_f_t.max()
        if log_f_t[0] < peak - 40 and log_f_t[-1] < peak - 40:
            break
        if log_f_t[0] >= peak - 40:
            lo_factor /= 100
        if log_f_t[-1] >= peak - 40:
            hi_factor *= 100
    w = np.exp(log_f_t - peak)
    # trapezoid over t (non-uniform grid)
    dt = np.diff(t)
    num = float(np.sum(0.5 * (w[1:] * t[1:] + w[:-1] * t[:-1]) * dt))
    den = float(np.sum(0.5 * (w[1:] + w[:-1]) * dt))
    return num / den
