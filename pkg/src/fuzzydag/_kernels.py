"""Per-sample likelihood kernels for the mixed-data model.

Both implementations return the total negative log-likelihood and the score
matrix ``G[n, i] = d nll / d m[n, i]`` where ``m = X @ B`` is the linear
predictor. The loop kernel is compiled with numba; the numpy kernel leans on
``scipy.special`` and doubles as a cross-check of the compiled path.
"""

import math

import numpy as np
from scipy import special

from ._accel import njit

GAUSSIAN, LAPLACE, LOGISTIC, CAUCHY = 0, 1, 2, 3

PROB_FLOOR = 1e-12
LOG_FLOOR = math.log(PROB_FLOOR)
LOG_CEIL = math.log1p(-PROB_FLOOR)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG_PI = math.log(math.pi)
_LOG2 = math.log(2.0)
_SQRT2 = math.sqrt(2.0)


# -- scalar helpers (compiled) ----------------------------------------------

@njit
def _log_ndtr(x):
    if x > 5.0:
        return math.log1p(-0.5 * math.erfc(x / _SQRT2))
    if x > -30.0:
        return math.log(0.5 * math.erfc(-x / _SQRT2))
    # asymptotic Mills-ratio series, error below 1e-12 past -30
    x2 = x * x
    series = 1.0 - 1.0 / x2 + 3.0 / x2 ** 2 - 15.0 / x2 ** 3 + 105.0 / x2 ** 4
    return -0.5 * x2 - math.log(-x) - _HALF_LOG_2PI + math.log(series)


@njit
def _std_logpdf(z, family):
    """Standardized log-density and its derivative in z."""
    if family == GAUSSIAN:
        return -0.5 * z * z - _HALF_LOG_2PI, -z
    if family == LAPLACE:
        s = 0.0
        if z > 0.0:
            s = 1.0
        elif z < 0.0:
            s = -1.0
        return -abs(z) - _LOG2, -s
    if family == LOGISTIC:
        a = abs(z)
        return -a - 2.0 * math.log1p(math.exp(-a)), -math.tanh(0.5 * z)
    # Cauchy
    z2 = z * z
    return -_LOG_PI - math.log1p(z2), -2.0 * z / (1.0 + z2)


@njit
def _std_logcdf(z, family):
    """Standardized log-CDF and its derivative, clamped for non-Gaussian families."""
    if family == GAUSSIAN:
        lc = _log_ndtr(z)
        return lc, math.exp(-0.5 * z * z - _HALF_LOG_2PI - lc)
    if family == LAPLACE:
        if z < 0.0:
            lc, d = z - _LOG2, 1.0
        else:
            t = 0.5 * math.exp(-z)
            lc, d = math.log1p(-t), t / (1.0 - t)
    elif family == LOGISTIC:
        if z >= 0.0:
            e = math.exp(-z)
            lc, d = -math.log1p(e), e / (1.0 + e)
        else:
            e = math.exp(z)
            lc, d = z - math.log1p(e), 1.0 / (1.0 + e)
    else:
        a = math.atan2(1.0, -z)
        lc, d = math.log(a) - _LOG_PI, 1.0 / ((1.0 + z * z) * a)
    if lc < LOG_FLOOR:
        return LOG_FLOOR, 0.0
    if lc > LOG_CEIL:
        return LOG_CEIL, 0.0
    return lc, d


@njit
def nll_score_loop(X, M, family, scale, binary):
    """Variable-major, sample-minor reduction of the negative log-likelihood."""
    n, d = X.shape
    G = np.zeros((n, d))
    total = 0.0
    for i in range(d):
        fam = family[i]
        s = scale[i]
        col = 0.0
        if binary[i]:
            for k in range(n):
                sign = 2.0 * X[k, i] - 1.0
                lc, dl = _std_logcdf(sign * M[k, i] / s, fam)
                col -= lc
                G[k, i] = -dl * sign / s
        else:
            log_s = math.log(s)
            for k in range(n):
                lp, dl = _std_logpdf((X[k, i] - M[k, i]) / s, fam)
                col -= lp - log_s
                G[k, i] = dl / s
        total += col
    return total, G


# -- vectorized numpy path ---------------------------------------------------

def _np_logpdf(z, family):
    if family == GAUSSIAN:
        return -0.5 * z * z - _HALF_LOG_2PI, -z
    if family == LAPLACE:
        return -np.abs(z) - _LOG2, -np.sign(z)
    if family == LOGISTIC:
        a = np.abs(z)
        return -a - 2.0 * np.log1p(np.exp(-a)), -np.tanh(0.5 * z)
    z2 = z * z
    return -_LOG_PI - np.log1p(z2), -2.0 * z / (1.0 + z2)


def _np_logcdf(z, family):
    if family == GAUSSIAN:
        lc = special.log_ndtr(z)
        return lc, np.exp(-0.5 * z * z - _HALF_LOG_2PI - lc)
    if family == LAPLACE:
        neg = z < 0
        t = 0.5 * np.exp(-np.abs(z))
        lc = np.where(neg, z - _LOG2, np.log1p(-t))
        d = np.where(neg, 1.0, t / (1.0 - t))
    elif family == LOGISTIC:
        lc = special.log_expit(z)
        d = special.expit(-z)
    else:
        a = np.arctan2(1.0, -z)
        lc = np.log(a) - _LOG_PI
        d = 1.0 / ((1.0 + z * z) * a)
    lo = lc < LOG_FLOOR
    hi = lc > LOG_CEIL
    lc = np.clip(lc, LOG_FLOOR, LOG_CEIL)
    d = np.where(lo | hi, 0.0, d)
    return lc, d


def nll_score_numpy(X, M, family, scale, binary):
    n, d = X.shape
    G = np.zeros((n, d))
    total = 0.0
    for i in range(d):
        fam, s = int(family[i]), float(scale[i])
        if binary[i]:
            sign = 2.0 * X[:, i] - 1.0
            lc, dl = _np_logcdf(sign * M[:, i] / s, fam)
            total -= float(np.sum(lc))
            G[:, i] = -dl * sign / s
        else:
            lp, dl = _np_logpdf((X[:, i] - M[:, i]) / s, fam)
            total -= float(np.sum(lp)) - n * math.log(s)
            G[:, i] = dl / s
    return total, G
