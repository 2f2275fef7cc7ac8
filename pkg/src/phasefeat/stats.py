"""Student's t distribution and the pooled two-sample t-test.

The CDF goes through the regularized incomplete beta function, evaluated with
the modified Lentz continued fraction. Everything is vectorized over numpy
arrays so that thousands of features can be tested at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 500


def _betacf(a, b, x):
    """Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2)."""
    a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < _EPS
        if done.all():
            break
    return h


_lgamma = np.vectorize(lgamma, otypes=[float])


def betainc_reg(a, b, x):
    """Regularized incomplete beta function I_x(a, b) for x in [0, 1]."""
    a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
    out = np.empty(x.shape)
    lo, hi = x <= 0, x >= 1
    out[lo], out[hi] = 0.0, 1.0
    mid = ~(lo | hi)
    if np.any(mid):
        am, bm, xm = a[mid], b[mid], x[mid]
        log_front = (
            _lgamma(am + bm) - _lgamma(am) - _lgamma(bm) + am * np.log(xm) + bm * np.log1p(-xm)
        )
        front = np.exp(log_front)
        direct = xm < (am + 1.0) / (am + bm + 2.0)
        res = np.empty(xm.shape)
        if np.any(direct):
            res[direct] = front[direct] * _betacf(am[direct], bm[direct], xm[direct]) / am[direct]
        flip = ~direct
        if np.any(flip):
            res[flip] = 1.0 - front[flip] * _betacf(bm[flip], am[flip], 1.0 - xm[flip]) / bm[flip]
        out[mid] = res
    return out if out.ndim else float(out)


def t_cdf(t, df):
    """Cumulative distribution function of Student's t with ``df`` degrees of freedom."""
    t, df = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(df, dtype=float))
    if np.any(df <= 0):
        raise ValueError("degrees of freedom must be positive")
    tail = 0.5 * np.asarray(betainc_reg(df / 2.0, 0.5, df / (df + t * t)))
    out = np.where(t < 0, tail, 1.0 - tail)
    return out if out.ndim else float(out)


def t_sf_two_sided(t, df):
    """P(|T| >= |t|), computed from the lower tail to keep precision."""
    t, df = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(df, dtype=float))
    out = np.asarray(betainc_reg(df / 2.0, 0.5, df / (df + t * t)))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float
    degenerate: bool = False


def pooled_t_columns(a, b):
    """Pooled-variance t-test of every column of ``a`` against the same column of ``b``.

    Returns ``(t, df, p, degenerate)`` arrays. Columns where both samples have
    zero variance are degenerate: p is 1 if the means agree and 0 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise ValueError(f"each sample needs at least 2 observations, got {na} and {nb}")
    df = na + nb - 2
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    ssa = ((a - ma) ** 2).sum(axis=0)
    ssb = ((b - mb) ** 2).sum(axis=0)
    pooled = (ssa + ssb) / df
    degenerate = pooled == 0
    se = np.sqrt(pooled * (1.0 / na + 1.0 / nb))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(degenerate, 0.0, (ma - mb) / np.where(degenerate, 1.0, se))
    p = np.asarray(t_sf_two_sided(t, np.full(t.shape, float(df))))
    p = np.where(degenerate, np.where(ma == mb, 1.0, 0.0), p)
    t = np.where(degenerate & (ma != mb), np.copysign(np.inf, ma - mb), t)
    return t, df, p, degenerate


def pooled_t_test(a, b) -> TTestResult:
    """Two-sample Student's t-test assuming equal, unknown variances (two-tailed)."""
    t, df, p, deg = pooled_t_columns(np.ravel(a), np.ravel(b))
    return TTestResult(float(t[0]), int(df), float(p[0]), bool(deg[0]))
