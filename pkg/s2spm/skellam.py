"""Skellam log-mass, negative log-likelihood and its rate derivatives.

Modified Bessel functions come from scipy's exponentially scaled ``ive`` so that
large arguments never overflow; where ``ive`` underflows (tiny argument, large
order) a log-space power series takes over.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .errors import DomainError

RATE_FLOOR = 1e-12
_SERIES_TERMS = 60

ArrayLike = Union[float, np.ndarray]


def _log_bessel_series(order: np.ndarray, x: np.ndarray) -> np.ndarray:
    m = np.arange(_SERIES_TERMS, dtype=float)[:, None]
    half = np.log(x / 2.0)
    terms = (2.0 * m + order) * half - special.gammaln(m + 1.0) - special.gammaln(m + order + 1.0)
    return special.logsumexp(terms, axis=0)


def log_bessel_i(order: ArrayLike, x: ArrayLike) -> ArrayLike:
    """ln I_order(x) for x >= 0; -inf at x = 0 for positive order."""
    order_arr, x_arr = np.broadcast_arrays(np.asarray(order, dtype=float), np.asarray(x, dtype=float))
    if np.any(x_arr < 0):
        raise DomainError("log_bessel_i requires x >= 0")
    with np.errstate(divide="ignore"):
        scaled = special.ive(order_arr, x_arr)
        out = np.log(scaled) + x_arr
    fallback = (x_arr > 0) & ~(scaled > 0)
    if np.any(fallback):
        out = np.array(out, dtype=float)
        out[fallback] = _log_bessel_series(order_arr[fallback], x_arr[fallback])
    return out if out.ndim else float(out)


def bessel_ratio(order: ArrayLike, x: ArrayLike) -> ArrayLike:
    """I_{order+1}(x) / I_order(x) for x > 0."""
    order_arr, x_arr = np.broadcast_arrays(np.asarray(order, dtype=float), np.asarray(x, dtype=float))
    if np.any(x_arr <= 0):
        raise DomainError("bessel_ratio requires x > 0")
    num = special.ive(order_arr + 1.0, x_arr)
    den = special.ive(order_arr, x_arr)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / den
    fallback = ~((num > 0) & (den > 0) & np.isfinite(ratio))
    if np.any(fallback):
        ratio = np.array(ratio, dtype=float)
        o, xs = order_arr[fallback], x_arr[fallback]
        ratio[fallback] = np.exp(_log_bessel_series(o + 1.0, xs) - _log_bessel_series(o, xs))
    return ratio if ratio.ndim else float(ratio)


def _check_rates(*rates: np.ndarray) -> None:
    for rate in rates:
        if not np.all(np.isfinite(rate)) or np.any(rate <= 0):
            raise DomainError("Skellam rates must be finite and positive")


def skellam_log_pmf(y: ArrayLike, lp: ArrayLike, ln_: ArrayLike) -> ArrayLike:
    y_arr, lp_arr, ln_arr = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(lp, dtype=float),
                                                np.asarray(ln_, dtype=float))
    _check_rates(lp_arr, ln_arr)
    x = 2.0 * np.sqrt(lp_arr * ln_arr)
    out = (-(lp_arr + ln_arr) + (y_arr / 2.0) * (np.log(lp_arr) - np.log(ln_arr))
           + log_bessel_i(np.abs(y_arr), x))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True, eq=False)
class SkellamTerm:
    y: ArrayLike
    lambda_pos: ArrayLike
    lambda_neg: ArrayLike
    log_prob: ArrayLike
    dl_dpos: ArrayLike
    dl_dneg: ArrayLike

    @property
    def nll(self) -> ArrayLike:
        return -self.log_prob


def _bessel_slope(y: np.ndarray, lp: np.ndarray, ln_: np.ndarray) -> np.ndarray:
    # x * I'_v(x) / I_v(x) with v = |y|, via I'_v = I_{v+1} + (v/x) I_v
    x = 2.0 * np.sqrt(lp * ln_)
    nu = np.abs(y)
    return x * bessel_ratio(nu, x) + nu


def skellam_nll_grad(y: ArrayLike, lp: ArrayLike, ln_: ArrayLike) -> SkellamTerm:
    """Per-pair negative log-likelihood with exact partials in both rates."""
    y_arr, lp_arr, ln_arr = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(lp, dtype=float),
                                                np.asarray(ln_, dtype=float))
    log_prob = skellam_log_pmf(y_arr, lp_arr, ln_arr)
    slope = _bessel_slope(y_arr, lp_arr, ln_arr)
    dl_dpos = 1.0 - (y_arr + slope) / (2.0 * lp_arr)
    dl_dneg = 1.0 + (y_arr - slope) / (2.0 * ln_arr)
    return SkellamTerm(y=y, lambda_pos=lp, lambda_neg=ln_, log_prob=log_prob,
                       dl_dpos=dl_dpos if dl_dpos.ndim else float(dl_dpos),
                       dl_dneg=dl_dneg if dl_dneg.ndim else float(dl_dneg))


def _scaled_bessel_pair(nu: np.ndarray, x: np.ndarray):
    """ive(nu, x) and ive(nu + 1, x); order-0 entries use the faster i0e/i1e."""
    lo = np.empty_like(x)
    hi = np.empty_like(x)
    zero = nu == 0
    lo[zero] = special.i0e(x[zero])
    hi[zero] = special.i1e(x[zero])
    rest = ~zero
    lo[rest] = special.ive(nu[rest], x[rest])
    hi[rest] = special.ive(nu[rest] + 1.0, x[rest])
    return lo, hi


def skellam_nll_logrates(y: np.ndarray, lp: np.ndarray, ln_: np.ndarray):
    """NLL and its derivatives with respect to ln(lp) and ln(ln_).

    Used by the model, where rates are exponentials of linear predictors; the
    log-rate form avoids dividing by floored rates. Each Bessel value is
    evaluated once and shared between the mass and the slope.
    """
    y, lp, ln_ = (np.array(a, dtype=float) for a in np.broadcast_arrays(y, lp, ln_))
    _check_rates(lp, ln_)
    x = 2.0 * np.sqrt(lp * ln_)
    nu = np.abs(y)
    lo, hi = _scaled_bessel_pair(nu, x)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_i = np.log(lo) + x
        ratio = hi / lo
    low = ~(lo > 0)
    if np.any(low):
        log_i[low] = _log_bessel_series(nu[low], x[low])
    bad = ~((hi > 0) & (lo > 0) & np.isfinite(ratio))
    if np.any(bad):
        ratio[bad] = np.exp(_log_bessel_series(nu[bad] + 1.0, x[bad]) - _log_bessel_series(nu[bad], x[bad]))

    nll = (lp + ln_) - (y / 2.0) * (np.log(lp) - np.log(ln_)) - log_i
    slope = x * ratio + nu
    g_pos = lp - 0.5 * (y + slope)
    g_neg = ln_ + 0.5 * (y - slope)
    return nll, g_pos, g_neg


def sample_skellam(lp: ArrayLike, ln_: ArrayLike, size, rng: np.random.Generator) -> np.ndarray:
    return rng.poisson(lp, size=size) - rng.poisson(ln_, size=size)
