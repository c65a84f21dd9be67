"""Complex-parameter hypergeometric series 0F1, 0F2 and log-Gamma.

The series are summed term by term with a running power-of-e scale so that
arguments up to |z| ~ 1e6 never overflow. When the terms are much larger than
the sum (oscillating regime), the sum is redone in decimal arithmetic with
enough digits to cover the cancellation. Use the ``*_scaled`` variants to get
``(mantissa, log_scale)`` with ``value = mantissa * exp(log_scale)``.
"""
from __future__ import annotations

import decimal
import math
from dataclasses import dataclass

import numpy as np
from scipy import special


class SeriesDomainError(ValueError):
    """A Pochhammer denominator hits a pole."""


class SeriesAccuracyError(RuntimeError):
    """The series did not converge within ``max_terms``."""


@dataclass(frozen=True)
class SeriesControl:
    rel_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 10:
            raise ValueError("max_terms must be at least 10")


DEFAULT_CONTROL = SeriesControl()

_RESCALE = 1e150


def _is_pole(a: complex) -> bool:
    a = complex(a)
    return a.imag == 0 and a.real <= 0 and a.real == math.floor(a.real)


def _series_0fq(bottom: tuple[complex, ...], z: complex,
                ctl: SeriesControl) -> tuple[complex, float]:
    for b in bottom:
        if _is_pole(b):
            raise SeriesDomainError(f"non-positive integer parameter {b}")
    z = complex(z)
    if z == 0:
        return 1.0 + 0j, 0.0
    bottom = tuple(complex(b) for b in bottom)
    big = max(abs(b) for b in bottom)

    log_scale = 0.0
    term = 1.0 + 0j
    total = 1.0 + 0j
    comp = 0j  # Kahan compensation
    log_peak = 0.0  # log of the largest term seen
    small_run = 0
    for k in range(1, ctl.max_terms + 1):
        denom = k
        for b in bottom:
            denom = denom * (b + (k - 1))
        ratio = z / denom
        term = term * ratio
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t

        tmag = abs(term)
        if tmag > 0:
            log_peak = max(log_peak, math.log(tmag) + log_scale)
        mag = abs(total)
        top = max(mag, tmag)
        if top > _RESCALE:
            term /= top
            total /= top
            comp /= top
            log_scale += math.log(top)
            mag /= top
        # past the peak of the terms, every later ratio is smaller
        settled = abs(ratio) < 0.5 and k > big
        if settled and abs(term) <= ctl.rel_tol * mag:
            small_run += 1
            if small_run >= 2:
                break
        else:
            small_run = 0
    else:
        raise SeriesAccuracyError(
            f"0F{len(bottom)} series with z={z} did not converge in {ctl.max_terms} terms")
    # digits lost to cancellation between large terms of alternating phase
    lost = (log_peak - (math.log(abs(total)) + log_scale if total != 0 else -math.inf)) / math.log(10)
    if lost > _CANCEL_DIGITS:
        # the float sum may itself be noise, so size precision from the peak
        return _series_0fq_decimal(bottom, z, ctl, max(lost, log_peak / math.log(10)))
    return total, log_scale


_CANCEL_DIGITS = 2.0


def _series_0fq_decimal(bottom, z, ctl, lost) -> tuple[complex, float]:
    """Same series in decimal arithmetic with enough digits to absorb ``lost``.

    Retried with more digits if the decimal sum shows a larger cancellation.
    """
    if not math.isfinite(lost):
        lost = 50.0
    digits = int(lost) + 30
    for _ in range(4):
        out, actual = _decimal_sum(bottom, z, ctl, digits)
        if actual < digits - 25:
            return out
        digits = int(actual) + 30
    raise SeriesAccuracyError(f"cancellation in 0F{len(bottom)} at z={z} exceeds working precision")


def _decimal_sum(bottom, z, ctl, digits):
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        ctx.Emax, ctx.Emin = 10 ** 9, -10 ** 9
        D = decimal.Decimal
        zr, zi = D(z.real), D(z.imag)
        bs = [(D(b.real), D(b.imag)) for b in bottom]
        tr, ti = D(1), D(0)
        sr, si = D(1), D(0)
        peak2 = D(1)
        tol = D(10) ** (-(int(-math.log10(ctl.rel_tol)) + 3))
        small_run = 0
        big = max(abs(b) for b in bottom)
        for k in range(1, ctl.max_terms + 1):
            # multiply term by z, divide by k * prod(b + k - 1)
            tr, ti = tr * zr - ti * zi, tr * zi + ti * zr
            dr, di = D(k), D(0)
            for br, bi in bs:
                er = br + (k - 1)
                dr, di = dr * er - di * bi, dr * bi + di * er
            den = dr * dr + di * di
            tr, ti = (tr * dr + ti * di) / den, (ti * dr - tr * di) / den
            sr += tr
            si += ti
            tmag2 = tr * tr + ti * ti
            peak2 = max(peak2, tmag2)
            smag2 = sr * sr + si * si
            if k > big and tmag2 <= tol * tol * smag2:
                small_run += 1
                if small_run >= 2:
                    break
            else:
                small_run = 0
        else:
            raise SeriesAccuracyError(
                f"0F{len(bottom)} series with z={z} did not converge in {ctl.max_terms} terms")
        mag = (sr * sr + si * si).sqrt()
        if mag == 0:
            return (0j, 0.0), math.inf
        actual = float((peak2.sqrt() / mag).log10())
        log_scale = float(mag.ln())
        if abs(log_scale) < 600:
            return (complex(float(sr), float(si)), 0.0), actual
        return (complex(float(sr / mag), float(si / mag)), log_scale), actual


def hyp0f1_scaled(a: complex, z: complex, ctl: SeriesControl = DEFAULT_CONTROL):
    return _series_0fq((a,), z, ctl)


def hyp0f2_scaled(a: complex, b: complex, z: complex, ctl: SeriesControl = DEFAULT_CONTROL):
    return _series_0fq((a, b), z, ctl)


def hyp0f1(a: complex, z: complex, ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """``sum_k z^k / (k! (a)_k)``."""
    m, s = hyp0f1_scaled(a, z, ctl)
    return m * math.exp(s)


def hyp0f2(a: complex, b: complex, z: complex, ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """``sum_k z^k / (k! (a)_k (b)_k)``."""
    m, s = hyp0f2_scaled(a, b, z, ctl)
    return m * math.exp(s)


def log_hyp0f2(a: complex, b: complex, z: complex, ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """Principal log of 0F2; real part is ``log|0F2|``."""
    m, s = hyp0f2_scaled(a, b, z, ctl)
    return np.log(m) + s


def log_gamma(z: complex) -> complex:
    """Principal-branch log Gamma for complex ``z``."""
    if _is_pole(z):
        raise SeriesDomainError(f"Gamma has a pole at {z}")
    return complex(special.loggamma(complex(z)))


def log_abs_gamma_ratio(c: complex, n: int | np.ndarray) -> np.ndarray:
    """``log|Gamma(c) / Gamma(c + n)|`` via log-Gamma differences."""
    n = np.asarray(n)
    for b in np.atleast_1d(c + n):
        if _is_pole(b):
            raise SeriesDomainError(f"Gamma has a pole at {b}")
    if _is_pole(c):
        raise SeriesDomainError(f"Gamma has a pole at {c}")
    return np.real(special.loggamma(complex(c)) - special.loggamma(c + n))
