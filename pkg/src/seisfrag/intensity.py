"""Intensity measures and time-domain descriptors of accelerograms.

Accelerations are in g, so the Arias integral carries a plain pi/2
factor.  Spectral quantities come from the linear SDOF integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .motion import STANDARD_GRAVITY, Accelerogram
from .structure import linear_sdof_response

ARIAS_FACTOR = math.pi / 2.0  # (pi / 2g) with accelerations in g


@dataclass(frozen=True)
class IMRecord:
    """Scalar intensity measures of one motion."""

    pga: float        # g
    sa: float         # g, spectral acceleration at the reference period
    psa: float        # g, pseudo-spectral acceleration
    arias: float      # s*g
    d595: float       # s (nan when the record has no energy)
    t_mid_emp: float  # s, 45% Arias instant (nan when undefined)

    def value(self, kind: str) -> float:
        try:
            return getattr(self, kind)
        except AttributeError:
            raise DataError(f"unknown IM kind {kind!r}")


@dataclass(frozen=True)
class DemandRecord:
    """One (intensity, response) observation from a transient analysis."""

    im: IMRecord
    delta: float      # maximal inter-storey drift ratio
    motion_id: str = ""


def pga(acc: Accelerogram) -> float:
    return float(np.max(np.abs(acc.samples)))


def arias_intensity(acc: Accelerogram) -> float:
    """(pi/2g) integral of a^2 dt by the trapezoidal rule."""
    return ARIAS_FACTOR * float(np.trapezoid(acc.samples ** 2, dx=acc.dt))


def _cumulative_arias(acc: Accelerogram) -> np.ndarray:
    a2 = acc.samples ** 2
    inc = 0.5 * (a2[1:] + a2[:-1]) * acc.dt
    out = np.empty(acc.n)
    out[0] = 0.0
    np.cumsum(inc, out=out[1:])
    return ARIAS_FACTOR * out


def t_alpha(acc: Accelerogram, alpha: float) -> float:
    """First time the cumulative Arias intensity reaches alpha * I_a."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    cum = _cumulative_arias(acc)
    total = cum[-1]
    if total <= 0.0:
        raise DataError("zero-energy record: t_alpha undefined")
    target = alpha * total
    k = int(np.searchsorted(cum, target))
    if k == 0:
        return 0.0
    # linear interpolation within the crossing interval
    c0, c1 = cum[k - 1], cum[k]
    frac = (target - c0) / (c1 - c0) if c1 > c0 else 0.0
    return (k - 1 + frac) * acc.dt


def effective_duration(acc: Accelerogram) -> float:
    """D5-95: time between 5% and 95% of cumulative Arias intensity."""
    return t_alpha(acc, 0.95) - t_alpha(acc, 0.05)


def spectral_acceleration(acc: Accelerogram, period: float, zeta: float) -> float:
    """Peak absolute acceleration of the linear SDOF, in g."""
    resp = linear_sdof_response(period, zeta, acc)
    return float(np.max(np.abs(resp.accelerations)))


def pseudo_spectral_acceleration(acc: Accelerogram, period: float, zeta: float) -> float:
    """(2 pi / T)^2 times the peak relative displacement, in g."""
    resp = linear_sdof_response(period, zeta, acc)
    omega = 2.0 * math.pi / period
    return omega ** 2 * float(np.max(np.abs(resp.displacements))) / STANDARD_GRAVITY


def im_record(acc: Accelerogram, period: float, zeta: float) -> IMRecord:
    """All intensity measures of a motion in one SDOF pass."""
    resp = linear_sdof_response(period, zeta, acc)
    omega = 2.0 * math.pi / period
    sa = float(np.max(np.abs(resp.accelerations)))
    psa = omega ** 2 * float(np.max(np.abs(resp.displacements))) / STANDARD_GRAVITY
    ia = arias_intensity(acc)
    if ia > 0.0:
        d595 = effective_duration(acc)
        tmid = t_alpha(acc, 0.45)
    else:
        d595 = math.nan
        tmid = math.nan
    return IMRecord(pga=pga(acc), sa=sa, psa=psa, arias=ia,
                    d595=d595, t_mid_emp=tmid)
