"""Explicit constant formulas, evaluated in log space.

Only ``generic_C`` (the unnamed dimensional constant) is a free knob; all
other factors are fixed numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OVERFLOW, InvalidTheta, InvalidThickness

LOG_MAX = math.log(1.7976931348623157e308)


@dataclass(frozen=True)
class LogScalar:
    """Positive number stored by its natural log.

    ``value`` is +inf (and ``overflow`` is set) when exp(log) exceeds the
    double range; ``log`` always keeps the exact exponent.
    """

    log: float

    @property
    def overflow(self) -> bool:
        return self.log > LOG_MAX

    @property
    def value(self) -> float:
        return math.inf if self.overflow else math.exp(self.log)

    @property
    def flags(self) -> tuple:
        return (OVERFLOW,) if self.overflow else ()

    def __float__(self):
        return self.value


def _check_gamma(gamma):
    if not (0 < gamma <= 1):
        raise InvalidThickness(f"gamma must lie in (0, 1], got {gamma}")


def _check_theta(theta):
    if not (0 < theta < 1):
        raise InvalidTheta(f"theta must lie in (0, 1), got {theta}")


def _check_L(L):
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")


def thickness_factor(gamma: float) -> float:
    """1 + ln(1/gamma)."""
    _check_gamma(gamma)
    return 1.0 - math.log(gamma)


def c_spec_formula(n: int, gamma: float, L: float, generic_C: float = 1.0) -> float:
    """C (1 + L)(1 + ln(1/gamma)); ``n`` only selects C(n), supplied as ``generic_C``."""
    _check_L(L)
    return generic_C * (1.0 + L) * thickness_factor(gamma)


def c_hold_formula(c_spec: float, theta: float) -> float:
    """(C_spec + 1)^2 / (1 - theta) + ln 12."""
    _check_theta(theta)
    if c_spec < 0:
        raise ValueError("C_spec must be nonnegative")
    return (c_spec + 1.0) ** 2 / (1.0 - theta) + math.log(12.0)


def log_predicted_cobs(c_hold: float, T: float) -> float:
    """36 (1 + 3 C_Hold)(1 + 1/T)."""
    if not T > 0:
        raise ValueError("T must be positive")
    if c_hold < 0:
        raise ValueError("C_Hold must be nonnegative")
    return 36.0 * (1.0 + 3.0 * c_hold) * (1.0 + 1.0 / T)


@dataclass(frozen=True)
class ConstantChain:
    n: int
    gamma: float
    L: float
    theta: float
    T: float
    generic_C: float
    c_spec: float
    c_hold: float
    c_obs: LogScalar
    c_hold_corollary: float
    c_obs_corollary: LogScalar

    @property
    def hold_ratio(self) -> float:
        """Chain C_Hold over the corollary form (growth-order cross-check)."""
        return self.c_hold / self.c_hold_corollary

    @property
    def log_obs_ratio(self) -> float:
        return self.c_obs.log / self.c_obs_corollary.log

    @property
    def flags(self) -> tuple:
        return tuple(sorted(set(self.c_obs.flags) | set(self.c_obs_corollary.flags)))


def corollary_chain(n: int, gamma: float, L: float, theta: float, T: float,
                    generic_C: float = 1.0) -> ConstantChain:
    """Compose C_spec -> C_Hold -> C_obs and the corollary's closed forms.

    Corollary forms:
      C_Hold = C/(1-theta) (1+L)^2 (1+ln(1/gamma))^2
      ln C_obs = 300 (1+C)(1+L)^2 (1+ln(1/gamma))^2 (1+1/T)
    """
    _check_theta(theta)
    if not T > 0:
        raise ValueError("T must be positive")
    cs = c_spec_formula(n, gamma, L, generic_C)
    ch = c_hold_formula(cs, theta)
    geo = (1.0 + L) ** 2 * thickness_factor(gamma) ** 2
    return ConstantChain(
        n=n, gamma=gamma, L=L, theta=theta, T=T, generic_C=generic_C,
        c_spec=cs,
        c_hold=ch,
        c_obs=LogScalar(log_predicted_cobs(ch, T)),
        c_hold_corollary=generic_C / (1.0 - theta) * geo,
        c_obs_corollary=LogScalar(300.0 * (1.0 + generic_C) * geo * (1.0 + 1.0 / T)),
    )
