"""The stochastic exponential and the catalog of integrability functionals.

For a path M with jumps dM > -1 the stochastic exponential is

    E_t(M) = exp{M_t - <M^c>_t / 2} prod_{s<=t} (1 + dM_s) e^{-dM_s},

the unique solution of ``E_t = 1 + int_0^t E_{s-} dM_s``.  Everything here
is computed pathwise in log space: the linear jump terms of ``M_t`` cancel
against the ``e^{-dM}`` factors symbolically, so the log value is

    drift(t) - <M^c>_t / 2 + sum log(1 + dM_s),

which never overflows for jump sizes up to e^700.

The condition functionals share the per-jump building block
``log(1+d) - d/(1+d)`` and differ in the control-process and
quadratic-variation terms.  The evaluator with control ``a == 0`` is
arranged to reproduce the plain jump functional bit for bit.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .paths import (
    JumpPath,
    PredictableControl,
    ProcessModel,
    ZeroDrift,
    integrate_control_drift,
)

__all__ = [
    "CONDITION_KINDS",
    "ConditionSpec",
    "FunctionalValue",
    "UnsupportedModelError",
    "log_stoch_exponential",
    "stoch_exponential",
    "sde_residual",
    "jacod_functional",
    "protter_shimbo_functional",
    "lepingle_memin_A",
    "theorem1_functional",
    "lemma1_functional",
    "jump_term_reduction_gap",
]

CONDITION_KINDS = ("jacod", "protter_shimbo", "lepingle_memin", "theorem1", "lemma1")

_LOG_FLOAT_MAX = math.log(sys.float_info.max)


class UnsupportedModelError(ValueError):
    """The requested condition needs model data the model does not carry."""


@dataclass(frozen=True)
class ConditionSpec:
    """Which integrability condition to evaluate, with its parameters.

    ``theorem1`` requires a predictable control; its ``epsilon`` defaults
    to 1/2 (any value in (0, 1) is admissible and the term it scales
    vanishes for models without a continuous part).  The other kinds
    forbid both parameters.
    """

    kind: str
    control: PredictableControl | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in CONDITION_KINDS:
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.kind == "theorem1":
            if self.control is None:
                raise ValueError("theorem1 requires a control process")
            if self.epsilon is None:
                object.__setattr__(self, "epsilon", 0.5)
            if not (0.0 < self.epsilon < 1.0):
                raise ValueError("epsilon must lie strictly in (0, 1)")
        else:
            if self.control is not None or self.epsilon is not None:
                raise ValueError(f"{self.kind} takes no control or epsilon")

    def label(self) -> str:
        if self.kind != "theorem1":
            return self.kind
        return f"theorem1(a={self.control.label()}, eps={self.epsilon!r})"


@dataclass(frozen=True)
class FunctionalValue:
    """Log-space value of a pathwise exponential-family functional.

    ``finite`` records whether ``exp(log_value)`` is representable in
    float64; exponentiation is deferred to reporting.
    """

    log_value: float
    finite: bool

    @classmethod
    def from_log(cls, log_value: float) -> "FunctionalValue":
        return cls(log_value, log_value < _LOG_FLOAT_MAX)

    @property
    def value(self) -> float:
        if not self.finite:
            return math.inf
        return math.exp(self.log_value)


def _jump_term(dm: float) -> float:
    # log(1+d) - d/(1+d); nonnegative, zero only at d = 0
    return math.log1p(dm) - dm / (1.0 + dm)


def log_stoch_exponential(path: JumpPath, t: float) -> float:
    """Natural log of ``E_t(M)``, stable for arbitrarily large jumps."""
    path._check_time(t)
    s = 0.0
    for ti, dm in path.jumps:
        if ti > t:
            break
        s += math.log1p(dm)
    return path.drift(t) - 0.5 * path.cont_qv(t) + s


def stoch_exponential(path: JumpPath, t: float) -> float:
    """``E_t(M) >= 0``; strictly positive in exact arithmetic since dM > -1.

    May underflow to 0.0 (or overflow to inf) in float64 for extreme jump
    sizes; use :func:`log_stoch_exponential` when magnitudes matter.
    """
    lv = log_stoch_exponential(path, t)
    try:
        return math.exp(lv)
    except OverflowError:
        return math.inf


def sde_residual(path: JumpPath, t: float) -> float:
    """Defect of the defining equation: ``E_t - 1 - int_0^t E_{s-} dM_s``.

    The jump part of the integral is exact; the drift part is adaptive
    quadrature between jumps, so the residual is bounded by
    ``1e-9 * max(1, E_t)`` for well-scaled paths.

    Only meaningful for pathwise-consistent inputs, i.e. ``cont_qv == 0``:
    a nonzero abstract quadratic variation without a realized continuous
    martingale is a probability-zero configuration for which the integral
    equation does not hold realization by realization.
    """
    path._check_time(t)
    target = stoch_exponential(path, t)
    qv = path.cont_qv
    drift = path.drift
    has_drift = not isinstance(drift, ZeroDrift)

    integral = 0.0
    cum_jump_log = 0.0
    prev = 0.0
    events = [(ti, dm) for ti, dm in path.jumps if ti <= t]
    for ti, dm in events + [(t, None)]:
        if has_drift and ti > prev:
            c = cum_jump_log

            def integrand(s, _c=c):
                return math.exp(drift(s) - 0.5 * qv(s) + _c) * drift.derivative(s)

            val, _err = quad(integrand, prev, ti, epsabs=1e-12, epsrel=1e-12, limit=200)
            integral += val
        if dm is not None:
            e_left = math.exp(drift(ti) - 0.5 * qv(ti) + cum_jump_log)
            integral += e_left * dm
            cum_jump_log += math.log1p(dm)
            prev = ti
    return target - 1.0 - integral


def jacod_functional(path: JumpPath, t: float) -> FunctionalValue:
    """Pathwise exponent of the jump-based integrability condition:

    ``<M^c>_t / 2 + sum_{s<=t} (log(1+dM_s) - dM_s/(1+dM_s))``.
    """
    path._check_time(t)
    s = 0.0
    for ti, dm in path.jumps:
        if ti > t:
            break
        s += _jump_term(dm)
    return FunctionalValue.from_log(0.5 * path.cont_qv(t) + s)


def protter_shimbo_functional(
    model: ProcessModel, path: JumpPath, t: float
) -> FunctionalValue:
    """Pathwise exponent ``<M^c>_t / 2 + <M^d>_t`` of the bracket-based condition.

    Needs the model's closed-form ``disc_qv``; models without one are
    rejected.
    """
    if model.disc_qv is None:
        raise UnsupportedModelError(
            f"model {model.name!r} carries no closed-form <M^d>"
        )
    path._check_time(t)
    return FunctionalValue.from_log(0.5 * path.cont_qv(t) + model.disc_qv(path, t))


def lepingle_memin_A(path: JumpPath, t: float) -> float:
    """The nondecreasing process ``<M^c>_t / 2 + sum ((1+dM) log(1+dM) - dM)``."""
    path._check_time(t)
    s = 0.0
    for ti, dm in path.jumps:
        if ti > t:
            break
        s += (1.0 + dm) * math.log1p(dm) - dm
    return 0.5 * path.cont_qv(t) + s


def theorem1_functional(
    path: JumpPath, a: PredictableControl, eps: float, t: float
) -> FunctionalValue:
    """Pathwise exponent of the control-extended condition:

    ``int_0^t a dM + int_0^t (1/2 - a) d<M^c> + eps int_0^t 1{1-a<eps} d<M^c>
    + sum (log(1+dM) - dM/(1+dM) + log(1+a dM) - a dM)``.

    The linear jump part of ``int a dM`` cancels the ``- a dM`` terms
    symbolically, so only logarithms of jump sizes enter.  With ``a == 0``
    the result is bit-identical to :func:`jacod_functional`.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("epsilon must lie strictly in (0, 1)")
    path._check_time(t)

    drift_part = integrate_control_drift(path, a, t)
    qv_part = 0.0
    eps_part = 0.0
    for lo, hi, v in a.segments_until(t):
        dq = path.cont_qv(hi) - path.cont_qv(lo)
        qv_part += (0.5 - v) * dq
        if 1.0 - v < eps:
            eps_part += eps * dq

    s = 0.0
    for ti, dm in path.jumps:
        if ti > t:
            break
        av = a.value_at(ti)
        s += _jump_term(dm) + math.log1p(av * dm)
    return FunctionalValue.from_log(((drift_part + qv_part) + eps_part) + s)


def lemma1_functional(path: JumpPath, t: float) -> float:
    """``E_t(M)`` times the jump-condition exponent; the integrand whose
    bounded expectation forces uniform integrability of the exponential."""
    return stoch_exponential(path, t) * jacod_functional(path, t).log_value


def jump_term_reduction_gap(a, dm):
    """Gap ``[log(1+d) - d/(1+d)] - [log(1+ad) - ad/(1+ad)]`` for ``a in [0,1]``.

    Nonnegative because the per-jump term is monotone in the scaled jump
    size on ``d > -1``.  Accepts scalars or arrays.
    """
    a_arr = np.asarray(a, dtype=float)
    d_arr = np.asarray(dm, dtype=float)
    if np.any(a_arr < 0.0) or np.any(a_arr > 1.0):
        raise ValueError("control values must lie in [0, 1]")
    if np.any(d_arr <= -1.0):
        raise ValueError("jump sizes must exceed -1")
    full = np.log1p(d_arr) - d_arr / (1.0 + d_arr)
    ad = a_arr * d_arr
    scaled = np.log1p(ad) - ad / (1.0 + ad)
    out = full - scaled
    if np.ndim(a) == 0 and np.ndim(dm) == 0:
        return float(out)
    return out
