"""Realized trajectories of finite-activity jump local martingales.

A :class:`JumpPath` is one observed trajectory up to a realized stopping
time: an ordered list of jumps, a piecewise-smooth finite-variation drift
(the compensator of compensated Poisson integrals), and the continuous
quadratic variation carried abstractly.  Drifts are closed-form functions
of time, not grid discretizations, so the algebraic identities checked
elsewhere hold to rounding error only.

The three example models are built here, each driven by one or two scalar
laws from :mod:`doleans.distributions` through inverse-transform sampling.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .distributions import (
    InverseCdfDistribution,
    make_eta_distribution,
    make_first_jump_time,
    make_xi_distribution,
)

__all__ = [
    "ZeroDrift",
    "ExpCompensatorDrift",
    "ScaledDrift",
    "ZeroQv",
    "LinearQv",
    "ScaledQv",
    "JumpPath",
    "PredictableControl",
    "control_indicator_after",
    "integrate_control",
    "integrate_control_drift",
    "Driver",
    "ProcessModel",
    "example1_model",
    "example2_model",
    "example3_model",
    "path_to_json",
    "path_from_json",
    "EXAMPLE_MODELS",
]

logger = logging.getLogger(__name__)

# Smallest uniform admitted by samplers; keeps inverse CDFs off the 0 endpoint.
_MIN_UNIFORM = 1e-300

#: Default cap on exponentially distributed jump times.  Jump sizes are
#: e^{tau}, and e^{700} ~ 1.01e304 is the largest power that stays well
#: inside float64 range for every downstream functional; the probability
#: of hitting the cap is e^{-700}.
DEFAULT_JUMP_TIME_CAP = 700.0


# ----------------------------------------------------------------------
# Drift and continuous-quadratic-variation components (closed form).
# ----------------------------------------------------------------------

class ZeroDrift:
    """Identically zero finite-variation part."""

    __slots__ = ()
    kind = "zero"

    def __call__(self, t: float) -> float:
        return 0.0

    def derivative(self, t: float) -> float:
        return 0.0


class ExpCompensatorDrift:
    """Compensator ``-(e^{t - start} - 1)`` of a stopped exponential Poisson integral.

    Zero before ``start``; the path's horizon bounds evaluation, so no
    explicit stopping is applied here.
    """

    __slots__ = ("start",)

    def __init__(self, start: float = 0.0):
        self.start = float(start)

    @property
    def kind(self) -> str:
        return f"exp_compensator:{self.start!r}"

    def __call__(self, t: float) -> float:
        if t <= self.start:
            return 0.0
        return -math.expm1(t - self.start)

    def derivative(self, t: float) -> float:
        if t <= self.start:
            return 0.0
        return -math.exp(t - self.start)


class ScaledDrift:
    """A drift multiplied by a constant factor."""

    __slots__ = ("base", "factor")
    kind = "derived"

    def __init__(self, base, factor: float):
        self.base = base
        self.factor = float(factor)

    def __call__(self, t: float) -> float:
        return self.factor * self.base(t)

    def derivative(self, t: float) -> float:
        return self.factor * self.base.derivative(t)


class ZeroQv:
    """Identically zero continuous quadratic variation."""

    __slots__ = ()
    kind = "zero"

    def __call__(self, t: float) -> float:
        return 0.0


class LinearQv:
    """Continuous quadratic variation growing at a constant rate."""

    __slots__ = ("rate",)

    def __init__(self, rate: float):
        if rate < 0.0:
            raise ValueError("quadratic variation rate must be nonnegative")
        self.rate = float(rate)

    @property
    def kind(self) -> str:
        return f"linear:{self.rate!r}"

    def __call__(self, t: float) -> float:
        return self.rate * t


class ScaledQv:
    """A quadratic variation multiplied by a nonnegative factor."""

    __slots__ = ("base", "factor")
    kind = "derived"

    def __init__(self, base, factor: float):
        if factor < 0.0:
            raise ValueError("quadratic variation factor must be nonnegative")
        self.base = base
        self.factor = float(factor)

    def __call__(self, t: float) -> float:
        return self.factor * self.base(t)


_ZERO_DRIFT = ZeroDrift()
_ZERO_QV = ZeroQv()


# ----------------------------------------------------------------------
# JumpPath
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class JumpPath:
    """One cadlag trajectory observed on ``[0, horizon]``.

    ``jumps`` holds ``(time, size)`` pairs with strictly increasing times in
    ``(0, horizon]`` and every size ``> -1``; ``drift`` is the continuous
    finite-variation part between jumps and ``cont_qv`` the continuous
    quadratic variation, both evaluated in closed form.  The path value is
    ``drift(t) + sum of jump sizes up to t``.
    """

    horizon: float
    jumps: tuple[tuple[float, float], ...] = ()
    drift: Callable = _ZERO_DRIFT
    cont_qv: Callable = _ZERO_QV

    def __post_init__(self):
        if not (self.horizon >= 0.0):
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        prev = 0.0
        for t, dm in self.jumps:
            if not (prev < t <= self.horizon):
                raise ValueError(
                    f"jump times must be strictly increasing in (0, horizon], got {t}"
                )
            if not (dm > -1.0):
                raise ValueError(f"jump sizes must exceed -1, got {dm}")
            prev = t

    def value_at(self, t: float) -> float:
        """Path value ``M_t`` for ``t <= horizon``."""
        self._check_time(t)
        s = self.drift(t)
        for ti, dm in self.jumps:
            if ti > t:
                break
            s += dm
        return s

    def _check_time(self, t: float) -> None:
        if not (0.0 <= t <= self.horizon):
            raise ValueError(f"time {t} outside [0, {self.horizon}]")


# ----------------------------------------------------------------------
# Predictable controls: left-continuous piecewise-constant a_s in [0, 1].
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PredictableControl:
    """Left-continuous piecewise-constant process with values in [0, 1].

    ``values[k]`` applies on the interval ``(breaks[k-1], breaks[k]]``
    (with ``breaks[-1] = 0`` and ``breaks[len] = inf`` implied), so the
    value *at* a breakpoint is the one from the left --- the canonical
    predictability surrogate for piecewise-constant processes.
    """

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        prev = -math.inf
        for b in self.breaks:
            if not (b >= 0.0 and b > prev):
                raise ValueError("breakpoints must be strictly increasing and >= 0")
            prev = b
        for v in self.values:
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"control values must lie in [0, 1], got {v}")

    @classmethod
    def constant(cls, value: float) -> "PredictableControl":
        return cls((), (float(value),))

    @classmethod
    def indicator_after(cls, t0: float) -> "PredictableControl":
        if t0 < 0.0:
            raise ValueError("indicator time must be nonnegative")
        return cls((float(t0),), (0.0, 1.0))

    def value_at(self, s: float) -> float:
        return self.values[bisect_left(self.breaks, s)]

    def segments_until(self, t: float) -> Iterator[tuple[float, float, float]]:
        """Yield ``(lo, hi, value)`` with value held on ``(lo, hi]``, partitioning ``(0, t]``."""
        if t <= 0.0:
            return
        lo = 0.0
        for b, v in zip(self.breaks, self.values):
            if b >= t:
                yield (lo, t, v)
                return
            if b > lo:
                yield (lo, b, v)
            lo = b
        yield (lo, t, self.values[-1])

    def complement(self) -> "PredictableControl":
        return PredictableControl(self.breaks, tuple(1.0 - v for v in self.values))

    def blend(self, other: "PredictableControl", alpha: float) -> "PredictableControl":
        """Convex combination ``alpha * self + (1 - alpha) * other``."""
        if not (0.0 <= alpha <= 1.0):
            raise ValueError("blend weight must lie in [0, 1]")
        breaks = tuple(sorted(set(self.breaks) | set(other.breaks)))
        probes = [b for b in breaks] + [(breaks[-1] + 1.0) if breaks else 0.0]
        values = tuple(
            alpha * self.value_at(p) + (1.0 - alpha) * other.value_at(p)
            for p in probes
        )
        return PredictableControl(breaks, values)

    def label(self) -> str:
        """Short parseable description, e.g. ``0.5`` or ``indicator:1.0``."""
        if not self.breaks:
            return repr(self.values[0])
        if self.values == (0.0, 1.0) and len(self.breaks) == 1:
            return f"indicator:{self.breaks[0]!r}"
        return f"piecewise:{self.breaks!r}:{self.values!r}"


def control_indicator_after(t0: float) -> PredictableControl:
    """Control equal to 0 on ``[0, t0]`` and 1 on ``(t0, inf)``.

    Left-continuity makes a jump occurring exactly at ``t0`` see the value 0.
    """
    return PredictableControl.indicator_after(t0)


def integrate_control_drift(path: JumpPath, a: PredictableControl, t: float) -> float:
    """Drift part of the control integral: ``int_0^t a(s) d(drift)(s)``.

    Exact on each constant segment of the control because the drift is a
    closed-form function of time.
    """
    path._check_time(t)
    return math.fsum(
        v * (path.drift(hi) - path.drift(lo)) for lo, hi, v in a.segments_until(t)
    )


def integrate_control(path: JumpPath, a: PredictableControl, t: float) -> float:
    """Stochastic integral ``int_0^t a dM`` of a piecewise-constant control.

    Equals the jump sum ``sum a(t_i) dM_i`` plus the drift part, both in
    closed form.
    """
    path._check_time(t)
    jump_sum = math.fsum(a.value_at(ti) * dm for ti, dm in path.jumps if ti <= t)
    return jump_sum + integrate_control_drift(path, a, t)


# ----------------------------------------------------------------------
# Process models
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Driver:
    """One scalar law driving a model, with its divergence-probe policy.

    ``truncate(level)`` maps a probe level to a ``(lo, hi)`` clip of the
    driver's domain (``None`` meaning unbounded) and ``growth`` names the
    growth model of truncated expectations: ``"log"`` (value against
    ``ln(1/level)``) or ``"linear"`` (value against ``level``).
    """

    name: str
    dist: InverseCdfDistribution
    anchor: float
    levels: tuple[float, ...]
    growth: str
    truncate: Callable[[float], tuple[float | None, float | None]]

    def __post_init__(self):
        if self.growth not in ("log", "linear"):
            raise ValueError(f"unknown growth model {self.growth!r}")


@dataclass(frozen=True)
class ProcessModel:
    """A law of jump-martingale paths: driver laws plus a path builder.

    ``build(*driver_values)`` maps realized driver values to a
    :class:`JumpPath`; sampling composes it with inverse-transform draws.
    ``disc_qv`` and ``lm_compensator``, when present, give the closed-form
    predictable quadratic variation of the purely discontinuous part and
    the compensator used by the compensator-based integrability condition,
    both as functions ``(path, t) -> float``.
    """

    name: str
    drivers: tuple[Driver, ...]
    build: Callable[..., JumpPath]
    disc_qv: Callable[[JumpPath, float], float] | None = None
    lm_compensator: Callable[[JumpPath, float], float] | None = None
    description: str = ""
    truncation_flag: Callable[[JumpPath], bool] | None = None

    def sampler(self, seed: int, stream_index: int) -> JumpPath:
        """Deterministic path for ``(seed, stream_index)`` via a counter-based RNG."""
        rng = np.random.Generator(np.random.Philox(key=seed).jumped(stream_index))
        return self.sample_chunk(rng, 1)[0]

    def sample_chunk(self, rng: np.random.Generator, count: int) -> list[JumpPath]:
        """Draw ``count`` paths from one RNG stream, consuming uniforms in order.

        Paths truncated by the model's jump-time cap are counted and
        reported (53-bit uniforms cannot actually reach the default cap;
        the guard matters only for exotic caps).
        """
        u = rng.random((count, len(self.drivers)))
        np.clip(u, _MIN_UNIFORM, None, out=u)
        cols = [d.dist.inverse_cdf(u[:, i]) for i, d in enumerate(self.drivers)]
        paths = [
            self.build(*(float(col[k]) for col in cols)) for k in range(count)
        ]
        if self.truncation_flag is not None:
            truncated = sum(1 for p in paths if self.truncation_flag(p))
            if truncated:
                logger.warning(
                    "%d of %d sampled paths hit the jump-time cap", truncated, count
                )
        return paths


def example1_model() -> ProcessModel:
    """Discrete-time martingale with a single jump of size xi at time 1."""
    xi = make_xi_distribution()
    drivers = (
        Driver(
            name="xi",
            dist=xi,
            anchor=0.0,
            levels=(1e-2, 1e-3, 1e-4, 1e-5),
            growth="log",
            truncate=lambda delta: (-1.0 + delta, None),
        ),
    )

    def build(x: float) -> JumpPath:
        return JumpPath(horizon=1.0, jumps=((1.0, x),))

    return ProcessModel(
        name="example1",
        drivers=drivers,
        build=build,
        description="single jump drawn from the xi law at time 1, horizon 1",
    )


def _capped(value: float, cap: float) -> float:
    return cap if value > cap else value


def _ps_disc_qv(path: JumpPath, t: float) -> float:
    # int_0^{t ^ horizon} e^{2s} ds
    return 0.5 * math.expm1(2.0 * min(t, path.horizon))


def _lm_primitive(u: float) -> float:
    # antiderivative of (1+u) ln(1+u) / u in u: -Li2(-u) + (1+u) ln(1+u) - u
    from scipy.special import spence

    return -float(spence(1.0 + u)) + (1.0 + u) * math.log1p(u) - u


_LM_AT_ONE = None


def _lm_profile(T: float) -> float:
    # int_0^T ((1+e^s) ln(1+e^s) - e^s) ds, elementary up to a dilogarithm
    global _LM_AT_ONE
    if _LM_AT_ONE is None:
        _LM_AT_ONE = _lm_primitive(1.0)
    if T <= 0.0:
        return 0.0
    u = math.exp(T)
    return (_lm_primitive(u) - _LM_AT_ONE) - (u - 1.0)


def _lm_compensator(path: JumpPath, t: float) -> float:
    return _lm_profile(min(t, path.horizon))


def example2_model(jump_time_cap: float = DEFAULT_JUMP_TIME_CAP) -> ProcessModel:
    """Compensated Poisson integral of e^s stopped at the first jump.

    The path has one jump of size ``e^{tau}`` at the exponential time
    ``tau`` and drift ``-(e^t - 1)``; its value at the horizon is exactly 1
    for every realization.  ``disc_qv`` and ``lm_compensator`` are the
    closed forms ``int e^{2s} ds`` and
    ``int ((1+e^s) ln(1+e^s) - e^s) ds`` on ``[0, t ^ tau]``.
    """
    law = make_first_jump_time()
    drivers = (
        Driver(
            name="tau1",
            dist=law,
            anchor=1.0,
            levels=(10.0, 20.0, 40.0, 80.0),
            growth="linear",
            truncate=lambda T: (None, T),
        ),
    )

    def build(e: float) -> JumpPath:
        # floor keeps the horizon strictly positive in float
        tau = _capped(max(e, 1e-300), jump_time_cap)
        return JumpPath(
            horizon=tau,
            jumps=((tau, math.exp(tau)),),
            drift=ExpCompensatorDrift(0.0),
        )

    return ProcessModel(
        name="example2",
        drivers=drivers,
        build=build,
        disc_qv=_ps_disc_qv,
        lm_compensator=_lm_compensator,
        description="compensated integral of e^s against a Poisson process, "
        "stopped at the first jump",
        truncation_flag=lambda p: p.horizon >= jump_time_cap,
    )


def example3_model(jump_time_cap: float = DEFAULT_JUMP_TIME_CAP) -> ProcessModel:
    """Two-jump local martingale: an eta jump at time 1, then a restarted
    compensated Poisson integral of ``e^{s-1}`` stopped at its first jump.

    The two drivers (eta and the post-1 exponential waiting time) are
    sampled independently.
    """
    eta = make_eta_distribution()
    law = make_first_jump_time()
    drivers = (
        Driver(
            name="eta",
            dist=eta,
            anchor=0.0,
            levels=(1e-2, 1e-3, 1e-4, 1e-5),
            growth="log",
            truncate=lambda delta: (None, 1.0 / delta),
        ),
        Driver(
            name="tau1_hat",
            dist=law,
            anchor=1.0,
            levels=(10.0, 20.0, 40.0, 80.0),
            growth="linear",
            truncate=lambda T: (None, T),
        ),
    )

    def build(x: float, e: float) -> JumpPath:
        # floor keeps 1 + e strictly above 1 in float so the two jump
        # times stay ordered; the displaced mass is ~1e-15
        tau_hat = 1.0 + _capped(max(e, 1e-15), jump_time_cap)
        return JumpPath(
            horizon=tau_hat,
            jumps=((1.0, x), (tau_hat, math.exp(tau_hat - 1.0))),
            drift=ExpCompensatorDrift(1.0),
        )

    return ProcessModel(
        name="example3",
        drivers=drivers,
        build=build,
        description="eta jump at time 1 plus a restarted compensated "
        "exponential Poisson integral stopped at its first jump",
        truncation_flag=lambda p: p.horizon >= 1.0 + jump_time_cap,
    )


EXAMPLE_MODELS: dict[str, Callable[[], ProcessModel]] = {
    "example1": example1_model,
    "example2": example2_model,
    "example3": example3_model,
}


# ----------------------------------------------------------------------
# JSON round-tripping for sampled paths
# ----------------------------------------------------------------------

def path_to_json(path: JumpPath) -> dict:
    """Serialize a sampled path; field names are part of the CLI contract."""
    for component in (path.drift, path.cont_qv):
        if component.kind == "derived":
            raise ValueError("derived drift/qv components are not serializable")
    return {
        "horizon": path.horizon,
        "jumps": [{"t": t, "dm": dm} for t, dm in path.jumps],
        "drift_kind": path.drift.kind,
        "cont_qv_kind": path.cont_qv.kind,
    }


def _drift_from_kind(kind: str):
    if kind == "zero":
        return _ZERO_DRIFT
    if kind.startswith("exp_compensator:"):
        return ExpCompensatorDrift(float(kind.split(":", 1)[1]))
    raise ValueError(f"unknown drift kind {kind!r}")


def _qv_from_kind(kind: str):
    if kind == "zero":
        return _ZERO_QV
    if kind.startswith("linear:"):
        return LinearQv(float(kind.split(":", 1)[1]))
    raise ValueError(f"unknown cont_qv kind {kind!r}")


def path_from_json(doc: dict) -> JumpPath:
    """Rebuild a path serialized by :func:`path_to_json`."""
    return JumpPath(
        horizon=float(doc["horizon"]),
        jumps=tuple((float(j["t"]), float(j["dm"])) for j in doc["jumps"]),
        drift=_drift_from_kind(doc["drift_kind"]),
        cont_qv=_qv_from_kind(doc["cont_qv_kind"]),
    )
