"""Breath-interval statistics and the two alarm tests.

Arrest detection: the time since the last breath is compared against the
upper limit of a confidence interval over acceptable individual gaps,
built from the infant's own recent intervals. Trend detection: a one-sided
t-test for a positive regression slope of interval duration on breath
index, which catches gradual slowing long before any single gap looks
alarming. Both tests adapt to the monitored subject instead of using a
fixed threshold.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .dsp import FRAME_SECONDS
from .errors import DomainError, NonMonotonicTime
from .stream import BreathEvent, Debouncer, PredictionFrame

INTERVAL_WINDOW_DEFAULT = 20
CI_LEVEL_DEFAULT = 0.80
TREND_ALPHA_DEFAULT = 0.05
ARREST_MIN_INTERVALS = 5
TREND_MIN_INTERVALS = 8
ARREST_FLOOR_SECONDS = 0.5


@dataclass(frozen=True)
class Alert:
    """One raised alarm; the statistic exceeded the threshold at `time`."""

    kind: str  # arrest | trend
    time: float
    statistic: float
    threshold: float


class IntervalSeries:
    """Ring buffer of the most recent inhale-to-inhale durations.

    Inhale events append a new interval (gap since the previous inhale)
    and exhale events only refresh the last-breath clock; both feed the
    arrest test, but the trend test runs on full breath cycles only.
    """

    def __init__(self, capacity: int = INTERVAL_WINDOW_DEFAULT):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._intervals: deque[float] = deque(maxlen=capacity)
        self.last_breath_time: float | None = None
        self._last_inhale: float | None = None

    def __len__(self) -> int:
        return len(self._intervals)

    def intervals(self) -> np.ndarray:
        return np.asarray(self._intervals, dtype=np.float64)

    def push_event(self, event: BreathEvent) -> "IntervalSeries":
        if self.last_breath_time is not None and event.time <= self.last_breath_time:
            raise NonMonotonicTime(
                f"event at {event.time} s does not advance past {self.last_breath_time} s")
        if event.kind == "inhale":
            if self._last_inhale is not None:
                self._intervals.append(event.time - self._last_inhale)
            self._last_inhale = event.time
        self.last_breath_time = event.time
        return self


def _beta_cf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta integral (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        coef = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        coef = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise DomainError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (a * math.log(x) + b * math.log1p(-x)
                - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _beta_cf(b, a, 1.0 - x) / b


def _t_cdf(t: float, df: int) -> float:
    """P(T <= t) for Student's t with df degrees of freedom, t >= 0."""
    if t <= 0.0:
        return 0.5
    x = df / (df + t * t)
    return 1.0 - 0.5 * _betainc_reg(0.5 * df, 0.5, x)


def t_quantile(p: float, df: int) -> float:
    """Upper quantile of Student's t, found by bisection on the CDF.

    Valid for p in (0.5, 1) and df >= 1; absolute error at most 1e-6.
    """
    if not 0.5 < p < 1.0:
        raise DomainError(f"p must be in (0.5, 1), got {p}")
    if df < 1:
        raise DomainError(f"df must be >= 1, got {df}")
    lo, hi = 0.0, 1.0
    while _t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e15:
            raise DomainError(f"quantile search failed for p={p}, df={df}")
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if _t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ols_slope_t(y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of y against its index, and the slope t-statistic.

    t = b1 / SE(b1) with SE(b1) = sqrt(SSE / (n - 2)) / sqrt(Sxx). A
    zero-residual fit has SE = 0; the statistic is then +/-inf in the
    direction of the slope (0 for a flat line), which is what makes the
    perfect-line convention in slope_check fall out naturally.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n < 3:
        raise DomainError(f"need at least 3 points for a slope t-statistic, got {n}")
    x = np.arange(n, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.sum(xc * xc))
    b1 = float(np.sum(xc * yc)) / sxx
    sse = float(np.sum((yc - b1 * xc) ** 2))
    se = math.sqrt(max(sse, 0.0) / (n - 2)) / math.sqrt(sxx)
    if se == 0.0:
        t = math.inf if b1 > 0 else (-math.inf if b1 < 0 else 0.0)
    else:
        t = b1 / se
    return b1, t


def arrest_check(series: IntervalSeries, now: float,
                 ci_level: float = CI_LEVEL_DEFAULT,
                 min_intervals: int = ARREST_MIN_INTERVALS,
                 floor: float = ARREST_FLOOR_SECONDS) -> Alert | None:
    """Alarm when the time since the last breath exceeds the tolerance bound.

    The bound is mean + t_{(1+ci)/2, n-1} * sd over the buffered
    intervals (the upper limit of a two-sided interval over acceptable
    individual gaps, using the sample sd), floored at mean + 0.5 s so a
    near-constant rhythm cannot arm a hair trigger. Unarmed until 5
    intervals exist. Monotone in `now`: once it alerts, any later call on
    the same series alerts too.
    """
    xs = series.intervals()
    if xs.size < min_intervals or series.last_breath_time is None:
        return None
    mean = float(xs.mean())
    sd = float(xs.std(ddof=1))
    quantile = t_quantile(0.5 + ci_level / 2.0, xs.size - 1)
    bound = max(mean + quantile * sd, mean + floor)
    elapsed = now - series.last_breath_time
    if elapsed > bound:
        return Alert(kind="arrest", time=now, statistic=elapsed, threshold=bound)
    return None


def slope_check(series: IntervalSeries,
                alpha: float = TREND_ALPHA_DEFAULT,
                min_intervals: int = TREND_MIN_INTERVALS) -> Alert | None:
    """One-sided t-test for a positive trend in the buffered intervals.

    Lengthening intervals are the dangerous direction, so only a positive
    slope can alarm; a perfect positive line (zero residual) alarms by
    convention. Needs at least 8 intervals.
    """
    xs = series.intervals()
    if xs.size < min_intervals:
        return None
    b1, t = ols_slope_t(xs)
    threshold = t_quantile(1.0 - alpha, int(xs.size) - 2)
    if t > threshold:
        time = series.last_breath_time if series.last_breath_time is not None else 0.0
        return Alert(kind="trend", time=time, statistic=t, threshold=threshold)
    return None


def run_detection(predictions: Iterable[PredictionFrame], *,
                  confidence: float = 0.99, run_length: int = 3,
                  refractory: float = 1.0,
                  interval_window: int = INTERVAL_WINDOW_DEFAULT,
                  ci_level: float = CI_LEVEL_DEFAULT,
                  trend_alpha: float = TREND_ALPHA_DEFAULT) -> Iterator[BreathEvent | Alert]:
    """Full detection chain: predictions -> debounced events -> alarms.

    Yields BreathEvent and Alert objects in detection order. All emitted
    timestamps live in the event time base: events are anchored at their
    accepting window's onset, which trails the confirming prediction by
    the window span plus the run-up (2.25 s at the defaults). The arrest
    clock is therefore also shifted into that base before the comparison;
    mixing bases would inflate every gap by that constant and false-alarm
    between perfectly ordinary breaths.

    Alarms are edge-triggered episodes: a kind fires when its statistic
    crosses the threshold and stays silent until the condition clears
    again, so one sustained condition yields exactly one alert. The
    arrest test ticks on every prediction (every 1/8 s); the trend test
    runs after each new interval.
    """
    debouncer = Debouncer(confidence=confidence, run_length=run_length, refractory=refractory)
    series = IntervalSeries(capacity=interval_window)
    confirmation_lag = debouncer.window_seconds + (run_length - 1) * FRAME_SECONDS
    armed = {"arrest": True, "trend": True}
    for pred in predictions:
        event = debouncer.push(pred)
        if event is not None:
            series.push_event(event)
            yield event
            if event.kind == "inhale":
                alert = slope_check(series, alpha=trend_alpha)
                if alert is not None and armed["trend"]:
                    armed["trend"] = False
                    yield alert
                elif alert is None:
                    armed["trend"] = True
        alert = arrest_check(series, now=pred.end_time - confirmation_lag,
                             ci_level=ci_level)
        if alert is not None and armed["arrest"]:
            armed["arrest"] = False
            yield alert
        elif alert is None:
            armed["arrest"] = True
