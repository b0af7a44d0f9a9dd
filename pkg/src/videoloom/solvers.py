"""Probability-flow ODE steppers over decreasing noise levels.

A slope field is any callable f(x, t) -> slope with the slope shaped like x,
under the convention x(t - dt) ~= x(t) + dt * f(x, t). Four steppers share
that contract:

  euler      x + dt * k1
  heun       trapezoid with k2 evaluated at (x + dt*k1, t - dt); order 2
  paper      trapezoid with k2 evaluated at the midpoint (t - dt/2); the
             mismatch between sample point and quadrature rule costs an
             order, so expect order 1 with a smaller constant than euler
  midpoint   x + dt * k2 with k2 at the midpoint; order 2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NoiseSchedule

_TIME_SLACK = 1e-9


def _slope(field, x, t):
    k = np.asarray(field(x, float(t)))
    if k.shape != x.shape:
        raise ValueError(f"slope shape {k.shape} does not match state {x.shape}")
    if not np.isfinite(k).all():
        raise FloatingPointError(f"non-finite slope at t={t}")
    return k


def _check_step(t, dt):
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    if t - dt < -_TIME_SLACK:
        raise ValueError(f"step from t={t} by dt={dt} would cross zero")


def euler_step(field, x, t, dt):
    _check_step(t, dt)
    k1 = _slope(field, x, t)
    return (x + dt * k1).astype(x.dtype, copy=False)


def heun_step(field, x, t, dt):
    """Classical Heun: full predictor step, trapezoidal average."""
    _check_step(t, dt)
    k1 = _slope(field, x, t)
    pred = (x + dt * k1).astype(x.dtype, copy=False)
    k2 = _slope(field, pred, t - dt)
    return (x + dt * 0.5 * (k1 + k2)).astype(x.dtype, copy=False)


def paper_step(field, x, t, dt):
    """Trapezoidal average with the correction slope sampled at the midpoint."""
    _check_step(t, dt)
    k1 = _slope(field, x, t)
    half = (x + 0.5 * dt * k1).astype(x.dtype, copy=False)
    k2 = _slope(field, half, t - 0.5 * dt)
    return (x + dt * 0.5 * (k1 + k2)).astype(x.dtype, copy=False)


def midpoint_step(field, x, t, dt):
    _check_step(t, dt)
    k1 = _slope(field, x, t)
    half = (x + 0.5 * dt * k1).astype(x.dtype, copy=False)
    k2 = _slope(field, half, t - 0.5 * dt)
    return (x + dt * k2).astype(x.dtype, copy=False)


STEPPERS = {
    "euler": euler_step,
    "heun": heun_step,
    "paper": paper_step,
    "midpoint": midpoint_step,
}

CALLS_PER_STEP = {"euler": 1, "heun": 2, "paper": 2, "midpoint": 2}


def get_stepper(solver: str):
    try:
        return STEPPERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}, expected one of {sorted(STEPPERS)}") from None


@dataclass(eq=False)
class StepReport:
    """What a full integration did: solver id, steps, field calls, end state."""

    solver: str
    steps: int
    calls: int
    state: np.ndarray


def solve(field, x0, schedule: NoiseSchedule, solver: str = "heun",
          final_step_euler: bool = False) -> StepReport:
    """Integrate x0 across the whole schedule with one stepper.

    ``final_step_euler`` swaps the last step for an Euler step, saving one
    field call when evaluating the field at t=0 is undesirable. Step errors
    propagate with the failing step index attached.
    """
    step_fn = get_stepper(solver)
    calls = 0

    def counted(x, t):
        nonlocal calls
        calls += 1
        return field(x, t)

    x = np.asarray(x0).copy()
    gaps = schedule.gaps()
    for idx, (t0, t1) in enumerate(gaps):
        fn = euler_step if (final_step_euler and idx == len(gaps) - 1) else step_fn
        try:
            x = fn(counted, x, t0, t0 - t1)
        except FloatingPointError as exc:
            raise FloatingPointError(f"step {idx}: {exc}") from None
    return StepReport(solver, len(gaps), calls, x)


@dataclass(eq=False)
class ConvergenceResult:
    solver: str
    rows: list  # (N, max abs endpoint error)
    slope: float  # least-squares slope of log2 err vs log2 N; nan if any err is 0


def convergence_study(field, exact_endpoint, solver: str, step_counts,
                      x0=None, t_max: float = 1.0, kind: str = "linear",
                      rho: float = 3.0) -> ConvergenceResult:
    """Measure the global-error order of a stepper against a closed form.

    ``exact_endpoint(x0, t_from, t_to)`` must return the true trajectory
    endpoint. Needs at least three step counts to fit a slope; a zero error
    anywhere (an exactly-integrated field) yields the nan sentinel instead
    of a meaningless fit. The default state is float64 so the measured
    order reflects the scheme, not float32 storage rounding.
    """
    from .core import make_schedule

    counts = [int(n) for n in step_counts]
    if len(counts) < 3:
        raise ValueError("need at least 3 step counts to fit an order")
    if any(n < 1 for n in counts):
        raise ValueError("step counts must be >= 1")
    if x0 is None:
        x0 = np.ones(1, dtype=np.float64)
    truth = np.asarray(exact_endpoint(x0, t_max, 0.0), dtype=np.float64)
    rows = []
    for n in counts:
        schedule = make_schedule(kind, t_max, n, rho=rho)
        report = solve(field, x0, schedule, solver=solver)
        err = float(np.max(np.abs(report.state.astype(np.float64) - truth)))
        rows.append((n, err))
    if any(err == 0.0 for _, err in rows):
        slope = float("nan")
    else:
        logn = np.log2([n for n, _ in rows])
        loge = np.log2([err for _, err in rows])
        slope = float(np.polyfit(logn, loge, 1)[0])
    return ConvergenceResult(solver, rows, slope)
