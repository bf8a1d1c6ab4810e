"""Adaptive ODE integration and limit-cycle period estimation.

The integrator is an embedded Runge-Kutta 4(5) pair (Dormand-Prince
coefficients, FSAL) with PI step-size control and dense output at
requested times via the method's fourth-order continuous extension (a
quartic in the step fraction built from the existing stages, so the
interpolated values keep pace with the propagated solution's accuracy).
The stepper loop is a numba kernel with a pure-numpy fallback (see
:mod:`prt.accel`); when the system right-hand side is itself a compiled
dispatcher the compiled stepper is used, otherwise the identical Python
path runs.

All case-study systems here are non-stiff at the parameters studied, so
this single explicit solver keeps the numerical core dependency-free.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .accel import USING_NUMBA, is_jitted, njit
from .errors import (
    NonFiniteStateError,
    NotPeriodicError,
    StepSizeUnderflowError,
)

_EPS = 2.220446049250313e-16

# Dormand-Prince 5(4) tableau. The 5th-order solution is propagated; the
# difference against the embedded 4th-order solution drives step control.
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

# dense-output stage weights: cubic-in-sigma polynomials (times sigma) whose
# interpolant matches both endpoint values and slopes and carries the same
# fifth-order local accuracy as the propagated solution
_P1 = (1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
       -12715105075.0 / 11282082432.0)
_P3 = (0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
       87487479700.0 / 32700410799.0)
_P4 = (0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
       -10690763975.0 / 1880347072.0)
_P5 = (0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
       701980252875.0 / 199316789632.0)
_P6 = (0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
       -1453857185.0 / 822651844.0)
_P7 = (0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
       69997945.0 / 29380423.0)

# status codes returned by the stepper core
_OK, _UNDERFLOW, _NONFINITE, _MAXSTEPS = 0, 1, 2, 3


def _rk45_core(rhs, theta, x0, t0, t1, out_times, rtol, atol, max_steps):
    dim = x0.shape[0]
    n_out = out_times.shape[0]
    out_states = np.empty((n_out, dim))
    n_steps = 0
    n_rejected = 0
    min_step = np.inf
    status = _OK

    t = t0
    x = x0.copy()
    k1 = rhs(t, x, theta)
    if not np.all(np.isfinite(k1)):
        return _NONFINITE, out_states, n_steps, n_rejected, min_step, t

    i_out = 0
    while i_out < n_out and out_times[i_out] <= t0:
        for j in range(dim):
            out_states[i_out, j] = x[j]
        i_out += 1

    # initial step: crude curvature-free guess, refined by the controller
    sc = atol + rtol * np.abs(x)
    d0 = np.sqrt(np.mean((x / sc) ** 2))
    d1 = np.sqrt(np.mean((k1 / sc) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6 * (t1 - t0)
    else:
        h = 0.01 * d0 / d1
    if h > t1 - t0:
        h = t1 - t0

    err_prev = 1.0
    while t < t1:
        if n_steps + n_rejected >= max_steps:
            status = _MAXSTEPS
            break
        h_floor = 16.0 * _EPS * max(abs(t), abs(t1 - t0))
        if h < h_floor:
            status = _UNDERFLOW
            break
        clamped = False
        if t + h >= t1:
            h = t1 - t
            clamped = True

        k2 = rhs(t + _C2 * h, x + h * (_A21 * k1), theta)
        k3 = rhs(t + _C3 * h, x + h * (_A31 * k1 + _A32 * k2), theta)
        k4 = rhs(t + _C4 * h, x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), theta)
        k5 = rhs(t + _C5 * h, x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4), theta)
        k6 = rhs(t + h, x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5), theta)
        x_new = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = rhs(t + h, x_new, theta)

        e = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        err = np.sqrt(np.mean((e / sc) ** 2))

        ok = True
        for j in range(dim):
            if not (np.isfinite(x_new[j]) and np.isfinite(k7[j])):
                ok = False
        if not (ok and np.isfinite(err)):
            n_rejected += 1
            h *= 0.25
            if h < h_floor:
                status = _NONFINITE
                break
            continue

        if err <= 1.0:
            t_new = t1 if clamped else t + h
            while i_out < n_out and out_times[i_out] <= t_new:
                s = (out_times[i_out] - t) / h
                w1 = s * (_P1[0] + s * (_P1[1] + s * (_P1[2] + s * _P1[3])))
                w3 = s * (_P3[0] + s * (_P3[1] + s * (_P3[2] + s * _P3[3])))
                w4 = s * (_P4[0] + s * (_P4[1] + s * (_P4[2] + s * _P4[3])))
                w5 = s * (_P5[0] + s * (_P5[1] + s * (_P5[2] + s * _P5[3])))
                w6 = s * (_P6[0] + s * (_P6[1] + s * (_P6[2] + s * _P6[3])))
                w7 = s * (_P7[0] + s * (_P7[1] + s * (_P7[2] + s * _P7[3])))
                for j in range(dim):
                    out_states[i_out, j] = x[j] + h * (
                        w1 * k1[j] + w3 * k3[j] + w4 * k4[j]
                        + w5 * k5[j] + w6 * k6[j] + w7 * k7[j])
                i_out += 1
            t = t_new
            x = x_new
            k1 = k7
            n_steps += 1
            if h < min_step:
                min_step = h
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * err ** -0.14 * err_prev ** 0.08
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            err_prev = err if err > 1e-10 else 1e-10
            h = h * fac
        else:
            n_rejected += 1
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            h = h * fac

    return status, out_states, n_steps, n_rejected, min_step, t


_rk45_py = _rk45_core
_rk45_jit = njit(cache=False)(_rk45_core) if USING_NUMBA else _rk45_core


@dataclass(frozen=True)
class OdeSystem:
    """An ODE system dx/dt = rhs(t, x, theta) with observation map.

    ``rhs`` may be a plain callable or a compiled numba dispatcher; in the
    latter case integration runs fully inside the compiled stepper.
    ``initial_state`` maps theta to x(0); ``observe`` maps (x, theta) to
    the observed output vector.
    """

    dim: int
    rhs: Callable
    initial_state: Callable[[np.ndarray], np.ndarray]
    observe: Optional[Callable] = None


@dataclass(frozen=True)
class Trajectory:
    """ODE solution sampled at requested times, with solver diagnostics."""

    times: np.ndarray
    states: np.ndarray
    observations: np.ndarray
    solver_stats: dict


@dataclass(frozen=True)
class PeriodEstimate:
    """Mean inter-peak interval of an oscillatory trajectory."""

    period: float
    n_peaks_used: int
    peak_times: np.ndarray
    cv_interpeak: float


def integrate(system: OdeSystem, theta, t_span, output_times,
              tolerances=(1e-8, 1e-10), max_steps=2_000_000) -> Trajectory:
    """Integrate ``system`` over ``t_span`` with dense output at ``output_times``.

    The local error per step is kept below ``rel*|x| + abs`` for
    ``(rel, abs) = tolerances``. Default tolerances are tight because
    finite-difference gradients of solver output need solver noise well
    below the truncation error of the difference stencil.

    Raises
    ------
    StepSizeUnderflowError
        Step control collapsed (stiffness) or the step budget ran out.
    NonFiniteStateError
        The state left the finite domain (blow-up).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t0 < t1:
        raise ValueError(f"need t0 < t1, got ({t0}, {t1})")
    rtol, atol = float(tolerances[0]), float(tolerances[1])
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    out_times = np.asarray(output_times, dtype=float)
    if out_times.ndim != 1 or out_times.size == 0:
        raise ValueError("output_times must be a non-empty 1-d array")
    if np.any(np.diff(out_times) <= 0):
        raise ValueError("output_times must be strictly increasing")
    if out_times[0] < t0 or out_times[-1] > t1:
        raise ValueError("output_times must lie within t_span")

    theta = np.asarray(theta, dtype=float)
    x0 = np.asarray(system.initial_state(theta), dtype=float)
    if x0.shape != (system.dim,):
        raise ValueError(f"initial state has shape {x0.shape}, expected ({system.dim},)")

    core = _rk45_jit if is_jitted(system.rhs) else _rk45_py
    status, states, n_steps, n_rejected, min_step, t_fail = core(
        system.rhs, theta, x0, t0, t1, out_times, rtol, atol, max_steps)

    if status == _UNDERFLOW:
        raise StepSizeUnderflowError(f"step size underflow at t={t_fail:.6g}")
    if status == _MAXSTEPS:
        raise StepSizeUnderflowError(f"step budget {max_steps} exhausted at t={t_fail:.6g}")
    if status == _NONFINITE:
        raise NonFiniteStateError(f"non-finite state at t={t_fail:.6g}")
    if not np.all(np.isfinite(states)):
        raise NonFiniteStateError("non-finite interpolated state")

    if system.observe is None:
        obs = states.copy()
    else:
        obs = np.asarray([system.observe(states[i], theta) for i in range(states.shape[0])],
                         dtype=float)
        if obs.ndim == 1:
            obs = obs[:, None]
    stats = {"steps": int(n_steps), "rejected": int(n_rejected), "min_step": float(min_step)}
    return Trajectory(times=out_times.copy(), states=states, observations=obs,
                      solver_stats=stats)


def _quadratic_peak(tm, t0, tp, xm, x0, xp):
    # vertex of the parabola through three points around a discrete maximum
    d1 = (x0 - xm) / (t0 - tm)
    d2 = (xp - x0) / (tp - t0)
    curv = (d2 - d1) / (tp - tm)
    if curv >= 0.0:
        return t0
    # derivative of the Newton form at the vertex
    return 0.5 * (tm + t0) - d1 / (2.0 * curv)


def estimate_period(traj: Trajectory, variable_index: int,
                    transient_fraction: float = 0.5,
                    periodicity_cv_tol: float = 0.05,
                    min_relative_amplitude: float = 1e-3) -> PeriodEstimate:
    """Estimate the oscillation period of one state variable.

    The first ``transient_fraction`` of the time span is discarded;
    strict local maxima of the chosen variable are located and refined by
    quadratic interpolation through each discrete-maximum triple. The
    period is the mean inter-peak interval. The estimate is rejected as
    :class:`NotPeriodicError` when fewer than four peaks remain or the
    inter-peak coefficient of variation exceeds ``periodicity_cv_tol`` --
    the signal that a sampled parameter point is outside the oscillatory
    regime. ``min_relative_amplitude`` additionally rejects vanishing
    ripples (a trajectory spiralling into a stable fixed point keeps
    perfectly regular peaks while its amplitude decays to solver noise).
    """
    if not 0.0 <= transient_fraction < 1.0:
        raise ValueError("transient_fraction must be in [0, 1)")
    t = traj.times
    x = traj.states[:, variable_index]
    cutoff = t[0] + transient_fraction * (t[-1] - t[0])
    keep = t >= cutoff
    t = t[keep]
    x = x[keep]
    if t.size < 5:
        raise NotPeriodicError("too few samples after transient removal")
    amplitude = float(np.max(x) - np.min(x))
    scale = float(np.max(np.abs(x)))
    if amplitude <= min_relative_amplitude * max(scale, 1e-300):
        raise NotPeriodicError(
            f"amplitude {amplitude:.3g} below {min_relative_amplitude:g} of signal scale")

    peak_times = []
    for i in range(1, t.size - 1):
        if x[i - 1] < x[i] and x[i] > x[i + 1]:
            peak_times.append(_quadratic_peak(t[i - 1], t[i], t[i + 1],
                                              x[i - 1], x[i], x[i + 1]))
    if len(peak_times) < 4:
        raise NotPeriodicError(f"only {len(peak_times)} peaks found, need >= 4")

    peak_times = np.asarray(peak_times)
    gaps = np.diff(peak_times)
    period = float(np.mean(gaps))
    if period <= 0:
        raise NotPeriodicError("non-positive mean inter-peak interval")
    cv = float(np.std(gaps) / period)
    if cv > periodicity_cv_tol:
        raise NotPeriodicError(
            f"inter-peak coefficient of variation {cv:.3g} exceeds {periodicity_cv_tol:.3g}")
    return PeriodEstimate(period=period, n_peaks_used=len(peak_times),
                          peak_times=peak_times, cv_interpeak=cv)
