"""
Adaptive Dormand-Prince 5(4) stepper with cubic Hermite dense output.

Kept in-house rather than delegating to ``scipy.integrate.solve_ivp`` so
that the step controller is pinned (results are bit-reproducible for a
given ``CONTROLLER_VERSION``) and so the dense output is the cubic Hermite
interpolant on (y0, f0, y1, f1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONTROLLER_VERSION = "dopri54-i-v1"

# Dormand & Prince (1980) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4
_A_ROWS = [np.array(row) for row in _A]

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class IntegrationError(RuntimeError):
    """Raised when the state stops being finite or the step size collapses."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good t = {last_good_time:.6e} s)")
        self.last_good_time = last_good_time


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), n)
    n_steps: int
    n_rejected: int
    n_rhs: int


def _hermite(t0, h, y0, f0, y1, f1, t):
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return (
        np.multiply.outer(h00, y0)
        + np.multiply.outer(h10 * h, f0)
        + np.multiply.outer(h01, y1)
        + np.multiply.outer(h11 * h, f1)
    )


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    with np.errstate(invalid="ignore", over="ignore"):  # non-finite is caught by the caller
        r = np.abs(err / scale)
        return math.sqrt(float(r @ r) / r.size)


def integrate_dopri(fun, t_span, y0, t_eval, rtol=1e-8, atol=1e-12,
                    max_step=np.inf, first_step=None, max_steps=5_000_000):
    """Integrate ``dy/dt = fun(t, y)`` over ``t_span``.

    Parameters
    ----------
    fun : callable
        Right-hand side, ``fun(t, y) -> array`` with the dtype of ``y0``
        (complex states are fine).
    t_span : (float, float)
        Start and end time; ``t_end > t_start``.
    y0 : array_like
        Initial state.
    t_eval : array_like
        Sorted output times within ``t_span``.
    rtol, atol : float
        Mixed error tolerance per component.
    max_step : float
        Upper bound on the step; use it to avoid stepping over pulses that
        start inside the interval.

    Returns
    -------
    Solution
    """
    t0, t_end = map(float, t_span)
    if not t_end > t0:
        raise ValueError("t_end must exceed t_start")
    y = np.array(y0, dtype=np.result_type(np.asarray(y0).dtype, float))
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size and (t_eval[0] < t0 or t_eval[-1] > t_end or np.any(np.diff(t_eval) < 0)):
        raise ValueError("t_eval must be sorted and inside t_span")
    out = np.empty((t_eval.size, y.size), dtype=y.dtype)

    f = np.asarray(fun(t0, y), dtype=y.dtype)
    n_rhs = 1
    if not np.all(np.isfinite(f)):
        raise IntegrationError("non-finite derivative at start", t0)

    span = t_end - t0
    if first_step is None:
        d0 = _error_norm(y, y, y, rtol, atol) if np.any(y) else 0.0
        d1 = _error_norm(f, y, y, rtol, atol)
        h = 1e-6 * span if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    else:
        h = first_step
    h = min(h, max_step, span)

    k = np.empty((7, y.size), dtype=y.dtype)
    t = t0
    i_out = 0
    while i_out < t_eval.size and t_eval[i_out] <= t0:
        out[i_out] = y
        i_out += 1

    n_steps = n_rej = 0
    while t < t_end:
        if n_steps + n_rej >= max_steps:
            raise IntegrationError("step budget exhausted", t)
        h = min(h, t_end - t)
        if h < 1e-14 * max(abs(t), span):
            raise IntegrationError("step size underflow", t)
        k[0] = f
        for s in range(1, 7):
            ys = y + h * (_A_ROWS[s] @ k[:s])
            k[s] = fun(t + _C[s] * h, ys)
        n_rhs += 6
        y_new = ys  # stage 7 is evaluated at the 5th order solution (FSAL)
        err = h * (_E @ k)
        enorm = _error_norm(err, y, y_new, rtol, atol)
        if not math.isfinite(enorm) or not np.isfinite(y_new).all():
            if h < 1e-14 * max(abs(t), span) * 10:
                raise IntegrationError("non-finite state", t)
            n_rej += 1
            h *= MIN_FACTOR
            continue
        if enorm <= 1.0:
            t_new = t + h
            f_new = k[6].copy()
            if i_out < t_eval.size:
                j = i_out
                while j < t_eval.size and t_eval[j] <= t_new:
                    j += 1
                if j > i_out:
                    out[i_out:j] = _hermite(t, h, y, f, y_new, f_new, t_eval[i_out:j])
                    i_out = j
            t, y, f = t_new, y_new, f_new
            n_steps += 1
            fac = MAX_FACTOR if enorm == 0 else min(MAX_FACTOR, SAFETY * enorm ** -0.2)
            h = min(h * fac, max_step)
        else:
            n_rej += 1
            h *= max(MIN_FACTOR, SAFETY * enorm ** -0.2)

    while i_out < t_eval.size:
        out[i_out] = y
        i_out += 1
    return Solution(t_eval, out, n_steps, n_rej, n_rhs)
