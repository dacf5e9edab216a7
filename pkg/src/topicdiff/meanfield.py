"""Mean-field probability that a node's next instance is of a given topic.

With a stationary normalizer ``c = lambda1*A/alpha + k*lambda2*B/beta`` the
probability ``P(t)`` for a topic of age ``t`` obeys the Volterra equation

    P(t) = (A/c) e^{-alpha t} + (k lambda2 B / c) int_0^t e^{-beta (t-s)} P(s) ds,

equivalently ``P' + D1 P = D2 e^{-alpha t}`` with ``P(0) = A/c``,
``D1 = beta - k lambda2 B / c`` and ``D2 = A (beta - alpha) / c``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

# |D1 - alpha| below this (relative) switches to the degenerate limit
DEGENERATE_TOL = 1e-9
# excursions outside [0, 1] smaller than this are rounding and get clamped
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class MeanFieldParams:
    """Rates and weights of the diffusion model plus the mean degree ``k``.

    ``c``, ``D1`` and ``D2`` are derived on access, never stored.
    """

    lambda1: float
    lambda2: float
    A: float
    alpha: float
    B: float
    beta: float
    k: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("decay rates alpha and beta must be positive")
        for name in ("lambda1", "lambda2", "A", "B", "k"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.c <= 0:
            raise ValueError("normalizer c must be positive (need lambda1*A > 0 or k*lambda2*B > 0)")

    @classmethod
    def from_config(cls, cfg, k: float) -> "MeanFieldParams":
        """Build from a :class:`topicdiff.engine.SimConfig` and a mean degree."""
        return cls(cfg.lambda1, cfg.lambda2, cfg.A, cfg.alpha, cfg.B, cfg.beta, float(k))

    @property
    def global_part(self) -> float:
        return self.lambda1 * self.A / self.alpha

    @property
    def local_part(self) -> float:
        return self.k * self.lambda2 * self.B / self.beta

    @property
    def c(self) -> float:
        return self.global_part + self.local_part

    @property
    def kernel(self) -> float:
        """Coefficient ``k lambda2 B / c`` of the integral term."""
        return self.k * self.lambda2 * self.B / self.c

    @property
    def D1(self) -> float:
        return self.beta - self.kernel

    @property
    def D2(self) -> float:
        return self.A * (self.beta - self.alpha) / self.c


def steady_state_c(p: MeanFieldParams) -> float:
    """Stationary normalizer ``lambda1*A/alpha + k*lambda2*B/beta``."""
    if p.alpha <= 0 or p.beta <= 0:
        raise ValueError("decay rates alpha and beta must be positive")
    return p.c


def _is_degenerate(p: MeanFieldParams) -> bool:
    return abs(p.D1 - p.alpha) < DEGENERATE_TOL * max(p.alpha, abs(p.D1))


def p_closed_form(t, p: MeanFieldParams):
    """Analytic solution of the mean-field equation.

    Args:
        t: scalar or array of topic ages, all ``>= 0``.
        p: model parameters.

    Returns:
        ``P(t)`` with the same shape as ``t`` (a float for scalar input).
        Values outside [0, 1] by less than 1e-12 are clamped with a warning.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    c, d1, d2, a = p.c, p.D1, p.D2, p.alpha
    head = (p.A / c) * np.exp(-d1 * t_arr)
    if _is_degenerate(p):
        out = head + d2 * t_arr * np.exp(-a * t_arr)
    else:
        out = head + d2 / (d1 - a) * (np.exp(-a * t_arr) - np.exp(-d1 * t_arr))
    out = _clamp(out)
    return float(out) if out.ndim == 0 else out


def _clamp(x: np.ndarray) -> np.ndarray:
    low = (x < 0) & (x >= -CLAMP_TOL)
    high = (x > 1) & (x <= 1 + CLAMP_TOL)
    if low.any() or high.any():
        warnings.warn("mean-field probability outside [0, 1] by rounding; clamped", RuntimeWarning)
        x = np.where(low, 0.0, np.where(high, 1.0, x))
    return x


def _interval_weights(beta: float, h: float) -> tuple[float, float]:
    """Exact integrals of ``e^{-beta u}`` against the two linear hat pieces.

    Returns ``(w_far, w_near)`` for ``u = t_j - s`` over one step ``[0, h]``:
    ``w_near`` multiplies the value at the end of the step closest to ``t_j``.
    """
    x = beta * h
    if x < 1e-4:
        # Taylor series avoids cancellation for tiny steps
        w_far = h * (0.5 - x / 3.0 + x * x / 8.0)
        w_near = h * (0.5 - x / 6.0 + x * x / 24.0)
        return w_far, w_near
    e = np.exp(-x)
    j0 = -np.expm1(-x) / beta
    j1 = (-np.expm1(-x) - x * e) / (beta * beta)
    return j1 / h, j0 - j1 / h


def p_numeric(t_grid, p: MeanFieldParams) -> np.ndarray:
    """Solve the integral equation by trapezoidal product integration.

    ``P`` is interpolated linearly between grid points and the exponential
    kernel is integrated exactly against it. The kernel's memoryless form
    lets the quadrature sum be carried forward, so the cost is linear in the
    grid length.

    Args:
        t_grid: uniform grid starting at 0.
        p: model parameters.

    Returns:
        ``P`` at every grid point; global error is O(h^2).
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d sequence")
    if t[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    f = (p.A / p.c) * np.exp(-p.alpha * t)
    if t.size == 1:
        return f.copy()
    steps = np.diff(t)
    h = steps[0]
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError("t_grid must be uniform and increasing")

    mu = p.kernel
    e = np.exp(-p.beta * h)
    w_far, w_near = _interval_weights(p.beta, h)
    # I_j = e I_{j-1} + w_far P_{j-1} + w_near P_j and P_j = f_j + mu I_j;
    # eliminating P gives I_j = r I_{j-1} + g (w_far f_{j-1} + w_near f_j)
    g = 1.0 / (1.0 - mu * w_near)
    r = g * (e + mu * w_far)
    drive = g * (w_far * f[:-1] + w_near * f[1:])
    integral = np.empty(t.size)
    integral[0] = 0.0
    integral[1:] = lfilter([1.0], [1.0, -r], drive)
    return f + mu * integral
