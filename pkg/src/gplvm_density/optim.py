"""Polak-Ribiere nonlinear conjugate gradients with a strong Wolfe line search."""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError, NumericalError

__all__ = ["CGTrace", "cg_minimize", "wolfe_line_search"]


@dataclass
class CGTrace:
    """Record of one minimization run.

    ``values[0]`` is the objective at the start point; every later entry
    belongs to an accepted line-search step.
    """

    values: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    n_evals: int = 0
    status: str = "max_steps"
    grad_norm: float = float("nan")

    @property
    def n_steps(self):
        return len(self.step_sizes)


def _cubic_min(a, fa, da, b, fb, db):
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if not rad >= 0:
        return math.nan
    d2 = math.copysign(math.sqrt(rad), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return math.nan
    return b - (b - a) * (db + d2 - d1) / denom


def _refine(phi, f0, slope0, cur, c1, c2, n_evals):
    # one interpolation step after an immediate Wolfe hit; exact on quadratics
    a, f, s, pay = cur
    guess = _cubic_min(0.0, f0, slope0, a, f, s)
    if not (math.isfinite(guess) and 0 < guess <= 10.0 * a and abs(guess - a) > 1e-3 * a):
        return a, f, pay, n_evals
    fg, sg, payg = phi(guess)
    n_evals += 1
    if math.isfinite(fg) and fg <= f and fg <= f0 + c1 * guess * slope0 and abs(sg) <= -c2 * slope0:
        return guess, fg, payg, n_evals
    return a, f, pay, n_evals


def wolfe_line_search(phi, f0, slope0, alpha0, c1=1e-4, c2=0.1, max_evals=30, refine=True):
    """Find a step satisfying the strong Wolfe conditions.

    Parameters
    ----------
    phi : callable
        ``phi(alpha) -> (value, slope, payload)``. Non-finite values are
        treated as overshooting.
    f0, slope0 : float
        Value and (negative) directional derivative at ``alpha = 0``.
    alpha0 : float
        First trial step.
    refine : bool
        When the first trial already satisfies the conditions, try the
        cubic-interpolated minimizer once and keep it if it is better.

    Returns
    -------
    (alpha, value, payload, n_evals, ok)
        ``ok`` is False when no Wolfe point was found; ``alpha`` is then the
        best sufficient-decrease step seen, or 0.
    """
    n_evals = 0
    lo = (0.0, f0, slope0, None)
    prev = lo
    a = alpha0
    hi = None
    while n_evals < max_evals:
        f, s, pay = phi(a)
        n_evals += 1
        cur = (a, f, s, pay)
        if not math.isfinite(f) or f > f0 + c1 * a * slope0 or (n_evals > 1 and f >= prev[1]):
            lo, hi = prev, cur
            break
        if abs(s) <= -c2 * slope0:
            if refine and n_evals == 1:
                a, f, pay, n_evals = _refine(phi, f0, slope0, cur, c1, c2, n_evals)
            return a, f, pay, n_evals, True
        if s >= 0:
            lo, hi = cur, prev
            break
        guess = _cubic_min(prev[0], prev[1], prev[2], a, f, s)
        lo_bound, hi_bound = a + 0.1 * (a - prev[0]), 10.0 * a
        if not (math.isfinite(guess) and lo_bound <= guess <= hi_bound):
            guess = min(4.0 * a, hi_bound)
        prev = cur
        lo = cur
        a = max(guess, lo_bound)
    if hi is None:
        return (lo[0], lo[1], lo[3], n_evals, False)
    # zoom: lo satisfies sufficient decrease and has the lowest value so far
    while n_evals < max_evals:
        a_lo, f_lo, s_lo, _ = lo
        a_hi, f_hi, s_hi, _ = hi
        width = a_hi - a_lo
        guess = math.nan
        if math.isfinite(f_hi) and math.isfinite(s_hi):
            guess = _cubic_min(a_lo, f_lo, s_lo, a_hi, f_hi, s_hi)
        left, right = sorted((a_lo + 0.1 * width, a_hi - 0.1 * width))
        a = guess if (math.isfinite(guess) and left <= guess <= right) else a_lo + 0.5 * width
        if abs(a - a_lo) <= 1e-16 * max(1.0, abs(a_lo)):
            break
        f, s, pay = phi(a)
        n_evals += 1
        cur = (a, f, s, pay)
        if not math.isfinite(f) or f > f0 + c1 * a * slope0 or f >= f_lo:
            hi = cur
            continue
        if abs(s) <= -c2 * slope0:
            return a, f, pay, n_evals, True
        if s * (a_hi - a_lo) >= 0:
            hi = lo
        lo = cur
    return (lo[0], lo[1], lo[3], n_evals, False)


def cg_minimize(fun, x0, max_steps=600, tol=1e-9, gtol=1e-10, c1=1e-4, c2=0.1):
    """Minimize ``fun`` by Polak-Ribiere (PR+) conjugate gradients.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> (value, gradient)``.
    x0 : array
        Start point (flattened copy is used).
    max_steps : int
        Budget of accepted line-search steps.
    tol : float
        Stop when the relative decrease of one step drops below ``tol``.
    gtol : float
        Stop when the gradient norm drops below ``gtol``.

    The direction is reset to steepest descent every ``len(x0)`` steps and
    whenever it is not a descent direction.

    Returns
    -------
    x : ndarray
    trace : CGTrace
    """
    x = np.array(x0, dtype=float).ravel()
    n = x.size
    trace = CGTrace()

    def safe(xx):
        trace.n_evals += 1
        try:
            f, g = fun(xx)
        except NumericalError:
            return math.inf, None
        g = np.asarray(g, dtype=float).ravel()
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            return math.inf, None
        return float(f), g

    f, g = safe(x)
    if g is None:
        raise InvalidInputError("objective is not finite at the start point")
    trace.values.append(f)
    gnorm = float(np.linalg.norm(g))
    trace.grad_norm = gnorm
    if gnorm <= gtol:
        trace.status = "converged"
        return x, trace
    if max_steps <= 0:
        return x, trace

    d = -g
    alpha0 = min(1.0, 1.0 / gnorm)
    since_restart = 0
    steepest = True
    while trace.n_steps < max_steps:
        slope = float(g @ d)
        if not slope < 0:
            d, slope, steepest = -g, -float(g @ g), True

        def phi(a, d=d):
            fa, ga = safe(x + a * d)
            return fa, (float(ga @ d) if ga is not None else math.nan), ga

        a, f_new, g_new, _, ok = wolfe_line_search(phi, f, slope, alpha0, c1, c2)
        if not (a > 0 and g_new is not None):
            if not steepest:
                d, steepest = -g, True
                alpha0 = min(1.0, 1.0 / gnorm)
                continue
            trace.status = "line_search_failed"
            break
        x = x + a * d
        decrease = f - f_new
        f_prev, g_prev = f, g
        f, g = f_new, g_new
        gnorm = float(np.linalg.norm(g))
        trace.values.append(f)
        trace.step_sizes.append(a)
        trace.grad_norm = gnorm
        if gnorm <= gtol or decrease <= tol * max(abs(f_prev), abs(f), 1e-300):
            trace.status = "converged"
            break
        since_restart += 1
        beta = max(0.0, float(g @ (g - g_prev)) / float(g_prev @ g_prev))
        if since_restart >= n:
            beta, since_restart = 0.0, 0
        d_new = -g + beta * d
        steepest = beta == 0.0
        new_slope = float(g @ d_new)
        alpha0 = a * slope / new_slope if new_slope < 0 else min(1.0, 1.0 / gnorm)
        alpha0 = min(alpha0, 100.0 * a) if alpha0 > 0 else a
        d = d_new
    return x, trace
