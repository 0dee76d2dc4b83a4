"""Barzilai-Borwein gradient descent for strongly convex quadratics.

Works on plain numpy arrays of any shape with a caller-supplied inner
product, so full controls (K x N arrays) and reduced coefficient blocks run
through the same code.  Uses the two classical step sizes

    BB1: <s, s> / <s, g_diff>      BB2: <s, g_diff> / <g_diff, g_diff>

in alternation, clamped to a huge but finite interval.  When the curvature
pairing <s, g_diff> is not positive (which for a quadratic objective only
happens through rounding near stationarity), the step falls back to the
initial step size; the event is counted in the report but is not an error.
No line search: BB is intentionally non-monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_STEP_MIN = 1e-12
_STEP_MAX = 1e12


_RULES = ("alternating", "bb1", "bb2")


@dataclass
class BbConfig:
    """Stopping and step-size parameters.

    tol is the gradient norm (in the supplied inner product) below which the
    iteration stops.  initial_step seeds the very first step and every
    fallback; for a beta-regularized tracking problem 1/beta is the natural
    choice.  rule selects the step-size formula: "bb1", "bb2", or the default
    "alternating" which switches between the two every iteration.
    """

    tol: float
    max_iters: int = 10000
    initial_step: float = 1.0
    rule: str = "alternating"
    step_min: float = _STEP_MIN
    step_max: float = _STEP_MAX

    def __post_init__(self):
        if self.tol < 0.0:
            raise ValueError(f"tol must be nonnegative, got {self.tol}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.rule not in _RULES:
            raise ValueError(f"rule must be one of {_RULES}, got {self.rule!r}")
        if not 0.0 < self.step_min <= self.step_max:
            raise ValueError("step clamp must satisfy 0 < step_min <= step_max")
        if not self.step_min <= self.initial_step <= self.step_max:
            raise ValueError(
                f"initial_step must lie in [{self.step_min}, {self.step_max}]"
            )


@dataclass
class BbReport:
    """Outcome of one bb_minimize call."""

    iterations: int
    grad_norm: float
    converged: bool
    fallbacks: int = 0
    cost_history: list = field(default_factory=list)


def bb_minimize(
    grad_oracle: Callable,
    inner_product: Callable,
    start: np.ndarray,
    cfg: BbConfig,
    cost_fn: Callable | None = None,
) -> tuple[np.ndarray, BbReport]:
    """Minimize a strongly convex quadratic given its gradient oracle.

    grad_oracle(point) returns (gradient, auxiliary); the auxiliary value is
    passed through to cost_fn(point, auxiliary) when cost recording is
    requested.  Returns the final iterate and a report; convergence means
    the final gradient norm is at most cfg.tol.
    """
    u = np.asarray(start, dtype=float).copy()
    g, aux = grad_oracle(u)
    g = np.asarray(g, dtype=float)
    gnorm = np.sqrt(max(inner_product(g, g), 0.0))
    history: list = []
    if cost_fn is not None:
        history.append(float(cost_fn(u, aux)))

    alpha = cfg.initial_step
    fallbacks = 0
    iterations = 0
    use_bb1 = cfg.rule != "bb2"
    while gnorm > cfg.tol and iterations < cfg.max_iters:
        u_new = u - alpha * g
        g_new, aux = grad_oracle(u_new)
        g_new = np.asarray(g_new, dtype=float)
        s = u_new - u
        g_diff = g_new - g
        sy = inner_product(s, g_diff)
        if sy <= 0.0:
            # Lost curvature information; restart from the seed step.
            alpha = cfg.initial_step
            fallbacks += 1
        elif use_bb1:
            alpha = min(max(inner_product(s, s) / sy, cfg.step_min), cfg.step_max)
        else:
            yy = inner_product(g_diff, g_diff)
            alpha = min(max(sy / yy, cfg.step_min), cfg.step_max) if yy > 0.0 else cfg.initial_step
        if cfg.rule == "alternating":
            use_bb1 = not use_bb1
        u, g = u_new, g_new
        gnorm = np.sqrt(max(inner_product(g, g), 0.0))
        iterations += 1
        if cost_fn is not None:
            history.append(float(cost_fn(u, aux)))

    report = BbReport(
        iterations=iterations,
        grad_norm=float(gnorm),
        converged=bool(gnorm <= cfg.tol),
        fallbacks=fallbacks,
        cost_history=history,
    )
    return u, report
