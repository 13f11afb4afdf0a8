"""
Levenberg-Marquardt minimization of a sum of squared residuals.

Jacobians come from central finite differences. After every trial step a gauge function may
map the parameters back onto a constraint set (unit-norm matrices, for instance); the solver
only ever accepts steps that strictly decrease the cost, so the recorded cost history is
monotone.

>>> import numpy as np
>>> from pyxcal.optimize import levenberg_marquardt
>>> result = levenberg_marquardt(lambda x: x - np.array([1.0, 2.0]), np.zeros(2))
>>> np.round(result.x, 6)
array([1., 2.])
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.linalg
from dataclasses_json import Undefined, dataclass_json

from pyxcal.errors import GeometryError, InvalidInitializationError

logger = logging.getLogger(__name__)

ResidualFunction = Callable[[np.ndarray], np.ndarray]
GaugeFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Damping beyond which no step can decrease the cost any more.
_MAX_LAMBDA = 1e16


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class LMConfig:
    lambda0: float = 1e-3
    lambda_down: float = 0.3
    lambda_up: float = 3.0
    max_iters: int = 100
    ftol: float = 1e-12
    xtol: float = 1e-12
    fd_rel_step: float = 1e-6
    fd_abs_step: float = 1e-9

    def validate(self):
        if self.lambda0 <= 0 or not 0 < self.lambda_down < 1 or self.lambda_up <= 1:
            raise ValueError("LM damping must satisfy lambda0 > 0, 0 < lambda_down < 1 < lambda_up")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.fd_rel_step <= 0 or self.fd_abs_step <= 0:
            raise ValueError("finite-difference steps must be positive")


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    initial_cost: float
    iterations: int
    converged: bool
    cost_history: List[float] = field(default_factory=list)


def numerical_jacobian(fun: ResidualFunction, x: np.ndarray, rel_step: float = 1e-6, abs_step: float = 1e-9) -> np.ndarray:
    """
    Central-difference Jacobian with per-parameter step `max(rel_step * |x_k|, abs_step)`.
    """
    x = np.asarray(x, dtype=float)
    steps = np.maximum(rel_step * np.abs(x), abs_step)
    columns = []
    for k, h in enumerate(steps):
        forward = x.copy()
        backward = x.copy()
        forward[k] += h
        backward[k] -= h
        columns.append((fun(forward) - fun(backward)) / (2.0 * h))
    return np.column_stack(columns)


def unit_norm_gauge(block_sizes: Sequence[int]) -> GaugeFunction:
    """
    Gauge that rescales each consecutive block of parameters to unit norm, keeping the sign
    of each block aligned with the previous iterate.
    """
    bounds = np.cumsum([0, *block_sizes])

    def gauge(x_new: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
        out = np.array(x_new, dtype=float)
        for start, stop in zip(bounds[:-1], bounds[1:]):
            block = out[start:stop]
            block = block / np.linalg.norm(block)
            if x_prev is not None and block @ x_prev[start:stop] < 0:
                block = -block
            out[start:stop] = block
        return out

    return gauge


def _cost(fun: ResidualFunction, x: np.ndarray):
    try:
        r = np.asarray(fun(x), dtype=float)
    except GeometryError:
        return None, np.inf
    cost = float(r @ r)
    return r, (cost if np.isfinite(cost) else np.inf)


def levenberg_marquardt(fun: ResidualFunction,
                        x0: np.ndarray,
                        config: LMConfig = None,
                        gauge: Optional[GaugeFunction] = None,
                        callback: Optional[Callable[[int, np.ndarray, float], None]] = None) -> LMResult:
    """
    Minimize `|fun(x)|^2` from `x0`.

    Marquardt damping scales the diagonal of `J^T J`; the damping factor shrinks by
    `lambda_down` after an accepted step and grows by `lambda_up` after a rejected one.
    Iteration stops when the relative decrease of the cost or the step norm drops below
    tolerance, when no step can decrease the cost, or after `max_iters` accepted steps, in
    which case the result is flagged as not converged.
    """
    config = config or LMConfig()
    x = np.array(x0, dtype=float)
    if gauge is not None:
        x = gauge(x, None)
    r, cost = _cost(fun, x)
    if r is None or not np.isfinite(cost):
        raise InvalidInitializationError("the objective is not finite at the initial estimate")

    initial_cost = cost
    history = [cost]
    lam = config.lambda0
    iterations = 0
    converged = False

    while True:
        if cost == 0.0:
            converged = True
            break
        if iterations >= config.max_iters:
            break
        J = numerical_jacobian(fun, x, config.fd_rel_step, config.fd_abs_step)
        g = J.T @ r
        JtJ = J.T @ J
        diag = np.diag(JtJ).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))

        accepted = False
        while lam <= _MAX_LAMBDA:
            A = JtJ + lam * np.diag(diag)
            try:
                delta = scipy.linalg.solve(A, -g, assume_a="pos")
            except (np.linalg.LinAlgError, ValueError):
                delta = np.linalg.lstsq(A, -g, rcond=None)[0]
            x_new = x + delta
            if gauge is not None:
                x_new = gauge(x_new, x)
            r_new, cost_new = _cost(fun, x_new)
            if cost_new < cost:
                accepted = True
                break
            lam *= config.lambda_up

        if not accepted:
            # No damping yields a decrease: x is a local minimum to working precision.
            converged = True
            break

        step = float(np.linalg.norm(x_new - x))
        decrease = (cost - cost_new) / cost
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam * config.lambda_down, 1e-300)
        iterations += 1
        history.append(cost)
        logger.debug(f"LM iteration {iterations}: cost {cost:.6g}, lambda {lam:.3g}, step {step:.3g}")
        if callback is not None:
            callback(iterations, x, cost)
        if decrease < config.ftol or step < config.xtol * max(1.0, float(np.linalg.norm(x))):
            converged = True
            break

    if not converged:
        logger.warning(f"LM stopped after {iterations} iterations without converging (cost {cost:.6g})")
    return LMResult(x=x, cost=cost, initial_cost=initial_cost, iterations=iterations,
                    converged=converged, cost_history=history)
