"""Finite-difference verification of analytic gradients.

The oracle is the central difference (f(x+eps) - f(x-eps)) / (2 eps),
evaluated coordinate by coordinate in 64-bit arithmetic.
"""

from __future__ import annotations

import numpy as np

from .value import Value, backward

__all__ = ["grad_check", "grad_check_params", "GradCheckError"]


class GradCheckError(RuntimeError):
    """The function under test produced a non-finite output."""


def grad_check(f, points, eps: float = 1e-5) -> float:
    """Max relative error between analytic and numeric gradients.

    ``f`` maps a list of Values to a scalar Value; ``points`` is the list of
    arrays to differentiate with respect to. The error for a coordinate is
    |analytic - numeric| / max(1, |numeric|); the max over all coordinates
    of all points is returned.
    """
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    points = [np.array(p, dtype=np.float64) for p in points]
    values = [Value(p.copy()) for p in points]

    out = f(values)
    if out.data.size != 1:
        raise ValueError("grad_check requires a scalar-valued function")
    if not np.isfinite(out.data).all():
        raise GradCheckError("non-finite output at the evaluation point")
    backward(out)
    # a point the loss never touched has zero gradient
    analytic = [np.zeros_like(v.data) if v.grad is None else v.grad.copy() for v in values]

    worst = 0.0
    for pi, point in enumerate(points):
        flat = point.reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]

            def eval_at(x: float) -> float:
                flat[ci] = x
                args = [Value(p.copy()) for p in points]
                res = f(args)
                flat[ci] = orig
                val = float(res.data)
                if not np.isfinite(val):
                    raise GradCheckError(
                        f"non-finite output while probing point {pi}, coordinate {ci}")
                return val

            numeric = (eval_at(orig + eps) - eval_at(orig - eps)) / (2.0 * eps)
            ana = analytic[pi].reshape(-1)[ci]
            err = abs(ana - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst


def grad_check_params(build_loss, params, eps: float = 1e-5) -> float:
    """Check a model's gradients with respect to its registered Params.

    ``build_loss`` takes no arguments and rebuilds the scalar loss from the
    current parameter values; ``params`` is the list of Params to probe.
    Parameter data is restored before returning.
    """
    originals = [p.value for p in params]
    try:
        def f(values):
            for p, v in zip(params, values):
                p.value = v
            return build_loss()

        return grad_check(f, [p.data.copy() for p in originals], eps=eps)
    finally:
        for p, v in zip(params, originals):
            p.value = v
