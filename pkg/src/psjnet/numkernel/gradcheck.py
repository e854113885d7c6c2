"""Central-difference gradient checking."""

from dataclasses import dataclass

import numpy as np

from ..errors import NumericsError
from .tensor import backward


@dataclass
class CheckReport:
    max_rel_err: float
    worst_param: str
    worst_index: tuple
    n_checked: int

    def passed(self, tol):
        return self.max_rel_err < tol


def _value(f, params):
    out = f(params, record=False)
    v = float(np.asarray(out.data if hasattr(out, "data") else out).reshape(()))
    if not np.isfinite(v):
        raise NumericsError(f"objective is not finite ({v})")
    return v


def grad_check(f, params, eps=1e-5, tol=1e-4):
    """Compare the tape gradient of ``f`` with central differences.

    ``f(params, record=True)`` must build a fresh tape on which every entry of
    ``params`` is registered under its key, and return the scalar loss tensor.
    The error for one scalar is ``|a - n| / max(1, |a|, |n|)``; the report
    carries the maximum over every scalar of every parameter.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    loss = f(params, record=True)
    if not np.all(np.isfinite(loss.data)):
        raise NumericsError("objective is not finite")
    analytic = backward(loss.tape, loss)
    worst = (0.0, "", ())
    count = 0
    for name, value in params.items():
        grad = analytic[name]
        flat = value.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = _value(f, params)
            flat[i] = orig - eps
            down = _value(f, params)
            flat[i] = orig
            num = (up - down) / (2.0 * eps)
            a = gflat[i]
            err = abs(a - num) / max(1.0, abs(a), abs(num))
            count += 1
            if err > worst[0] or not worst[1]:
                worst = (err, name, np.unravel_index(i, value.shape))
    return CheckReport(max_rel_err=worst[0], worst_param=worst[1], worst_index=tuple(int(j) for j in worst[2]), n_checked=count)
