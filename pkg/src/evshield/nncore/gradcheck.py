"""Central finite-difference gradient checking."""
from dataclasses import dataclass

import numpy as np


def numerical_gradient(fn, x, h=1e-5):
    """Central differences of scalar ``fn`` at array ``x`` (x is restored)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fn(x)
        flat[i] = orig - h
        fm = fn(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


@dataclass
class GradCheckResult:
    checked: int
    failures: int
    max_abs_error: float
    max_rel_error: float

    @property
    def ok(self):
        return self.failures == 0


def compare_gradients(analytic, numeric, rtol=1e-4, atol=1e-6, skip=None):
    """An entry passes when its absolute error is within ``atol`` or its
    relative error within ``rtol``. ``skip`` masks entries to ignore."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    keep = np.ones(a.shape, bool) if skip is None else ~np.asarray(skip, bool).ravel()
    a, n = a[keep], n[keep]
    abs_err = np.abs(a - n)
    scale = np.maximum(np.abs(a), np.abs(n))
    rel_err = np.divide(abs_err, scale, out=np.zeros_like(abs_err), where=scale > 0)
    bad = (abs_err > atol) & (rel_err > rtol)
    return GradCheckResult(
        int(a.size),
        int(bad.sum()),
        float(abs_err.max(initial=0.0)),
        float(rel_err.max(initial=0.0)),
    )
