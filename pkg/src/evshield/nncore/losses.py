import numpy as np


def mse_loss(predictions, targets):
    """Mean squared error and its gradient with respect to ``predictions``."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape}, targets {t.shape}")
    if p.size == 0:
        raise ValueError("mse_loss of empty arrays")
    diff = p - t
    return float(np.mean(diff * diff)), 2.0 * diff / p.size
