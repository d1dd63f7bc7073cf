import numpy as np

from .errors import ContractViolation

REGRESSION = "regression"
CLASSIFICATION = "classification"


def infer_task(Y):
    Y = np.asarray(Y)
    return CLASSIFICATION if np.isin(Y, (0.0, 1.0)).all() else REGRESSION


def compute_metrics(pred, Y, task):
    """Return ``(mse, accuracy)``.

    ``mse`` is averaged over every entry (samples and output dimensions).
    ``accuracy`` is a percentage for classification and ``None`` otherwise;
    single-output classifiers threshold at 0.5, wider ones compare argmax.
    """
    pred = np.asarray(pred, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if pred.shape != Y.shape:
        raise ContractViolation(f"prediction {pred.shape} vs target {Y.shape}")
    mse = float(np.mean((pred - Y) ** 2))
    if task != CLASSIFICATION:
        return mse, None
    if Y.shape[0] == 1:
        hits = (pred[0] >= 0.5) == (Y[0] >= 0.5)
    else:
        hits = pred.argmax(axis=0) == Y.argmax(axis=0)
    return mse, 100.0 * float(np.mean(hits))
