"""Numerically stable scalar nonlinearities shared across modules."""

import numpy as np


def sigmoid(x):
    """Logistic function, overflow-safe via tanh."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def softplus(x):
    """log(1 + exp(x)) without overflow at large |x|."""
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def log_sigmoid(x):
    """log sigma(x) = -softplus(-x)."""
    return -softplus(-np.asarray(x, dtype=np.float64))
