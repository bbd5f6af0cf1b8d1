"""The three linear heads reading the encoder's running mean: emotion
classifier, wait/terminate policy, and the baseline return estimator."""

import math

import numpy as np

from .errors import ConfigError
from .numerics import ParamTensor, softmax

# Label and action encodings used throughout.
NEUTRAL, ANGRY = 0, 1
WAIT, TERMINATE = 0, 1

PROB_CLAMP = 1e-7  # BCE stability bound


class ClassifierParams:
    """Scalar-output logistic head: d = sigmoid(w . S + b)."""

    def __init__(self, w, b):
        self.w, self.b = w, b
        if w.value.ndim != 1 or b.value.shape != (1,):
            raise ConfigError("classifier head expects w (H,) and b (1,)")

    @classmethod
    def init(cls, hidden_size):
        return cls(ParamTensor("cls.w", np.zeros(hidden_size)),
                   ParamTensor("cls.b", np.zeros(1)))

    def tensors(self):
        return [self.w, self.b]


class PolicyParams:
    """Two-logit softmax head over the actions [wait, terminate]."""

    def __init__(self, W, b):
        self.W, self.b = W, b
        if W.value.shape[0] != 2 or b.value.shape != (2,):
            raise ConfigError("policy head expects W (2, H) and b (2,)")

    @classmethod
    def init(cls, hidden_size):
        return cls(ParamTensor("pol.W", np.zeros((2, hidden_size))),
                   ParamTensor("pol.b", np.zeros(2)))

    def tensors(self):
        return [self.W, self.b]


class BaselineParams:
    """Scalar linear regressor of the return: b_t = W . S + b."""

    def __init__(self, W, b):
        self.W, self.b = W, b
        if W.value.ndim != 1 or b.value.shape != (1,):
            raise ConfigError("baseline head expects W (H,) and b (1,)")

    @classmethod
    def init(cls, hidden_size):
        return cls(ParamTensor("bas.W", np.zeros(hidden_size)),
                   ParamTensor("bas.b", np.zeros(1)))

    def tensors(self):
        return [self.W, self.b]


def classify(S, params):
    """(probability of angry, label); the 0.5 boundary maps to neutral."""
    logit = float(params.w.value @ S) + float(params.b.value[0])
    if logit >= 0:
        d = 1.0 / (1.0 + math.exp(-logit))
    else:
        e = math.exp(logit)
        d = e / (1.0 + e)
    return d, (ANGRY if d > 0.5 else NEUTRAL)


def classification_loss(d, truth):
    """Binary cross-entropy of the angry probability and its logit gradient.

    d is clamped to [1e-7, 1-1e-7] inside the logs; the returned gradient
    is d - truth.
    """
    dc = min(max(d, PROB_CLAMP), 1.0 - PROB_CLAMP)
    y = float(truth)
    loss = -(y * math.log(dc) + (1.0 - y) * math.log(1.0 - dc))
    return loss, d - y


def policy_distribution(S, params):
    """Softmax over the two action logits."""
    return softmax(params.W.value @ S + params.b.value)


def select_action(probs, mode, rng=None):
    """(action, log-probability). Greedy breaks ties toward terminate."""
    if mode == "greedy":
        action = TERMINATE if probs[TERMINATE] >= probs[WAIT] else WAIT
    elif mode == "stochastic":
        action = TERMINATE if rng.random() < probs[TERMINATE] else WAIT
    else:
        raise ConfigError(f"unknown action-selection mode {mode!r}")
    return action, math.log(max(probs[action], 1e-300))


def baseline_value(S, params):
    """Predicted return; recorded in traces as a plain float so no gradient
    can flow back into the encoder or policy."""
    return float(params.W.value @ S) + float(params.b.value[0])
