"""Parameter storage, small dense kernels, the Adam update and a
finite-difference gradient checker. Everything runs in float64."""

import numpy as np

from .errors import CheckError, ConfigError, NumericError


class ParamTensor:
    """A named weight array with a gradient accumulator and a freeze flag."""

    __slots__ = ("name", "value", "grad", "frozen")

    def __init__(self, name, value, frozen=False):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.frozen = bool(frozen)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def add_grad(self, g):
        """Accumulate into the gradient buffer; silently skipped when frozen."""
        if self.frozen:
            return
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.grad.shape:
            raise ConfigError(
                f"gradient shape {g.shape} != parameter shape {self.grad.shape} for {self.name}"
            )
        self.grad += g

    def __repr__(self):
        return f"ParamTensor({self.name!r}, shape={self.value.shape}, frozen={self.frozen})"


class AdamState:
    """Adam moments for one parameter tensor plus the update hyperparameters.

    Weight decay is applied decoupled from the moment estimates
    (value -= lr * wd * value after the Adam step).
    """

    def __init__(self, param, lr=1e-4, weight_decay=1e-5,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros_like(param.value)
        self.v = np.zeros_like(param.value)
        self.step_count = 0
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)


def matvec(matrix, vector):
    """Matrix-vector product; accepts a ParamTensor or a plain array."""
    m = matrix.value if isinstance(matrix, ParamTensor) else np.asarray(matrix)
    v = np.asarray(vector)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ConfigError(f"matvec dimension mismatch: {m.shape} x {v.shape}")
    return m @ v


def softmax(logits):
    """Numerically stable softmax (max subtraction)."""
    x = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("softmax received non-finite logits")
    e = np.exp(x - x.max())
    return e / e.sum()


def sigmoid(x):
    """Overflow-safe logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def adam_step(param, state):
    """One Adam update with bias correction and decoupled weight decay.

    Frozen parameters are a no-op. The gradient buffer is cleared after
    the update.
    """
    if param.frozen:
        return
    g = param.grad
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient for {param.name}")
    state.step_count += 1
    t = state.step_count
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    param.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if state.weight_decay:
        param.value -= state.lr * state.weight_decay * param.value
    param.zero_grad()


def finite_diff_check(loss_and_grad_fn, params, h=1e-5, coords_per_tensor=20, rng=None):
    """Compare analytic gradients against central differences.

    loss_and_grad_fn() must be deterministic, return the scalar loss and
    leave per-parameter gradients in each ParamTensor's grad buffer.
    Frozen tensors are excluded from the sweep. Returns the max relative
    error |analytic - central| / max(|analytic|, |central|, 1e-8) over
    the sampled coordinates.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    params = [p for p in params if not p.frozen]
    for p in params:
        p.zero_grad()
    base = float(loss_and_grad_fn())
    if float(loss_and_grad_fn()) != base:
        raise CheckError("loss function is not deterministic; cannot run check")
    analytic = {p.name: p.grad.copy() for p in params}

    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        n = flat.shape[0]
        k = min(coords_per_tensor, n)
        idx = rng.choice(n, size=k, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            lp = float(loss_and_grad_fn())
            flat[i] = orig - h
            lm = float(loss_and_grad_fn())
            flat[i] = orig
            central = (lp - lm) / (2.0 * h)
            a = analytic[p.name].reshape(-1)[i]
            rel = abs(a - central) / max(abs(a), abs(central), 1e-8)
            worst = max(worst, rel)
    for p in params:
        p.zero_grad()
    return worst
