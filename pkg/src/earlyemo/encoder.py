"""Single-layer GRU over feature frames plus a running mean of the hidden
states. The mean after frame t is the shared state read by every head.

Gates (no bias terms):
    z_t = sigmoid(x_t @ Uz + s_{t-1} @ Wz)
    r_t = sigmoid(x_t @ Ur + s_{t-1} @ Wr)
    h_t = tanh(x_t @ Uh + (s_{t-1} * r_t) @ Wh)
    s_t = z_t * s_{t-1} + (1 - z_t) * h_t
"""

import numpy as np

from . import _gru_kernels as K
from .errors import ConfigError
from .numerics import ParamTensor


class GruParams:
    """The six GRU weight matrices as ParamTensors."""

    def __init__(self, Uz, Wz, Ur, Wr, Uh, Wh):
        self.Uz, self.Wz = Uz, Wz
        self.Ur, self.Wr = Ur, Wr
        self.Uh, self.Wh = Uh, Wh
        d, h = Uz.shape
        for t in (Ur, Uh):
            if t.shape != (d, h):
                raise ConfigError(f"{t.name} shape {t.shape} != ({d}, {h})")
        for t in (Wz, Wr, Wh):
            if t.shape != (h, h):
                raise ConfigError(f"{t.name} shape {t.shape} != ({h}, {h})")

    @classmethod
    def init(cls, input_dim, hidden_size, rng):
        """Uniform +-sqrt(6/(fan_in+fan_out)) per matrix."""
        def u(name, rows, cols):
            lim = np.sqrt(6.0 / (rows + cols))
            return ParamTensor(name, rng.uniform(-lim, lim, size=(rows, cols)))

        return cls(
            u("gru.Uz", input_dim, hidden_size), u("gru.Wz", hidden_size, hidden_size),
            u("gru.Ur", input_dim, hidden_size), u("gru.Wr", hidden_size, hidden_size),
            u("gru.Uh", input_dim, hidden_size), u("gru.Wh", hidden_size, hidden_size),
        )

    @property
    def input_dim(self):
        return self.Uz.shape[0]

    @property
    def hidden_size(self):
        return self.Uz.shape[1]

    def tensors(self):
        return [self.Uz, self.Wz, self.Ur, self.Wr, self.Uh, self.Wh]

    def forward_context(self):
        """Contiguous transposes of the recurrent matrices; build once per
        episode, reuse across chunks (values must not change in between)."""
        return (np.ascontiguousarray(self.Wz.value.T),
                np.ascontiguousarray(self.Wr.value.T),
                np.ascontiguousarray(self.Wh.value.T))


class EncoderState:
    """Hidden vector s, running mean S of s_1..s_t, and frame counter t."""

    __slots__ = ("s", "S", "t")

    def __init__(self, s, S, t):
        self.s = s
        self.S = S
        self.t = t

    @classmethod
    def zeros(cls, hidden_size):
        return cls(np.zeros(hidden_size), np.zeros(hidden_size), 0)


class GruCache:
    """Forward trace accumulated over chunks, as needed for the reverse pass."""

    def __init__(self, hidden_size):
        self.s0 = np.zeros(hidden_size)
        self.xs = []
        self.Z = []
        self.R = []
        self.Hc = []
        self.Sseq = []
        self.n_frames = 0

    def concat(self):
        c = np.concatenate
        return (c(self.xs), c(self.Z), c(self.R), c(self.Hc), c(self.Sseq))


def gru_forward(xs, params, state=None, cache=None, ctx=None):
    """Consume a chunk of frames; returns the new EncoderState.

    xs is (n, input_dim) of normalized features. Pass the same cache across
    chunks of one utterance to collect the trace for gru_backward.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != params.input_dim:
        raise ConfigError(f"input chunk shape {xs.shape} does not match "
                          f"input_dim {params.input_dim}")
    H = params.hidden_size
    if state is None:
        state = EncoderState.zeros(H)
    n = xs.shape[0]
    if n == 0:
        return state
    if ctx is None:
        ctx = params.forward_context()
    WzT, WrT, WhT = ctx

    AzI = xs @ params.Uz.value
    ArI = xs @ params.Ur.value
    AhI = xs @ params.Uh.value
    Z = np.empty((n, H))
    R = np.empty((n, H))
    Hc = np.empty((n, H))
    Sseq = np.empty((n, H))
    s = state.s.copy()
    S = state.S.copy()
    K.forward_seq(AzI, ArI, AhI, WzT, WrT, WhT, s, S, state.t, Z, R, Hc, Sseq)
    if cache is not None:
        if cache.n_frames != state.t:
            raise ConfigError("cache does not line up with the encoder state")
        cache.xs.append(xs)
        cache.Z.append(Z)
        cache.R.append(R)
        cache.Hc.append(Hc)
        cache.Sseq.append(Sseq)
        cache.n_frames += n
    return EncoderState(s, S, state.t + n)


def gru_step(x, state, params):
    """Single-frame update; same arithmetic as the sequence path."""
    return gru_forward(np.asarray(x, dtype=np.float64).reshape(1, -1), params, state)


def gru_backward(params, cache, mean_grads, want_input_grads=False):
    """Backpropagate through the full trace, including the running mean.

    mean_grads is a list of (frame_idx, grad) pairs: the gradient arriving
    on the running mean S as snapshotted after consuming frame_idx
    (0-based, local to the cache). Each s_j with j <= frame_idx receives a
    1/(frame_idx+1)-scaled share. Parameter gradients are accumulated into
    the ParamTensors; returns per-frame input gradients when requested.
    """
    xs, Z, R, Hc, Sseq = cache.concat()
    n, H = Z.shape
    m = len(mean_grads)
    dec_idx = np.empty(m, dtype=np.int64)
    dec_g = np.empty((m, H))
    for j, (idx, g) in enumerate(sorted(mean_grads, key=lambda p: p[0])):
        if not 0 <= idx < n:
            raise ConfigError(f"mean gradient at frame {idx} outside trace of {n} frames")
        dec_idx[j] = idx
        dec_g[j] = np.asarray(g, dtype=np.float64) / (idx + 1)
    if m > 1 and len(set(dec_idx.tolist())) != m:
        raise ConfigError("duplicate mean-gradient frames")

    dAz = np.empty((n, H))
    dAr = np.empty((n, H))
    dAh = np.empty((n, H))
    ds0 = np.empty(H)
    K.backward_seq(Z, R, Hc, Sseq, cache.s0, params.Wz.value, params.Wr.value,
                   params.Wh.value, dec_idx, dec_g, dAz, dAr, dAh, ds0)

    s_prev = np.empty((n, H))
    s_prev[0] = cache.s0
    if n > 1:
        s_prev[1:] = Sseq[:-1]
    params.Uz.add_grad(xs.T @ dAz)
    params.Ur.add_grad(xs.T @ dAr)
    params.Uh.add_grad(xs.T @ dAh)
    params.Wz.add_grad(s_prev.T @ dAz)
    params.Wr.add_grad(s_prev.T @ dAr)
    sr = s_prev * R
    params.Wh.add_grad(sr.T @ dAh)
    if want_input_grads:
        return dAz @ params.Uz.value.T + dAr @ params.Ur.value.T + dAh @ params.Uh.value.T
    return None
