"""Sequence kernels for the GRU encoder: numba-jitted hot loops with a
pure-NumPy fallback. Both paths process frames one at a time in the same
order, so chunked and whole-sequence runs are bitwise identical within a
path.

Conventions: inputs are row vectors; gate pre-activations are
a = x @ U + s @ W, so U is (input_dim, H) and W is (H, H). The forward
kernels take the recurrent matrices transposed (rows contiguous over the
summation index); the backward kernels take them as stored.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba present in the supported env
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def dec(f):
            return f

        return dec

USE_NUMBA = HAVE_NUMBA


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _forward_nb(AzI, ArI, AhI, WzT, WrT, WhT, s, S, t0, Z, R, Hc, Sseq):
    n, H = Z.shape
    sr = np.empty(H)
    for i in range(n):
        for j in range(H):
            az = AzI[i, j]
            ar = ArI[i, j]
            for k in range(H):
                az += WzT[j, k] * s[k]
                ar += WrT[j, k] * s[k]
            Z[i, j] = 1.0 / (1.0 + np.exp(-az))
            R[i, j] = 1.0 / (1.0 + np.exp(-ar))
        for j in range(H):
            sr[j] = s[j] * R[i, j]
        for j in range(H):
            ah = AhI[i, j]
            for k in range(H):
                ah += WhT[j, k] * sr[k]
            Hc[i, j] = np.tanh(ah)
        t = t0 + i + 1
        for j in range(H):
            s[j] = Z[i, j] * s[j] + (1.0 - Z[i, j]) * Hc[i, j]
            S[j] += (s[j] - S[j]) / t
            Sseq[i, j] = s[j]


@njit(cache=True)
def _backward_nb(Z, R, Hc, Sseq, s0, Wz, Wr, Wh, dec_idx, dec_g, dAz, dAr, dAh, ds0):
    n, H = Z.shape
    acc = np.zeros(H)
    dsi = np.empty(H)
    dsr = np.empty(H)
    carry = np.zeros(H)
    ptr = dec_idx.shape[0] - 1
    for i in range(n - 1, -1, -1):
        if ptr >= 0 and dec_idx[ptr] == i:
            for j in range(H):
                acc[j] += dec_g[ptr, j]
            ptr -= 1
        for j in range(H):
            dsi[j] = carry[j] + acc[j]
        for j in range(H):
            z = Z[i, j]
            h = Hc[i, j]
            sp = Sseq[i - 1, j] if i > 0 else s0[j]
            dh = dsi[j] * (1.0 - z)
            dAh[i, j] = dh * (1.0 - h * h)
            dz = dsi[j] * (sp - h)
            dAz[i, j] = dz * z * (1.0 - z)
        for k in range(H):
            a = 0.0
            for j in range(H):
                a += Wh[k, j] * dAh[i, j]
            dsr[k] = a
        for k in range(H):
            sp = Sseq[i - 1, k] if i > 0 else s0[k]
            r = R[i, k]
            dAr[i, k] = sp * dsr[k] * r * (1.0 - r)
        for k in range(H):
            a = 0.0
            b = 0.0
            for j in range(H):
                a += Wz[k, j] * dAz[i, j]
                b += Wr[k, j] * dAr[i, j]
            carry[k] = dsi[k] * Z[i, k] + R[i, k] * dsr[k] + a + b
    for k in range(H):
        ds0[k] = carry[k]


# ---------------------------------------------------------------------------
# NumPy fallback (reference semantics, frame-at-a-time)
# ---------------------------------------------------------------------------


def _sigmoid_vec(x):
    return 1.0 / (1.0 + np.exp(-x))


def _forward_np(AzI, ArI, AhI, WzT, WrT, WhT, s, S, t0, Z, R, Hc, Sseq):
    n = Z.shape[0]
    for i in range(n):
        z = _sigmoid_vec(AzI[i] + WzT @ s)
        r = _sigmoid_vec(ArI[i] + WrT @ s)
        h = np.tanh(AhI[i] + WhT @ (s * r))
        s[:] = z * s + (1.0 - z) * h
        S += (s - S) / (t0 + i + 1)
        Z[i] = z
        R[i] = r
        Hc[i] = h
        Sseq[i] = s


def _backward_np(Z, R, Hc, Sseq, s0, Wz, Wr, Wh, dec_idx, dec_g, dAz, dAr, dAh, ds0):
    n, H = Z.shape
    acc = np.zeros(H)
    carry = np.zeros(H)
    ptr = dec_idx.shape[0] - 1
    for i in range(n - 1, -1, -1):
        if ptr >= 0 and dec_idx[ptr] == i:
            acc += dec_g[ptr]
            ptr -= 1
        dsi = carry + acc
        sp = Sseq[i - 1] if i > 0 else s0
        z, r, h = Z[i], R[i], Hc[i]
        dAh[i] = dsi * (1.0 - z) * (1.0 - h * h)
        dAz[i] = dsi * (sp - h) * z * (1.0 - z)
        dsr = Wh @ dAh[i]
        dAr[i] = sp * dsr * r * (1.0 - r)
        carry = dsi * z + r * dsr + Wz @ dAz[i] + Wr @ dAr[i]
    ds0[:] = carry


def forward_seq(AzI, ArI, AhI, WzT, WrT, WhT, s, S, t0, Z, R, Hc, Sseq):
    """Run the recurrence over one chunk; mutates s, S and fills Z/R/Hc/Sseq."""
    fn = _forward_nb if USE_NUMBA else _forward_np
    fn(AzI, ArI, AhI, WzT, WrT, WhT, s, S, np.int64(t0), Z, R, Hc, Sseq)


def backward_seq(Z, R, Hc, Sseq, s0, Wz, Wr, Wh, dec_idx, dec_g, dAz, dAr, dAh, ds0):
    """Reverse pass: fills per-frame pre-activation gradients and ds0.

    dec_idx/dec_g carry the running-mean gradients, already divided by the
    global frame count of their snapshot.
    """
    fn = _backward_nb if USE_NUMBA else _backward_np
    fn(Z, R, Hc, Sseq, s0, Wz, Wr, Wh, dec_idx, dec_g, dAz, dAr, dAh, ds0)
