"""Differentiable layers with explicit forward/backward passes.

Each layer caches what its backward pass needs, accumulates parameter
gradients into Param.grad, and returns the gradient with respect to its
input.  Everything is plain numpy; dtype is chosen at construction (float32
for training, float64 for finite-difference gradient checks).
"""

from __future__ import annotations

import numpy as np

__all__ = ["Param", "Dense", "LayerNorm", "GRULayer", "sigmoid"]


class Param:
    """Named trainable array paired with its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def size(self) -> int:
        return self.value.size


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype,
             scale: float = 1.0) -> np.ndarray:
    bound = scale / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Dense:
    """y = x @ W + b on the last axis; x may have any leading shape."""

    def __init__(self, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator, dtype=np.float32,
                 init_scale: float = 1.0):
        self.w = Param(f"{name}.w",
                       _uniform(rng, (n_in, n_out), n_in, dtype, init_scale))
        self.b = Param(f"{name}.b", np.zeros(n_out, dtype=dtype))
        self._x = None

    def params(self) -> list[Param]:
        return [self.w, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x2 = self._x.reshape(-1, self._x.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.w.grad += x2.T @ dy2
        self.b.grad += dy2.sum(axis=0)
        return dy @ self.w.value.T


class LayerNorm:
    """Normalization over the last axis with learned scale and shift."""

    def __init__(self, name: str, dim: int, dtype=np.float32, eps: float = 1e-5):
        self.gamma = Param(f"{name}.gamma", np.ones(dim, dtype=dtype))
        self.beta = Param(f"{name}.beta", np.zeros(dim, dtype=dtype))
        self.eps = eps
        self._cache = None

    def params(self) -> list[Param]:
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        self._cache = (xhat, inv)
        return xhat * self.gamma.value + self.beta.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, inv = self._cache
        d = xhat.shape[-1]
        flat = (-1, d)
        self.gamma.grad += (dy * xhat).reshape(flat).sum(axis=0)
        self.beta.grad += dy.reshape(flat).sum(axis=0)
        dxhat = dy * self.gamma.value
        mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
        mean_dxhat_x = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return inv * (dxhat - mean_dxhat - xhat * mean_dxhat_x)


class GRULayer:
    """Gated recurrent layer over a (T, B, n_in) sequence, h0 = 0.

    Gate equations (single bias per gate, so the parameter count is
    3 (n_out^2 + n_in n_out + n_out)):

        z_t = sigma(x_t Wx_z + h_{t-1} Wh_z + b_z)
        r_t = sigma(x_t Wx_r + h_{t-1} Wh_r + b_r)
        c_t = tanh (x_t Wx_c + (r_t . h_{t-1}) Wh_c + b_c)
        h_t = z_t . h_{t-1} + (1 - z_t) . c_t
    """

    def __init__(self, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.n_in, self.n_out = n_in, n_out
        self.wx = Param(f"{name}.wx",
                        _uniform(rng, (n_in, 3 * n_out), n_in, dtype))
        self.wh = Param(f"{name}.wh",
                        _uniform(rng, (n_out, 3 * n_out), n_out, dtype))
        self.b = Param(f"{name}.b", np.zeros(3 * n_out, dtype=dtype))
        self._steps = None

    def params(self) -> list[Param]:
        return [self.wx, self.wh, self.b]

    def forward(self, xs: np.ndarray) -> np.ndarray:
        t_steps, batch, _ = xs.shape
        hh = self.n_out
        h = np.zeros((batch, hh), dtype=xs.dtype)
        outs = np.empty((t_steps, batch, hh), dtype=xs.dtype)
        self._steps = []
        wh = self.wh.value
        for t in range(t_steps):
            x = xs[t]
            ax = x @ self.wx.value + self.b.value
            z = sigmoid(ax[:, :hh] + h @ wh[:, :hh])
            r = sigmoid(ax[:, hh:2 * hh] + h @ wh[:, hh:2 * hh])
            rh = r * h
            c = np.tanh(ax[:, 2 * hh:] + rh @ wh[:, 2 * hh:])
            h_new = z * h + (1.0 - z) * c
            self._steps.append((x, h, z, r, rh, c))
            outs[t] = h_new
            h = h_new
        return outs

    def backward(self, douts: np.ndarray) -> np.ndarray:
        hh = self.n_out
        wh = self.wh.value
        dxs = np.empty((len(self._steps),) + self._steps[0][0].shape,
                       dtype=douts.dtype)
        dh = np.zeros_like(douts[0])
        for t in range(len(self._steps) - 1, -1, -1):
            x, h_prev, z, r, rh, c = self._steps[t]
            dh_tot = douts[t] + dh
            dz = dh_tot * (h_prev - c)
            dc = dh_tot * (1.0 - z)
            dh_prev = dh_tot * z
            dac = dc * (1.0 - c * c)
            self.wh.grad[:, 2 * hh:] += rh.T @ dac
            drh = dac @ wh[:, 2 * hh:].T
            dr = drh * h_prev
            dh_prev = dh_prev + drh * r
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            self.wh.grad[:, :hh] += h_prev.T @ daz
            self.wh.grad[:, hh:2 * hh] += h_prev.T @ dar
            dh_prev = dh_prev + daz @ wh[:, :hh].T + dar @ wh[:, hh:2 * hh].T
            da = np.concatenate([daz, dar, dac], axis=1)
            self.wx.grad += x.T @ da
            self.b.grad += da.sum(axis=0)
            dxs[t] = da @ self.wx.value.T
            dh = dh_prev
        return dxs
