"""Parameterised layers: linear maps, embeddings, 1-D convolution with batch
norm, and LSTM/GRU recurrences (uni- or bidirectional).

Recurrent layers and the convolution are implemented as fused graph nodes
with hand-derived backward passes; ``grad_check`` in :mod:`.gradcheck`
verifies them against central finite differences.
"""

from __future__ import annotations

import numpy as np

from .value import ShapeError, Value, concat

__all__ = [
    "Param",
    "init_projection",
    "Linear",
    "Embedding",
    "Conv1dSame",
    "BatchNormChannels",
    "RecurrentLayer",
    "recurrent_layers",
]


class Param:
    """A named, trainable leaf of the graph.

    Every Param belongs to exactly one model registry; names are unique
    within it (enforced at registration).
    """

    __slots__ = ("value", "name", "trainable")

    def __init__(self, data: np.ndarray, name: str = "", trainable: bool = True):
        self.value = Value(np.asarray(data, dtype=np.float64))
        self.value.grad = np.zeros_like(self.value.data)
        self.name = name
        self.trainable = trainable

    @property
    def data(self) -> np.ndarray:
        return self.value.data

    @data.setter
    def data(self, arr: np.ndarray) -> None:
        self.value.data = np.asarray(arr, dtype=np.float64)

    @property
    def grad(self) -> np.ndarray:
        return self.value.grad

    def zero_grad(self) -> None:
        self.value.grad = np.zeros_like(self.value.data)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.data.shape})"


def init_projection(rng: np.random.Generator, fan_in: int, *shape) -> np.ndarray:
    """Uniform +-1/sqrt(fan_in), the default for every projection matrix."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class _Module:
    """Base keeping an ordered (name -> Param) mapping."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def _register(self, name: str, data: np.ndarray) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Param(data, name)
        self._params[name] = p
        return p

    def named_params(self) -> dict[str, Param]:
        return dict(self._params)

    def param_count(self) -> int:
        return sum(p.data.size for p in self._params.values())


class Linear(_Module):
    """y = x @ w (+ b); weight stored (in, out)."""

    def __init__(self, rng, in_dim: int, out_dim: int, bias: bool = True, name: str = "linear"):
        super().__init__()
        self.w = self._register(f"{name}/w", init_projection(rng, in_dim, in_dim, out_dim))
        self.b = self._register(f"{name}/b", np.zeros(out_dim)) if bias else None

    def __call__(self, x: Value) -> Value:
        out = x @ self.w.value
        if self.b is not None:
            out = out + self.b.value
        return out


class Embedding(_Module):
    """Row lookup, the projection of a one-hot id vector."""

    def __init__(self, rng, vocab: int, dim: int, name: str = "embedding"):
        super().__init__()
        self.vocab = vocab
        self.table = self._register(f"{name}/table", init_projection(rng, vocab, vocab, dim))

    def __call__(self, ids) -> Value:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab):
            raise IndexError(f"id out of range [0, {self.vocab}): {ids.min()}..{ids.max()}")
        table = self.table.value
        out_data = table.data[ids]

        def backprop(out):
            np.add.at(table.grad, ids, out.grad)

        return Value(out_data, (table,), backprop)


class Conv1dSame(_Module):
    """1-D convolution over a (T, C_in) sequence with same-length zero padding."""

    def __init__(self, rng, in_channels: int, out_channels: int, kernel: int, name: str = "conv"):
        super().__init__()
        if kernel % 2 != 1:
            raise ShapeError(f"same-padding convolution needs an odd kernel, got {kernel}")
        self.kernel = kernel
        self.in_channels = in_channels
        fan_in = in_channels * kernel
        self.w = self._register(f"{name}/w", init_projection(rng, fan_in, fan_in, out_channels))
        self.b = self._register(f"{name}/b", np.zeros(out_channels))

    def __call__(self, x: Value) -> Value:
        t, c = x.data.shape
        if c != self.in_channels:
            raise ShapeError(f"conv expects {self.in_channels} channels, got {c}")
        k = self.kernel
        pad = k // 2
        w, b = self.w.value, self.b.value

        padded = np.zeros((t + 2 * pad, c))
        padded[pad:pad + t] = x.data
        # windows[i] = padded[i:i+k] flattened -> (T, C*k)
        cols = np.stack([padded[i:i + t] for i in range(k)], axis=1).reshape(t, k * c)
        out_data = cols @ w.data + b.data

        def backprop(out):
            g = out.grad
            w.grad += cols.T @ g
            b.grad += g.sum(axis=0)
            dcols = (g @ w.data.T).reshape(t, k, c)
            dpadded = np.zeros_like(padded)
            for i in range(k):
                dpadded[i:i + t] += dcols[:, i, :]
            x.grad += dpadded[pad:pad + t]

        return Value(out_data, (x, w, b), backprop)


class BatchNormChannels(_Module):
    """Per-channel batch normalisation over the time axis of a (T, C) block.

    Training mode uses the current block's statistics and updates running
    averages with momentum 0.9; inference always uses the running averages.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, name: str = "bn"):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = self._register(f"{name}/gamma", np.ones(channels))
        self.beta = self._register(f"{name}/beta", np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def state_blobs(self) -> dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, blobs: dict[str, np.ndarray]) -> None:
        self.running_mean = np.asarray(blobs["running_mean"], dtype=np.float64)
        self.running_var = np.asarray(blobs["running_var"], dtype=np.float64)

    def __call__(self, x: Value, training: bool) -> Value:
        gamma, beta = self.gamma.value, self.beta.value
        if training:
            t = x.data.shape[0]
            mean = x.data.mean(axis=0)
            var = x.data.var(axis=0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            inv = 1.0 / np.sqrt(var + self.eps)
            xhat = (x.data - mean) * inv
            out_data = gamma.data * xhat + beta.data

            def backprop(out):
                g = out.grad
                gamma.grad += (g * xhat).sum(axis=0)
                beta.grad += g.sum(axis=0)
                dxhat = g * gamma.data
                xm = x.data - mean
                dvar = (dxhat * xm).sum(axis=0) * (-0.5) * inv ** 3
                dmean = -dxhat.sum(axis=0) * inv + dvar * (-2.0) * xm.mean(axis=0)
                x.grad += dxhat * inv + dvar * 2.0 * xm / t + dmean / t

            return Value(out_data, (x, gamma, beta), backprop)

        inv = 1.0 / np.sqrt(self.running_var + self.eps)
        xhat = (x.data - self.running_mean) * inv
        out_data = gamma.data * xhat + beta.data

        def backprop(out):
            g = out.grad
            gamma.grad += (g * xhat).sum(axis=0)
            beta.grad += g.sum(axis=0)
            x.grad += g * gamma.data * inv

        return Value(out_data, (x, gamma, beta), backprop)


class _LstmDirection(_Module):
    """Single-direction LSTM over a (T, in) sequence; gate order i, f, g, o."""

    def __init__(self, rng, in_dim: int, width: int, name: str):
        super().__init__()
        self.width = width
        h = width
        self.wx = self._register(f"{name}/wx", init_projection(rng, in_dim, in_dim, 4 * h))
        self.wh = self._register(f"{name}/wh", init_projection(rng, h, h, 4 * h))
        self.b = self._register(f"{name}/b", np.zeros(4 * h))

    def __call__(self, xs: Value) -> Value:
        t_len = xs.data.shape[0]
        h = self.width
        wx, wh, b = self.wx.value, self.wh.value, self.b.value

        pre_x = xs.data @ wx.data + b.data  # (T, 4H)
        hs = np.zeros((t_len, h))
        cs = np.zeros((t_len, h))
        gates = np.zeros((t_len, 4 * h))
        tcs = np.zeros((t_len, h))
        h_prev = np.zeros(h)
        c_prev = np.zeros(h)
        for t in range(t_len):
            pre = pre_x[t] + h_prev @ wh.data
            i = 1.0 / (1.0 + np.exp(-pre[:h]))
            f = 1.0 / (1.0 + np.exp(-pre[h:2 * h]))
            g = np.tanh(pre[2 * h:3 * h])
            o = 1.0 / (1.0 + np.exp(-pre[3 * h:]))
            c_prev = f * c_prev + i * g
            tc = np.tanh(c_prev)
            h_prev = o * tc
            gates[t, :h], gates[t, h:2 * h], gates[t, 2 * h:3 * h], gates[t, 3 * h:] = i, f, g, o
            cs[t] = c_prev
            tcs[t] = tc
            hs[t] = h_prev

        def backprop(out):
            dh_next = np.zeros(h)
            dc_next = np.zeros(h)
            dpre_all = np.zeros((t_len, 4 * h))
            wh_t = wh.data.T
            for t in range(t_len - 1, -1, -1):
                i, f = gates[t, :h], gates[t, h:2 * h]
                g, o = gates[t, 2 * h:3 * h], gates[t, 3 * h:]
                c_before = cs[t - 1] if t > 0 else np.zeros(h)
                dh = out.grad[t] + dh_next
                do = dh * tcs[t]
                dc = dc_next + dh * o * (1.0 - tcs[t] * tcs[t])
                di = dc * g
                dg = dc * i
                df = dc * c_before
                dc_next = dc * f
                dpre = np.concatenate([
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ])
                dpre_all[t] = dpre
                dh_next = dpre @ wh_t
            h_prev_all = np.zeros((t_len, h))
            h_prev_all[1:] = hs[:-1]
            wh.grad += h_prev_all.T @ dpre_all
            wx.grad += xs.data.T @ dpre_all
            b.grad += dpre_all.sum(axis=0)
            xs.grad += dpre_all @ wx.data.T

        return Value(hs, (xs, wx, wh, b), backprop)


class _GruDirection(_Module):
    """Single-direction GRU, gate order r, z, n with the reset gate applied
    to the hidden pre-activation: h' = (1-z)*n + z*h."""

    def __init__(self, rng, in_dim: int, width: int, name: str):
        super().__init__()
        self.width = width
        h = width
        self.wx = self._register(f"{name}/wx", init_projection(rng, in_dim, in_dim, 3 * h))
        self.wh = self._register(f"{name}/wh", init_projection(rng, h, h, 3 * h))
        self.bx = self._register(f"{name}/bx", np.zeros(3 * h))
        self.bh = self._register(f"{name}/bh", np.zeros(3 * h))

    def __call__(self, xs: Value) -> Value:
        t_len = xs.data.shape[0]
        h = self.width
        wx, wh, bx, bh = self.wx.value, self.wh.value, self.bx.value, self.bh.value

        pre_x = xs.data @ wx.data + bx.data  # (T, 3H)
        hs = np.zeros((t_len, h))
        rs = np.zeros((t_len, h))
        zs = np.zeros((t_len, h))
        ns = np.zeros((t_len, h))
        pre_h_n = np.zeros((t_len, h))
        h_prev = np.zeros(h)
        for t in range(t_len):
            pre_h = h_prev @ wh.data + bh.data
            r = 1.0 / (1.0 + np.exp(-(pre_x[t, :h] + pre_h[:h])))
            z = 1.0 / (1.0 + np.exp(-(pre_x[t, h:2 * h] + pre_h[h:2 * h])))
            n = np.tanh(pre_x[t, 2 * h:] + r * pre_h[2 * h:])
            h_prev = (1.0 - z) * n + z * h_prev
            rs[t], zs[t], ns[t], pre_h_n[t] = r, z, n, pre_h[2 * h:]
            hs[t] = h_prev

        def backprop(out):
            dh_next = np.zeros(h)
            dpre_x_all = np.zeros((t_len, 3 * h))
            dpre_h_all = np.zeros((t_len, 3 * h))
            wh_t = wh.data.T
            for t in range(t_len - 1, -1, -1):
                r, z, n = rs[t], zs[t], ns[t]
                h_before = hs[t - 1] if t > 0 else np.zeros(h)
                dh = out.grad[t] + dh_next
                dz = dh * (h_before - n)
                dn = dh * (1.0 - z)
                dpre_n = dn * (1.0 - n * n)
                dr = dpre_n * pre_h_n[t]
                dpre_hn = dpre_n * r
                dz_pre = dz * z * (1.0 - z)
                dr_pre = dr * r * (1.0 - r)
                dpre_x_all[t] = np.concatenate([dr_pre, dz_pre, dpre_n])
                dpre_h = np.concatenate([dr_pre, dz_pre, dpre_hn])
                dpre_h_all[t] = dpre_h
                dh_next = dh * z + dpre_h @ wh_t
            h_prev_all = np.zeros((t_len, h))
            h_prev_all[1:] = hs[:-1]
            wh.grad += h_prev_all.T @ dpre_h_all
            wx.grad += xs.data.T @ dpre_x_all
            bx.grad += dpre_x_all.sum(axis=0)
            bh.grad += dpre_h_all.sum(axis=0)
            xs.grad += dpre_x_all @ wx.data.T

        return Value(hs, (xs, wx, wh, bx, bh), backprop)


_CELLS = {"lstm": _LstmDirection, "gru": _GruDirection}


class RecurrentLayer(_Module):
    """LSTM or GRU over a (T, in) sequence.

    direction "forward" or "backward" yields (T, width); "bi" concatenates
    both directions into (T, 2*width). The backward direction runs on the
    reversed sequence and its outputs are re-reversed to original order.
    """

    def __init__(self, rng, in_dim: int, width: int, kind: str = "gru",
                 direction: str = "bi", name: str = "rnn"):
        super().__init__()
        if kind not in _CELLS:
            raise ValueError(f"unknown recurrent kind {kind!r}")
        if direction not in ("forward", "backward", "bi"):
            raise ValueError(f"unknown direction {direction!r}")
        self.kind = kind
        self.direction = direction
        self.width = width
        cell = _CELLS[kind]
        self.cells: dict[str, _Module] = {}
        if direction in ("forward", "bi"):
            self.cells["fwd"] = cell(rng, in_dim, width, f"{name}/fwd")
        if direction in ("backward", "bi"):
            self.cells["bwd"] = cell(rng, in_dim, width, f"{name}/bwd")
        for c in self.cells.values():
            for pname, p in c.named_params().items():
                self._params[pname] = p

    @property
    def out_dim(self) -> int:
        return self.width * (2 if self.direction == "bi" else 1)

    def __call__(self, xs: Value) -> Value:
        if xs.data.shape[0] < 1:
            raise ShapeError("recurrent layer needs a sequence of length >= 1")
        outs = []
        if "fwd" in self.cells:
            outs.append(self.cells["fwd"](xs))
        if "bwd" in self.cells:
            rev = _reverse_rows(xs)
            outs.append(_reverse_rows(self.cells["bwd"](rev)))
        if len(outs) == 1:
            return outs[0]
        return concat(outs, axis=1)


def _reverse_rows(x: Value) -> Value:
    out_data = x.data[::-1].copy()

    def backprop(out):
        x.grad += out.grad[::-1]

    return Value(out_data, (x,), backprop)


def recurrent_layers(seq: Value, direction: str, kind: str, width: int,
                     rng=None, layer: RecurrentLayer | None = None) -> Value:
    """Functional entry: run ``seq`` through a (possibly fresh) recurrent layer."""
    if layer is None:
        if rng is None:
            rng = np.random.default_rng(0)
        layer = RecurrentLayer(rng, seq.data.shape[1], width, kind=kind, direction=direction)
    return layer(seq)
