"""Dense float64 tensors with reverse-mode autodiff, Adam, and checkpoints.

Small by design: just enough primitives for an attention encoder-decoder.
A tensor records its parents and a backward closure when grad mode is on;
backward() walks the graph in reverse topological order and then severs it.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- graph plumbing -------------------------------------------------

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def item(self) -> float:
        return float(self.data)

    # -- operators ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(*xs: Tensor) -> bool:
    return _grad_enabled and any(x.requires_grad or x._parents for x in xs)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and backward is not None:
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- primitives ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def bw(g, out):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(g, b.shape))

    return _make(data, (a, b), bw if _tracked(a, b) else None)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def bw(g, out):
        a._accum(_unbroadcast(g * b.data, a.shape))
        b._accum(_unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), bw if _tracked(a, b) else None)


def power(a, exponent: float) -> Tensor:
    a = _as_tensor(a)
    data = a.data**exponent

    def bw(g, out):
        a._accum(g * exponent * a.data ** (exponent - 1))

    return _make(data, (a,), bw if _tracked(a) else None)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else -1]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def bw(g, out):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:  # dot product
            a._accum(g * bd)
            b._accum(g * ad)
        elif ad.ndim == 1 and bd.ndim == 2:  # (k,) @ (k,m) -> (m,)
            a._accum(g @ bd.T)
            b._accum(np.outer(ad, g))
        elif ad.ndim == 2 and bd.ndim == 1:  # (n,k) @ (k,) -> (n,)
            a._accum(np.outer(g, bd))
            b._accum(ad.T @ g)
        elif ad.ndim >= 2 and bd.ndim >= 2:
            a._accum(_unbroadcast(g @ np.swapaxes(bd, -1, -2), a.shape))
            b._accum(_unbroadcast(np.swapaxes(ad, -1, -2) @ g, b.shape))
        else:
            raise ShapeError(f"unsupported matmul backward: {a.shape} @ {b.shape}")

    return _make(data, (a, b), bw if _tracked(a, b) else None)


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    data = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def bw(g, out):
        a._accum(np.transpose(g, inv))

    return _make(data, (a,), bw if _tracked(a) else None)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    data = a.data.reshape(shape)

    def bw(g, out):
        a._accum(g.reshape(a.shape))

    return _make(data, (a,), bw if _tracked(a) else None)


def concat(tensors, axis=0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bw(g, out):
        pieces = np.split(g, np.cumsum(sizes)[:-1], axis=axis)
        for t, piece in zip(tensors, pieces):
            t._accum(piece)

    return _make(data, tuple(tensors), bw if _tracked(*tensors) else None)


def index_rows(a, idx) -> Tensor:
    """Select rows along axis 0 (gather)."""
    a = _as_tensor(a)
    idx = np.asarray(idx)
    data = a.data[idx]

    def bw(g, out):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        a._accum(buf)

    return _make(data, (a,), bw if _tracked(a) else None)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g, out):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(g, a.shape).copy())

    return _make(data, (a,), bw if _tracked(a) else None)


def mean_(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    data = np.tanh(a.data)

    def bw(g, out):
        a._accum(g * (1.0 - out.data**2))

    return _make(data, (a,), bw if _tracked(a) else None)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def bw(g, out):
        a._accum(g * (a.data > 0))

    return _make(data, (a,), bw if _tracked(a) else None)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    data = np.exp(a.data)

    def bw(g, out):
        a._accum(g * out.data)

    return _make(data, (a,), bw if _tracked(a) else None)


def log(a) -> Tensor:
    a = _as_tensor(a)
    data = np.log(a.data)

    def bw(g, out):
        a._accum(g / a.data)

    return _make(data, (a,), bw if _tracked(a) else None)


def softmax(a, axis=-1) -> Tensor:
    """Numerically stable softmax along `axis` (max-subtracted)."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bw(g, out):
        s = out.data
        a._accum(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return _make(data, (a,), bw if _tracked(a) else None)


def masked_fill(a, mask, value) -> Tensor:
    """Replace positions where `mask` is True with a constant."""
    a = _as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    data = np.where(mask, value, a.data)

    def bw(g, out):
        a._accum(np.where(mask, 0.0, g))

    return _make(data, (a,), bw if _tracked(a) else None)


# -- backward pass ------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Fill grads of every reachable tensor; the tape is severed afterwards."""
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    loss._accum(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad, node)
        node._parents = ()
        node._backward = None


# -- batch norm ---------------------------------------------------------


class BatchNorm:
    """Per-feature normalization over axis 0, learned affine, running stats."""

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if training:
            mu = mean_(x, axis=0, keepdims=True)
            centered = x - mu
            var = mean_(mul(centered, centered), axis=0, keepdims=True)
            inv = power(add(var, self.eps), -0.5)
            out = mul(centered, inv)
            n = x.data.shape[0]
            batch_var = x.data.var(axis=0) * (n / max(n - 1, 1))
            self.running_mean = (
                (1 - self.momentum) * self.running_mean + self.momentum * x.data.mean(axis=0)
            )
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * batch_var
        else:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            out = mul(x - self.running_mean, inv)
        return add(mul(out, self.gamma), self.beta)


# -- optimizer ----------------------------------------------------------


class AdamState:
    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self) -> None:
        """Bias-corrected Adam update; grads are zeroed afterwards."""
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1**self.t)
            v_hat = self.v[name] / (1 - self.beta2**self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.grad = None


# -- gradient checking --------------------------------------------------


def grad_check(f, points: list[np.ndarray], eps: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` maps a list of Tensors to a scalar Tensor.
    """
    xs = [Tensor(p.astype(np.float64).copy(), requires_grad=True) for p in points]
    loss = f(xs)
    backward(loss)
    worst = 0.0
    for x in xs:
        analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f([Tensor(p.data) for p in xs]).item()
            flat[i] = orig - eps
            lo = f([Tensor(p.data) for p in xs]).item()
            flat[i] = orig
            numeric = (hi - lo) / (2 * eps)
            a = analytic.reshape(-1)[i]
            denom = max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, abs(a - numeric) / denom)
    return worst


# -- checkpoints --------------------------------------------------------

CHECKPOINT_MAGIC = b"DFC1"


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    """Flat binary of named float64 arrays with a text header."""
    header_lines = []
    offset = 0
    bufs = []
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], dtype=np.float64)
        shape = ",".join(str(s) for s in arr.shape)
        header_lines.append(f"{name} {shape or 'scalar'} {offset}")
        bufs.append(np.ascontiguousarray(arr).tobytes())
        offset += arr.nbytes
    header = "\n".join(header_lines).encode() + b"\n\n"
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + b"\n")
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for buf in bufs:
            fh.write(buf)


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != CHECKPOINT_MAGIC + b"\n":
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = fh.read(header_len).decode()
        blob = fh.read()
    out = {}
    for line in header.strip().split("\n"):
        name, shape_s, offset_s = line.rsplit(" ", 2)
        shape = () if shape_s == "scalar" else tuple(int(s) for s in shape_s.split(","))
        count = int(np.prod(shape)) if shape else 1
        offset = int(offset_s)
        arr = np.frombuffer(blob, dtype=np.float64, count=count, offset=offset).reshape(shape)
        out[name] = arr.copy()
    return out
