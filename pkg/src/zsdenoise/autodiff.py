"""Minimal reverse-mode autodiff over numpy arrays.

Covers exactly the primitives the training loss needs: matrix products,
row softmax, layer norm, softplus, clamping, absolute value, means, fixed
convolutions, the stride-2 downsampling pair, patch extraction, and the
spatially-varying bilateral filter (custom VJP via the kernel backend).

Everything runs in float64. |x| uses subgradient 0 at x = 0.
"""

import numpy as np

from . import ops
from .backend import get_kernels


class NonFiniteError(RuntimeError):
    """A primitive produced a non-finite value."""


def _unbroadcast(grad, shape):
    """Reduce grad to the given (broadcast-source) shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self._op = op
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite value produced by primitive {op!r}")

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g):
        if self.requires_grad:
            self.grad = g if self.grad is None else self.grad + g

    def backward(self):
        if self.data.shape != ():
            raise ValueError("backward() requires a scalar")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.ones(())
        for t in reversed(topo):
            if t._backward is not None:
                t._backward(t.grad)

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, parents=(self, other), op="add")

        def bwd(g):
            self._accum(_unbroadcast(g, self.data.shape))
            other._accum(_unbroadcast(g, other.data.shape))

        out._backward = bwd
        return out

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data - other.data, parents=(self, other), op="sub")

        def bwd(g):
            self._accum(_unbroadcast(g, self.data.shape))
            other._accum(-_unbroadcast(g, other.data.shape))

        out._backward = bwd
        return out

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, parents=(self, other), op="mul")

        def bwd(g):
            self._accum(_unbroadcast(g * other.data, self.data.shape))
            other._accum(_unbroadcast(g * self.data, other.data.shape))

        out._backward = bwd
        return out

    __rmul__ = __mul__

    def __matmul__(self, other):
        out = Tensor(self.data @ other.data, parents=(self, other), op="matmul")
        a, b = self.data, other.data

        def bwd(g):
            if b.ndim == 1:
                self._accum(np.outer(g, b) if a.ndim == 2 else g * b)
                other._accum(a.T @ g if a.ndim == 2 else a * g)
            else:
                self._accum(g @ b.T)
                other._accum(a.T @ g)

        out._backward = bwd
        return out

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), parents=(self,), op="reshape")
        out._backward = lambda g: self._accum(g.reshape(self.data.shape))
        return out

    def __getitem__(self, key):
        out = Tensor(self.data[key], parents=(self,), op="slice")

        def bwd(g):
            full = np.zeros_like(self.data)
            full[key] = g
            self._accum(full)

        out._backward = bwd
        return out


def constant(data):
    return Tensor(data)


def parameter(data):
    return Tensor(data, requires_grad=True)


def softmax_rows(x):
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    out = Tensor(p, parents=(x,), op="softmax")

    def bwd(g):
        x._accum(p * (g - (g * p).sum(axis=1, keepdims=True)))

    out._backward = bwd
    return out


def layer_norm_rows(x, scale, shift, eps=1e-5):
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * scale.data + shift.data, parents=(x, scale, shift), op="layernorm")

    def bwd(g):
        scale._accum(_unbroadcast(g * xhat, scale.data.shape))
        shift._accum(_unbroadcast(g, shift.data.shape))
        gh = g * scale.data
        x._accum(
            inv
            * (
                gh
                - gh.mean(axis=1, keepdims=True)
                - xhat * (gh * xhat).mean(axis=1, keepdims=True)
            )
        )

    out._backward = bwd
    return out


def softplus(x):
    out = Tensor(np.logaddexp(0.0, x.data), parents=(x,), op="softplus")

    def bwd(g):
        x._accum(g / (1.0 + np.exp(-x.data)))

    out._backward = bwd
    return out


def clamp_max(x, cap):
    out = Tensor(np.minimum(x.data, cap), parents=(x,), op="clamp_max")
    mask = x.data < cap
    out._backward = lambda g: x._accum(g * mask)
    return out


def absolute(x):
    out = Tensor(np.abs(x.data), parents=(x,), op="abs")
    out._backward = lambda g: x._accum(g * np.sign(x.data))
    return out


def mean(x):
    n = x.data.size
    out = Tensor(x.data.mean(), parents=(x,), op="mean")
    out._backward = lambda g: x._accum(np.full(x.data.shape, float(g) / n))
    return out


def mean_abs_diff(a, b):
    """Mean absolute difference: the L1 reduction used by the losses."""
    return mean(absolute(a - b))


def extract_patches(x, P):
    H, W = x.data.shape
    if H % P or W % P:
        raise ValueError(f"dims {H}x{W} not divisible by patch size {P}")
    gh, gw = H // P, W // P
    data = x.data.reshape(gh, P, gw, P).transpose(0, 2, 1, 3).reshape(gh * gw, P * P)
    out = Tensor(data, parents=(x,), op="patches")

    def bwd(g):
        x._accum(g.reshape(gh, gw, P, P).transpose(0, 2, 1, 3).reshape(H, W))

    out._backward = bwd
    return out


def downsample_g1(x):
    out = Tensor(0.5 * (x.data[0::2, 1::2] + x.data[1::2, 0::2]), parents=(x,), op="g1")

    def bwd(g):
        full = np.zeros_like(x.data)
        full[0::2, 1::2] = 0.5 * g
        full[1::2, 0::2] = 0.5 * g
        x._accum(full)

    out._backward = bwd
    return out


def downsample_g2(x):
    out = Tensor(0.5 * (x.data[0::2, 0::2] + x.data[1::2, 1::2]), parents=(x,), op="g2")

    def bwd(g):
        full = np.zeros_like(x.data)
        full[0::2, 0::2] = 0.5 * g
        full[1::2, 1::2] = 0.5 * g
        x._accum(full)

    out._backward = bwd
    return out


def blur_reflect(x, k1d):
    out = Tensor(ops.blur_reflect(x.data, k1d), parents=(x,), op="blur")
    out._backward = lambda g: x._accum(ops.blur_reflect_adjoint(g, k1d, x.data.shape))
    return out


def bilateral(img, sr, sx, sy, P):
    """Spatially-varying bilateral filter; per-patch window size follows
    k = 2*ceil(max(sigma_x, sigma_y) + 1) and is treated as non-differentiable."""
    kern = get_kernels()
    kgrid = (2.0 * np.ceil(np.maximum(sx.data, sy.data) + 1.0)).astype(np.int64)
    o, wsum = kern.bilateral_forward(img.data, sr.data, sx.data, sy.data, kgrid, P)
    out = Tensor(o, parents=(img, sr, sx, sy), op="bilateral")

    def bwd(g):
        gimg, gsr, gsx, gsy = kern.bilateral_backward(
            img.data, sr.data, sx.data, sy.data, kgrid, P, o, wsum, g
        )
        img._accum(gimg)
        sr._accum(gsr)
        sx._accum(gsx)
        sy._accum(gsy)

    out._backward = bwd
    return out


def evaluate_with_gradients(loss_fn, params):
    """Loss and exact reverse-mode gradient of loss_fn at the flat parameter
    vector. loss_fn maps a 1-D Tensor to a scalar Tensor."""
    theta = parameter(np.asarray(params, dtype=np.float64))
    loss = loss_fn(theta)
    loss.backward()
    grad = theta.grad if theta.grad is not None else np.zeros_like(theta.data)
    return float(loss.data), np.asarray(grad, dtype=np.float64)


def finite_difference_gradient(loss_fn, params, epsilon, coords=None):
    """Central-difference oracle. loss_fn maps a plain numpy vector to a float.

    With coords given, only those coordinates are evaluated (others 0).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    idxs = range(params.size) if coords is None else coords
    for i in idxs:
        up = params.copy()
        up[i] += epsilon
        dn = params.copy()
        dn[i] -= epsilon
        grad[i] = (loss_fn(up) - loss_fn(dn)) / (2.0 * epsilon)
    return grad
