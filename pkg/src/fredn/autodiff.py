"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Just enough machinery for the forecasting model: elementwise arithmetic with
broadcasting, trailing-axis matmul, shape surgery, GELU/sigmoid/LayerNorm
pieces, and the one-sided real FFT pair with hand-derived adjoints.  Every
adjoint here is covered by finite-difference tests.

Gradients accumulate on ``Var.grad`` after calling ``backward`` on a scalar
(or seeding a non-scalar output explicitly).  Wrapping code in ``no_grad()``
skips graph construction entirely, which keeps the finite-difference oracle
and inference cheap.
"""

import numpy as np
from scipy.special import erf

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Var:
    """A node in the computation graph holding a float64 array."""

    __slots__ = ("data", "grad", "_parents", "_vjp")

    # make `ndarray <op> Var` defer to the reflected Var methods instead of
    # broadcasting the Var as an object scalar
    __array_ufunc__ = None

    def __init__(self, data, _parents=(), _vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        if _GRAD_ENABLED:
            self._parents = _parents
            self._vjp = _vjp
        else:
            self._parents = ()
            self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def backward(self, seed=None):
        """Backpropagate from this node.

        ``seed`` defaults to 1 for scalars; non-scalar roots must pass the
        upstream gradient explicitly.
        """
        if seed is None:
            if self.data.size != 1:
                raise ValueError("non-scalar backward needs an explicit seed")
            seed = np.ones_like(self.data)
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(seed, dtype=np.float64)
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        a, b = self, as_var(other)
        out = a.data + b.data
        return Var(out, (a, b), lambda g: (_unbroadcast(g, a.shape),
                                           _unbroadcast(g, b.shape)))

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_var(other))

    def __rsub__(self, other):
        return as_var(other) + (-self)

    def __mul__(self, other):
        a, b = self, as_var(other)
        out = a.data * b.data
        return Var(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.shape),
                                           _unbroadcast(g * a.data, b.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, as_var(other)
        out = a.data / b.data
        def vjp(g):
            return (_unbroadcast(g / b.data, a.shape),
                    _unbroadcast(-g * a.data / (b.data ** 2), b.shape))
        return Var(out, (a, b), vjp)

    def __rtruediv__(self, other):
        return as_var(other) / self

    def __pow__(self, exponent):
        if not np.isscalar(exponent):
            raise TypeError("only scalar exponents are supported")
        out = self.data ** exponent
        return Var(out, (self,),
                   lambda g: (g * exponent * self.data ** (exponent - 1),))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        out = self.data[idx]
        def vjp(g):
            full = np.zeros_like(self.data)
            full[idx] = g
            return (full,)
        return Var(out, (self,), vjp)


def as_var(x):
    return x if isinstance(x, Var) else Var(x)


# -- shape surgery ---------------------------------------------------------

def reshape(a, shape):
    a = as_var(a)
    old = a.shape
    return Var(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def swapaxes(a, ax1, ax2):
    a = as_var(a)
    return Var(np.swapaxes(a.data, ax1, ax2), (a,),
               lambda g: (np.swapaxes(g, ax1, ax2),))


def concat(parts, axis):
    parts = [as_var(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum(sizes)[:-1]
    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))
    return Var(out, tuple(parts), vjp)


def stack(parts, axis):
    parts = [as_var(p) for p in parts]
    out = np.stack([p.data for p in parts], axis=axis)
    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))
    return Var(out, tuple(parts), vjp)


# -- reductions ------------------------------------------------------------

def vsum(a, axis=None, keepdims=False):
    a = as_var(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return Var(out, (a,), vjp)


def vmean(a, axis=None, keepdims=False):
    a = as_var(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return vsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# -- nonlinearities --------------------------------------------------------

def sqrt(a):
    a = as_var(a)
    out = np.sqrt(a.data)
    return Var(out, (a,), lambda g: (g * 0.5 / out,))


def sigmoid(a):
    a = as_var(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return Var(out, (a,), lambda g: (g * out * (1.0 - out),))


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a):
    """Exact (erf-based) GELU."""
    a = as_var(a)
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    out = a.data * cdf
    def vjp(g):
        pdf = np.exp(-0.5 * a.data ** 2) * _INV_SQRT2PI
        return (g * (cdf + a.data * pdf),)
    return Var(out, (a,), vjp)


def matmul(a, w):
    """``a @ w`` with ``a`` of shape (..., n) stacked rows and ``w`` (n, m)."""
    a, w = as_var(a), as_var(w)
    out = a.data @ w.data
    def vjp(g):
        ga = g @ w.data.T
        n, m = w.shape
        gw = a.data.reshape(-1, n).T @ g.reshape(-1, m)
        return (ga, gw)
    return Var(out, (a, w), vjp)


def dropout(a, rate, rng):
    """Inverted dropout with a mask drawn from ``rng``; identity at rate 0."""
    a = as_var(a)
    if rate <= 0.0:
        return a
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return a * mask


# -- one-sided real FFT pair ------------------------------------------------
#
# Spectra on the tape are real tensors with a size-2 plane axis at position
# -3 (index 0 = real plane, 1 = imaginary plane); the frequency axis sits at
# -2 and the embedding axis last.  Keeping everything real-valued makes the
# shared-weight spectral MLP a plain batched matmul and sidesteps complex
# gradient conventions.  Transforms are unnormalized, matching the pipeline.

def _plane_weights(n_time, nf):
    w = np.ones(nf)
    if n_time % 2 == 0:
        w[1:-1] = 2.0
    else:
        w[1:] = 2.0
    return w


def rfft_planes(x):
    """rfft along axis -2 of ``x`` (..., T, d) -> planes tensor (..., 2, F, d)."""
    x = as_var(x)
    n = x.shape[-2]
    spec = np.fft.rfft(x.data, axis=-2)
    out = np.stack([spec.real, spec.imag], axis=-3)
    w = _plane_weights(n, spec.shape[-2]).reshape(-1, 1)
    def vjp(g):
        gc = np.take(g, 0, axis=-3) + 1j * np.take(g, 1, axis=-3)
        # one-sided adjoint: divide out the Hermitian doubling irfft applies
        return (n * np.fft.irfft(gc / w, n=n, axis=-2),)
    return Var(out, (x,), vjp)


def irfft_planes(s, n):
    """Inverse transform of a planes tensor (..., 2, F, d) -> (..., T, d)."""
    s = as_var(s)
    spec = np.take(s.data, 0, axis=-3) + 1j * np.take(s.data, 1, axis=-3)
    out = np.fft.irfft(spec, n=n, axis=-2)
    w = _plane_weights(n, spec.shape[-2]).reshape(-1, 1)
    def vjp(g):
        gs = (w / n) * np.fft.rfft(g, axis=-2)
        # non-DC/non-Nyquist bins appear twice in the synthesis, hence the
        # factor-2 weighting of the adjoint
        return (np.stack([gs.real, gs.imag], axis=-3),)
    return Var(out, (s,), vjp)
