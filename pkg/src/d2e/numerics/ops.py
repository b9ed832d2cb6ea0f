"""Differentiable primitives and composites.

Every function here accepts either ``Var`` nodes or plain numpy arrays and
dispatches accordingly: with no ``Var`` among the arguments the plain numpy
result is returned, so the same model code runs traced or untraced.  Mixing
is allowed; raw arrays are lifted as constants onto the tape of the first
``Var`` argument.

Backward rules follow the usual vector-Jacobian conventions; broadcasting in
elementwise ops is undone by summing the adjoint back to the operand shape.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as _sla
import scipy.special as _sps

from .tape import Array, Tape, Var, _as_f64

# ---------------------------------------------------------------------------
# dispatch helpers


def is_var(x) -> bool:
    return isinstance(x, Var)


def value_of(x) -> Array:
    return x.value if isinstance(x, Var) else _as_f64(x)


def _tape_of(*args) -> Tape | None:
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _lift(tape: Tape, *args) -> tuple[Var, ...]:
    return tuple(tape.lift(a) for a in args)


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum adjoint ``g`` down to ``shape`` (the pre-broadcast operand shape)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return value_of(a) + value_of(b)
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = av + bv

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return tape.record(out, (a, b), vjp)


def subtract(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return value_of(a) - value_of(b)
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = av - bv

    def vjp(g):
        return _unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)

    return tape.record(out, (a, b), vjp)


def multiply(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return value_of(a) * value_of(b)
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = av * bv

    def vjp(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return tape.record(out, (a, b), vjp)


def divide(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return value_of(a) / value_of(b)
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = av / bv

    def vjp(g):
        return (
            _unbroadcast(g / bv, av.shape),
            _unbroadcast(-g * av / (bv * bv), bv.shape),
        )

    return tape.record(out, (a, b), vjp)


def negative(a):
    if not is_var(a):
        return -value_of(a)
    av = a.value
    return a.tape.record(-av, (a,), lambda g: (-g,))


def power(a, exponent):
    """a ** exponent.  A Var exponent routes through exp(e * log a)."""
    if is_var(exponent):
        return exp(multiply(exponent, log(a)))
    c = float(exponent)
    if not is_var(a):
        return value_of(a) ** c
    av = a.value
    out = av**c

    def vjp(g):
        return (g * c * av ** (c - 1.0),)

    return a.tape.record(out, (a,), vjp)


def _unary(a, fn, dfn):
    if not is_var(a):
        return fn(value_of(a))
    av = a.value
    out = fn(av)

    def vjp(g):
        return (g * dfn(av, out),)

    return a.tape.record(out, (a,), vjp)


def exp(a):
    return _unary(a, np.exp, lambda x, y: y)


def log(a):
    return _unary(a, np.log, lambda x, y: 1.0 / x)


def log1p(a):
    return _unary(a, np.log1p, lambda x, y: 1.0 / (1.0 + x))


def expm1(a):
    return _unary(a, np.expm1, lambda x, y: y + 1.0)


def sqrt(a):
    return _unary(a, np.sqrt, lambda x, y: 0.5 / y)


def tanh(a):
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y)


def sigmoid(a):
    return _unary(a, _sps.expit, lambda x, y: y * (1.0 - y))


def softplus(a):
    # log(1 + e^x), evaluated stably for large |x|
    return _unary(a, lambda x: np.logaddexp(0.0, x), lambda x, y: _sps.expit(x))


def gammaln(a):
    return _unary(a, _sps.gammaln, lambda x, y: _sps.digamma(x))


def digamma(a):
    return _unary(a, _sps.digamma, lambda x, y: _sps.polygamma(1, x))


def maximum(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return np.maximum(value_of(a), value_of(b))
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = np.maximum(av, bv)
    mask = av >= bv  # ties give the subgradient to the first operand

    def vjp(g):
        return _unbroadcast(g * mask, av.shape), _unbroadcast(g * ~mask, bv.shape)

    return tape.record(out, (a, b), vjp)


def minimum(a, b):
    return negative(maximum(negative(a), negative(b)))


def where(cond, a, b):
    cond = np.asarray(value_of(cond), dtype=bool)
    tape = _tape_of(a, b)
    if tape is None:
        return np.where(cond, value_of(a), value_of(b))
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = np.where(cond, av, bv)

    def vjp(g):
        return (
            _unbroadcast(np.where(cond, g, 0.0), av.shape),
            _unbroadcast(np.where(cond, 0.0, g), bv.shape),
        )

    return tape.record(out, (a, b), vjp)


def detach(a):
    """Forward identity with no backward edge."""
    if not is_var(a):
        return value_of(a)
    return a.tape.constant(a.value)


# ---------------------------------------------------------------------------
# reductions and structure


def sum_(a, axis=None, keepdims: bool = False):
    if not is_var(a):
        return value_of(a).sum(axis=axis, keepdims=keepdims)
    av = a.value
    out = av.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, av.shape),)
        ax = axis if isinstance(axis, tuple) else (axis,)
        gg = g if keepdims else np.expand_dims(g, ax)
        return (np.broadcast_to(gg, av.shape),)

    return a.tape.record(out, (a,), vjp)


def mean_(a, axis=None, keepdims: bool = False):
    av = value_of(a)
    if axis is None:
        n = av.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([av.shape[i] for i in ax]))
    return divide(sum_(a, axis=axis, keepdims=keepdims), float(n))


def cumsum(a, axis: int = -1):
    if not is_var(a):
        return np.cumsum(value_of(a), axis=axis)
    av = a.value
    out = np.cumsum(av, axis=axis)

    def vjp(g):
        return (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),)

    return a.tape.record(out, (a,), vjp)


def reshape(a, shape):
    if not is_var(a):
        return value_of(a).reshape(shape)
    av = a.value
    out = av.reshape(shape)

    def vjp(g):
        return (g.reshape(av.shape),)

    return a.tape.record(out, (a,), vjp)


def transpose(a, axes=None):
    if not is_var(a):
        return np.transpose(value_of(a), axes)
    av = a.value
    out = np.transpose(av, axes)
    inv = None if axes is None else np.argsort(axes)

    def vjp(g):
        return (np.transpose(g, inv),)

    return a.tape.record(out, (a,), vjp)


def getitem(a, key):
    if not is_var(a):
        return value_of(a)[key]
    av = a.value
    out = av[key]

    def vjp(g):
        z = np.zeros_like(av)
        np.add.at(z, key, g)
        return (z,)

    return a.tape.record(out, (a,), vjp)


def take(a, indices, axis: int = 0):
    indices = np.asarray(indices)
    if not is_var(a):
        return np.take(value_of(a), indices, axis=axis)
    av = a.value
    out = np.take(av, indices, axis=axis)

    def vjp(g):
        z = np.zeros_like(av)
        sl: list = [slice(None)] * av.ndim
        sl[axis] = indices
        np.add.at(z, tuple(sl), g)
        return (z,)

    return a.tape.record(out, (a,), vjp)


def concat(parts, axis: int = 0):
    tape = _tape_of(*parts)
    if tape is None:
        return np.concatenate([value_of(p) for p in parts], axis=axis)
    parts = _lift(tape, *parts)
    vals = [p.value for p in parts]
    out = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        grads = []
        sl: list = [slice(None)] * g.ndim
        for i in range(len(sizes)):
            sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return tape.record(out, parts, vjp)


def stack(parts, axis: int = 0):
    tape = _tape_of(*parts)
    if tape is None:
        return np.stack([value_of(p) for p in parts], axis=axis)
    expanded = []
    for p in parts:
        v = value_of(p)
        shape = list(v.shape)
        shape.insert(axis if axis >= 0 else axis + v.ndim + 1, 1)
        expanded.append(reshape(p, tuple(shape)))
    return concat(expanded, axis=axis)


def diagonal(a):
    if not is_var(a):
        return np.diagonal(value_of(a))
    av = a.value
    out = np.diagonal(av).copy()

    def vjp(g):
        z = np.zeros_like(av)
        np.fill_diagonal(z, g)
        return (z,)

    return a.tape.record(out, (a,), vjp)


def trace(a):
    return sum_(diagonal(a))


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    tape = _tape_of(a, b)
    if tape is None:
        return value_of(a) @ value_of(b)
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = av @ bv

    if av.ndim == 2 and bv.ndim == 2:

        def vjp(g):
            return g @ bv.T, av.T @ g

    elif av.ndim == 2 and bv.ndim == 1:

        def vjp(g):
            return np.outer(g, bv), av.T @ g

    elif av.ndim == 1 and bv.ndim == 2:

        def vjp(g):
            return bv @ g, np.outer(av, g)

    elif av.ndim == 1 and bv.ndim == 1:

        def vjp(g):
            return g * bv, g * av

    else:
        raise ValueError(f"matmul supports 1-D/2-D operands, got {av.ndim}-D @ {bv.ndim}-D")

    return tape.record(out, (a, b), vjp)


def outer(a, b):
    return einsum2("i,j->ij", a, b)


def einsum2(spec: str, a, b):
    """Two-operand einsum with reverse rules obtained by swapping subscripts.

    Indices may not repeat within a single operand (no diagonal semantics);
    indices summed out of the output broadcast back in the reverse pass.
    """
    lhs, out_spec = spec.split("->")
    a_spec, b_spec = lhs.split(",")
    for s in (a_spec, b_spec, out_spec):
        assert len(set(s)) == len(s), f"repeated index within one operand: {spec}"

    tape = _tape_of(a, b)
    if tape is None:
        return np.einsum(spec, value_of(a), value_of(b))
    a, b = _lift(tape, a, b)
    av, bv = a.value, b.value
    out = np.einsum(spec, av, bv)

    def _back(g, other_spec, other_val, target_spec, target_shape):
        have = set(out_spec) | set(other_spec)
        reduced = "".join(i for i in target_spec if i in have)
        res = np.einsum(f"{out_spec},{other_spec}->{reduced}", g, other_val)
        missing = tuple(k for k, i in enumerate(target_spec) if i not in have)
        if missing:
            # an index summed out of the output broadcasts back uniformly
            res = np.broadcast_to(np.expand_dims(res, missing), target_shape)
        return res

    def vjp(g):
        ga = _back(g, b_spec, bv, a_spec, av.shape)
        gb = _back(g, a_spec, av, b_spec, bv.shape)
        return ga, gb

    return tape.record(out, (a, b), vjp)


def _phi_lower_half_diag(x: Array) -> Array:
    return np.tril(x) / (1.0 + np.eye(x.shape[-1]))


def cholesky(a):
    """Lower Cholesky factor as a differentiable primitive.

    The forward value is ``np.linalg.cholesky``; the caller is responsible
    for symmetrizing/jittering (see ``linalg.cholesky_psd`` for the robust
    entry point used across the package).
    """
    if not is_var(a):
        return np.linalg.cholesky(value_of(a))
    av = a.value
    L = np.linalg.cholesky(av)

    def vjp(g):
        P = _phi_lower_half_diag(L.T @ g)
        tmp = _sla.solve_triangular(L, P.T, lower=True, trans="T", check_finite=False)
        S = _sla.solve_triangular(L, tmp.T, lower=True, trans="T", check_finite=False)
        return ((S + S.T) / 2.0,)

    return a.tape.record(L, (a,), vjp)


def solve_triangular(t, b, lower: bool = True, trans: bool = False):
    """Solve T x = b (or T^T x = b when ``trans``) with T triangular."""
    tape = _tape_of(t, b)
    if tape is None:
        return _sla.solve_triangular(
            value_of(t), value_of(b), lower=lower, trans="T" if trans else "N",
            check_finite=False,
        )
    t, b = _lift(tape, t, b)
    tv, bv = t.value, b.value
    x = _sla.solve_triangular(tv, bv, lower=lower, trans="T" if trans else "N",
                              check_finite=False)
    mask = np.tril(np.ones_like(tv)) if lower else np.triu(np.ones_like(tv))

    def vjp(g):
        gb = _sla.solve_triangular(tv, g, lower=lower, trans="N" if trans else "T",
                                   check_finite=False)
        x2 = x if x.ndim == 2 else x[:, None]
        gb2 = gb if gb.ndim == 2 else gb[:, None]
        gt_full = -x2 @ gb2.T if trans else -gb2 @ x2.T
        return gt_full * mask, gb

    return tape.record(x, (t, b), vjp)


# ---------------------------------------------------------------------------
# convolution index maps (patch extraction and its transpose)


def _im2col_value(x: Array, kh: int, kw: int, stride: int) -> Array:
    b, c, h, w = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (B, C, OH, OW, KH, KW)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b, oh * ow, c * kh * kw)
    return np.ascontiguousarray(cols)


def _col2im_value(cols: Array, x_shape: tuple[int, ...], kh: int, kw: int, stride: int) -> Array:
    b, c, h, w = x_shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    g = cols.reshape(b, oh, ow, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    z = np.zeros(x_shape, dtype=np.float64)
    for ki in range(kh):
        for kj in range(kw):
            z[:, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride] += g[
                :, :, :, :, ki, kj
            ]
    return z


def im2col(x, kh: int, kw: int, stride: int):
    """(B, C, H, W) -> (B, OH*OW, C*KH*KW) patch matrix."""
    if not is_var(x):
        return _im2col_value(value_of(x), kh, kw, stride)
    xv = x.value
    out = _im2col_value(xv, kh, kw, stride)

    def vjp(g):
        return (_col2im_value(g, xv.shape, kh, kw, stride),)

    return x.tape.record(out, (x,), vjp)


def col2im(cols, x_shape: tuple[int, ...], kh: int, kw: int, stride: int):
    """Transpose of ``im2col``: scatter patches back onto the image grid."""
    if not is_var(cols):
        return _col2im_value(value_of(cols), x_shape, kh, kw, stride)
    cv = cols.value
    out = _col2im_value(cv, x_shape, kh, kw, stride)

    def vjp(g):
        return (_im2col_value(g, kh, kw, stride),)

    return cols.tape.record(out, (cols,), vjp)


# ---------------------------------------------------------------------------
# composites


def square(a):
    return multiply(a, a)


def vmax(a, axis=None, keepdims: bool = False) -> Array:
    """Plain value max (not differentiated); used for stabilization shifts."""
    return value_of(a).max(axis=axis, keepdims=keepdims)


def logsumexp(a, axis=None, keepdims: bool = False):
    shift = vmax(a, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    s = log(sum_(exp(subtract(a, shift)), axis=axis, keepdims=True))
    out = add(s, shift)
    target = np.sum(value_of(a), axis=axis, keepdims=keepdims).shape
    return out if value_of(out).shape == target else reshape(out, target)


def softmax(a, axis=-1):
    return exp(subtract(a, logsumexp(a, axis=axis, keepdims=True)))


def log_softmax(a, axis=-1):
    return subtract(a, logsumexp(a, axis=axis, keepdims=True))


def clip(a, lo: float, hi: float):
    return minimum(maximum(a, lo), hi)


def dot(a, b):
    return matmul(a, b)


def logdet_from_chol(l):
    return multiply(2.0, sum_(log(diagonal(l))))


def gaussian_log_density(x, mean, log_var, axis=None):
    """Diagonal-Gaussian log density, summed over ``axis``."""
    d = subtract(x, mean)
    q = divide(multiply(d, d), exp(log_var))
    core = add(add(log_var, q), float(np.log(2.0 * np.pi)))
    return multiply(-0.5, sum_(core, axis=axis))
