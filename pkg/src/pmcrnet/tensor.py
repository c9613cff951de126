"""Dense NCHW tensors and tape-based reverse-mode differentiation.

A :class:`Tensor` wraps a numpy array. Operations executed while a
:class:`Tape` is active (``with Tape() as tape:``) are recorded whenever at
least one input is tracked, i.e. it either ``requires_grad`` or was itself
produced on that tape. ``tape.backward(loss)`` walks the recorded nodes in
strict reverse order and accumulates gradients additively.

Single precision is the default. ``double_precision()`` switches newly
created tensors to float64 for finite-difference checks.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

_local = threading.local()

# test hook: when set, the conv2d input-gradient is deliberately wrong
_FAULTS: set[str] = set()


def default_dtype() -> np.dtype:
    return getattr(_local, "dtype", np.dtype(np.float32))


@contextmanager
def double_precision() -> Iterator[None]:
    """Create float64 tensors inside the block (for gradient checks)."""
    previous = default_dtype()
    _local.dtype = np.dtype(np.float64)
    try:
        yield
    finally:
        _local.dtype = previous


@contextmanager
def inject_fault(name: str) -> Iterator[None]:
    """Negative-control hook used by the self-test; ``"conv-backward"`` only."""
    _FAULTS.add(name)
    try:
        yield
    finally:
        _FAULTS.discard(name)


@contextmanager
def track_kinks() -> Iterator[list]:
    """Collect the piecewise-branch pattern (PReLU signs, warp cells) of ops run inside.

    Two evaluations with equal patterns lie on the same smooth piece, which is
    what a central difference needs to be meaningful.
    """
    log: list = []
    previous = getattr(_local, "kinks", None)
    _local.kinks = log
    try:
        yield log
    finally:
        _local.kinks = previous


def note_kinks(*arrays: np.ndarray) -> None:
    log = getattr(_local, "kinks", None)
    if log is not None:
        log.append(b"".join(np.ascontiguousarray(a).tobytes() for a in arrays))


def _tape_stack() -> list["Tape"]:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Numeric array with optional participation in a gradient tape."""

    __slots__ = ("data", "requires_grad", "grad", "_node", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.ascontiguousarray(data, dtype=dtype or default_dtype())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        # (recording node list, index); a reset tape gets a fresh list
        self._node: tuple[list, int] | None = None
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        t.data = array
        t.requires_grad = False
        t.grad = None
        t._node = None
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"expected a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data, requires_grad=self.requires_grad, name=self.name, dtype=dtype)

    def tracked_on(self, tape: "Tape") -> bool:
        return self.requires_grad or (self._node is not None and self._node[0] is tape.nodes)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, index):
        return index_basic(self, index)


@dataclass
class Node:
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    shape: tuple[int, ...]


class Gradients:
    """Gradient lookup keyed by tensor identity."""

    def __init__(self, leaves: dict[int, tuple[Tensor, np.ndarray]]):
        self._leaves = leaves

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        return self._leaves[id(tensor)][1]

    def get(self, tensor: Tensor, default=None):
        entry = self._leaves.get(id(tensor))
        return default if entry is None else entry[1]

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._leaves

    def __len__(self) -> int:
        return len(self._leaves)


class Tape:
    """Append-only record of differentiable operations."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        self.reset()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward) -> None:
        out._node = (self.nodes, len(self.nodes))
        self.nodes.append(Node(inputs, backward, out.shape))

    def reset(self) -> None:
        # nodes hold their inputs and outputs point back at the list; emptying it
        # breaks that cycle so saved activations are freed without waiting for gc
        old, self.nodes = self.nodes, []
        old.clear()

    def backward(self, loss: Tensor) -> Gradients:
        if loss.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._node is None or loss._node[0] is not self.nodes:
            raise ValueError("loss was not produced on this tape (or the tape was already consumed)")
        last = loss._node[1]
        grads: list[np.ndarray | None] = [None] * (last + 1)
        grads[last] = np.ones(loss.shape, dtype=loss.dtype)
        leaves: dict[int, tuple[Tensor, np.ndarray]] = {}
        for i in range(last, -1, -1):
            g = grads[i]
            if g is None:
                continue
            grads[i] = None
            node = self.nodes[i]
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None:
                    continue
                if inp._node is not None and inp._node[0] is self.nodes:
                    j = inp._node[1]
                    grads[j] = gi if grads[j] is None else grads[j] + gi
                elif inp.requires_grad:
                    prev = leaves.get(id(inp))
                    leaves[id(inp)] = (inp, gi if prev is None else prev[1] + gi)
        for tensor, g in leaves.values():
            tensor.grad = g
        self.reset()
        return Gradients(leaves)


def backward(loss: Tensor) -> Gradients:
    """Backpropagate from ``loss`` through the active tape."""
    tape = active_tape()
    if tape is None:
        raise ValueError("backward called outside an active tape")
    return tape.backward(loss)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else default_dtype()
    return Tensor._wrap(np.asarray(x, dtype=dtype))


def record_op(data: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    """Wrap ``data`` as an op output and record it if any input is tracked.

    ``backward`` maps the output gradient to one gradient (or None) per input.
    """
    out = Tensor._wrap(data)
    tape = active_tape()
    if tape is not None and any(t.tracked_on(tape) for t in inputs):
        tape.record(out, tuple(inputs), backward)
    return out


# ---------------------------------------------------------------------------
# elementwise


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (undo numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _binary_operands(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, a)
    b = as_tensor(b)
    return as_tensor(a, b), b


def _check_broadcast(a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    _check_broadcast(a, b)
    sa, sb = a.shape, b.shape
    return record_op(a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    _check_broadcast(a, b)
    sa, sb = a.shape, b.shape
    return record_op(a.data - b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    _check_broadcast(a, b)
    ad, bd = a.data, b.data
    return record_op(
        ad * bd, (a, b), lambda g: (unbroadcast(g * bd, ad.shape), unbroadcast(g * ad, bd.shape))
    )


def div(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    _check_broadcast(a, b)
    ad, bd = a.data, b.data
    out = ad / bd

    def grad(g):
        ga = g / bd
        return unbroadcast(ga, ad.shape), unbroadcast(-ga * out, bd.shape)

    return record_op(out, (a, b), grad)


def square(x: Tensor) -> Tensor:
    xd = x.data
    return record_op(xd * xd, (x,), lambda g: (2 * g * xd,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)
    return record_op(out, (x,), lambda g: (g / (2 * out),))


def power(x: Tensor, exponent: float) -> Tensor:
    """Elementwise ``x ** exponent`` for a constant exponent (x > 0 unless integer)."""
    if exponent == 0.5:
        return sqrt(x)
    xd = x.data
    out = np.power(xd, exponent)
    return record_op(out, (x,), lambda g: (g * exponent * np.power(xd, exponent - 1),))


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    out = out.astype(x.dtype, copy=False)
    return record_op(out, (x,), lambda g: (g * out * (1 - out),))


def blend(m: Tensor, a: Tensor, b: Tensor) -> Tensor:
    """``m * a + (1 - m) * b`` with ``m`` broadcast over channels.

    Evaluated as ``a + (1-m)(b-a)`` where m >= 0.5 and ``b + m(a-b)``
    elsewhere, so m == 1, m == 0 and a == b all reproduce an input exactly.
    """
    _check_broadcast(m, a)
    if a.shape != b.shape:
        raise ValueError(f"blend operands differ in shape: {a.shape} vs {b.shape}")
    md, ad, bd = m.data, a.data, b.data
    diff = ad - bd
    out = np.where(md >= 0.5, ad - (1 - md) * diff, bd + md * diff)

    def grad(g):
        return unbroadcast(g * diff, md.shape), g * md, g * (1 - md)

    return record_op(out.astype(a.dtype, copy=False), (m, a, b), grad)


# ---------------------------------------------------------------------------
# reductions and structural ops


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Sum with float64 accumulation (exact for moderate counts of equal terms)."""
    shape = x.shape
    out = np.sum(x.data, axis=axis, keepdims=keepdims, dtype=np.float64)

    def grad(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).astype(x.dtype),)

    return record_op(np.asarray(out, dtype=x.dtype), (x,), grad)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    shape = x.shape
    out = np.sum(x.data, axis=axis, keepdims=keepdims, dtype=np.float64) / count

    def grad(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape).astype(x.dtype),)

    return record_op(np.asarray(out, dtype=x.dtype), (x,), grad)


def concat(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not xs:
        raise ValueError("concat needs at least one tensor")
    ref = xs[0].shape
    for t in xs[1:]:
        if t.ndim != len(ref) or any(
            s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != axis % len(ref)
        ):
            raise ValueError(f"cannot concat shapes {ref} and {t.shape} along axis {axis}")
    sizes = [t.shape[axis] for t in xs]
    bounds = np.cumsum([0] + sizes)

    def grad(g):
        return tuple(np.take(g, range(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return record_op(np.concatenate([t.data for t in xs], axis=axis), tuple(xs), grad)


def split(x: Tensor, sizes: Sequence[int], axis: int = 1) -> list[Tensor]:
    if np.sum(sizes) != x.shape[axis]:
        raise ValueError(f"split sizes {list(sizes)} do not cover axis of length {x.shape[axis]}")
    out, start = [], 0
    for size in sizes:
        index = [slice(None)] * x.ndim
        index[axis] = slice(start, start + size)
        out.append(index_basic(x, tuple(index)))
        start += size
    return out


def index_basic(x: Tensor, index) -> Tensor:
    """Basic (slice/int) indexing; gradient scatters into zeros."""
    shape, dtype = x.shape, x.dtype

    def grad(g):
        full = np.zeros(shape, dtype=dtype)
        full[index] = g
        return (full,)

    return record_op(np.ascontiguousarray(x.data[index]), (x,), grad)


def gather_spatial(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """``out[..., i, j] = x[..., rows[i], cols[j]]`` (rows/cols may repeat)."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    n, c, h, w = x.shape

    def grad(g):
        gr = np.zeros((n, c, h, g.shape[3]), dtype=g.dtype)
        np.add.at(gr, (slice(None), slice(None), rows), g)
        gx = np.zeros((n, c, h, w), dtype=g.dtype)
        np.add.at(gx.transpose(3, 0, 1, 2), cols, gr.transpose(3, 0, 1, 2))
        return (gx,)

    return record_op(x.data[:, :, rows][:, :, :, cols], (x,), grad)


def channel_shuffle(x: Tensor, groups: int) -> Tensor:
    """Interleave channel groups: input channel i goes to (i mod c/g)*g + i // (c/g)."""
    _require_nchw(x, "channel_shuffle")
    n, c, h, w = x.shape
    if groups < 1 or c % groups:
        raise ValueError(f"channel_shuffle: {c} channels not divisible by groups={groups}")
    per = c // groups
    out = x.data.reshape(n, groups, per, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w)

    def grad(g):
        return (g.reshape(n, per, groups, h, w).transpose(0, 2, 1, 3, 4).reshape(n, c, h, w),)

    return record_op(out, (x,), grad)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    _require_nchw(x, "prelu")
    c = x.shape[1]
    if slope.shape != (c,):
        raise ValueError(f"prelu: slope shape {slope.shape} does not match {c} channels")
    xd = x.data
    a = slope.data.reshape(1, c, 1, 1)
    positive = xd >= 0
    note_kinks(positive)
    out = np.where(positive, xd, a * xd)

    def grad(g):
        gx = np.where(positive, g, g * a)
        ga = np.where(positive, 0, g * xd).sum(axis=(0, 2, 3))
        return gx, ga.astype(slope.dtype, copy=False)

    return record_op(out, (x, slope), grad)


def _require_nchw(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise ValueError(f"{op}: expected an NCHW tensor, got shape {x.shape}")


# ---------------------------------------------------------------------------
# convolution kernels (numpy level)


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a (transposed) convolution. Kernel layout is (out, in/groups, kh, kw)
    for conv2d and (in, out/groups, kh, kw) for conv_transpose2d."""

    stride: int = 1
    padding: int = 0
    groups: int = 1

    def __post_init__(self):
        if self.stride < 1 or self.padding < 0 or self.groups < 1:
            raise ValueError(f"invalid conv geometry {self}")


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """(n, c, H, W) padded input -> (n, c, kh, kw, oh, ow) patch buffer."""
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * (oh - 1) + 1 : stride, j : j + stride * (ow - 1) + 1 : stride]
    return cols


def _col2im(cols: np.ndarray, shape, kh, kw, stride, padding, oh, ow) -> np.ndarray:
    n, c, h, w = shape
    cols = cols.reshape(n, c, kh, kw, oh, ow)
    xp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * (oh - 1) + 1 : stride, j : j + stride * (ow - 1) + 1 : stride] += cols[
                :, :, i, j
            ]
    if padding:
        xp = xp[:, :, padding : padding + h, padding : padding + w]
    return np.ascontiguousarray(xp)


def conv_forward(x: np.ndarray, weight: np.ndarray, stride: int, padding: int, groups: int):
    """Grouped cross-correlation; returns output and the (n, g, K, P) patch buffer."""
    n, c, h, w = x.shape
    oc, cg, kh, kw = weight.shape
    og = oc // groups
    oh = conv_output_size(h, kh, stride, padding)
    ow = conv_output_size(w, kw, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    cols = _im2col(xp, kh, kw, stride, oh, ow).reshape(n, groups, cg * kh * kw, oh * ow)
    wmat = weight.reshape(groups, og, cg * kh * kw)
    out = np.empty((n, groups, og, oh * ow), dtype=np.result_type(x, weight))
    for b in range(n):
        for g in range(groups):
            np.matmul(wmat[g], cols[b, g], out=out[b, g])
    return out.reshape(n, oc, oh, ow), cols


def conv_backward_input(gy: np.ndarray, weight: np.ndarray, x_shape, stride, padding, groups):
    n, oc, oh, ow = gy.shape
    _, cg, kh, kw = weight.shape
    og = oc // groups
    wmat = weight.reshape(groups, og, cg * kh * kw)
    gmat = gy.reshape(n, groups, og, oh * ow)
    gcols = np.empty((n, groups, cg * kh * kw, oh * ow), dtype=np.result_type(gy, weight))
    for b in range(n):
        for g in range(groups):
            np.matmul(wmat[g].T, gmat[b, g], out=gcols[b, g])
    return _col2im(gcols, x_shape, kh, kw, stride, padding, oh, ow)


def conv_backward_weight(cols: np.ndarray, gy: np.ndarray, w_shape, groups):
    n, oc, oh, ow = gy.shape
    og = oc // groups
    gmat = gy.reshape(n, groups, og, oh * ow)
    gw = np.zeros((groups, og, cols.shape[2]), dtype=np.result_type(cols, gy))
    for b in range(n):
        for g in range(groups):
            gw[g] += gmat[b, g] @ cols[b, g].T
    return gw.reshape(w_shape)


def _check_conv(x: Tensor, weight: Tensor, in_channels: int, groups: int, op: str) -> None:
    _require_nchw(x, op)
    if weight.ndim != 4:
        raise ValueError(f"{op}: kernel must be rank 4, got {weight.shape}")
    if x.shape[1] != in_channels:
        raise ValueError(f"{op}: input has {x.shape[1]} channels, kernel expects {in_channels}")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0,
           groups: int = 1) -> Tensor:
    """2-D cross-correlation with zero padding and optional channel groups."""
    ConvSpec(stride, padding, groups)
    oc, cg, kh, kw = weight.shape
    _check_conv(x, weight, cg * groups, groups, "conv2d")
    if oc % groups:
        raise ValueError(f"conv2d: {oc} output channels not divisible by groups={groups}")
    n, c, h, w = x.shape
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ValueError(f"conv2d: input {h}x{w} too small for kernel {kh}x{kw} with padding {padding}")
    if bias is not None and bias.shape != (oc,):
        raise ValueError(f"conv2d: bias shape {bias.shape} != ({oc},)")
    out, cols = conv_forward(x.data, weight.data, stride, padding, groups)
    if bias is not None:
        out += bias.data.reshape(1, oc, 1, 1)
    wd, x_shape = weight.data, x.shape

    def grad(g):
        gx = conv_backward_input(g, wd, x_shape, stride, padding, groups)
        if "conv-backward" in _FAULTS:
            gx = gx * 1.01
        gw = conv_backward_weight(cols, g, wd.shape, groups)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record_op(out, inputs, grad)


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 2,
                     padding: int = 1, groups: int = 1) -> Tensor:
    """Adjoint of conv2d with the same kernel; output size (h-1)*stride - 2*padding + k."""
    ConvSpec(stride, padding, groups)
    ic, og, kh, kw = weight.shape
    _check_conv(x, weight, ic, groups, "conv_transpose2d")
    if ic % groups:
        raise ValueError(f"conv_transpose2d: {ic} input channels not divisible by groups={groups}")
    n, _, h, w = x.shape
    oc = og * groups
    oh = (h - 1) * stride - 2 * padding + kh
    ow = (w - 1) * stride - 2 * padding + kw
    if oh < 1 or ow < 1:
        raise ValueError(f"conv_transpose2d: input {h}x{w} too small")
    if bias is not None and bias.shape != (oc,):
        raise ValueError(f"conv_transpose2d: bias shape {bias.shape} != ({oc},)")
    wd = weight.data
    out = conv_backward_input(x.data, wd, (n, oc, oh, ow), stride, padding, groups)
    if bias is not None:
        out = out + bias.data.reshape(1, oc, 1, 1)
    xd = x.data

    def grad(g):
        gx, gcols = conv_forward(g, wd, stride, padding, groups)
        gw = conv_backward_weight(gcols, xd, wd.shape, groups)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record_op(np.ascontiguousarray(out), inputs, grad)
