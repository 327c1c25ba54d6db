"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Graph` is an append-only tape of ops; insertion order is a
topological order by construction.  Backward rules are themselves built
from the same primitive ops, so the tensors returned by :func:`grad`
are ordinary graph nodes and can be differentiated again.  That second
pass is what the Lipschitz gradient penalty needs: it differentiates the
norm of an input gradient with respect to network parameters.

Broadcasting is limited to scalar-with-tensor; anything richer (bias
rows, per-row norms) is expressed through matmul against constant ones
matrices, which keeps every gradient shape trivially correct.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ParameterError, ShapeError


class Graph:
    """Append-only op tape; node index doubles as topological order."""

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []

    def variable(self, values, name: str | None = None) -> "Tensor":
        """Register a differentiable leaf holding ``values``."""
        return Tensor(values, graph=self, op="leaf", name=name)

    def _record(self, tensor: "Tensor") -> int:
        self.nodes.append(tensor)
        return len(self.nodes) - 1


class Tensor:
    """A shaped float64 array, optionally bound to a node of a Graph."""

    __slots__ = ("data", "graph", "node", "name", "_inputs", "_op", "_vjp")

    def __init__(
        self,
        values,
        graph: Graph | None = None,
        inputs: tuple["Tensor", ...] = (),
        op: str = "const",
        vjp: Callable | None = None,
        name: str | None = None,
    ) -> None:
        self.data = np.asarray(values, dtype=np.float64)
        self.graph = graph
        self._inputs = inputs
        self._op = op
        self._vjp = vjp
        self.name = name
        self.node = graph._record(self) if graph is not None else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ParameterError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A constant view of this tensor, outside any graph."""
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = self.name or self._op
        return f"Tensor({tag}, shape={self.shape})"

    # Operator sugar; all routed through the module-level ops.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _merge_graph(inputs: Sequence[Tensor]) -> Graph | None:
    graph = None
    for t in inputs:
        if t.graph is None:
            continue
        if graph is None:
            graph = t.graph
        elif graph is not t.graph:
            raise ParameterError("op mixes tensors from two different graphs")
    return graph


def _make(op: str, values: np.ndarray, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    return Tensor(values, graph=_merge_graph(inputs), inputs=inputs, op=op, vjp=vjp)


def _check_elementwise(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(
            f"{op} needs equal shapes or a scalar, got {a.shape} and {b.shape}"
        )


def _reduce_like(g: Tensor, ref: Tensor) -> Tensor:
    """Reduce an output-shaped gradient to the shape of a scalar operand."""
    if g.shape == ref.shape:
        return g
    return reshape(tsum(g), ref.shape)


# ---------------------------------------------------------------------------
# Primitive ops.  Each backward rule emits ordinary graph ops, so gradients
# are differentiable in turn.


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise(a, b, "add")

    def vjp(g: Tensor):
        ga = _reduce_like(g, a) if a.graph is not None else None
        gb = _reduce_like(g, b) if b.graph is not None else None
        return ga, gb

    return _make("add", a.data + b.data, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise(a, b, "sub")

    def vjp(g: Tensor):
        ga = _reduce_like(g, a) if a.graph is not None else None
        gb = _reduce_like(neg(g), b) if b.graph is not None else None
        return ga, gb

    return _make("sub", a.data - b.data, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise(a, b, "mul")

    def vjp(g: Tensor):
        ga = _reduce_like(mul(g, b), a) if a.graph is not None else None
        gb = _reduce_like(mul(g, a), b) if b.graph is not None else None
        return ga, gb

    return _make("mul", a.data * b.data, (a, b), vjp)


def neg(a) -> Tensor:
    return mul(a, -1.0)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul of incompatible shapes {a.shape} and {b.shape}")

    def vjp(g: Tensor):
        ga = matmul(g, transpose(b)) if a.graph is not None else None
        gb = matmul(transpose(a), g) if b.graph is not None else None
        return ga, gb

    return _make("matmul", a.data @ b.data, (a, b), vjp)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got shape {a.shape}")

    def vjp(g: Tensor):
        return (transpose(g) if a.graph is not None else None,)

    return _make("transpose", a.data.T.copy(), (a,), vjp)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    if math.prod(shape) != a.size:
        raise ShapeError(f"cannot reshape {a.shape} to {shape}")

    def vjp(g: Tensor):
        return (reshape(g, a.shape) if a.graph is not None else None,)

    return _make("reshape", a.data.reshape(shape), (a,), vjp)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = Tensor((a.data > 0).astype(np.float64))

    def vjp(g: Tensor):
        return (mul(g, mask) if a.graph is not None else None,)

    return _make("relu", np.maximum(a.data, 0.0), (a,), vjp)


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    factor = Tensor(np.where(a.data > 0, 1.0, slope))

    def vjp(g: Tensor):
        return (mul(g, factor) if a.graph is not None else None,)

    return _make("leaky_relu", a.data * factor.data, (a,), vjp)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = _make("tanh", np.tanh(a.data), (a,), None)

    def vjp(g: Tensor):
        if a.graph is None:
            return (None,)
        return (mul(g, sub(1.0, square(out))),)

    out._vjp = vjp
    return out


def square(a) -> Tensor:
    a = as_tensor(a)

    def vjp(g: Tensor):
        return (mul(g, mul(2.0, a)) if a.graph is not None else None,)

    return _make("square", np.square(a.data), (a,), vjp)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if (a.data < 0).any():
        raise NumericError("sqrt of a negative value")
    out = _make("sqrt", np.sqrt(a.data), (a,), None)

    def vjp(g: Tensor):
        if a.graph is None:
            return (None,)
        return (mul(g, mul(0.5, reciprocal(out))),)

    out._vjp = vjp
    return out


def reciprocal(a) -> Tensor:
    a = as_tensor(a)
    values = 1.0 / a.data
    if not np.isfinite(values).all():
        raise NumericError("reciprocal of zero")
    out = _make("reciprocal", values, (a,), None)

    def vjp(g: Tensor):
        if a.graph is None:
            return (None,)
        return (neg(mul(g, square(out))),)

    out._vjp = vjp
    return out


def tsum(a) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    a = as_tensor(a)
    ones = Tensor(np.ones(a.shape))

    def vjp(g: Tensor):
        return (mul(g, ones) if a.graph is not None else None,)

    return _make("sum", np.asarray(a.data.sum()), (a,), vjp)


# `sum` is the op's public name; `tsum` exists so the module can keep using it
# internally without shadowing surprises.
sum = tsum  # noqa: A001


def mean(a) -> Tensor:
    a = as_tensor(a)
    return mul(tsum(a), 1.0 / a.size)


def l2_norm(a, axis: int | None = None) -> Tensor:
    """Euclidean norm, optionally per row (axis=1) or column (axis=0) of a
    2-D tensor.  A 1e-12 floor inside the square root keeps the op
    differentiable at zero; with axis, the result keeps a trailing
    singleton dim, e.g. (B, D) -> (B, 1) for axis=1.
    """
    a = as_tensor(a)
    sq = square(a)
    if axis is None:
        total = tsum(sq)
    else:
        if a.data.ndim != 2:
            raise ShapeError(f"l2_norm with axis needs a 2-D tensor, got {a.shape}")
        if axis not in (0, 1):
            raise ParameterError(f"axis must be 0 or 1, got {axis}")
        if axis == 0:
            sq = transpose(sq)
        total = matmul(sq, Tensor(np.ones((sq.shape[1], 1))))
    return sqrt(add(total, 1e-12))


def affine(x, w, b) -> Tensor:
    """x @ w + b with the bias row broadcast over the rows of x."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if b.data.ndim == 1:
        b = reshape(b, (1, b.size))
    xw = matmul(x, w)
    rows = Tensor(np.ones((xw.shape[0], 1)))
    return add(xw, matmul(rows, b))


# ---------------------------------------------------------------------------
# Differentiation.


def grad(output: Tensor, wrt: Sequence[Tensor], create_graph: bool = False) -> list[Tensor]:
    """Gradients of a scalar ``output`` with respect to each tensor in ``wrt``.

    With ``create_graph`` the results stay attached to the graph, so a
    further :func:`grad` through them computes second-order derivatives.
    A ``wrt`` tensor that never fed into ``output``'s graph yields a zero
    tensor and a warning.
    """
    if output.size != 1:
        raise ParameterError(f"grad needs a scalar output, got shape {output.shape}")
    if output.graph is None:
        # A constant output (e.g. a gradient that collapsed through
        # piecewise-constant activation masks) depends on nothing.
        warnings.warn("grad of a constant output; returning zeros", stacklevel=2)
        return [Tensor(np.zeros(w.shape)) for w in wrt]
    graph = output.graph

    # The seed adjoint is registered as a graph leaf so every gradient
    # stays on the tape even where its value happens to be constant;
    # create_graph then composes unconditionally.
    adjoints: dict[int, Tensor] = {
        output.node: Tensor(np.ones(output.shape), graph=graph, op="seed")
    }
    for idx in range(output.node, -1, -1):
        t = graph.nodes[idx]
        g = adjoints.get(idx)
        if g is None or t._vjp is None:
            continue
        for inp, ig in zip(t._inputs, t._vjp(g)):
            if ig is None or inp.node is None:
                continue
            prev = adjoints.get(inp.node)
            adjoints[inp.node] = ig if prev is None else add(prev, ig)

    results = []
    for w in wrt:
        if w.graph is not graph:
            warnings.warn(
                f"grad target {w!r} is not part of the output's graph; "
                "returning zeros",
                stacklevel=2,
            )
            results.append(Tensor(np.zeros(w.shape)))
            continue
        g = adjoints.get(w.node)
        if g is None:
            results.append(Tensor(np.zeros(w.shape)))
        else:
            results.append(g if create_graph else g.detach())
    return results


def finite_diff_check(
    f: Callable[[Tensor], Tensor], x, eps: float = 1e-4
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` must map a tensor to a scalar tensor.  The error per coordinate is
    |analytic - central| / max(1, |analytic|); the maximum over coordinates
    is returned.
    """
    base = np.array(as_tensor(x).data, dtype=np.float64)

    g = Graph()
    xv = g.variable(base)
    y = f(xv)
    if y.size != 1:
        raise ParameterError(f"f must return a scalar, got shape {y.shape}")
    if not np.isfinite(y.data).all():
        raise NumericError("f returned a non-finite value")
    analytic = grad(y, [xv])[0].data

    worst = 0.0
    flat = base.reshape(-1)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = eps
        hi = f(Tensor((flat + bump).reshape(base.shape))).item()
        lo = f(Tensor((flat - bump).reshape(base.shape))).item()
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise NumericError("f returned a non-finite value during differencing")
        fd = (hi - lo) / (2.0 * eps)
        a = analytic.reshape(-1)[i]
        worst = max(worst, abs(a - fd) / max(1.0, abs(a)))
    return worst
