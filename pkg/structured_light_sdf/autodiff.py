"""Tape-based reverse-mode differentiation over numpy arrays.

Every operation accepts `Var`s, numpy arrays or Python scalars. When none of the
operands is a `Var` the plain numpy result is returned and nothing is recorded,
so the same model code serves inference and training.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

Operand = Union["Var", np.ndarray, float, int]
Rule = Callable[[np.ndarray], np.ndarray]


@dataclass
class Node:
    """One recorded operation: parents always precede the node on the tape"""
    op: str
    parents: Tuple[int, ...]
    value: np.ndarray
    rules: Tuple[Rule, ...]
    name: str = ""


class Var:
    """Handle to a node on a tape"""

    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self):
        node = self.tape.nodes[self.index]
        return f"Var(#{self.index} {node.op} shape={self.shape})"

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
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


class Gradients:
    """Result of a backward pass, indexable by leaf `Var`"""

    def __init__(self, tape: "Tape", grads: List[Optional[np.ndarray]]):
        self.tape = tape
        self._grads = grads

    def __getitem__(self, var: Var) -> np.ndarray:
        grad = self._grads[var.index]
        if grad is None:
            return np.zeros(var.shape)
        return grad


class Tape:
    """Append-only operation record; single writer"""

    def __init__(self):
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value, name: str = "") -> Var:
        """A differentiable input (parameter or position)"""
        return self._record("leaf", (), np.array(value, dtype=np.float64), (), name)

    def _record(self, op: str, parents: Sequence[Var], value: np.ndarray,
                rules: Sequence[Rule], name: str = "") -> Var:
        for parent in parents:
            if parent.tape is not self:
                raise ShapeError(f"{op}: operands live on different tapes")
        self.nodes.append(Node(op, tuple(p.index for p in parents), value, tuple(rules), name))
        return Var(self, len(self.nodes) - 1)

    def backward(self, loss: Var, seed: float = 1.0) -> Gradients:
        """Reverse accumulation from a scalar loss, in exact reverse recording order"""
        if loss.value.size != 1:
            raise DomainError(f"backward needs a scalar loss, got shape {loss.shape}")
        return self._backward(loss, np.full(loss.shape, float(seed)))

    def _backward(self, output: Var, seed: np.ndarray) -> Gradients:
        grads: List[Optional[np.ndarray]] = [None] * len(self.nodes)
        grads[output.index] = seed
        for i in range(output.index, -1, -1):
            grad = grads[i]
            node = self.nodes[i]
            if grad is None or not node.parents:
                continue
            for parent, rule in zip(node.parents, node.rules):
                contribution = rule(grad)
                grads[parent] = contribution if grads[parent] is None else grads[parent] + contribution
            grads[i] = None  # interior adjoints are not needed once propagated
        return Gradients(self, grads)

    def dump(self) -> str:
        """Plain-text op list for debugging"""
        lines = []
        for i, node in enumerate(self.nodes):
            parents = ",".join(str(p) for p in node.parents) or "-"
            label = f" {node.name}" if node.name else ""
            lines.append(f"{i:6d} {node.op:<10s} in=[{parents}] shape={node.value.shape}{label}")
        return "\n".join(lines)


def backward(tape: Tape, loss: Var) -> Gradients:
    return tape.backward(loss)


def grad_wrt_input(tape: Tape, f_output: Var, point_input: Var) -> np.ndarray:
    """Spatial gradient of per-point outputs with respect to their (leaf) positions.

    Outputs must depend only on their own point, so seeding every output with one
    yields all per-point gradients in a single reverse pass.
    """
    if tape.nodes[point_input.index].op != "leaf":
        raise DomainError("point_input must be a leaf variable")
    grads = tape._backward(f_output, np.ones(f_output.shape))
    return grads[point_input]


def _tape_of(*operands) -> Optional[Tape]:
    for operand in operands:
        if isinstance(operand, Var):
            return operand.tape
    return None


def _val(operand) -> np.ndarray:
    if isinstance(operand, Var):
        return operand.value
    return np.asarray(operand, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _unary(op: str, a: Operand, forward, derivative) -> Operand:
    """derivative(grad, a_value, out_value) -> d loss / d a"""
    av = _val(a)
    out = forward(av)
    if not isinstance(a, Var):
        return out
    return a.tape._record(op, (a,), out, (lambda g: derivative(g, av, out),))


def _binary(op: str, a: Operand, b: Operand, forward, grad_a, grad_b) -> Operand:
    av, bv = _val(a), _val(b)
    try:
        np.broadcast_shapes(av.shape, bv.shape)
    except ValueError as exc:
        raise ShapeError(f"{op}: incompatible shapes {av.shape} and {bv.shape}") from exc
    out = forward(av, bv)
    tape = _tape_of(a, b)
    if tape is None:
        return out
    parents, rules = [], []
    if isinstance(a, Var):
        parents.append(a)
        rules.append(lambda g: _unbroadcast(grad_a(g, av, bv, out), av.shape))
    if isinstance(b, Var):
        parents.append(b)
        rules.append(lambda g: _unbroadcast(grad_b(g, av, bv, out), bv.shape))
    return tape._record(op, parents, out, rules)


def add(a: Operand, b: Operand) -> Operand:
    return _binary("add", a, b, np.add, lambda g, *_: g, lambda g, *_: g)


def sub(a: Operand, b: Operand) -> Operand:
    return _binary("sub", a, b, np.subtract, lambda g, *_: g, lambda g, *_: -g)


def mul(a: Operand, b: Operand) -> Operand:
    return _binary("mul", a, b, np.multiply,
                   lambda g, av, bv, out: g * bv, lambda g, av, bv, out: g * av)


def div(a: Operand, b: Operand) -> Operand:
    return mul(a, reciprocal(b))


def neg(a: Operand) -> Operand:
    return _unary("neg", a, np.negative, lambda g, av, out: -g)


def matmul(a: Operand, b: Operand) -> Operand:
    """Matrix product with numpy batch broadcasting; both operands at least 2-D"""
    av, bv = _val(a), _val(b)
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} and {bv.shape}")
    out = av @ bv
    tape = _tape_of(a, b)
    if tape is None:
        return out
    parents, rules = [], []
    if isinstance(a, Var):
        parents.append(a)
        rules.append(lambda g: _unbroadcast(g @ np.swapaxes(bv, -1, -2), av.shape))
    if isinstance(b, Var):
        parents.append(b)
        rules.append(lambda g: _unbroadcast(np.swapaxes(av, -1, -2) @ g, bv.shape))
    return tape._record("matmul", parents, out, rules)


def _expand(grad: np.ndarray, shape, axis, keepdims) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        for a in sorted(axes):
            grad = np.expand_dims(grad, a)
    return np.broadcast_to(grad, shape)


def sum_(a: Operand, axis=None, keepdims: bool = False) -> Operand:
    return _unary("sum", a, lambda v: np.sum(v, axis=axis, keepdims=keepdims),
                  lambda g, av, out: _expand(g, av.shape, axis, keepdims).copy())


def mean(a: Operand, axis=None, keepdims: bool = False) -> Operand:
    av = _val(a)
    count = av.size if axis is None else int(np.prod([av.shape[x] for x in np.atleast_1d(axis)]))
    return mul(sum_(a, axis, keepdims), 1.0 / count)


def abs_(a: Operand) -> Operand:
    return _unary("abs", a, np.abs, lambda g, av, out: g * np.sign(av))


def exp(a: Operand) -> Operand:
    return _unary("exp", a, np.exp, lambda g, av, out: g * out)


def log(a: Operand) -> Operand:
    return _unary("log", a, np.log, lambda g, av, out: g / av)


def sin(a: Operand) -> Operand:
    return _unary("sin", a, np.sin, lambda g, av, out: g * np.cos(av))


def cos(a: Operand) -> Operand:
    return _unary("cos", a, np.cos, lambda g, av, out: -g * np.sin(av))


def sigmoid(a: Operand) -> Operand:
    return _unary("sigmoid", a, expit, lambda g, av, out: g * out * (1.0 - out))


def softplus(a: Operand, beta: float = 1.0) -> Operand:
    """log(1 + exp(beta x)) / beta"""
    return _unary("softplus", a, lambda v: np.logaddexp(0.0, beta * v) / beta,
                  lambda g, av, out: g * expit(beta * av))


def minimum(a: Operand, c) -> Operand:
    """Elementwise min with a constant"""
    c = np.asarray(c, dtype=np.float64)
    return _unary("min", a, lambda v: np.minimum(v, c), lambda g, av, out: g * (av <= c))


def maximum(a: Operand, c) -> Operand:
    """Elementwise max with a constant"""
    c = np.asarray(c, dtype=np.float64)
    return _unary("max", a, lambda v: np.maximum(v, c), lambda g, av, out: g * (av >= c))


def where(mask, a: Operand, b: Operand) -> Operand:
    """Select a where mask is true, else b; mask is a constant"""
    mask = np.asarray(mask, dtype=bool)
    return _binary("where", a, b, lambda av, bv: np.where(mask, av, bv),
                   lambda g, *_: np.where(mask, g, 0.0), lambda g, *_: np.where(mask, 0.0, g))


def reciprocal(a: Operand) -> Operand:
    return _unary("recip", a, lambda v: 1.0 / v, lambda g, av, out: -g * out * out)


def sqrt(a: Operand) -> Operand:
    return _unary("sqrt", a, np.sqrt, lambda g, av, out: g * 0.5 / out)


def square(a: Operand) -> Operand:
    return _unary("square", a, np.square, lambda g, av, out: g * 2.0 * av)


def reshape(a: Operand, shape) -> Operand:
    return _unary("reshape", a, lambda v: np.reshape(v, shape),
                  lambda g, av, out: np.reshape(g, av.shape))


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is Ellipsis or p is None for p in parts)


def getitem(a: Operand, index) -> Operand:
    def derivative(g, av, out):
        full = np.zeros(av.shape)
        if _is_basic_index(index):
            full[index] += g
        else:
            np.add.at(full, index, g)  # repeated fancy indices accumulate
        return full
    return _unary("getitem", a, lambda v: v[index], derivative)


def cumsum(a: Operand, axis: int = -1) -> Operand:
    return _unary("cumsum", a, lambda v: np.cumsum(v, axis=axis),
                  lambda g, av, out: np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis))


def concat(operands: Sequence[Operand], axis: int = -1) -> Operand:
    values = [_val(x) for x in operands]
    try:
        out = np.concatenate(values, axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from exc
    tape = _tape_of(*operands)
    if tape is None:
        return out
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])
    parents, rules = [], []
    for k, operand in enumerate(operands):
        if isinstance(operand, Var):
            lo, hi = int(bounds[k]), int(bounds[k + 1])
            parents.append(operand)
            rules.append(lambda g, lo=lo, hi=hi: np.take(g, np.arange(lo, hi), axis=axis))
    return tape._record("concat", parents, out, rules)


def value(operand: Operand) -> np.ndarray:
    """Forward value of a Var or the array itself"""
    return _val(operand)
