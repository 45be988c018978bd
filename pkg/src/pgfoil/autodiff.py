"""Reverse-mode automatic differentiation with differentiable gradients.

Every value lives on a :class:`Graph` as a :class:`Node`.  ``Graph.backward``
does not produce raw arrays: it appends the gradient computation to the same
graph, so a loss built from gradient nodes (the WGAN gradient penalty) can be
differentiated again.

Shapes are explicit.  The only implicit broadcast is a Python scalar times a
node; everything else must go through ``expand``, ``pad_last`` and friends.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

ARCCOS_EPS = 1e-12


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an op."""

    def __init__(self, op: str, *shapes: tuple[int, ...]):
        self.op = op
        self.shapes = shapes
        joined = " and ".join(str(s) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {joined}")


class GradientError(FloatingPointError):
    """Raised when a non-finite gradient appears during backward."""

    def __init__(self, op: str):
        self.op = op
        super().__init__(f"non-finite gradient produced while differentiating '{op}'")


def _frozen(value, copy: bool = False) -> np.ndarray:
    # op results are fresh arrays (or views of frozen ones); only leaves need a copy
    arr = np.array(value, dtype=np.float64) if copy else np.asarray(value, dtype=np.float64)
    arr.flags.writeable = False
    return arr


class Node:
    __slots__ = ("graph", "index", "op", "parents", "value", "requires_grad", "attrs")

    def __init__(self, graph, index, op, parents, value, requires_grad, attrs):
        self.graph = graph
        self.index = index
        self.op = op
        self.parents = parents
        self.value = value
        self.requires_grad = requires_grad
        self.attrs = attrs

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node#{self.index}({self.op}, shape={self.shape})"

    def __add__(self, other):
        return self.graph.add(self, other)

    def __sub__(self, other):
        return self.graph.sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return self.graph.mul(self, other)
        return self.graph.scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Node):
            return self.graph.div(self, other)
        return self.graph.scale(self, 1.0 / float(other))

    def __neg__(self):
        return self.graph.scale(self, -1.0)

    def __matmul__(self, other):
        return self.graph.matmul(self, other)


class Graph:
    """Append-only arena of nodes.  Single-writer; not thread-safe."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, op, parents, value, attrs=None, copy: bool = False) -> Node:
        for p in parents:
            if p.graph is not self:
                raise ValueError(f"{op}: operand belongs to a different graph")
        rg = any(p.requires_grad for p in parents)
        node = Node(self, len(self.nodes), op, tuple(parents), _frozen(value, copy), rg, attrs or {})
        self.nodes.append(node)
        return node

    # -- leaves -----------------------------------------------------------

    def constant(self, value) -> Node:
        return self._push("const", (), value, copy=True)

    def variable(self, value) -> Node:
        node = self._push("var", (), value, copy=True)
        node.requires_grad = True
        return node

    # -- elementwise ------------------------------------------------------

    def _same(self, op, a: Node, b: Node):
        if a.shape != b.shape:
            raise ShapeError(op, a.shape, b.shape)

    def add(self, a: Node, b: Node) -> Node:
        self._same("add", a, b)
        return self._push("add", (a, b), a.value + b.value)

    def sub(self, a: Node, b: Node) -> Node:
        self._same("sub", a, b)
        return self._push("sub", (a, b), a.value - b.value)

    def mul(self, a: Node, b: Node) -> Node:
        self._same("mul", a, b)
        return self._push("mul", (a, b), a.value * b.value)

    def div(self, a: Node, b: Node) -> Node:
        self._same("div", a, b)
        return self._push("div", (a, b), a.value / b.value)

    def scale(self, a: Node, c: float) -> Node:
        return self._push("scale", (a,), a.value * c, {"c": c})

    def relu(self, a: Node) -> Node:
        return self._push("relu", (a,), np.maximum(a.value, 0.0))

    def leaky_relu(self, a: Node, slope: float = 0.2) -> Node:
        v = a.value
        return self._push("leaky_relu", (a,), np.where(v > 0, v, slope * v), {"slope": slope})

    def tanh(self, a: Node) -> Node:
        return self._push("tanh", (a,), np.tanh(a.value))

    def square(self, a: Node) -> Node:
        return self._push("square", (a,), a.value * a.value)

    def sqrt_eps(self, a: Node, eps: float = 0.0) -> Node:
        if eps < 0:
            raise ValueError("sqrt_eps: eps must be >= 0")
        return self._push("sqrt_eps", (a,), np.sqrt(a.value + eps), {"eps": eps})

    def clip(self, a: Node, lo: float, hi: float) -> Node:
        return self._push("clip", (a,), np.clip(a.value, lo, hi), {"lo": lo, "hi": hi})

    def arccos(self, a: Node) -> Node:
        if np.any(np.abs(a.value) > 1.0):
            raise ValueError("arccos: argument outside [-1, 1]; clip first")
        return self._push("arccos", (a,), np.arccos(a.value))

    # -- linear algebra and structure ------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError("matmul", a.shape, b.shape)
        return self._push("matmul", (a, b), a.value @ b.value)

    def transpose(self, a: Node) -> Node:
        if a.value.ndim != 2:
            raise ShapeError("transpose", a.shape)
        return self._push("transpose", (a,), a.value.T)

    def concat(self, a: Node, b: Node) -> Node:
        """Concatenate along the last dimension."""
        if a.value.ndim != b.value.ndim or a.shape[:-1] != b.shape[:-1]:
            raise ShapeError("concat", a.shape, b.shape)
        return self._push("concat", (a, b), np.concatenate([a.value, b.value], axis=-1))

    def slice_last(self, a: Node, start: int, stop: int) -> Node:
        n = a.shape[-1]
        if not 0 <= start < stop <= n:
            raise ShapeError("slice_last", a.shape, (start, stop))
        return self._push("slice_last", (a,), a.value[..., start:stop], {"start": start, "stop": stop})

    def pad_last(self, a: Node, before: int, total: int) -> Node:
        """Zero-pad the last dimension so ``a`` occupies ``[before, before+n)``."""
        n = a.shape[-1]
        if before < 0 or before + n > total:
            raise ShapeError("pad_last", a.shape, (before, total))
        out = np.zeros(a.shape[:-1] + (total,))
        out[..., before:before + n] = a.value
        return self._push("pad_last", (a,), out, {"before": before, "total": total})

    def take_last(self, a: Node, idx) -> Node:
        """Gather distinct positions ``idx`` along the last dimension."""
        idx = np.asarray(idx, dtype=np.int64)
        if len(np.unique(idx)) != len(idx) or idx.min(initial=0) < 0 or idx.max(initial=0) >= a.shape[-1]:
            raise ShapeError("take_last", a.shape, idx.shape)
        return self._push("take_last", (a,), a.value[..., idx], {"idx": idx, "n": a.shape[-1]})

    def put_last(self, a: Node, idx, n: int) -> Node:
        """Scatter ``a`` into zeros of last-dimension ``n`` at positions ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        if a.shape[-1] != len(idx):
            raise ShapeError("put_last", a.shape, idx.shape)
        out = np.zeros(a.shape[:-1] + (n,))
        out[..., idx] = a.value
        return self._push("put_last", (a,), out, {"idx": idx, "n": n})

    def roll_last(self, a: Node, shift: int) -> Node:
        return self._push("roll_last", (a,), np.roll(a.value, shift, axis=-1), {"shift": shift})

    def sum(self, a: Node, axis: int | None = None) -> Node:
        """Sum everything (scalar result) or the last axis (kept as size 1)."""
        if axis is None:
            return self._push("sum", (a,), np.sum(a.value), {"axis": None})
        if axis != -1:
            raise ValueError("sum: only axis=None or axis=-1 is supported")
        return self._push("sum", (a,), np.sum(a.value, axis=-1, keepdims=True), {"axis": -1})

    def expand(self, a: Node, shape: tuple[int, ...]) -> Node:
        """Broadcast a scalar, or a trailing size-1 axis, up to ``shape``."""
        shape = tuple(shape)
        if a.shape == ():
            kind = "all"
        elif a.shape[-1] == 1 and a.shape[:-1] == shape[:-1]:
            kind = "last"
        else:
            raise ShapeError("expand", a.shape, shape)
        return self._push("expand", (a,), np.broadcast_to(a.value, shape), {"kind": kind})

    # -- composites -------------------------------------------------------

    def mean(self, a: Node) -> Node:
        return self.scale(self.sum(a), 1.0 / a.value.size)

    def l2norm_eps(self, a: Node, eps: float = 1e-12) -> Node:
        """Euclidean norm over the last axis, ``sqrt(sum(a**2) + eps)``."""
        return self.sqrt_eps(self.sum(self.square(a), axis=-1), eps)

    def ones_like(self, a: Node) -> Node:
        return self.constant(np.ones(a.shape))

    # -- reverse mode -----------------------------------------------------

    def backward(self, output: Node, wrt: Sequence[Node]) -> list[Node]:
        """Gradient nodes of scalar ``output`` with respect to each of ``wrt``.

        The returned nodes live on this graph and may be differentiated again.
        Nodes in ``wrt`` that ``output`` does not depend on get a zero constant.
        """
        if output.value.size != 1:
            raise ValueError(f"backward: output must be scalar, got shape {output.shape}")
        targets = {n.index for n in wrt}
        # relevant = on a path from some wrt node to output
        ancestors: list[Node] = []
        seen = set()
        stack = [output]
        while stack:
            n = stack.pop()
            if n.index in seen or not n.requires_grad:
                continue
            seen.add(n.index)
            ancestors.append(n)
            stack.extend(n.parents)
        ancestors.sort(key=lambda n: n.index)
        relevant = set()
        for n in ancestors:
            if n.index in targets or any(p.index in relevant for p in n.parents):
                relevant.add(n.index)

        grads: dict[int, Node] = {}
        if output.index in relevant:
            grads[output.index] = self.constant(np.ones(output.shape))
        for n in reversed(ancestors):
            if n.index not in relevant or n.index not in grads or not n.parents:
                continue
            g = grads[n.index]
            rule = _VJP[n.op]
            for pos, parent in enumerate(n.parents):
                if parent.index not in relevant:
                    continue
                contrib = rule(self, g, n, pos)
                if not np.all(np.isfinite(contrib.value)):
                    raise GradientError(n.op)
                prev = grads.get(parent.index)
                grads[parent.index] = contrib if prev is None else self.add(prev, contrib)

        out = []
        for w in wrt:
            g = grads.get(w.index)
            out.append(g if g is not None else self.constant(np.zeros(w.shape)))
        return out


def _sum_back(graph: Graph, g: Node, node: Node, pos: int) -> Node:
    return graph.expand(g, node.parents[0].shape)


def _expand_back(graph: Graph, g: Node, node: Node, pos: int) -> Node:
    if node.attrs["kind"] == "all":
        return graph.sum(g)
    return graph.sum(g, axis=-1)


def _mask_back(mask_fn):
    def rule(graph: Graph, g: Node, node: Node, pos: int) -> Node:
        return graph.mul(g, graph.constant(mask_fn(node)))

    return rule


def _arccos_back(graph: Graph, g: Node, node: Node, pos: int) -> Node:
    a = node.parents[0]
    root = graph.sqrt_eps(graph.sub(graph.ones_like(a), graph.square(a)), ARCCOS_EPS)
    return -graph.div(g, root)


_VJP: dict[str, Callable[[Graph, Node, Node, int], Node]] = {
    "add": lambda G, g, n, pos: g,
    "sub": lambda G, g, n, pos: g if pos == 0 else -g,
    "mul": lambda G, g, n, pos: G.mul(g, n.parents[1 - pos]),
    "div": lambda G, g, n, pos: (
        G.div(g, n.parents[1]) if pos == 0 else -G.div(G.mul(g, n), n.parents[1])
    ),
    "scale": lambda G, g, n, pos: G.scale(g, n.attrs["c"]),
    "relu": _mask_back(lambda n: (n.parents[0].value > 0).astype(np.float64)),
    "leaky_relu": _mask_back(lambda n: np.where(n.parents[0].value > 0, 1.0, n.attrs["slope"])),
    "clip": _mask_back(
        lambda n: ((n.parents[0].value >= n.attrs["lo"]) & (n.parents[0].value <= n.attrs["hi"])).astype(
            np.float64
        )
    ),
    "tanh": lambda G, g, n, pos: G.mul(g, G.sub(G.ones_like(n), G.square(n))),
    "square": lambda G, g, n, pos: G.scale(G.mul(g, n.parents[0]), 2.0),
    "sqrt_eps": lambda G, g, n, pos: G.div(G.scale(g, 0.5), n),
    "arccos": _arccos_back,
    "matmul": lambda G, g, n, pos: (
        G.matmul(g, G.transpose(n.parents[1])) if pos == 0 else G.matmul(G.transpose(n.parents[0]), g)
    ),
    "transpose": lambda G, g, n, pos: G.transpose(g),
    "concat": lambda G, g, n, pos: (
        G.slice_last(g, 0, n.parents[0].shape[-1])
        if pos == 0
        else G.slice_last(g, n.parents[0].shape[-1], n.shape[-1])
    ),
    "slice_last": lambda G, g, n, pos: G.pad_last(g, n.attrs["start"], n.parents[0].shape[-1]),
    "pad_last": lambda G, g, n, pos: G.slice_last(
        g, n.attrs["before"], n.attrs["before"] + n.parents[0].shape[-1]
    ),
    "take_last": lambda G, g, n, pos: G.put_last(g, n.attrs["idx"], n.attrs["n"]),
    "put_last": lambda G, g, n, pos: G.take_last(g, n.attrs["idx"]),
    "roll_last": lambda G, g, n, pos: G.roll_last(g, -n.attrs["shift"]),
    "sum": _sum_back,
    "expand": _expand_back,
}


def grad_check(f: Callable[[Graph, Node], Node], point, order: int = 1, h: float = 1e-4) -> float:
    """Max relative error of autodiff against central finite differences.

    ``f(graph, x)`` must build a scalar node from the variable ``x``.  With
    ``order=1`` the gradient is checked against FD of ``f``; with ``order=2``
    the gradient of ``sum(grad f)`` (one row of Hessian information, reached
    by double backward) is checked against FD of the first-order gradient.
    """
    point = np.asarray(point, dtype=np.float64)

    def first(x):
        g = Graph()
        v = g.variable(x)
        return g, v, f(g, v)

    def scalar_at(x):
        if order == 1:
            return float(first(x)[2].value)
        g, v, out = first(x)
        (dv,) = g.backward(out, [v])
        return float(np.sum(dv.value))

    g, v, out = first(point)
    (dv,) = g.backward(out, [v])
    if order == 2:
        (auto,) = g.backward(g.sum(dv), [v])
        auto = auto.value
    elif order == 1:
        auto = dv.value
    else:
        raise ValueError("order must be 1 or 2")

    fd = np.zeros_like(point)
    for i in np.ndindex(point.shape):
        up = point.copy()
        dn = point.copy()
        up[i] += h
        dn[i] -= h
        fd[i] = (scalar_at(up) - scalar_at(dn)) / (2 * h)
    return float(np.max(np.abs(auto - fd) / (np.abs(fd) + 1e-8), initial=0.0))
