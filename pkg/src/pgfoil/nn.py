"""Generator/critic MLPs and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from pgfoil.autodiff import Graph, Node, ShapeError

SHAPE_DIM = 496
ACTIVATIONS = ("linear", "relu", "leaky_relu", "tanh")


@dataclass(frozen=True)
class MlpParams:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]
    slope: float = 0.2

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have equal length")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} does not match bias {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input dim {w.shape[0]} breaks the chain")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        """Parameters in a fixed order: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays) -> "MlpParams":
        arrays = list(arrays)
        return replace(self, weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))


@dataclass(frozen=True)
class LatentSpec:
    dim: int = 10
    distribution: str = "uniform"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("latent dim must be >= 1")
        if self.distribution not in ("uniform", "normal"):
            raise ValueError(f"unknown latent distribution {self.distribution!r}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.distribution == "uniform":
            return rng.uniform(-1.0, 1.0, size=(n, self.dim))
        return rng.standard_normal((n, self.dim))


def init_mlp(layer_dims, activation: str = "leaky_relu", seed: int = 0,
             output_activation: str = "linear", slope: float = 0.2) -> MlpParams:
    """Glorot-uniform weights, zero biases, deterministic under ``seed``."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("layer_dims needs at least an input and an output size")
    if any(d <= 0 for d in dims):
        raise ValueError(f"layer dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    acts = [activation] * (len(dims) - 2) + [output_activation]
    return MlpParams(tuple(weights), tuple(biases), tuple(acts), slope)


def bind(graph: Graph, params: MlpParams, trainable: bool = True) -> list[Node]:
    """Place parameters on ``graph`` (biases as 1 x n rows) in ``arrays()`` order."""
    leaf = graph.variable if trainable else graph.constant
    nodes = []
    for w, b in zip(params.weights, params.biases):
        nodes += [leaf(w), leaf(b[None, :])]
    return nodes


def mlp_apply(graph: Graph, params: MlpParams, bound: list[Node], x: Node) -> Node:
    if x.value.ndim != 2 or x.shape[1] != params.dims[0]:
        raise ShapeError("mlp input", x.shape, (None, params.dims[0]))
    ones = graph.constant(np.ones((x.shape[0], 1)))
    h = x
    for i, act in enumerate(params.activations):
        w, b = bound[2 * i], bound[2 * i + 1]
        h = graph.add(graph.matmul(h, w), graph.matmul(ones, b))
        if act == "relu":
            h = graph.relu(h)
        elif act == "leaky_relu":
            h = graph.leaky_relu(h, params.slope)
        elif act == "tanh":
            h = graph.tanh(h)
    return h


def _as_node(graph: Graph, x) -> Node:
    return x if isinstance(x, Node) else graph.constant(np.atleast_2d(np.asarray(x, dtype=np.float64)))


def _label_column(graph: Graph, label, batch: int) -> Node:
    node = _as_node(graph, label)
    if node.shape == (1, batch) and batch != 1:
        node = graph.constant(node.value.T)
    if node.shape != (batch, 1):
        raise ShapeError("label", node.shape, (batch, 1))
    return node


def generator_forward(params: MlpParams, z, label, graph: Graph | None = None,
                      bound: list[Node] | None = None) -> Node:
    """Shapes ``G(z|label)`` as a (batch, 496) node: all x first, then all y."""
    graph = graph or Graph()
    bound = bound if bound is not None else bind(graph, params, trainable=False)
    zn = _as_node(graph, z)
    if zn.shape[1] + 1 != params.dims[0]:
        raise ShapeError("generator latent", zn.shape, (None, params.dims[0] - 1))
    inp = graph.concat(zn, _label_column(graph, label, zn.shape[0]))
    return mlp_apply(graph, params, bound, inp)


def critic_forward(params: MlpParams, x, label, graph: Graph | None = None,
                   bound: list[Node] | None = None) -> Node:
    """Unbounded critic score ``D(x|label)`` as a (batch, 1) node."""
    graph = graph or (x.graph if isinstance(x, Node) else Graph())
    bound = bound if bound is not None else bind(graph, params, trainable=False)
    xn = _as_node(graph, x)
    if xn.shape[1] + 1 != params.dims[0]:
        raise ShapeError("critic input", xn.shape, (None, params.dims[0] - 1))
    inp = graph.concat(xn, _label_column(graph, label, xn.shape[0]))
    return mlp_apply(graph, params, bound, inp)


def generate(params: MlpParams, z, labels) -> np.ndarray:
    """Plain-array generator output, no gradient bookkeeping kept."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    return np.array(generator_forward(params, z, labels).value)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    alpha: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams, alpha=1e-4, beta1=0.0, beta2=0.9, eps=1e-8) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays],
                   0, alpha, beta1, beta2, eps)


def adam_step(params: MlpParams, grads, state: AdamState) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    arrays = params.arrays()
    grads = [np.asarray(g, dtype=np.float64).reshape(a.shape) for g, a in zip(grads, arrays)]
    if len(grads) != len(arrays):
        raise ValueError(f"expected {len(arrays)} gradients, got {len(grads)}")
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {i}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_p.append(p - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_p), replace(state, m=new_m, v=new_v, t=t)


@dataclass(frozen=True)
class Architecture:
    latent: LatentSpec = field(default_factory=LatentSpec)
    g_hidden: tuple[int, ...] = (128, 128, 128)
    d_hidden: tuple[int, ...] = (128, 128, 128)
    slope: float = 0.2

    def init_generator(self, seed: int) -> MlpParams:
        dims = [self.latent.dim + 1, *self.g_hidden, SHAPE_DIM]
        return init_mlp(dims, "leaky_relu", seed, slope=self.slope)

    def init_critic(self, seed: int) -> MlpParams:
        dims = [SHAPE_DIM + 1, *self.d_hidden, 1]
        return init_mlp(dims, "leaky_relu", seed, slope=self.slope)
