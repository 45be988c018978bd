"""Critic and generator objectives built on the autodiff graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pgfoil.airfoil import N_POINTS, ZERO_SEGMENT
from pgfoil.autodiff import Graph, Node
from pgfoil.nn import MlpParams, bind, critic_forward, generator_forward

NORM_EPS = 1e-20
NORM_EPS_GP = 1e-12


class LossError(FloatingPointError):
    pass


def _check(name: str, node: Node, **context) -> None:
    if not np.all(np.isfinite(node.value)):
        detail = ", ".join(f"{k}={v}" for k, v in context.items())
        raise LossError(f"{name} is not finite ({detail})")


def _row_picker(graph: Graph, batch: int, r: int) -> Node:
    e = np.zeros((1, batch))
    e[0, r] = 1.0
    return graph.constant(e)


def _turning_sum(graph: Graph, x: Node, y: Node) -> Node:
    """Sum of turning angles of closed polygons given as (rows, k) x and y nodes."""
    vx = graph.sub(graph.roll_last(x, -1), x)
    vy = graph.sub(graph.roll_last(y, -1), y)
    length = graph.sqrt_eps(graph.add(graph.square(vx), graph.square(vy)), NORM_EPS)
    dot = graph.add(graph.mul(vx, graph.roll_last(vx, -1)), graph.mul(vy, graph.roll_last(vy, -1)))
    cos = graph.div(dot, graph.mul(length, graph.roll_last(length, -1)))
    return graph.sum(graph.arccos(graph.clip(cos, -1.0, 1.0)), axis=-1)


def distortion_node(graph: Graph, shapes: Node, n_points: int = N_POINTS) -> Node:
    """Per-row distortion of flattened shapes, a (batch, 1) node.

    Zero-length segments (coincident consecutive points) are dropped before
    measuring angles, matching the array implementation in ``airfoil``.
    """
    x = graph.slice_last(shapes, 0, n_points)
    y = graph.slice_last(shapes, n_points, 2 * n_points)
    xv, yv = x.value, y.value
    seg = np.hypot(np.roll(xv, -1, axis=-1) - xv, np.roll(yv, -1, axis=-1) - yv)
    keep = seg > ZERO_SEGMENT
    if keep.all():
        return _turning_sum(graph, x, y)
    # rows with coincident points are measured one at a time on their kept vertices
    batch = shapes.shape[0]
    out = None
    for r in range(batch):
        pick = _row_picker(graph, batch, r)
        idx = np.flatnonzero(keep[r])
        xr = graph.take_last(graph.matmul(pick, x), idx)
        yr = graph.take_last(graph.matmul(pick, y), idx)
        phi_r = graph.matmul(graph.transpose(pick), _turning_sum(graph, xr, yr))
        out = phi_r if out is None else graph.add(out, phi_r)
    return out


@dataclass
class CriticLoss:
    loss: Node
    wasserstein: float
    penalty: float


def critic_loss(graph: Graph, critic: MlpParams, bound: list[Node], x_real, y_real, x_fake, y_fake,
                delta, lambda_gp: float = 10.0) -> CriticLoss:
    """mean(D(fake) - D(real)) + lambda * mean((|grad D(mix)| - 1)^2).

    ``mix = delta * real + (1 - delta) * fake`` per sample, with the label
    interpolated the same way.  The penalty gradient is taken on the same
    graph so the result stays differentiable with respect to ``bound``.
    """
    x_real = np.asarray(x_real, dtype=np.float64)
    x_fake = np.asarray(x_fake, dtype=np.float64)
    y_real = np.asarray(y_real, dtype=np.float64).reshape(-1, 1)
    y_fake = np.asarray(y_fake, dtype=np.float64).reshape(-1, 1)
    delta = np.asarray(delta, dtype=np.float64).reshape(-1, 1)
    if np.any(delta < 0) or np.any(delta > 1):
        raise ValueError("delta must lie in [0, 1]")
    d_real = critic_forward(critic, x_real, y_real, graph, bound)
    d_fake = critic_forward(critic, x_fake, y_fake, graph, bound)
    mix = graph.variable(delta * x_real + (1.0 - delta) * x_fake)
    y_mix = delta * y_real + (1.0 - delta) * y_fake
    d_mix = critic_forward(critic, mix, y_mix, graph, bound)
    (grad_mix,) = graph.backward(graph.sum(d_mix), [mix])
    norm = graph.l2norm_eps(grad_mix, NORM_EPS_GP)
    gap = graph.sub(norm, graph.ones_like(norm))
    penalty = graph.mean(graph.square(gap))
    wass = graph.mean(graph.sub(d_fake, d_real))
    loss = graph.add(wass, graph.scale(penalty, lambda_gp))
    _check("critic loss", loss, wasserstein=float(wass.value), penalty=float(penalty.value))
    return CriticLoss(loss, float(wass.value), float(penalty.value))


@dataclass
class GeneratorLoss:
    loss: Node
    adversarial: float
    batch_phi: float
    shapes: np.ndarray


def generator_loss(graph: Graph, generator: MlpParams, bound: list[Node], critic: MlpParams, z, labels,
                   lambda_phi: float = 0.0, shape_mean=None, shape_scale=None) -> GeneratorLoss:
    """-mean(D(G(z|c))) + lambda_phi * mean(distortion(G(z|c))).

    The critic scores the raw generator output; distortion is measured on
    physical coordinates ``output * shape_scale + shape_mean`` when given.
    ``GeneratorLoss.shapes`` holds the physical shapes.
    """
    if lambda_phi < 0:
        raise ValueError("lambda_phi must be >= 0")
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    shapes = generator_forward(generator, z, labels, graph, bound)
    score = critic_forward(critic, shapes, labels, graph, bind(graph, critic, trainable=False))
    adv = graph.scale(graph.mean(score), -1.0)
    physical = shapes
    if shape_mean is not None:
        physical = graph.add(graph.mul(shapes, graph.constant(np.broadcast_to(shape_scale, shapes.shape))),
                             graph.constant(np.broadcast_to(shape_mean, shapes.shape)))
    if lambda_phi > 0:
        phi = graph.mean(distortion_node(graph, physical))
        loss = graph.add(adv, graph.scale(phi, lambda_phi))
        batch_phi = float(phi.value)
    else:
        loss = adv
        batch_phi = batch_distortion(physical.value)
    _check("generator loss", loss, adversarial=float(adv.value), batch_phi=batch_phi)
    return GeneratorLoss(loss, float(adv.value), batch_phi, np.array(physical.value))


def batch_distortion(shapes: np.ndarray, n_points: int = N_POINTS) -> float:
    """Mean distortion of a (batch, 496) array, using the graph kernel's formula."""
    g = Graph()
    return float(np.mean(distortion_node(g, g.constant(np.atleast_2d(shapes)), n_points).value))
