"""Federated training: graph-regularized SGD and two averaging variants.

All three algorithms run synchronous rounds over per-node linear models,
starting from all-zero weights:

* ``fedsgd`` - each node takes one mini-batch gradient step on its local MSE
  plus the graph coupling ``2 * alpha * sum_{j in N(i)} (w_i - w_j)``, reading
  only last-round neighbor weights. This is a strict descent step on
  :func:`gtv_objective`; an update that *added* the coupling difference would
  drive neighbor weights apart instead of together.
* ``fedavg1`` - one full-batch gradient step per node, then every node adopts
  the average of the stepped weights.
* ``fedavg2`` - closed-form proximal minimization around the shared weights
  per node, then averaging. No graph is used by either averaging variant
  (the implicit topology is a star around the averaging server).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .data_pipeline import LocalDataset
from .empirical_graph import EmpiricalGraph
from .errors import DegenerateInputError, FedGTVError, ParameterError, ShapeError
from .model_core import mse_gradient, mse_loss, proximal_step_gram


class Algorithm(str, Enum):
    """Selectable training algorithms."""

    FEDSGD = "fedsgd"
    FEDAVG1 = "fedavg1"
    FEDAVG2 = "fedavg2"


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters for one training run.

    ``eta`` is the learning rate for fedsgd/fedavg1 and the proximal weight
    for fedavg2 (larger eta = weaker pull toward the shared anchor).
    ``alpha`` and ``batch_size`` only affect fedsgd. ``trace_every`` sets the
    logging cadence of the training trace.
    """

    algorithm: Algorithm
    eta: float
    alpha: float = 0.0
    batch_size: int = 512
    max_iterations: int = 1000
    seed: int = 42
    trace_every: int = 50

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.eta <= 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be non-negative, got {self.alpha}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_iterations < 1:
            raise ParameterError(
                f"max_iterations must be >= 1, got {self.max_iterations}"
            )
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")
        if self.trace_every < 1:
            raise ParameterError(f"trace_every must be >= 1, got {self.trace_every}")


@dataclass
class TrainingTrace:
    """Objective values logged during training plus the final weight stack.

    For fedsgd ``objective`` holds the full GTV objective (full-batch train
    losses plus the weighted edge penalty); for the averaging variants it is
    the mean full-batch train loss. ``node_losses[k]`` holds per-node train
    losses at round ``rounds[k]``.
    """

    rounds: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    node_losses: list[np.ndarray] = field(default_factory=list)
    final_weights: np.ndarray | None = None


def _as_stack(weights, datasets, graph: EmpiricalGraph | None = None) -> np.ndarray:
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2:
        raise ShapeError(f"expected an (n, d) weight stack, got shape {W.shape}")
    if W.shape[0] != len(datasets):
        raise ShapeError(f"{W.shape[0]} weight rows for {len(datasets)} datasets")
    if graph is not None and graph.n != W.shape[0]:
        raise ShapeError(f"graph has {graph.n} nodes but weight stack has {W.shape[0]}")
    return W


def gtv_objective(weights, datasets: Sequence[LocalDataset], graph: EmpiricalGraph, alpha: float) -> float:
    """Sum of per-node full-batch train MSE plus ``alpha`` times the edge penalty.

    Each undirected edge (i, j) contributes ``||w_i - w_j||^2`` exactly once;
    consequently its gradient contribution at node i is
    ``2 * alpha * sum_{j in N(i)} (w_i - w_j)``.
    """
    W = _as_stack(weights, datasets, graph)
    total = 0.0
    for i, ds in enumerate(datasets):
        X, y = ds.train
        total += mse_loss(X, y, W[i])
    penalty = 0.0
    for i, j in graph.edges():
        diff = W[i] - W[j]
        penalty += float(diff @ diff)
    return total + alpha * penalty


def fedsgd_round(
    weights,
    datasets: Sequence[LocalDataset],
    graph: EmpiricalGraph,
    config: OptimizerConfig,
    round_index: int,
    node_order: Sequence[int] | None = None,
) -> np.ndarray:
    """One synchronous fedsgd round; returns the next weight stack.

    Every node reads only ``weights`` (round-k values), so the result does not
    depend on processing order; ``node_order`` lets tests and parallel
    schedulers permute execution. Mini-batches are drawn uniformly without
    replacement from a stream seeded by (seed, node_id, round_index);
    batch_size >= m falls back to the full training split, and drawn indices
    are sorted so the summation order is fixed. Nodes without neighbors take
    a plain local step (the coupling term is an empty sum).
    """
    W = _as_stack(weights, datasets, graph)
    new_W = np.empty_like(W)
    order = range(W.shape[0]) if node_order is None else node_order
    for i in order:
        ds = datasets[i]
        X, y = ds.train
        m = X.shape[0]
        if m == 0:
            raise DegenerateInputError(f"node {ds.node_id}: empty training split")
        if config.batch_size >= m:
            Xb, yb = X, y
        else:
            rng = np.random.default_rng([config.seed, ds.node_id, round_index])
            batch = np.sort(rng.choice(m, size=config.batch_size, replace=False))
            Xb, yb = X[batch], y[batch]
        grad = mse_gradient(Xb, yb, W[i])
        nbrs = graph.neighbors(i)
        coupling = 2.0 * config.alpha * (len(nbrs) * W[i] - W[nbrs].sum(axis=0))
        new_W[i] = W[i] - config.eta * (grad + coupling)
    return new_W


def fedavg_v1_round(weights, datasets: Sequence[LocalDataset], config: OptimizerConfig) -> np.ndarray:
    """One projected-gradient round: per-node full-batch step, then average.

    Returns a stack of n identical rows (the averaged weights); the average
    reduces over ascending node index.
    """
    W = _as_stack(weights, datasets)
    stepped = np.empty_like(W)
    for i, ds in enumerate(datasets):
        X, y = ds.train
        stepped[i] = W[i] - config.eta * mse_gradient(X, y, W[i])
    shared = stepped.mean(axis=0)
    return np.tile(shared, (W.shape[0], 1))


def dataset_gram(ds: LocalDataset) -> tuple[np.ndarray, np.ndarray, int]:
    """Precompute (X^T X, X^T y, m) of a node's training split."""
    X, y = ds.train
    if X.shape[0] == 0:
        raise DegenerateInputError(f"node {ds.node_id}: empty training split")
    return X.T @ X, X.T @ y, X.shape[0]


def fedavg_v2_round(
    weights,
    datasets: Sequence[LocalDataset],
    config: OptimizerConfig,
    grams: Sequence[tuple[np.ndarray, np.ndarray, int]] | None = None,
) -> np.ndarray:
    """One proximal-averaging round: per-node closed-form minimization of
    ``local loss + (1/eta) ||v - w_i||^2``, then averaging.

    ``grams`` may carry per-node results of :func:`dataset_gram` to avoid
    recomputing cross-products every round; the output is identical to
    calling :func:`fedgtv.model_core.proximal_step` directly.
    """
    W = _as_stack(weights, datasets)
    if grams is None:
        grams = [dataset_gram(ds) for ds in datasets]
    stepped = np.empty_like(W)
    for i, (xtx, xty, m) in enumerate(grams):
        stepped[i] = proximal_step_gram(xtx, xty, m, W[i], config.eta)
    shared = stepped.mean(axis=0)
    return np.tile(shared, (W.shape[0], 1))


def train(
    datasets: Sequence[LocalDataset],
    graph: EmpiricalGraph | None,
    config: OptimizerConfig,
) -> tuple[np.ndarray, TrainingTrace]:
    """Run ``config.max_iterations`` rounds from the all-zeros initialization.

    fedsgd requires ``graph``; the averaging variants ignore it. The trace is
    logged every ``config.trace_every`` rounds and always at the final round.
    Deterministic given (datasets, graph, config). Errors raised inside a
    round are re-raised with the round index attached.
    """
    if len(datasets) == 0:
        raise DegenerateInputError("no datasets to train on")
    algorithm = config.algorithm
    if algorithm is Algorithm.FEDSGD and graph is None:
        raise ParameterError("fedsgd requires an empirical graph")
    dim = datasets[0].train[0].shape[1]
    W = np.zeros((len(datasets), dim))
    grams = [dataset_gram(ds) for ds in datasets] if algorithm is Algorithm.FEDAVG2 else None
    trace = TrainingTrace()
    for k in range(config.max_iterations):
        try:
            if algorithm is Algorithm.FEDSGD:
                W = fedsgd_round(W, datasets, graph, config, k)
            elif algorithm is Algorithm.FEDAVG1:
                W = fedavg_v1_round(W, datasets, config)
            else:
                W = fedavg_v2_round(W, datasets, config, grams)
        except FedGTVError as exc:
            raise type(exc)(f"round {k}: {exc}") from exc
        if (k + 1) % config.trace_every == 0 or k + 1 == config.max_iterations:
            losses = np.array(
                [mse_loss(ds.train[0], ds.train[1], W[i]) for i, ds in enumerate(datasets)]
            )
            if algorithm is Algorithm.FEDSGD:
                value = gtv_objective(W, datasets, graph, config.alpha)
            else:
                value = float(losses.mean())
            trace.rounds.append(k + 1)
            trace.objective.append(value)
            trace.node_losses.append(losses)
    trace.final_weights = W.copy()
    return W, trace
