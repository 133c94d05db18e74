"""Bounded-integer parity machine: evaluation, mutual-learning rules, metrics.

The network has ``layers`` banks of k hidden units with n inputs each; only
the active bank ever evaluates or learns, the others are carried as inert
state.  Weights are integers clamped to [-l, +l].

Every operation here is a pure function: networks are immutable values and
updates return fresh instances, so trials can run concurrently without
sharing anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .rng import RngState, next_word

LearningRule = Literal["hebbian", "anti_hebbian", "random_walk"]
LEARNING_RULES: tuple[LearningRule, ...] = ("hebbian", "anti_hebbian", "random_walk")

# Per-unit classification of a paired update step.
StepKind = Literal["attractive", "repulsive", "no_move", "idle"]

# Weight magnitudes must fit the 7-bit field of the byte codec.
MAX_DEPTH = 127


@dataclass(frozen=True)
class TpmParams:
    """Public architecture parameters.

    k: hidden units per layer; n: inputs per hidden unit; l: synaptic
    depth (weights live in [-l, +l]); layers/active_layer select the one
    bank that participates in a session.
    """

    k: int
    n: int
    l: int
    layers: int = 1
    active_layer: int = 0

    def __post_init__(self) -> None:
        if self.k < 1 or self.n < 1 or self.layers < 1:
            raise ValueError("k, n and layers must be at least 1")
        if self.l < 0:
            raise ValueError("synaptic depth l must be non-negative")
        if self.l > MAX_DEPTH:
            raise ValueError(f"synaptic depth l must be <= {MAX_DEPTH}")
        if not 0 <= self.active_layer < self.layers:
            raise ValueError("active_layer must lie in [0, layers)")


@dataclass(frozen=True, eq=False)
class TpmNetwork:
    """Immutable weight state: integer matrix of shape (layers, k, n)."""

    params: TpmParams
    weights: np.ndarray

    def __post_init__(self) -> None:
        p = self.params
        if self.weights.shape != (p.layers, p.k, p.n):
            raise ValueError("weight matrix shape does not match params")
        if np.any(np.abs(self.weights) > p.l):
            raise ValueError("weights exceed the synaptic depth bound")
        self.weights.setflags(write=False)

    @property
    def active_weights(self) -> np.ndarray:
        """The (k, n) weight bank used for evaluation and learning."""
        return self.weights[self.params.active_layer]


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Forward pass result: local fields, unit signs, parity output."""

    fields: np.ndarray
    sigmas: np.ndarray
    tau: int


@dataclass(frozen=True)
class OrderParams:
    """Second-moment overlap statistics of one hidden unit pair.

    ``rho`` is None when either weight row is all-zero, where the
    normalized overlap is undefined.
    """

    q_a: float
    q_b: float
    r: float
    rho: Optional[float]


def init_network(params: TpmParams, rng: RngState) -> tuple[TpmNetwork, RngState]:
    """Draw every weight uniformly from the 2l+1 integers in [-l, +l].

    One generator word is consumed per weight (layer-major, row-major
    order), so identical (params, rng) always yield identical networks.
    """
    p = params
    span = 2 * p.l + 1
    flat = np.empty(p.layers * p.k * p.n, dtype=np.int32)
    for i in range(flat.size):
        word, rng = next_word(rng)
        flat[i] = word % span - p.l
    weights = flat.reshape(p.layers, p.k, p.n)
    return TpmNetwork(params, weights), rng


def _check_inputs(params: TpmParams, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs)
    if inputs.shape != (params.k, params.n):
        raise ValueError(
            f"inputs must have shape ({params.k}, {params.n}), got {inputs.shape}"
        )
    if not np.all(np.abs(inputs) == 1):
        raise ValueError("inputs must be +-1 valued")
    return inputs.astype(np.int64, copy=False)


def evaluate(net: TpmNetwork, inputs: np.ndarray) -> Evaluation:
    """Forward pass over the active bank.

    fields[i] = (1/sqrt(n)) * sum_j w[i,j] * x[i,j]; sigmas are the signs
    with the zero field mapped to -1 so the output stays binary; tau is
    the product of the signs.
    """
    x = _check_inputs(net.params, inputs)
    sums = (net.active_weights.astype(np.int64) * x).sum(axis=1)
    fields = sums / math.sqrt(net.params.n)
    sigmas = np.where(sums > 0, 1, -1).astype(np.int32)
    tau = int(np.prod(sigmas))
    return Evaluation(fields=fields, sigmas=sigmas, tau=tau)


def apply_learning(
    net: TpmNetwork,
    inputs: np.ndarray,
    eval_self: Evaluation,
    tau_other: int,
    rule: LearningRule,
    sigma_other: Optional[np.ndarray] = None,
) -> tuple[TpmNetwork, tuple[StepKind, ...]]:
    """One mutual-learning step against a peer's announced output.

    If the announced outputs differ nothing moves and every unit is
    "idle".  Otherwise only units whose sign matches the common output
    update: hebbian adds tau*x, anti_hebbian subtracts tau*x, random_walk
    adds x; the result is clamped back into [-l, +l].

    The attractive/repulsive/no_move classification needs the peer's unit
    signs, which only a simulation host can supply; without ``sigma_other``
    every non-idle unit is reported as "no_move".
    """
    if rule not in LEARNING_RULES:
        raise ValueError(f"unknown learning rule: {rule!r}")
    x = _check_inputs(net.params, inputs)
    k = net.params.k
    tau_self = eval_self.tau

    if tau_self != tau_other:
        return net, ("idle",) * k

    mask = (eval_self.sigmas == tau_self).astype(np.int32)
    if rule == "hebbian":
        delta = tau_self * x
    elif rule == "anti_hebbian":
        delta = -tau_self * x
    else:
        delta = x
    updated = np.clip(
        net.active_weights + delta * mask[:, None], -net.params.l, net.params.l
    ).astype(np.int32)
    weights = net.weights.copy()
    weights[net.params.active_layer] = updated

    kinds: list[StepKind] = []
    for i in range(k):
        if sigma_other is None:
            kinds.append("no_move")
        elif eval_self.sigmas[i] != sigma_other[i]:
            kinds.append("repulsive")
        elif eval_self.sigmas[i] == tau_self:
            kinds.append("attractive")
        else:
            kinds.append("no_move")
    return TpmNetwork(net.params, weights), tuple(kinds)


def order_params(net_a: TpmNetwork, net_b: TpmNetwork, unit: int) -> OrderParams:
    """Self- and cross-moments of one unit's weight rows.

    q_a = (1/n) sum w_a^2, q_b likewise, r = (1/n) sum w_a*w_b, and
    rho = r / sqrt(q_a*q_b) when both norms are nonzero.
    """
    if net_a.params != net_b.params:
        raise ValueError("networks must share identical params")
    if not 0 <= unit < net_a.params.k:
        raise ValueError("unit index out of range")
    n = net_a.params.n
    wa = net_a.active_weights[unit].astype(np.int64)
    wb = net_b.active_weights[unit].astype(np.int64)
    q_a = float(np.dot(wa, wa)) / n
    q_b = float(np.dot(wb, wb)) / n
    r = float(np.dot(wa, wb)) / n
    if q_a > 0 and q_b > 0:
        rho: Optional[float] = r / math.sqrt(q_a * q_b)
    else:
        rho = None
    return OrderParams(q_a=q_a, q_b=q_b, r=r, rho=rho)


def is_synchronized(net_a: TpmNetwork, net_b: TpmNetwork) -> bool:
    """True iff the active weight banks are element-wise equal."""
    if net_a.params != net_b.params:
        raise ValueError("networks must share identical params")
    return bool(np.array_equal(net_a.active_weights, net_b.active_weights))
