"""Two-type belief propagation and the exact enumeration posterior.

Every item carries a joint state ``(x, y)`` for ``(X^A, X^B)``.  Arrays over
the four states use the order ``(0,0), (0,1), (1,0), (1,1)``, i.e. index
``2*x + y``.

Messages live on the edges of the union of the three item-pool graphs.  An
A-pool only sees the A-coordinate of its members, a B-pool the
B-coordinate and an AB-pool only whether a member is clean for both.  For an
edge ``(c, G)`` the pool-to-item message is

    R(free states)  = p(s|1) + (p(s|0) - p(s|1)) * prod_{c' in G - c} Pr_c'(clean)
    R(other states) = p(s|1)

where ``Pr_c'(clean)`` marginalises the item-to-pool message ``Qbar`` onto
the coordinate(s) the pool tests.  Item-to-pool messages multiply the prior
with all other incoming ``R`` (normalised over the four states, which only
rescales them).  Updates are synchronous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Union

import numpy as np

from .pooling import PoolingDesign
from .sim import NoiseModel, Observations, Priors

KIND_A, KIND_B, KIND_AB = 0, 1, 2

# states whose R carries the product term, per pool kind
_FREE_STATES = {
    KIND_A: (0, 1),   # x = 0
    KIND_B: (0, 2),   # y = 0
    KIND_AB: (0,),    # (0, 0)
}

DEFAULT_EXACT_BUDGET = 64 * 4**10


class NumericDegeneracyError(ArithmeticError):
    """All four states of a message or marginal vanished."""


class ExactBudgetExceeded(RuntimeError):
    """Full enumeration would exceed its work budget."""


def _slots(groups: list[list[int]]) -> np.ndarray:
    width = max((len(g) for g in groups), default=0)
    out = np.full((len(groups), width), -1, dtype=np.int64)
    for k, g in enumerate(groups):
        out[k, : len(g)] = g
    return out


class EdgeSet:
    """Adjacency of the three item-pool graphs, flattened to one edge list.

    Pools are numbered A first, then B, then AB; edges are grouped by pool.
    ``pool_slots`` and ``item_slots`` are ``-1``-padded tables of edge ids,
    used to take leave-one-out products along each pool and each item.
    """

    def __init__(self, design: PoolingDesign):
        self.n_items = design.n_items
        self.pool_counts = (design.M_A.n_rows, design.M_B.n_rows, design.M_AB.n_rows)
        edge_item, pool_kind, pool_edges = [], [], []
        item_edges: list[list[int]] = [[] for _ in range(self.n_items)]
        for kind, M in ((KIND_A, design.M_A), (KIND_B, design.M_B), (KIND_AB, design.M_AB)):
            for row in M.rows:
                ids = []
                for c in row:
                    e = len(edge_item)
                    edge_item.append(c)
                    item_edges[c].append(e)
                    ids.append(e)
                pool_kind.append(kind)
                pool_edges.append(ids)
        self.edge_item = np.asarray(edge_item, dtype=np.int64)
        self.pool_kind = np.asarray(pool_kind, dtype=np.int64)
        self.edge_pool = np.repeat(np.arange(len(pool_edges)), [len(p) for p in pool_edges])
        self.edge_kind = self.pool_kind[self.edge_pool] if len(pool_edges) else np.zeros(0, dtype=np.int64)
        self.pool_slots = _slots(pool_edges)
        self.item_slots = _slots(item_edges)
        self.item_edges = item_edges

    @property
    def n_edges(self) -> int:
        return self.edge_item.size

    @property
    def n_pools(self) -> int:
        return self.pool_kind.size


def _leave_one_out(values: np.ndarray, slots: np.ndarray):
    """Products over each slot group, once with each member left out.

    Returns ``(per-edge excluded product, per-group full product)``.  The
    group product is taken over its values in sorted order and the member is
    divided back out, so results do not depend on how members are listed.
    Zeros are counted separately instead of being divided by.
    """
    tail = values.shape[1:]
    if slots.shape[1] == 0:
        return np.ones_like(values), np.ones((slots.shape[0],) + tail)
    mask = slots >= 0
    padded = np.ones(slots.shape + tail)
    padded[mask] = values[slots[mask]]
    is_zero = padded == 0
    n_zero = is_zero.sum(axis=1)
    nonzero_prod = np.sort(np.where(is_zero, 1.0, padded), axis=1).prod(axis=1)

    group = np.empty(values.shape[0], dtype=np.int64)
    group[slots[mask]] = np.nonzero(mask)[0]
    others_nz, zeros = nonzero_prod[group], n_zero[group]
    own_zero = values == 0
    divided = others_nz / np.where(own_zero, 1.0, values)
    excl = np.where(own_zero, np.where(zeros == 1, others_nz, 0.0),
                    np.where(zeros > 0, 0.0, divided))
    return excl, np.where(n_zero > 0, 0.0, nonzero_prod)


def _state_sum(a: np.ndarray) -> np.ndarray:
    # pairs (0,0)+(1,1) and (0,1)+(1,0) so that exchanging A and B is exact
    return (a[:, 0] + a[:, 3]) + (a[:, 1] + a[:, 2])


@dataclass
class MessageState:
    """Edge messages at iteration ``t``; ``Q`` is item-to-pool (normalised),
    ``R`` is pool-to-item (raw, ``None`` before the first pool update)."""

    edges: EdgeSet
    Q: np.ndarray
    R: Optional[np.ndarray] = None
    t: int = 0


@dataclass(frozen=True)
class BpSettings:
    epsilon: float = 1e-6
    max_iterations: int = 200

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class Marginals:
    """Per-item posterior over ``(X^A, X^B)``, shape ``(n, 4)``."""

    joint: np.ndarray

    @property
    def n(self) -> int:
        return self.joint.shape[0]

    @property
    def p_A(self) -> np.ndarray:
        return self.joint[:, 2] + self.joint[:, 3]

    @property
    def p_B(self) -> np.ndarray:
        return self.joint[:, 1] + self.joint[:, 3]

    def defective(self, kind: str) -> np.ndarray:
        if kind == "A":
            return self.p_A
        if kind == "B":
            return self.p_B
        raise ValueError(f"type must be 'A' or 'B', got {kind!r}")

    def swapped(self) -> "Marginals":
        """Marginals with the roles of A and B exchanged."""
        return Marginals(self.joint[:, [0, 2, 1, 3]])


class BpResult(NamedTuple):
    marginals: Marginals
    converged: bool
    iterations: int


def _as_edges(design_or_edges: Union[PoolingDesign, EdgeSet]) -> EdgeSet:
    if isinstance(design_or_edges, EdgeSet):
        return design_or_edges
    return EdgeSet(design_or_edges)


def init_messages(design: Union[PoolingDesign, EdgeSet], priors: Priors) -> MessageState:
    edges = _as_edges(design)
    Q = np.tile(priors.joint(), (edges.n_edges, 1))
    return MessageState(edges, Q)


def _pool_observations(edges: EdgeSet, observations: Observations) -> np.ndarray:
    counts = (observations.s_A.size, observations.s_B.size, observations.s_AB.size)
    if counts != edges.pool_counts:
        raise ValueError(f"observation lengths {counts} do not match pool counts {edges.pool_counts}")
    return np.concatenate([observations.s_A, observations.s_B, observations.s_AB])


def update_R(state: MessageState, observations: Observations, noise: NoiseModel) -> MessageState:
    """Pool-to-item messages from the current ``Q``."""
    edges = state.edges
    s = _pool_observations(edges, observations)[edges.edge_pool]
    p_pos = noise.likelihood(s, True)
    p_neg = noise.likelihood(s, False)
    kind = edges.edge_kind
    Q = state.Q
    clean = Q[:, 0] + np.where(kind == KIND_A, Q[:, 1], 0.0) + np.where(kind == KIND_B, Q[:, 2], 0.0)
    others_clean, _ = _leave_one_out(clean, edges.pool_slots)
    free = p_pos + (p_neg - p_pos) * others_clean
    R = np.repeat(p_pos[:, None], 4, axis=1)
    for k, states in _FREE_STATES.items():
        sel = kind == k
        for st in states:
            R[sel, st] = free[sel]
    return replace(state, R=R)


def _normalise_rows(a: np.ndarray, what: str) -> np.ndarray:
    total = _state_sum(a)
    if np.any(total <= 0):
        bad = int(np.flatnonzero(total <= 0)[0])
        raise NumericDegeneracyError(f"{what} {bad} vanished in every state")
    return a / total[:, None]


def update_Q(state: MessageState, priors: Priors) -> tuple[MessageState, float]:
    """Item-to-pool messages from the current ``R``; returns the new state and
    the largest state-wise change of any ``Q``."""
    if state.R is None:
        raise ValueError("R messages have not been computed")
    edges = state.edges
    R_bar = _normalise_rows(state.R, "R message on edge")
    others, _ = _leave_one_out(R_bar, edges.item_slots)
    Q = _normalise_rows(priors.joint() * others, "Q message on edge")
    delta = float(np.abs(Q - state.Q).max()) if Q.size else 0.0
    return replace(state, Q=Q, t=state.t + 1), delta


def item_marginals(state: MessageState, priors: Priors) -> Marginals:
    """Prior times every incoming ``R``, normalised per item."""
    edges = state.edges
    if state.R is None:
        R_bar = np.ones((0, 4))
    else:
        R_bar = _normalise_rows(state.R, "R message on edge")
    _, full = _leave_one_out(R_bar, edges.item_slots)
    return Marginals(_normalise_rows(priors.joint() * full, "marginal of item"))


def run_bp(design: Union[PoolingDesign, EdgeSet], observations: Observations, priors: Priors,
           noise: NoiseModel, settings: BpSettings = BpSettings()) -> BpResult:
    """Iterate until no ``Q`` message moves by ``epsilon`` or more.

    If ``max_iterations`` is hit first, the marginals of the last iteration
    are returned with ``converged=False``.
    """
    state = init_messages(design, priors)
    _pool_observations(state.edges, observations)
    converged = False
    for _ in range(settings.max_iterations):
        state = update_R(state, observations, noise)
        state, delta = update_Q(state, priors)
        if delta < settings.epsilon:
            converged = True
            break
    return BpResult(item_marginals(state, priors), converged, state.t)


# --------------------------------------------------------------------------
# exact posterior

def _pool_masks(M) -> np.ndarray:
    return np.array([sum(1 << j for j in r) for r in M.rows], dtype=np.int64)


def _family_likelihood(codes: np.ndarray, masks: np.ndarray, s: np.ndarray, noise: NoiseModel):
    if masks.size == 0:
        return np.ones(codes.size)
    z = (codes[:, None] & masks[None, :]) != 0
    return noise.likelihood(s[None, :], z).prod(axis=1)


def exact_posterior(design: PoolingDesign, observations: Observations, priors: Priors,
                    noise: NoiseModel, budget: int = DEFAULT_EXACT_BUDGET) -> Marginals:
    """Marginal posteriors by summing over all ``4**n`` joint configurations.

    A-pools depend on the A-configuration only, B-pools on the B one, and
    AB-pools on their bitwise OR, so the joint weight table is an outer
    product corrected by an AB lookup.
    """
    observations.check(design)
    n = design.n_items
    pools = design.M_A.n_rows + design.M_B.n_rows + design.M_AB.n_rows
    cost = 4**n * max(pools, 1)
    if cost > budget:
        raise ExactBudgetExceeded(f"enumeration over n={n} items needs ~{cost} operations, budget is {budget}")
    codes = np.arange(2**n, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    k = bits.sum(axis=1)
    # powers rather than a product over items keep the prior label-invariant
    prior_a = priors.p_A**k * (1 - priors.p_A) ** (n - k)
    prior_b = priors.p_B**k * (1 - priors.p_B) ** (n - k)
    f_a = prior_a * _family_likelihood(codes, _pool_masks(design.M_A), observations.s_A, noise)
    f_b = prior_b * _family_likelihood(codes, _pool_masks(design.M_B), observations.s_B, noise)
    l_ab = _family_likelihood(codes, _pool_masks(design.M_AB), observations.s_AB, noise)
    W = f_a[:, None] * f_b[None, :] * l_ab[codes[:, None] | codes[None, :]]
    # correctly rounded sums are independent of term order, which makes the
    # result exactly equivariant under relabelling and A/B exchange
    total = math.fsum(W.ravel())
    if not total > 0:
        raise NumericDegeneracyError("observations have zero probability under the model")
    joint = np.empty((n, 4))
    for j in range(n):
        on = bits[:, j]
        for x, rows in ((0, ~on), (1, on)):
            block = W[rows]
            for y, cols in ((0, ~on), (1, on)):
                joint[j, 2 * x + y] = math.fsum(block[:, cols].ravel())
    return Marginals(joint / total)
