"""The recurrent network driving constraint optimization.

Two balanced weight constructions are provided. "Bipolar" fills every
off-diagonal entry with alternating +1/-1; "acyclic" connects only neuron
pairs related through the ISA graph (shared set, or one pair's member being
the other's set).  Both alternate signs with a single carried sign variable
and correct rows with an odd number of connections by scaling the majority
sign group, so every row sums to zero.  With zero thresholds this makes the
all-0.5 state a fixed point of the dynamics: each neuron output is the
steepness-lambda sigmoid of its row's response, and a balanced row responds
with exactly zero there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .isa import InstancePair


class InvalidSize(ValueError):
    pass


def _modify_weights(row: np.ndarray, odd_modifier: float, total: int) -> None:
    # Scale the majority sign group so the row sums to zero again.
    if odd_modifier != 1:
        if total > 0:
            row[row > 0] *= odd_modifier
        elif total < 0:
            row[row < 0] *= odd_modifier


def bipolar_weights(n: int, reset_sign_per_row: bool = False) -> np.ndarray:
    """Fully connected balanced weight matrix of size n x n.

    The sign variable carries across rows by default; `reset_sign_per_row`
    restarts it at +1 for every row (an experimentation variant).
    """
    if n < 2:
        raise InvalidSize(f"need at least 2 neurons, got {n}")
    w = np.zeros((n, n))
    odd_modifier = (n - 2) / n if (n - 1) % 2 == 1 else 1.0
    sign = 1.0
    for i in range(n):
        if reset_sign_per_row:
            sign = 1.0
        total = 0
        for j in range(n):
            if i == j:
                continue
            total += sign
            w[i, j] = sign
            sign = -sign
        _modify_weights(w[i], odd_modifier, total)
    return w


def acyclic_graph_weights(
    pairs: tuple[InstancePair, ...], reset_sign_per_row: bool = False
) -> np.ndarray:
    """Sparse balanced weights over the instance vector of an ISA graph.

    Neurons i and j are connected iff the member of one is the set of the
    other, or both share the same set.  The odd-count correction uses the
    per-row connection count (the diagonal plus the nonzero entries); a row
    with a single connection is zeroed outright by its modifier (n-2)/n = 0,
    freezing that neuron at the sigmoid midpoint.
    """
    n = len(pairs)
    w = np.zeros((n, n))
    sign = 1.0
    for i in range(n):
        if reset_sign_per_row:
            sign = 1.0
        n_connections = 0
        total = 0
        for j in range(n):
            if i == j:
                n_connections += 1
            elif (
                pairs[i].member == pairs[j].set
                or pairs[i].set == pairs[j].member
                or pairs[i].set == pairs[j].set
            ):
                w[i, j] = sign
                total += sign
                sign = -sign
                n_connections += 1
        if (n_connections - 1) % 2 == 1:
            odd_modifier = (n_connections - 2) / n_connections
        else:
            odd_modifier = 1.0
        _modify_weights(w[i], odd_modifier, total)
    return w


def sigmoid(z: float, lam: float) -> float:
    """Logistic activation with steepness lambda, range (0, 1)."""
    return 1.0 / (1.0 + np.exp(-z * lam))


def init_state(n: int, seed: int) -> np.ndarray:
    """Initial outputs drawn uniformly from [0.4, 0.6], one per neuron."""
    if n < 1:
        raise InvalidSize(f"need at least 1 neuron, got {n}")
    rng = np.random.default_rng(seed)
    return 0.4 + 0.2 * rng.random(n)


def mean_output(state: np.ndarray) -> float:
    """Average neuron output, the stability diagnostic of the campaign log."""
    return float(np.mean(state))


@dataclass
class Network:
    """Weight matrix, thresholds, steepness and the evolving state vector.

    A value type: trial activations for parallel evaluation must operate on
    copies; in-place activation assumes exclusive access.
    """

    weights: np.ndarray
    thetas: np.ndarray
    lam: float
    state: np.ndarray
    time: int = 0

    @classmethod
    def create(
        cls, weights: np.ndarray, lam: float = 0.9, seed: int = 0
    ) -> "Network":
        n = weights.shape[0]
        return cls(
            weights=weights,
            thetas=np.zeros(n),
            lam=lam,
            state=init_state(n, seed),
        )

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "Network":
        return Network(self.weights, self.thetas.copy(), self.lam,
                       self.state.copy(), self.time)

    def response(self, i: int) -> float:
        """Row response for neuron i at the current state.

        Computed against the 0.5-centered state: rows sum to zero, so this
        equals the plain weighted sum of outputs, while keeping the balanced
        fixed point exact in floating point (a centered term is exactly 0.0
        when every output sits at 0.5).
        """
        if not 0 <= i < self.n:
            raise IndexError(f"neuron index out of range: {i}")
        return float(self.weights[i] @ (self.state - 0.5) - self.thetas[i])

    def activate(self, i: int) -> float:
        """Asynchronous update: recompute output i only, advance model time.

        Returns the previous output so a rejected activation can be undone
        exactly.
        """
        previous = float(self.state[i])
        self.state[i] = sigmoid(self.response(i), self.lam)
        self.time += 1
        return previous

    def revert(self, i: int, previous: float) -> None:
        """Undo the latest activation of neuron i; the state round-trips
        exactly (model time is rolled back with it)."""
        self.state[i] = previous
        self.time -= 1
