"""Two-layer representation network trained with a cosine triplet objective.

Layer 1 is an affine map followed by length normalization, layer 2 an affine
dimensionality reduction::

    h = W1 x + b1,   u = h / |h|,   y = W2 u + b2

For triplets ``(a, b, c)`` the objective ``J = sum cos(y_a, y_b) - gamma *
cos(y_a, y_c)`` is maximized by minimizing the non-negative loss
``L = (1 + gamma) * T - J``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .model import ClusterState, Hyperparams
from .preprocess import NORM_EPS, DegenerateVectorError, PcaTransform, WhiteningTransform


@dataclass(frozen=True)
class NetworkParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        d_in = self.W1.shape[1]
        if self.W1.shape != (d_in, d_in) or self.b1.shape != (d_in,):
            raise ValueError("layer 1 must be D x D with a D-vector bias")
        if self.W2.ndim != 2 or self.W2.shape[1] != d_in or self.b2.shape != (self.W2.shape[0],):
            raise ValueError("layer 2 must be d x D with a d-vector bias")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def output_dim(self) -> int:
        return self.W2.shape[0]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "NetworkParams":
        return NetworkParams(**{k: v.copy() for k, v in self.as_dict().items()})


# (anchor, positive, negative) segment indices, one row per triplet
Triplets = np.ndarray


def init_network(whitening: WhiteningTransform, pca: PcaTransform) -> NetworkParams:
    """Layer 1 from the whitening transform, layer 2 from the PCA basis."""
    if pca.basis.shape[1] != whitening.dim:
        raise ValueError(
            f"PCA input dimension {pca.basis.shape[1]} != whitening dimension {whitening.dim}")
    w = whitening.matrix.copy()
    return NetworkParams(W1=w, b1=-(w @ whitening.mean), W2=pca.basis.copy(),
                         b2=np.zeros(pca.dim))


def _hidden(theta: NetworkParams, x: np.ndarray):
    h = x @ theta.W1.T + theta.b1
    r = np.linalg.norm(h, axis=1)
    bad = np.flatnonzero(~(r > NORM_EPS))
    if bad.size:
        raise DegenerateVectorError(f"hidden activation of row {bad[0]} has near-zero norm")
    return h / r[:, None], r


def forward(theta: NetworkParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    u, _ = _hidden(theta, x)
    return u @ theta.W2.T + theta.b2


def mine_triplets(state: ClusterState, rng: np.random.Generator) -> Triplets:
    """One triplet per unordered within-cluster pair.

    Pairs are listed cluster by cluster in lexicographic order. Each
    negative is drawn by picking another cluster uniformly, then one of its
    members uniformly.
    """
    clusters = state.clusters()
    k = len(clusters)
    if k < 2:
        raise ValueError("triplet mining needs at least 2 clusters")
    anchors, positives, owners = [], [], []
    for ci, members in enumerate(clusters):
        m = np.asarray(members)
        ia, ib = np.triu_indices(m.size, 1)
        anchors.append(m[ia])
        positives.append(m[ib])
        owners.append(np.full(ia.size, ci))
    a = np.concatenate(anchors)
    if a.size == 0:
        return np.empty((0, 3), dtype=np.int64)
    b = np.concatenate(positives)
    own = np.concatenate(owners)
    neg_cluster = rng.integers(0, k - 1, size=a.size)
    neg_cluster += neg_cluster >= own
    sizes = np.array([len(c) for c in clusters])
    pick = rng.integers(0, sizes[neg_cluster])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    flat = np.concatenate([np.asarray(c) for c in clusters])
    c = flat[starts[neg_cluster] + pick]
    return np.stack([a, b, c], axis=1).astype(np.int64)


def _cosines(p: np.ndarray, q: np.ndarray):
    np_, nq = np.linalg.norm(p, axis=1), np.linalg.norm(q, axis=1)
    if not (np.all(np_ > NORM_EPS) and np.all(nq > NORM_EPS)):
        raise DegenerateVectorError("representation with near-zero norm")
    cos = np.einsum("ij,ij->i", p, q) / (np_ * nq)
    return cos, np_, nq


def triplet_objective(theta: NetworkParams, x, triplets: Triplets,
                      gamma: float) -> tuple[float, float]:
    """Return ``(J, L)`` for the given triplets."""
    t = np.asarray(triplets)
    if t.size == 0:
        raise ValueError("empty triplet list")
    y = forward(theta, x)
    pos, _, _ = _cosines(y[t[:, 0]], y[t[:, 1]])
    neg, _, _ = _cosines(y[t[:, 0]], y[t[:, 2]])
    j = float(np.sum(pos - gamma * neg))
    loss = float(np.sum((1.0 - pos) + gamma * (1.0 + neg)))
    return j, loss


def _cos_grads(p, q, cos, np_, nq):
    """d cos(p, q) / dp and / dq, rowwise."""
    gp = q / (np_ * nq)[:, None] - cos[:, None] * p / (np_ ** 2)[:, None]
    gq = p / (np_ * nq)[:, None] - cos[:, None] * q / (nq ** 2)[:, None]
    return gp, gq


def loss_and_gradient(theta: NetworkParams, x, triplets: Triplets,
                      gamma: float) -> tuple[float, NetworkParams]:
    t = np.asarray(triplets)
    if t.size == 0:
        raise ValueError("empty triplet list")
    x = np.asarray(x, dtype=np.float64)
    u, r = _hidden(theta, x)
    y = u @ theta.W2.T + theta.b2
    ya, yb, yc = y[t[:, 0]], y[t[:, 1]], y[t[:, 2]]
    pos, na, nb = _cosines(ya, yb)
    neg, _, nc = _cosines(ya, yc)
    loss = float(np.sum((1.0 - pos) + gamma * (1.0 + neg)))

    ga_p, gb = _cos_grads(ya, yb, pos, na, nb)
    ga_n, gc = _cos_grads(ya, yc, neg, na, nc)
    gy = np.zeros_like(y)
    # dL/dy = -d pos + gamma * d neg
    np.add.at(gy, t[:, 0], -ga_p + gamma * ga_n)
    np.add.at(gy, t[:, 1], -gb)
    np.add.at(gy, t[:, 2], gamma * gc)

    gW2 = gy.T @ u
    gb2 = gy.sum(axis=0)
    gu = gy @ theta.W2
    gh = (gu - np.einsum("ij,ij->i", gu, u)[:, None] * u) / r[:, None]
    gW1 = gh.T @ x
    gb1 = gh.sum(axis=0)
    return loss, NetworkParams(W1=gW1, b1=gb1, W2=gW2, b2=gb2)


def objective_gradient(theta: NetworkParams, x, triplets: Triplets,
                       gamma: float) -> NetworkParams:
    """Gradient of the loss ``L`` with respect to every parameter."""
    return loss_and_gradient(theta, x, triplets, gamma)[1]


@dataclass
class TrainingHistory:
    """Loss at the starting parameters and after every epoch."""

    initial: Optional[float] = None
    losses: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.losses)

    def __iter__(self):
        return iter(self.losses)

    def ratios(self) -> list[float]:
        return [l / self.initial for l in self.losses]


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def train(theta0: NetworkParams, x, state: ClusterState, hp: Hyperparams,
          rng: np.random.Generator) -> tuple[NetworkParams, TrainingHistory]:
    """Full-batch Adam on the triplet loss with the loss-ratio stop.

    Triplets are mined once from ``state`` and held fixed. Training stops
    after the first epoch whose loss is at most ``hp.eta`` times the loss at
    ``theta0``, or after ``hp.max_epochs`` epochs.
    """
    history = TrainingHistory()
    if state.num_clusters < 2:
        return theta0, history
    triplets = mine_triplets(state, rng)
    if triplets.shape[0] == 0 or hp.max_epochs == 0:
        return theta0, history
    x = np.asarray(x, dtype=np.float64)
    loss0, grad = loss_and_gradient(theta0, x, triplets, hp.gamma)
    history.initial = loss0
    if loss0 <= 1e-12:
        return theta0, history
    params = theta0.copy().as_dict()
    opt = Adam(hp.learning_rate)
    for _ in range(hp.max_epochs):
        opt.step(params, grad.as_dict())
        loss, grad = loss_and_gradient(NetworkParams(**params), x, triplets, hp.gamma)
        history.losses.append(loss)
        if loss / loss0 <= hp.eta:
            break
    return NetworkParams(**params), history
