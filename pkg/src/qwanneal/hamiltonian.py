"""Transverse-field spin-glass Hamiltonian as an exact matrix product operator.

    H = -sum_(i,j) J_ij Z_i Z_j - gamma * sum_i X_i - sum_i h_i Z_i

Sites are first laid out on a line by a :class:`SiteOrdering`; the MPO is a
finite-state machine whose bond at position ``p`` carries, besides the
"nothing placed yet" and "term finished" channels, one carrier channel per
distance ``k`` such that a Z placed at position ``p + 1 - k`` still has a
partner to the right.  The operator bond dimension is therefore at most
``bandwidth + 2``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .instance import Chain, Instance, Ladder
from .mps import MatrixProductState

I2 = np.eye(2)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.diag([1.0, -1.0])


class OrderingError(ValueError):
    pass


@dataclass(frozen=True)
class SiteOrdering:
    """``sites[p]`` is the site placed at chain position ``p``; ``position`` is the inverse."""

    sites: tuple[int, ...]
    bandwidth: int

    @property
    def position(self) -> np.ndarray:
        pos = np.empty(len(self.sites), dtype=int)
        pos[list(self.sites)] = np.arange(len(self.sites))
        return pos

    @classmethod
    def identity(cls, instance: Instance) -> "SiteOrdering":
        return cls.from_sites(instance, range(instance.n_sites))

    @classmethod
    def from_sites(cls, instance: Instance, sites) -> "SiteOrdering":
        sites = tuple(int(s) for s in sites)
        if sorted(sites) != list(range(instance.n_sites)):
            raise OrderingError("ordering is not a permutation of the instance sites")
        return cls(sites, _bandwidth(instance, sites))

    def to_chain(self, per_site) -> np.ndarray:
        """Reorder a per-site array into chain order."""
        return np.asarray(per_site)[..., list(self.sites)]

    def to_sites(self, per_position) -> np.ndarray:
        """Reorder a chain-ordered array back into site order."""
        return np.asarray(per_position)[..., self.position]


def _bandwidth(instance: Instance, sites) -> int:
    pos = np.empty(instance.n_sites, dtype=int)
    pos[list(sites)] = np.arange(instance.n_sites)
    if not instance.edges:
        return 0
    idx = instance.edge_index
    return int(np.max(np.abs(pos[idx[:, 0]] - pos[idx[:, 1]])))


def _cuthill_mckee(adj: list[list[int]], start: int) -> list[int]:
    degree = [len(a) for a in adj]
    order = [start]
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in sorted(adj[u], key=lambda x: (degree[x], x)):
            if v not in seen:
                seen.add(v)
                order.append(v)
                queue.append(v)
    return order


def order_sites(instance: Instance) -> SiteOrdering:
    """Lay the sites out on a line with small bandwidth.

    Chains and ladders keep their natural (rung by rung) numbering.  Other
    graphs get the best Cuthill-McKee order over all start vertices (ties go
    to the lower start vertex), compared with the reversed order and with the
    identity.
    """
    if not instance.is_connected():
        raise OrderingError("instance graph is disconnected; pass an explicit SiteOrdering")
    if isinstance(instance.geometry, (Chain, Ladder)):
        return SiteOrdering.identity(instance)
    best = SiteOrdering.identity(instance)
    adj = [[v for v, _ in nb] for nb in instance.neighbors()]
    for start in range(instance.n_sites):
        order = _cuthill_mckee(adj, start)
        for candidate in (order, order[::-1]):
            bw = _bandwidth(instance, candidate)
            if bw < best.bandwidth:
                best = SiteOrdering(tuple(candidate), bw)
    return best


class MatrixProductOperator:
    """Per-site tensors with legs ``(left, out, in, right)``."""

    def __init__(self, tensors, ordering: SiteOrdering | None = None, gamma: float | None = None):
        self.tensors = list(tensors)
        self.ordering = ordering
        self.gamma = gamma

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def op_bond_dims(self) -> list[int]:
        return [W.shape[3] for W in self.tensors[:-1]]

    @property
    def max_op_bond(self) -> int:
        return max(self.op_bond_dims, default=1)

    def to_dense(self, site_order: bool = True) -> np.ndarray:
        """Full 2**n x 2**n matrix; site 0 (or position 0) is the most significant bit."""
        n = self.n_sites
        M = self.tensors[0][0]  # (out, in, right)
        M = M.transpose(2, 0, 1)  # (right, out, in)
        for W in self.tensors[1:]:
            # M: (a, O, I) with O, I multi-indices
            M = np.einsum("aOI,astb->bOsIt", M, W)
            b, O, s, I_, t = M.shape
            M = M.reshape(b, O * s, I_ * t)
        H = M[0]
        if site_order and self.ordering is not None:
            perm = list(self.ordering.sites)
            if perm != list(range(n)):
                # axes of H are chain positions; axis p holds site sites[p]
                T = H.reshape([2] * (2 * n))
                inv = list(self.ordering.position)
                T = T.transpose(inv + [n + q for q in inv])
                H = T.reshape(2**n, 2**n)
        return H


def build_mpo(instance: Instance, ordering: SiteOrdering, gamma: float) -> MatrixProductOperator:
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    n = instance.n_sites
    if len(ordering.sites) != n:
        raise OrderingError("ordering does not match the instance size")
    pos = ordering.position
    coupling: dict[tuple[int, int], float] = {}
    # reach[p] = number of carrier channels on the bond right of position p
    reach = np.zeros(max(n - 1, 0), dtype=int)
    for i, j, J in instance.edges:
        p, q = sorted((int(pos[i]), int(pos[j])))
        coupling[(p, q)] = coupling.get((p, q), 0.0) + J
        for b in range(p, q):
            reach[b] = max(reach[b], b + 1 - p)
    fields = instance.fields
    tensors = []
    for p in range(n):
        Kl = reach[p - 1] if p > 0 else 0
        Kr = reach[p] if p < n - 1 else 0
        Dl, Dr = Kl + 2, Kr + 2
        W = np.zeros((Dl, 2, 2, Dr))
        site = ordering.sites[p]
        W[0, :, :, 0] = I2
        W[Dl - 1, :, :, Dr - 1] = I2
        W[0, :, :, Dr - 1] = -gamma * SX - fields[site] * SZ
        if Kr >= 1:
            W[0, :, :, 1] = SZ
        for k in range(1, Kl + 1):
            if k + 1 <= Kr:
                W[k, :, :, k + 1] = I2
            J = coupling.get((p - k, p))
            if J:
                W[k, :, :, Dr - 1] = -J * SZ
        if p == 0:
            W = W[:1]
        if p == n - 1:
            W = W[..., -1:]
        tensors.append(W)
    return MatrixProductOperator(tensors, ordering, gamma)


def hadamard_mpo(mpo: MatrixProductOperator) -> MatrixProductOperator:
    """The same operator written in the sigma^x eigenbasis on every site."""
    Hd = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    tensors = [np.einsum("st,atub,uv->asvb", Hd, W, Hd) for W in mpo.tensors]
    return MatrixProductOperator(tensors, mpo.ordering, mpo.gamma)


def energy(psi: MatrixProductState, mpo: MatrixProductOperator) -> float:
    """<psi|H|psi> / <psi|psi>."""
    if psi.n_sites != mpo.n_sites:
        raise ValueError(f"size mismatch: state has {psi.n_sites} sites, operator has {mpo.n_sites}")
    E = np.ones((1, 1, 1))
    N = np.ones((1, 1))
    for A, W in zip(psi.tensors, mpo.tensors):
        E = np.tensordot(E, A, axes=(0, 0))  # (w, a', s, b)
        E = np.tensordot(E, W, axes=([0, 2], [0, 2]))  # (a', b, t, w')
        E = np.tensordot(E, A, axes=([0, 2], [0, 1]))  # (b, w', b')
        N = np.tensordot(np.tensordot(N, A, axes=(0, 0)), A, axes=([0, 1], [0, 1]))
    return float(E[0, 0, 0] / N[0, 0])
