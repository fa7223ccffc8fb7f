"""Exact-diagonalization reference for small instances.

Builds the Hamiltonian directly in the sigma^z basis from the instance data,
independently of the MPO machinery.  Site 0 is the most significant bit and
bit value 0 means spin up, matching :meth:`MatrixProductState.to_dense`.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .instance import Instance, classical_energy

DENSE_MAX_SITES = 16


def all_configs(n: int) -> np.ndarray:
    """All 2**n configurations as rows of +1/-1, in basis-index order."""
    idx = np.arange(2**n)[:, None]
    bits = (idx >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return 1 - 2 * bits


def hamiltonian(instance: Instance, gamma: float, sparse: bool = True):
    n = instance.n_sites
    if n > DENSE_MAX_SITES:
        raise ValueError(f"dense reference limited to {DENSE_MAX_SITES} sites, got {n}")
    dim = 2**n
    diag = classical_energy(instance, all_configs(n))
    rows = [np.arange(dim)]
    cols = [np.arange(dim)]
    vals = [diag]
    if gamma != 0.0:
        base = np.arange(dim)
        for k in range(n):
            rows.append(base)
            cols.append(base ^ (1 << (n - 1 - k)))
            vals.append(np.full(dim, -gamma))
    H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return H if sparse else H.toarray()


def lowest_states(instance: Instance, gamma: float, k: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenvalues (ascending) and eigenvectors as columns."""
    H = hamiltonian(instance, gamma)
    dim = H.shape[0]
    if dim <= 512:
        w, v = np.linalg.eigh(H.toarray())
        return w[:k], v[:, :k]
    w, v = sla.eigsh(H, k=k, which="SA", tol=1e-13)
    order = np.argsort(w)
    return w[order], v[:, order]


def ground_state(instance: Instance, gamma: float) -> tuple[float, np.ndarray]:
    w, v = lowest_states(instance, gamma, k=1)
    psi = v[:, 0]
    if psi.sum() < 0:
        psi = -psi
    return float(w[0]), psi


def sz_expectations(psi: np.ndarray, n: int) -> np.ndarray:
    p = psi**2
    return all_configs(n).T.astype(float) @ p / p.sum()


def chi_sg(instance: Instance, gamma: float, probe_h: float = 1e-6) -> float:
    """Finite-field spin-glass susceptibility by exact diagonalization."""
    n = instance.n_sites
    total = 0.0
    for j in range(n):
        _, psi = ground_state(instance.with_field_at(j, probe_h), gamma)
        m = sz_expectations(psi, n)
        total += np.sum((m / probe_h) ** 2)
    return float(total / n)
