"""Restarted Lanczos for the lowest eigenpair of an implicit symmetric operator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg


@dataclass
class LanczosResult:
    value: float
    vector: np.ndarray
    matvecs: int
    residual: float
    converged: bool


def _project(v: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    for u in basis:
        v = v - np.vdot(u, v) * u
    return v


def lowest_eigenpair(
    matvec: Callable[[np.ndarray], np.ndarray],
    v0: np.ndarray,
    *,
    tol: float = 1e-10,
    max_matvecs: int = 200,
    krylov_dim: int = 100,
    deflate: Sequence[np.ndarray] = (),
    rng: np.random.Generator | None = None,
) -> LanczosResult:
    """Lowest eigenpair of ``matvec`` restricted to the complement of ``deflate``.

    ``deflate`` holds orthonormal vectors to project out; the Krylov space is
    kept orthogonal to them, so their eigenvalue never shows up.  Convergence
    is declared when ``||H x - theta x|| <= tol * max(1, |theta|)``.
    """
    shape = v0.shape
    v = _project(np.asarray(v0, dtype=float).ravel(), deflate)
    nrm = np.linalg.norm(v)
    if nrm < 1e-10:
        rng = rng or np.random.default_rng(0)
        v = _project(rng.standard_normal(v.size), deflate)
        nrm = np.linalg.norm(v)
    v /= nrm
    dim = v.size - len(deflate)
    kmax = max(1, min(krylov_dim, dim))
    V = np.empty((kmax + 1, v.size))
    matvecs = 0
    theta, residual = np.inf, np.inf
    while True:
        V[0] = v
        alphas: list[float] = []
        betas: list[float] = []
        w = matvec(v.reshape(shape)).ravel()
        matvecs += 1
        k = 0
        while True:
            alpha = float(np.dot(V[k], w))
            alphas.append(alpha)
            # full reorthogonalisation, twice is enough
            B = V[: k + 1]
            w = w - B.T @ (B @ w)
            w = w - B.T @ (B @ w)
            w = _project(w, deflate)
            beta = float(np.linalg.norm(w))
            if k == 0:
                evals, evecs = np.array([alpha]), np.ones((1, 1))
            else:
                evals, evecs = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas))
            theta = float(evals[0])
            y = evecs[:, 0]
            residual = abs(beta * y[-1])
            scale = max(1.0, abs(theta))
            exhausted = beta <= 1e-14 * scale or k + 1 >= dim
            if residual <= tol * scale or exhausted or matvecs >= max_matvecs or k + 1 >= kmax:
                break
            betas.append(beta)
            V[k + 1] = w / beta
            w = matvec(V[k + 1].reshape(shape)).ravel()
            matvecs += 1
            k += 1
        x = y @ V[: k + 1]
        x /= np.linalg.norm(x)
        converged = residual <= tol * scale or exhausted
        if converged or matvecs >= max_matvecs:
            return LanczosResult(theta, x.reshape(shape), matvecs, residual, bool(converged))
        v = x
