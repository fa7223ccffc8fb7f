"""Finite-size two-site DMRG for ground and first excited states.

Environment tensors have legs ``(ket, mpo, bra)``.  ``left[i]`` contracts
everything left of site ``i`` and ``right[i]`` everything right of it.
A sweep runs the two-site window left to right and back; the orthogonality
center follows the window, so at the end of a sweep it sits on site 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import MatrixProductOperator, energy
from .lanczos import lowest_eigenpair
from .mps import MatrixProductState, TruncationPolicy, add, apply_sz, entropy, flipped, parity_mask, split_theta, split_theta_parity


class DMRGError(RuntimeError):
    """Local eigensolver failed; carries where it happened."""

    def __init__(self, message: str, bond: int, sweep: int):
        super().__init__(f"{message} (bond {bond}, sweep {sweep})")
        self.bond = bond
        self.sweep = sweep


@dataclass
class SweepReport:
    energy: float
    s_max: float
    m_max: int
    max_discarded: float
    n_sweeps_used: int
    converged: bool
    energies: list[float] = field(default_factory=list)
    work: int = 0
    matvecs: int = 0
    unconverged_solves: int = 0


@dataclass(frozen=True)
class SolverOptions:
    max_sweeps: int = 4
    energy_tol: float | None = None  # None: 1e-9 * n_sites
    lanczos_tol: float = 1e-10
    lanczos_max_matvecs: int = 200
    # residual accepted once the matvec budget is spent (near-degenerate local problems)
    lanczos_accept_tol: float = 1e-5
    krylov_dim: int = 100

    def tol_for(self, n_sites: int) -> float:
        return self.energy_tol if self.energy_tol is not None else 1e-9 * n_sites


def _left_step(E, A, W):
    X = np.tensordot(E, A, axes=(0, 0))  # (w, a', s, b)
    X = np.tensordot(X, W, axes=([0, 2], [0, 2]))  # (a', b, s', w')
    return np.tensordot(X, A, axes=([0, 2], [0, 1]))  # (b, w', b')


def _right_step(E, B, W):
    X = np.tensordot(B, E, axes=(2, 0))  # (b, s, y, c')
    X = np.tensordot(X, W, axes=([1, 2], [2, 3]))  # (b, c', w, s')
    return np.tensordot(X, B, axes=([1, 3], [2, 1]))  # (b, w, b')


def _overlap_left(E, A, G):
    return np.tensordot(np.tensordot(E, A, axes=(0, 0)), G, axes=([0, 1], [0, 1]))


def _overlap_right(E, B, G):
    return np.tensordot(B, np.tensordot(G, E, axes=(2, 1)), axes=([1, 2], [1, 2]))


def _two_site_matvec(L, W1, W2, R):
    def matvec(theta):
        X = np.tensordot(L, theta, axes=(0, 0))  # (w, a', s, t, c)
        X = np.tensordot(X, W1, axes=([0, 2], [0, 2]))  # (a', t, c, s', x)
        X = np.tensordot(X, W2, axes=([1, 4], [2, 0]))  # (a', c, s', t', y)
        return np.tensordot(X, R, axes=([1, 4], [0, 1]))  # (a', s', t', c')

    return matvec


class _Sweeper:
    def __init__(self, mpo, psi, policy, options, orthogonal=()):
        self.mpo = mpo
        self.psi = psi
        self.policy = policy
        self.options = options
        self.orth = [g.copy().canonicalize(0) for g in orthogonal]
        n = psi.n_sites
        self.n = n
        psi.move_center(0)
        self.left = [None] * n
        self.right = [None] * n
        self.left[0] = np.ones((1, 1, 1))
        self.right[n - 1] = np.ones((1, 1, 1))
        for i in range(n - 1, 0, -1):
            self.right[i - 1] = _right_step(self.right[i], psi.tensors[i], mpo.tensors[i])
        self.oleft = [[None] * n for _ in self.orth]
        self.oright = [[None] * n for _ in self.orth]
        for k, g in enumerate(self.orth):
            self.oleft[k][0] = np.ones((1, 1))
            self.oright[k][n - 1] = np.ones((1, 1))
            for i in range(n - 1, 0, -1):
                self.oright[k][i - 1] = _overlap_right(self.oright[k][i], psi.tensors[i], g.tensors[i])
        self.work = 0
        self.matvecs = 0
        self.unconverged = 0

    def _deflation(self, i):
        vecs = []
        for k, g in enumerate(self.orth):
            v = np.tensordot(self.oleft[k][i], g.tensors[i], axes=(1, 0))
            v = np.tensordot(v, g.tensors[i + 1], axes=(2, 0))
            v = np.tensordot(v, self.oright[k][i + 1], axes=(3, 1))
            v = v.ravel()
            for u in vecs:
                v = v - np.dot(u, v) * u
            nrm = np.linalg.norm(v)
            if nrm > 1e-12:
                vecs.append(v / nrm)
        return vecs

    def update(self, i, direction, sweep):
        psi, mpo = self.psi, self.mpo
        theta = np.tensordot(psi.tensors[i], psi.tensors[i + 1], axes=(2, 0))
        matvec = _two_site_matvec(self.left[i], mpo.tensors[i], mpo.tensors[i + 1], self.right[i + 1])
        deflate = self._deflation(i) if self.orth else []
        symmetric = psi.charges is not None
        if symmetric:
            # keep the local problem inside the sector fixed by the bond labels
            mask = parity_mask(psi.charges[i], psi.charges[i + 2])
            full = matvec

            def matvec(x):
                return full(x * mask) * mask

            theta = theta * mask
            deflate = [v * mask.ravel() for v in deflate]
        res = lowest_eigenpair(
            matvec,
            theta,
            tol=self.options.lanczos_tol,
            max_matvecs=self.options.lanczos_max_matvecs,
            krylov_dim=self.options.krylov_dim,
            deflate=deflate,
        )
        ml, mr = theta.shape[0], theta.shape[3]
        self.work += ml * mr * res.matvecs
        self.matvecs += res.matvecs
        if not res.converged:
            self.unconverged += 1
        if not res.converged and res.residual > self.options.lanczos_accept_tol * max(1.0, abs(res.value)):
            raise DMRGError(f"local eigensolver did not converge in {res.matvecs} matvecs, residual {res.residual:.2e}", i, sweep)
        absorb = "right" if direction > 0 else "left"
        if symmetric:
            A, B, s, discarded, labels = split_theta_parity(res.vector * mask, self.policy, absorb, psi.charges[i], psi.charges[i + 2])
            psi.charges[i + 1] = labels
        else:
            A, B, s, discarded = split_theta(res.vector, self.policy, absorb)
        psi.tensors[i], psi.tensors[i + 1] = A, B
        if direction > 0:
            psi.center = i + 1
            self.left[i + 1] = _left_step(self.left[i], A, mpo.tensors[i])
            for k, g in enumerate(self.orth):
                self.oleft[k][i + 1] = _overlap_left(self.oleft[k][i], A, g.tensors[i])
        else:
            psi.center = i
            self.right[i] = _right_step(self.right[i + 1], B, mpo.tensors[i + 1])
            for k, g in enumerate(self.orth):
                self.oright[k][i] = _overlap_right(self.oright[k][i + 1], B, g.tensors[i + 1])
        return res.value, s, discarded

    def run(self):
        n, opts = self.n, self.options
        tol = opts.tol_for(n)
        e_prev = energy(self.psi, self.mpo)
        energies = []
        converged = False
        e = e_prev
        bond_entropy = np.zeros(n - 1)
        max_disc = 0.0
        sweeps = 0
        for sweep in range(opts.max_sweeps):
            sweeps = sweep + 1
            max_disc = 0.0
            for i in range(n - 1):
                e, _, disc = self.update(i, +1, sweep)
                max_disc = max(max_disc, disc)
            for i in range(n - 2, -1, -1):
                e, s, disc = self.update(i, -1, sweep)
                max_disc = max(max_disc, disc)
                bond_entropy[i] = entropy(s)
            energies.append(e)
            if abs(e - e_prev) < tol:
                converged = True
                break
            e_prev = e
        report = SweepReport(
            energy=float(e),
            s_max=float(bond_entropy.max(initial=0.0)),
            m_max=self.psi.max_bond,
            max_discarded=max_disc,
            n_sweeps_used=sweeps,
            converged=converged,
            energies=energies,
            work=self.work,
            matvecs=self.matvecs,
            unconverged_solves=self.unconverged,
        )
        return self.psi, report


def _single_site(mpo, psi, orthogonal):
    H = mpo.tensors[0][0, :, :, 0]
    vecs = [g.tensors[0].reshape(2) / np.linalg.norm(g.tensors[0]) for g in orthogonal]
    w, v = np.linalg.eigh(H)
    if vecs:
        P = np.eye(2) - sum(np.outer(u, u) for u in vecs)
        w, v = np.linalg.eigh(P @ H @ P + 1e6 * (np.eye(2) - P))
    x = v[:, 0]
    if np.dot(x, psi.tensors[0].reshape(2)) < 0:
        x = -x
    out = MatrixProductState([x.reshape(1, 2, 1)], center=0)
    return out, SweepReport(float(w[0]), 0.0, 1, 0.0, 1, True, [float(w[0])], work=1, matvecs=1)


def ground_state(
    mpo: MatrixProductOperator,
    seed: MatrixProductState,
    policy: TruncationPolicy,
    options: SolverOptions = SolverOptions(),
) -> tuple[MatrixProductState, SweepReport]:
    """Converge a two-site DMRG from ``seed`` (which is left untouched)."""
    if seed.n_sites != mpo.n_sites:
        raise ValueError(f"size mismatch: seed has {seed.n_sites} sites, operator has {mpo.n_sites}")
    if options.max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    psi = seed.copy()
    psi.normalize()
    if psi.n_sites == 1:
        return _single_site(mpo, psi, ())
    return _Sweeper(mpo, psi, policy, options).run()


def first_excited(
    mpo: MatrixProductOperator,
    ground: MatrixProductState,
    policy: TruncationPolicy,
    options: SolverOptions = SolverOptions(max_sweeps=8),
    seed: MatrixProductState | None = None,
    rng: np.random.Generator | None = None,
    ground_energy: float | None = None,
) -> tuple[MatrixProductState, SweepReport]:
    """Lowest state orthogonal to ``ground``, by projecting it out of every local problem.

    The default seed is ``Z_mid|G> + X_all|G>``: the first term is the odd
    partner of a symmetric ground state, the second the flipped branch of a
    symmetry-broken one, so the seed overlaps the first excited state on
    both sides of the transition.
    """
    if seed is None:
        g = ground.copy().canonicalize(0)
        seed = add(apply_sz(g, ground.n_sites // 2), flipped(g))
        if seed.norm() < 1e-8:
            rng = rng or np.random.default_rng(12345)
            seed = MatrixProductState.random(mpo.n_sites, 4, rng)
    psi = seed.copy()
    psi.canonicalize(0)
    if psi.n_sites == 1:
        out = _single_site(mpo, psi, (ground,))
    else:
        # start from the component of the seed orthogonal to the ground state
        out = _Sweeper(mpo, psi, policy, options, orthogonal=(ground,)).run()
    if ground_energy is None:
        ground_energy = energy(ground, mpo)
    if out[1].energy - ground_energy < 1e-9:
        warnings.warn(
            f"gap {out[1].energy - ground_energy:.3e} below 1e-9: ground state looks degenerate",
            RuntimeWarning,
            stacklevel=2,
        )
    return out
