"""Real, open-boundary matrix product states.

Site tensors have legs ``(left bond, physical, right bond)``.  Physical index
0 is spin up (sigma^z = +1), index 1 is spin down.  Bond ``b`` sits between
sites ``b`` and ``b + 1``; the two boundary bonds have dimension 1.

With ``center = c`` every tensor left of ``c`` is a left isometry and every
tensor right of ``c`` is a right isometry, so the norm of the state is the
norm of ``tensors[c]`` and Schmidt values of the bonds next to ``c`` come
from one SVD.

Operations mutate the state in place and return it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DEGENERACY_TOL = 1e-12
SZ = np.array([1.0, -1.0])


@dataclass(frozen=True)
class TruncationPolicy:
    """How many Schmidt states to keep at a cut.

    Attributes:
        eta: tolerated discarded weight (sum of dropped squared singular values).
        m_max: hard cap on the bond dimension.
        m_min: floor on the bond dimension.
    """

    eta: float = 1e-8
    m_max: int = 256
    m_min: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if self.m_min < 1 or self.m_max < self.m_min:
            raise ValueError(f"need 1 <= m_min <= m_max, got m_min={self.m_min}, m_max={self.m_max}")


def truncation_rank(s: np.ndarray, policy: TruncationPolicy) -> tuple[int, float]:
    """Number of singular values to keep and the weight discarded.

    ``s`` is sorted descending and assumed normalised (sum of squares 1).
    """
    w = s * s
    k = len(w)
    # tail[m] = weight dropped when keeping the first m values
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    m = int(np.argmax(tail <= policy.eta))
    m = max(m, 1, policy.m_min)
    m = min(m, policy.m_max, k)
    # never split a degenerate multiplet of non-negligible values
    while m < k and m < policy.m_max and s[m - 1] > DEGENERACY_TOL and s[m - 1] - s[m] <= DEGENERACY_TOL:
        m += 1
    return m, float(tail[m])


def split_theta(theta: np.ndarray, policy: TruncationPolicy, absorb: str):
    """SVD a two-site tensor ``(ml, 2, 2, mr)`` into two site tensors.

    ``absorb`` is ``"right"`` or ``"left"``: which side receives the singular
    values (and so becomes the orthogonality center).
    Returns ``(A, B, s_kept, discarded)``.
    """
    ml, _, _, mr = theta.shape
    mat = theta.reshape(ml * 2, 2 * mr)
    try:
        U, s, Vt = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        U, s, Vt = _svd_fallback(mat)
    norm = np.linalg.norm(s)
    if norm == 0.0:
        raise FloatingPointError("cannot split a zero two-site tensor")
    s = s / norm
    m, discarded = truncation_rank(s, policy)
    U, s, Vt = U[:, :m], s[:m], Vt[:m]
    s = s / np.linalg.norm(s)
    if absorb == "right":
        A = U.reshape(ml, 2, m)
        B = (s[:, None] * Vt).reshape(m, 2, mr)
    else:
        A = (U * s[None, :]).reshape(ml, 2, m)
        B = Vt.reshape(m, 2, mr)
    return A, B, s, discarded


PARITY = np.array([1, -1])


def split_theta_parity(theta: np.ndarray, policy: TruncationPolicy, absorb: str, left: np.ndarray, right: np.ndarray):
    """Like :func:`split_theta` for a tensor with definite Z2 charges.

    The physical basis is the sigma^x eigenbasis (index 0 is parity +1).
    ``left`` and ``right`` label the outer bonds of ``theta``; each sector is
    decomposed separately so the kept Schmidt vectors carry a definite label,
    returned as the fifth element.
    """
    ml, _, _, mr = theta.shape
    mat = theta.reshape(ml * 2, 2 * mr)
    rows = (left[:, None] * PARITY[None, :]).ravel()
    cols = (PARITY[:, None] * right[None, :]).ravel()
    pieces = []
    for q in (1, -1):
        r, c = np.flatnonzero(rows == q), np.flatnonzero(cols == q)
        if r.size == 0 or c.size == 0:
            continue
        block = mat[np.ix_(r, c)]
        try:
            U, sv, Vt = np.linalg.svd(block, full_matrices=False)
        except np.linalg.LinAlgError:
            U, sv, Vt = _svd_fallback(block)
        for k in range(sv.size):
            pieces.append((sv[k], q, r, c, U[:, k], Vt[k]))
    if not pieces:
        raise FloatingPointError("cannot split a zero two-site tensor")
    pieces.sort(key=lambda item: -item[0])
    s = np.array([p[0] for p in pieces])
    norm = np.linalg.norm(s)
    if norm == 0.0:
        raise FloatingPointError("cannot split a zero two-site tensor")
    s = s / norm
    m, discarded = truncation_rank(s, policy)
    s = s[:m] / np.linalg.norm(s[:m])
    U = np.zeros((ml * 2, m))
    Vt = np.zeros((m, 2 * mr))
    labels = np.empty(m, dtype=int)
    for k, (_, q, r, c, u, v) in enumerate(pieces[:m]):
        U[r, k] = u
        Vt[k, c] = v
        labels[k] = q
    if absorb == "right":
        A = U.reshape(ml, 2, m)
        B = (s[:, None] * Vt).reshape(m, 2, mr)
    else:
        A = (U * s[None, :]).reshape(ml, 2, m)
        B = Vt.reshape(m, 2, mr)
    return A, B, s, discarded, labels


def parity_mask(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Allowed entries of a two-site tensor with outer bond labels ``left``, ``right``."""
    lhs = left[:, None, None, None] * PARITY[None, :, None, None] * PARITY[None, None, :, None]
    return lhs == right[None, None, None, :]


def _svd_fallback(mat: np.ndarray):
    import scipy.linalg

    return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


class MatrixProductState:
    def __init__(self, tensors: Sequence[np.ndarray], center: Optional[int] = None, charges=None):
        self.tensors = [np.asarray(t, dtype=float) for t in tensors]
        self.center = center
        # Z2 labels of the n + 1 bonds (boundaries included) when the state is
        # written in the sigma^x basis with definite parity; None otherwise
        self.charges = None if charges is None else [np.asarray(c, dtype=int) for c in charges]
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != 2:
                raise ValueError(f"site {k}: expected a (m, 2, m') tensor, got shape {t.shape}")
        for k in range(len(self.tensors) - 1):
            if self.tensors[k].shape[2] != self.tensors[k + 1].shape[0]:
                raise ValueError(f"bond {k}: dimensions {self.tensors[k].shape[2]} and {self.tensors[k + 1].shape[0]} disagree")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")

    # construction

    @classmethod
    def product(cls, local_states: Sequence[Sequence[float]]) -> "MatrixProductState":
        """Product state from per-site two-component vectors (normalised here)."""
        tensors = []
        for v in local_states:
            v = np.asarray(v, dtype=float)
            tensors.append((v / np.linalg.norm(v)).reshape(1, 2, 1))
        return cls(tensors, center=0)

    @classmethod
    def basis_state(cls, config: Sequence[int]) -> "MatrixProductState":
        """Computational basis state for spins +1/-1."""
        return cls.product([[1.0, 0.0] if s > 0 else [0.0, 1.0] for s in config])

    @classmethod
    def random(cls, n_sites: int, bond_dim: int, rng: np.random.Generator) -> "MatrixProductState":
        dims = [1] + [min(bond_dim, 2 ** min(k, n_sites - k)) for k in range(1, n_sites)] + [1]
        tensors = [rng.standard_normal((dims[k], 2, dims[k + 1])) for k in range(n_sites)]
        psi = cls(tensors)
        psi.canonicalize(0)
        return psi

    def copy(self) -> "MatrixProductState":
        charges = None if self.charges is None else [c.copy() for c in self.charges]
        return MatrixProductState([t.copy() for t in self.tensors], self.center, charges)

    # basic properties

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        """Dimensions of the n - 1 internal bonds."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def __len__(self) -> int:
        return self.n_sites

    # gauge

    def _shift_right(self, k: int) -> None:
        self.charges = None
        t = self.tensors[k]
        ml, d, mr = t.shape
        Q, R = np.linalg.qr(t.reshape(ml * d, mr))
        self.tensors[k] = Q.reshape(ml, d, Q.shape[1])
        self.tensors[k + 1] = np.tensordot(R, self.tensors[k + 1], axes=(1, 0))

    def _shift_left(self, k: int) -> None:
        self.charges = None
        t = self.tensors[k]
        ml, d, mr = t.shape
        Q, R = np.linalg.qr(t.reshape(ml, d * mr).T)
        self.tensors[k] = Q.T.reshape(Q.shape[1], d, mr)
        self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], R.T, axes=(2, 0))

    def canonicalize(self, center: int = 0) -> "MatrixProductState":
        """Bring the state into mixed canonical form around ``center`` and normalise it."""
        for k in range(center):
            self._shift_right(k)
        for k in range(self.n_sites - 1, center, -1):
            self._shift_left(k)
        self.center = center
        self.normalize()
        return self

    def move_center(self, target: int) -> "MatrixProductState":
        if not 0 <= target < self.n_sites:
            raise IndexError(f"site {target} outside 0..{self.n_sites - 1}")
        if self.center is None:
            return self.canonicalize(target)
        while self.center < target:
            self._shift_right(self.center)
            self.center += 1
        while self.center > target:
            self._shift_left(self.center)
            self.center -= 1
        return self

    def normalize(self) -> "MatrixProductState":
        if self.center is None:
            return self.canonicalize(0)
        t = self.tensors[self.center]
        self.tensors[self.center] = t / np.linalg.norm(t)
        return self

    def norm(self) -> float:
        return float(np.sqrt(abs(overlap(self, self))))

    # truncation and entanglement

    def truncate_bond(self, bond: int, policy: TruncationPolicy) -> tuple["MatrixProductState", float, int]:
        """Truncate bond ``bond`` by SVD; the center must sit on one of its two sites.

        The center stays on the same side.  Returns ``(self, discarded, kept)``.
        """
        if self.center not in (bond, bond + 1):
            raise ValueError(f"center {self.center} is not adjacent to bond {bond}")
        theta = np.tensordot(self.tensors[bond], self.tensors[bond + 1], axes=(2, 0))
        absorb = "right" if self.center == bond + 1 else "left"
        self.charges = None
        A, B, s, discarded = split_theta(theta, policy, absorb)
        self.tensors[bond], self.tensors[bond + 1] = A, B
        return self, discarded, len(s)

    def schmidt_values(self, bond: int) -> np.ndarray:
        if not 0 <= bond < self.n_sites - 1:
            raise IndexError(f"bond {bond} outside 0..{self.n_sites - 2}")
        if self.center is None or self.center not in (bond, bond + 1):
            self.move_center(bond)
        t = self.tensors[self.center]
        if self.center == bond:
            mat = t.reshape(-1, t.shape[2])
        else:
            mat = t.reshape(t.shape[0], -1)
        s = np.linalg.svd(mat, compute_uv=False)
        return s / np.linalg.norm(s)

    def bond_entropy(self, bond: int) -> float:
        return entropy(self.schmidt_values(bond))

    def entropies(self) -> np.ndarray:
        """Entanglement entropy at every internal bond (natural log).

        Leaves the center at the last site.
        """
        out = np.zeros(max(self.n_sites - 1, 0))
        self.move_center(0)
        self.charges = None
        for b in range(self.n_sites - 1):
            t = self.tensors[b]
            ml, d, mr = t.shape
            U, s, Vt = np.linalg.svd(t.reshape(ml * d, mr), full_matrices=False)
            out[b] = entropy(s / np.linalg.norm(s))
            self.tensors[b] = U.reshape(ml, d, -1)
            self.tensors[b + 1] = np.tensordot(s[:, None] * Vt, self.tensors[b + 1], axes=(1, 0))
            self.center = b + 1
        return out

    def max_entropy(self) -> float:
        return float(self.entropies().max(initial=0.0))

    # measurement

    def amplitude(self, config: Sequence[int]) -> float:
        if len(config) != self.n_sites:
            raise ValueError(f"configuration has {len(config)} spins, state has {self.n_sites} sites")
        v = np.ones(1)
        for t, s in zip(self.tensors, config):
            v = v @ t[:, 0 if s > 0 else 1, :]
        return float(v[0])

    def expect_sz(self, site: int) -> float:
        self.move_center(site)
        t = self.tensors[site]
        w = np.einsum("asb,asb->s", t, t)
        return float((w[0] - w[1]) / (w[0] + w[1]))

    def expect_sz_all(self) -> np.ndarray:
        """<sigma^z_i> for every site in one left-to-right pass."""
        out = np.empty(self.n_sites)
        self.move_center(0)
        for k in range(self.n_sites):
            if k > 0:
                self.move_center(k)
            t = self.tensors[k]
            w = np.einsum("asb,asb->s", t, t)
            out[k] = (w[0] - w[1]) / (w[0] + w[1])
        return out

    def to_dense(self) -> np.ndarray:
        """State vector of length 2**n; site 0 is the most significant bit."""
        v = self.tensors[0].reshape(2, -1)
        for t in self.tensors[1:]:
            v = np.tensordot(v, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return v.reshape(-1)

    # checkpoints

    def save(self, path) -> None:
        arrays = {f"site_{k:05d}": t for k, t in enumerate(self.tensors)}
        np.savez(path, center=-1 if self.center is None else self.center, **arrays)

    @classmethod
    def load(cls, path) -> "MatrixProductState":
        with np.load(path) as data:
            keys = sorted(k for k in data.files if k.startswith("site_"))
            tensors = [data[k] for k in keys]
            center = int(data["center"])
        return cls(tensors, None if center < 0 else center)


def flipped(psi: MatrixProductState) -> MatrixProductState:
    """Global spin flip: apply sigma^x on every site."""
    return MatrixProductState([t[:, ::-1, :].copy() for t in psi.tensors], psi.center)


HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def hadamard(psi: MatrixProductState) -> MatrixProductState:
    """Change the physical basis between sigma^z and sigma^x on every site (self-inverse).

    Bond labels are dropped: they are only meaningful in the sigma^x basis.
    """
    tensors = [np.einsum("st,atb->asb", HADAMARD, t) for t in psi.tensors]
    return MatrixProductState(tensors, psi.center)


def x_basis_plus(n_sites: int) -> MatrixProductState:
    """The all-|+x> state written in the sigma^x basis, with even-parity labels."""
    psi = MatrixProductState.basis_state([1] * n_sites)
    psi.charges = [np.ones(1, dtype=int) for _ in range(n_sites + 1)]
    return psi


def apply_sz(psi: MatrixProductState, site: int) -> MatrixProductState:
    out = psi.copy()
    out.tensors[site] = out.tensors[site] * SZ[None, :, None]
    return out


def add(a: MatrixProductState, b: MatrixProductState) -> MatrixProductState:
    """Unnormalised sum ``a + b`` as a direct-sum MPS (bond dimensions add)."""
    if a.n_sites != b.n_sites:
        raise ValueError(f"size mismatch: {a.n_sites} vs {b.n_sites} sites")
    n = a.n_sites
    if n == 1:
        return MatrixProductState([a.tensors[0] + b.tensors[0]])
    tensors = []
    for k, (ta, tb) in enumerate(zip(a.tensors, b.tensors)):
        if k == 0:
            tensors.append(np.concatenate([ta, tb], axis=2))
        elif k == n - 1:
            tensors.append(np.concatenate([ta, tb], axis=0))
        else:
            t = np.zeros((ta.shape[0] + tb.shape[0], 2, ta.shape[2] + tb.shape[2]))
            t[: ta.shape[0], :, : ta.shape[2]] = ta
            t[ta.shape[0] :, :, ta.shape[2] :] = tb
            tensors.append(t)
    return MatrixProductState(tensors)


def product_state_x(n_sites: int) -> MatrixProductState:
    """Uniform superposition: every basis amplitude equals 2**(-n/2)."""
    if n_sites < 1:
        raise ValueError("n_sites must be at least 1")
    return MatrixProductState.product([[1.0, 1.0]] * n_sites)


def entropy(s: np.ndarray) -> float:
    p = np.asarray(s) ** 2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)))


def overlap(a: MatrixProductState, b: MatrixProductState) -> float:
    if a.n_sites != b.n_sites:
        raise ValueError(f"size mismatch: {a.n_sites} vs {b.n_sites} sites")
    E = np.ones((1, 1))
    for ta, tb in zip(a.tensors, b.tensors):
        E = np.tensordot(E, ta, axes=(0, 0))  # (b, s, a')
        E = np.tensordot(E, tb, axes=([0, 1], [0, 1]))  # (a', b')
    return float(E[0, 0])
