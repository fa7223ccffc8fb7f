"""Classical reference solvers: exhaustive enumeration and simulated thermal annealing.

Simulated annealing uses single-spin-flip Metropolis moves; one step is one
attempted flip at a uniformly random site.  The inverse temperature starts at
``beta0`` and is multiplied by ``r`` after every ``steps_per_beta`` steps until
it reaches ``beta_max``.  The inner loop is compiled with numba and draws from
numba's own generator, seeded per run, so a run is a pure function of
``(instance, params)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .instance import Instance, classical_energy

ENUMERATION_CAP = 24
_CHUNK_BITS = 16


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class StaParams:
    """Annealing schedule.  The defaults are the long schedule (about 1.6e6
    temperatures of 1e4 steps each); :data:`ROBUST_STA` and :data:`WEAK_STA`
    are the cheaper presets used for oracles and local-minimum sampling."""

    beta0: float = 0.1
    beta_max: float = 1e6
    r: float = 1.0 + 1e-5
    steps_per_beta: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.beta0 < self.beta_max:
            raise ValueError(f"need 0 < beta0 < beta_max, got {self.beta0}, {self.beta_max}")
        if self.r <= 1.0:
            raise ValueError(f"r must exceed 1, got {self.r}")
        if self.steps_per_beta < 1:
            raise ValueError("steps_per_beta must be at least 1")

    @property
    def n_temperatures(self) -> int:
        return int(math.ceil(math.log(self.beta_max / self.beta0) / math.log(self.r)))

    @property
    def total_steps(self) -> int:
        return self.n_temperatures * self.steps_per_beta


ROBUST_STA = StaParams(beta0=0.1, beta_max=10.0, r=1.0 + 1e-3, steps_per_beta=2000)
WEAK_STA = StaParams(beta0=0.1, beta_max=1e3, r=1.05, steps_per_beta=20)


def _adjacency(instance: Instance):
    n = instance.n_sites
    deg = instance.degrees()
    offsets = np.zeros(n + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(deg)
    nbr = np.empty(offsets[-1], dtype=np.int64)
    wgt = np.empty(offsets[-1])
    fill = offsets[:-1].copy()
    for i, j, J in instance.edges:
        nbr[fill[i]], wgt[fill[i]] = j, J
        fill[i] += 1
        nbr[fill[j]], wgt[fill[j]] = i, J
        fill[j] += 1
    return offsets, nbr, wgt


@numba.njit(cache=True)
def _local_field(s, offsets, nbr, wgt, fields, i):
    acc = fields[i]
    for k in range(offsets[i], offsets[i + 1]):
        acc += wgt[k] * s[nbr[k]]
    return acc


@numba.njit(cache=True)
def _anneal_kernel(s, offsets, nbr, wgt, fields, beta0, r, n_temps, steps, seed, energy0):
    np.random.seed(seed)
    n = s.shape[0]
    best = s.copy()
    e = energy0
    best_e = e
    beta = beta0
    for _ in range(n_temps):
        for _ in range(steps):
            i = np.random.randint(n)
            # flipping s_i changes E by 2 s_i (sum_j J_ij s_j + h_i)
            dE = 2.0 * s[i] * _local_field(s, offsets, nbr, wgt, fields, i)
            if dE <= 0.0 or np.random.random() < math.exp(-beta * dE):
                s[i] = -s[i]
                e += dE
                if e < best_e - 1e-12:
                    best_e = e
                    best[:] = s
        beta *= r
    return best, best_e


@numba.njit(cache=True)
def _metropolis_kernel(s, offsets, nbr, wgt, fields, beta, n_samples, thin, seed):
    np.random.seed(seed)
    n = s.shape[0]
    out = np.empty((n_samples, n), dtype=np.int8)
    for t in range(n_samples):
        for _ in range(thin):
            i = np.random.randint(n)
            dE = 2.0 * s[i] * _local_field(s, offsets, nbr, wgt, fields, i)
            if dE <= 0.0 or np.random.random() < math.exp(-beta * dE):
                s[i] = -s[i]
        out[t] = s
    return out


@numba.njit(cache=True)
def _quench_kernel(s, offsets, nbr, wgt, fields):
    n = s.shape[0]
    while True:
        best_i = -1
        best_dE = -1e-12
        for i in range(n):
            dE = 2.0 * s[i] * _local_field(s, offsets, nbr, wgt, fields, i)
            if dE < best_dE:
                best_dE = dE
                best_i = i
        if best_i < 0:
            return s
        s[best_i] = -s[best_i]


def _random_start(instance: Instance, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice(np.array([-1.0, 1.0]), size=instance.n_sites)


def brute_force(instance: Instance, cap: int = ENUMERATION_CAP, tol: float = 1e-9) -> tuple[float, list[np.ndarray]]:
    """Global minimum by enumeration, and every configuration within ``tol`` of it.

    With no longitudinal field only configurations with spin 0 up are scanned
    and the flipped partners are added at the end.
    """
    n = instance.n_sites
    if n > cap:
        raise OracleError(f"enumeration over {n} spins exceeds the cap of {cap}")
    symmetric = not instance.has_fields
    free = n - 1 if symmetric else n
    chunk = min(free, _CHUNK_BITS)
    low = np.arange(2**chunk)[:, None]
    low_bits = 1 - 2 * ((low >> np.arange(chunk - 1, -1, -1)[None, :]) & 1)
    best = np.inf
    winners: list[np.ndarray] = []
    for high in range(2 ** (free - chunk)):
        high_bits = 1 - 2 * ((high >> np.arange(free - chunk - 1, -1, -1)) & 1)
        block = np.hstack([np.broadcast_to(high_bits, (low_bits.shape[0], free - chunk)), low_bits])
        if symmetric:
            block = np.hstack([np.ones((block.shape[0], 1), dtype=block.dtype), block])
        e = classical_energy(instance, block)
        m = float(e.min())
        if m < best - tol:
            best = m
            winners = [c for c in block[e <= m + tol]]
        elif m <= best + tol:
            best = min(best, m)
            winners += [c for c in block[e <= best + tol]]
    winners = [w.astype(int) for w in winners if classical_energy(instance, w) <= best + tol]
    if symmetric:
        winners += [-w for w in winners]
    return float(best), winners


def sta(instance: Instance, params: StaParams = StaParams()) -> tuple[float, np.ndarray]:
    """One annealing run; returns the best energy seen and its configuration."""
    offsets, nbr, wgt = _adjacency(instance)
    s = _random_start(instance, params.seed)
    e0 = classical_energy(instance, s)
    best, _ = _anneal_kernel(
        s, offsets, nbr, wgt, instance.fields, params.beta0, params.r, params.n_temperatures, params.steps_per_beta, params.seed, e0
    )
    config = best.astype(int)
    return float(classical_energy(instance, config)), config


def robust_sta(instance: Instance, params: StaParams = ROBUST_STA, restarts: int = 4) -> tuple[float, np.ndarray]:
    """Best of ``restarts`` independent runs with seeds ``params.seed + k``."""
    runs = [sta(instance, replace(params, seed=params.seed + k)) for k in range(restarts)]
    return min(runs, key=lambda run: run[0])


def quench(instance: Instance, config) -> np.ndarray:
    """Greedy steepest single-flip descent to a configuration no single flip improves."""
    offsets, nbr, wgt = _adjacency(instance)
    s = np.asarray(config, dtype=float).copy()
    return _quench_kernel(s, offsets, nbr, wgt, instance.fields).astype(int)


def is_local_minimum(instance: Instance, config) -> bool:
    s = np.asarray(config, dtype=float)
    h = instance.coupling_matrix() @ s + instance.fields
    return bool(np.all(2.0 * s * h >= -1e-12))


def sample_local_minima(instance: Instance, weak_params: StaParams = WEAK_STA, n_runs: int = 20) -> list[tuple[float, np.ndarray]]:
    """Distinct quenched end points of ``n_runs`` deliberately short anneals, sorted by energy."""
    seen: dict[tuple[int, ...], float] = {}
    for k in range(n_runs):
        _, config = sta(instance, replace(weak_params, seed=weak_params.seed + k))
        config = quench(instance, config)
        if not instance.has_fields and config[0] < 0:
            config = -config
        key = tuple(int(v) for v in config)
        if key not in seen:
            seen[key] = float(classical_energy(instance, config))
    out = [(e, np.array(key)) for key, e in seen.items()]
    out.sort(key=lambda item: (item[0], tuple(item[1])))
    return out


def metropolis_samples(instance: Instance, beta: float, n_samples: int, thin: int | None = None, seed: int = 0) -> np.ndarray:
    """Configurations sampled at fixed ``beta``, ``thin`` attempted flips apart."""
    offsets, nbr, wgt = _adjacency(instance)
    thin = instance.n_sites if thin is None else thin
    s = _random_start(instance, seed)
    return _metropolis_kernel(s, offsets, nbr, wgt, instance.fields, beta, n_samples, thin, seed)
