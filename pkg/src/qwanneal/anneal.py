"""Quantum wavefunction annealing driver.

The ground state of the transverse-field Hamiltonian is converged at a large
field ``gamma0`` starting from the uniform superposition, then the field is
lowered step by step, re-converging the previous matrix product state with a
few DMRG sweeps each time.  The step shrinks when the entanglement is large:

    dgamma = min(dgamma_cap, dgamma_coeff / S_max)

At ``gamma_min`` the spins are read out from the sign of <sigma^z_i>.  A tiny
longitudinal field on one site selects one of the two globally flipped
classical ground states.

Two ways of handling that field are offered:

* ``tracking="parity"`` (default): while the field is lowered the state is
  kept in the even sector of the global spin flip, written in the sigma^x
  basis with Z2 labels on every bond.  Each cluster of spins then keeps both
  of its orientations in the block bases, so when the preferred relative
  orientation of two clusters changes at small field a local update can
  follow it.  At ``gamma_min`` the state is rotated back to the sigma^z basis,
  the field is switched on and a few more sweeps polarize it.
* ``tracking="biased"``: the field is present from ``gamma0`` on and the
  state is never symmetric.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .dmrg import DMRGError, SolverOptions, SweepReport, ground_state
from .hamiltonian import SiteOrdering, build_mpo, hadamard_mpo, order_sites
from .instance import Instance, classical_energy
from .mps import MatrixProductState, TruncationPolicy, hadamard, product_state_x, x_basis_plus

log = logging.getLogger(__name__)

SUCCESS_TOL = 1e-9
AMBIGUOUS_READOUT = 1e-3
ZERO_MAGNETIZATION = 1e-12
TRACKING_MODES = ("parity", "biased")


@dataclass(frozen=True)
class AnnealParams:
    gamma0: float = 3.0
    gamma_min: float = 0.01
    dgamma_cap: float = 0.5
    dgamma_coeff: float = 0.1
    h_break: float = 1e-6
    break_site: Optional[int] = None  # None: drawn from break_seed
    break_seed: int = 0
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    sweeps: SolverOptions = field(default_factory=SolverOptions)
    first_sweeps: int = 8
    tracking: str = "parity"  # or "biased"

    def __post_init__(self) -> None:
        if not self.gamma0 > self.gamma_min > 0:
            raise ValueError(f"need gamma0 > gamma_min > 0, got {self.gamma0}, {self.gamma_min}")
        if self.dgamma_cap <= 0 or self.dgamma_coeff <= 0:
            raise ValueError("dgamma_cap and dgamma_coeff must be positive")
        if self.h_break == 0:
            raise ValueError("h_break must be nonzero")
        if self.first_sweeps < 1:
            raise ValueError("first_sweeps must be at least 1")
        if self.tracking not in TRACKING_MODES:
            raise ValueError(f"tracking must be one of {TRACKING_MODES}, got {self.tracking!r}")

    def resolve_break_site(self, n_sites: int) -> int:
        if self.break_site is not None:
            if not 0 <= self.break_site < n_sites:
                raise ValueError(f"break_site {self.break_site} outside 0..{n_sites - 1}")
            return self.break_site
        return int(np.random.default_rng(self.break_seed).integers(n_sites))


@dataclass
class TraceRecord:
    gamma: float
    energy: float
    s_max: float
    m_max: int
    max_discarded: float
    sweeps_used: int
    converged: bool
    work: int

    @classmethod
    def from_report(cls, gamma: float, rep: SweepReport) -> "TraceRecord":
        return cls(gamma, rep.energy, rep.s_max, rep.m_max, rep.max_discarded, rep.n_sweeps_used, rep.converged, rep.work)


@dataclass
class RunResult:
    config: np.ndarray
    classical_energy: float
    trace: list[TraceRecord]
    oracle_energy: Optional[float] = None
    success: Optional[bool] = None
    ambiguous_sites: list[int] = field(default_factory=list)
    break_site: int = 0
    bandwidth: int = 0
    max_op_bond: int = 0
    wall_seconds: float = 0.0
    tracking: str = "biased"
    # the sweeps at gamma_min after the field is switched on (parity tracking only)
    polish: Optional[TraceRecord] = None
    final_state: Optional[MatrixProductState] = field(default=None, repr=False)

    def _records(self) -> list[TraceRecord]:
        return self.trace + ([self.polish] if self.polish is not None else [])

    @property
    def work(self) -> int:
        return sum(r.work for r in self._records())

    @property
    def total_sweeps(self) -> int:
        return sum(r.sweeps_used for r in self._records())

    @property
    def m_max(self) -> int:
        return max((r.m_max for r in self._records()), default=1)

    @property
    def ambiguous(self) -> bool:
        return bool(self.ambiguous_sites)

    def to_record(self) -> dict:
        return {
            "config": [int(s) for s in self.config],
            "classical_energy": self.classical_energy,
            "oracle_energy": self.oracle_energy,
            "success": self.success,
            "ambiguous_readout": self.ambiguous,
            "ambiguous_sites": self.ambiguous_sites,
            "break_site": self.break_site,
            "bandwidth": self.bandwidth,
            "max_op_bond": self.max_op_bond,
            "n_steps": len(self.trace),
            "total_sweeps": self.total_sweeps,
            "m_max": self.m_max,
            "work": self.work,
            "wall_seconds": self.wall_seconds,
            "tracking": self.tracking,
            "polish": None if self.polish is None else asdict(self.polish),
        }


class AnnealError(RuntimeError):
    """DMRG failed mid-anneal; ``trace`` holds the steps completed so far."""

    def __init__(self, cause: DMRGError, gamma: float, trace: list[TraceRecord]):
        super().__init__(f"anneal aborted at gamma={gamma:.6g}: {cause}")
        self.gamma = gamma
        self.trace = trace


def next_gamma(gamma: float, s_max_prev: float, params: AnnealParams) -> float:
    """Next field value; the step is capped, and the last step lands on gamma_min."""
    ratio = math.inf if s_max_prev <= 0 else params.dgamma_coeff / s_max_prev
    return max(gamma - min(params.dgamma_cap, ratio), params.gamma_min)


def schedule_fields(instance: Instance, params: AnnealParams) -> tuple[Instance, int]:
    site = params.resolve_break_site(instance.n_sites)
    fields = instance.fields.copy()
    fields[site] += params.h_break
    return instance.with_fields(fields), site


def readout(psi: MatrixProductState, ordering: SiteOrdering) -> tuple[np.ndarray, np.ndarray]:
    """Spins from the sign of <sigma^z_i> (zero resolves to +1) and the magnetisations, in site order."""
    mags = ordering.to_sites(psi.expect_sz_all())
    config = np.where(mags < -ZERO_MAGNETIZATION, -1, 1)
    return config, mags


def anneal(
    instance: Instance,
    params: AnnealParams = AnnealParams(),
    ordering: Optional[SiteOrdering] = None,
    oracle_energy: Optional[float] = None,
    on_step: Optional[Callable[[TraceRecord], None]] = None,
) -> RunResult:
    start = time.perf_counter()
    if ordering is None:
        ordering = order_sites(instance)
    biased, site = schedule_fields(instance, params)
    # the symmetric sector only exists when the instance itself has no fields
    tracking = params.tracking if not instance.has_fields else "biased"
    symmetric = tracking == "parity"
    trace: list[TraceRecord] = []

    def solve(gamma, seed, sweeps, target, rotate):
        mpo = build_mpo(target, ordering, gamma)
        if rotate:
            mpo = hadamard_mpo(mpo)
        opts = replace(params.sweeps, max_sweeps=sweeps)
        try:
            psi, rep = ground_state(mpo, seed, params.policy, opts)
        except DMRGError as exc:
            raise AnnealError(exc, gamma, trace) from exc
        log.debug("gamma=%.4f E=%.10f S=%.4f m=%d sweeps=%d", gamma, rep.energy, rep.s_max, rep.m_max, rep.n_sweeps_used)
        return psi, mpo, TraceRecord.from_report(gamma, rep)

    def record(rec):
        trace.append(rec)
        if on_step is not None:
            on_step(rec)

    gamma = params.gamma0
    target = instance if symmetric else biased
    seed = x_basis_plus(instance.n_sites) if symmetric else product_state_x(instance.n_sites)
    psi, mpo, rec = solve(gamma, seed, params.first_sweeps, target, symmetric)
    record(rec)
    while gamma > params.gamma_min:
        gamma = next_gamma(gamma, rec.s_max, params)
        psi, mpo, rec = solve(gamma, psi, params.sweeps.max_sweeps, target, symmetric)
        record(rec)
    polish = None
    if symmetric:
        psi, mpo, polish = solve(gamma, hadamard(psi), params.sweeps.max_sweeps, biased, False)

    config, mags = readout(psi, ordering)
    energy = classical_energy(instance, config)
    success = None
    if oracle_energy is not None:
        success = abs(energy - oracle_energy) <= SUCCESS_TOL
    return RunResult(
        config=config,
        classical_energy=energy,
        trace=trace,
        oracle_energy=oracle_energy,
        success=success,
        ambiguous_sites=[int(k) for k in np.flatnonzero(np.abs(mags) < AMBIGUOUS_READOUT)],
        break_site=site,
        bandwidth=ordering.bandwidth,
        max_op_bond=mpo.max_op_bond,
        wall_seconds=time.perf_counter() - start,
        tracking=tracking,
        polish=polish,
        final_state=psi,
    )


def trace_records(trace: list[TraceRecord]) -> list[dict]:
    return [asdict(r) for r in trace]
