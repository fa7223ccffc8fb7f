"""Diagnostics along a decreasing grid of transverse fields.

At each grid point the ground state is re-converged from the previous one,
then optionally the gap to the first excited state, the spin-glass
susceptibility and the amplitudes of chosen classical configurations are
measured.

The susceptibility is estimated with finite probe fields:

    chi_SG = (1/N) sum_j sum_i (<sigma^z_i>_j / h)^2

where ``<.>_j`` is the ground state with a field ``h`` on site ``j`` only.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .dmrg import DMRGError, SolverOptions, first_excited, ground_state
from .hamiltonian import SiteOrdering, build_mpo, order_sites
from .instance import Instance
from .mps import MatrixProductState, TruncationPolicy, product_state_x

FULL_PROBE_LIMIT = 40
DEFAULT_PROBES = 20
GAP_TIE = 1e-6
CHI_TIE_DECADES = 1.0


@dataclass
class ChiResult:
    value: Optional[float]
    probes: list[int]
    failed_probes: list[int] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failed_probes)


@dataclass
class SweepPoint:
    gamma: float
    energy: Optional[float] = None
    s_max: float = 0.0
    m_max: int = 1
    gap: Optional[float] = None
    chi_sg: Optional[float] = None
    chi_probes: list[int] = field(default_factory=list)
    tracked_amplitudes: list[tuple[str, float]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return bool(self.errors)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["tracked_amplitudes"] = [[k, a] for k, a in self.tracked_amplitudes]
        return rec


@dataclass(frozen=True)
class SweepOptions:
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    sweeps: SolverOptions = field(default_factory=lambda: SolverOptions(max_sweeps=8))
    excited_sweeps: SolverOptions = field(default_factory=lambda: SolverOptions(max_sweeps=8))
    compute_gap: bool = True
    compute_chi: bool = True
    probe_h: float = 1e-6
    probe_sites: Optional[tuple[int, ...]] = None
    probe_seed: int = 0
    # field on one site while tracking the ground state; 0 keeps the +/- symmetry
    h_break: float = 0.0
    break_site: int = 0


def config_id(config: Sequence[int]) -> str:
    """Compact label for a spin configuration: '+' for up, '-' for down."""
    return "".join("+" if int(s) > 0 else "-" for s in config)


def parse_config_id(text: str) -> np.ndarray:
    bad = set(text) - {"+", "-"}
    if bad or not text:
        raise ValueError(f"configuration label must be made of '+' and '-', got {text!r}")
    return np.array([1 if c == "+" else -1 for c in text])


def choose_probes(n_sites: int, seed: int = 0, limit: int = FULL_PROBE_LIMIT, count: int = DEFAULT_PROBES) -> list[int]:
    """Every site for small systems, otherwise ``count`` distinct sites drawn from ``seed``."""
    if n_sites <= limit:
        return list(range(n_sites))
    rng = np.random.default_rng(seed)
    return sorted(int(j) for j in rng.choice(n_sites, size=count, replace=False))


def chi_sg(
    instance: Instance,
    gamma: float,
    probe_h: float = 1e-6,
    policy: TruncationPolicy = TruncationPolicy(),
    ordering: Optional[SiteOrdering] = None,
    probes: Optional[Iterable[int]] = None,
    seed_state: Optional[MatrixProductState] = None,
    options: SolverOptions = SolverOptions(max_sweeps=8),
    probe_seed: int = 0,
) -> ChiResult:
    """Finite-probe spin-glass susceptibility.

    Each probe replaces the instance's longitudinal fields by ``probe_h`` on
    one site.  ``seed_state`` (already in chain order) warm-starts every
    probe solve; without it the uniform superposition is used.
    """
    if probe_h <= 0:
        raise ValueError(f"probe_h must be positive, got {probe_h}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if ordering is None:
        ordering = order_sites(instance)
    n = instance.n_sites
    probes = choose_probes(n, probe_seed) if probes is None else [int(j) for j in probes]
    if seed_state is None:
        seed_state = product_state_x(n)
    total, used, failed = 0.0, [], []
    for j in probes:
        mpo = build_mpo(instance.with_field_at(j, probe_h), ordering, gamma)
        try:
            psi, _ = ground_state(mpo, seed_state, policy, options)
        except DMRGError:
            failed.append(j)
            continue
        m = psi.expect_sz_all()
        total += float(np.sum((m / probe_h) ** 2))
        used.append(j)
    value = total / len(used) if used else None
    return ChiResult(value, used, failed)


def gamma_sweep(
    instance: Instance,
    gammas: Sequence[float],
    options: SweepOptions = SweepOptions(),
    track: Sequence[Sequence[int]] = (),
    ordering: Optional[SiteOrdering] = None,
    seed_state: Optional[MatrixProductState] = None,
    on_point=None,
) -> list[SweepPoint]:
    """Warm-started ground states along ``gammas`` (strictly decreasing) with diagnostics.

    ``track`` holds configurations in site order whose amplitudes are read
    off the normalized ground state.  A failed solve is recorded on its point
    and the sweep carries on from the last good state.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        return []
    if any(b >= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gammas must be strictly decreasing")
    if gammas[-1] <= 0:
        raise ValueError("gammas must be positive")
    if ordering is None:
        ordering = order_sites(instance)
    target = instance
    if options.h_break:
        fields = instance.fields.copy()
        fields[options.break_site] += options.h_break
        target = instance.with_fields(fields)
    n = instance.n_sites
    probes = list(options.probe_sites) if options.probe_sites is not None else choose_probes(n, options.probe_seed)
    tracked = [np.asarray(c, dtype=int) for c in track]
    for c in tracked:
        if c.shape != (n,):
            raise ValueError(f"tracked configuration has {c.size} spins, instance has {n}")
    tracked_chain = [c[list(ordering.sites)] for c in tracked]
    psi = product_state_x(n) if seed_state is None else seed_state
    points = []
    for gamma in gammas:
        point = SweepPoint(gamma=gamma)
        mpo = build_mpo(target, ordering, gamma)
        try:
            state, rep = ground_state(mpo, psi, options.policy, options.sweeps)
        except DMRGError as exc:
            point.errors.append(f"ground state: {exc}")
            points.append(point)
            if on_point is not None:
                on_point(point)
            continue
        psi = state
        point.energy, point.s_max, point.m_max = rep.energy, rep.s_max, rep.m_max
        if options.compute_gap:
            try:
                _, exc_rep = first_excited(mpo, psi, options.policy, options.excited_sweeps, ground_energy=rep.energy)
                point.gap = exc_rep.energy - rep.energy
            except DMRGError as exc:
                point.errors.append(f"gap: {exc}")
        if options.compute_chi:
            chi = chi_sg(instance, gamma, options.probe_h, options.policy, ordering, probes, psi, options.sweeps)
            point.chi_sg, point.chi_probes = chi.value, chi.probes
            if chi.partial:
                point.errors.append(f"chi_sg: probes {chi.failed_probes} failed")
        if tracked_chain:
            psi.normalize()
            point.tracked_amplitudes = [(config_id(c), psi.amplitude(cc)) for c, cc in zip(tracked, tracked_chain)]
        points.append(point)
        if on_point is not None:
            on_point(point)
    return points


def gap_minimum(points: Sequence[SweepPoint], tie: float = GAP_TIE) -> Optional[float]:
    """Grid field of the smallest gap.

    Gaps within ``tie`` of the minimum are treated as equal and the largest
    field among them wins, which picks the point where the gap first closes
    rather than an arbitrary point of the degenerate region below it.
    """
    good = [(p.gamma, p.gap) for p in points if p.gap is not None]
    if not good:
        return None
    low = min(g for _, g in good)
    return max(gamma for gamma, g in good if g <= low + tie)


def chi_maximum(points: Sequence[SweepPoint], decades: float = CHI_TIE_DECADES) -> Optional[float]:
    """Grid field of the largest chi_SG.

    Values within ``decades`` orders of magnitude of the maximum are treated
    as equal and the largest field among them wins (the onset of the
    saturated region).
    """
    good = [(p.gamma, p.chi_sg) for p in points if p.chi_sg is not None and p.chi_sg > 0]
    if not good:
        return None
    top = max(math.log10(c) for _, c in good)
    return max(gamma for gamma, c in good if math.log10(c) >= top - decades)


def write_jsonl(points: Iterable[SweepPoint], handle) -> None:
    for p in points:
        handle.write(json.dumps(p.to_record()) + "\n")
