"""Success rates and cost statistics over instance corpora."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .anneal import AnnealError, AnnealParams, RunResult, anneal
from .baselines import ENUMERATION_CAP, ROBUST_STA, OracleError, StaParams, brute_force, robust_sta
from .instance import Instance

BENCH_COLUMNS = (
    "geometry",
    "eta",
    "n_instances",
    "n_failed_runs",
    "success_pct",
    "work_mean",
    "work_sd",
    "sweeps_mean",
    "sweeps_sd",
    "m_max_mean",
    "wall_mean_s",
)


def oracle_energy(instance: Instance, oracle: str, sta_params: StaParams = ROBUST_STA, restarts: int = 4) -> Optional[float]:
    """Reference energy: ``exact`` enumerates, ``sta`` runs robust annealing, ``none`` skips."""
    if oracle == "none":
        return None
    if oracle == "exact":
        if instance.n_sites > ENUMERATION_CAP:
            raise OracleError(f"exact oracle needs at most {ENUMERATION_CAP} spins, instance has {instance.n_sites}")
        return brute_force(instance)[0]
    if oracle == "sta":
        return robust_sta(instance, sta_params, restarts)[0]
    raise ValueError(f"unknown oracle {oracle!r}")


@dataclass
class BenchRow:
    geometry: str
    eta: float
    results: list[RunResult] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def _stat(self, values):
        if not values:
            return math.nan, math.nan
        arr = np.asarray(values, dtype=float)
        return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0

    @property
    def success_pct(self) -> float:
        graded = [r.success for r in self.results if r.success is not None]
        total = len(graded) + len(self.errors)
        if total == 0:
            return math.nan
        return 100.0 * sum(graded) / total

    def as_dict(self) -> dict:
        work = self._stat([r.work for r in self.results])
        sweeps = self._stat([r.total_sweeps for r in self.results])
        return {
            "geometry": self.geometry,
            "eta": self.eta,
            "n_instances": len(self.results) + len(self.errors),
            "n_failed_runs": len(self.errors),
            "success_pct": self.success_pct,
            "work_mean": work[0],
            "work_sd": work[1],
            "sweeps_mean": sweeps[0],
            "sweeps_sd": sweeps[1],
            "m_max_mean": self._stat([r.m_max for r in self.results])[0],
            "wall_mean_s": self._stat([r.wall_seconds for r in self.results])[0],
        }


def run_bench(
    instances: Sequence[Instance],
    etas: Iterable[float],
    params: AnnealParams = AnnealParams(),
    oracles: Optional[Sequence[Optional[float]]] = None,
    on_result: Optional[Callable[[Instance, float, RunResult], None]] = None,
) -> list[BenchRow]:
    """One anneal per (instance, eta), grouped by geometry tag and eta.

    ``oracles[k]`` is the reference energy of ``instances[k]`` (or None).  A
    run that aborts is counted as a failure of its row, not re-raised.
    """
    if oracles is None:
        oracles = [None] * len(instances)
    if len(oracles) != len(instances):
        raise ValueError("need one oracle energy per instance")
    rows: dict[tuple[str, float], BenchRow] = {}
    for eta in etas:
        run_params = replace(params, policy=replace(params.policy, eta=float(eta)))
        for inst, ref in zip(instances, oracles):
            key = (inst.geometry.tag(), float(eta))
            row = rows.setdefault(key, BenchRow(*key))
            try:
                res = anneal(inst, run_params, oracle_energy=ref)
            except AnnealError as exc:
                row.errors.append(str(exc))
                continue
            row.results.append(res)
            if on_result is not None:
                on_result(inst, float(eta), res)
    return list(rows.values())


def write_csv(rows: Sequence[BenchRow], handle, comments: Sequence[str] = ()) -> None:
    for line in comments:
        handle.write(f"# {line}\n")
    writer = csv.DictWriter(handle, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_dict())


def fit_exponent(sizes: Sequence[float], costs: Sequence[float]) -> tuple[float, float]:
    """Least-squares power law ``cost = c * size**alpha`` on log-log axes; returns (alpha, c)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(costs, dtype=float))
    if x.size < 2 or np.ptp(x) == 0:
        raise ValueError("need at least two distinct sizes")
    alpha, logc = np.polyfit(x, y, 1)
    return float(alpha), float(math.exp(logc))
