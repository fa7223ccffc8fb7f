import io
import math

import numpy as np
import pytest

from qwanneal.anneal import AnnealParams
from qwanneal.baselines import OracleError
from qwanneal.bench import BENCH_COLUMNS, BenchRow, fit_exponent, oracle_energy, run_bench, write_csv
from qwanneal.dmrg import SolverOptions
from qwanneal.instance import Chain, Ladder, generate


def test_fit_exponent_recovers_power_law():
    sizes = np.array([10, 20, 40, 80])
    alpha, c = fit_exponent(sizes, 3.0 * sizes**1.7)
    assert alpha == pytest.approx(1.7) and c == pytest.approx(3.0)
    with pytest.raises(ValueError):
        fit_exponent([10, 10], [1, 2])


def test_oracle_choices():
    inst = generate(Chain(10), 0)
    assert oracle_energy(inst, "none") is None
    assert oracle_energy(inst, "sta") == pytest.approx(oracle_energy(inst, "exact"))
    with pytest.raises(OracleError):
        oracle_energy(generate(Chain(30), 0), "exact")
    with pytest.raises(ValueError):
        oracle_energy(inst, "magic")


def test_bench_rows_grouped_and_written():
    insts = [generate(Chain(8), s) for s in range(2)] + [generate(Ladder(4, 2), 0)]
    refs = [oracle_energy(i, "exact") for i in insts]
    seen = []
    rows = run_bench(insts, [1e-8, 1e-3], oracles=refs, on_result=lambda *a: seen.append(a))
    assert [(r.geometry, r.eta) for r in rows] == [("chain 8", 1e-8), ("ladder 4 2", 1e-8), ("chain 8", 1e-3), ("ladder 4 2", 1e-3)]
    assert len(seen) == 6
    d = rows[0].as_dict()
    assert d["n_instances"] == 2 and d["success_pct"] == 100.0
    buf = io.StringIO()
    write_csv(rows, buf, ["note"])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# note"
    assert lines[1] == ",".join(BENCH_COLUMNS)
    assert len(lines) == 6


def test_aborted_runs_count_as_failures():
    inst = generate(Ladder(6, 2), 0)
    tight = SolverOptions(lanczos_max_matvecs=2, krylov_dim=2, lanczos_accept_tol=1e-15)
    rows = run_bench([inst], [1e-8], AnnealParams(sweeps=tight, first_sweeps=1, tracking="biased"), [0.0])
    assert rows[0].success_pct == 0.0
    assert rows[0].as_dict()["n_failed_runs"] == 1


def test_empty_row_and_mismatched_oracles():
    assert math.isnan(BenchRow("x", 1e-8).success_pct)
    with pytest.raises(ValueError):
        run_bench([generate(Chain(4), 0)], [1e-8], oracles=[])
