"""Command-line front end.

Every output file starts with a manifest record (command, all parameters,
code version) followed by a header record that defines the units of the
numeric fields.  Exit status: 0 on success, 1 on a runtime failure, 2 on a
usage error.  Relative output paths are resolved under ``$QWANNEAL_OUTPUT_DIR``
when that variable is set.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .anneal import TRACKING_MODES, AnnealError, AnnealParams, anneal, trace_records
from .baselines import ROBUST_STA, WEAK_STA, OracleError, StaParams, brute_force, robust_sta, sample_local_minima, sta
from .bench import oracle_energy, run_bench, write_csv
from .dmrg import DMRGError, SolverOptions
from .hamiltonian import OrderingError
from .instance import InstanceError, generate, load, parse_geometry, save
from .mps import TruncationPolicy
from .observables import SweepOptions, chi_maximum, gamma_sweep, gap_minimum, parse_config_id

log = logging.getLogger("qwanneal")

OUTPUT_DIR_ENV = "QWANNEAL_OUTPUT_DIR"

ANNEAL_UNITS = {
    "classical_energy": "energy in units of max |J| (couplings drawn from [-1, 1])",
    "oracle_energy": "same units as classical_energy",
    "gamma": "transverse field, same units as J",
    "energy": "variational ground-state energy at gamma, same units as J",
    "s_max": "largest von Neumann block entropy over all cuts, natural log",
    "m_max": "largest MPS bond dimension",
    "max_discarded": "largest discarded Schmidt weight of one truncation",
    "work": "sum over local eigensolves of m_left*m_right*matvecs (dimensionless)",
    "wall_seconds": "wall-clock seconds, hardware dependent",
}
SWEEP_UNITS = {
    "gamma": "transverse field, same units as J",
    "energy": "ground-state energy, same units as J",
    "gap": "first excited minus ground energy, same units as J",
    "s_max": "largest block entropy over all cuts, natural log",
    "chi_sg": "(1/N) sum_j sum_i (<sz_i>/h_j)^2 with finite probe field h, units 1/J^2",
    "tracked_amplitudes": "ground-state amplitude of the labelled configuration ('+' up, '-' down, site order)",
}
ORACLE_UNITS = {
    "energy": "classical energy, same units as J",
    "steps": "attempted single-spin flips at uniformly random sites",
}


def _out_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _manifest(args: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    return {"record": "manifest", "command": args.command, "params": params, "version": __version__}


def _write_records(path: Path | None, records: list[dict]) -> None:
    text = "".join(json.dumps(r) + "\n" for r in records)
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _jobs_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


STA_PRESETS = {"robust": ROBUST_STA, "weak": WEAK_STA, "long": StaParams()}


def _sta_params(args, default: str = "robust") -> StaParams:
    base = STA_PRESETS[args.preset or default]
    over = {k: getattr(args, k) for k in ("beta0", "beta_max", "r", "steps_per_beta") if getattr(args, k, None) is not None}
    return replace(base, seed=args.sta_seed, **over)


def _anneal_params(args) -> AnnealParams:
    policy = TruncationPolicy(eta=args.eta, m_max=args.m_max, m_min=args.m_min)
    return AnnealParams(
        gamma0=args.gamma0,
        gamma_min=args.gamma_min,
        dgamma_cap=args.dgamma_cap,
        dgamma_coeff=args.dgamma_coeff,
        h_break=args.h_break,
        break_site=args.break_site,
        break_seed=args.break_seed,
        policy=policy,
        sweeps=SolverOptions(max_sweeps=args.sweeps),
        first_sweeps=args.first_sweeps,
        tracking=args.tracking,
    )


# gen


def cmd_gen(args) -> int:
    geom = parse_geometry(" ".join(args.geometry))
    out_dir = _out_path(os.path.join(args.out_dir, "x")).parent
    stem = geom.tag().replace(" ", "_")
    for seed in range(args.seed, args.seed + args.count):
        path = out_dir / f"{stem}_s{seed}.txt"
        save(generate(geom, seed), path)
        print(path)
    return 0


# anneal


def _anneal_one(job):
    path, params, oracle, sta_params, checkpoint = job
    inst = load(path)
    ref = oracle_energy(inst, oracle, sta_params)
    res = anneal(inst, params, oracle_energy=ref)
    rec = {"record": "result", "instance": str(path), "geometry": inst.geometry.tag(), "seed": inst.seed, **res.to_record()}
    if checkpoint is not None:
        target = checkpoint / (Path(path).stem + ".npz")
        res.final_state.save(target)
        rec["checkpoint"] = str(target)
    return rec, trace_records(res.trace)


def cmd_anneal(args) -> int:
    params = _anneal_params(args)
    sta_params = _sta_params(args)
    checkpoint = None
    if args.checkpoint_dir:
        checkpoint = _out_path(os.path.join(args.checkpoint_dir, "x")).parent
    jobs = [(p, params, args.oracle, sta_params, checkpoint) for p in args.instances]
    outputs = _jobs_map(_anneal_one, jobs, args.jobs)
    manifest = _manifest(args)
    header = {"record": "header", "units": ANNEAL_UNITS}
    _write_records(_out_path(args.json_out), [manifest, header] + [rec for rec, _ in outputs])
    if args.trace_out:
        rows = [manifest, header]
        for rec, trace in outputs:
            rows += [{"record": "trace", "instance": rec["instance"], **t} for t in trace]
        _write_records(_out_path(args.trace_out), rows)
    failed = [rec for rec, _ in outputs if rec["success"] is False]
    return 0 if not failed or not args.fail_on_miss else 1


# sweep


def _grid(args) -> list[float]:
    if args.gammas:
        return [float(g) for g in args.gammas.split(",")]
    n = int(round((args.gamma_max - args.gamma_min) / args.gamma_step))
    return [round(args.gamma_max - k * args.gamma_step, 12) for k in range(n + 1)]


def cmd_sweep(args) -> int:
    inst = load(args.instance)
    track = []
    if args.track_configs:
        with open(args.track_configs, encoding="utf-8") as fh:
            track = [parse_config_id(line.split()[0]) for line in fh if line.strip() and not line.startswith("#")]
    opts = SweepOptions(
        policy=TruncationPolicy(eta=args.eta, m_max=args.m_max, m_min=args.m_min),
        sweeps=SolverOptions(max_sweeps=args.sweeps),
        compute_gap=not args.no_gap,
        compute_chi=not args.no_chi,
        probe_h=args.probe_h,
        probe_seed=args.probe_seed,
        h_break=args.h_break,
        break_site=args.break_site,
    )
    points = gamma_sweep(inst, _grid(args), opts, track=track)
    records = [_manifest(args), {"record": "header", "units": SWEEP_UNITS}]
    records += [{"record": "point", **p.to_record()} for p in points]
    records.append({"record": "summary", "gamma_gap_min": gap_minimum(points), "gamma_chi_max": chi_maximum(points)})
    _write_records(_out_path(args.out), records)
    return 1 if any(p.failed for p in points) else 0


# bench


def _corpus(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for p in map(Path, paths):
        files += sorted(q for q in p.iterdir() if q.is_file()) if p.is_dir() else [p]
    return files


def _oracle_job(job):
    path, oracle, sta_params = job
    return oracle_energy(load(path), oracle, sta_params)


def cmd_bench(args) -> int:
    files = _corpus(args.corpus)
    instances = [load(f) for f in files]
    sta_params = _sta_params(args)
    refs = _jobs_map(_oracle_job, [(f, args.oracle, sta_params) for f in files], args.jobs)
    rows = run_bench(instances, args.etas, _anneal_params(args), refs)
    manifest = _manifest(args)
    comments = [json.dumps(manifest, default=str), "work: sum of m_left*m_right*matvecs per anneal; wall: seconds, hardware dependent"]
    path = _out_path(args.out)
    if path is None:
        write_csv(rows, sys.stdout, comments)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            write_csv(rows, fh, comments)
    return 0


# oracle


def cmd_oracle(args) -> int:
    inst = load(args.instance)
    records = [_manifest(args), {"record": "header", "units": ORACLE_UNITS}]
    if args.method == "exact":
        e, winners = brute_force(inst)
        records += [{"record": "oracle", "method": "exact", "energy": e, "config": [int(s) for s in w]} for w in winners]
    elif args.method == "sta":
        params = _sta_params(args)
        if args.restarts > 1:
            e, config = robust_sta(inst, params, args.restarts)
        else:
            e, config = sta(inst, params)
        records.append({"record": "oracle", "method": "sta", "energy": e, "config": [int(s) for s in config], "steps": params.total_steps})
    else:
        params = _sta_params(args, default="weak")
        for e, config in sample_local_minima(inst, params, args.runs):
            records.append({"record": "oracle", "method": "minima", "energy": e, "config": [int(s) for s in config]})
    _write_records(_out_path(args.out), records)
    return 0


def _add_policy(p, eta=1e-8):
    p.add_argument("--eta", type=float, default=eta, help="discarded-weight tolerance per truncation")
    p.add_argument("--m-max", type=int, default=256, help="hard cap on bond dimension")
    p.add_argument("--m-min", type=int, default=2, help="floor on bond dimension")


def _add_sta(p):
    p.add_argument(
        "--preset", choices=tuple(STA_PRESETS), help="STA schedule preset (default: weak for 'oracle minima', robust otherwise)"
    )
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta-max", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--steps-per-beta", type=int)
    p.add_argument("--sta-seed", type=int, default=0)


def _add_anneal(p):
    _add_policy(p)
    p.add_argument("--gamma0", type=float, default=3.0)
    p.add_argument("--gamma-min", type=float, default=0.01)
    p.add_argument("--dgamma-cap", type=float, default=0.5)
    p.add_argument("--dgamma-coeff", type=float, default=0.1)
    p.add_argument("--h-break", type=float, default=1e-6)
    p.add_argument("--break-site", type=int, default=None, help="default: drawn from --break-seed")
    p.add_argument("--break-seed", type=int, default=0)
    p.add_argument("--sweeps", type=int, default=4, help="max DMRG sweeps per field step")
    p.add_argument("--first-sweeps", type=int, default=8, help="max DMRG sweeps at gamma0")
    p.add_argument(
        "--tracking",
        choices=TRACKING_MODES,
        default="parity",
        help="parity: symmetric state, field applied at gamma_min; biased: field on for the whole anneal",
    )
    p.add_argument("--oracle", choices=("none", "exact", "sta"), default="none")
    p.add_argument("--jobs", type=int, default=1, help="instances processed in parallel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwanneal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write random instances")
    p.add_argument("geometry", nargs="+", help="e.g. 'chain 20', 'ladder 40 2', 'random_regular 20 3'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("anneal", help="run the wavefunction anneal on instance files")
    p.add_argument("instances", nargs="+")
    _add_anneal(p)
    _add_sta(p)
    p.add_argument("--json-out", help="result records (JSON lines); default stdout")
    p.add_argument("--trace-out", help="per-step trace records (JSON lines)")
    p.add_argument("--checkpoint-dir", help="save the final MPS of each run here (.npz, chain order)")
    p.add_argument("--fail-on-miss", action="store_true", help="exit 1 when a run misses the oracle energy")
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("sweep", help="gap, entropy, chi_SG and amplitudes along a field grid")
    p.add_argument("instance")
    p.add_argument("--gammas", help="comma-separated decreasing list; overrides the range flags")
    p.add_argument("--gamma-max", type=float, default=2.0)
    p.add_argument("--gamma-min", type=float, default=0.1)
    p.add_argument("--gamma-step", type=float, default=0.1)
    _add_policy(p)
    p.add_argument("--sweeps", type=int, default=8)
    p.add_argument("--no-gap", action="store_true")
    p.add_argument("--no-chi", action="store_true")
    p.add_argument("--probe-h", type=float, default=1e-6)
    p.add_argument("--probe-seed", type=int, default=0)
    p.add_argument("--h-break", type=float, default=0.0, help="field on --break-site while tracking the ground state")
    p.add_argument("--break-site", type=int, default=0)
    p.add_argument("--track-configs", help="file with one '+-' configuration label per line")
    p.add_argument("--out", help="JSON lines output; default stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="success rate and cost table over a corpus")
    p.add_argument("corpus", nargs="+", help="instance files or directories")
    p.add_argument("--etas", type=float, nargs="+", default=[1e-8])
    _add_anneal(p)
    _add_sta(p)
    p.add_argument("--out", help="CSV output; default stdout")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="exact enumeration, robust STA, or local-minimum sampling")
    p.add_argument("instance")
    p.add_argument("method", choices=("exact", "sta", "minima"))
    _add_sta(p)
    p.add_argument("--restarts", type=int, default=4, help="independent STA runs, best kept")
    p.add_argument("--runs", type=int, default=20, help="runs for local-minimum sampling")
    p.add_argument("--out", help="JSON lines output; default stdout")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceError, OracleError, OrderingError, AnnealError, DMRGError, OSError) as exc:
        print(f"qwanneal: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"qwanneal: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
