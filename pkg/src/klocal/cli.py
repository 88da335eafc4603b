"""Command line entry point.

Exit status: 0 on success, 2 when a reference comparison fails, 1 on error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .combinatorics import from_bits
from .hamiltonian import build_HC, build_Hk, normalize_HC
from .instances import dimacs_format, dimacs_read, dimacs_write, generate_F, generate_Ff, generate_Fs, surviving_assignments
from .search import KLocalOracle, classical_local_search, solve_max_kssat
from .simulator import AdiabaticParams, SearchParams, find_first_local_max, find_min_threshold_steps, run_aqs, run_qs
from .spectral import gap_scaling_fit

EXIT_DIFF = 2


def _ints(s: str) -> tuple[int, ...]:
    out = []
    for part in s.split(","):
        if "-" in part.strip()[1:]:
            lo, hi = part.split("-")
            out += range(int(lo), int(hi) + 1)
        else:
            out.append(int(part))
    return tuple(out)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(","))


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=_ints, help="variable count; lists like 10,12 or ranges 10-20")
    common.add_argument("--k", type=int)
    common.add_argument("--m", help="clause count: an integer, or n / n^2 scaled by --c")
    common.add_argument("--c", type=_floats, help="clause density multipliers")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--theta", type=float)
    common.add_argument("--threshold", type=float)
    common.add_argument("--steps", type=int, help="fixed iteration count")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    common.add_argument("--jobs", type=int)
    common.add_argument("--config", help="key = value file with experiment fields")
    common.add_argument("--instance", help="DIMACS file to use instead of a generated formula")
    common.add_argument("--model", choices=("F", "Ff", "Fs"), default="Fs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="klocal", description="k-local quantum search experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("generate", "write a random formula as DIMACS"),
        ("simulate-qs", "k-local search iterations on H_k or a formula"),
        ("simulate-aqs", "Trotterized adiabatic search on H_k or a formula"),
        ("gap", "spectral gap of H_B,k + H_k and its scaling with n"),
        ("classical", "classical k-local search on random targets"),
        ("solve", "adiabatic search with Grover fallback on a formula"),
        ("table1", "first local maxima of k-local search against reference values"),
        ("table2", "adiabatic 99% schedule lengths against reference values"),
        ("density-sweep", "success probability over random satisfiable formulas"),
        ("concentration", "coverage of normalized eigenvalue deviations"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if name == "density-sweep":
            sp.add_argument("--variant", choices=("qs", "aqs"), default="aqs")
    return p


def _config(args, kind: str, **defaults) -> harness.ExperimentConfig:
    fields = dict(defaults)
    if args.config:
        fields.update(harness.parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    fields["kind"] = kind
    flag_map = {"n": "n_list", "k": "k", "m": "m_spec", "c": "c_list", "seed": "seed", "trials": "instance_count",
                "theta": "theta", "out": "out_dir", "jobs": "jobs", "steps": "steps"}
    for flag, key in flag_map.items():
        val = getattr(args, flag)
        if val is not None:
            fields[key] = val
    if args.threshold is not None:
        fields["thresholds"] = (args.threshold,)
    return harness.ExperimentConfig(**fields)


def _first(cfg) -> int:
    return cfg.n_list[0]


def _instance(args, cfg) -> "object":
    if args.instance:
        return dimacs_read(args.instance)
    n = _first(cfg)
    m = cfg.resolve_m(n, cfg.c_list[0])
    gen = {"F": generate_F, "Ff": generate_Ff, "Fs": generate_Fs}[args.model]
    return gen(n, m, cfg.k, cfg.seed)


def _emit(recs, args, cfg, name):
    if args.out is not None:
        path = harness.emit_outputs(recs, args.format, cfg.out_dir, name)
        print(f"wrote {path}")


def _table(args, kind):
    if kind == "table1":
        cfg = _config(args, kind, n_list=tuple(range(10, 21)))
        recs, rows = harness.run_table1(cfg, ks=(cfg.k,) if args.k else (1, 2, 3))
        check = harness.check_table1(rows)
        print(harness.render_table(rows, "p"))
    else:
        cfg = _config(args, kind, n_list=tuple(range(10, 21)))
        recs, rows = harness.run_table2(cfg)
        check = harness.check_table2(rows, threshold=cfg.thresholds[0])
        print(harness.render_table(rows, "T"))
    print(f"exact {check.exact}/{check.total}")
    for msg in check.messages:
        print("DIFF", msg)
    _emit(recs, args, cfg, kind)
    return 0 if check.ok else EXIT_DIFF


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cmd = args.command

    if cmd in ("table1", "table2"):
        return _table(args, cmd)

    if cmd == "generate":
        cfg = _config(args, "solve", instance_count=1)
        inst = _instance(args, cfg)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            path = Path(args.out) / f"{args.model}_n{inst.n}_m{inst.m}_k{inst.k}_s{cfg.seed}.cnf"
            dimacs_write(inst, path)
            print(f"wrote {path}")
        else:
            sys.stdout.write(dimacs_format(inst))
        return 0

    if cmd in ("simulate-qs", "simulate-aqs"):
        cfg = _config(args, "solve", instance_count=1)
        if args.instance or args.m:
            inst = _instance(args, cfg)
            n, k = inst.n, inst.k
            H = normalize_HC(build_HC(inst), inst.m, k)
            target = surviving_assignments(inst)
        else:
            n, k = _first(cfg), cfg.k
            H, target = build_Hk(n, k, 0), 0
        if cmd == "simulate-qs":
            if cfg.steps is None:
                lm = find_first_local_max(n, k, H, cfg.theta, target)
                print(json.dumps({"n": n, "k": k, "first_local_max": lm.p, "prob": lm.prob}))
            else:
                traj = run_qs(n, k, H, SearchParams(cfg.theta, cfg.steps), target)
                print(json.dumps({"n": n, "k": k, "trajectory": traj.tolist()}))
        else:
            if cfg.steps is None:
                lm = find_min_threshold_steps(n, k, H, cfg.thresholds[0], target)
                print(json.dumps({"n": n, "k": k, "T": lm.p, "prob": lm.prob}))
            else:
                print(json.dumps({"n": n, "k": k, "T": cfg.steps, "prob": run_aqs(n, k, H, AdiabaticParams(cfg.steps), target)}))
        return 0

    if cmd == "gap":
        cfg = _config(args, "gapscan", n_list=(8, 10, 12, 14, 16))
        fit = gap_scaling_fit(cfg.k, cfg.n_list)
        for n, g in zip(fit.ns, fit.gaps):
            print(f"n={n} gap={g:.6f}")
        print(f"slope={fit.slope:.4f}")
        return 0

    if cmd == "classical":
        cfg = _config(args, "solve", n_list=(64,), instance_count=1000)
        n, k = _first(cfg), cfg.k
        found, calls = 0, []
        for i in range(cfg.instance_count):
            rng = harness.cell_rng(cfg.seed, n, 0, i)
            target = from_bits(rng.integers(0, 2, size=n))
            oracle = KLocalOracle(n, k, target)
            found += classical_local_search(oracle, n, k, rng) == target
            calls.append(oracle.calls)
        print(json.dumps({"n": n, "k": k, "trials": cfg.instance_count, "found": found, "max_calls": max(calls)}))
        return 0

    if cmd == "solve":
        cfg = _config(args, "solve", instance_count=1)
        if args.instance:
            inst = dimacs_read(args.instance)
            out = solve_max_kssat(inst, cfg.seed, shots=cfg.shots)
            print(json.dumps(out._asdict()))
            return 0 if out.satisfied else 1
        recs = harness.run_sweep(cfg)
        sat = [r.value for r in recs if r.metric == "satisfied"]
        aqs = [r.value for r in recs if r.metric == "aqs_success"]
        print(json.dumps({"instances": len(sat), "satisfied": int(sum(sat)), "aqs_success": int(sum(aqs))}))
        _emit(recs, args, cfg, "solve")
        return 0

    if cmd == "density-sweep":
        kind = "fig_qs_density" if args.variant == "qs" else "fig_aqs_density"
        defaults = dict(n_list=(12, 14), m_spec="n^2", c_list=(1, 2, 4)) if kind == "fig_qs_density" else \
            dict(n_list=(16,), m_spec="n", c_list=(2.5, 4, 5, 7, 10))
        cfg = _config(args, kind, **defaults)
        recs = harness.run_density_sweep(cfg)
        for (n, m), s in harness.summarize(recs).items():
            print(f"n={n} m={m} median={s.median:.4f} q1={s.q1:.4f} q3={s.q3:.4f} count={s.count}")
        _emit(recs, args, cfg, kind)
        return 0

    if cmd == "concentration":
        cfg = _config(args, "concentration", n_list=(10,), m_spec="10000", instance_count=200)
        recs = harness.run_concentration(cfg)
        for name, v in harness.pooled_coverage(recs).items():
            c = float(name.split("_c")[1])
            print(f"{name}={v:.4f} erf={harness.erf_target(c):.4f}")
        _emit(recs, args, cfg, "concentration")
        return 0
    raise AssertionError(cmd)


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
