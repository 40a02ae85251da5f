"""Command line front end.

Every subcommand writes one record per result, as JSON lines or CSV, and
each record carries the tolerance it was checked against and a ``pass``
flag.  Exit status: 0 when every record passes, 1 when some invariant
fails, 2 for usage or precondition errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bellman as bm
from .core import DomainError, MalformedInputError, ProbTree, StepFunction, read_step_csv, write_step_csv
from .extremal import lemma41_residual, sharpness_sequence, solve_extremal_g, vu_functionals
from .fuzz import default_seed, fuzz_corpus, random_spec
from .maximal import doob_ratio, weak_type_levels
from .symmetrize import (FunctionalSpec, Identity, Power, PowerOfMax, brute_force_sup,
                         extremizer_sweep, rhs_integral)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_TOL = {
    "omega": 1e-12,
    "bellman": 1e-12,
    "extremal-g": 1e-9,
    "verify-lemma41": 1e-8,
    "verify-weaktype": 1e-12,
    "verify-doob": 1e-12,
    "bruteforce": 1e-9,
    "extremizer-sweep": 1e-3,
    "sharpness": 1e-6,
}


class UsageError(Exception):
    pass


def _workers(n):
    return n if n and n > 0 else (os.cpu_count() or 1)


def _pmap(fn, items, workers):
    """Order-stable map over a thread pool."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _clean(x):
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


# --------------------------------------------------------------------------
# Subcommands; each returns a list of records
# --------------------------------------------------------------------------

def cmd_omega(args, tol):
    z = bm.omega(args.p, args.b)
    resid = abs(bm.hp(args.p, z) - args.b)
    return [dict(p=args.p, b=args.b, value=z, residual=resid, tol=tol, passed=resid <= tol)]


def cmd_bellman(args, tol):
    if args.L is None:
        value = bm.bellman2(args.p, args.f, args.F)
        return [dict(p=args.p, f=args.f, F=args.F, value=value, tol=tol, passed=True)]
    value = bm.bellman3(args.p, args.f, args.F, args.L)
    pt = bm.BellmanPoint(args.p, args.f, args.F, args.L)
    branch = "power-law" if args.L < pt.L0 else "linear"
    return [dict(p=args.p, f=args.f, F=args.F, L=args.L, L0=pt.L0, branch=branch, value=value,
                 tol=tol, passed=True)]


def cmd_extremal_g(args, tol):
    g = solve_extremal_g(args.p, args.f, args.F, args.L, rtol=tol)
    v, _ = vu_functionals(g, args.p, args.L)
    target = bm.bellman3(args.p, args.f, args.F, args.L)
    err = abs(v - target) / target
    if args.write_g:
        write_step_csv(g.to_step(tail_tol=args.tail_tol), args.write_g)
    return [dict(p=args.p, f=args.f, F=args.F, L=args.L, b=g.b, c=g.c, gamma=g.gamma, K=g.K,
                 v_g=v, bellman3=target, rel_err=err, tol=tol, passed=err <= tol)]


def _lemma41_record(g, p, L, tol, index=None):
    v, _ = vu_functionals(g, p, L)
    r = lemma41_residual(g, p, L)
    rel = abs(r) / v if v else abs(r)
    rec = dict(p=p, L=L, f=g.integral(), v_g=v, residual=r, rel_residual=rel, tol=tol,
               passed=rel <= tol)
    return rec if index is None else {"index": index, **rec}


def cmd_verify_lemma41(args, tol):
    if args.g:
        g = read_step_csv(args.g)
        return [_lemma41_record(g, args.p, args.L if args.L is not None else g.integral(), tol)]
    levels = (1.0, 1.7, 3.0) if args.L_factor is None else (args.L_factor,)
    insts = list(fuzz_corpus(args.seed, args.count))

    def one(inst):
        g = inst.step
        return [_lemma41_record(g, args.p, lf * g.integral(), tol, inst.index) for lf in levels]

    return [r for rs in _pmap(one, insts, args.workers) for r in rs]


def cmd_verify_weaktype(args, tol):
    def one(inst):
        lam, level, bound = weak_type_levels(inst.tree, inst.phi)
        bad = int(np.sum(level > bound * (1 + tol)))
        return dict(index=inst.index, n_leaves=inst.tree.n_leaves, levels_checked=int(lam.size),
                    max_ratio=float(np.max(level / bound)), violations=bad, tol=tol,
                    passed=bad == 0)

    return _pmap(one, fuzz_corpus(args.seed, args.count), args.workers)


def cmd_verify_doob(args, tol):
    def one(inst):
        r = doob_ratio(inst.tree, inst.phi, args.p)
        return dict(index=inst.index, p=args.p, ratio=r, tol=tol, passed=r <= 1 + tol)

    return _pmap(one, fuzz_corpus(args.seed, args.count), args.workers)


def cmd_bruteforce(args, tol):
    n = args.n
    arity, depth = _uniform_shape(n)
    tree = ProbTree.uniform(arity, depth)
    if args.g:
        g = read_step_csv(args.g)
        jobs = [(0, g, _spec_from_args(args), args.k)]
    else:
        rng = np.random.default_rng(args.seed)
        jobs = []
        for i in range(args.count):
            vals = np.sort(np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n)))[::-1]
            g = StepFunction(np.full(n, 1.0 / n), vals)
            jobs.append((i, g, random_spec(rng, scale=float(np.median(vals))),
                         float(rng.uniform(0.05, 1.0))))

    def one(job):
        i, g, spec, k = job
        value, arg = brute_force_sup(g, tree, spec, k)
        rhs = rhs_integral(g, spec, k)
        ok = value <= rhs + tol * max(1.0, abs(rhs))
        return dict(index=i, n=n, k=k, spec=repr(spec), sup=value, rhs=rhs,
                    assignment=json.dumps(arg), tol=tol, passed=ok)

    return _pmap(one, jobs, args.workers)


def _uniform_shape(n):
    for arity in (2, 3, 4, 5, 6, 7, 8, 9, 10):
        depth = round(math.log(n) / math.log(arity))
        if depth >= 1 and arity ** depth == n:
            return arity, depth
    raise UsageError(f"n={n} is not a power of an arity in 2..10")


def _spec_from_args(args):
    kind = args.spec
    if kind == "power":
        return FunctionalSpec(Power(args.q))
    if kind == "power-max":
        return FunctionalSpec(PowerOfMax(args.q, args.L))
    if kind == "power-max-id":
        return FunctionalSpec(PowerOfMax(args.q, args.L), Identity())
    raise UsageError(f"unknown spec {kind!r}")


def cmd_extremizer_sweep(args, tol):
    g = read_step_csv(args.g) if args.g else StepFunction([0.5, 0.5], [2.0, 1.0])
    if args.spec in ("power-max", "power-max-id") and args.L is None:
        raise UsageError("--L is required for power-max specs")
    recs = extremizer_sweep(g, _spec_from_args(args), args.a, args.tail_tol)
    out = []
    prev = math.inf
    for r in recs:
        ok = r.rel_gap <= prev + tol and r.lower_bound <= r.rhs * (1 + 1e-9)
        prev = r.rel_gap
        out.append(dict(a=r.a, M_trunc=r.levels, lower_bound=r.lower_bound, rhs=r.rhs,
                        rel_gap=r.rel_gap, tol=tol, passed=ok))
    return out


def cmd_sharpness(args, tol):
    seq = sharpness_sequence(args.p, args.f, args.F, args.L, args.n_terms)
    out, prev = [], -math.inf
    for t in seq.terms:
        ok = t.v_gn >= prev - tol and t.v_gn <= t.target * (1 + 1e-12)
        prev = t.v_gn
        out.append(dict(n=t.n, L_n=t.L_n, b_n=t.b_n, c_n=t.c_n, gamma_n=t.gamma_n, v_gn=t.v_gn,
                        target=t.target, rel_gap=t.rel_gap, tol=tol, passed=ok))
    return out


COMMANDS = {
    "omega": cmd_omega,
    "bellman": cmd_bellman,
    "extremal-g": cmd_extremal_g,
    "verify-lemma41": cmd_verify_lemma41,
    "verify-weaktype": cmd_verify_weaktype,
    "verify-doob": cmd_verify_doob,
    "bruteforce": cmd_bruteforce,
    "extremizer-sweep": cmd_extremizer_sweep,
    "sharpness": cmd_sharpness,
}


# --------------------------------------------------------------------------
# Parsing and output
# --------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    common.add_argument("--output", "-o", help="write records here instead of stdout")
    common.add_argument("--tol", type=float, help="override the default tolerance")
    common.add_argument("--seed", type=int, default=None,
                        help="fuzz seed (default: $DYADIC_BELLMAN_SEED or a fixed constant)")
    common.add_argument("--workers", type=int, default=0, help="worker threads (0: all cores)")

    parser = argparse.ArgumentParser(prog="dyadic-bellman", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    s = add("omega", "invert H_p")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--b", type=float, required=True)

    s = add("bellman", "two- or three-variable Bellman function")
    for name in ("p", "f", "F"):
        s.add_argument(f"--{name}", type=float, required=True)
    s.add_argument("--L", type=float)

    s = add("extremal-g", "power-law extremal below L0")
    for name in ("p", "f", "F", "L"):
        s.add_argument(f"--{name}", type=float, required=True)
    s.add_argument("--write-g", help="also write a step discretization to this CSV")
    s.add_argument("--tail-tol", type=float, default=1e-6)

    s = add("verify-lemma41", "v_g(L) identity on a CSV step function or the fuzz corpus")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--L", type=float)
    s.add_argument("--g", help="step function CSV (length,value)")
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--L-factor", type=float, help="fuzz mode: test only L = factor * mean")

    s = add("verify-weaktype", "weak (1,1) inequality on the fuzz corpus")
    s.add_argument("--count", type=int, default=100)

    s = add("verify-doob", "Doob's inequality on the fuzz corpus")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--count", type=int, default=100)

    s = add("bruteforce", "exhaustive supremum versus the Hardy-average integral")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--g", help="step function CSV with n equal pieces")
    s.add_argument("--spec", choices=("power", "power-max", "power-max-id"), default="power")
    s.add_argument("--q", type=float, default=2.0)
    s.add_argument("--L", type=float, default=1.0)
    s.add_argument("--k", type=float, default=1.0)

    s = add("extremizer-sweep", "chain-tree lower bounds as a decreases")
    s.add_argument("--g", help="step function CSV (default: values 2, 1 on halves)")
    s.add_argument("--spec", choices=("power", "power-max", "power-max-id"), default="power")
    s.add_argument("--q", type=float, default=2.0)
    s.add_argument("--L", type=float)
    s.add_argument("--a", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.01])
    s.add_argument("--tail-tol", type=float, default=1e-6)

    s = add("sharpness", "approach to the linear branch above L0")
    for name in ("p", "f", "F", "L"):
        s.add_argument(f"--{name}", type=float, required=True)
    s.add_argument("--n-terms", type=int, default=20)
    return parser


def emit(records, fmt, stream):
    records = [{k: _clean(v) for k, v in r.items()} for r in records]
    if fmt == "jsonl":
        for r in records:
            stream.write(json.dumps(r) + "\n")
        return
    if not records:
        return
    w = csv.DictWriter(stream, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def run(argv=None, stdout=None, stderr=None):
    """Parse ``argv``, dispatch, emit records; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.seed is None:
        args.seed = default_seed()
    args.workers = _workers(args.workers)
    tol = DEFAULT_TOL[args.command] if args.tol is None else args.tol
    if getattr(args, "count", 1) < 1:
        stderr.write("error: --count must be at least 1\n")
        return EXIT_USAGE
    try:
        records = COMMANDS[args.command](args, tol)
    except (DomainError, MalformedInputError, UsageError, FileNotFoundError) as exc:
        stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_USAGE
    buf = io.StringIO()
    emit(records, args.format, buf)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        stdout.write(buf.getvalue())
    return EXIT_OK if all(r["passed"] for r in records) else EXIT_FAIL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
