"""Command-line front end.

Exit codes: 0 success, 1 error (including bad usage), 2 certification
failure under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .certificates import certify_lossy, certify_structure_preserving, certify_topology
from .control import TuneBounds, search_line_switching, stabilize
from .kron import check_assumption1, check_assumption2, kron_reduce
from .netmodel import Network, build_admittance, load_network, network_to_dict, params_from_list, params_to_list
from .pipeline import SweepConfig, summarize, sweep, to_csv
from .powerflow import Equilibrium, check_omega_region, solve_equilibrium
from .simulate import SwingSystem, assess_convergence, integrate
from .spectral import build_jacobian, build_laplacian, eigenvalues
from .synth import SynthConfig, diameter, generate_case

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_ERROR)


# -- io helpers ----------------------------------------------------------------

def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _emit(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def manifest(args, inputs: dict, t0: float) -> dict:
    # output destinations do not change results, so they stay out of the digest
    skip = {"func", "outputs", *args.outputs}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()
    return {
        "subcommand": args.command,
        "inputs": {k: v for k, v in inputs.items() if v},
        "config_digest": digest,
        "version": __version__,
        "wall_time_s": None if args.reproducible else round(time.perf_counter() - t0, 6),
    }


def _load_net(args):
    net, params = load_network(args.net)
    if getattr(args, "params", None):
        data = _read_json(args.params)
        items = data["interface"] if isinstance(data, dict) else data
        params = params_from_list(items)
    return net, params


def _require_params(params):
    if params is None:
        raise UsageError("interface parameters missing: pass --params or include 'interface' in the network file")
    return params


def _load_setpoints(args, params, n):
    if getattr(args, "setpoints", None):
        data = _read_json(args.setpoints)
        if isinstance(data, dict) and "p_set" in data:
            return np.asarray(data["p_set"], dtype=float)
        items = data["interface"] if isinstance(data, dict) else data
        return params_from_list(items).select(range(n)).p_set
    return _require_params(params).select(range(n)).p_set


def _load_equilibrium(path) -> Equilibrium:
    data = _read_json(path)
    return Equilibrium.from_angles(data["delta"], data.get("residual", 0.0), data.get("ref", 0))


def _ids(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()] if text else []


# -- subcommands -------------------------------------------------------------

def cmd_powerflow(args, t0):
    net, params = _load_net(args)
    p_set = _load_setpoints(args, params, net.n)
    Y = build_admittance(net)
    delta0 = _read_json(args.start)["delta"] if args.start else None
    eq = solve_equilibrium(Y, net.voltages, p_set, ref=args.ref, tol=args.tol, delta0=delta0)
    om = check_omega_region(Y, eq.delta)
    out = eq.to_dict() | om.to_dict()
    out["manifest"] = manifest(args, {"net": args.net, "setpoints": args.setpoints, "start": args.start}, t0)
    _emit(_dump(out), args.out)
    return EXIT_OK


def cmd_spectrum(args, t0):
    net, params = _load_net(args)
    params = _require_params(params).select(range(net.n))
    eq = _load_equilibrium(args.equilibrium)
    L = build_laplacian(build_admittance(net), net.voltages, eq.delta)
    eig = eigenvalues(build_jacobian(L, params.m, params.d))
    order = np.lexsort((eig.values.imag, eig.values.real))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im"])
    for lam in eig.values[order]:
        w.writerow([repr(float(lam.real)), repr(float(lam.imag))])
    _emit(buf.getvalue(), args.csv)
    out = eig.to_dict()
    out["manifest"] = manifest(args, {"net": args.net, "equilibrium": args.equilibrium, "params": args.params}, t0)
    if args.csv in (None, "-"):
        sys.stderr.write(_dump(out))
    if args.out:
        _emit(_dump(out), args.out)
    return EXIT_OK


def cmd_certify(args, t0):
    net, params = _load_net(args)
    params = _require_params(params)
    if args.structure_preserving:
        active = _ids(args.active) or net.active
        eq = _load_equilibrium(args.equilibrium)
        delta = eq.delta
        if len(delta) == net.n:
            delta = delta[active]
        rep = certify_structure_preserving(net, params, delta, args.nu_min, args.nu_max, active, args.margin)
    elif args.topology_only:
        eq = _load_equilibrium(args.equilibrium) if args.equilibrium else None
        rep = certify_topology(net, params, args.margin, eq)
    else:
        if not args.equilibrium:
            raise UsageError("--equilibrium is required unless --topology-only is given")
        rep = certify_lossy(net, _load_equilibrium(args.equilibrium), params, args.margin)
    out = rep.to_dict()
    out["manifest"] = manifest(args, {"net": args.net, "equilibrium": args.equilibrium, "params": args.params}, t0)
    _emit(_dump(out), args.out)
    sys.stderr.write(rep.table() + "\n")
    if args.strict and not rep.certified:
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_simulate(args, t0):
    net, params = _load_net(args)
    params = _require_params(params)
    p_set = _load_setpoints(args, params, net.n)
    sys_ = SwingSystem.from_network(net, params, p_set)
    init = _read_json(args.initial)
    delta0 = np.asarray(init["delta"], dtype=float)
    omega0 = np.asarray(init.get("omega", np.zeros(net.n)), dtype=float)
    traj = integrate(sys_, delta0, omega0, args.T, args.dt, store_every=args.store_every)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"delta_{i}" for i in range(net.n)] + [f"omega_{i}" for i in range(net.n)])
    for row in traj.to_rows():
        w.writerow([repr(float(x)) for x in row])
    _emit(buf.getvalue(), args.csv)
    out = {
        "classification": assess_convergence(traj, args.tol),
        "diverged": traj.diverged,
        "divergence_reason": traj.divergence_reason,
        "divergence_index": traj.divergence_index,
        "final_omega_inf": float(np.abs(traj.omega[-1]).max()),
        "manifest": manifest(args, {"net": args.net, "params": args.params, "initial": args.initial}, t0),
    }
    if args.out:
        _emit(_dump(out), args.out)
    else:
        sys.stderr.write(_dump(out))
    return EXIT_OK


def cmd_kron(args, t0):
    net, params = _load_net(args)
    passive = _ids(args.passive) if args.passive else net.passive
    Y = build_admittance(net)
    nu = (args.nu_min, args.nu_max) if args.check_assumptions else (None, None)
    Yr, trace = kron_reduce(Y, passive, *nu)
    kinds = [net.nodes[i].kind for i in trace.kept]
    red = Network.from_admittance(Yr, net.voltages[trace.kept], kinds, tol=1e-14 * np.abs(Yr).max())
    red_params = params.select([i for i in trace.kept if i in params.ids]) if params else None
    tr = trace.to_dict()
    if args.check_assumptions:
        tr["input_assumption1"] = check_assumption1(Y).ok
        tr["input_assumption2"] = check_assumption2(Y, args.nu_min, args.nu_max).ok
        tr["assumptions_hold"] = trace.assumptions_hold
    tr["monotone"] = trace.monotone
    m = manifest(args, {"net": args.net}, t0)
    net_doc = network_to_dict(red, None)
    net_doc["names"] = {str(j): f"node{i}" for j, i in enumerate(trace.kept)}
    if red_params is not None:
        items = params_to_list(red_params)
        remap = {i: j for j, i in enumerate(trace.kept)}
        for it in items:
            it["id"] = remap[it["id"]]
        net_doc["interface"] = items
    net_doc["manifest"] = m
    tr["manifest"] = m
    if args.out or args.trace:
        if args.out:
            _emit(_dump(net_doc), args.out)
        if args.trace:
            _emit(_dump(tr), args.trace)
    else:
        _emit(_dump({"network": net_doc, "trace": tr}), None)
    return EXIT_OK


def _bounds(path, n, margin):
    data = _read_json(path)
    get = lambda k: np.broadcast_to(np.asarray(data[k], dtype=float), (n,))
    return TuneBounds(get("d_min"), get("d_max"), get("m_min"), get("m_max"), margin)


def cmd_tune(args, t0):
    net, params = _load_net(args)
    params = _require_params(params).select(range(net.n))
    bounds = _bounds(args.bounds, net.n, args.margin) if args.bounds else TuneBounds.wide(net.n, args.margin)
    eq = _load_equilibrium(args.equilibrium)
    cur, lines = net, []
    log = []
    if args.allow_switching:
        sw = search_line_switching(net, params, args.budget, margin=args.margin, delta0=eq.delta)
        log.extend(sw.log)
        if sw.equilibrium is not None:
            eq, cur, lines = sw.equilibrium, sw.network, sw.lines_opened
    plan = stabilize(cur, eq, params, bounds)
    plan.lines_opened = lines
    plan.log = log + plan.log
    plan.equilibrium = eq
    out = plan.to_dict(range(net.n))
    out["manifest"] = manifest(args, {"net": args.net, "equilibrium": args.equilibrium,
                                      "params": args.params, "bounds": args.bounds}, t0)
    _emit(_dump(out), args.out)
    if args.strict and not plan.feasible:
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_synth(args, t0):
    kw = {}
    for name in ("b_range", "g_ratio", "v_range", "delta_range", "d_range", "m_range"):
        val = getattr(args, name)
        if val is not None:
            kw[name] = tuple(val)
    cfg = SynthConfig(n=args.n, seed=args.seed, avg_degree=args.avg_degree, **kw)
    case = generate_case(cfg)
    doc = network_to_dict(case.net, case.params)
    doc["manifest"] = manifest(args, {}, t0)
    _emit(_dump(doc), args.out)
    if args.equilibrium:
        Y = build_admittance(case.net)
        out = case.equilibrium.to_dict() | check_omega_region(Y, case.equilibrium.delta).to_dict()
        out["diameter"] = diameter(case.net)
        out["manifest"] = manifest(args, {}, t0)
        _emit(_dump(out), args.equilibrium)
    return EXIT_OK


def cmd_sweep(args, t0):
    cfg = SweepConfig(args.cases, args.seed, args.n, args.n_max, args.avg_degree, args.margin, args.jobs)
    results = sweep(cfg)
    _emit(to_csv(results), args.out)
    summary = summarize(results)
    if args.reproducible:
        summary.pop("max_seconds")
    summary["manifest"] = manifest(args, {}, t0)
    if args.summary:
        _emit(_dump(summary), args.summary)
    elif args.out not in (None, "-"):
        _emit(_dump(summary), None)
    else:
        sys.stderr.write(_dump(summary))
    if args.strict and summary["counterexamples"]:
        return EXIT_UNCERTIFIED
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mugrid", description="Small-signal stability certificates for multi-microgrid networks.")
    p.add_argument("--version", action="version", version=f"mugrid {__version__}")
    p.add_argument("--reproducible", action="store_true", help="omit wall time from manifests")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p.set_defaults(outputs=("out", "csv", "summary", "trace"))

    def common(sp, eq=False, params=True):
        sp.add_argument("--net", required=True, help="network JSON")
        if params:
            sp.add_argument("--params", help="interface JSON (defaults to the network file's 'interface')")
        if eq:
            sp.add_argument("--equilibrium", help="equilibrium JSON with 'delta'")
        sp.add_argument("--out", help="output path (default stdout)")

    sp = sub.add_parser("powerflow", help="solve the angle equilibrium")
    common(sp)
    sp.add_argument("--setpoints", help="JSON with 'p_set' or an interface list")
    sp.add_argument("--ref", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--start", help="JSON with a starting 'delta' (default flat start)")
    sp.set_defaults(func=cmd_powerflow)

    sp = sub.add_parser("spectrum", help="eigenvalues of the system Jacobian")
    common(sp, eq=True)
    sp.add_argument("--csv", help="CSV path for eigenvalues (default stdout)")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("certify", help="evaluate the stability certificate")
    common(sp, eq=True)
    sp.add_argument("--topology-only", action="store_true")
    sp.add_argument("--structure-preserving", action="store_true")
    sp.add_argument("--active", default="", help="comma-separated active node ids")
    sp.add_argument("--nu-min", type=float, default=5.0)
    sp.add_argument("--nu-max", type=float, default=7.14)
    sp.add_argument("--margin", type=float, default=0.0)
    sp.add_argument("--strict", action="store_true", help="exit 2 when not certified")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("simulate", help="integrate the swing equations")
    common(sp)
    sp.add_argument("--setpoints")
    sp.add_argument("--initial", required=True, help="JSON with 'delta' and optional 'omega'")
    sp.add_argument("--T", type=float, default=50.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--store-every", type=int, default=1)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--csv", help="trajectory CSV path (default stdout)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("kron", help="Kron-reduce passive nodes")
    common(sp)
    sp.add_argument("--passive", default="", help="comma-separated ids (default: nodes tagged passive)")
    sp.add_argument("--check-assumptions", action="store_true")
    sp.add_argument("--nu-min", type=float, default=5.0)
    sp.add_argument("--nu-max", type=float, default=7.14)
    sp.add_argument("--trace", help="trace JSON path")
    sp.set_defaults(func=cmd_kron)

    sp = sub.add_parser("tune", help="distributed retuning, optionally with line switching")
    common(sp, eq=True)
    sp.add_argument("--bounds", help="JSON with d_min, d_max, m_min, m_max (scalars or lists)")
    sp.add_argument("--margin", type=float, default=0.01)
    sp.add_argument("--allow-switching", action="store_true")
    sp.add_argument("--budget", type=int, default=2)
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("synth", help="generate a random network")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--avg-degree", type=float, default=4.0)
    for name in ("b-range", "g-ratio", "v-range", "delta-range", "d-range", "m-range"):
        sp.add_argument(f"--{name}", type=float, nargs=2, metavar=("LO", "HI"))
    sp.add_argument("--out", help="network JSON path (default stdout)")
    sp.add_argument("--equilibrium", help="also write the solved equilibrium here")
    sp.set_defaults(func=cmd_synth, outputs=("out", "equilibrium"))

    sp = sub.add_parser("sweep", help="generate/solve/tune/certify/eigen-check many cases")
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--n-max", type=int)
    sp.add_argument("--cases", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--avg-degree", type=float, default=4.0)
    sp.add_argument("--margin", type=float, default=0.01)
    sp.add_argument("--jobs", type=int, default=int(os.environ.get("MUGRID_JOBS", "1")))
    sp.add_argument("--out", help="aggregate CSV path (default stdout)")
    sp.add_argument("--summary", help="summary JSON path")
    sp.add_argument("--strict", action="store_true", help="exit 2 on any certified case failing the eigen-check")
    sp.set_defaults(func=cmd_sweep)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        return args.func(args, t0)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"mugrid: error: {exc}\n")
        return EXIT_ERROR
    except Exception as exc:
        sys.stderr.write(f"mugrid {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
