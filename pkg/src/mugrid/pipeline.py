"""Batch pipeline: generate -> solve -> tune -> certify -> eigen-check."""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .certificates import certify_lossy
from .control import TuneBounds, stabilize
from .netmodel import build_admittance
from .powerflow import check_omega_region
from .spectral import build_jacobian, build_laplacian, eigenvalues
from .synth import SynthConfig, diameter, generate_case

log = logging.getLogger(__name__)

COLUMNS = [
    "case", "seed", "n", "n_lines", "diameter", "in_omega", "certified_initial",
    "n_tuned", "certified", "lhp", "zero_count", "max_real_nonzero", "sound", "error",
]


@dataclass
class SweepConfig:
    cases: int
    seed: int = 0
    n: int = 50
    n_max: int | None = None  # when set, n is drawn uniformly from [n, n_max]
    avg_degree: float = 4.0
    margin: float = 0.01
    jobs: int = 1


@dataclass
class CaseResult:
    case: int
    seed: int
    n: int
    n_lines: int = 0
    diameter: int = 0
    in_omega: bool = False
    certified_initial: bool = False
    n_tuned: int = 0
    certified: bool = False
    lhp: bool = False
    zero_count: int = 0
    max_real_nonzero: float = float("nan")
    sound: bool = True
    error: str = ""
    seconds: float = 0.0


def case_seed(seed: int, case: int) -> int:
    return int(np.random.SeedSequence([seed, case]).generate_state(1, dtype=np.uint64)[0] >> 1)


def run_case(cfg: SweepConfig, case: int) -> CaseResult:
    t0 = time.perf_counter()
    s = case_seed(cfg.seed, case)
    n = cfg.n
    if cfg.n_max is not None:
        n = int(np.random.default_rng(s).integers(cfg.n, cfg.n_max + 1))
    res = CaseResult(case, s, n)
    try:
        c = generate_case(SynthConfig(n=n, seed=s, avg_degree=cfg.avg_degree))
        net, eq = c.net, c.equilibrium
        res.n_lines = len(net.lines)
        res.diameter = diameter(net)
        Y = build_admittance(net)
        res.in_omega = check_omega_region(Y, eq.delta).in_region
        res.certified_initial = certify_lossy(net, eq, c.params).certified
        plan = stabilize(net, eq, c.params, TuneBounds.wide(n, cfg.margin))
        res.n_tuned = len(plan.changed)
        res.certified = plan.report.certified
        L = build_laplacian(Y, net.voltages, eq.delta)
        eig = eigenvalues(build_jacobian(L, plan.m, plan.d))
        res.lhp = eig.lhp
        res.zero_count = eig.zero_count
        res.max_real_nonzero = eig.max_real_nonzero
        res.sound = (not res.certified) or (eig.lhp and eig.zero_count == 1)
    except Exception as exc:  # per-case failures are recorded, the sweep goes on
        log.warning("case %d failed: %s", case, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    res.seconds = time.perf_counter() - t0
    return res


def _run(args):
    return run_case(*args)


def sweep(cfg: SweepConfig) -> list[CaseResult]:
    work = [(cfg, i) for i in range(cfg.cases)]
    if cfg.jobs > 1 and cfg.cases > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_run, work))
    else:
        results = [_run(w) for w in work]
    return sorted(results, key=lambda r: r.case)


def summarize(results: list[CaseResult]) -> dict:
    ok = [r for r in results if not r.error]
    cert = [r for r in ok if r.certified]
    return {
        "cases": len(results),
        "errors": len(results) - len(ok),
        "in_omega": sum(r.in_omega for r in ok),
        "certified_initial": sum(r.certified_initial for r in ok),
        "certified": len(cert),
        "certified_lhp": sum(r.lhp and r.zero_count == 1 for r in cert),
        "counterexamples": sum(not r.sound for r in ok),
        "max_seconds": max((r.seconds for r in results), default=0.0),
    }


def to_csv(results: list[CaseResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in results:
        d = asdict(r)
        row = []
        for c in COLUMNS:
            v = d[c]
            if isinstance(v, bool):
                v = int(v)
            elif isinstance(v, float):
                v = repr(v)
            row.append(v)
        w.writerow(row)
    return buf.getvalue()
