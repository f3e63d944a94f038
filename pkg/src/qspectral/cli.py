"""Command line for distribution tables, spectra, gf values,
moments, simulation summaries and cross-method comparison reports.

Exit codes: 0 success, 2 invalid flags, 3 numerical failure, 4 comparison
discrepancy above 1e-7.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import poisson

from . import __version__
from . import finite_capacity as fc
from . import oracles
from . import transient_inf as ti
from .errors import ConvergenceError, DomainError, QSpectralError
from .spectral_core import QueueParams, mminf_spectral_measure

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DISCREPANCY = 0, 2, 3, 4
DISCREPANCY_LIMIT = 1e-7
MAX_SUPPORT = 100_000

PMF_LAWS = ("nt", "dt", "nu", "d", "kt", "arrivals")
PMF_METHODS = {
    "nt": ("closed_form", "spectral"),
    "dt": ("closed_form", "gf"),
    "nu": ("spectral", "kummer"),
    "d": ("spectral",),
    "kt": ("closed_form",),
    "arrivals": ("closed_form",),
}
GF_LAWS = ("kappa", "d", "kappa-c", "delta-c")
COMPARE_LAWS = ("nt", "dt", "nu", "d", "nu-c", "nt-c")
NEEDS_T = {"nt", "dt", "kt", "nt-c"}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunSpec:
    command: str
    params: QueueParams
    law: Optional[str] = None
    t: Optional[float] = None
    kmax: Optional[int] = None
    tol: float = 1e-12
    seed: Optional[int] = None
    replications: Optional[int] = None
    fmt: str = "json"
    output: Optional[str] = None
    method: Optional[str] = None
    z: tuple = ()
    mode: str = "observer"
    kind: str = "psi"


@dataclass
class ComparisonRow:
    outcome: int
    spectral: float
    closed_form: Optional[float] = None
    oracle: Optional[float] = None
    simulation: Optional[float] = None
    stderr: Optional[float] = None
    discrepancy: float = field(init=False, default=0.0)
    analytic_discrepancy: float = field(init=False, default=0.0)

    def __post_init__(self):
        analytic = [v for v in (self.spectral, self.closed_form, self.oracle) if v is not None]
        every = analytic + ([self.simulation] if self.simulation is not None else [])
        self.analytic_discrepancy = max(analytic) - min(analytic)
        self.discrepancy = max(every) - min(every)


# -- serialisation ---------------------------------------------------------------


def _fmt(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return "%.17g" % x


def to_json(obj, indent=0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{to_json(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj)!r}")


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (_fmt(v) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


# -- support selection -------------------------------------------------------


def _auto_support(tail, tol, start=1):
    k = start
    while tail(k) >= tol:
        k += 1
        if k > MAX_SUPPORT:
            raise ConvergenceError(f"support did not reach tail < {tol:g} by k={MAX_SUPPORT}")
    return k


def _tail_fn(law, p: QueueParams, t):
    """Certified upper bound on P(X > k) for each law."""
    rho, sigma = p.rho, p.sigma
    if law == "nt":
        return lambda k: float(poisson.sf(k, -rho * math.expm1(-t)))
    if law == "dt":
        return lambda k: float(poisson.sf(k, max(rho * (t + math.expm1(-t)), 0.0)))
    if law == "nu":  # nu is stochastically below Poisson(rho)
        return lambda k: float(poisson.sf(k, rho))
    if law in ("d", "arrivals"):  # d <= a, a geometric
        return lambda k: (rho / (rho + sigma)) ** (k + 1)
    if law == "kt":
        a, b = -rho * math.expm1(-t), max(rho * (t + math.expm1(-t)), 0.0)

        def kt_tail(k):
            j = max(k - 1, 0) // 3
            return float(poisson.sf(j, a) + poisson.sf(j, b))

        return kt_tail
    raise DomainError(law)


def _support(spec: RunSpec, law):
    p = spec.params
    if law in ("nu-c", "nt-c"):
        return p.capacity, 0.0
    base = {"nt-c": "nt", "nu-c": "nu"}.get(law, law)
    tail = _tail_fn(base, p, spec.t)
    kmax = spec.kmax if spec.kmax is not None else _auto_support(tail, spec.tol)
    return kmax, tail(kmax)


# -- commands ------------------------------------------------------------------


def _params_json(spec: RunSpec):
    out = {"rho": spec.params.rho, "sigma": spec.params.sigma}
    if spec.params.capacity is not None:
        out["c"] = spec.params.capacity
    if spec.t is not None:
        out["t"] = spec.t
    return out


def _envelope(spec: RunSpec, method, support, values, tail_bound, **extra):
    out = {
        "command": spec.command if spec.law is None else f"{spec.command} {spec.law}",
        "params": _params_json(spec),
        ("methods" if isinstance(method, list) else "method"): method,
        "support": support,
        "values": values,
        "tail_bound": tail_bound,
        "tol": spec.tol,
    }
    if spec.seed is not None:
        out["seed"] = spec.seed
    out.update(extra)
    out["version"] = __version__
    return out


def pmf_values(spec: RunSpec):
    p, law, t = spec.params, spec.law, spec.t
    method = spec.method or PMF_METHODS[law][0]
    if p.capacity is not None:
        if law == "nu":
            return "spectral", list(range(p.capacity + 1)), fc.nu_c_values(p), 0.0
        if law == "nt":
            return "spectral", list(range(p.capacity + 1)), fc.nt_c_values(p.capacity, p.rho, t), 0.0
    kmax, tail = _support(spec, law)
    if law == "nt":
        vals = ti.nt_values(kmax, p.rho, t, method)
    elif law == "dt":
        vals = ti.dt_values(kmax, p.rho, t, method)
    elif law == "nu":
        vals = ti.nu_values(kmax, p, method)
    elif law == "d":
        vals = ti.d_values(kmax, p)
    elif law == "kt":
        vals = ti.kt_values(kmax, p.rho, t)
    else:
        vals = np.array([ti.arrivals_pmf(m, p) for m in range(kmax + 1)])
    return method, list(range(kmax + 1)), vals, tail


def cmd_pmf(spec: RunSpec):
    method, support, vals, tail = pmf_values(spec)
    if spec.fmt == "csv":
        return to_csv(["k", "probability"], zip(support, map(float, vals)))
    return to_json(_envelope(spec, method, support, [float(v) for v in vals], tail))


def cmd_spectrum(spec: RunSpec):
    p = spec.params
    if p.capacity is None:
        m = mminf_spectral_measure(p, tol=min(spec.tol, 1e-12))
        loc, mass, tail, method = m.locations, m.masses, m.tail_bound, "psi"
    elif spec.kind == "phi":
        s = fc.finite_spectrum_phi(p.capacity, p.rho)
        loc, mass, tail, method = s.eigenvalues, s.masses, 0.0, "phi_c"
    else:
        s = fc.finite_spectrum_psi(p)
        loc, mass, tail, method = s.eigenvalues, s.masses, 0.0, "psi_c"
    if spec.fmt == "csv":
        return to_csv(["location", "mass"], zip(map(float, loc), map(float, mass)))
    values = {"locations": [float(x) for x in loc], "masses": [float(x) for x in mass]}
    return to_json(_envelope(spec, method, len(loc), values, tail))


def cmd_gf(spec: RunSpec):
    p = spec.params
    fn = {
        "kappa": lambda z: ti.kappa_gf(z, p),
        "d": lambda z: ti.d_gf(z, p),
        "kappa-c": lambda z: fc.kappa_c_gf(z, p),
        "delta-c": lambda z: fc.delta_c_gf(z, p),
    }[spec.law]
    vals = [float(fn(z)) for z in spec.z]
    if spec.fmt == "csv":
        return to_csv(["z", "value"], zip(spec.z, vals))
    return to_json(_envelope(spec, "series" if spec.law in ("kappa", "d") else "spectral", list(spec.z), vals, 0.0))


def cmd_moments(spec: RunSpec):
    m = ti.exact_means(spec.params, spec.t)
    values = {"E_a": m.arrivals.mean, "E_nu": m.nu.mean, "E_d": m.departures.mean, "E_kappa": m.kappa.mean}
    if m.kt is not None:
        values["E_K_t"] = m.kt.mean
    if spec.fmt == "csv":
        return to_csv(["quantity", "value"], values.items())
    return to_json(_envelope(spec, "closed_form", list(values), values, 0.0))


def _simulate(spec: RunSpec, mode):
    cfg = oracles.SimConfig(spec.params, spec.replications, spec.seed or 0, mode, spec.t)
    if mode == oracles.FIXED_T:
        return oracles.simulate_fixed_t(cfg)
    return oracles.simulate_observer(cfg)


def cmd_simulate(spec: RunSpec):
    law = _simulate(spec, spec.mode)
    if spec.fmt == "csv":
        rows = []
        for name in law.names:
            for k, cnt in enumerate(law.marginal_counts(name)):
                if cnt:
                    rows.append((name, k, int(cnt), cnt / law.replications))
        return to_csv(["variable", "outcome", "count", "frequency"], rows)
    values = {
        name: {
            "mean": law.mean(name),
            "stderr": law.stderr(name),
            "counts": [int(c) for c in law.marginal_counts(name)],
        }
        for name in law.names
    }
    return to_json(_envelope(spec, "simulation", law.replications, values, 0.0, replications=law.replications))


def compare_rows(spec: RunSpec):
    p, law, t = spec.params, spec.law, spec.t
    kmax, tail = _support(spec, law)
    ks = np.arange(kmax + 1)

    def pad(v):
        out = np.zeros(kmax + 1)
        n = min(len(v), kmax + 1)
        out[:n] = np.asarray(v)[:n]
        return out

    closed = None
    if law == "nt":
        spectral = ti.nt_values(kmax, p.rho, t, "spectral")
        closed = ti.nt_values(kmax, p.rho, t, "closed_form")
        oracle = pad(oracles.nt_oracle(p.rho, t))
    elif law == "dt":
        spectral = ti.dt_values(kmax, p.rho, t, "gf")
        closed = ti.dt_values(kmax, p.rho, t, "closed_form")
        oracle = pad(oracles.fixed_t_joint(p.rho, t, kmax).sum(axis=0))
    elif law == "nu":
        spectral = ti.nu_values(kmax, p, "spectral")
        oracle = pad(oracles.nu_oracle(p, kmax))
    elif law == "d":
        spectral = ti.d_values(kmax, p)
        oracle = oracles.d_oracle(p, kmax)
    elif law == "nu-c":
        spectral = fc.nu_c_values(p)
        oracle = oracles.nu_oracle(p, kmax)
    else:
        spectral = fc.nt_c_values(p.capacity, p.rho, t)
        oracle = oracles.nt_oracle(p.rho, t, p.capacity)

    sim = err = None
    tv = None
    if spec.replications:
        mode = oracles.FIXED_T if law in ("nt", "dt", "nt-c") else oracles.OBSERVER
        name = {"nt": "N", "nt-c": "N", "dt": "D", "nu": "nu", "nu-c": "nu", "d": "d"}[law]
        emp = _simulate(spec, mode)
        sim = pad(emp.frequencies(name))
        err = pad(emp.frequency_stderr(name))
        tv = oracles.tv_distance(emp.frequencies(name), spectral)

    rows = [
        ComparisonRow(
            int(k),
            float(spectral[k]),
            None if closed is None else float(closed[k]),
            float(oracle[k]),
            None if sim is None else float(sim[k]),
            None if err is None else float(err[k]),
        )
        for k in ks
    ]
    methods = ["spectral"] + (["closed_form"] if closed is not None else []) + ["oracle"]
    if sim is not None:
        methods.append("simulation")
    return rows, methods, tail, tv


def cmd_compare(spec: RunSpec):
    rows, methods, tail, tv = compare_rows(spec)
    worst = max(r.analytic_discrepancy for r in rows)
    summary = {"max_analytic_discrepancy": worst}
    if tv is not None:
        summary["tv_simulation"] = tv
    if spec.fmt == "csv":
        header = ["k"] + methods + (["stderr"] if "simulation" in methods else []) + ["discrepancy"]
        out = []
        for r in rows:
            line = [r.outcome, r.spectral]
            if "closed_form" in methods:
                line.append(r.closed_form)
            line.append(r.oracle)
            if "simulation" in methods:
                line += [r.simulation, r.stderr]
            out.append(line + [r.discrepancy])
        text = to_csv(header, out)
    else:
        values = []
        for r in rows:
            row = {"k": r.outcome, "spectral": r.spectral}
            if r.closed_form is not None:
                row["closed_form"] = r.closed_form
            row["oracle"] = r.oracle
            if r.simulation is not None:
                row["simulation"] = r.simulation
                row["stderr"] = r.stderr
            row["discrepancy"] = r.discrepancy
            values.append(row)
        text = to_json(
            _envelope(spec, methods, [r.outcome for r in rows], values, tail, summary=summary)
        )
    return text, (EXIT_DISCREPANCY if worst > DISCREPANCY_LIMIT else EXIT_OK), summary


# -- argument handling -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qspectral", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, t=True, support=True):
        sp.add_argument("--rho", type=float, required=True)
        sp.add_argument("--sigma", type=float, default=1.0)
        sp.add_argument("--c", type=int, default=None, help="capacity (M/M/c/c)")
        if t:
            sp.add_argument("--t", type=float, default=None)
        if support:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--kmax", type=int, default=None)
            g.add_argument("--tol", type=float, default=None)
        sp.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
        sp.add_argument("--output", default=None)

    sp = sub.add_parser("pmf", help="distribution table")
    sp.add_argument("law", choices=PMF_LAWS)
    sp.add_argument("--method", default=None)
    common(sp)

    sp = sub.add_parser("spectrum", help="atoms and masses of a spectral measure")
    sp.add_argument("--kind", choices=("psi", "phi"), default="psi")
    common(sp, t=False, support=False)
    sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("gf", help="generating function values")
    sp.add_argument("law", choices=GF_LAWS)
    sp.add_argument("--z", required=True, help="comma separated list")
    common(sp, t=False, support=False)

    sp = sub.add_parser("moments", help="closed-form means")
    common(sp, support=False)

    sp = sub.add_parser("simulate", help="Monte Carlo summary")
    sp.add_argument("--mode", choices=(oracles.OBSERVER, oracles.FIXED_T), default=oracles.OBSERVER)
    sp.add_argument("--reps", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    common(sp, support=False)

    sp = sub.add_parser("compare", help="cross-method comparison report")
    sp.add_argument("--law", required=True, choices=COMPARE_LAWS)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    common(sp)
    return parser


def parse_spec(argv) -> RunSpec:
    ns = build_parser().parse_args(argv)
    cmd = ns.command
    law = getattr(ns, "law", None)
    try:
        params = QueueParams(ns.rho, ns.sigma, ns.c)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    t = getattr(ns, "t", None)
    if t is not None and not (math.isfinite(t) and t >= 0):
        raise UsageError("--t must be a finite nonnegative number")
    if law in NEEDS_T and t is None and cmd in ("pmf", "compare"):
        raise UsageError(f"law {law!r} needs --t")
    kmax = getattr(ns, "kmax", None)
    if kmax is not None and kmax < 0:
        raise UsageError("--kmax must be nonnegative")
    tol = getattr(ns, "tol", None)
    if tol is None:
        tol = 1e-12
    elif not 0 < tol < 1:
        raise UsageError("--tol must lie in (0, 1)")
    method = getattr(ns, "method", None)
    if cmd == "pmf":
        if method is not None and method not in PMF_METHODS[law]:
            raise UsageError(f"method for {law!r} must be one of {PMF_METHODS[law]}")
        if ns.c is not None and law not in ("nu", "nt"):
            raise UsageError("--c applies to pmf nu and pmf nt only")
    if cmd == "compare":
        if law.endswith("-c") and ns.c is None:
            raise UsageError(f"law {law!r} needs --c")
        if not law.endswith("-c") and ns.c is not None:
            raise UsageError(f"law {law!r} is for infinitely many servers; drop --c")
    if cmd in ("compare", "spectrum", "gf") and ns.c is not None and ns.c < 1:
        raise UsageError("--c must be >= 1")
    if cmd == "spectrum" and ns.kind == "phi" and ns.c is None:
        raise UsageError("--kind phi needs --c")
    if cmd == "gf" and law.endswith("-c") and ns.c is None:
        raise UsageError(f"gf {law} needs --c")
    if cmd == "gf" and not law.endswith("-c") and ns.c is not None:
        raise UsageError(f"gf {law} is for infinitely many servers; drop --c")
    z = ()
    if cmd == "gf":
        try:
            z = tuple(float(v) for v in ns.z.split(","))
        except ValueError:
            raise UsageError("--z must be a comma separated list of numbers") from None
        if any(not math.isfinite(v) or abs(v) > 1 for v in z):
            raise UsageError("--z values must satisfy |z| <= 1")
    reps = getattr(ns, "reps", None)
    seed = getattr(ns, "seed", None)
    if reps is not None and reps < 1:
        raise UsageError("--reps must be positive")
    if seed is not None and not 0 <= seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    mode = getattr(ns, "mode", oracles.OBSERVER)
    if cmd == "simulate" and mode == oracles.FIXED_T and t is None:
        raise UsageError("--mode fixed_t needs --t")
    if cmd == "compare" and reps is not None and seed is None:
        seed = 0
    return RunSpec(
        command=cmd,
        params=params,
        law=law,
        t=t,
        kmax=kmax,
        tol=tol,
        seed=seed,
        replications=reps,
        fmt=ns.fmt,
        output=ns.output,
        method=method,
        z=z,
        mode=mode,
        kind=getattr(ns, "kind", "psi"),
    )


def run(spec: RunSpec):
    """Execute ``spec``; returns (exit code, output text)."""
    if spec.command == "compare":
        text, code, _ = cmd_compare(spec)
        return code, text
    handler = {
        "pmf": cmd_pmf,
        "spectrum": cmd_spectrum,
        "gf": cmd_gf,
        "moments": cmd_moments,
        "simulate": cmd_simulate,
    }[spec.command]
    return EXIT_OK, handler(spec)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        spec = parse_spec(argv)
    except UsageError as exc:
        print(f"qspectral: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code, text = run(spec)
    except (QSpectralError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qspectral: numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not text.endswith("\n"):
        text += "\n"
    if spec.output:
        with open(spec.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
