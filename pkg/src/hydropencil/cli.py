"""Command-line entry point.

    hydropencil <command> --manifest <path> [--steps n] [--out report.json]
                [--csv log.csv] [--no-timestamp]

Every command writes a JSON report (to ``--out`` or stdout).  Exit codes:
0 verdict true or run complete, 1 verdict false (the report carries a
witness), 2 bad input, 3 an internal limit (inexact step, blow-up,
undecided test, or disagreement between criteria that should agree).
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
import time
from fractions import Fraction
from typing import Any, Callable

from . import __version__
from .errors import HydroError, InputError, LimitError, NotIntegrable, GMismatch, Refutation
from .expr import Expr
from .geometry import ContraMetric, VectorField
from .hierarchy import HydroFlow, bihamiltonian_check, build_hierarchy
from .manifest import Manifest
from .operators import (
    DNOperator,
    compat_pencil_check,
    dubrovin_delta,
    flat_pencil_from_f,
    from_h,
    h_from_operator,
    is_hamiltonian,
    lie2_vanishes,
    lie_operator,
    hamiltonicity_residuals,
    quasihomogeneous_check,
)

EXIT_TRUE, EXIT_FALSE, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3


class Outcome(Exception):
    """Raised by a command to finish with a specific exit code and report."""

    def __init__(self, code: int, results: dict, witnesses=(), message: str = ""):
        self.code = code
        self.results = results
        self.witnesses = list(witnesses)
        super().__init__(message)


# --- serialisation --------------------------------------------------------------------------

def js(x: Any) -> Any:
    """JSON-ready form; expressions become canonical text."""
    if isinstance(x, Expr):
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, ContraMetric):
        return js(x.g)
    if isinstance(x, VectorField):
        return [str(c) for c in x]
    if isinstance(x, DNOperator):
        return {"g": js(x.g), "b": js(x.b)}
    if isinstance(x, HydroFlow):
        out = {"M": js(x.M)}
        if x.potential is not None:
            out["potential"] = js(x.potential)
        return out
    if isinstance(x, (list, tuple)):
        return [js(v) for v in x]
    if isinstance(x, dict):
        return {str(k): js(v) for k, v in x.items()}
    return x


def _tri(b: bool | None) -> bool | None:
    return None if b is None else bool(b)


# --- commands ---------------------------------------------------------------------------------

def cmd_check_operator(m: Manifest, args) -> tuple[int, dict, list]:
    P = m.default_operator()
    rep = is_hamiltonian(P)
    results = {
        "operator": js(P),
        "symmetric": rep.symmetric,
        "skew_ok": rep.skew_ok,
        "nondegenerate": rep.nondegenerate,
        "torsionless_compatible": _tri(rep.torsionless_compatible),
        "flat": _tri(rep.flat),
        "verdict": _tri(rep.verdict),
    }
    witnesses = list(rep.witnesses)
    if rep.verdict is None:
        # degenerate: decidable here only for an operator in h-form
        if m.has("eta") and m.has("h") and from_h(m.eta(), m.h()).differences(P) == []:
            res = hamiltonicity_residuals(m.eta(), m.h())
            results["verdict"] = res.all_zero
            results["decided_by"] = "residuals"
            witnesses += [f"{name} = {v}" for name, v in res.nonzero(1)]
        else:
            results["decided_by"] = None
            raise Outcome(EXIT_LIMIT, results, witnesses, "Undecided: degenerate operator not in h-form")
    return (EXIT_TRUE if results["verdict"] else EXIT_FALSE), results, witnesses


def _pencil_verdict(g1: ContraMetric, eta: ContraMetric):
    if g1.det().is_zero():
        return None, ["g1 is degenerate; the pencil criterion is not applied"]
    rep = compat_pencil_check(g1, eta)
    return rep.verdict, list(rep.witnesses)


def _lie_verdict(P1: DNOperator, eta: ContraMetric):
    """P1 = L_xi(eta d/dx) for some xi, and P1 Hamiltonian."""
    try:
        rec = h_from_operator(P1, eta)
    except (NotIntegrable, GMismatch) as exc:
        return False, [f"no vector field xi with P1 = L_xi(eta d/dx): {exc}"], None
    xi = -rec.h
    if lie_operator(DNOperator.constant(eta), xi).differences(P1):
        return False, ["L_xi(eta d/dx) differs from P1"], xi
    ham = is_hamiltonian(P1)
    return ham.verdict, list(ham.witnesses), xi


def cmd_check_compat(m: Manifest, args):
    eta, h = m.eta(), m.h()
    P1 = from_h(eta, h)
    res = hamiltonicity_residuals(eta, h)
    r_verdict = res.all_zero
    p_verdict, p_wit = _pencil_verdict(P1.metric, eta)
    l_verdict, l_wit, xi = _lie_verdict(P1, eta)
    criteria = {"residuals": r_verdict, "pencil": p_verdict, "lie": l_verdict}
    decided = {k: v for k, v in criteria.items() if v is not None}
    results = {
        "g1": js(P1.g),
        "criteria": criteria,
        "xi": js(xi) if xi is not None else None,
    }
    witnesses = [f"{n} = {v}" for n, v in res.nonzero(3)] + p_wit + l_wit
    if len(set(decided.values())) > 1:
        results["verdict"] = None
        results["bug_report"] = {
            "message": "compatibility criteria disagree; please report with this manifest",
            "manifest": m.doc,
            "criteria": criteria,
            "witnesses": witnesses,
        }
        raise Outcome(EXIT_LIMIT, results, witnesses, "criteria disagree")
    results["verdict"] = r_verdict
    return (EXIT_TRUE if r_verdict else EXIT_FALSE), results, witnesses


def cmd_lie(m: Manifest, args):
    # default operator for a Lie derivative: eta d/dx
    if "operator" in m.doc.get("select", {}) or m.has("operators") or not m.has("eta"):
        P = m.default_operator()
    else:
        P = DNOperator.constant(m.eta())
    xi = m.vector_field(m.selected("vector_field", pool="vector_fields"))
    L = lie_operator(P, xi)
    results = {"operator": js(P), "xi": js(xi), "lie": js(L), "lie2_vanishes": lie2_vanishes(P, xi)}
    return EXIT_TRUE, results, []


def cmd_residuals(m: Manifest, args):
    res = hamiltonicity_residuals(m.eta(), m.h())
    nz = res.nonzero(10)
    results = {"all_zero": res.all_zero, "nonzero": [{"component": n, "value": str(v)} for n, v in nz],
               "verdict": res.all_zero}
    return (EXIT_TRUE if res.all_zero else EXIT_FALSE), results, [f"{n} = {v}" for n, v in nz[:1]]


def cmd_flat_pencil(m: Manifest, args):
    g2 = m.metric(m.selected("g2", "eta" if m.has("eta") else None, pool="metrics"))
    f = m.vector_field(m.selected("vector_field", pool="vector_fields"))
    c = m.constant(m.doc.get("c", 0), "c")
    r = flat_pencil_from_f(g2, f, c)
    results = {
        "g1": js(r.g1),
        "delta_product_ok": r.delta_product_ok,
        "hessian_balance_ok": r.hessian_balance_ok,
        "nondegenerate": r.nondegenerate,
        "pencil": None if r.pencil is None else {"lambda_flat": r.pencil.lambda_flat,
                                                 "gamma_linear": r.pencil.gamma_linear},
        "hessian": js(r.hessian),
    }
    if r.nondegenerate:
        delta = dubrovin_delta(r.g1, g2)
        results["delta"] = js(delta.upper)
        results["delta_equals_hessian"] = delta.upper == r.hessian
    results["verdict"] = r.verdict
    return (EXIT_TRUE if r.verdict else EXIT_FALSE), results, list(r.witnesses)


def cmd_quasihom(m: Manifest, args):
    g1 = m.metric(m.selected("g1", "g1"))
    g2 = m.metric(m.selected("g2", "g2" if "g2" in m.doc.get("metrics", {}) else "eta"))
    if not m.has("tau"):
        raise InputError("tau: required by quasihom")
    tau = m.expr(m.doc["tau"], "tau")
    d = m.constant(m.doc.get("degree", 0), "degree")
    r = quasihomogeneous_check(g1, g2, tau, d)
    results = {"e": js(r.e), "E": js(r.E), "degree": str(r.degree), "conditions": r.conditions(),
               "verdict": r.verdict}
    witnesses = [f"condition {k} fails" for k, v in r.conditions().items() if not v]
    return (EXIT_TRUE if r.verdict else EXIT_FALSE), results, witnesses


def cmd_hierarchy(m: Manifest, args):
    eta, h = m.eta(), m.h()
    n = args.steps or 2
    H = build_hierarchy(eta, h, n)
    flows = []
    ok = True
    witnesses = []
    for k, flow in enumerate(H.flows, start=1):
        rep = bihamiltonian_check(flow, eta, h, first=(k == 1))
        ok = ok and rep.verdict
        flows.append({
            "step": k,
            "M": js(flow.M),
            "potential": js(flow.potential),
            "bihamiltonian": {
                "p2_ok": rep.p2_ok, "p1_ok": rep.p1_ok,
                "h2_density": js(rep.h2_density), "h1_density": js(rep.h1_density), "note": rep.note,
            },
        })
        if not rep.verdict:
            witnesses.append(f"flow {k}: bi-Hamiltonian representation not confirmed ({rep.note or 'mismatch'})")
    results = {"flows": flows, "complete": H.complete, "bihamiltonian_ok": ok, "verdict": ok and H.complete}
    if not H.complete:
        results["failed_step"] = H.failed_step
        raise Outcome(EXIT_LIMIT, results, [f"NotExact at step {H.failed_step}: {H.reason}"], "NotExact")
    return (EXIT_TRUE if ok else EXIT_FALSE), results, witnesses


def cmd_recover_h(m: Manifest, args):
    eta = m.eta()
    P1 = m.default_operator()
    rec = h_from_operator(P1, eta)
    return EXIT_TRUE, {"h": js(rec.h), "null_directions": rec.null_directions, "verdict": True}, []


def _sim_flow(m: Manifest, entry: dict) -> HydroFlow:
    if "translation" in entry:
        from .geometry import identity
        return HydroFlow(identity(m.ctx), VectorField(tuple(m.ctx.coord_vars())))
    if "matrix" in entry:
        return HydroFlow(m.matrix(entry["matrix"], "sim.flow.matrix"))
    k = entry["hierarchy"]
    H = build_hierarchy(m.eta(), m.h(), k)
    if not H.complete:
        from .errors import NotExact
        raise NotExact(f"hierarchy flow {k} is not available: {H.reason}", H.failed_step)
    return H.flows[k - 1]


def _sim_block(m: Manifest):
    from .sim import GridState

    if not m.has("sim"):
        raise InputError("sim: required by this command")
    sim = m.doc["sim"]
    kwargs = {"L": sim["L"]} if "L" in sim else {}
    try:
        s0 = GridState.from_fourier(sim["initial"], sim["m"], **kwargs)
    except ValueError as exc:
        raise InputError(f"sim: {exc}") from None
    return sim, s0


def cmd_simulate(m: Manifest, args):
    from .sim import SimConfig, evolve

    sim, s0 = _sim_block(m)
    if "flow" not in sim:
        raise InputError("sim.flow: required by simulate")
    flow = _sim_flow(m, sim["flow"])
    for key in ("dt", "t_end"):
        if key not in sim:
            raise InputError(f"sim.{key}: required by simulate")
    try:
        cfg = SimConfig(sim["dt"], sim["t_end"], sim.get("scheme", "spectral"), sim.get("stride", 1),
                        sim.get("precision", "double"))
    except ValueError as exc:
        raise InputError(f"sim: {exc}") from None
    eta = m.eta() if m.has("eta") else None
    h = m.h() if m.has("h") else None
    traj = evolve(flow, s0, cfg, eta, h)
    log = traj.log
    if args.csv:
        log.write_csv(args.csv)
    drifts = {name: log.drift(name) for name in log.header[1:-1]}
    results = {
        "flow": js(flow.M),
        "steps": cfg.steps()[0],
        "monitored_rows": len(log.rows),
        "relative_drift": {k: (None if v != v else v) for k, v in drifts.items()},
        "final_max_vx": float(log.rows[-1][-1]),
        "csv": args.csv,
    }
    return EXIT_TRUE, results, []


def cmd_commute(m: Manifest, args):
    from .sim import commutator_test

    sim, s0 = _sim_block(m)
    if "flows" not in sim:
        raise InputError("sim.flows: commute needs a pair of flows")
    A, B = (_sim_flow(m, entry) for entry in sim["flows"])
    tau = sim.get("tau", 1e-2)
    r = commutator_test(A, B, s0, tau, sim.get("scheme", "spectral"), sim.get("substeps", 64))
    ratio = r.ratio
    commuting = ratio is None or ratio >= 7
    results = {
        "tau": tau,
        "defect_tau": r.defect_tau,
        "defect_half": r.defect_half,
        "ratio": None if ratio is None or ratio == float("inf") else ratio,
        "order": "O(tau^3) or better" if commuting else "O(tau^2)",
        "verdict": commuting,
    }
    return (EXIT_TRUE if commuting else EXIT_FALSE), results, [] if commuting else [
        f"defect ratio {ratio:.3g} < 7: the flows do not commute"]


COMMANDS: dict[str, Callable] = {
    "check-operator": cmd_check_operator,
    "check-compat": cmd_check_compat,
    "lie": cmd_lie,
    "residuals": cmd_residuals,
    "flat-pencil": cmd_flat_pencil,
    "quasihom": cmd_quasihom,
    "hierarchy": cmd_hierarchy,
    "recover-h": cmd_recover_h,
    "simulate": cmd_simulate,
    "commute": cmd_commute,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hydropencil",
                                description="Exact checks for Hamiltonian operators of hydrodynamic type.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--manifest", required=True, help="JSON problem manifest")
    p.add_argument("--steps", type=int, default=None, help="number of hierarchy flows (hierarchy)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="conservation log (simulate)")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit timestamp and timings so reports are byte-identical across runs")
    return p


def run(argv: list[str] | None = None) -> tuple[int, dict]:
    args = build_parser().parse_args(argv)
    report: dict[str, Any] = {"command": args.command, "inputs": {"manifest": args.manifest}}
    if args.steps is not None:
        report["inputs"]["steps"] = args.steps
    start = time.perf_counter()
    witnesses: list[str] = []
    try:
        if args.steps is not None and args.steps < 1:
            raise InputError("--steps must be at least 1")
        m = Manifest.load(args.manifest)
        report["inputs"]["manifest_content"] = m.doc
        code, results, witnesses = COMMANDS[args.command](m, args)
    except Outcome as out:
        code, results, witnesses = out.code, out.results, out.witnesses
        if str(out):
            results["status"] = str(out)
    except InputError as exc:
        code, results = EXIT_INPUT, {"error": type(exc).__name__, "message": str(exc)}
    except LimitError as exc:
        code, results = EXIT_LIMIT, {"error": type(exc).__name__, "message": str(exc)}
    except Refutation as exc:
        code, results = EXIT_FALSE, {"error": type(exc).__name__, "message": str(exc), "verdict": False}
        witnesses = [str(exc)]
    except HydroError as exc:  # pragma: no cover - every error has a family
        code, results = EXIT_LIMIT, {"error": type(exc).__name__, "message": str(exc)}
    report["verdicts"] = results
    report["witnesses"] = witnesses
    report["exit_code"] = code
    if not args.no_timestamp:
        report["timings"] = {"seconds": round(time.perf_counter() - start, 6)}
        report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code in (EXIT_INPUT, EXIT_LIMIT) and "message" in results:
        print(f"hydropencil: {results['error']}: {results['message']}", file=sys.stderr)
    return code, report


def main(argv: list[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
