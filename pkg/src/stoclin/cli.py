"""Command-line front end: parse JSON system documents, dispatch analyses,
emit human-readable (text) or machine-readable (json) reports.

Exit codes: 0 = analysis completed (regardless of verdict), 2 = invalid
input, 3 = numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
import time
from dataclasses import dataclass

import numpy as np

from .errors import (InternalConsistencyError, InvalidInputError,
                     NotSupportedError, NumericalFailureError, StoclinError)
from .gare import GareProblem, solve_gare_maximal
from .lift import SystemQuad, build_drift_operator
from .observability import (OutputSystem, is_exactly_observable,
                            is_stochastically_detectable, liu_rank_criterion)
from .robust import UncertaintyModel, synthesize_quadratic_stabilizer
from .sim import SimConfig, compare_empirical_vs_exact
from .spectra import TOL_MARGIN, is_weakly_stable, spectrum
from .stability import GenLyapProblem, SingularReport, classify_lyapunov_solution, solve_gen_lyapunov
from .stabilizability import is_stabilizable, is_weakly_stabilizable, unremovable_spectra

__all__ = ["SystemDocument", "parse_system", "run", "main", "COMMANDS"]

VERSION = "0.1.0"

COMMANDS = (
    "stabilizable", "weakly-stabilizable", "unremovable-spectrum",
    "observable", "detectable", "gare", "lyapunov", "robust-synthesize",
    "simulate", "spectrum",
)

_TOP_KEYS = {"name", "a", "b", "c", "d", "cs", "q_output", "q_weight", "r",
             "uncertainty", "sim"}
_UNC_KEYS = {"e", "g", "g1", "g2", "g3"}
_SIM_KEYS = {"x0", "t", "dt", "trials", "seed"}


def _matrix(field: str, value) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"field {field!r}: not a numeric array ({exc})")
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2:
        raise InvalidInputError(f"field {field!r}: expected a matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"field {field!r}: non-finite entries")
    return M


@dataclass(frozen=True)
class SystemDocument:
    name: str
    A: np.ndarray
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    D: np.ndarray | None = None
    Cs: tuple = ()
    q_output: np.ndarray | None = None
    q_weight: np.ndarray | None = None
    R: np.ndarray | None = None
    uncertainty: UncertaintyModel | None = None
    sim: dict | None = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def quad(self) -> SystemQuad:
        """The full (A, B, C, D) plant; every absent matrix must be inferable."""
        if self.B is None:
            raise InvalidInputError("document is missing 'b' (input matrix)")
        n, m = self.n, self.B.shape[1]
        C = self.C if self.C is not None else np.zeros((n, n))
        D = self.D if self.D is not None else np.zeros((n, m))
        return SystemQuad(A=self.A, B=self.B, C=C, D=D)

    def output_system(self) -> OutputSystem:
        if self.q_output is None:
            raise InvalidInputError("document is missing 'q_output'")
        Cs = tuple(M for M in ((self.C,) + self.Cs) if M is not None)
        return OutputSystem(A=self.A, Cs=Cs, Q=self.q_output)


def parse_document(doc: dict, name: str = "<document>") -> SystemDocument:
    if not isinstance(doc, dict):
        raise InvalidInputError(f"{name}: top level must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise InvalidInputError(f"{name}: unknown fields {sorted(unknown)}")
    if "a" not in doc:
        raise InvalidInputError(f"{name}: required field 'a' is missing")
    A = _matrix("a", doc["a"])
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidInputError(f"field 'a': must be square, got {A.shape}")

    def opt(field, rows=None, cols=None):
        if field not in doc:
            return None
        M = _matrix(field, doc[field])
        if rows is not None and M.shape[0] != rows:
            raise InvalidInputError(f"field {field!r}: expected {rows} rows, got {M.shape[0]}")
        if cols is not None and M.shape[1] != cols:
            raise InvalidInputError(f"field {field!r}: expected {cols} columns, got {M.shape[1]}")
        return M

    B = opt("b", rows=n)
    m = B.shape[1] if B is not None else None
    C = opt("c", rows=n, cols=n)
    D = opt("d", rows=n, cols=m)
    Cs = ()
    if "cs" in doc:
        if not isinstance(doc["cs"], list):
            raise InvalidInputError("field 'cs': must be a list of matrices")
        Cs = tuple(_matrix(f"cs[{i}]", M) for i, M in enumerate(doc["cs"]))
        for i, Ci in enumerate(Cs):
            if Ci.shape != (n, n):
                raise InvalidInputError(f"field 'cs[{i}]': must be {n} x {n}")
    q_output = opt("q_output", cols=n)
    q_weight = opt("q_weight", rows=n, cols=n)
    R = opt("r", rows=m, cols=m) if m is not None else opt("r")
    unc = None
    if "uncertainty" in doc:
        u = doc["uncertainty"]
        if not isinstance(u, dict):
            raise InvalidInputError("field 'uncertainty': must be an object")
        bad = set(u) - _UNC_KEYS
        if bad:
            raise InvalidInputError(f"field 'uncertainty': unknown fields {sorted(bad)}")
        if "g" in u and "g1" in u:
            raise InvalidInputError("field 'uncertainty': give 'g' or 'g1', not both")
        g = u.get("g", u.get("g1"))
        if "e" not in u or g is None:
            raise InvalidInputError("field 'uncertainty': needs 'e' and 'g' (or 'g1')")
        unc = UncertaintyModel(
            E=_matrix("uncertainty.e", u["e"]), G=_matrix("uncertainty.g", g),
            G2=_matrix("uncertainty.g2", u["g2"]) if "g2" in u else None,
            G3=_matrix("uncertainty.g3", u["g3"]) if "g3" in u else None)
    sim = None
    if "sim" in doc:
        s = doc["sim"]
        if not isinstance(s, dict):
            raise InvalidInputError("field 'sim': must be an object")
        bad = set(s) - _SIM_KEYS
        if bad:
            raise InvalidInputError(f"field 'sim': unknown fields {sorted(bad)}")
        sim = dict(s)
    return SystemDocument(name=str(doc.get("name", name)), A=A, B=B, C=C, D=D,
                          Cs=Cs, q_output=q_output, q_weight=q_weight, R=R,
                          uncertainty=unc, sim=sim)


def parse_system(path: str) -> SystemDocument:
    """Load and validate a JSON system document from a file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: malformed JSON at line {exc.lineno}, "
                                f"column {exc.colno}: {exc.msg}")
    return parse_document(raw, name=path)


def serialize_document(doc: SystemDocument) -> dict:
    """Inverse of parse_document on valid documents (round-trip identity)."""
    out: dict = {"name": doc.name, "a": doc.A.tolist()}
    for key, val in (("b", doc.B), ("c", doc.C), ("d", doc.D),
                     ("q_output", doc.q_output), ("q_weight", doc.q_weight),
                     ("r", doc.R)):
        if val is not None:
            out[key] = val.tolist()
    if doc.Cs:
        out["cs"] = [M.tolist() for M in doc.Cs]
    if doc.uncertainty is not None:
        u = {"e": doc.uncertainty.E.tolist(), "g": doc.uncertainty.G.tolist()}
        if doc.uncertainty.G2 is not None:
            u["g2"] = doc.uncertainty.G2.tolist()
        if doc.uncertainty.G3 is not None:
            u["g3"] = doc.uncertainty.G3.tolist()
        out["uncertainty"] = u
    if doc.sim is not None:
        out["sim"] = dict(doc.sim)
    return out


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _fmt_num(x) -> str:
    if isinstance(x, complex) or (isinstance(x, np.generic) and np.iscomplexobj(x)):
        x = complex(x)
        if abs(x.imag) < 1e-14 * (1 + abs(x.real)):
            return f"{x.real:.6g}"
        return f"{x.real:.6g}{x.imag:+.6g}j"
    return f"{float(x):.6g}"


def _fmt_value(v, indent: str) -> str:
    if isinstance(v, np.ndarray):
        if v.ndim <= 1:
            return "[" + ", ".join(_fmt_num(x) for x in np.atleast_1d(v)) + "]"
        rows = ["[" + ", ".join(_fmt_num(x) for x in row) + "]" for row in v]
        return ("\n" + indent + "  ").join([""] + rows).lstrip("\n")
    if isinstance(v, (float, complex, np.floating, np.complexfloating)):
        return _fmt_num(v)
    if isinstance(v, dict):
        return "\n" + _fmt_dict(v, indent + "  ")
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        parts = []
        for item in v:
            parts.append(indent + "  - " + _fmt_value(item, indent + "    ").lstrip())
        return "\n" + "\n".join(parts)
    return str(v)


def _fmt_dict(d: dict, indent: str = "") -> str:
    lines = []
    for k, v in d.items():
        rendered = _fmt_value(v, indent)
        sep = "" if rendered.startswith("\n") else " "
        lines.append(f"{indent}{k}:{sep}{rendered}")
    return "\n".join(lines)


def render_report(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(report), indent=2)
    return _fmt_dict(report)


def _load_gain(path: str | None, m: int, n: int) -> np.ndarray:
    if path is None:
        return np.zeros((m, n))
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read gain file {path}: {exc}")
    if isinstance(raw, dict):
        if set(raw) != {"k"}:
            raise InvalidInputError(f"gain file {path}: expected a matrix or {{'k': ...}}")
        raw = raw["k"]
    K = _matrix("k", raw)
    if K.shape != (m, n):
        raise InvalidInputError(f"gain file {path}: expected {m} x {n}, got {K.shape}")
    return K


def _spectrum_payload(spec) -> dict:
    return {
        "eigenvalues": spec.eigenvalues,
        "groups": [{"value": lam, "algebraic": alg, "geometric": geo}
                   for lam, alg, geo in spec.groups],
        "abscissa": spec.abscissa,
    }


def _cmd_stabilizable(doc, flags):
    rep = is_stabilizable(doc.quad())
    out = {"decision": rep.decision, "method": rep.method, "margin": rep.margin}
    if rep.witness_gain is not None:
        out["gain"] = rep.witness_gain
    if rep.witness_certificate is not None:
        out["certificate"] = rep.witness_certificate
    if rep.diagnostics:
        out["diagnostics"] = rep.diagnostics
    return out


def _cmd_weakly_stabilizable(doc, flags):
    return dict(is_weakly_stabilizable(doc.quad()))


def _cmd_unremovable(doc, flags):
    items = unremovable_spectra(doc.quad())
    return {"count": len(items),
            "items": [{"eigenvalue": it.eigenvalue, "is_real": it.is_real,
                       "witness": it.X, "residuals": it.residuals}
                      for it in items]}


def _cmd_observable(doc, flags):
    osys = doc.output_system()
    res = dict(is_exactly_observable(osys))
    if len(osys.Cs) == 1:
        try:
            liu = liu_rank_criterion(osys)
            res["rank"] = liu["rank"]
            res["rank_verdict"] = liu["verdict"]
        except NotSupportedError:
            pass
    return res


def _cmd_detectable(doc, flags):
    return dict(is_stochastically_detectable(doc.output_system()))


def _cmd_gare(doc, flags):
    sys_ = doc.quad()
    if doc.q_weight is None or doc.R is None:
        raise InvalidInputError("gare needs 'q_weight' and 'r' in the document")
    sol = solve_gare_maximal(GareProblem(sys=sys_, Q=doc.q_weight, R=doc.R))
    return {"P": sol.P, "K": sol.K, "residual": sol.residual,
            "classification": sol.classification, "maximal": sol.maximal,
            "closed_loop_abscissa": sol.abscissa}


def _cmd_lyapunov(doc, flags):
    if doc.q_weight is None:
        raise InvalidInputError("lyapunov needs 'q_weight' in the document")
    Cs = tuple(M for M in ((doc.C,) + doc.Cs) if M is not None)
    prob = GenLyapProblem(A=doc.A, Cs=Cs, Q=doc.q_weight)
    sol = solve_gen_lyapunov(prob)
    if isinstance(sol, SingularReport):
        return {"status": "singular", "rank": sol.rank, "order": sol.order,
                "null_matrices": sol.null_matrices()}
    out = {"status": "solved", "P": sol}
    try:
        out["classification"] = classify_lyapunov_solution(prob, sol)
    except InvalidInputError:
        out["classification"] = "not-applicable"
    return out


def _cmd_robust(doc, flags):
    if doc.uncertainty is None:
        raise InvalidInputError("robust-synthesize needs an 'uncertainty' block")
    cert = synthesize_quadratic_stabilizer(doc.quad(), doc.uncertainty,
                                           seed=flags.get("seed") or 0)
    if cert is None:
        return {"verdict": "infeasible"}
    return {"verdict": "quadratically-stabilizable", "K": cert.K, "P": cert.P,
            "alpha": cert.alpha}


def _cmd_simulate(doc, flags):
    sys_ = doc.quad()
    s = doc.sim or {}
    x0 = np.asarray(s.get("x0", np.ones(doc.n)), dtype=float).reshape(-1)
    seed = flags.get("seed")
    cfg = SimConfig(x0=x0, T=float(s.get("t", 1.0)), dt=float(s.get("dt", 1e-3)),
                    trials=int(s.get("trials", 10_000)),
                    seed=int(seed if seed is not None else s.get("seed", 0)))
    K = _load_gain(flags.get("gain"), sys_.m, sys_.n)
    res = compare_empirical_vs_exact(sys_, cfg, K)
    out = {"trials": cfg.trials, "seed": cfg.seed, "dt": cfg.dt, "T": cfg.T,
           "diverged": res["diverged"]}
    if not res["diverged"]:
        out["max_standardized_deviation"] = res["max_standardized_deviation"]
        out["argmax"] = res["argmax"]
        out["low_power"] = res["low_power"]
    if flags.get("out"):
        _write_trajectory_csv(flags["out"], res)
        out["csv"] = flags["out"]
    return out


def _write_trajectory_csv(path: str, res: dict):
    import csv

    exact = res["exact"]
    emp = res["empirical"]
    t = exact["t"]
    m = min(len(t), len(emp["t"]))
    n = exact["X"].shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "entry_i", "entry_j", "exact", "empirical", "stderr"])
        for k in range(m):
            for i in range(n):
                for j in range(n):
                    w.writerow([repr(float(t[k])), i, j,
                                repr(float(exact["X"][k, i, j])),
                                repr(float(emp["mean"][k, i, j])),
                                repr(float(emp["stderr"][k, i, j]))])


def _cmd_spectrum(doc, flags):
    tol_eig = flags.get("tol_eig")
    if doc.B is not None:
        sys_ = doc.quad()
        K = _load_gain(flags.get("gain"), sys_.m, sys_.n)
        Ac, Cc = sys_.closed_loop(K)
        Cs = [Cc] + [Ci for Ci in doc.Cs]
    else:
        Ac = doc.A
        Cs = [M for M in ((doc.C,) + doc.Cs) if M is not None]
    L = build_drift_operator(Ac, Cs, adjoint=True)
    spec = spectrum(L, tol_eig=tol_eig)
    verdict = is_weakly_stable(L, tol_margin=flags.get("tol_margin") or TOL_MARGIN)
    out = _spectrum_payload(spec)
    out["verdict"] = verdict.verdict
    return out


_DISPATCH = {
    "stabilizable": _cmd_stabilizable,
    "weakly-stabilizable": _cmd_weakly_stabilizable,
    "unremovable-spectrum": _cmd_unremovable,
    "observable": _cmd_observable,
    "detectable": _cmd_detectable,
    "gare": _cmd_gare,
    "lyapunov": _cmd_lyapunov,
    "robust-synthesize": _cmd_robust,
    "simulate": _cmd_simulate,
    "spectrum": _cmd_spectrum,
}


def run(command: str, doc: SystemDocument, flags: dict | None = None) -> dict:
    """Dispatch a command on a parsed document; returns the analysis report."""
    if command not in _DISPATCH:
        raise InvalidInputError(f"unknown command {command!r}")
    flags = dict(flags or {})
    t0 = time.perf_counter()
    body = _DISPATCH[command](doc, flags)
    elapsed = time.perf_counter() - t0
    return {
        "version": VERSION,
        "command": command,
        "system": doc.name,
        "tolerances": {"tol_eig": flags.get("tol_eig"),
                       "tol_margin": flags.get("tol_margin") or TOL_MARGIN},
        "result": body,
        "elapsed_s": elapsed,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stoclin",
        description="Analysis and synthesis for linear Ito stochastic systems "
                    "dx = (Ax+Bu)dt + (Cx+Du)dw.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("file", help="JSON system document")
    parser.add_argument("--gain", help="JSON file with a feedback gain matrix")
    parser.add_argument("--out", help="output file (report, or CSV for simulate)")
    parser.add_argument("--format", choices=("text", "json"), default="text")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol-eig", type=float, default=None)
    parser.add_argument("--tol-margin", type=float, default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    flags = {"gain": args.gain, "out": args.out, "seed": args.seed,
             "tol_eig": args.tol_eig, "tol_margin": args.tol_margin}
    try:
        doc = parse_system(args.file)
        report = run(args.command, doc, flags)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except (NumericalFailureError, InternalConsistencyError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 3
    except StoclinError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    text = render_report(report, args.format)
    if args.out and args.command != "simulate":
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


if __name__ == "__main__":
    _sys.exit(main())
