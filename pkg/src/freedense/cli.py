"""Command-line front end.

Exit codes: 0 success, 1 certified negative, 2 undecided or search
exhausted, 3 usage error.  A table goes to stdout, JSON to ``--out``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .congruence import (CosetConstraint, DensityReport, ModMatrix, density_battery, kernel_structure,
                         standard_generators)
from .construct import (ExtensionFail, SearchConfig, SearchExhausted, SystemState, extend_into_coset,
                        find_transversal, make_state, theorem1_pipeline, theorem2_enumerate)
from .encl import HyperbolicProfile, hyperbolicity
from .exactalg import GroupElement
from .pingpong import (Member, NotMember, PingPongConfig, SchottkyCertificate, membership,
                       verify_certificate)

SCHEMA_VERSION = "freedense-report/1"
OK, NEGATIVE, UNDECIDED, USAGE = 0, 1, 2, 3
TIMING_KEYS = ("seconds", "wall_time")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunRecord:
    command: str
    argv: list[str]
    config: dict
    seed: int
    inputs: dict[str, str] = field(default_factory=dict)
    output_digest: str | None = None
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {"tool_version": __version__, "schema": SCHEMA_VERSION, "command": self.command,
                "argv": list(self.argv), "config": self.config, "seed": str(self.seed),
                "inputs": dict(self.inputs), "output_digest": self.output_digest,
                "wall_time": f"{self.wall_time:.3f}"}


# --------------------------------------------------------------------------
# serialization


def _stringify(obj):
    """Persisted artifacts carry numbers only as decimal strings."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _stringify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_stringify(v) for v in obj]
    return str(obj)


def strip_timing(obj):
    """Drop timing fields (used for replay comparisons)."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def _digest(text: str | bytes) -> str:
    data = text.encode() if isinstance(text, str) else text
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _load(path: str, record: RunRecord):
    raw = Path(path).read_bytes()
    record.inputs[path] = _digest(raw)
    return json.loads(raw)


def _parse_matrix(text: str) -> list[list[int]]:
    """'1,1;0,1' -> [[1, 1], [0, 1]]."""
    try:
        rows = [[int(x) for x in r.split(",")] for r in text.strip().split(";")]
    except ValueError as exc:
        raise UsageError(f"bad matrix {text!r}") from exc
    if any(len(r) != len(rows) for r in rows):
        raise UsageError(f"matrix {text!r} is not square")
    return rows


def _parse_coset(text: str) -> CosetConstraint:
    if ":" not in text:
        raise UsageError("coset must look like m:a,b;c,d")
    m, mat = text.split(":", 1)
    try:
        return CosetConstraint(int(m), ModMatrix.from_rows(int(m), _parse_matrix(mat)))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _elements(data) -> list[GroupElement]:
    """A generator file: a list of matrices, or {"generators": [...]}, or a report."""
    if isinstance(data, dict):
        if "generators" in data:
            return _elements(data["generators"])
        if "certificate" in data and data["certificate"]:
            return _elements(data["certificate"]["generators"])
        if "matrix" in data:
            return [GroupElement.from_json(data)]
        raise UsageError("no generators found in input")
    if data and isinstance(data[0], list) and data[0] and not isinstance(data[0][0], list):
        return [GroupElement.from_json(data)]  # a single matrix
    return [GroupElement.from_json(g) for g in data]


def _certificate(data) -> SchottkyCertificate:
    if "certificate" in data and data.get("certificate"):
        data = data["certificate"]
    if "balls" not in data:
        raise UsageError("input is not a Schottky certificate or report")
    return SchottkyCertificate.from_json(data)


# --------------------------------------------------------------------------
# commands


def _search_config(args) -> SearchConfig:
    kw = {"seed": args.seed, "n": args.n}
    if args.word_len is not None:
        kw["max_word_len"] = args.word_len
    if args.power_cap is not None:
        kw["power_cap"] = args.power_cap
    if args.precision_cap is not None:
        kw["precision_cap"] = args.precision_cap
    return SearchConfig(**kw)


def _pp_config(args) -> PingPongConfig:
    kw = {}
    if args.precision_cap is not None:
        kw["precision_cap"] = args.precision_cap
    return PingPongConfig(**kw)


def cmd_certify(args, rec, out):
    if not args.inp:
        raise UsageError("certify needs --in")
    cert = _certificate(_load(args.inp, rec))
    res = verify_certificate(cert, _pp_config(args))
    out["result"] = res.to_json()
    if res.status == "certified":
        print(f"certified: {cert.rank} generators, {len(res.inequalities)} inequalities, margin {cert.margin}")
        return OK
    worst = min(res.inequalities, key=lambda q: q.margin, default=None)
    print(f"{res.status}: {res.condition} {json.dumps(res.witness or {})}")
    if worst is not None:
        print(f"  tightest inequality ({worst.i}, {worst.j}, {worst.k}): margin {worst.margin}")
    return NEGATIVE if res.status == "failed" else UNDECIDED


def _print_density(rep: DensityReport):
    print(f"{'m':>4}  {'surjective':<12} {'order':>16} {'|SL_n(Z/m)|':>16}  method")
    for r in rep.rows:
        order = "-" if r.order is None else str(r.order)
        print(f"{r.m:>4}  {r.surjective:<12} {order:>16} {r.target_order:>16}  {r.method}")


def cmd_density(args, rec, out):
    if args.mmax is None:
        raise UsageError("density needs --mmax")
    gens = _elements(_load(args.gens, rec)) if args.gens else [GroupElement(g) for g in standard_generators(args.n)]
    if any(g.n != args.n for g in gens):
        raise UsageError("generator dimension does not match --n")
    rep = density_battery(gens, args.mmax, n=args.n, seed=args.seed)
    out["density"] = rep.to_json()
    _print_density(rep)
    if rep.all_surjective:
        return OK
    return NEGATIVE if rep.failing else UNDECIDED


def cmd_membership(args, rec, out):
    if not args.inp or not args.gens:
        raise UsageError("membership needs --in (certificate) and --gens (element)")
    cert = _certificate(_load(args.inp, rec))
    elems = _elements(_load(args.gens, rec))
    code = OK
    results = []
    for g in elems:
        res = membership(cert, g, _pp_config(args))
        if isinstance(res, Member):
            results.append({"status": "member", "word": [[a, str(e)] for a, e in res.word]})
            print("member: " + (" ".join(f"{a}^{e}" for a, e in res.word) or "identity"))
        elif isinstance(res, NotMember):
            results.append({"status": "not-member", "reason": res.reason})
            print(f"not member: {res.reason}")
            code = max(code, NEGATIVE)
        else:
            results.append({"status": "undecided", "reason": res.reason})
            print(f"undecided: {res.reason}")
            code = UNDECIDED
    out["membership"] = results
    return code


def cmd_transversal(args, rec, out):
    cfg = _search_config(args)
    existing = []
    if args.gens:
        for g in _elements(_load(args.gens, rec)):
            p = hyperbolicity(g, cap=cfg.precision_cap)
            if not isinstance(p, HyperbolicProfile):
                print(f"input element not certified hyperbolic: {p.reason}")
                return NEGATIVE
            existing.append(p)
    res = find_transversal(existing, cfg)
    if isinstance(res, SearchExhausted):
        out["result"] = {"status": "exhausted", "reason": res.reason, "candidates": res.candidates}
        print(f"exhausted after {res.candidates} candidates: {res.reason}")
        return UNDECIDED
    out["result"] = {"status": "found", "element": res.element.to_json(), "candidates": res.candidates,
                     "witnesses": [{"epsilon": str(w.epsilon)} for w in res.witnesses]}
    print(f"found after {res.candidates} candidates: {res.element.matrix.to_json()}")
    for w in res.witnesses:
        print(f"  transversal with epsilon >= {float(w.epsilon):.6g}")
    return OK


def cmd_extend(args, rec, out):
    src = args.cert or args.inp
    if not src or not args.coset:
        raise UsageError("extend needs --cert and --coset m:matrix")
    cert = _certificate(_load(src, rec))
    c = _parse_coset(args.coset)
    cfg = _search_config(args)
    if cert.generators[0].n != args.n:
        cfg = replace(cfg, n=cert.generators[0].n)
    state = make_state(cert.generators, cert.cells, cfg)
    if not isinstance(state, SystemState):
        print(f"input system does not re-certify: {state.condition}")
        out["result"] = state.to_json()
        return NEGATIVE if state.status == "failed" else UNDECIDED
    res = extend_into_coset(state, c, cfg)
    if isinstance(res, ExtensionFail):
        out["result"] = {"status": "exhausted", "stage": res.stage, "reason": res.reason}
        print(f"extension failed at {res.stage}: {res.reason}")
        return UNDECIDED
    out["system"] = res.to_json()
    out["certificate"] = res.certificate.to_json()
    print(f"extended to {len(res.generators())} generators; history {res.history[-1]}")
    return OK


def cmd_pipeline(args, rec, out):
    if args.mmax is None:
        raise UsageError("pipeline needs --mmax")
    rep = theorem1_pipeline(args.n, args.mmax, _search_config(args))
    out.update(rep.to_json())
    print(f"status {rep.status}: {len(rep.generators)} generators, level m* = {rep.level}")
    for g in rep.generators:
        print("  " + json.dumps(g.matrix.to_json()))
    if rep.density is not None:
        _print_density(rep.density)
    for f in rep.flags:
        print(f"flag: {f}")
    if rep.status == "ok":
        return OK
    return NEGATIVE if rep.status == "failed" else UNDECIDED


def cmd_enumerate(args, rec, out):
    if args.k is None or args.k < 1:
        raise UsageError("enumerate needs --k >= 1")
    res = theorem2_enumerate(args.n, args.k, _search_config(args))
    out.update(res.to_json())
    print(f"status {res.status}: {len(res.systems)} systems")
    for w in res.witnesses:
        print(f"  generator {w['generator']} of system {w['element_of']} is outside system {w['outside']}")
    if res.reason:
        print(f"stopped at system {res.failure_index}: {res.reason}")
    return OK if res.status == "ok" else UNDECIDED


def cmd_kernel(args, rec, out):
    if args.p is None:
        raise UsageError("kernel-structure needs --p")
    try:
        ks = kernel_structure(args.n, args.p)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    except OverflowError as exc:
        print(str(exc))
        return UNDECIDED
    out["kernel"] = ks.to_json()
    print(f"order {ks.order}, elementary abelian {'yes' if ks.elementary_abelian else 'no'}, rank {ks.rank}")
    return OK


COMMANDS = {
    "certify": cmd_certify, "density": cmd_density, "membership": cmd_membership,
    "transversal": cmd_transversal, "extend": cmd_extend, "pipeline": cmd_pipeline,
    "enumerate": cmd_enumerate, "kernel-structure": cmd_kernel,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--n", type=int, default=3)
    common.add_argument("--mmax", type=int)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--precision-cap", type=int)
    common.add_argument("--power-cap", type=int)
    common.add_argument("--word-len", type=int)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--in", dest="inp")
    common.add_argument("--out")
    common.add_argument("--gens")
    parser = _Parser(prog="freedense", description="Certified free dense subgroups of SL_n(Z).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "extend":
            sp.add_argument("--cert")
            sp.add_argument("--coset")
        if name == "enumerate":
            sp.add_argument("--k", type=int)
        if name == "kernel-structure":
            sp.add_argument("--p", type=int)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.n < 2:
            raise UsageError("--n must be at least 2")
        if args.jobs < 1:
            raise UsageError("--jobs must be positive")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("command",)}
    rec = RunRecord(args.command, argv, _stringify(config), args.seed)
    out: dict = {}
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, rec, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"usage error: cannot read input: {exc}", file=sys.stderr)
        return USAGE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE
    rec.wall_time = time.perf_counter() - t0
    if args.out:
        body = _stringify(out)
        body["exit_code"] = str(code)
        rec.output_digest = _digest(canonical_dumps(strip_timing(body)))
        body["run_record"] = rec.to_json()
        Path(args.out).write_text(canonical_dumps(body))
    return code


if __name__ == "__main__":
    sys.exit(main())
