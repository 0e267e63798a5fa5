"""Command-line front end: a small DSL for endomorphisms, pipeline commands,
JSON reports, and a batch mode for corpora.

Grammar:  rank N; a -> a b; b -> b a;
Inverses are uppercase letters or ^-1; whitespace is free; '#' starts a
comment until end of line.  A corpus file may carry '# expect: <verdict>'.

Exit codes: 0 success, 1 parse error, 2 internal inconsistency.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Optional

from endotorus.words import Endomorphism, parse_word, reduce_word, show_word
from endotorus.graphmap import GraphMap
from endotorus.traintrack import (
    FiniteOrderCertificate,
    ReductionWitness,
    TrainTrack,
    Unknown,
    find_train_track,
)
from endotorus.nielsen import (
    StableRepresentative,
    critical_equation,
    enumerate_pinps,
    group_orbits,
    nielsen_loops,
    stabilize,
)
from endotorus.surface import (
    InternalInconsistency,
    NotSurface,
    SurfaceRealization,
    Verdict,
    classify,
    realize_surface,
)
from endotorus.torus import chi_zero_report

SCHEMA_VERSION = 1
COMMANDS = ("classify", "tt", "nielsen", "surface", "torus", "report")


class ParseError(Exception):
    def __init__(self, message: str, position: int):
        super().__init__(f"parse error at offset {position}: {message}")
        self.position = position


@dataclass
class EndoSpec:
    rank: int
    endo: Endomorphism
    warnings: list = field(default_factory=list)
    expect: Optional[str] = None
    name: str = ""

    def render(self) -> str:
        parts = [f"rank {self.rank};"]
        for i, im in enumerate(self.endo.images):
            parts.append(f"{chr(ord('a') + i)} -> {' '.join(show_word((x,)) for x in im)};")
        return " ".join(parts)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _strip_comments(text: str):
    """Replace comments by spaces (offsets preserved); collect expectations."""
    out = []
    expect = None
    i = 0
    while i < len(text):
        if text[i] == "#":
            j = text.find("\n", i)
            if j == -1:
                j = len(text)
            comment = text[i:j]
            if "expect:" in comment:
                expect = comment.split("expect:", 1)[1].strip()
            out.append(" " * (j - i))
            i = j
        else:
            out.append(text[i])
            i += 1
    return "".join(out), expect


def parse(text: str) -> EndoSpec:
    """Parse the DSL into a validated endomorphism."""
    clean, expect = _strip_comments(text)
    pos = 0
    n = len(clean)

    def skip_ws():
        nonlocal pos
        while pos < n and clean[pos].isspace():
            pos += 1

    def expect_str(s: str):
        nonlocal pos
        skip_ws()
        if not clean.startswith(s, pos):
            raise ParseError(f"expected {s!r}", pos)
        pos += len(s)

    skip_ws()
    expect_str("rank")
    skip_ws()
    start = pos
    while pos < n and clean[pos].isdigit():
        pos += 1
    if start == pos:
        raise ParseError("expected a rank integer", pos)
    rank = int(clean[start:pos])
    if rank < 2:
        raise ParseError("rank must be at least 2", start)
    expect_str(";")

    images: dict = {}
    warnings: list = []
    while True:
        skip_ws()
        if pos >= n:
            break
        ch = clean[pos]
        if not ch.isalpha() or not ch.islower():
            raise ParseError("expected a generator name", pos)
        gen = ord(ch) - ord("a") + 1
        if gen > rank:
            raise ParseError(f"generator {ch!r} is outside rank {rank}", pos)
        if gen in images:
            raise ParseError(f"duplicate image for {ch!r}", pos)
        pos += 1
        expect_str("->")
        letters = []
        while True:
            skip_ws()
            if pos >= n:
                raise ParseError("unterminated image (missing ';')", pos)
            c = clean[pos]
            if c == ";":
                pos += 1
                break
            if not c.isalpha():
                raise ParseError(f"unexpected character {c!r} in image", pos)
            letter = (ord(c.lower()) - ord("a") + 1) * (1 if c.islower() else -1)
            if abs(letter) > rank:
                raise ParseError(f"undeclared generator {c!r}", pos)
            pos += 1
            # optional ^-1
            save = pos
            skip_ws()
            if pos < n and clean[pos] == "^":
                pos += 1
                skip_ws()
                if clean.startswith("-1", pos):
                    pos += 2
                    letter = -letter
                else:
                    raise ParseError("only ^-1 is supported", pos)
            else:
                pos = save
            letters.append(letter)
        if not letters:
            raise ParseError("empty image", pos)
        reduced = reduce_word(letters)
        if tuple(letters) != reduced:
            warnings.append(f"image of {ch!r} was not reduced; reduced form used")
        images[gen] = reduced
    missing = [chr(ord("a") + i) for i in range(rank) if i + 1 not in images]
    if missing:
        raise ParseError(f"missing image for {', '.join(missing)}", pos)
    endo = Endomorphism(rank, tuple(images[g] for g in range(1, rank + 1)))
    return EndoSpec(rank, endo, warnings, expect)


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def _round_floats(obj, digits: int = 10):
    if isinstance(obj, float):
        return round(obj, digits)
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    return obj


def _word_str(w) -> str:
    return show_word(w)


def _train_track_dict(tt: TrainTrack) -> dict:
    gm = tt.gm
    return {
        "vertices": gm.graph.nv,
        "edges": len(gm.graph.edges),
        "matrix": tt.data.as_lists(),
        "lambda": tt.data.lam,
        "eigenmetric": list(tt.data.eigenmetric) if tt.data.eigenmetric else None,
        "irreducible": tt.data.irreducible,
        "expanding": tt.data.expanding,
        "eigen_residual": tt.data.residual,
        "edge_images": {str(e): list(p) for e, p in sorted(gm.eimg.items())},
    }


def _witness_dict(w: ReductionWitness) -> dict:
    return {
        "factors": [[_word_str(b) for b in f.basis] for f in w.factors],
        "conjugators": [_word_str(f.conjugator) for f in w.factors],
        "provenance": w.provenance,
        "verified": w.verified,
    }


def _stable_dict(stable: StableRepresentative) -> dict:
    out = {
        "train_track": _train_track_dict(stable.tt),
        "stable": stable.stable,
        "fold_log": stable.fold_log,
        "has_orbit": stable.has_orbit,
    }
    if stable.orbits:
        out["orbits"] = [{
            "paths": [list(p) for p in o.paths],
            "connectors": [list(t) for t in o.connectors],
            "period": o.period,
            "orientation_reversal": o.orientation_reversal,
        } for o in stable.orbits]
        out["critical_residual"] = critical_equation(stable.tt, stable.orbits)
    return out


def _verdict_dict(v: Verdict) -> dict:
    out = {
        "kind": v.kind,
        "injective": v.injective,
        "irreducibility": v.irreducibility,
        "notes": v.notes,
        "bounds": v.bounds,
    }
    if v.witness is not None:
        out["reduction_witness"] = _witness_dict(v.witness)
    if v.finite_order is not None:
        out["finite_order"] = {"power": v.finite_order.power,
                               "conjugator": _word_str(v.finite_order.conjugator)}
    if v.surface is not None:
        out["surface"] = v.surface.as_dict()
    if v.toroidal is not None:
        out["toroidal"] = {"witness": _word_str(v.toroidal.witness.letters),
                           "period": v.toroidal.period,
                           "source": v.toroidal.source}
    if v.atoroidal is not None:
        out["atoroidal"] = {"period_bound": v.atoroidal.period_bound,
                            "radius": v.atoroidal.radius}
    if v.loops is not None:
        out["nielsen_loops"] = {
            "loops": [list(l) for l in v.loops.loops],
            "multiplicities": {str(k): c for k, c in sorted(v.loops.multiplicities.items())},
            "classes": [_word_str(c.letters) for c in v.loops.classes],
            "transitive": v.loops.transitive,
        }
    if v.stable is not None:
        out["stabilization"] = _stable_dict(v.stable)
    return out


# ---------------------------------------------------------------------------
# running commands
# ---------------------------------------------------------------------------

def run(command: str, spec: EndoSpec, flags: Optional[dict] = None) -> dict:
    """Execute one pipeline command; module errors are serialized, never
    raised (except internal inconsistencies, which the caller maps to exit
    code 2)."""
    flags = dict(flags or {})
    bounds = {
        "max_period": flags.get("max_period", 6),
        "max_len": flags.get("max_len", 12),
        "whitehead_depth": flags.get("whitehead_depth", 8),
        "period_bound": flags.get("period_bound", 8),
        "max_iterations": flags.get("max_iter", 500),
        "kmax": flags.get("kmax", 6),
        "seed": flags.get("seed", 0),
    }
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "input": {
            "rank": spec.rank,
            "images": [_word_str(im) for im in spec.endo.images],
            "text": spec.render(),
        },
        "bounds": bounds,
        "warnings": spec.warnings,
    }
    if spec.expect:
        report["input"]["expect"] = spec.expect
    endo = spec.endo
    try:
        if command == "classify":
            v = classify(endo, max_period=bounds["max_period"],
                         max_len=bounds["max_len"],
                         whitehead_depth=bounds["whitehead_depth"],
                         period_bound=bounds["period_bound"],
                         max_iterations=bounds["max_iterations"],
                         seed=bounds["seed"])
            report["verdict"] = _verdict_dict(v)
        elif command == "tt":
            result = find_train_track(endo, max_iterations=bounds["max_iterations"],
                                      seed=bounds["seed"])
            if isinstance(result, TrainTrack):
                report["train_track"] = _train_track_dict(result)
            elif isinstance(result, ReductionWitness):
                report["reduction_witness"] = _witness_dict(result)
            elif isinstance(result, FiniteOrderCertificate):
                report["finite_order"] = {"power": result.power,
                                          "conjugator": _word_str(result.conjugator)}
            else:
                report["unknown"] = {"reason": result.reason,
                                     "iterations": result.iterations}
        elif command == "nielsen":
            result = stabilize(endo, period_bound=bounds["period_bound"],
                               seed=bounds["seed"])
            if isinstance(result, StableRepresentative):
                report["stabilization"] = _stable_dict(result)
                if result.orbits:
                    loops = nielsen_loops(result.tt, result.orbits)
                    report["nielsen_loops"] = {
                        "loops": [list(l) for l in loops.loops],
                        "multiplicities": {str(k): c for k, c in
                                           sorted(loops.multiplicities.items())},
                        "classes": [_word_str(c.letters) for c in loops.classes],
                        "transitive": loops.transitive,
                    }
            elif isinstance(result, ReductionWitness):
                report["reduction_witness"] = _witness_dict(result)
            elif isinstance(result, FiniteOrderCertificate):
                report["finite_order"] = {"power": result.power,
                                          "conjugator": _word_str(result.conjugator)}
            else:
                report["unknown"] = {"reason": getattr(result, "reason", "unknown")}
        elif command == "surface":
            result = stabilize(endo, period_bound=bounds["period_bound"],
                               seed=bounds["seed"])
            if isinstance(result, StableRepresentative) and result.orbits:
                loops = nielsen_loops(result.tt, result.orbits)
                surf = realize_surface(result, loops)
                if isinstance(surf, SurfaceRealization):
                    report["surface"] = surf.as_dict()
                else:
                    report["not_surface"] = {"reason": surf.reason,
                                             "vertex": surf.vertex}
            else:
                report["not_surface"] = {
                    "reason": "no stable representative with a Nielsen path "
                              "orbit (nothing to realize)"}
        elif command == "torus":
            rep = chi_zero_report(endo, max_period=bounds["max_period"],
                                  max_len=bounds["max_len"],
                                  whitehead_depth=bounds["whitehead_depth"],
                                  period_bound=bounds["period_bound"],
                                  k_max=bounds["kmax"], seed=bounds["seed"])
            for key in ("witness_subgroup", "fiber_chain", "z2_witness",
                        "minimality", "applicable", "inapplicable_reason"):
                if key in rep:
                    report[key] = rep[key]
        elif command == "report":
            report["characterization"] = chi_zero_report(
                endo, max_period=bounds["max_period"], max_len=bounds["max_len"],
                whitehead_depth=bounds["whitehead_depth"],
                period_bound=bounds["period_bound"], k_max=bounds["kmax"],
                seed=bounds["seed"])
        else:
            raise ValueError(f"unknown command {command!r}")
    except InternalInconsistency:
        raise
    except Exception as exc:  # propagated module errors, serialized
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    return _round_floats(report)


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, separators=(",", ":"))


def _render_text(report: dict) -> str:
    lines = [f"input: {report['input']['text']}"]
    if "verdict" in report:
        v = report["verdict"]
        lines.append(f"verdict: {v['kind']}  (injective: {v['injective']})")
        if "surface" in v:
            s = v["surface"]
            lines.append(f"surface: genus {s['g']}, boundary {s['b']}, "
                         f"lambda {s['lambda']:.10f}, "
                         f"fully irreducible: {s['fully_irreducible']}")
        if "reduction_witness" in v:
            w = v["reduction_witness"]
            lines.append(f"reduction witness: factors {w['factors']} "
                         f"conjugators {w['conjugators']}")
        if "finite_order" in v:
            lines.append(f"finite order: power {v['finite_order']['power']}")
        if "toroidal" in v:
            lines.append(f"periodic class: {v['toroidal']['witness']} "
                         f"(period {v['toroidal']['period']})")
        if "atoroidal" in v:
            lines.append(f"atoroidal within bounds: period <= "
                         f"{v['atoroidal']['period_bound']}")
        for note in v.get("notes", []):
            lines.append(f"note: {note}")
    for key in ("train_track", "surface", "witness_subgroup", "fiber_chain",
                "characterization", "stabilization", "nielsen_loops",
                "not_surface", "finite_order", "reduction_witness",
                "unknown", "error"):
        if key in report:
            lines.append(f"{key}: {json.dumps(report[key], sort_keys=True, default=str)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _run_single(args_tuple):
    (command, text, name, flags) = args_tuple
    spec = parse(text)
    spec.name = name
    rep = run(command, spec, flags)
    rep["input"]["name"] = name
    return _round_floats(rep)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="endotorus",
        description="train tracks, Nielsen paths and mapping-torus "
                    "invariants of free group endomorphisms")
    ap.add_argument("command", choices=COMMANDS + ("batch",))
    ap.add_argument("inputs", nargs="*",
                    help="DSL files ('-' for stdin); batch mode takes many")
    ap.add_argument("--cmd", default="classify", choices=COMMANDS,
                    help="pipeline command for batch mode")
    ap.add_argument("--max-period", type=int, default=6)
    ap.add_argument("--max-len", type=int, default=12)
    ap.add_argument("--whitehead-depth", type=int, default=8)
    ap.add_argument("--period-bound", type=int, default=8)
    ap.add_argument("--max-iter", type=int, default=500)
    ap.add_argument("--kmax", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--json", action="store_true")
    ap.add_argument("--timing", action="store_true",
                    help="include wall-clock timing (breaks byte determinism)")
    args = ap.parse_intermixed_args(argv)

    flags = {
        "max_period": args.max_period, "max_len": args.max_len,
        "whitehead_depth": args.whitehead_depth,
        "period_bound": args.period_bound, "max_iter": args.max_iter,
        "kmax": args.kmax, "seed": args.seed,
    }

    def read_input(path: str) -> str:
        if path == "-":
            return sys.stdin.read()
        return Path(path).read_text()

    try:
        if args.command == "batch":
            paths = []
            for item in args.inputs:
                p = Path(item)
                if p.is_dir():
                    paths.extend(sorted(p.glob("*.endo")))
                else:
                    paths.append(p)
            tasks = [(args.cmd, Path(p).read_text(), Path(p).name, flags)
                     for p in paths]
            if args.jobs > 1:
                with Pool(args.jobs) as pool:
                    reports = pool.map(_run_single, tasks)
            else:
                reports = [_run_single(t) for t in tasks]
            for rep in reports:
                if args.timing:
                    rep["timing"] = None
                print(report_json(rep) if args.json else _render_text(rep))
            return 0
        text = read_input(args.inputs[0] if args.inputs else "-")
        t0 = time.monotonic()
        spec = parse(text)
        rep = run(args.command, spec, flags)
        if args.timing:
            rep["timing_seconds"] = round(time.monotonic() - t0, 3)
        print(report_json(rep) if args.json else _render_text(rep))
        return 0
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InternalInconsistency as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
