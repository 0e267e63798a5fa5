"""Mapping-torus layer: HNN presentations, the natural fibration, Euler
characteristics, witness subgroups and preimage chains.

Elements of the extension are kept as raw alternating words in the stable
letter and fiber elements; only exponent sums and the specific subgroup
constructions below are ever manipulated, so no normal-form engine is
needed.  Conjugator convention: a witness records phi^n(A) <= x A x^-1,
so the self-map of A is i_{x^-1} . phi^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from endotorus.words import (
    Endomorphism,
    Word,
    concat,
    cyclic_canonical,
    find_conjugator,
    invert,
    reduce_word,
)
from endotorus import subgroups as sg
from endotorus.subgroups import SubgroupGraph
from endotorus.traintrack import ReductionWitness
from endotorus.surface import Verdict, classify, reduction_search


@dataclass(frozen=True)
class HNNPresentation:
    """F *_A with relators t^-1 a t = phi(a) over a basis of the factor A."""
    ambient_rank: int              # m
    factor_rank: int               # n
    factor: Optional[SubgroupGraph] = None

    def euler_char(self) -> int:
        return self.factor_rank - self.ambient_rank

    @property
    def ascending(self) -> bool:
        return self.factor_rank == self.ambient_rank


def euler_char(p: HNNPresentation) -> int:
    return p.euler_char()


@dataclass(frozen=True)
class TorusElement:
    """Alternating word in the stable letter and fiber elements."""
    tokens: tuple    # of ("t", k) and ("w", Word)

    @staticmethod
    def of(*parts) -> "TorusElement":
        toks = []
        for p in parts:
            if isinstance(p, int):
                toks.append(("t", p))
            else:
                toks.append(("w", reduce_word(p)))
        return TorusElement(tuple(toks))

    def t_exponent(self) -> int:
        return sum(k for (kind, k) in self.tokens if kind == "t")

    def mul(self, other: "TorusElement") -> "TorusElement":
        return TorusElement(self.tokens + other.tokens)

    def inv(self) -> "TorusElement":
        out = []
        for (kind, val) in reversed(self.tokens):
            out.append(("t", -val) if kind == "t" else ("w", invert(val)))
        return TorusElement(tuple(out))


def fibration_exponent(gens: Sequence[TorusElement]) -> int:
    """gcd of the stable-letter exponent sums; zero when the natural
    fibration kills every generator."""
    d = 0
    for g in gens:
        d = math.gcd(d, abs(g.t_exponent()))
    return d


def chi_multiplicativity(chi: int, index: int) -> int:
    """Euler characteristic of a finite-index subgroup."""
    if index < 1:
        raise ValueError("index must be a positive integer")
    return index * chi


# ---------------------------------------------------------------------------
# witness subgroups and preimage chains
# ---------------------------------------------------------------------------

@dataclass
class WitnessSubgroup:
    """<A, t^n x> inside the mapping torus, carrying chi = 0."""
    fiber_basis: list          # basis of A
    power: int                 # n
    conjugator: Word           # x
    chi: int
    cyclic_fiber: bool
    provenance: str

    def generators(self) -> list:
        return [TorusElement.of(w) for w in self.fiber_basis] + \
            [TorusElement.of(self.power, self.conjugator)]

    def as_dict(self) -> dict:
        return {
            "fiber_basis": [list(w) for w in self.fiber_basis],
            "power": self.power,
            "conjugator": list(self.conjugator),
            "chi": self.chi,
            "cyclic_fiber": self.cyclic_fiber,
            "provenance": self.provenance,
        }


def witness_subgroup(endo: Endomorphism, a_basis: Sequence[Word], x: Word,
                     n: int, provenance: str = "") -> WitnessSubgroup:
    """Verified construction of <A, t^n x>: requires phi^n(A) <= x A x^-1 by
    membership and A proper.  chi = 0 because the presentation is an
    ascending extension of A over itself."""
    graph = sg.stallings(endo.rank, list(a_basis))
    if graph.index() == 1:
        raise ValueError("witness fiber must be a proper subgroup")
    power = endo.power(n)
    for w in a_basis:
        if not graph.contains(concat(invert(x), power.apply(w), x)):
            raise ValueError("invariance phi^n(A) <= x A x^-1 failed on a "
                             "basis element")
    rank = len(graph.basis())
    return WitnessSubgroup([reduce_word(w) for w in a_basis], n,
                           reduce_word(x), 0, rank <= 1, provenance)


def fiber_chain(endo: Endomorphism, a_graph: SubgroupGraph, x: Word, n: int,
                k_max: int = 6) -> dict:
    """Iterated preimages of A under i_{x^-1} phi^n, with indices and a
    stabilization check.  A finite-index term certifies finite index of the
    witness subgroup in the mapping torus; a stabilized infinite-index chain
    certifies infinite index."""
    if a_graph.index() == 1:
        raise ValueError("the fiber of a witness subgroup must be proper")
    psi = Endomorphism.inner(endo.rank, invert(x)).compose(endo.power(n))
    for w in a_graph.basis():
        if not a_graph.contains(psi.apply(w)):
            raise ValueError("the twisted endomorphism does not keep A "
                             "inside itself")
    terms = [a_graph]
    report_terms = []
    stabilized_at = None
    ascending_ok = True
    for k in range(k_max):
        nxt = sg.preimage(psi, terms[-1])
        for w in terms[-1].basis():
            if not nxt.contains(w):
                ascending_ok = False
        if nxt == terms[-1]:
            stabilized_at = k
            break
        terms.append(nxt)
    for t in terms:
        report_terms.append({
            "vertices": t.num_vertices,
            "edges": t.num_edges,
            "rank": t.graph_rank(),
            "index": t.index() if t.index() is not None else "infinite",
        })
    finite_at = next((i for i, t in enumerate(terms) if t.index() is not None), None)
    if finite_at is not None:
        conclusion = "finite index"
        certified = True
    elif stabilized_at is not None:
        conclusion = "infinite index (stable chain)"
        certified = True   # the stable term is a non-covering graph
    else:
        conclusion = f"undetermined at k_max={k_max}"
        certified = False
    return {
        "power": n,
        "conjugator": list(reduce_word(x)),
        "terms": report_terms,
        "ascending": ascending_ok,
        "stabilized_at": stabilized_at,
        "finite_index_at": finite_at,
        "conclusion": conclusion,
        "certified": certified,
    }


def minimality_check(endo: Endomorphism, depth: int = 8) -> tuple:
    """("minimal" | "not_minimal" | "unknown", factor basis or None)."""
    image = sg.stallings(endo.rank, list(endo.images))
    res = sg.free_factor_containment(image, depth=depth)
    if res.status == "not_contained":
        return ("minimal", None)
    if res.status == "contained":
        return ("not_minimal", res.factor)
    return ("unknown", None)


# ---------------------------------------------------------------------------
# the characterization report
# ---------------------------------------------------------------------------

def _accumulated_conjugator(endo: Endomorphism, witness: ReductionWitness) -> Word:
    """phi^k(A_1) <= X A_1 X^-1 where X = phi^{k-1}(x_1) phi^{k-2}(x_2) ... x_k
    telescopes the one-step conjugators through the iterates."""
    k = len(witness.factors)
    parts = []
    for i, f in enumerate(witness.factors):
        parts.append(endo.power(k - 1 - i).apply(f.conjugator))
    return concat(*parts)


def _z2_witness(endo: Endomorphism, cls: Word, max_power: int = 12) -> Optional[dict]:
    """A commuting pair <c, t^n z> from a periodic conjugacy class."""
    c = tuple(cls)
    u = c
    for n in range(1, max_power + 1):
        u = endo.apply(u)
        z = find_conjugator(c, u)
        if z is not None:
            return {
                "fiber": list(c),
                "power": n,
                "conjugator": list(z),
                "chi": 0,
                "commutes": True,
                "note": "free abelian of rank two; infinite index because "
                        "the fiber is nonabelian",
            }
    return None


def spot_check_invariant_subgroup(endo: Endomorphism, k_gens: Sequence[Word],
                                  n: int, x: Word, k_max: int = 6) -> dict:
    """Preimage-chain check on a user-supplied subgroup: does the chain of
    (i_{x^-1} phi^n)-preimages of K reach finite index?"""
    graph = sg.stallings(endo.rank, list(k_gens))
    psi = Endomorphism.inner(endo.rank, invert(x)).compose(endo.power(n))
    invariant = all(graph.contains(psi.apply(w)) for w in graph.basis())
    out = {
        "generators": [list(w) for w in k_gens],
        "power": n,
        "conjugator": list(reduce_word(x)),
        "invariant": invariant,
    }
    if not invariant:
        out["conclusion"] = "subgroup is not invariant under the twisted map"
        return out
    terms = [graph]
    finite_at = None
    for k in range(k_max):
        nxt = sg.preimage(psi, terms[-1])
        terms.append(nxt)
        if nxt.index() is not None:
            finite_at = k + 1
            break
        if nxt == terms[-2]:
            break
    out["chain_indices"] = [t.index() if t.index() is not None else "infinite"
                            for t in terms]
    out["finite_index_at"] = finite_at
    out["conclusion"] = ("chain reaches finite index" if finite_at is not None
                         else "no finite-index term within the bound")
    return out


def chi_zero_report(endo: Endomorphism, max_period: int = 6, max_len: int = 12,
                    whitehead_depth: int = 8, period_bound: int = 8,
                    k_max: int = 6, seed: int = 0,
                    spot_checks: Sequence = ()) -> dict:
    """Everything the zero-Euler-characteristic characterization says about
    this mapping torus, constructively where the reverse direction applies:
    a reducible minimal monodromy yields an explicit chi = 0 noncyclic
    witness subgroup of infinite index, a periodic class yields a rank-two
    free abelian subgroup, and in the irreducible atoroidal case the forward
    direction is reported as a cited conclusion."""
    verdict = classify(endo, max_period=max_period, max_len=max_len,
                       whitehead_depth=whitehead_depth,
                       period_bound=period_bound, seed=seed)
    minimality, factor = minimality_check(endo, depth=whitehead_depth)
    injective = verdict.injective
    applicable = injective and minimality == "minimal"
    report: dict = {
        "verdict": verdict.kind,
        "injective": injective,
        "minimality": {"status": minimality,
                       "factor": [list(w) for w in factor] if factor else None},
        "applicable": applicable,
    }
    if not applicable:
        reasons = []
        if not injective:
            reasons.append("the monodromy is not injective")
        if minimality == "not_minimal":
            reasons.append("the image lies in a proper free factor, so the "
                           "characterization's hypothesis fails")
        if minimality == "unknown":
            reasons.append("minimality undecided within bounds")
        report["inapplicable_reason"] = "; ".join(reasons)

    witness = verdict.witness if verdict.kind == "reducible" else None
    if witness is None:
        witness = reduction_search(endo, whitehead_depth)
    if witness is not None:
        a_basis = witness.factors[0].basis
        n = len(witness.factors)
        X = _accumulated_conjugator(endo, witness)
        try:
            ws = witness_subgroup(endo, a_basis, X, n,
                                  provenance=witness.provenance)
            a_graph = sg.stallings(endo.rank, a_basis)
            chain = fiber_chain(endo, a_graph, X, n, k_max=k_max)
            report["witness_subgroup"] = ws.as_dict()
            report["fiber_chain"] = chain
        except ValueError as exc:
            report["witness_error"] = str(exc)

    from endotorus.words import periodic_conjugacy_search
    hit = periodic_conjugacy_search(endo, max_period, max_len)
    if hit is not None:
        (w, _, _) = hit
        z2 = _z2_witness(endo, w, max_power=2 * max_period)
        if z2 is not None:
            report["z2_witness"] = z2

    if verdict.kind == "irreducible_atoroidal":
        report["forward_direction"] = (
            "cited conclusion: every finitely generated noncyclic subgroup "
            "of the mapping torus with zero Euler characteristic has finite "
            "index; an exhaustive subgroup search is impossible, so this is "
            "asserted from the characterization, not searched")
    if spot_checks:
        report["spot_checks"] = [
            spot_check_invariant_subgroup(endo, gens, n, x, k_max)
            for (gens, n, x) in spot_checks
        ]
    return report
