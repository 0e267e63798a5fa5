"""Surface realization of geometric monodromies and the classification
pipeline.

When a stable representative's Nielsen loops cover every edge exactly twice,
thickening the graph and attaching an annulus along each loop produces a
compact surface provided the link of every vertex is a single circle; the
loop system supplies the boundary, and the induced homeomorphism is the
monodromy.  Euler characteristic bookkeeping turns the combinatorics into
(genus, boundary count).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from endotorus.words import Endomorphism, Word
from endotorus import subgroups as sg
from endotorus.traintrack import (
    FiniteOrderCertificate,
    ReductionWitness,
    InvariantFactor,
    TrainTrack,
    Unknown,
    find_train_track,
    is_finite_order,
    verify_reduction_witness,
)
from endotorus.nielsen import (
    Atoroidal,
    NielsenLoops,
    StableRepresentative,
    Toroidal,
    atoroidality_verdict,
    critical_equation,
    nielsen_loops,
    stabilize,
)
from endotorus.words import (
    cyclic_canonical,
    find_conjugator,
    invert,
    parse_word,
    reduce_word,
)


class InternalInconsistency(RuntimeError):
    """A certified invariant failed; reported with exit code 2 by the CLI."""


@dataclass
class SurfaceRealization:
    genus: int
    boundary_count: int
    transitive_boundary: bool
    euler_char: int
    stretch: float
    orientable: bool
    fully_irreducible: bool     # single boundary component criterion

    def as_dict(self):
        return {
            "g": self.genus,
            "b": self.boundary_count,
            "transitive": self.transitive_boundary,
            "euler_char": self.euler_char,
            "lambda": self.stretch,
            "orientable": self.orientable,
            "fully_irreducible": self.fully_irreducible,
        }


@dataclass
class NotSurface:
    reason: str
    vertex: Optional[int] = None
    link_components: Optional[int] = None


def _vertex_links(gm, loops):
    """Link of each vertex: nodes are directions there, edges are the turns
    the loop system takes.  Every direction has degree two when each edge is
    covered twice, so links are disjoint circles; a surface point needs a
    single circle."""
    links: dict = {v: {} for v in range(gm.graph.nv)}
    for loop in loops:
        n = len(loop)
        for i in range(n):
            d_in, d_out = -loop[i], loop[(i + 1) % n]
            v = gm.graph.init_of(d_in)
            links[v].setdefault(d_in, []).append(d_out)
            links[v].setdefault(d_out, []).append(d_in)
    return links


def _link_components(link: dict) -> int:
    seen = set()
    comps = 0
    for start in sorted(link):
        if start in seen:
            continue
        comps += 1
        stack = [start]
        seen.add(start)
        while stack:
            d = stack.pop()
            for e in link[d]:
                if e not in seen:
                    seen.add(e)
                    stack.append(e)
    return comps


def _orientable(gm, loops) -> bool:
    """The thickened graph is orientable iff the loops can be oriented so
    that every edge is crossed once in each direction (bipartiteness of the
    conflict graph on loops)."""
    crossings: dict = {}
    for li, loop in enumerate(loops):
        for e in loop:
            crossings.setdefault(abs(e), []).append((li, 1 if e > 0 else -1))
    color = {}
    adj: dict = {i: [] for i in range(len(loops))}
    for e, cr in crossings.items():
        if len(cr) != 2:
            return False
        (l1, s1), (l2, s2) = cr
        # same direction twice forces the loops into opposite orientations
        parity = 0 if s1 != s2 else 1
        adj[l1].append((l2, parity))
        adj[l2].append((l1, parity))
    for start in range(len(loops)):
        if start in color:
            continue
        color[start] = 0
        stack = [start]
        while stack:
            i = stack.pop()
            for (j, parity) in adj[i]:
                want = color[i] ^ parity
                if j not in color:
                    color[j] = want
                    stack.append(j)
                elif color[j] != want:
                    return False
    return True


def realize_surface(stable: StableRepresentative, loops: NielsenLoops):
    """SurfaceRealization, or NotSurface with the offending vertex link.

    The blow-up of a disconnected link splits the vertex and joins the parts
    by an arc; the arc is not covered by the loop system, so the covering
    condition cannot be repaired: the diagnostic reports it."""
    gm = stable.tt.gm
    if any(c != 2 for c in loops.multiplicities.values()):
        return NotSurface(
            "Nielsen loops do not cover each edge exactly twice "
            f"(multiplicities {sorted(set(loops.multiplicities.values()))}); "
            "with certified irreducibility this would contradict the "
            "stable-representative covering property")
    links = _vertex_links(gm, loops.loops)
    for v in sorted(links):
        if not links[v]:
            return NotSurface("isolated vertex in the loop system", v, 0)
        comps = _link_components(links[v])
        if comps != 1:
            return NotSurface(
                "vertex link splits after blow-up: the connecting arc would "
                "be uncovered", v, comps)
    V = gm.graph.nv
    E = len(gm.graph.edges)
    chi = V - E
    b = len(loops.loops)
    orientable = _orientable(gm, loops.loops)
    if orientable:
        if (2 - chi - b) % 2 != 0:
            return NotSurface("Euler characteristic parity mismatch")
        genus = (2 - chi - b) // 2
    else:
        genus = 2 - chi - b   # crosscap count
    if genus < 0:
        return NotSurface("negative genus from the loop count")
    return SurfaceRealization(genus, b, loops.transitive, chi,
                              stable.tt.stretch, orientable, b == 1)


# ---------------------------------------------------------------------------
# bounded reduction search
# ---------------------------------------------------------------------------

def _letter_cycle_witness(endo: Endomorphism) -> Optional[ReductionWitness]:
    """Detect generators whose conjugacy classes permute among single-letter
    classes: a cyclic free factor system of rank-one factors."""
    for g in range(1, endo.rank + 1):
        letters = [g]
        ok = False
        for _ in range(endo.rank + 1):
            img = endo.apply((letters[-1],))
            core = cyclic_canonical(img, unoriented=True)
            if len(core) != 1:
                letters = None
                break
            nxt = abs(core[0])
            if nxt == letters[0]:
                ok = True
                break
            if nxt in letters:
                letters = None  # enters a sub-cycle not through the start
                break
            letters.append(nxt)
        if not letters or not ok:
            continue
        factors = []
        valid = True
        for i, l in enumerate(letters):
            nxt = letters[(i + 1) % len(letters)]
            img = endo.apply((l,))
            x = find_conjugator((nxt,), img)
            if x is None:
                x = find_conjugator((-nxt,), img)
            if x is None:
                valid = False
                break
            factors.append(InvariantFactor([(l,)], x))
        if not valid:
            continue
        witness = ReductionWitness(factors, "generator classes permute")
        if verify_reduction_witness(endo, witness):
            return witness
    return None


def _periodic_class_witness(endo: Endomorphism, max_period: int,
                            max_len: int, depth: int) -> Optional[ReductionWitness]:
    """A periodic conjugacy class whose unoriented orbit Whitehead-minimizes
    to distinct single letters yields an invariant system of rank-one
    factors (the letters pulled back through one common automorphism)."""
    from endotorus.words import periodic_conjugacy_search
    hit = periodic_conjugacy_search(endo, max_period, max_len)
    if hit is None:
        return None
    (w, n, _) = hit
    reps = [cyclic_canonical(w, unoriented=True)]
    for _ in range(n):
        nxt = cyclic_canonical(endo.apply(reps[-1]), unoriented=True)
        if nxt == reps[0]:
            break
        if nxt in reps or not nxt:
            return None
        reps.append(nxt)
    else:
        return None
    system = sg.letter_system(endo.rank, reps, depth=2 * depth)
    if system is None:
        return None
    (alpha, letters) = system
    inv = sg.invert_automorphism(alpha)
    basis = [inv.apply((l,)) for l in letters]
    k = len(reps)
    factors = []
    for i in range(k):
        target = basis[(i + 1) % k]
        img = endo.apply(basis[i])
        x = find_conjugator(target, img)
        if x is None:
            x = find_conjugator(invert(target), img)
        if x is None:
            return None
        factors.append(InvariantFactor([basis[i]], x))
    witness = ReductionWitness(factors, "periodic primitive classes")
    return witness if verify_reduction_witness(endo, witness) else None


def reduction_search(endo: Endomorphism, whitehead_depth: int = 8,
                     max_period: int = 6, max_len: int = 12) -> Optional[ReductionWitness]:
    """Bounded search for an invariant proper free factor system: image
    containment, single-letter class cycles, periodic primitive classes,
    and invariant subgraphs (through the folding loop).  None is a bounded
    negative."""
    image = sg.stallings(endo.rank, list(endo.images))
    ffc = sg.free_factor_containment(image, depth=whitehead_depth)
    if ffc.contained:
        witness = ReductionWitness([InvariantFactor(ffc.factor, ())],
                                   "image lies in a proper free factor")
        if verify_reduction_witness(endo, witness):
            return witness
    cyc = _letter_cycle_witness(endo)
    if cyc is not None:
        return cyc
    periodic = _periodic_class_witness(endo, max_period, max_len, whitehead_depth)
    if periodic is not None:
        return periodic
    if sg.is_injective(endo):
        result = find_train_track(endo)
        if isinstance(result, ReductionWitness):
            return result
    return None


# ---------------------------------------------------------------------------
# the verdict lattice
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    kind: str   # reducible | geometric | irreducible_atoroidal | finite_order | unknown
    injective: bool
    witness: Optional[ReductionWitness] = None
    surface: Optional[SurfaceRealization] = None
    finite_order: Optional[FiniteOrderCertificate] = None
    toroidal: Optional[Toroidal] = None
    atoroidal: Optional[Atoroidal] = None
    stable: Optional[StableRepresentative] = None
    loops: Optional[NielsenLoops] = None
    irreducibility: str = ""
    notes: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)


def classify(endo: Endomorphism, max_period: int = 6, max_len: int = 12,
             whitehead_depth: int = 8, period_bound: int = 8,
             max_iterations: int = 500, seed: int = 0) -> Verdict:
    """Full pipeline: injectivity, finite order, reduction search, train
    track, stabilization, Nielsen loops, surface realization."""
    bounds = {
        "max_period": max_period, "max_len": max_len,
        "whitehead_depth": whitehead_depth, "period_bound": period_bound,
        "max_iterations": max_iterations, "seed": seed,
    }
    injective = sg.is_injective(endo)
    notes = []
    if not injective:
        notes.append("endomorphism is not injective (image rank is smaller "
                     "than the ambient rank)")

    cert = is_finite_order(endo) if injective else None
    if cert is not None:
        return Verdict("finite_order", injective, finite_order=cert,
                       notes=notes, bounds=bounds)

    witness = reduction_search(endo, whitehead_depth, max_period, max_len)
    if witness is not None:
        return Verdict("reducible", injective, witness=witness,
                       notes=notes, bounds=bounds)

    if not injective:
        notes.append("train track pipeline needs injectivity; no bounded "
                     "reduction was found")
        return Verdict("unknown", injective, notes=notes, bounds=bounds)

    tt_result = find_train_track(endo, max_iterations=max_iterations, seed=seed)
    if isinstance(tt_result, ReductionWitness):
        return Verdict("reducible", injective, witness=tt_result,
                       notes=notes, bounds=bounds)
    if isinstance(tt_result, FiniteOrderCertificate):
        return Verdict("finite_order", injective, finite_order=tt_result,
                       notes=notes, bounds=bounds)
    if isinstance(tt_result, Unknown):
        notes.append(f"train track search: {tt_result.reason}")
        return Verdict("unknown", injective, notes=notes, bounds=bounds)

    stable = stabilize(endo, period_bound=period_bound, seed=seed)
    if isinstance(stable, (ReductionWitness,)):
        return Verdict("reducible", injective, witness=stable,
                       notes=notes, bounds=bounds)
    if isinstance(stable, FiniteOrderCertificate):
        return Verdict("finite_order", injective, finite_order=stable,
                       notes=notes, bounds=bounds)
    if isinstance(stable, Unknown) or not isinstance(stable, StableRepresentative):
        notes.append("stabilization did not settle")
        return Verdict("unknown", injective, notes=notes, bounds=bounds)
    if not stable.stable:
        # the returned representative is still a train track whose Nielsen
        # data verifies directly; only the stability label is withheld
        notes.append("stabilization budget exhausted before projective "
                     "recurrence; Nielsen data taken at the train track "
                     "representative")

    from endotorus.words import periodic_conjugacy_search
    from endotorus.nielsen import cancellation_radius, _class_period
    from endotorus.words import CyclicWord

    word_hit = periodic_conjugacy_search(endo, max_period, max_len)

    if stable.orbits:
        loops = nielsen_loops(stable.tt, stable.orbits)
        if word_hit is not None:
            (w, _, _) = word_hit
            if CyclicWord.of(w) not in loops.classes:
                raise InternalInconsistency(
                    "periodic class witnesses disagree between the word "
                    "search and the Nielsen loops")
        cls = loops.classes[0]
        toroidal = Toroidal(cls, _class_period(endo, cls, 2 * period_bound) or 0,
                            "both" if word_hit is not None else "nielsen loops")
        realization = realize_surface(stable, loops)
        if isinstance(realization, SurfaceRealization):
            if realization.transitive_boundary:
                return Verdict("geometric", injective, surface=realization,
                               stable=stable, loops=loops, toroidal=toroidal,
                               irreducibility="supported by the surface dichotomy",
                               notes=notes, bounds=bounds)
            notes.append("surface realized but the boundary action is not "
                         "transitive")
            return Verdict("unknown", injective, surface=realization,
                           stable=stable, loops=loops, toroidal=toroidal,
                           notes=notes, bounds=bounds)
        notes.append(f"surface realization failed: {realization.reason}")
        return Verdict("unknown", injective, stable=stable, loops=loops,
                       toroidal=toroidal, notes=notes, bounds=bounds)

    if word_hit is not None:
        raise InternalInconsistency(
            "word search found a periodic class but the Nielsen scan at the "
            "stable representative is empty")
    cert = Atoroidal(period_bound, cancellation_radius(stable.tt))
    return Verdict("irreducible_atoroidal", injective, atoroidal=cert,
                   stable=stable, irreducibility="bounded",
                   notes=notes, bounds=bounds)
