"""From a rose representative to an expanding irreducible train track map,
or a certified obstruction: a reduction witness (invariant proper free factor
system) or a finite-order certificate.

The folding loop never inverts the endomorphism; all moves (tighten,
subdivide, fold, collapse) make sense for injective non-surjective maps.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from endotorus.words import (
    Endomorphism,
    Word,
    concat,
    conjugate,
    cyclic_reduce,
    find_conjugator,
    invert,
    reduce_word,
)
from endotorus.graphmap import (
    GraphMap,
    MarkedGraph,
    TransitionData,
    tighten_path,
    transition_matrix,
    with_eigenmetric,
)
from endotorus import subgroups as sg


# ---------------------------------------------------------------------------
# gates and legality
# ---------------------------------------------------------------------------

def direction_map(gm: GraphMap) -> dict:
    """First edge of the image of each direction; images must be nontrivial."""
    dmap = {}
    for d in gm.graph.all_directions():
        img = gm.image_of_edge(d)
        if not img:
            raise ValueError("direction map undefined on a collapsed edge")
        dmap[d] = img[0]
    return dmap


def gates(gm: GraphMap) -> dict:
    """Partition of directions by iterated identification under the direction
    map; two directions in one gate make an illegal turn.  Returns a map
    direction -> gate id (stable kernel of the iterated direction map)."""
    dmap = direction_map(gm)
    dirs = gm.graph.all_directions()
    cur = {d: d for d in dirs}

    def partition_of(m):
        classes: dict = {}
        out = {}
        for d in dirs:
            key = m[d]
            if key not in classes:
                classes[key] = len(classes)
            out[d] = classes[key]
        return out

    part = partition_of(cur)
    for _ in range(2 * len(dirs) + 1):
        cur = {d: dmap[cur[d]] for d in dirs}
        new_part = partition_of(cur)
        if new_part == part:
            break
        part = new_part
    return part


def is_illegal_turn(gate_map: dict, d1: int, d2: int) -> bool:
    return gate_map[d1] == gate_map[d2]


def legality(gm: GraphMap, gate_map: dict, path) -> tuple:
    """(True, None) for a legal path, else (False, index of first illegal
    turn), where turn i sits between path[i] and path[i+1]."""
    for i in range(len(path) - 1):
        if is_illegal_turn(gate_map, -path[i], path[i + 1]):
            return (False, i)
    return (True, None)


def illegal_crossings(gm: GraphMap, gate_map: dict) -> list:
    """Illegal turns crossed by edge images: (edge, position, d1, d2)."""
    out = []
    for e in gm.graph.edge_ids():
        p = gm.eimg[e]
        for i in range(len(p) - 1):
            d1, d2 = -p[i], p[i + 1]
            if is_illegal_turn(gate_map, d1, d2):
                out.append((e, i, d1, d2))
    return out


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass
class TrainTrack:
    gm: GraphMap                  # edge lengths are the eigenmetric, volume 1
    gate_map: dict
    data: TransitionData

    @property
    def stretch(self) -> float:
        return self.data.lam


@dataclass
class InvariantFactor:
    basis: list            # words generating A_i
    conjugator: Word       # x_i with phi(A_i) <= x_i A_{i+1} x_i^{-1}


@dataclass
class ReductionWitness:
    factors: list          # [InvariantFactor, ...], indices cyclic
    provenance: str
    verified: bool = False

    def describe(self):
        return {
            "factors": [[list(w) for w in f.basis] for f in self.factors],
            "conjugators": [list(f.conjugator) for f in self.factors],
            "provenance": self.provenance,
            "verified": self.verified,
        }


@dataclass
class FiniteOrderCertificate:
    power: int
    conjugator: Word       # phi^power = conjugation by this word


@dataclass
class Unknown:
    reason: str
    iterations: int = 0


# ---------------------------------------------------------------------------
# finite order detection
# ---------------------------------------------------------------------------

def is_finite_order(endo: Endomorphism, max_power: int = 12,
                    max_conjugator: int = 24) -> Optional[FiniteOrderCertificate]:
    """Certify that some iterate is an inner automorphism, by solving the
    common-conjugator word equation with bounded conjugator length."""
    current = Endomorphism.identity(endo.rank)
    for k in range(1, max_power + 1):
        current = endo.compose(current)
        g1 = (1,)
        u = find_conjugator(g1, current.images[0])
        if u is None:
            continue
        # all solutions of x a x^-1 = psi(a) differ by the centralizer of a
        for j in range(-max_conjugator, max_conjugator + 1):
            x = concat(u, g1 * abs(j) if j >= 0 else invert(g1 * abs(j)))
            if len(x) > max_conjugator:
                continue
            if all(conjugate((i,), x) == current.images[i - 1]
                   for i in range(1, endo.rank + 1)):
                return FiniteOrderCertificate(k, x)
    return None


# ---------------------------------------------------------------------------
# invariant subgraphs and reduction witnesses
# ---------------------------------------------------------------------------

def _edge_digraph(gm: GraphMap) -> dict:
    return {e: sorted({abs(x) for x in gm.eimg[e]}) for e in gm.graph.edge_ids()}

def _sccs(digraph: dict) -> list:
    """Tarjan, iterative; deterministic order."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out = []
    counter = [0]
    for root in sorted(digraph):
        if root in index:
            continue
        work = [(root, iter(digraph[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(digraph[w])))
                    advanced = True
                    break
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def _subgraph_components(gm: GraphMap, edge_set) -> list:
    """Connected components of the subgraph spanned by edge_set:
    [(vertices, edges)], deterministic order."""
    edge_set = sorted(edge_set)
    adj: dict = {}
    for e in edge_set:
        (a, b) = gm.graph.edges[e]
        adj.setdefault(a, []).append((e, b))
        adj.setdefault(b, []).append((e, a))
    seen: set = set()
    comps = []
    for v0 in sorted(adj):
        if v0 in seen:
            continue
        verts = {v0}
        edges = set()
        queue = [v0]
        seen.add(v0)
        while queue:
            v = queue.pop(0)
            for (e, w) in adj[v]:
                edges.add(e)
                if w not in seen:
                    seen.add(w)
                    verts.add(w)
                    queue.append(w)
        comps.append((sorted(verts), sorted(edges)))
    return comps


def invariant_subgraph(gm: GraphMap) -> Optional[frozenset]:
    """Largest proper f-invariant edge set carrying fundamental group, or
    None.  Maximal proper invariant sets are complements of source components
    of the edge digraph."""
    digraph = _edge_digraph(gm)
    comps = _sccs(digraph)
    if len(comps) <= 1:
        return None
    comp_of = {}
    for i, c in enumerate(comps):
        for e in c:
            comp_of[e] = i
    incoming = {i: 0 for i in range(len(comps))}
    for e, targets in digraph.items():
        for t in targets:
            if comp_of[e] != comp_of[t]:
                incoming[comp_of[t]] += 1
    best = None
    for i, c in enumerate(comps):
        if incoming[i] != 0:
            continue
        rest = frozenset(digraph) - frozenset(c)
        if not rest:
            continue
        rank = sum(len(es) - len(vs) + 1 for (vs, es) in _subgraph_components(gm, rest))
        if rank <= 0:
            continue
        if best is None or len(rest) > len(best):
            best = rest
    return best


def largest_invariant_forest(gm: GraphMap) -> Optional[frozenset]:
    """A proper invariant edge set that is a forest (to collapse), or None."""
    digraph = _edge_digraph(gm)
    comps = _sccs(digraph)
    if len(comps) <= 1:
        return None
    comp_of = {}
    for i, c in enumerate(comps):
        for e in c:
            comp_of[e] = i
    incoming = {i: 0 for i in range(len(comps))}
    for e, targets in digraph.items():
        for t in targets:
            if comp_of[e] != comp_of[t]:
                incoming[comp_of[t]] += 1
    for i, c in enumerate(comps):
        if incoming[i] != 0:
            continue
        rest = frozenset(digraph) - frozenset(c)
        if not rest:
            continue
        if all(len(es) - len(vs) + 1 <= 0
               for (vs, es) in _subgraph_components(gm, rest)):
            return rest
    return None


def _cyclic_split_word(w: Word):
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return tuple(w[i:j]), tuple(w[:i])


def _primitive_root(c: Word) -> Word:
    n = len(c)
    for d in range(1, n + 1):
        if n % d == 0 and c[:d] * (n // d) == c:
            return tuple(c[:d])
    return tuple(c)


def _power(w: Word, n: int) -> Word:
    if n == 0:
        return ()
    base = w if n > 0 else invert(w)
    return reduce_word(base * abs(n))


def _solve_marking_twist(gm: GraphMap, endo: Endomorphism,
                         bound: int = 64) -> Optional[Word]:
    """Find z with phi(g) = z . induced(g) . z^-1 for every generator; the
    shortest-path basing of the induced map is only well defined up to such
    an inner twist.  Solutions differ by the centralizer of the first
    induced image, a cyclic group we scan with small exponents."""
    induced = [gm.induced_generator_image(g) for g in range(1, endo.rank + 1)]
    u = find_conjugator(induced[0], endo.images[0])
    if u is None:
        return None
    core, peel = _cyclic_split_word(induced[0])
    if not core:
        candidates = [u]
    else:
        root = conjugate(_primitive_root(core), peel)
        candidates = []
        for j in range(-8, 9):
            z = concat(u, _power(root, j))
            if len(z) <= bound:
                candidates.append(z)
    for z in candidates:
        if all(conjugate(w, z) == endo.images[i] for i, w in enumerate(induced)):
            return z
    return None


def build_reduction_witness(gm: GraphMap, endo: Endomorphism, edge_set,
                            provenance: str) -> Optional[ReductionWitness]:
    """Convert an invariant subgraph into a verified free factor system via
    the marking.  Returns None when verification fails (never emits an
    unverified witness)."""
    comps = [(vs, es) for (vs, es) in _subgraph_components(gm, edge_set)
             if len(es) - len(vs) + 1 > 0]
    if not comps:
        return None
    # functional map on components: where does f send each one
    succ = []
    for (vs, es) in comps:
        img_edges = set()
        for e in es:
            img_edges.update(abs(x) for x in gm.eimg[e])
        target = None
        for j, (vs2, es2) in enumerate(comps):
            if img_edges <= set(es2):
                target = j
                break
        if target is None:
            return None
        succ.append(target)
    # walk into a cycle
    seen = {}
    i = 0
    while i not in seen:
        seen[i] = len(seen)
        i = succ[i]
    cycle = []
    j = i
    while True:
        cycle.append(j)
        j = succ[j]
        if j == i:
            break

    z = _solve_marking_twist(gm, endo)
    if z is None:
        return None
    g = gm.graph

    def component_data(ci):
        (vs, es) = comps[ci]
        root = vs[0]
        gamma = g.shortest_path(g.base, root)
        # spanning tree of the component only
        tree_path = {root: ()}
        queue = [root]
        while queue:
            v = queue.pop(0)
            for d in g.directions_at(v):
                if abs(d) not in es:
                    continue
                w = g.term_of(d)
                if w not in tree_path:
                    tree_path[w] = tree_path[v] + (d,)
                    queue.append(w)
        loops = []
        tree_dirs = {p[-1] for p in tree_path.values() if p}
        for e in es:
            if e in {abs(d) for d in tree_dirs}:
                continue
            (a, b) = g.edges[e]
            loops.append(tree_path[a] + (e,) + tuple(-x for x in reversed(tree_path[b])))
        return root, gamma, tree_path, loops

    data = {ci: component_data(ci) for ci in cycle}
    q0 = g.shortest_path(g.base, gm.vimg[g.base])
    factors = []
    basis_words = {}
    for ci in cycle:
        root, gamma, _, loops = data[ci]
        basis_words[ci] = [
            gm.path_to_word(tighten_path(tuple(gamma) + lp + tuple(-x for x in reversed(gamma))))
            for lp in loops
        ]
    for idx, ci in enumerate(cycle):
        cj = cycle[(idx + 1) % len(cycle)]
        root_i, gamma_i, _, _ = data[ci]
        root_j, gamma_j, tree_j, _ = data[cj]
        f_gamma = gm.map_path(gamma_i)
        f_root = gm.vimg[root_i]
        delta = tree_j.get(f_root)
        if delta is None:
            return None
        x_raw = gm.path_to_word(tighten_path(
            tuple(q0) + f_gamma + tuple(-d for d in reversed(delta))
            + tuple(-d for d in reversed(gamma_j))))
        x = concat(z, x_raw)
        factors.append(InvariantFactor(basis_words[ci], x))
    witness = ReductionWitness(factors, provenance)
    return witness if verify_reduction_witness(endo, witness) else None


def verify_reduction_witness(endo: Endomorphism, witness: ReductionWitness) -> bool:
    """Membership check: phi(basis of A_i) inside x_i A_{i+1} x_i^-1, plus
    properness of the system."""
    k = len(witness.factors)
    total_rank = 0
    for i, f in enumerate(witness.factors):
        nxt = witness.factors[(i + 1) % k]
        graph = sg.stallings(endo.rank, nxt.basis)
        total_rank += len(f.basis)
        x = f.conjugator
        for w in f.basis:
            img = endo.apply(w)
            if not graph.contains(concat(invert(x), img, x)):
                return False
    if k == 1 and total_rank >= endo.rank:
        return False
    if total_rank == 0:
        return False
    witness.verified = True
    return True


# ---------------------------------------------------------------------------
# the folding loop
# ---------------------------------------------------------------------------

def _common_prefix(p, q):
    n = 0
    while n < len(p) and n < len(q) and p[n] == q[n]:
        n += 1
    return p[:n]


def _subdivide_head(gm: GraphMap, d: int, k: int):
    """Split the edge under direction d so that the returned direction's
    image is the first k letters of image(d)."""
    e = abs(d)
    p = gm.eimg[e]
    top = max(gm.graph.edges)
    if d > 0:
        gm2 = gm.subdivide(e, k)
        return gm2, top + 1
    gm2 = gm.subdivide(e, len(p) - k)
    return gm2, -(top + 2)


def fold_at_pair(gm: GraphMap, d1: int, d2: int) -> GraphMap:
    """Fold two directions whose images share their first edge, subdividing
    as needed; full folds happen when the image paths coincide."""
    for _ in range(8):
        if abs(d1) == abs(d2):
            # folding a loop edge onto its own reverse: split off the head,
            # then the generic branch trims the far end
            if d1 < 0:
                d1, d2 = d2, d1
            p = gm.image_of_edge(d1)
            c = _common_prefix(p, tuple(-x for x in reversed(p)))
            if not c or 2 * len(c) >= len(p):
                raise ValueError("degenerate self-fold")
            top = max(gm.graph.edges)
            gm = gm.subdivide(abs(d1), len(c))
            d1, d2 = top + 1, -(top + 2)
            continue
        p1 = gm.image_of_edge(d1)
        p2 = gm.image_of_edge(d2)
        if not p1 or not p2 or p1[0] != p2[0]:
            raise ValueError("directions do not share an initial image edge")
        if p1 == p2:
            return gm.fold(d1, d2)
        c = _common_prefix(p1, p2)
        if len(c) < len(p1):
            gm, d1 = _subdivide_head(gm, d1, len(c))
        else:
            gm, d2 = _subdivide_head(gm, d2, len(c))
    raise AssertionError("fold did not stabilize")


def _select_fold(gm: GraphMap, gate_map: dict, dmap: dict, seed: int):
    """Deterministic fold choice: from each illegal turn crossed in an image,
    walk back along the direction map to a foldable pair; order candidates
    full-before-partial, then by vertex and edge indices (seed permutes the
    edge tie-break)."""
    crossings = illegal_crossings(gm, gate_map)
    if not crossings:
        return None
    rng = random.Random(seed)
    ids = sorted(gm.graph.edges)
    perm = list(range(len(ids)))
    if seed:
        rng.shuffle(perm)
    pri = {e: perm[i] for i, e in enumerate(ids)}

    candidates = []
    for (_, _, d1, d2) in crossings:
        # find minimal j with Df^j equalizing, fold the pair one step before
        a, b = d1, d2
        guard = 0
        while dmap[a] != dmap[b]:
            a, b = dmap[a], dmap[b]
            guard += 1
            if guard > 4 * len(dmap):
                a = None
                break
        if a is None or a == b:
            continue
        full = gm.image_of_edge(a) == gm.image_of_edge(b)
        v = gm.graph.init_of(a)
        key = (0 if full else 1, v,
               min(pri[abs(a)], pri[abs(b)]), max(pri[abs(a)], pri[abs(b)]),
               min(a, b), max(a, b))
        candidates.append((key, a, b))
    if not candidates:
        return None
    candidates.sort(key=lambda t: t[0])
    (_, a, b) = candidates[0]
    return (a, b)


def find_train_track(endo: Endomorphism, max_iterations: int = 500, seed: int = 0):
    """Run the folding loop: returns TrainTrack, ReductionWitness,
    FiniteOrderCertificate, or Unknown.

    Reducible transition matrices are resolved into reduction witnesses when
    the invariant subgraph carries fundamental group, and collapsed when it
    is a forest.  Every witness is verified by membership before returning.
    """
    gm = GraphMap.rose(endo)
    for iteration in range(max_iterations):
        gm = gm.tighten()
        trivial = {e for e in gm.graph.edge_ids() if gm.eimg[e] == ()}
        if trivial:
            loops = {e for e in trivial
                     if gm.graph.edges[e][0] == gm.graph.edges[e][1]}
            if loops:
                return Unknown("a loop edge has trivial image "
                               "(map is not injective on homotopy)", iteration)
            gm = gm.collapse_forest(trivial)
            continue
        data = transition_matrix(gm)
        if not data.irreducible:
            sub = invariant_subgraph(gm)
            if sub is not None:
                witness = build_reduction_witness(gm, endo, sub,
                                                  "invariant subgraph of the folded representative")
                if witness is not None:
                    return witness
                return Unknown("invariant subgraph failed verification", iteration)
            forest = largest_invariant_forest(gm)
            if forest is not None:
                gm = gm.collapse_forest(forest)
                continue
            return Unknown("reducible transition matrix without usable "
                           "invariant subgraph", iteration)
        if data.lam <= 1 + 1e-9:
            cert = is_finite_order(endo)
            if cert is not None:
                return cert
            return Unknown("non-expanding irreducible representative without "
                           "finite-order certificate", iteration)
        gate_map = gates(gm)
        dmap = direction_map(gm)
        pick = _select_fold(gm, gate_map, dmap, seed)
        if pick is None:
            tt_gm, tt_data = with_eigenmetric(gm)
            return TrainTrack(tt_gm, gates(tt_gm), tt_data)
        try:
            gm = fold_at_pair(gm, *pick)
        except ValueError as exc:
            return Unknown(f"fold failed: {exc}", iteration)
    return Unknown("iteration budget exhausted", max_iterations)
