"""Cores, prototypes, and classification up to elementary equivalence.

The core is computed by a confluent rewriting system: strip certified
surface etages to their bases, drop free factors, send non-exceptional
closed surfaces to the trivial group, and distribute over free products.
Factors that survive are prototype signatures; two groups are elementarily
equivalent exactly when the signature multisets agree.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .decision import Decision
from .retract import decide_retractable
from .splittings import (CenteredSplitting, ClosedSurfaceGroup, Edge, FreeGroup,
                         FreeProduct, GroupExpr, PowerGluing, PrototypeAtom,
                         SurfaceEtage, Trivial, WordGluing, all_bottoms_cyclic,
                         expr_factors, is_abelian_expr, make_parachute,
                         make_multiparachute, _is_z_bottom)
from .surfaces import (N, S, Surface, euler_char, glue_mobius, is_exceptional,
                       is_hyperbolic)
from .towers import EtageUndecided
from .words import format_word

N3 = Surface(3, 0, orientable=False)
N4 = Surface(4, 0, orientable=False)
S12 = Surface(1, 2, orientable=True)


class MissingCertificate(ValueError):
    pass


class AbelianInput(ValueError):
    pass


# --------------------------------------------------------------------------
# Factor signatures and the core normal form
# --------------------------------------------------------------------------


def _gluing_key(e: Edge):
    if isinstance(e.gluing, PowerGluing):
        return ("power", e.gluing.element, e.gluing.power)
    return ("word", e.gluing.factor, e.gluing.word.letters)


def splitting_key(c: CenteredSplitting):
    """Canonical presentation signature of a splitting-defined group."""
    return ("splitting", str(c.surface),
            tuple(factor_signature(b) for b in c.bottoms),
            tuple((e.boundary, e.bottom, _gluing_key(e)) for e in
                  sorted(c.edges, key=lambda e: e.boundary)))


def factor_signature(e: GroupExpr):
    if isinstance(e, PrototypeAtom):
        return ("atom", e.name)
    if isinstance(e, ClosedSurfaceGroup):
        return ("surface", e.surface.genus, e.surface.orientable)
    if isinstance(e, FreeGroup):
        return ("free", e.rank)
    if isinstance(e, Trivial):
        return ("trivial",)
    if isinstance(e, SurfaceEtage):
        return ("etage", splitting_key(e.splitting))
    if isinstance(e, FreeProduct):
        return ("product", tuple(sorted(factor_signature(f) for f in e.factors)))
    raise TypeError(f"not a group expression: {e!r}")


@dataclass(frozen=True)
class CoreNormalForm:
    """Multiset of one-ended factor signatures; empty means trivial core."""

    factors: tuple[tuple, ...]

    @property
    def is_trivial(self) -> bool:
        return not self.factors

    def __str__(self) -> str:
        if self.is_trivial:
            return "1"
        names = []
        for sig in self.factors:
            if sig[0] == "atom":
                names.append(sig[1])
            elif sig[0] == "surface":
                names.append(("S" if sig[2] else "N") + f"({sig[1]})")
            else:
                names.append("<splitting-group>")
        return " * ".join(names)


@dataclass(frozen=True)
class F2Core:
    """The elementary core of an elementarily free group."""

    def __str__(self) -> str:
        return "F(2)"


def _strip_once(item, rng: random.Random | None):
    """One rewriting step: returns (new worklist items, terminal signatures)."""
    if isinstance(item, Trivial) or isinstance(item, FreeGroup):
        return [], []
    if isinstance(item, FreeProduct):
        return list(item.factors), []
    if isinstance(item, ClosedSurfaceGroup):
        if item.surface == N3:
            return [], [factor_signature(item)]
        return [], []
    if isinstance(item, PrototypeAtom):
        return [], [factor_signature(item)]
    if isinstance(item, SurfaceEtage):
        cert = item.certificate
        if not (isinstance(cert, Decision) and cert.is_yes):
            raise MissingCertificate("surface etage without a Yes certificate")
        return list(item.splitting.bottoms), []
    if isinstance(item, CenteredSplitting):
        decision = decide_retractable(item)
        if decision.is_yes:
            return list(item.bottoms), []
        if decision.is_no:
            return [], [splitting_key(item)]
        raise EtageUndecided(decision)
    raise TypeError(f"not a group expression: {item!r}")


def core(e: "GroupExpr | CenteredSplitting", rng: random.Random | None = None) -> CoreNormalForm:
    """Normal form under etage stripping; rng randomizes the rewrite order
    (the result is the same for every order)."""
    work: list = [e]
    terminal: list[tuple] = []
    while work:
        idx = rng.randrange(len(work)) if rng is not None else 0
        item = work.pop(idx)
        new_items, sigs = _strip_once(item, rng)
        if rng is not None:
            for it in new_items:
                work.insert(rng.randrange(len(work) + 1), it)
        else:
            work.extend(new_items)
        terminal.extend(sigs)
    return CoreNormalForm(tuple(sorted(terminal)))


def ecore(e: "GroupExpr | CenteredSplitting") -> "CoreNormalForm | F2Core":
    """The core, with the trivial core replaced by the F2 marker."""
    if not isinstance(e, CenteredSplitting) and is_abelian_expr(e):
        raise AbelianInput("the elementary core is defined for non-abelian groups")
    nf = core(e)
    return F2Core() if nf.is_trivial else nf


def equiv(e1, e2) -> bool:
    """Elementary equivalence: the cores must be isomorphic."""
    for e in (e1, e2):
        if not isinstance(e, CenteredSplitting) and is_abelian_expr(e):
            raise AbelianInput("elementary equivalence is decided for non-abelian groups")
    return core(e1) == core(e2)


def is_efree(e) -> bool:
    """Elementarily free: elementarily equivalent to F(2), i.e. trivial core."""
    if not isinstance(e, CenteredSplitting) and is_abelian_expr(e):
        raise AbelianInput("elementarily-free is decided for non-abelian groups")
    return core(e).is_trivial


# --------------------------------------------------------------------------
# Prototype recognition
# --------------------------------------------------------------------------


def is_prototype(e: "GroupExpr | CenteredSplitting") -> Decision:
    """A prototype is a free product of one-ended groups that are not
    extended etages; atoms answer by their declared facts."""
    if isinstance(e, CenteredSplitting):
        decision = decide_retractable(e)
        if decision.is_yes:
            return Decision.no("extended-etage", {"witness": "retractable splitting"})
        if decision.is_no:
            return Decision.yes({"factors": [str(splitting_key(e))]})
        return Decision.unknown(decision.bounds)
    if isinstance(e, Trivial):
        return Decision.yes({"factors": []})
    undeclared = []
    for f in expr_factors(e):
        if isinstance(f, FreeGroup):
            return Decision.no("cyclic-free-factor", {"rank": f.rank})
        if isinstance(f, SurfaceEtage):
            return Decision.no("extended-etage", {})
        if isinstance(f, ClosedSurfaceGroup):
            if f.surface != N3:
                return Decision.no("extended-etage",
                                   {"surface": str(f.surface),
                                    "reason": "non-exceptional closed surfaces are etages"})
        elif isinstance(f, PrototypeAtom):
            if not f.facts.one_ended:
                return Decision.no("not-one-ended", {"atom": f.name})
            if not f.facts.has("prototype"):
                undeclared.append(f.name)
        else:
            return Decision.no("not-a-prototype", {})
    if undeclared:
        return Decision.unknown({"undeclared-atoms": undeclared})
    return Decision.yes({"factors": [str(factor_signature(f)) for f in expr_factors(e)]})


def is_prime(e) -> Decision:
    """Prime models are exactly the one-ended prototypes."""
    if not isinstance(e, CenteredSplitting) and is_abelian_expr(e):
        raise AbelianInput("primality is decided for non-abelian groups")
    proto = is_prototype(e)
    if proto.is_unknown:
        return Decision.unknown(proto.bounds)
    if proto.is_no:
        return Decision.no("not-a-prototype", {"why": proto.obstruction})
    nf = core(e)
    if len(nf.factors) == 1:
        return Decision.yes({"prototype": str(nf)})
    return Decision.no("infinitely-ended-prototype", {"factors": len(nf.factors)})


# --------------------------------------------------------------------------
# Minimality
# --------------------------------------------------------------------------


def _absorb_small_sockets(c: CenteredSplitting) -> "Surface | CenteredSplitting | None":
    """Glue a Moebius band at each cyclic bottom whose index sum is 2 via a
    single index-2 edge.  Returns the closed surface if every bottom is
    absorbed, the reduced splitting otherwise, or None when the data is
    outside this normalization (handled conservatively by callers)."""
    surface = c.surface
    bottoms = list(c.bottoms)
    edges = list(c.edges)
    changed = True
    while changed:
        changed = False
        sums: dict[int, int] = {}
        for e in edges:
            assert isinstance(e.gluing, PowerGluing)
            sums[e.bottom] = sums.get(e.bottom, 0) + abs(e.gluing.power)
        for j, total in sums.items():
            if total != 2:
                continue
            here = [e for e in edges if e.bottom == j]
            if len(here) != 1:
                return None  # a redundant [1,1] vertex; not produced by constructors
            surface = glue_mobius(Surface(surface.genus,
                                          surface.boundary, surface.orientable))
            removed_boundary = here[0].boundary
            edges = [Edge(e.boundary - (1 if e.boundary > removed_boundary else 0),
                          e.bottom - (1 if e.bottom > j else 0), e.gluing)
                     for e in edges if e is not here[0]]
            bottoms.pop(j)
            changed = True
            break
    if not bottoms:
        return surface
    return CenteredSplitting(surface, tuple(bottoms), tuple(edges))


def _minimal_multiparachute(e: SurfaceEtage) -> bool:
    """The minimal-side conditions for an elementarily free multi-parachute."""
    c = e.splitting
    if not all_bottoms_cyclic(c):
        return False
    absorbed = _absorb_small_sockets(c)
    if absorbed is None:
        return False
    if isinstance(absorbed, Surface):
        return absorbed == N4
    c = absorbed
    if abs(euler_char(c.surface)) > 2:
        return False
    if is_exceptional(c.surface) or c.surface == S12:
        return False
    sums: dict[int, int] = {}
    for edge in c.edges:
        assert isinstance(edge.gluing, PowerGluing)
        sums[edge.bottom] = sums.get(edge.bottom, 0) + abs(edge.gluing.power)
    return all(total >= 3 for total in sums.values())


def _k_pattern(e: GroupExpr) -> bool:
    """The double-amalgam pattern over a twice-punctured Klein bottle whose
    bottoms are one-ended prototypes with no cyclic splitting relative to the
    glued square elements; such groups are minimal."""
    factors = expr_factors(e)
    etages = [f for f in factors if isinstance(f, SurfaceEtage)]
    if len(etages) != 1:
        return False
    for f in factors:
        if isinstance(f, SurfaceEtage):
            continue
        if not (isinstance(f, PrototypeAtom) and f.facts.one_ended
                and f.facts.has("prototype")):
            return False
    c = etages[0].splitting
    if c.surface != Surface(2, 2, orientable=False) or len(c.bottoms) != 2:
        return False
    for edge in c.edges:
        bottom = c.bottoms[edge.bottom]
        if not isinstance(bottom, PrototypeAtom):
            return False
        facts = bottom.facts
        if not (facts.one_ended and facts.has("prototype")):
            return False
        if not isinstance(edge.gluing, PowerGluing) or edge.gluing.power != 1:
            return False
        element = edge.gluing.element
        if not facts.has("no_cyclic_splitting", element):
            return False
        if not facts.has("square", element):
            return False
    return True


def is_minimal(e) -> Decision:
    """No proper elementarily embedded subgroup."""
    if not isinstance(e, CenteredSplitting) and is_abelian_expr(e):
        raise AbelianInput("minimality is decided for non-abelian groups")
    proto = is_prototype(e)
    if proto.is_yes:
        return Decision.yes({"reason": "prototypes have no proper elementarily "
                                       "embedded subgroup"})
    nf = core(e)
    if nf.is_trivial:
        # elementarily free: F2, the closed non-orientable genus-4 surface,
        # and the catalogued multi-parachutes are the only minimal ones
        if isinstance(e, FreeGroup) and e.rank == 2:
            return Decision.yes({"reason": "F(2)"})
        if isinstance(e, ClosedSurfaceGroup) and e.surface == N4:
            return Decision.yes({"reason": "closed non-orientable genus 4"})
        if isinstance(e, SurfaceEtage) and _minimal_multiparachute(e):
            return Decision.yes({"reason": "minimal multi-parachute"})
        return Decision.no("proper-elementarily-embedded-subgroup",
                           {"reason": "elementarily free but not F(2), N(4), or a "
                                      "minimal multi-parachute"})
    if len(nf.factors) == 1:
        if proto.is_unknown:
            return Decision.unknown(proto.bounds)
        return Decision.no("core-embeds-elementarily",
                           {"core": str(nf),
                            "reason": "a one-ended core embeds elementarily and "
                                      "the group is not a prototype"})
    # infinitely-ended core
    if _k_pattern(e):
        return Decision.yes({"reason": "double amalgam over prototypes with no "
                                       "cyclic splitting relative to the glued "
                                       "elements"})
    if any(isinstance(f, FreeGroup) for f in expr_factors(e)):
        return Decision.no("cyclic-free-factor",
                           {"reason": "the complement of a cyclic free factor "
                                      "embeds elementarily"})
    return Decision.unknown({"reason": "minimality with an infinitely-ended core "
                                       "is only decided for the double-amalgam "
                                       "pattern"})


# --------------------------------------------------------------------------
# Catalog of minimal elementarily free multi-parachutes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    splitting: CenteredSplitting
    retractable: Decision


def _candidate_surfaces(max_genus: int) -> list[Surface]:
    out = []
    for genus in range(0, max_genus + 1):
        for boundary in range(1, 5):
            for orientable in (True, False):
                if not orientable and genus < 1:
                    continue
                s = Surface(genus, boundary, orientable)
                if not is_hyperbolic(s):
                    continue
                if abs(euler_char(s)) > 2:
                    continue
                if is_exceptional(s) or s == S12:
                    continue
                out.append(s)
    return out


def _set_partitions(items: Sequence[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _canonical_indices(block: Sequence[int], orientable: bool) -> tuple[int, ...]:
    """Canonical index tuple at one cyclic bottom.  Boundary-reversing
    homeomorphisms exist on non-orientable surfaces, so individual signs are
    immaterial there; on orientable surfaces only a global flip (inverting z)
    identifies sign patterns."""
    if not orientable:
        return tuple(sorted(abs(d) for d in block))
    plain = tuple(sorted(block, key=lambda d: (abs(d), d < 0)))
    flipped = tuple(sorted((-d for d in block), key=lambda d: (abs(d), d < 0)))
    return max(plain, flipped)


def minimal_efree_catalog(max_genus: int, max_boundary: int,
                          max_index: int) -> list[CatalogEntry]:
    """All multi-parachutes within the bounds on the minimal side: retractable,
    |chi| <= 2, non-exceptional, not a twice-punctured torus, and index sum
    >= 3 at every cyclic bottom.  Entries whose retractability depends on
    criteria beyond this engine carry an Unknown flag."""
    if max_genus < 0 or max_boundary < 1 or max_index < 1:
        raise ValueError("catalog bounds must be positive")
    entries: dict[tuple, CatalogEntry] = {}
    import itertools
    for s in _candidate_surfaces(max_genus):
        b = s.boundary
        if b > max_boundary:
            continue
        index_choices = [d for d in range(-max_index, max_index + 1) if d != 0]
        for partition in _set_partitions(list(range(b))):
            for indices in itertools.product(index_choices, repeat=b):
                blocks = [[indices[i] for i in block] for block in partition]
                if any(sum(abs(d) for d in block) < 3 for block in blocks):
                    continue
                key = (str(s), tuple(sorted(_canonical_indices(block, s.orientable)
                                            for block in blocks)))
                if key in entries:
                    continue
                canonical_blocks = sorted(_canonical_indices(block, s.orientable)
                                          for block in blocks)
                assignment = []
                for j, block in enumerate(canonical_blocks):
                    for d in block:
                        assignment.append((j, d))
                try:
                    c = make_multiparachute(s, assignment)
                except ValueError:
                    continue
                decision = decide_retractable(c)
                if decision.is_no:
                    continue
                entries[key] = CatalogEntry(c, decision)
    return [entries[k] for k in sorted(entries)]
