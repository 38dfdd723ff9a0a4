"""The etage and tower algebra on group expressions.

Towers are group expressions whose surface-etage nodes carry Yes
retractability certificates.  This module provides the etage constructors,
the mod-2 Betti termination measure, normalization (surface etages above
free-product etages), extended-to-simple upgrades, and stabilization.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable

from .decision import Decision
from .retract import decide_retractable
from .splittings import (CenteredSplitting, ClosedSurfaceGroup, Edge, FreeGroup,
                         FreeProduct, GroupExpr, PowerGluing, PrototypeAtom,
                         SurfaceEtage, Trivial, WordGluing, expr_factors,
                         free_product, require_valid, simple, _is_z_bottom)
from .surfaces import b1_mod2_closed, is_exceptional, euler_char, remove_pants
from .words import Word, abelianize, word


class EtageRejected(ValueError):
    def __init__(self, decision: Decision):
        super().__init__(f"splitting is not retractable: {decision.obstruction}")
        self.decision = decision


class EtageUndecided(ValueError):
    def __init__(self, decision: Decision):
        super().__init__(f"retractability undecided within bounds: {decision.bounds}")
        self.decision = decision


def etage_free_product(h: GroupExpr) -> GroupExpr:
    """One etage of free product type: h * Z, flattened."""
    return free_product(h, FreeGroup(1))


def etage_surface(c: CenteredSplitting, radius: int = 4) -> SurfaceEtage:
    """Certify and wrap a centered splitting as an etage of surface type."""
    decision = decide_retractable(c, radius=radius)
    if decision.is_no:
        raise EtageRejected(decision)
    if decision.is_unknown:
        raise EtageUndecided(decision)
    return SurfaceEtage(c, decision)


def certify(e: GroupExpr, radius: int = 4) -> GroupExpr:
    """Fill in missing retractability certificates on every surface etage."""
    if isinstance(e, SurfaceEtage):
        c = replace(e.splitting,
                    bottoms=tuple(certify(b, radius) for b in e.splitting.bottoms))
        if isinstance(e.certificate, Decision) and e.certificate.is_yes:
            return replace(e, splitting=c)
        fresh = etage_surface(c, radius)
        return SurfaceEtage(c, fresh.certificate, e.relative_marker)
    if isinstance(e, FreeProduct):
        return free_product(*(certify(f, radius) for f in e.factors))
    return e


def is_tower(e: GroupExpr) -> bool:
    """Every surface etage in the expression carries a Yes certificate."""
    if isinstance(e, SurfaceEtage):
        cert = e.certificate
        if not (isinstance(cert, Decision) and cert.is_yes):
            return False
        return all(is_tower(b) for b in e.splitting.bottoms)
    if isinstance(e, FreeProduct):
        return all(is_tower(f) for f in e.factors)
    return True


# --------------------------------------------------------------------------
# Normalization: surface etages above free-product etages
# --------------------------------------------------------------------------


def _embed_word(w: Word, rank: int) -> Word:
    return word(rank, w.letters)


def _enlarge_first_bottom(c: CenteredSplitting, extra: int) -> CenteredSplitting:
    """Replace B_1 by B_1 * F(extra), preserving factor indices of gluings."""
    bottom = c.bottoms[0]
    factors = expr_factors(bottom)
    if len(factors) == 1 and isinstance(bottom, FreeGroup):
        new_bottom: GroupExpr = FreeGroup(bottom.rank + extra)
        new_edges = []
        for e in c.edges:
            if e.bottom == 0 and isinstance(e.gluing, WordGluing):
                new_edges.append(replace(e, gluing=WordGluing(
                    _embed_word(e.gluing.word, bottom.rank + extra), e.gluing.factor)))
            else:
                new_edges.append(e)
        return CenteredSplitting(c.surface, (new_bottom,) + c.bottoms[1:],
                                 tuple(new_edges))
    new_bottom = FreeProduct(tuple(factors) + (FreeGroup(extra),))
    return CenteredSplitting(c.surface, (new_bottom,) + c.bottoms[1:], c.edges)


def normalize_etages(e: GroupExpr) -> GroupExpr:
    """Move free-product etages below surface etages (base swap of Remark-style
    G * Z = etage over (B_1 * Z)); the underlying group is unchanged."""
    if isinstance(e, SurfaceEtage):
        c = e.splitting
        new_bottoms = tuple(normalize_etages(b) for b in c.bottoms)
        return replace(e, splitting=replace(c, bottoms=new_bottoms))
    if not isinstance(e, FreeProduct):
        return e
    factors = [normalize_etages(f) for f in e.factors]
    etages = [f for f in factors if isinstance(f, SurfaceEtage)]
    frees = sum(f.rank for f in factors if isinstance(f, FreeGroup))
    others = [f for f in factors
              if not isinstance(f, (SurfaceEtage, FreeGroup))]
    if not etages or not frees:
        return free_product(*factors)
    absorbed = replace(etages[0],
                       splitting=_enlarge_first_bottom(etages[0].splitting, frees))
    return free_product(absorbed, *etages[1:], *others)


# --------------------------------------------------------------------------
# Mod-2 first Betti number
# --------------------------------------------------------------------------


def _edge_class_mod2(c: CenteredSplitting, e: Edge,
                     offsets: list[list[int]], dims: int) -> tuple[int, ...] | None:
    """Class of the gluing in the direct sum of the bottoms' H_1 mod 2."""
    vec = [0] * dims
    if isinstance(e.gluing, PowerGluing):
        if not _is_z_bottom(c.bottoms[e.bottom]):
            return None
        vec[offsets[e.bottom][0]] = e.gluing.power % 2
        return tuple(vec)
    for i, v in enumerate(abelianize(e.gluing.word, 2)):
        vec[offsets[e.bottom][e.gluing.factor] + i] = v
    return tuple(vec)


def b1_mod2(e: GroupExpr) -> int | None:
    """Exact dim Hom(G, Z/2) when computable from the expression, else None."""
    if isinstance(e, Trivial):
        return 0
    if isinstance(e, FreeGroup):
        return e.rank
    if isinstance(e, ClosedSurfaceGroup):
        return b1_mod2_closed(e.surface)
    if isinstance(e, PrototypeAtom):
        return e.facts.b1_mod2
    if isinstance(e, FreeProduct):
        total = 0
        for f in e.factors:
            sub = b1_mod2(f)
            if sub is None:
                return None
            total += sub
        return total
    if isinstance(e, SurfaceEtage):
        c = e.splitting
        s = c.surface
        offsets: list[list[int]] = []
        dims = 0
        bottom_total = 0
        for bottom in c.bottoms:
            row = []
            for f in expr_factors(bottom):
                sub = b1_mod2(f)
                if sub is None:
                    return None
                row.append(dims)
                dims += sub
                bottom_total += sub
            offsets.append(row)
        total_class = [0] * dims
        for edge in c.edges:
            cls = _edge_class_mod2(c, edge, offsets, dims)
            if cls is None:
                return None
            total_class = [(x + y) % 2 for x, y in zip(total_class, cls)]
        surface_part = 2 * s.genus if s.orientable else s.genus
        stable = s.boundary - len(c.bottoms)
        adjust = 1 if any(total_class) else 0
        return bottom_total + surface_part + stable - adjust
    raise TypeError(f"not a group expression: {e!r}")


def b1_mod2_base(e: SurfaceEtage) -> int | None:
    return b1_mod2(free_product(*e.splitting.bottoms))


# --------------------------------------------------------------------------
# Upgrading an extended etage to a simple one (chi <= -3)
# --------------------------------------------------------------------------


class UpgradeRefused(ValueError):
    pass


def _merge_two_bottoms(c: CenteredSplitting) -> CenteredSplitting:
    """Remove a pair of pants around one boundary component of each of the
    first two bottoms, merging them into a single bottom."""
    edges = sorted(c.edges, key=lambda e: e.boundary)
    e0 = next(e for e in edges if e.bottom == 0)
    e1 = next(e for e in edges if e.bottom == 1)
    factors0 = expr_factors(c.bottoms[0])
    factors1 = expr_factors(c.bottoms[1])
    if not all(isinstance(f, FreeGroup) for f in factors0 + factors1):
        raise UpgradeRefused("merging opaque bottoms needs explicit gluing words")
    rank0 = sum(f.rank for f in factors0)
    rank1 = sum(f.rank for f in factors1)
    merged_rank = rank0 + rank1
    merged: GroupExpr = FreeGroup(merged_rank)

    def lift(e: Edge) -> Word:
        offset = 0
        if e.bottom == 1:
            offset = rank0
        if isinstance(e.gluing, PowerGluing):
            letters = (offset + 1,) * e.gluing.power if e.gluing.power > 0 \
                else (-(offset + 1),) * (-e.gluing.power)
            return word(merged_rank, letters)
        factors = factors0 if e.bottom == 0 else factors1
        local = offset + sum(f.rank for f in factors[:e.gluing.factor])
        return word(merged_rank, tuple(l + local if l > 0 else l - local
                                       for l in e.gluing.word.letters))

    new_surface = remove_pants(c.surface)
    keep = [e for e in edges if e.boundary not in (e0.boundary, e1.boundary)]
    renum = {old.boundary: i for i, old in enumerate(keep)}
    new_edges = []
    for e in keep:
        bottom = 0 if e.bottom in (0, 1) else e.bottom - 1
        gl = e.gluing
        if e.bottom in (0, 1):
            gl = WordGluing(lift(e), 0)
        new_edges.append(Edge(renum[e.boundary], bottom, gl))
    glue_word = lift(e0) * lift(e1)
    new_edges.append(Edge(len(keep), 0, WordGluing(glue_word, 0)))
    return CenteredSplitting(new_surface, (merged,) + c.bottoms[2:], tuple(new_edges))


def upgrade_to_simple(e: SurfaceEtage, radius: int = 4) -> SurfaceEtage:
    """Make a non-simple etage simple without changing the group, possible
    when chi(surface) <= -3; the pathological chi = -2 surfaces are refused."""
    c = e.splitting
    if simple(c):
        return e
    if euler_char(c.surface) >= -2:
        raise UpgradeRefused(
            f"chi({c.surface}) = {euler_char(c.surface)} >= -2: these surfaces "
            "cause pathologies and the etage cannot be made simple")
    cert = e.certificate
    if not (isinstance(cert, Decision) and cert.is_yes):
        raise UpgradeRefused("upgrade needs a retractability certificate")
    current = c
    while not simple(current):
        current = _merge_two_bottoms(current)
    require_valid(current)
    if is_exceptional(current.surface):
        raise UpgradeRefused(f"merged surface {current.surface} is exceptional")
    decision = decide_retractable(current, radius=radius)
    if decision.is_no:
        raise UpgradeRefused(f"merged splitting rejected: {decision.obstruction}")
    if decision.is_unknown:
        decision = Decision.yes({"type": "retraction",
                                 "note": "transferred along pants removal from a "
                                         "certified splitting with chi <= -3",
                                 "verified": False})
    return SurfaceEtage(current, decision, e.relative_marker and 0)


# --------------------------------------------------------------------------
# Stabilization: trade non-simple etages for free factors
# --------------------------------------------------------------------------


def _merge_all_bottoms(c: CenteredSplitting) -> CenteredSplitting:
    """One bottom carrying the free product of all old bottoms; gluings keep
    their meaning through conjugated copies, so the words are unchanged."""
    all_factors: list[GroupExpr] = []
    offsets: list[int] = []
    for b in c.bottoms:
        offsets.append(len(all_factors))
        all_factors.extend(expr_factors(b))
    merged: GroupExpr
    if len(all_factors) == 1:
        merged = all_factors[0]
    else:
        merged = FreeProduct(tuple(all_factors))
    new_edges = []
    for e in sorted(c.edges, key=lambda e: e.boundary):
        gl = e.gluing
        if isinstance(gl, WordGluing):
            gl = WordGluing(gl.word, offsets[e.bottom] + gl.factor)
        elif _is_z_bottom(c.bottoms[e.bottom]):
            letters = (1,) * gl.power if gl.power > 0 else (-1,) * (-gl.power)
            gl = WordGluing(word(1, letters), offsets[e.bottom])
        new_edges.append(Edge(e.boundary, 0, gl))
    return CenteredSplitting(c.surface, (merged,), tuple(new_edges))


def _stabilize_etage(e: SurfaceEtage, radius: int) -> tuple[SurfaceEtage, int]:
    c = e.splitting
    n = len(c.bottoms)
    abelian_base = n == 1 and _is_z_bottom(c.bottoms[0])
    if n == 1 and not abelian_base:
        return e, 0
    if abelian_base:
        # parachute: the simple etage lives over B_1 * Z = F(2)
        new_edges = []
        for edge in sorted(c.edges, key=lambda e: e.boundary):
            assert isinstance(edge.gluing, PowerGluing)
            letters = (1,) * edge.gluing.power if edge.gluing.power > 0 \
                else (-1,) * (-edge.gluing.power)
            new_edges.append(Edge(edge.boundary, 0, WordGluing(word(2, letters), 0)))
        merged = CenteredSplitting(c.surface, (FreeGroup(2),), tuple(new_edges))
        added = 1
    else:
        merged = _merge_all_bottoms(c)
        added = n - 1
    require_valid(merged)
    decision = decide_retractable(merged, radius=radius)
    if decision.is_no:
        raise EtageRejected(decision)
    if decision.is_unknown:
        decision = Decision.yes({"type": "retraction",
                                 "note": "transferred by stabilization of a "
                                         "certified splitting",
                                 "verified": False})
    marker = 0 if e.relative_marker is not None else None
    return SurfaceEtage(merged, decision, marker), added


def stabilize(e: GroupExpr, radius: int = 4) -> tuple[GroupExpr, int]:
    """Rewrite every non-simple etage as a simple one over the merged base;
    the resulting expression presents the group G * F(added)."""
    if isinstance(e, SurfaceEtage):
        c = e.splitting
        new_bottoms = []
        added = 0
        for b in c.bottoms:
            nb, extra = stabilize(b, radius)
            new_bottoms.append(nb)
            added += extra
        node = replace(e, splitting=replace(c, bottoms=tuple(new_bottoms)))
        node, extra = _stabilize_etage(node, radius)
        return node, added + extra
    if isinstance(e, FreeProduct):
        parts = []
        added = 0
        for f in e.factors:
            nf, extra = stabilize(f, radius)
            parts.append(nf)
            added += extra
        return free_product(*parts), added
    return e, 0


def has_nonsimple_etage(e: GroupExpr) -> bool:
    if isinstance(e, SurfaceEtage):
        c = e.splitting
        if not simple(c) or _is_z_bottom(c.bottoms[0]):
            return True
        return any(has_nonsimple_etage(b) for b in c.bottoms)
    if isinstance(e, FreeProduct):
        return any(has_nonsimple_etage(f) for f in e.factors)
    return False
