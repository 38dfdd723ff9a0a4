"""Retractability of centered splittings.

The decider layers necessary conditions (exceptionality, genus bounds, the
per-bottom homology obstruction) over constructive branches: explicit
retraction formulas for (multi-)parachutes, genus-oracle searches for free
bottoms, and declared square/commutator facts for opaque prototype bottoms.
Every Yes ships a certificate; for word-level bottoms the certificate is
replayed mechanically before it is returned.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .decision import Decision
from .surfaces import Surface, euler_char, is_exceptional
from .splittings import (CenteredSplitting, Edge, FreeGroup, FreeProduct, GroupExpr,
                         PowerGluing, PrototypeAtom, WordGluing, all_bottoms_cyclic,
                         atoms_of, expr_factors, require_valid, simple,
                         valence_one_bottoms, _is_z_bottom)
from .words import (FreeHom, Word, ball, commutator, commute, conjugator,
                    format_word, gen, genus_oracle, identity, is_conjugate,
                    parse_word, word)

DEFAULT_RADIUS = 4
DEFAULT_CONJ_RADIUS = 2


# --------------------------------------------------------------------------
# Presentation layout for splittings whose bottoms are free groups
# --------------------------------------------------------------------------


def _wordable(c: CenteredSplitting) -> bool:
    return all(isinstance(f, FreeGroup) for b in c.bottoms for f in expr_factors(b))


@dataclass(frozen=True)
class EtageLayout:
    """Generators and relators of the etage presentation of a splitting.

    Ambient generators: the bottom generators (identified with the first
    base_rank letters of the target), the surface generators, the boundary
    generators c2..cb, and one stable letter per non-tree edge.  The target
    is the base, extended by one extra letter t when requested (used for
    witnesses over an abelian base).
    """

    splitting: CenteredSplitting
    extended: bool
    base_rank: int
    target_rank: int
    bottom_offset: tuple[tuple[int, ...], ...]
    surface_count: int
    ambient_rank: int
    names: tuple[str, ...]
    target_names: tuple[str, ...]
    tree_boundaries: frozenset[int]
    stable_pos: dict[int, int]  # boundary -> 1-based ambient letter

    @property
    def surface(self) -> Surface:
        return self.splitting.surface

    def base_letter(self, bottom: int, factor: int, index: int) -> int:
        return self.bottom_offset[bottom][factor] + index + 1

    def genus_gen(self, j: int) -> Word:
        return gen(self.ambient_rank, self.base_rank + j)

    def c_gen(self, boundary: int) -> Word:
        if boundary == 0:
            raise ValueError("boundary 0 has no generator of its own")
        return gen(self.ambient_rank, self.base_rank + self.surface_count + boundary - 1)

    def stable_gen(self, boundary: int) -> Word:
        return gen(self.ambient_rank, self.stable_pos[boundary] - 1)

    def genus_word(self) -> Word:
        s = self.surface
        out = identity(self.ambient_rank)
        if s.orientable:
            for j in range(s.genus):
                out = out * commutator(self.genus_gen(2 * j), self.genus_gen(2 * j + 1))
        else:
            for j in range(s.genus):
                out = out * self.genus_gen(j) ** 2
        return out

    def boundary_gen(self, boundary: int) -> Word:
        if boundary > 0:
            return self.c_gen(boundary)
        rest = identity(self.ambient_rank)
        for i in range(1, self.surface.boundary):
            rest = rest * self.c_gen(i)
        return self.genus_word() * rest.inverse()

    def _shift(self, w: Word, offset: int, rank: int) -> Word:
        return word(rank, tuple(l + offset if l > 0 else l - offset for l in w.letters))

    def gluing_word(self, e: Edge, rank: int) -> Word:
        bottom = self.splitting.bottoms[e.bottom]
        if isinstance(e.gluing, WordGluing):
            offset = self.bottom_offset[e.bottom][e.gluing.factor]
            return self._shift(e.gluing.word, offset, rank)
        if _is_z_bottom(bottom):
            letter = self.bottom_offset[e.bottom][0] + 1
            return word(rank, (letter,) * e.gluing.power if e.gluing.power > 0
                        else (-letter,) * (-e.gluing.power))
        raise ValueError("gluing is not expressible as a word")

    def relators(self) -> tuple[Word, ...]:
        out = []
        for e in sorted(self.splitting.edges, key=lambda e: e.boundary):
            w = self.gluing_word(e, self.ambient_rank)
            if e.boundary in self.tree_boundaries:
                out.append(self.boundary_gen(e.boundary) * w.inverse())
            else:
                t = self.stable_gen(e.boundary)
                out.append(t * self.boundary_gen(e.boundary) * t.inverse() * w.inverse())
        return tuple(out)

    def hom_from_assignments(self, assignments: dict[str, Word]) -> FreeHom:
        """Extend surface/stable-letter images by the identity on the bottom.

        Boundary generators c_i not assigned explicitly are derived from the
        edge relations c_i = t_i^-1 w_i t_i, so the non-tree relators hold by
        construction and only the surface relation is at stake.
        """
        images: list[Word | None] = [None] * self.ambient_rank
        for i in range(self.base_rank):
            images[i] = gen(self.target_rank, i)
        for name, img in assignments.items():
            if name not in self.names:
                raise ValueError(f"unknown generator {name!r}")
            idx = self.names.index(name)
            if idx < self.base_rank:
                raise ValueError("witnesses may not move bottom generators")
            images[idx] = img
        by_boundary = {e.boundary: e for e in self.splitting.edges}
        for boundary in range(1, self.surface.boundary):
            idx = self.base_rank + self.surface_count + boundary - 1
            if images[idx] is not None:
                continue
            w = self.gluing_word(by_boundary[boundary], self.target_rank)
            if boundary in self.tree_boundaries:
                images[idx] = w
            else:
                t_img = images[self.stable_pos[boundary] - 1]
                if t_img is None:
                    raise ValueError(f"stable letter for boundary {boundary} unassigned")
                images[idx] = t_img.inverse() * w * t_img
        for i, img in enumerate(images):
            if img is None:
                images[i] = identity(self.target_rank)
        return FreeHom(self.ambient_rank, self.target_rank, tuple(images))

    def check_witness(self, hom: FreeHom) -> list[str]:
        problems = []
        for i in range(self.base_rank):
            if hom.images[i] != gen(self.target_rank, i):
                problems.append(f"not the identity on bottom generator {self.names[i]}")
        for k, r in enumerate(self.relators()):
            if not hom.apply(r).is_identity:
                problems.append(f"relator {k} does not die")
        q_images = self.surface_images(hom)
        if not any(not commute(u, v) for u, v in itertools.combinations(q_images, 2)):
            problems.append("surface group image is abelian")
        return problems

    def surface_images(self, hom: FreeHom) -> list[Word]:
        out = [hom.apply(self.genus_gen(j)) for j in range(self.surface_count)]
        for boundary in range(self.surface.boundary):
            out.append(hom.apply(self.boundary_gen(boundary)))
        return [w for w in out if not w.is_identity]


def base_names(c: CenteredSplitting) -> tuple[str, ...]:
    if all_bottoms_cyclic(c):
        if len(c.bottoms) == 1:
            return ("z",)
        return tuple(f"z{j+1}" for j in range(len(c.bottoms)))
    from .words import default_names
    total = sum(f.rank for b in c.bottoms for f in expr_factors(b)
                if isinstance(f, FreeGroup))
    return default_names(total)


def surface_gen_names(s: Surface) -> tuple[str, ...]:
    if s.orientable:
        return tuple(x for j in range(s.genus) for x in (f"u{j+1}", f"v{j+1}"))
    return tuple(f"u{j+1}" for j in range(s.genus))


def make_layout(c: CenteredSplitting, extended: bool = False) -> EtageLayout | None:
    """Presentation layout, or None when some bottom is opaque."""
    if not _wordable(c):
        return None
    offsets: list[tuple[int, ...]] = []
    pos = 0
    for b in c.bottoms:
        row = []
        for f in expr_factors(b):
            row.append(pos)
            pos += f.rank  # type: ignore[union-attr]
        offsets.append(tuple(row))
    base_rank = pos
    s = c.surface
    surface_count = 2 * s.genus if s.orientable else s.genus
    b = s.boundary

    lowest: dict[int, int] = {}
    for e in c.edges:
        lowest[e.bottom] = min(lowest.get(e.bottom, e.boundary), e.boundary)
    tree = frozenset(lowest.values())
    names = list(base_names(c)) + list(surface_gen_names(s))
    names += [f"c{i+1}" for i in range(1, b)]
    stable_pos: dict[int, int] = {}
    for e in sorted(c.edges, key=lambda e: e.boundary):
        if e.boundary not in tree:
            names.append(f"t{e.boundary + 1}")
            stable_pos[e.boundary] = len(names)
    target_names = list(base_names(c)) + (["t"] if extended else [])
    return EtageLayout(
        splitting=c, extended=extended, base_rank=base_rank,
        target_rank=base_rank + (1 if extended else 0),
        bottom_offset=tuple(offsets), surface_count=surface_count,
        ambient_rank=len(names), names=tuple(names),
        target_names=tuple(target_names), tree_boundaries=tree,
        stable_pos=stable_pos)


# --------------------------------------------------------------------------
# Certificates
# --------------------------------------------------------------------------


def _certificate(layout: EtageLayout | None, assignments: dict[str, Word] | None,
                 facts: list[list[str]] | None = None, extended: bool = False,
                 note: str | None = None) -> dict:
    cert: dict = {"type": "retraction", "extended": extended}
    if layout is not None and assignments is not None:
        cert["target"] = " * ".join(f"F({n})" for n in layout.target_names) \
            if extended else "base"
        cert["assignments"] = {name: format_word(w, layout.target_names)
                               for name, w in sorted(assignments.items())}
        cert["verified"] = True
    if facts:
        cert["facts"] = facts
    if note:
        cert["note"] = note
    return cert


def verify_certificate(c: CenteredSplitting, decision: Decision) -> bool:
    """Replay a Yes certificate of decide_retractable."""
    if not decision.is_yes or not isinstance(decision.certificate, dict):
        return False
    cert = decision.certificate
    if "assignments" in cert:
        layout = make_layout(c, extended=bool(cert.get("extended")))
        if layout is None:
            return False
        try:
            assignments = {name: parse_word(text, layout.target_names)
                           for name, text in cert["assignments"].items()}
            hom = layout.hom_from_assignments(assignments)
        except ValueError:
            return False
        return not layout.check_witness(hom)
    if "facts" in cert:
        for kind, element in cert["facts"]:
            if not any(a.facts.has(kind, element) for b in c.bottoms for a in atoms_of(b)):
                return False
        return True
    return False


# --------------------------------------------------------------------------
# Necessary conditions
# --------------------------------------------------------------------------


def _homology_obstruction(c: CenteredSplitting) -> Decision | None:
    """Per bottom, the edge words must die in H_1 (orientable case) or in
    H_1 mod 2 (non-orientable case); skipped for opaque bottoms."""
    from .words import abelianize
    modulus = 0 if c.surface.orientable else 2
    for j, bottom in enumerate(c.bottoms):
        factors = expr_factors(bottom)
        if not all(isinstance(f, FreeGroup) for f in factors):
            continue
        total: dict[tuple[int, int], int] = {}
        for e in c.edges:
            if e.bottom != j:
                continue
            if isinstance(e.gluing, WordGluing):
                vec = abelianize(e.gluing.word)
                for i, v in enumerate(vec):
                    total[(e.gluing.factor, i)] = total.get((e.gluing.factor, i), 0) + v
            else:
                total[(0, 0)] = total.get((0, 0), 0) + e.gluing.power
        bad = any(v % 2 for v in total.values()) if modulus == 2 \
            else any(total.values())
        if bad:
            name = "index-sum" if all_bottoms_cyclic(c) and c.surface.orientable else \
                "index-parity" if all_bottoms_cyclic(c) else "homology"
            return Decision.no(name, {
                "bottom": j,
                "sums": {f"factor{k}.gen{i}": v for (k, i), v in sorted(total.items())},
                "modulus": modulus})
    return None


def _genus_bound(c: CenteredSplitting) -> Decision | None:
    g = c.surface.genus
    n = len(c.bottoms)
    b = c.surface.boundary
    n1 = valence_one_bottoms(c)
    if g < n1:
        return Decision.no("genus-bound", {"genus": g, "valence-one-bottoms": n1})
    if g + b < 2 * n:
        return Decision.no("genus-bound", {"genus": g, "boundary": b, "bottoms": n})
    return None


# --------------------------------------------------------------------------
# Parachutes and multi-parachutes (all bottoms cyclic)
# --------------------------------------------------------------------------


def _powers(c: CenteredSplitting) -> list[int]:
    out = [0] * c.surface.boundary
    for e in c.edges:
        assert isinstance(e.gluing, PowerGluing)
        out[e.boundary] = e.gluing.power
    return out


def _z(layout: EtageLayout, power: int) -> Word:
    return gen(layout.target_rank, 0) ** power


def _t(layout: EtageLayout) -> Word:
    return gen(layout.target_rank, layout.target_rank - 1)


def _try_witness(layout: EtageLayout, assignments: dict[str, Word],
                 extended: bool) -> Decision | None:
    hom = layout.hom_from_assignments(assignments)
    if layout.check_witness(hom):
        return None
    full = dict(assignments)
    for boundary in range(1, layout.surface.boundary):
        name = f"c{boundary + 1}"
        idx = layout.names.index(name)
        full[name] = hom.images[idx]
    return Decision.yes(_certificate(layout, full, extended=extended))


def _decide_parachute(c: CenteredSplitting, radius: int, conj_radius: int) -> Decision:
    s = c.surface
    d = _powers(c)
    g, b = s.genus, s.boundary
    layout = make_layout(c, extended=True)
    assert layout is not None
    t = _t(layout)

    if s.orientable:
        # sum(d) == 0 was enforced by the homology obstruction
        if g >= 1 and b >= 2:
            assignments = {"u1": _z(layout, d[0]) * t, "v1": _z(layout, d[1]),
                           "t2": t.inverse()}
            found = _try_witness(layout, assignments, extended=True)
            if found:
                return found
        return _cyclic_bounded_search(c, layout, radius, conj_radius)

    # non-orientable; sum(d) is even by the homology obstruction
    total = sum(d)
    if g == 1:
        return _cyclic_bounded_search(c, layout, radius, conj_radius)
    if g == 2:
        run = _even_run(d)
        if run is None:
            # GLS criterion for the twice-punctured Klein bottle over Z:
            # retractable iff both indices are even
            return Decision.no("index-parity",
                               {"surface": str(s), "indices": d,
                                "rule": "indices at each edge must be even"})
        lo, hi = run
        e = sum(d[lo:hi + 1])
        s1, s2 = sum(d[:lo]), sum(d[hi + 1:])
        assignments = {}
        for i in range(lo, hi + 1):
            assignments[f"t{i+1}"] = t.inverse()
        assignments["u1"] = _z(layout, s1) * t * _z(layout, e // 2) * t.inverse() * _z(layout, -s1)
        assignments["u2"] = _z(layout, (s1 + s2) // 2)
        found = _try_witness(layout, assignments, extended=True)
        if found:
            return found
        return _cyclic_bounded_search(c, layout, radius, conj_radius)
    # g >= 3
    if b == 1:
        assignments = {"u1": t, "u2": t.inverse(), "u3": _z(layout, d[0] // 2)}
        found = _try_witness(layout, assignments, extended=True)
        if found:
            return found
        return _cyclic_bounded_search(c, layout, radius, conj_radius)
    k = total // 2
    assignments = {"t2": t.inverse(),
                   "u1": _z(layout, d[0]) * t * _z(layout, d[1] - k),
                   "u2": _z(layout, k - d[1]),
                   "u3": _z(layout, d[1] - k) * t.inverse() * _z(layout, 2 * k - d[0] - d[1])}
    found = _try_witness(layout, assignments, extended=True)
    if found:
        return found
    return _cyclic_bounded_search(c, layout, radius, conj_radius)


def _even_run(d: Sequence[int]) -> tuple[int, int] | None:
    """A consecutive run inside positions 1..b-1 with even index sum."""
    b = len(d)
    for width in range(1, b):
        for lo in range(1, b - width + 1):
            hi = lo + width - 1
            if sum(d[lo:hi + 1]) % 2 == 0:
                return lo, hi
    return None


def _cyclic_bounded_search(c: CenteredSplitting, layout: EtageLayout,
                           radius: int, conj_radius: int) -> Decision:
    """Joint bounded search over stable-letter images and genus witnesses."""
    s = c.surface
    edges = sorted(c.edges, key=lambda e: e.boundary)
    non_tree = [e for e in edges if e.boundary not in layout.tree_boundaries]
    candidates = ball(layout.target_rank, conj_radius)
    kind = "commutators" if s.orientable else "squares"
    genus_names = surface_gen_names(s)
    budget = 2 * s.genus if s.orientable else s.genus

    for combo in itertools.product(candidates, repeat=len(non_tree)):
        assignments = {f"t{e.boundary + 1}": img for e, img in zip(non_tree, combo)}
        # the boundary word the genus part must equal
        prod = identity(layout.target_rank)
        for e in edges:
            w = layout.gluing_word(e, layout.target_rank)
            if e.boundary in layout.tree_boundaries:
                prod = prod * w
            else:
                timg = assignments[f"t{e.boundary + 1}"]
                prod = prod * timg.inverse() * w * timg
        if s.genus == 0:
            if not prod.is_identity:
                continue
        else:
            oracle = genus_oracle(prod, kind, s.genus, min(radius, 6),
                                  require_nonabelian=False)
            if not oracle.is_yes:
                continue
            witness = [parse_word(wtext, rank=prod.rank)
                       for wtext in oracle.certificate["witness"]]
            for j, wimg in enumerate(witness):
                assignments[genus_names[j]] = wimg
        found = _try_witness(layout, assignments, extended=layout.extended)
        if found:
            return found
    return Decision.unknown({"conjugator-radius": conj_radius, "radius": radius,
                             "reason": "bounded search exhausted (GLS criteria "
                                       "beyond the encoded cases)"})


def _decide_all_cyclic(c: CenteredSplitting, radius: int, conj_radius: int) -> Decision:
    if simple(c):
        return _decide_parachute(c, radius, conj_radius)
    layout = make_layout(c, extended=False)
    assert layout is not None
    return _cyclic_bounded_search(c, layout, radius, conj_radius)


# --------------------------------------------------------------------------
# General bottoms: per-edge squares/commutators with a genus budget
# --------------------------------------------------------------------------


def _atom_for(bottom: GroupExpr, element: str) -> PrototypeAtom | None:
    for a in atoms_of(bottom):
        if element in a.facts.elements:
            return a
    return None


def _decide_general(c: CenteredSplitting, radius: int, conj_radius: int) -> Decision:
    s = c.surface
    g = s.genus
    orientable = s.orientable
    kind = "commutators" if orientable else "squares"
    edges = sorted(c.edges, key=lambda e: e.boundary)

    # Z bottoms with several edges interleave with the genus part; that mixed
    # case falls outside the constructive branches encoded here.
    for j, bottom in enumerate(c.bottoms):
        if _is_z_bottom(bottom) and sum(1 for e in c.edges if e.bottom == j) > 1:
            return Decision.unknown({"reason": "mixed splitting with a multi-edge "
                                               "cyclic bottom", "radius": radius})

    costs: list[int] = []
    witness_words: list[list[Word] | None] = []
    facts_used: list[list[str]] = []
    for e in edges:
        bottom = c.bottoms[e.bottom]
        if isinstance(e.gluing, PowerGluing) and not _is_z_bottom(bottom):
            atom = _atom_for(bottom, e.gluing.element)
            assert atom is not None
            dpow = e.gluing.power
            if orientable:
                if abs(dpow) == 1 and atom.facts.has("commutator", e.gluing.element):
                    costs.append(1)
                    facts_used.append(["commutator", e.gluing.element])
                    witness_words.append(None)
                else:
                    return Decision.unknown(
                        {"reason": f"no commutator fact for {e.gluing.element!r}",
                         "radius": radius})
            else:
                if dpow % 2 == 0 or atom.facts.has("square", e.gluing.element):
                    costs.append(1)
                    if dpow % 2:
                        facts_used.append(["square", e.gluing.element])
                    witness_words.append(None)
                else:
                    return Decision.unknown(
                        {"reason": f"no square fact for {e.gluing.element!r}",
                         "radius": radius})
        else:
            # explicit word in a free factor (or a single-edge Z bottom)
            factors = expr_factors(bottom)
            if isinstance(e.gluing, WordGluing):
                target = factors[e.gluing.factor]
                if not isinstance(target, FreeGroup):
                    return Decision.unknown({"reason": "explicit gluing into an "
                                                       "opaque factor", "radius": radius})
                w = e.gluing.word
            else:
                w = gen(1, 0) ** e.gluing.power
            best: tuple[int, list[Word]] | None = None
            for k in range(1, g + 1):
                oracle = genus_oracle(w, kind, k, radius)
                if oracle.is_yes:
                    ws = [parse_word(t, rank=w.rank) for t in oracle.certificate["witness"]]
                    best = (k, ws)
                    break
                if oracle.is_no:
                    return Decision.no("homology", oracle.detail or
                                       {"edge": e.boundary})
            if best is None:
                return Decision.unknown({"reason": f"genus oracle exhausted on "
                                                   f"boundary {e.boundary}",
                                         "radius": radius, "max_pieces": g})
            costs.append(best[0])
            witness_words.append(best[1])

    if sum(costs) > g:
        return Decision.unknown({"reason": "genus budget exceeded",
                                 "needed": sum(costs), "genus": g})

    layout = make_layout(c, extended=False)
    if layout is None:
        # opaque bottoms: symbolic certificate backed by the declared facts
        return Decision.yes(_certificate(None, None, facts=facts_used or [],
                                         note="fact-based witness on opaque bottoms;"
                                              " genus budget "
                                              f"{sum(costs)} <= {g}"))

    assignments: dict[str, Word] = {}
    slot = 0
    pieces_per_slot = 2 if orientable else 1
    genus_names = surface_gen_names(s)
    for e, ws in zip(edges, witness_words):
        assert ws is not None
        shifted = [layout._shift(wd, layout.bottom_offset[e.bottom][
            e.gluing.factor if isinstance(e.gluing, WordGluing) else 0],
            layout.target_rank) for wd in ws]
        for piece_start in range(0, len(shifted), pieces_per_slot):
            for offset in range(pieces_per_slot):
                assignments[genus_names[pieces_per_slot * slot + offset]] = \
                    shifted[piece_start + offset]
            slot += 1
    found = _try_witness(layout, assignments, extended=False)
    if found:
        return found
    # the straight assembly can have abelian image; perturb one stable letter
    for e in edges:
        if e.boundary in layout.tree_boundaries:
            continue
        for letter in range(layout.base_rank):
            retry = dict(assignments)
            retry[f"t{e.boundary + 1}"] = gen(layout.target_rank, letter)
            found = _try_witness(layout, retry, extended=False)
            if found:
                return found
    return Decision.unknown({"reason": "witness assembly failed the non-abelian "
                                       "image check", "radius": radius})


# --------------------------------------------------------------------------
# The decider
# --------------------------------------------------------------------------


def decide_retractable(c: CenteredSplitting, radius: int = DEFAULT_RADIUS,
                       conj_radius: int = DEFAULT_CONJ_RADIUS) -> Decision:
    """Decide whether the centered splitting is retractable.

    Yes certificates carry an explicit retraction (identity on the bottoms)
    or the prototype facts that justify one; No names the obstruction.
    """
    require_valid(c)
    if is_exceptional(c.surface):
        return Decision.no("exceptional-surface", {"surface": str(c.surface)})
    bound = _genus_bound(c)
    if bound is not None:
        return bound
    hom = _homology_obstruction(c)
    if hom is not None:
        return hom
    if all_bottoms_cyclic(c):
        return _decide_all_cyclic(c, radius, conj_radius)
    return _decide_general(c, radius, conj_radius)


# --------------------------------------------------------------------------
# Boundary-preserving maps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BPM:
    """Candidate boundary-preserving map, given by images of the free basis
    of the surface group: genus generators first, then c2..cb.  Images are
    words in the concatenated bottom (rank = base) or in the ambient
    presentation (rank = ambient)."""

    images: tuple[Word, ...]
    conjugators: tuple[Word, ...] | None = None  # per boundary component


class ExceptionalSurfaceError(ValueError):
    pass


def check_bpm(b: BPM, c: CenteredSplitting, radius: int = DEFAULT_RADIUS) -> Decision:
    """Check the non-degeneracy clauses for a candidate boundary-preserving map."""
    require_valid(c)
    if is_exceptional(c.surface):
        raise ExceptionalSurfaceError(str(c.surface))
    layout = make_layout(c)
    if layout is None:
        return Decision.unknown({"reason": "opaque bottoms: boundary condition is "
                                           "fact-based only"})
    s = c.surface
    expected = layout.surface_count + s.boundary - 1
    if len(b.images) != expected:
        raise ValueError(f"expected {expected} images (genus generators then c2..cb)")

    ambient = b.images and b.images[0].rank == layout.ambient_rank
    rank = layout.ambient_rank if ambient else layout.base_rank

    # Identify images of every boundary generator: c1 derived from the rest.
    genus_imgs = list(b.images[:layout.surface_count])
    c_imgs = list(b.images[layout.surface_count:])
    if s.orientable:
        rword = identity(rank)
        for j in range(s.genus):
            rword = rword * commutator(genus_imgs[2 * j], genus_imgs[2 * j + 1])
    else:
        rword = identity(rank)
        for j in range(s.genus):
            rword = rword * genus_imgs[j] ** 2
    rest = identity(rank)
    for wimg in c_imgs:
        rest = rest * wimg
    boundary_imgs = [rword * rest.inverse()] + c_imgs

    if ambient:
        # the only decidable ambient case: the map is essentially the identity
        qgens = [layout.genus_gen(j) for j in range(layout.surface_count)] + \
                [layout.c_gen(i) for i in range(1, s.boundary)]
        if list(b.images) == qgens:
            return Decision.no("iso-onto-conjugate", {"map": "identity"})
        for gconj in ball(layout.ambient_rank, 1):
            if list(b.images) == [q.conjugate_by(gconj) for q in qgens]:
                return Decision.no("iso-onto-conjugate", {"map": "conjugation"})
        return Decision.unknown({"reason": "ambient-valued map: iso-onto-conjugate "
                                           "clause not settled", "radius": radius})

    # boundary condition: image of each boundary generator conjugate to its gluing
    by_boundary = {e.boundary: e for e in c.edges}
    for i in range(s.boundary):
        wref = layout.gluing_word(by_boundary[i], layout.base_rank)
        if not is_conjugate(boundary_imgs[i], wref):
            return Decision.no("boundary-condition",
                               {"boundary": i,
                                "image": format_word(boundary_imgs[i], layout.target_names),
                                "gluing": format_word(wref, layout.target_names)})

    # non-abelian image via the fold rank of the image subgroup
    from .folding import fold
    nontrivial = [w for w in (genus_imgs + boundary_imgs) if not w.is_identity]
    if not nontrivial or fold(nontrivial).subgroup_rank < 2:
        return Decision.no("abelian-image", {})

    # images inside the base cannot be an isomorphism onto a conjugate of the
    # surface vertex group: a conjugate of Q meets each bottom conjugate in a
    # cyclic subgroup, and the image here is a non-abelian subgroup of the base.
    return Decision.yes({"type": "bpm", "boundary-condition": "exact",
                         "image-rank": fold(nontrivial).subgroup_rank})


class PinchingError(ValueError):
    pass


def build_retraction(c: CenteredSplitting, b: BPM) -> FreeHom:
    """Construct the retraction extending a non-pinching boundary-preserving map
    on a simple splitting over a non-abelian free bottom: identity on the
    bottom, stable letters mapped to inverse conjugators."""
    require_valid(c)
    if not simple(c):
        raise ValueError("build_retraction needs a simple splitting")
    bottom = c.bottoms[0]
    if all(isinstance(f, FreeGroup) and f.rank == 1 for f in expr_factors(bottom)) \
            and len(expr_factors(bottom)) == 1:
        raise ValueError("abelian bottom: a parachute is not a simple etage; "
                         "the witness retraction targets base * <t> instead")
    layout = make_layout(c)
    if layout is None:
        raise ValueError("bottom is not a free group")
    check = check_bpm(b, c)
    if not check.is_yes:
        raise ValueError(f"boundary-preserving map rejected: {check.verdict} "
                         f"({check.obstruction or check.bounds})")

    s = c.surface
    genus_imgs = list(b.images[:layout.surface_count])
    c_imgs = list(b.images[layout.surface_count:])
    if s.orientable:
        rword = identity(layout.base_rank)
        for j in range(s.genus):
            rword = rword * commutator(genus_imgs[2 * j], genus_imgs[2 * j + 1])
    else:
        rword = identity(layout.base_rank)
        for j in range(s.genus):
            rword = rword * genus_imgs[j] ** 2
    rest = identity(layout.base_rank)
    for wimg in c_imgs:
        rest = rest * wimg
    boundary_imgs = [rword * rest.inverse()] + c_imgs

    by_boundary = {e.boundary: e for e in c.edges}
    w0 = layout.gluing_word(by_boundary[0], layout.base_rank)
    g0 = conjugator(boundary_imgs[0], w0)
    if g0 is None:
        raise PinchingError("boundary 0 image is not conjugate to its gluing")
    # normalize so that the first boundary is fixed exactly
    genus_imgs = [wimg.conjugate_by(g0.inverse()) for wimg in genus_imgs]
    boundary_imgs = [wimg.conjugate_by(g0.inverse()) for wimg in boundary_imgs]

    assignments: dict[str, Word] = {}
    for j, wimg in enumerate(genus_imgs):
        assignments[surface_gen_names(s)[j]] = wimg
    for i in range(1, s.boundary):
        assignments[f"c{i+1}"] = boundary_imgs[i]
        wref = layout.gluing_word(by_boundary[i], layout.base_rank)
        gi = conjugator(wref, boundary_imgs[i])
        if gi is None:
            raise PinchingError(f"boundary {i} image is not conjugate to its gluing")
        assignments[f"t{i+1}"] = gi
    hom = layout.hom_from_assignments(assignments)
    problems = layout.check_witness(hom)
    if problems:
        raise PinchingError("; ".join(problems))
    return hom


# --------------------------------------------------------------------------
# Pinched quotients
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PinchPiece:
    """One complementary piece of a pinched multicurve, described uncapped:
    its boundary consists of the listed original boundary components plus
    `caps` stubs created by cutting, each capped by a disc."""

    genus: int
    orientable: bool
    boundary_indices: tuple[int, ...]
    caps: int

    def uncapped_surface(self) -> Surface:
        return Surface(self.genus, len(self.boundary_indices) + self.caps,
                       self.orientable)

    def capped_surface(self) -> Surface:
        return Surface(self.genus, len(self.boundary_indices), self.orientable)


@dataclass(frozen=True)
class PinchData:
    pieces: tuple[PinchPiece, ...]
    curves: int


@dataclass(frozen=True)
class PinchedQuotient:
    """The free-product structure after killing the multicurve: surface pieces
    still glued to bottoms, capped closed pieces, and a free group coming
    from the arc graph."""

    star: tuple[tuple[PinchPiece, CenteredSplitting | None], ...]
    closed: tuple[Surface, ...]
    free_rank: int


def pinched_quotient(c: CenteredSplitting, pd: PinchData) -> PinchedQuotient:
    require_valid(c)
    s = c.surface
    claimed = sorted(i for p in pd.pieces for i in p.boundary_indices)
    if claimed != list(range(s.boundary)):
        raise ValueError("pieces must partition the boundary components")
    if sum(p.caps for p in pd.pieces) != 2 * pd.curves:
        raise ValueError("each pinched curve contributes exactly two capped stubs")
    if s.orientable and any(not p.orientable for p in pd.pieces):
        raise ValueError("pieces of an orientable surface are orientable")
    total_chi = sum(euler_char(p.uncapped_surface()) for p in pd.pieces)
    if total_chi != euler_char(s):
        raise ValueError(f"Euler characteristic not conserved: pieces give "
                         f"{total_chi}, surface has {euler_char(s)}")
    if len(pd.pieces) > pd.curves + 1:
        raise ValueError("too many pieces for the number of curves")

    star: list[tuple[PinchPiece, CenteredSplitting | None]] = []
    closed: list[Surface] = []
    for p in pd.pieces:
        if not p.boundary_indices:
            closed.append(p.capped_surface())
            continue
        capped = p.capped_surface()
        sub_edges = []
        bottoms_used = sorted({e.bottom for e in c.edges
                               if e.boundary in p.boundary_indices})
        renum = {j: k for k, j in enumerate(bottoms_used)}
        for local, boundary in enumerate(sorted(p.boundary_indices)):
            e = next(e for e in c.edges if e.boundary == boundary)
            sub_edges.append(Edge(local, renum[e.bottom], e.gluing))
        sub = CenteredSplitting(capped, tuple(c.bottoms[j] for j in bottoms_used),
                                tuple(sub_edges))
        from .splittings import validate
        star.append((p, sub if not validate(sub) else None))
    free_rank = pd.curves - (len(pd.pieces) - 1)
    return PinchedQuotient(tuple(star), tuple(closed), free_rank)


def identity_pinch(c: CenteredSplitting) -> PinchData:
    """The empty multicurve: one piece, the whole surface."""
    s = c.surface
    return PinchData((PinchPiece(s.genus, s.orientable, tuple(range(s.boundary)), 0),), 0)
