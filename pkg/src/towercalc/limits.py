"""Discriminating sequences of retractions on simple etages over free groups.

The twist automorphism multiplies the Dehn twists around all edges of the
splitting; composing a retraction with its powers yields the candidate
discriminating sequence, which is verified on a ball of the etage group
using amalgam/HNN normal forms (plain free reduction is not enough because
the etage group itself is not free).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .decision import Decision
from .retract import EtageLayout, make_layout
from .splittings import CenteredSplitting, simple
from .words import (FreeHom, Word, enumerate_ball, gen, identity, power_of,
                    primitive_root, word)

BALL_CAP = 200_000


@dataclass(frozen=True)
class EtagePresentation:
    """A simple etage over a free group together with a candidate retraction."""

    layout: EtageLayout
    rho: FreeHom  # ambient -> bottom, identity on the bottom generators

    @property
    def ambient_rank(self) -> int:
        return self.layout.ambient_rank

    @property
    def bottom_rank(self) -> int:
        return self.layout.base_rank


def etage_presentation(c: CenteredSplitting, rho_assignments: dict[str, Word]) -> EtagePresentation:
    """Build the presentation of a simple etage over a free bottom with the
    retraction given on the surface generators (bottom generators are fixed)."""
    if not simple(c):
        raise ValueError("etage presentations are built for simple splittings")
    layout = make_layout(c, extended=False)
    if layout is None:
        raise ValueError("the bottom must be a free group")
    rho = layout.hom_from_assignments(rho_assignments)
    return EtagePresentation(layout, rho)


def check_retraction(ep: EtagePresentation) -> list[str]:
    """Problems with the stored retraction (empty for a genuine one)."""
    problems = []
    for k, r in enumerate(ep.layout.relators()):
        if not ep.rho.apply(r).is_identity:
            problems.append(f"relator {k} does not die")
    return problems


# --------------------------------------------------------------------------
# Twists
# --------------------------------------------------------------------------


def twist_auto(ep: EtagePresentation) -> FreeHom:
    """The product of the twists around all edges, in boundary order.

    The tree-edge twist fixes the bottom, conjugates the surface generators
    by the gluing word, and corrects each stable letter on the right; the
    twist around a non-tree edge multiplies its stable letter by the boundary
    generator.  Every relator is preserved (checked)."""
    layout = ep.layout
    rank = layout.ambient_rank
    images = [gen(rank, i) for i in range(rank)]
    by_boundary = {e.boundary: e for e in layout.splitting.edges}

    w0 = layout.gluing_word(by_boundary[0], rank)
    q_top = layout.base_rank + layout.surface_count + layout.surface.boundary - 1
    for idx in range(layout.base_rank, q_top):
        images[idx] = w0 * images[idx] * w0.inverse()
    for boundary, pos in layout.stable_pos.items():
        images[pos - 1] = images[pos - 1] * w0.inverse()
    tau = FreeHom(rank, rank, tuple(images))

    for boundary in sorted(layout.stable_pos):
        images = [gen(rank, i) for i in range(rank)]
        pos = layout.stable_pos[boundary]
        images[pos - 1] = gen(rank, pos - 1) * layout.c_gen(boundary)
        tau = tau.then(FreeHom(rank, rank, tuple(images)))

    for k, r in enumerate(layout.relators()):
        image = tau.apply(r)
        from .words import is_conjugate
        if not is_conjugate(image, r):
            raise ValueError(f"twist does not preserve relator {k}")
    return tau


def rho_n(ep: EtagePresentation, n: int) -> FreeHom:
    """The retraction composed with the n-th power of the twist."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    tau = twist_auto(ep)
    hom = ep.rho
    for _ in range(n):
        hom = tau.then(hom)
    return hom


# --------------------------------------------------------------------------
# Word problem in the etage group (amalgam + HNN normal form)
# --------------------------------------------------------------------------


def _syllables(layout: EtageLayout, w: Word):
    """Split an ambient word into ('A'|'Q', word) syllables and ('t', boundary, sign)."""
    out: list = []
    base = layout.base_rank
    q_top = base + layout.surface_count + layout.surface.boundary - 1
    stable_of = {pos - 1: boundary for boundary, pos in layout.stable_pos.items()}
    for letter in w.letters:
        idx = abs(letter) - 1
        if idx in stable_of:
            out.append(("t", stable_of[idx], 1 if letter > 0 else -1))
        else:
            kind = "A" if idx < base else "Q"
            if out and out[-1][0] == kind:
                out[-1] = (kind, out[-1][1] + (letter,))
            else:
                out.append((kind, (letter,)))
    return out


def _amalgam_reduce(layout: EtageLayout, syllables: list) -> list:
    """Normal form across the tree edge <c_1> = <w_1>: a syllable lying in
    the edge subgroup migrates to the other side and merges with a neighbor,
    strictly shortening the syllable sequence."""
    rank = layout.ambient_rank
    by_boundary = {e.boundary: e for e in layout.splitting.edges}
    w0 = layout.gluing_word(by_boundary[0], rank)
    c0 = layout.boundary_gen(0)
    current = [(kind, Word(rank, letters)) for kind, letters in syllables]
    while True:
        merged: list = []
        for kind, wrd in current:
            if wrd.is_identity:
                continue
            if merged and merged[-1][0] == kind:
                merged[-1] = (kind, merged[-1][1] * wrd)
            else:
                merged.append((kind, wrd))
        current = merged
        if len(current) <= 1:
            return current
        converted = False
        for i, (kind, wrd) in enumerate(current):
            ref = c0 if kind == "Q" else w0
            other = w0 if kind == "Q" else c0
            k = power_of(wrd, ref)
            if k is not None:
                current[i] = ("A" if kind == "Q" else "Q", other ** k)
                converted = True
                break
        if not converted:
            return current


def is_trivial_in_etage(ep: EtagePresentation, w: Word) -> bool:
    """Word problem for the etage group via Britton reductions over the
    stable letters and the amalgam normal form across the tree edge."""
    layout = ep.layout
    rank = layout.ambient_rank
    by_boundary = {e.boundary: e for e in layout.splitting.edges}
    items = _syllables(layout, w)

    def vertex_element(chunk: list) -> Word | None:
        """The group element of a t-free chunk if it lies in a vertex group."""
        reduced = _amalgam_reduce(layout, [(k, tuple(wrd.letters))
                                           for k, wrd in chunk])
        if not reduced:
            return identity(rank)
        if len(reduced) == 1:
            return reduced[0][1]
        return None

    changed = True
    while changed:
        changed = False
        # locate an innermost pinch t_i^e X t_i^-e with X free of stable letters
        for i, item in enumerate(items):
            if item[0] != "t":
                continue
            for j in range(i + 1, len(items)):
                if items[j][0] != "t":
                    continue
                _, b2, s2 = items[j]
                _, b1, s1 = item
                if b1 != b2 or s1 != -s2:
                    break
                chunk = [(k, Word(rank, letters)) for k, letters in
                         ((it[0], it[1]) for it in items[i + 1:j])]
                x = vertex_element(chunk)
                if x is None:
                    break
                cgen = layout.c_gen(b1) if b1 > 0 else layout.boundary_gen(0)
                wref = layout.gluing_word(by_boundary[b1], rank)
                if s1 > 0:
                    k = power_of(x, cgen)
                    replacement = None if k is None else ("A", (wref ** k).letters)
                else:
                    k = power_of(x, wref)
                    replacement = None if k is None else ("Q", (cgen ** k).letters)
                if replacement is None:
                    break
                items = items[:i] + ([replacement] if replacement[1] else []) + items[j + 1:]
                changed = True
                break
            if changed:
                break
    if any(item[0] == "t" for item in items):
        return False
    element = _amalgam_reduce(layout, [(k, letters) for k, letters in items])
    return not element


# --------------------------------------------------------------------------
# Discriminating sequences
# --------------------------------------------------------------------------


def discriminating_report(ep: EtagePresentation, radius: int, n_max: int) -> dict:
    """Least n such that rho_m kills no nontrivial ball word for m in [n, n_max]."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return {"found_n": 0, "checked_words": 0, "n_max": n_max, "radius": radius}
    rank = ep.ambient_rank
    count = 0
    candidates: list[Word] = []
    for w in enumerate_ball(rank, radius):
        if w.is_identity:
            continue
        count += 1
        if count > BALL_CAP:
            raise ValueError(f"ball enumeration exceeds the cap {BALL_CAP}")
        if not is_trivial_in_etage(ep, w):
            candidates.append(w)

    tau = twist_auto(ep)
    hom = ep.rho
    last_kill = -1
    for m in range(n_max + 1):
        if m > 0:
            hom = tau.then(hom)
        if any(hom.apply(w).is_identity for w in candidates):
            last_kill = m
    found = last_kill + 1 if last_kill < n_max else None
    return {"found_n": found, "checked_words": len(candidates),
            "n_max": n_max, "radius": radius}


def verify_discriminating(ep: EtagePresentation, radius: int, n_max: int) -> int | None:
    return discriminating_report(ep, radius, n_max)["found_n"]


# --------------------------------------------------------------------------
# Baumslag-style exponent checks
# --------------------------------------------------------------------------


def baumslag_check(a: list[Word], c: list[Word],
                   p_range: tuple[int, int] = (1, 8)) -> Decision:
    """Check non-triviality of a_0 c_1^{p_1} a_1 ... c_k^{p_k} a_k over the
    exponent box [C, p_max]: Yes(C) gives the least such C in range, No a
    collapsing exponent tuple when the boundary hypothesis fails, Unknown an
    exhausted range."""
    k = len(c)
    if k < 1 or len(a) != k + 1:
        raise ValueError("need k >= 1 interpolating words and k+1 coefficients")
    if any(ci.is_identity for ci in c):
        raise ValueError("the c_i must be non-trivial")
    p_min, p_max = p_range
    if p_min < 1 or p_max < p_min:
        raise ValueError("bad exponent range")

    # hypothesis a_i c_{i+1}^{+inf} != c_i^{-inf}, decided exactly on roots
    hypothesis_ok = True
    for i in range(1, k):
        left, _ = primitive_root(a[i] * c[i] * a[i].inverse())  # c_{i+1} is c[i]
        right, _ = primitive_root(c[i - 1].inverse())
        if left == right:
            hypothesis_ok = False
            break

    def product(powers: tuple[int, ...]) -> Word:
        out = a[0]
        for i in range(k):
            out = out * c[i] ** powers[i] * a[i + 1]
        return out

    collapses = [p for p in itertools.product(range(p_min, p_max + 1), repeat=k)
                 if product(p).is_identity]
    if not collapses:
        if hypothesis_ok:
            return Decision.yes({"C": p_min, "p_max": p_max})
        return Decision.unknown({"reason": "hypothesis violated; no collapse found "
                                           "in range", "p_range": list(p_range)})
    if not hypothesis_ok:
        return Decision.no("collapse", {"witness": [list(p) for p in collapses[:3]]})
    cutoff = 1 + max(min(p) for p in collapses)
    if cutoff <= p_max:
        return Decision.yes({"C": cutoff, "p_max": p_max,
                             "collapses_below": len(collapses)})
    return Decision.unknown({"reason": "collapses persist to the top of the range",
                             "p_range": list(p_range),
                             "witness": [list(p) for p in collapses[:3]]})
