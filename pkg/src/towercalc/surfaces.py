"""Compact surfaces as (genus, boundary, orientability) value types."""

from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Surface:
    genus: int
    boundary: int
    orientable: bool = True

    def __post_init__(self) -> None:
        if self.genus < 0 or self.boundary < 0:
            raise ValueError("genus and boundary count must be nonnegative")
        if not self.orientable and self.genus < 1:
            raise ValueError("a non-orientable surface has genus >= 1")

    def __str__(self) -> str:
        letter = "S" if self.orientable else "N"
        if self.boundary == 0:
            return f"{letter}({self.genus})"
        return f"{letter}({self.genus},{self.boundary})"


def S(genus: int, boundary: int = 0) -> Surface:
    return Surface(genus, boundary, orientable=True)


def N(genus: int, boundary: int = 0) -> Surface:
    return Surface(genus, boundary, orientable=False)


_SURFACE_RE = re.compile(r"\s*([SN])\s*\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)\s*$")


def parse_surface(text: str) -> Surface:
    m = _SURFACE_RE.match(text)
    if not m:
        raise ValueError(f"bad surface literal {text!r}; expected S(g[,b]) or N(g[,b])")
    letter, genus, boundary = m.group(1), int(m.group(2)), int(m.group(3) or 0)
    return Surface(genus, boundary, orientable=(letter == "S"))


def euler_char(s: Surface) -> int:
    if s.orientable:
        return 2 - 2 * s.genus - s.boundary
    return 2 - s.genus - s.boundary


def is_hyperbolic(s: Surface) -> bool:
    return euler_char(s) < 0


# The four hyperbolic surfaces carrying no pseudo-Anosov map: pair of pants,
# twice-punctured projective plane, once-punctured Klein bottle, closed
# non-orientable genus 3.
EXCEPTIONAL = (S(0, 3), N(1, 2), N(2, 1), N(3, 0))

# Exceptional surfaces with infinite mapping class group carry a special
# curve whose isotopy class is invariant; stored as metadata only.
HAS_SPECIAL_CURVE = (N(2, 1), N(3, 0))


def is_exceptional(s: Surface) -> bool:
    if not is_hyperbolic(s):
        raise ValueError(f"{s} is not hyperbolic (chi = {euler_char(s)})")
    return s in EXCEPTIONAL


def remove_pants(s: Surface) -> Surface:
    """Trade two boundary components for the third boundary of a pants; chi goes up by 1."""
    if s.boundary < 2:
        raise ValueError("remove_pants needs at least two boundary components")
    return Surface(s.genus, s.boundary - 1, s.orientable)


def b1_mod2_closed(s: Surface) -> int:
    """dim of H_1 with Z/2 coefficients for a closed surface."""
    if s.boundary != 0:
        raise ValueError("b1_mod2_closed is defined for closed surfaces only")
    return 2 * s.genus if s.orientable else s.genus


def b1_mod2(s: Surface) -> int:
    """dim of H_1 with Z/2 coefficients (free of rank 2g+b-1 resp. g+b-1 when bounded)."""
    if s.boundary == 0:
        return b1_mod2_closed(s)
    if s.orientable:
        return 2 * s.genus + s.boundary - 1
    return s.genus + s.boundary - 1


def surface_group_rank(s: Surface) -> int:
    """Rank of pi_1 as a free group; defined only for surfaces with boundary."""
    if s.boundary == 0:
        raise ValueError("closed surface groups are not free")
    if s.orientable:
        return 2 * s.genus + s.boundary - 1
    return s.genus + s.boundary - 1


def all_surfaces(max_genus: int, max_boundary: int):
    """All surfaces with genus <= max_genus and boundary <= max_boundary."""
    for genus in range(max_genus + 1):
        for boundary in range(max_boundary + 1):
            yield Surface(genus, boundary, orientable=True)
            if genus >= 1:
                yield Surface(genus, boundary, orientable=False)


def glue_mobius(s: Surface, boundary_index: int = 0) -> Surface:
    """Glue a Moebius band to one boundary component (chi is unchanged)."""
    if s.boundary < 1:
        raise ValueError("no boundary component to glue")
    if s.orientable:
        return Surface(2 * s.genus + 1, s.boundary - 1, orientable=False)
    return Surface(s.genus + 1, s.boundary - 1, orientable=False)
