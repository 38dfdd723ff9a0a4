"""Exact arithmetic in finitely generated free groups.

Elements are stored as flat sequences of signed 1-based generator indices,
always freely reduced, so equality of group elements is equality of tuples.
The module also provides the bounded genus oracles (products of commutators
or squares) used by the retractability deciders.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .decision import Decision

GENUS_RADIUS_CAP = 8
GENUS_CANDIDATE_CAP = 500_000

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


def default_names(rank: int) -> tuple[str, ...]:
    if rank <= len(_ALPHABET):
        return tuple(_ALPHABET[:rank])
    return tuple(_ALPHABET) + tuple(f"x{i}" for i in range(len(_ALPHABET), rank))


def _reduce_letters(letters: Iterable[int], rank: int) -> tuple[int, ...]:
    stack: list[int] = []
    for letter in letters:
        if letter == 0 or abs(letter) > rank:
            raise ValueError(f"generator index {letter} out of rank {rank}")
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


@dataclass(frozen=True, slots=True)
class Word:
    """A freely reduced word; the empty word is the identity."""

    rank: int
    letters: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for i, letter in enumerate(self.letters):
            if letter == 0 or abs(letter) > self.rank:
                raise ValueError(f"generator index {letter} out of rank {self.rank}")
            if i and self.letters[i - 1] == -letter:
                raise ValueError("word is not freely reduced")

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        if self.rank != other.rank:
            raise ValueError("cannot multiply words of different ambient rank")
        return Word(self.rank, _reduce_letters(self.letters + other.letters, self.rank))

    def inverse(self) -> "Word":
        return Word(self.rank, tuple(-l for l in reversed(self.letters)))

    def __pow__(self, n: int) -> "Word":
        if n == 0:
            return Word(self.rank)
        base = self if n > 0 else self.inverse()
        out = base
        for _ in range(abs(n) - 1):
            out = out * base
        return out

    def conjugate_by(self, g: "Word") -> "Word":
        """g * self * g^-1."""
        return g * self * g.inverse()


def word(rank: int, letters: Iterable[int]) -> Word:
    """Build a word from a raw letter sequence, reducing it."""
    return Word(rank, _reduce_letters(letters, rank))


def gen(rank: int, index: int, sign: int = 1) -> Word:
    """The generator with 0-based ``index`` (or its inverse)."""
    if not 0 <= index < rank:
        raise ValueError(f"generator index {index} out of rank {rank}")
    return Word(rank, ((index + 1) if sign > 0 else -(index + 1),))


def identity(rank: int) -> Word:
    return Word(rank)


def reduce(letters: Iterable[int], rank: int) -> Word:
    """Freely reduce a raw signed-index sequence."""
    return Word(rank, _reduce_letters(letters, rank))


def commutator(u: Word, v: Word) -> Word:
    return u * v * u.inverse() * v.inverse()


def cyclic_reduce(w: Word) -> tuple[Word, Word]:
    """Return (core, conjugator) with w = conjugator * core * conjugator^-1."""
    letters = list(w.letters)
    prefix: list[int] = []
    while len(letters) >= 2 and letters[0] == -letters[-1]:
        prefix.append(letters[0])
        letters = letters[1:-1]
    return Word(w.rank, tuple(letters)), Word(w.rank, tuple(prefix))


def is_cyclically_reduced(w: Word) -> bool:
    return len(w) < 2 or w.letters[0] != -w.letters[-1]


def cyclic_rotations(w: Word) -> Iterator[tuple[int, ...]]:
    letters = w.letters
    for i in range(max(1, len(letters))):
        yield letters[i:] + letters[:i]


def conjugacy_class_key(w: Word) -> tuple[int, ...]:
    """Canonical representative of the conjugacy class (least rotation of the core)."""
    core, _ = cyclic_reduce(w)
    if core.is_identity:
        return ()
    return min(cyclic_rotations(core))


def is_conjugate(u: Word, v: Word) -> bool:
    if u.rank != v.rank:
        raise ValueError("conjugacy requires the same ambient rank")
    return conjugacy_class_key(u) == conjugacy_class_key(v)


def conjugator(u: Word, v: Word) -> Word | None:
    """Some g with g * v * g^-1 == u, or None if not conjugate."""
    core_u, pre_u = cyclic_reduce(u)
    core_v, pre_v = cyclic_reduce(v)
    if len(core_u) != len(core_v):
        return None
    if core_u.is_identity:
        return identity(u.rank)
    for j, rotation in enumerate(cyclic_rotations(core_v)):
        if rotation == core_u.letters:
            # rot_j(core_v) = p^-1 core_v p with p the length-j prefix
            prefix = Word(v.rank, core_v.letters[:j])
            return pre_u * prefix.inverse() * pre_v.inverse()
    return None


def primitive_root(w: Word) -> tuple[Word, int]:
    """Write w = r^k with r not a proper power; identity yields (w, 0)."""
    core, pre = cyclic_reduce(w)
    n = len(core)
    if n == 0:
        return w, 0
    for period in range(1, n + 1):
        if n % period:
            continue
        if core.letters == core.letters[:period] * (n // period):
            root = pre * Word(w.rank, core.letters[:period]) * pre.inverse()
            return root, n // period
    raise AssertionError("unreachable")


def power_of(w: Word, base: Word) -> int | None:
    """The integer k with base^k == w, if one exists."""
    if w.is_identity:
        return 0
    if base.is_identity:
        return None
    root_w, k_w = primitive_root(w)
    root_b, k_b = primitive_root(base)
    if root_w == root_b:
        pass
    elif root_w == root_b.inverse():
        k_w = -k_w
    else:
        return None
    if k_w % k_b:
        return None
    return k_w // k_b


def commute(u: Word, v: Word) -> bool:
    return u * v == v * u


@dataclass(frozen=True, slots=True)
class FreeHom:
    """A homomorphism between free groups, one image word per source generator."""

    source_rank: int
    target_rank: int
    images: tuple[Word, ...]

    def __post_init__(self) -> None:
        if len(self.images) != self.source_rank:
            raise ValueError("images list length must equal the source rank")
        for im in self.images:
            if im.rank != self.target_rank:
                raise ValueError("image word has wrong ambient rank")

    def apply(self, w: Word) -> Word:
        if w.rank != self.source_rank:
            raise ValueError("word rank does not match the homomorphism source")
        letters: list[int] = []
        for letter in w.letters:
            img = self.images[abs(letter) - 1]
            letters.extend(img.letters if letter > 0 else img.inverse().letters)
        return Word(self.target_rank, _reduce_letters(letters, self.target_rank))

    def then(self, other: "FreeHom") -> "FreeHom":
        """other o self (apply self first)."""
        if self.target_rank != other.source_rank:
            raise ValueError("homomorphisms do not compose")
        return FreeHom(self.source_rank, other.target_rank,
                       tuple(other.apply(im) for im in self.images))

    @staticmethod
    def identity(rank: int) -> "FreeHom":
        return FreeHom(rank, rank, tuple(gen(rank, i) for i in range(rank)))


def apply_hom(h: FreeHom, w: Word) -> Word:
    return h.apply(w)


def abelianize(w: Word, modulus: int = 0) -> tuple[int, ...]:
    """Exponent-sum vector, reduced mod 2 when modulus == 2."""
    if modulus not in (0, 2):
        raise ValueError("modulus must be 0 or 2")
    vec = [0] * w.rank
    for letter in w.letters:
        vec[abs(letter) - 1] += 1 if letter > 0 else -1
    if modulus == 2:
        vec = [v % 2 for v in vec]
    return tuple(vec)


# ---------------------------------------------------------------------------
# Parsing and printing.  Words print as juxtaposed generator names with ^-1
# and integer exponents; [a,b] is sugar for a b a^-1 b^-1.
# ---------------------------------------------------------------------------


class WordSyntaxError(ValueError):
    pass


def format_word(w: Word, names: Sequence[str] | None = None) -> str:
    names = tuple(names) if names is not None else default_names(w.rank)
    if w.is_identity:
        return "1"
    parts: list[str] = []
    i = 0
    letters = w.letters
    while i < len(letters):
        letter = letters[i]
        j = i
        while j < len(letters) and letters[j] == letter:
            j += 1
        count = j - i
        name = names[abs(letter) - 1]
        exp = count if letter > 0 else -count
        parts.append(name if exp == 1 else f"{name}^{exp}")
        i = j
    return " ".join(parts)


def _tokenize_word(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()[],":
            tokens.append(ch)
            i += 1
        elif ch == "^":
            j = i + 1
            if j < len(text) and text[j] in "+-":
                j += 1
            while j < len(text) and text[j].isdigit():
                j += 1
            if j == i + 1 or not text[i + 1:j].lstrip("+-"):
                raise WordSyntaxError(f"bad exponent at position {i}")
            tokens.append(text[i:j])
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
        elif ch == "1":
            tokens.append("1")
            i += 1
        else:
            raise WordSyntaxError(f"unexpected character {ch!r} in word")
    return tokens


class _WordParser:
    def __init__(self, tokens: list[str], names: Sequence[str], rank: int):
        self.tokens = tokens
        self.pos = 0
        self.names = {name: idx for idx, name in enumerate(names)}
        self.rank = rank

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise WordSyntaxError("unexpected end of word")
        self.pos += 1
        return tok

    def parse_sequence(self, stop: set[str]) -> list[int]:
        letters: list[int] = []
        while True:
            tok = self.peek()
            if tok is None or tok in stop:
                return letters
            letters.extend(self.parse_factor())

    def parse_factor(self) -> list[int]:
        tok = self.take()
        if tok == "1":
            base: list[int] = []
        elif tok == "(":
            base = self.parse_sequence({")"})
            if self.take() != ")":
                raise WordSyntaxError("expected )")
        elif tok == "[":
            left = self.parse_sequence({","})
            if self.take() != ",":
                raise WordSyntaxError("expected , in commutator")
            right = self.parse_sequence({"]"})
            if self.take() != "]":
                raise WordSyntaxError("expected ]")
            base = left + right + [-l for l in reversed(left)] + [-l for l in reversed(right)]
        elif tok in self.names:
            base = [self.names[tok] + 1]
        else:
            raise WordSyntaxError(f"unknown generator {tok!r}")
        nxt = self.peek()
        if nxt is not None and nxt.startswith("^"):
            self.take()
            exp = int(nxt[1:])
            if exp < 0:
                base = [-l for l in reversed(base)]
                exp = -exp
            base = base * exp
        return base


def parse_word(text: str, names: Sequence[str] | None = None, rank: int | None = None) -> Word:
    """Parse a word such as ``a b^-1 (a c)^2 [a,b]`` over the given generator names."""
    if names is None:
        if rank is None:
            raise ValueError("parse_word needs names or a rank")
        names = default_names(rank)
    rank = len(names) if rank is None else rank
    parser = _WordParser(_tokenize_word(text), names, rank)
    letters = parser.parse_sequence(set())
    if parser.peek() is not None:
        raise WordSyntaxError(f"trailing token {parser.peek()!r}")
    return reduce(letters, rank)


# ---------------------------------------------------------------------------
# Ball enumeration and the bounded genus oracles.
# ---------------------------------------------------------------------------


def _letter_key(letter: int) -> tuple[int, int]:
    return (abs(letter), 0 if letter > 0 else 1)


def words_of_length(rank: int, length: int) -> list[Word]:
    """All freely reduced words of exactly the given length, in lexicographic order."""
    if length == 0:
        return [identity(rank)]
    alphabet = sorted((l for i in range(1, rank + 1) for l in (i, -i)), key=_letter_key)
    out: list[tuple[int, ...]] = [(l,) for l in alphabet]
    for _ in range(length - 1):
        out = [w + (l,) for w in out for l in alphabet if l != -w[-1]]
    return [Word(rank, w) for w in out]


def enumerate_ball(rank: int, radius: int) -> Iterator[Word]:
    """Freely reduced words of length <= radius, by length then lexicographically."""
    for length in range(radius + 1):
        yield from words_of_length(rank, length)


def ball(rank: int, radius: int) -> list[Word]:
    return list(enumerate_ball(rank, radius))


def is_square(w: Word) -> Word | None:
    """A root s with s^2 == w, or None."""
    core, pre = cyclic_reduce(w)
    n = len(core)
    if n % 2:
        return None
    if n == 0:
        return identity(w.rank)
    half = core.letters[: n // 2]
    if half != core.letters[n // 2:]:
        return None
    return pre * Word(w.rank, half) * pre.inverse()


def _commutator_witness(g: Word, radius: int) -> tuple[Word, Word] | None:
    """Some (x, y) with [x,y] == g and |x|,|y| <= radius, by bounded search.

    For fixed x, every y conjugating x^-1 to x^-1 g differs by the
    centralizer of x, so only rotation conjugators and small root powers
    need to be tried.
    """
    if g.is_identity:
        return identity(g.rank), identity(g.rank)
    for x in enumerate_ball(g.rank, radius):
        if x.is_identity:
            continue
        target = x.inverse() * g
        base = conjugator(target, x.inverse())
        if base is None:
            continue
        root, _ = primitive_root(x)
        for k in range(0, radius + 1):
            for signed in ((k,) if k == 0 else (k, -k)):
                y = base * root ** signed
                if len(y) <= radius and commutator(x, y) == g:
                    return x, y
    return None


def _tuples_by_total_length(rank: int, count: int, radius: int) -> Iterator[tuple[Word, ...]]:
    by_length = [words_of_length(rank, l) for l in range(radius + 1)]
    for total in range(count * radius + 1):
        for parts in itertools.product(range(radius + 1), repeat=count):
            if sum(parts) != total:
                continue
            yield from itertools.product(*(by_length[p] for p in parts))


def genus_oracle(g: Word, kind: str, max_pieces: int, radius: int,
                 hard_cap: int = GENUS_RADIUS_CAP,
                 require_nonabelian: bool = False) -> Decision:
    """Decide whether g is a product of <= max_pieces commutators or squares.

    Yes carries witness words (pairs (x_i, y_i) flattened for commutators).
    No fires only on the abelianization obstruction.  Unknown reports the
    exhausted bounds.  With require_nonabelian, witnesses whose letters
    generate an abelian subgroup are skipped.
    """
    if kind not in ("commutators", "squares"):
        raise ValueError("kind must be 'commutators' or 'squares'")
    if max_pieces < 1 or radius < 1:
        raise ValueError("max_pieces and radius must be >= 1")
    if radius > hard_cap:
        raise ValueError(f"radius {radius} exceeds the hard cap {hard_cap}")

    vec = abelianize(g, 2 if kind == "squares" else 0)
    if any(vec):
        return Decision.no("abelianization", {"vector": list(vec), "modulus": 2 if kind == "squares" else 0})

    def good(witness: tuple[Word, ...]) -> bool:
        if not require_nonabelian:
            return True
        nontrivial = [w for w in witness if not w.is_identity]
        return any(not commute(u, v) for u, v in itertools.combinations(nontrivial, 2))

    examined = 0
    if kind == "squares":
        for prefix in _tuples_by_total_length(g.rank, max_pieces - 1, radius):
            examined += 1
            if examined > GENUS_CANDIDATE_CAP:
                return Decision.unknown({"radius": radius, "candidates": GENUS_CANDIDATE_CAP})
            residual = g
            for w in reversed(prefix):
                residual = (w ** 2).inverse() * residual
            root = is_square(residual)
            if root is not None and len(root) <= radius:
                witness = prefix + (root,)
                if good(witness):
                    return Decision.yes({"kind": kind, "witness": [format_word(w) for w in witness]})
    else:
        if max_pieces == 1:
            pair = _commutator_witness(g, radius)
            if pair is not None and good(pair):
                return Decision.yes({"kind": kind, "witness": [format_word(w) for w in pair]})
        else:
            for prefix in _tuples_by_total_length(g.rank, 2 * (max_pieces - 1), radius):
                examined += 1
                if examined > GENUS_CANDIDATE_CAP:
                    return Decision.unknown({"radius": radius, "candidates": GENUS_CANDIDATE_CAP})
                residual = g
                pairs = [(prefix[2 * i], prefix[2 * i + 1]) for i in range(max_pieces - 1)]
                for x, y in reversed(pairs):
                    residual = commutator(x, y).inverse() * residual
                tail = _commutator_witness(residual, radius)
                if tail is not None and good(prefix + tail):
                    witness = prefix + tail
                    return Decision.yes({"kind": kind, "witness": [format_word(w) for w in witness]})
    return Decision.unknown({"radius": radius, "max_pieces": max_pieces})


def verify_genus_witness(g: Word, kind: str, witness: Sequence[Word]) -> bool:
    """Replay a Yes certificate of the genus oracle by direct reduction."""
    if kind == "squares":
        prod = identity(g.rank)
        for w in witness:
            prod = prod * w * w
        return prod == g
    prod = identity(g.rank)
    for i in range(0, len(witness), 2):
        prod = prod * commutator(witness[i], witness[i + 1])
    return prod == g
