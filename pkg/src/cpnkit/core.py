"""Colored Petri net data model and the multiset algebra behind it.

Everything here is immutable once built.  A :class:`Net` is a plain
declaration container and may be ill-formed; :func:`validate_net` reports
what is wrong with it instead of raising.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property

MAX_COUNT = 2**63 - 1


class InsufficientTokens(ValueError):
    """Raised when a multiset subtraction would drive a count below zero."""

    def __init__(self, value: str, have: int, need: int, place: str | None = None):
        self.value = value
        self.have = have
        self.need = need
        self.place = place
        where = f" at place {place}" if place is not None else ""
        super().__init__(
            f"insufficient tokens{where}: need {need} of {value!r}, have {have}"
        )


def _checked(count: int) -> int:
    if count > MAX_COUNT:
        raise OverflowError(f"token count {count} exceeds the 64-bit bound")
    return count


class Multiset(Mapping[str, int]):
    """Finite multiset of color values; absent keys have count zero."""

    __slots__ = ("_counts", "_hash")

    def __init__(self, entries: Mapping[str, int] | Iterable[tuple[str, int]] | None = None):
        counts: dict[str, int] = {}
        if entries is not None:
            items = entries.items() if isinstance(entries, Mapping) else entries
            for value, count in items:
                count = int(count)
                if count < 0:
                    raise ValueError(f"negative count {count} for {value!r}")
                if count:
                    counts[value] = _checked(counts.get(value, 0) + count)
        self._counts = counts
        self._hash: int | None = None

    def __getitem__(self, value: str) -> int:
        return self._counts[value]

    def get(self, value: str, default: int = 0) -> int:  # type: ignore[override]
        return self._counts.get(value, default)

    def __iter__(self) -> Iterator[str]:
        return iter(self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    @property
    def size(self) -> int:
        """Total number of tokens, counting multiplicity."""
        return sum(self._counts.values())

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Multiset):
            return self._counts == other._counts
        if isinstance(other, Mapping):
            return self._counts == {k: v for k, v in other.items() if v}
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))
        return self._hash

    def __add__(self, other: Multiset) -> Multiset:
        return multiset_add(self, other)

    def __sub__(self, other: Multiset) -> Multiset:
        return multiset_subtract(self, other)

    def __ge__(self, other: Multiset) -> bool:
        return multiset_contains(self, other)

    def __le__(self, other: Multiset) -> bool:
        return multiset_contains(other, self)

    def __repr__(self) -> str:
        return f"Multiset({self._counts!r})"

    def __str__(self) -> str:
        if not self._counts:
            return "empty"
        return "++".join(f"{n}`{v}" for v, n in self._counts.items())


def multiset_add(a: Multiset, b: Multiset) -> Multiset:
    out = dict(a.items())
    for value, count in b.items():
        out[value] = _checked(out.get(value, 0) + count)
    return Multiset(out)


def multiset_subtract(a: Multiset, b: Multiset, place: str | None = None) -> Multiset:
    out = dict(a.items())
    for value, count in b.items():
        have = out.get(value, 0)
        if have < count:
            raise InsufficientTokens(value, have, count, place)
        out[value] = have - count
    return Multiset(out)


def multiset_contains(a: Multiset, b: Multiset) -> bool:
    """True iff every count in ``b`` is at most the matching count in ``a``."""
    return all(a.get(value, 0) >= count for value, count in b.items())


@dataclass(frozen=True)
class ColorSet:
    """Finite enumeration; the order of ``values`` is the canonical color order."""

    name: str
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError(f"color set {self.name} has no values")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"color set {self.name} repeats a value")

    def __contains__(self, value: object) -> bool:
        return value in self.values


@dataclass(frozen=True)
class Variable:
    name: str
    color_set: str


@dataclass(frozen=True)
class Term:
    """``multiplicity`symbol`` where the symbol is a color value or a variable."""

    multiplicity: int
    symbol: str
    is_variable: bool = False

    def __post_init__(self) -> None:
        if self.multiplicity < 1:
            raise ValueError("term multiplicity must be positive")


@dataclass(frozen=True)
class ArcInscription:
    terms: tuple[Term, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("an arc inscription needs at least one term")

    @classmethod
    def constant(cls, value: str, multiplicity: int = 1) -> ArcInscription:
        return cls((Term(multiplicity, value),))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(t.symbol for t in self.terms if t.is_variable)

    def evaluate(self, binding: Mapping[str, str]) -> Multiset:
        counts: dict[str, int] = {}
        for term in self.terms:
            value = binding[term.symbol] if term.is_variable else term.symbol
            counts[value] = counts.get(value, 0) + term.multiplicity
        return Multiset(counts)

    def __str__(self) -> str:
        return "++".join(f"{t.multiplicity}`{t.symbol}" for t in self.terms)


@dataclass(frozen=True)
class Place:
    name: str
    color_set: str
    capacity: int | None = None

    def __post_init__(self) -> None:
        if self.capacity is not None and self.capacity < 1:
            raise ValueError(f"capacity of {self.name} must be positive")


def _pairs(arcs) -> tuple:
    if isinstance(arcs, Mapping):
        arcs = arcs.items()
    return tuple((str(p), v) for p, v in arcs)


@dataclass(frozen=True)
class Transition:
    """A transition with ordered input, output and inhibitor arcs.

    Arcs are stored as tuples of ``(place, value)`` pairs so that declaration
    order survives; dictionaries are accepted and converted.
    """

    name: str
    inputs: tuple[tuple[str, ArcInscription], ...] = ()
    outputs: tuple[tuple[str, ArcInscription], ...] = ()
    inhibitors: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", _pairs(self.inputs))
        object.__setattr__(self, "outputs", _pairs(self.outputs))
        object.__setattr__(self, "inhibitors", _pairs(self.inhibitors))
        for place, threshold in self.inhibitors:
            if threshold < 1:
                raise ValueError(f"inhibitor threshold on {place} must be positive")

    @property
    def variables(self) -> tuple[str, ...]:
        """Variables mentioned by the arcs, first occurrence order."""
        seen: dict[str, None] = {}
        for _, ins in self.inputs + self.outputs:
            for v in ins.variables:
                seen.setdefault(v)
        return tuple(seen)


@dataclass(frozen=True)
class Layout:
    """Slot numbering of a net: one slot per (place, color value) pair.

    Slots run in place declaration order and, within a place, color value
    order.  This is the canonical order used for markings.
    """

    places: tuple[str, ...]
    colors: tuple[tuple[str, ...], ...]

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for cols in self.colors:
            out.append(acc)
            acc += len(cols)
        out.append(acc)
        return tuple(out)

    @property
    def size(self) -> int:
        return self.offsets[-1]

    @cached_property
    def place_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.places)}

    @cached_property
    def slot_index(self) -> dict[tuple[str, str], int]:
        return {
            (p, c): self.offsets[i] + j
            for i, p in enumerate(self.places)
            for j, c in enumerate(self.colors[i])
        }

    def place_slots(self, place: str) -> range:
        i = self.place_index[place]
        return range(self.offsets[i], self.offsets[i + 1])


class Marking(Mapping[str, Multiset]):
    """A state of a net: a multiset per place, stored as a flat count vector."""

    __slots__ = ("layout", "vector", "_hash")

    def __init__(self, layout: Layout, vector: Iterable[int]):
        self.layout = layout
        self.vector = tuple(int(x) for x in vector)
        if len(self.vector) != layout.size:
            raise ValueError("marking vector does not match the layout")
        if any(x < 0 for x in self.vector):
            raise ValueError("negative token count in marking")
        self._hash: int | None = None

    @classmethod
    def from_mapping(cls, layout: Layout, mapping: Mapping[str, Mapping[str, int]]) -> Marking:
        vec = [0] * layout.size
        for place, ms in mapping.items():
            if place not in layout.place_index:
                raise KeyError(f"unknown place {place}")
            for value, count in ms.items():
                slot = layout.slot_index.get((place, value))
                if slot is None:
                    raise ValueError(f"{value!r} is not a color of place {place}")
                vec[slot] += int(count)
        return cls(layout, vec)

    @classmethod
    def from_canonical(cls, layout: Layout, entries: Iterable[tuple[str, str, int]]) -> Marking:
        vec = [0] * layout.size
        for place, value, count in entries:
            vec[layout.slot_index[(place, value)]] = count
        return cls(layout, vec)

    def __getitem__(self, place: str) -> Multiset:
        i = self.layout.place_index[place]
        lo = self.layout.offsets[i]
        return Multiset(zip(self.layout.colors[i], self.vector[lo : lo + len(self.layout.colors[i])]))

    def __iter__(self) -> Iterator[str]:
        return iter(self.layout.places)

    def __len__(self) -> int:
        return len(self.layout.places)

    def total(self, place: str) -> int:
        return sum(self.vector[s] for s in self.layout.place_slots(place))

    @property
    def size(self) -> int:
        return sum(self.vector)

    def canonical(self) -> tuple[tuple[str, str, int], ...]:
        """Nonzero entries as ``(place, color, count)`` in canonical order."""
        lay = self.layout
        out = []
        for i, place in enumerate(lay.places):
            lo = lay.offsets[i]
            for j, color in enumerate(lay.colors[i]):
                n = self.vector[lo + j]
                if n:
                    out.append((place, color, n))
        return tuple(out)

    def to_bytes(self) -> bytes:
        return struct.pack(f"<{len(self.vector)}q", *self.vector)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Marking):
            return self.vector == other.vector and self.layout == other.layout
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.to_bytes())
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{p}: {self[p]}" for p in self.layout.places if self.total(p))
        return f"Marking({{{body}}})"


def canonical_form(marking: Marking) -> tuple[tuple[str, str, int], ...]:
    return marking.canonical()


@dataclass(frozen=True)
class Net:
    """Declarations of a colored Petri net.

    ``initial_marking`` maps place names to multisets; it is normalised to a
    tuple of pairs in place declaration order with empty entries dropped.
    """

    name: str = "net"
    color_sets: tuple[ColorSet, ...] = ()
    variables: tuple[Variable, ...] = ()
    places: tuple[Place, ...] = ()
    transitions: tuple[Transition, ...] = ()
    initial_marking: tuple[tuple[str, Multiset], ...] = field(default=())

    def __post_init__(self) -> None:
        for name in ("color_sets", "variables", "places", "transitions"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        init = self.initial_marking
        pairs = init.items() if isinstance(init, Mapping) else init
        merged: dict[str, Multiset] = {}
        for place, ms in pairs:
            ms = ms if isinstance(ms, Multiset) else Multiset(ms)
            merged[place] = merged[place] + ms if place in merged else ms
        order = {p.name: i for i, p in enumerate(self.places)}
        ordered = sorted(
            ((p, ms) for p, ms in merged.items() if ms),
            key=lambda kv: order.get(kv[0], len(order)),
        )
        object.__setattr__(self, "initial_marking", tuple(ordered))

    @cached_property
    def color_set_map(self) -> dict[str, ColorSet]:
        return {c.name: c for c in self.color_sets}

    @cached_property
    def variable_map(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    @cached_property
    def place_map(self) -> dict[str, Place]:
        return {p.name: p for p in self.places}

    @cached_property
    def transition_map(self) -> dict[str, Transition]:
        return {t.name: t for t in self.transitions}

    @cached_property
    def layout(self) -> Layout:
        """Slot layout; only meaningful for a net that validates cleanly."""
        cs = self.color_set_map
        return Layout(
            tuple(p.name for p in self.places),
            tuple(cs[p.color_set].values for p in self.places),
        )

    def initial(self) -> Marking:
        return Marking.from_mapping(self.layout, dict(self.initial_marking))

    def place_color_values(self, place: str) -> tuple[str, ...]:
        return self.color_set_map[self.place_map[place].color_set].values


DIAGNOSTIC_CATEGORIES = (
    "dangling-reference",
    "type-mismatch",
    "capacity-violated-initially",
    "duplicate-name",
    "input-and-inhibitor-overlap",
)


@dataclass(frozen=True)
class Diagnostic:
    category: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.category}({self.element}): {self.message}"


class InvalidNet(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def _duplicates(names: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    dups = []
    for n in names:
        if n in seen and n not in dups:
            dups.append(n)
        seen.add(n)
    return dups


def validate_net(net: Net) -> list[Diagnostic]:
    """Check every structural invariant of ``net``; empty list means well-formed."""
    diags: list[Diagnostic] = []

    def report(category: str, element: str, message: str) -> None:
        diags.append(Diagnostic(category, element, message))

    for kind, names in (
        ("color set", [c.name for c in net.color_sets]),
        ("variable", [v.name for v in net.variables]),
        ("place", [p.name for p in net.places]),
        ("transition", [t.name for t in net.transitions]),
    ):
        for dup in _duplicates(names):
            report("duplicate-name", dup, f"{kind} {dup} declared more than once")

    all_values = {v for c in net.color_sets for v in c.values}
    for var in net.variables:
        if var.color_set not in net.color_set_map:
            report("dangling-reference", var.color_set, f"variable {var.name} has unknown color set")
        if var.name in all_values:
            report("duplicate-name", var.name, f"variable {var.name} shadows a color value")

    place_cs: dict[str, ColorSet | None] = {}
    for place in net.places:
        cs = net.color_set_map.get(place.color_set)
        if cs is None:
            report("dangling-reference", place.color_set, f"place {place.name} has unknown color set")
        place_cs[place.name] = cs

    def check_inscription(owner: str, place: str, ins: ArcInscription) -> None:
        cs = place_cs.get(place)
        for term in ins.terms:
            if term.is_variable:
                var = net.variable_map.get(term.symbol)
                if var is None:
                    report("dangling-reference", term.symbol, f"{owner}: undeclared variable")
                elif cs is not None and var.color_set != cs.name:
                    report(
                        "type-mismatch",
                        term.symbol,
                        f"{owner}: variable of {var.color_set} on place of {cs.name}",
                    )
            elif cs is not None and term.symbol not in cs:
                report("type-mismatch", term.symbol, f"{owner}: not a value of {cs.name}")

    for tr in net.transitions:
        for role, arcs in (("in", tr.inputs), ("out", tr.outputs), ("inhibit", tr.inhibitors)):
            for dup in _duplicates(p for p, _ in arcs):
                report("duplicate-name", f"{tr.name}.{role}.{dup}", f"repeated {role} arc on {dup}")
        for role, arcs in (("in", tr.inputs), ("out", tr.outputs)):
            for place, ins in arcs:
                if place not in place_cs:
                    report("dangling-reference", place, f"{tr.name} {role}-arc to undeclared place")
                else:
                    check_inscription(f"{tr.name} {role} {place}", place, ins)
        input_places = {p for p, _ in tr.inputs}
        for place, _ in tr.inhibitors:
            if place not in place_cs:
                report("dangling-reference", place, f"{tr.name} inhibitor on undeclared place")
            if place in input_places:
                report(
                    "input-and-inhibitor-overlap",
                    f"{tr.name}.{place}",
                    f"{place} is both input and inhibitor of {tr.name}",
                )

    for place, ms in net.initial_marking:
        if place not in place_cs:
            report("dangling-reference", place, "initial marking of undeclared place")
            continue
        cs = place_cs[place]
        if cs is not None:
            for value in ms:
                if value not in cs:
                    report("type-mismatch", f"{place}.{value}", f"initial token not in {cs.name}")
        cap = net.place_map[place].capacity
        if cap is not None and ms.size > cap:
            report(
                "capacity-violated-initially",
                place,
                f"{ms.size} initial tokens exceed capacity {cap}",
            )
    return diags


def require_valid(net: Net) -> None:
    diags = validate_net(net)
    if diags:
        raise InvalidNet(diags)
