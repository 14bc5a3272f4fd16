"""Enabling rule, firing rule and the seeded random-firing simulator.

Color sets are finite, so every (transition, binding) pair of a net can be
enumerated up front.  :func:`compile_net` turns each pair into a
:class:`Mode`: flat slot/count lists that make enabling a handful of integer
comparisons.  The simulator and the state-space explorer both work on modes.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Layout, Marking, Net, require_valid

MASK64 = (1 << 64) - 1


class NotEnabled(ValueError):
    pass


class Binding(Mapping[str, str]):
    """Assignment of variables to color values, kept in declaration order."""

    __slots__ = ("_items",)

    def __init__(self, items: Mapping[str, str] | tuple[tuple[str, str], ...] = ()):
        if isinstance(items, Mapping):
            items = tuple(items.items())
        self._items = tuple(items)

    def __getitem__(self, var: str) -> str:
        for k, v in self._items:
            if k == var:
                return v
        raise KeyError(var)

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Mapping):
            return dict(self._items) == dict(other.items())
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._items))

    def __repr__(self) -> str:
        return f"Binding({dict(self._items)!r})"

    def __str__(self) -> str:
        return "<" + ",".join(f"{k}={v}" for k, v in self._items) + ">"


@dataclass(frozen=True)
class Mode:
    """One (transition, binding) pair, precompiled against a layout.

    ``inhibitors`` and ``capacities`` hold ``(place index, bound)``; the
    place total must stay strictly below an inhibitor bound and at or below
    a capacity bound (capacity minus the net token change on that place).
    """

    transition: int
    binding: Binding
    pre: tuple[tuple[int, int], ...]
    post: tuple[tuple[int, int], ...]
    delta: tuple[tuple[int, int], ...]
    inhibitors: tuple[tuple[int, int], ...]
    capacities: tuple[tuple[int, int], ...]

    @property
    def consumed(self) -> int:
        return sum(c for _, c in self.pre)

    @property
    def produced(self) -> int:
        return sum(c for _, c in self.post)


@dataclass(frozen=True)
class CompiledNet:
    net: Net
    layout: Layout
    transition_names: tuple[str, ...]
    modes: tuple[Mode, ...]
    # modes[by_transition[t]] are the modes of transition t, binding order
    by_transition: tuple[range, ...]
    slot_place: tuple[int, ...]

    def place_totals(self, vector) -> list[int]:
        offs = self.layout.offsets
        return [sum(vector[offs[i] : offs[i + 1]]) for i in range(len(offs) - 1)]

    def is_enabled(self, mode: Mode, vector, totals=None) -> bool:
        for slot, count in mode.pre:
            if vector[slot] < count:
                return False
        if mode.inhibitors or mode.capacities:
            if totals is None:
                totals = self.place_totals(vector)
            for p, bound in mode.inhibitors:
                if totals[p] >= bound:
                    return False
            for p, bound in mode.capacities:
                if totals[p] > bound:
                    return False
        return True

    def enabled_modes(self, vector) -> list[int]:
        totals = self.place_totals(vector)
        return [i for i, m in enumerate(self.modes) if self.is_enabled(m, vector, totals)]

    def transition_index(self, name: str) -> int:
        try:
            return self.transition_names.index(name)
        except ValueError:
            raise KeyError(f"unknown transition {name}") from None


def _bindings(net: Net, variables: tuple[str, ...]) -> list[Binding]:
    # variable declaration order, then color value order
    order = {v.name: i for i, v in enumerate(net.variables)}
    names = sorted(variables, key=order.__getitem__)
    domains = [net.color_set_map[net.variable_map[v].color_set].values for v in names]
    return [Binding(tuple(zip(names, combo))) for combo in itertools.product(*domains)]


@lru_cache(maxsize=64)
def compile_net(net: Net) -> CompiledNet:
    require_valid(net)
    layout = net.layout
    pidx = layout.place_index
    modes: list[Mode] = []
    ranges: list[range] = []
    for ti, tr in enumerate(net.transitions):
        start = len(modes)
        for binding in _bindings(net, tr.variables):
            pre: dict[int, int] = {}
            post: dict[int, int] = {}
            place_delta: dict[int, int] = {}
            for target, arcs, sign in ((pre, tr.inputs, -1), (post, tr.outputs, 1)):
                for place, ins in arcs:
                    for value, n in ins.evaluate(binding).items():
                        slot = layout.slot_index[(place, value)]
                        target[slot] = target.get(slot, 0) + n
                        place_delta[pidx[place]] = place_delta.get(pidx[place], 0) + sign * n
            slots = sorted(set(pre) | set(post))
            delta = tuple(
                (s, post.get(s, 0) - pre.get(s, 0)) for s in slots if post.get(s, 0) != pre.get(s, 0)
            )
            caps = []
            for place, _ in tr.outputs:
                cap = net.place_map[place].capacity
                if cap is not None:
                    caps.append((pidx[place], cap - place_delta.get(pidx[place], 0)))
            modes.append(
                Mode(
                    transition=ti,
                    binding=binding,
                    pre=tuple(sorted(pre.items())),
                    post=tuple(sorted(post.items())),
                    delta=delta,
                    inhibitors=tuple((pidx[p], k) for p, k in tr.inhibitors),
                    capacities=tuple(dict.fromkeys(caps)),
                )
            )
        ranges.append(range(start, len(modes)))
    slot_place = tuple(
        i for i in range(len(layout.places)) for _ in range(layout.offsets[i], layout.offsets[i + 1])
    )
    return CompiledNet(
        net=net,
        layout=layout,
        transition_names=tuple(t.name for t in net.transitions),
        modes=tuple(modes),
        by_transition=tuple(ranges),
        slot_place=slot_place,
    )


def _apply(vector, mode: Mode) -> list[int]:
    out = list(vector)
    for slot, d in mode.delta:
        out[slot] += d
    return out


def enabled_bindings(net: Net, marking: Marking, transition: str) -> list[Binding]:
    """Bindings under which ``transition`` may fire at ``marking``."""
    cn = compile_net(net)
    ti = cn.transition_index(transition)
    vec = marking.vector
    totals = cn.place_totals(vec)
    return [cn.modes[i].binding for i in cn.by_transition[ti] if cn.is_enabled(cn.modes[i], vec, totals)]


def fire(net: Net, marking: Marking, transition: str, binding: Mapping[str, str] | None = None) -> Marking:
    cn = compile_net(net)
    ti = cn.transition_index(transition)
    binding = Binding(binding or {})
    for i in cn.by_transition[ti]:
        mode = cn.modes[i]
        if mode.binding == binding:
            if not cn.is_enabled(mode, marking.vector):
                break
            return Marking(cn.layout, _apply(marking.vector, mode))
    raise NotEnabled(f"{transition} is not enabled under {binding}")


class RandomSource:
    """Seeded uniform integer source.

    Raw 64-bit words come from numpy's PCG64 bit generator seeded with
    ``SeedSequence(seed)``.  A word ``x`` is mapped onto ``[0, n)`` by
    Lemire's multiply-shift, ``(x * n) >> 64``, rejecting the low-product
    values below ``2**64 mod n`` so the result is exactly uniform.
    """

    ALGORITHM = "PCG64 (numpy) seeded via SeedSequence(seed); bounded draws by Lemire multiply-shift with rejection"
    _BATCH = 4096

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._bitgen = np.random.PCG64(seed)
        self._buf: list[int] = []

    def _word(self) -> int:
        if not self._buf:
            self._buf = self._bitgen.random_raw(self._BATCH).tolist()
            self._buf.reverse()
        return self._buf.pop()

    def below(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be positive")
        m = self._word() * n
        low = m & MASK64
        if low < n:
            threshold = (-n) % n
            while low < threshold:
                m = self._word() * n
                low = m & MASK64
        return m >> 64


@dataclass(frozen=True)
class FiringEvent:
    step: int
    transition: str
    binding: Binding
    marking_before: Marking | None = None
    marking_after: Marking | None = None


def step(net: Net, marking: Marking, rng: RandomSource, step_number: int = 0):
    """Fire one uniformly chosen enabled (transition, binding) pair.

    Returns ``(event, new_marking)``, or ``None`` if the marking is dead.
    ``rng`` advances in place.
    """
    cn = compile_net(net)
    enabled = cn.enabled_modes(marking.vector)
    if not enabled:
        return None
    mode = cn.modes[enabled[rng.below(len(enabled))]] if len(enabled) > 1 else cn.modes[enabled[0]]
    after = Marking(cn.layout, _apply(marking.vector, mode))
    event = FiringEvent(step_number, cn.transition_names[mode.transition], mode.binding, marking, after)
    return event, after


@dataclass(frozen=True)
class SimulationConfig:
    max_steps: int
    seed: int = 1
    record_trace: bool = False
    record_markings: bool = False
    stop_on_dead: bool = True

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.stop_on_dead:
            raise ValueError("stop_on_dead is always true")


@dataclass
class SimulationReport:
    seed: int
    steps_executed: int
    terminated: str
    firing_counts: dict[str, int]
    final_marking: Marking
    trace: list[FiringEvent] | None = None
    rng: str = RandomSource.ALGORITHM

    def to_dict(self) -> dict:
        lay = self.final_marking.layout
        final = {}
        for i, place in enumerate(lay.places):
            lo = lay.offsets[i]
            final[place] = {
                c: self.final_marking.vector[lo + j]
                for j, c in enumerate(lay.colors[i])
                if self.final_marking.vector[lo + j]
            }
        return {
            "seed": self.seed,
            "steps": self.steps_executed,
            "terminated": self.terminated,
            "firingCounts": dict(self.firing_counts),
            "finalMarking": final,
            "rng": self.rng,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _dependents(cn: CompiledNet) -> list[tuple[int, ...]]:
    """For each mode, the modes whose enabling can change after it fires."""
    by_slot: dict[int, set[int]] = {}
    by_place: dict[int, set[int]] = {}
    for i, m in enumerate(cn.modes):
        for s, _ in m.pre:
            by_slot.setdefault(s, set()).add(i)
        for p, _ in m.inhibitors + m.capacities:
            by_place.setdefault(p, set()).add(i)
    out = []
    for m in cn.modes:
        hit: set[int] = set()
        for s, _ in m.delta:
            hit |= by_slot.get(s, set())
            hit |= by_place.get(cn.slot_place[s], set())
        out.append(tuple(sorted(hit)))
    return out


def simulate(net: Net, config: SimulationConfig) -> SimulationReport:
    """Run random firings from the initial marking until dead or ``max_steps``."""
    cn = compile_net(net)
    modes = cn.modes
    deps = _dependents(cn)
    vec = list(net.initial().vector)
    slot_place = cn.slot_place
    totals = cn.place_totals(vec)
    enabled = [cn.is_enabled(m, vec, totals) for m in modes]
    counts = [0] * len(cn.transition_names)
    rng = RandomSource(config.seed)
    trace: list[FiringEvent] | None = [] if config.record_trace else None
    steps = 0
    terminated = "step-limit"
    n_modes = range(len(modes))

    while steps < config.max_steps:
        candidates = [i for i in n_modes if enabled[i]]
        if not candidates:
            terminated = "dead"
            break
        k = candidates[rng.below(len(candidates))] if len(candidates) > 1 else candidates[0]
        mode = modes[k]
        before = Marking(cn.layout, vec) if config.record_markings else None
        for slot, d in mode.delta:
            vec[slot] += d
            totals[slot_place[slot]] += d
        for j in deps[k]:
            enabled[j] = cn.is_enabled(modes[j], vec, totals)
        counts[mode.transition] += 1
        if trace is not None:
            after = Marking(cn.layout, vec) if config.record_markings else None
            trace.append(FiringEvent(steps, cn.transition_names[mode.transition], mode.binding, before, after))
        steps += 1
    else:
        if not any(enabled):
            terminated = "dead"

    return SimulationReport(
        seed=config.seed,
        steps_executed=steps,
        terminated=terminated,
        firing_counts=dict(zip(cn.transition_names, counts)),
        final_marking=Marking(cn.layout, vec),
        trace=trace,
    )
