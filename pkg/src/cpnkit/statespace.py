"""Explicit-state reachability graph and the analyses run on it.

Exploration is breadth-first and level-synchronous: a whole BFS level is
expanded at once with numpy, successors are ordered by (source node, mode)
and new nodes get indices in first-discovery order.  That yields exactly the
numbering of a plain FIFO breadth-first search, so results do not depend on
``threads``.
"""

from __future__ import annotations

import json
import time
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Marking, Net
from .engine import Binding, CompiledNet, compile_net


class IncompleteGraph(RuntimeError):
    """An analysis that needs the whole state space was run on a truncated one."""


@dataclass(frozen=True)
class ExplorationLimits:
    max_states: int = 5_000_000
    max_arcs: int = 50_000_000
    max_seconds: float = 300.0


class ReachabilityGraph:
    """Nodes are canonical markings (rows of ``markings``); node 0 is initial.

    Arcs are stored column-wise in ``arc_source``, ``arc_mode`` and
    ``arc_target``; ``arc_mode`` indexes the compiled (transition, binding)
    pairs of the net.
    """

    def __init__(self, compiled: CompiledNet, markings: np.ndarray, arc_source: np.ndarray,
                 arc_mode: np.ndarray, arc_target: np.ndarray, complete: bool, seconds: float = 0.0):
        self.compiled = compiled
        self.net = compiled.net
        self.markings = markings
        self.arc_source = arc_source
        self.arc_mode = arc_mode
        self.arc_target = arc_target
        self.complete = complete
        self.seconds = seconds
        self._index: dict[bytes, int] | None = None
        self._csr: tuple[list[int], list[int]] | None = None

    @property
    def node_count(self) -> int:
        return len(self.markings)

    @property
    def arc_count(self) -> int:
        return len(self.arc_source)

    @property
    def arc_transition(self) -> np.ndarray:
        lookup = np.array([m.transition for m in self.compiled.modes], dtype=np.int64)
        return lookup[self.arc_mode] if len(self.arc_mode) else np.zeros(0, dtype=np.int64)

    def marking(self, node: int) -> Marking:
        return Marking(self.compiled.layout, self.markings[node].tolist())

    def index_of(self, marking: Marking) -> int | None:
        if self._index is None:
            keys = _row_keys(self.markings)
            self._index = {k: i for i, k in enumerate(keys)}
        row = np.asarray([marking.vector], dtype=np.int64).reshape(1, len(marking.vector))
        return self._index.get(_row_keys(row)[0])

    def arcs(self) -> Iterator[tuple[int, str, Binding, int]]:
        modes = self.compiled.modes
        names = self.compiled.transition_names
        for s, m, t in zip(self.arc_source.tolist(), self.arc_mode.tolist(), self.arc_target.tolist()):
            mode = modes[m]
            yield s, names[mode.transition], mode.binding, t

    def csr(self) -> tuple[list[int], list[int]]:
        """Successor lists as (indptr, indices); arcs are already source-sorted."""
        if self._csr is None:
            counts = np.bincount(self.arc_source, minlength=self.node_count)
            indptr = np.concatenate(([0], np.cumsum(counts))).tolist()
            self._csr = (indptr, self.arc_target.tolist())
        return self._csr

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.arc_source, minlength=self.node_count)


def _void_keys(rows: np.ndarray) -> np.ndarray:
    """One fixed-width bytes scalar per row, for hashing and sorting."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if rows.shape[1] == 0:
        rows = np.zeros((len(rows), 1), dtype=np.int64)
    return rows.view(np.dtype((np.void, rows.shape[1] * 8))).ravel()


def _row_keys(rows: np.ndarray) -> list[bytes]:
    return _void_keys(rows).tolist()


class _Expander:
    """Vectorised successor generation for one compiled net."""

    def __init__(self, cn: CompiledNet):
        self.cn = cn
        lay = cn.layout
        self.width = lay.size
        self.offsets = np.array(lay.offsets[:-1], dtype=np.intp)
        self.nonempty = [i for i in range(len(lay.places)) if lay.offsets[i + 1] > lay.offsets[i]]
        self.deltas = []
        for m in cn.modes:
            d = np.zeros(self.width, dtype=np.int64)
            for s, v in m.delta:
                d[s] = v
            self.deltas.append(d)

    def totals(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((len(X), len(self.cn.layout.places)), dtype=np.int64)
        if self.width and len(X):
            sums = np.add.reduceat(X, self.offsets[self.nonempty], axis=1)
            out[:, self.nonempty] = sums
        return out

    def expand_mode(self, k: int, X: np.ndarray, totals: np.ndarray):
        mode = self.cn.modes[k]
        ok = None
        for slot, count in mode.pre:
            c = X[:, slot] >= count
            ok = c if ok is None else ok & c
        for p, bound in mode.inhibitors:
            c = totals[:, p] < bound
            ok = c if ok is None else ok & c
        for p, bound in mode.capacities:
            c = totals[:, p] <= bound
            ok = c if ok is None else ok & c
        idx = np.arange(len(X)) if ok is None else np.flatnonzero(ok)
        return idx, X[idx] + self.deltas[k]


def explore(net: Net, limits: ExplorationLimits | None = None, threads: int = 1) -> ReachabilityGraph:
    """Build the reachability graph of ``net`` breadth-first from its initial marking.

    When a limit is hit the graph is returned with ``complete=False``; nodes
    are cut to ``max_states`` and arcs to ``max_arcs``.
    """
    limits = limits or ExplorationLimits()
    cn = compile_net(net)
    exp = _Expander(cn)
    n_modes = len(cn.modes)
    start = time.perf_counter()

    init = np.asarray([net.initial().vector], dtype=np.int64).reshape(1, exp.width)
    visited: dict[bytes, int] = {_row_keys(init)[0]: 0}
    levels = [init]
    src_parts: list[np.ndarray] = []
    mode_parts: list[np.ndarray] = []
    dst_parts: list[np.ndarray] = []
    frontier, base = init, 0
    n_nodes, n_arcs = 1, 0
    complete = True
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    try:
        while len(frontier):
            totals = exp.totals(frontier)
            if pool is None:
                results = [exp.expand_mode(k, frontier, totals) for k in range(n_modes)]
            else:
                results = list(pool.map(lambda k: exp.expand_mode(k, frontier, totals), range(n_modes)))
            src = np.concatenate([r[0] for r in results]) if results else np.zeros(0, dtype=np.intp)
            if not len(src):
                break
            mod = np.concatenate([np.full(len(r[0]), k, dtype=np.int64) for k, r in enumerate(results)])
            succ = np.concatenate([r[1] for r in results])
            order = np.lexsort((mod, src))
            src, mod, succ = src[order], mod[order], succ[order]

            keys = _void_keys(succ)
            uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
            by_first = np.argsort(first, kind="stable")
            uniq_ids = np.empty(len(uniq), dtype=np.int64)
            new_rows = []
            ukeys = uniq.tolist()
            for j in by_first.tolist():
                key = ukeys[j]
                node = visited.get(key)
                if node is None:
                    node = n_nodes
                    visited[key] = node
                    n_nodes += 1
                    new_rows.append(first[j])
                uniq_ids[j] = node
            dst = uniq_ids[inverse.ravel()]

            src_parts.append(src.astype(np.int64) + base)
            mode_parts.append(mod)
            dst_parts.append(dst)
            n_arcs += len(src)
            base += len(frontier)
            frontier = succ[np.asarray(new_rows, dtype=np.intp)] if new_rows else succ[:0]
            levels.append(frontier)

            if n_nodes > limits.max_states or n_arcs > limits.max_arcs:
                complete = False
                break
            if time.perf_counter() - start > limits.max_seconds:
                complete = not len(frontier)
                break
    finally:
        if pool is not None:
            pool.shutdown()

    markings = np.concatenate(levels) if len(levels) > 1 else init
    arc_source = np.concatenate(src_parts) if src_parts else np.zeros(0, dtype=np.int64)
    arc_mode = np.concatenate(mode_parts) if mode_parts else np.zeros(0, dtype=np.int64)
    arc_target = np.concatenate(dst_parts) if dst_parts else np.zeros(0, dtype=np.int64)
    if not complete:
        markings = markings[: limits.max_states]
        keep = arc_target < len(markings)
        arc_source, arc_mode, arc_target = arc_source[keep], arc_mode[keep], arc_target[keep]
        arc_source, arc_mode, arc_target = (
            arc_source[: limits.max_arcs], arc_mode[: limits.max_arcs], arc_target[: limits.max_arcs]
        )
    return ReachabilityGraph(cn, markings, arc_source, arc_mode, arc_target, complete,
                             seconds=time.perf_counter() - start)


def _require_complete(graph: ReachabilityGraph, what: str) -> None:
    if not graph.complete:
        raise IncompleteGraph(f"{what} undefined on truncated state space")


def find_dead_markings(graph: ReachabilityGraph) -> list[int]:
    return np.flatnonzero(graph.out_degree() == 0).tolist()


@dataclass(frozen=True)
class PlaceBounds:
    lower: int
    upper: int
    per_color_upper: dict[str, int]


def compute_bounds(graph: ReachabilityGraph) -> dict[str, PlaceBounds]:
    """Min/max total tokens per place, plus the max per color value."""
    _require_complete(graph, "bounds")
    lay = graph.compiled.layout
    X = graph.markings
    upper_slot = X.max(axis=0).tolist() if len(X) else [0] * lay.size
    out = {}
    for i, place in enumerate(lay.places):
        lo, hi = lay.offsets[i], lay.offsets[i + 1]
        tot = X[:, lo:hi].sum(axis=1)
        out[place] = PlaceBounds(
            int(tot.min()), int(tot.max()),
            {c: upper_slot[lo + j] for j, c in enumerate(lay.colors[i])},
        )
    return out


@dataclass
class SccDecomposition:
    component_of: list[int]
    components: list[list[int]]
    condensation_arcs: set[tuple[int, int]]

    @property
    def count(self) -> int:
        return len(self.components)

    def terminal_components(self) -> list[int]:
        has_out = {a for a, _ in self.condensation_arcs}
        return [c for c in range(len(self.components)) if c not in has_out]


def tarjan_scc(n: int, indptr: list[int], indices: list[int]) -> tuple[list[int], list[list[int]]]:
    """Iterative Tarjan.  Components come out in reverse topological order."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comp_of = [-1] * n
    components: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        work = [[root, indptr[root]]]
        while work:
            frame = work[-1]
            v, pos = frame
            end = indptr[v + 1]
            descended = False
            while pos < end:
                w = indices[pos]
                pos += 1
                if index[w] == -1:
                    frame[1] = pos
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append([w, indptr[w]])
                    descended = True
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            if descended:
                continue
            work.pop()
            if low[v] == index[v]:
                cid = len(components)
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp_of[w] = cid
                    comp.append(w)
                    if w == v:
                        break
                comp.sort()
                components.append(comp)
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
    return comp_of, components


def scc_condense(graph: ReachabilityGraph) -> SccDecomposition:
    indptr, indices = graph.csr()
    comp_of, components = tarjan_scc(graph.node_count, indptr, indices)
    cof = np.asarray(comp_of, dtype=np.int64)
    if graph.arc_count:
        a, b = cof[graph.arc_source], cof[graph.arc_target]
        cross = a != b
        pairs = np.unique(np.stack([a[cross], b[cross]], axis=1), axis=0)
        carcs = set(map(tuple, pairs.tolist()))
    else:
        carcs = set()
    return SccDecomposition(comp_of, components, carcs)


def find_home_markings(graph: ReachabilityGraph, scc: SccDecomposition) -> list[int]:
    """Nodes of the unique terminal component, or ``[]`` if there are several."""
    _require_complete(graph, "home markings")
    terminal = scc.terminal_components()
    if len(terminal) != 1:
        return []
    return list(scc.components[terminal[0]])


@dataclass(frozen=True)
class FairnessReport:
    acyclic: bool
    infinite_occurrence_sequences_exist: bool
    live_cycle_transitions: list[str]


def fairness_report(graph: ReachabilityGraph, scc: SccDecomposition) -> FairnessReport:
    _require_complete(graph, "fairness")
    cof = np.asarray(scc.component_of, dtype=np.int64)
    if graph.arc_count:
        inside = cof[graph.arc_source] == cof[graph.arc_target]
        cyc_t = set(graph.arc_transition[inside].tolist())
    else:
        cyc_t = set()
    # inside-component arcs exist iff some component is nontrivial or a self-loop exists
    names = graph.compiled.transition_names
    live = [names[t] for t in sorted(cyc_t)]
    acyclic = not live
    return FairnessReport(acyclic, not acyclic, live)


def find_dead_transitions(graph: ReachabilityGraph) -> list[str]:
    _require_complete(graph, "dead transitions")
    fired = set(graph.arc_transition.tolist())
    return [n for i, n in enumerate(graph.compiled.transition_names) if i not in fired]


@dataclass
class StateSpaceReport:
    state_count: int
    arc_count: int
    complete: bool
    seconds: float = 0.0
    dead_marking_count: int | None = None
    dead_marking_sample: list[int] = field(default_factory=list)
    dead_transitions: list[str] | None = None
    bounds: dict[str, PlaceBounds] | None = None
    home_markings: list[int] | None = None
    scc_count: int | None = None
    acyclic: bool | None = None
    infinite_occurrence_sequences_exist: bool | None = None
    live_cycle_transitions: list[str] | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "stateCount": self.state_count,
            "arcCount": self.arc_count,
            "complete": self.complete,
        }
        if not self.complete:
            return out
        out.update({
            "deadMarkingCount": self.dead_marking_count,
            "deadMarkingSample": list(self.dead_marking_sample),
            "deadTransitions": list(self.dead_transitions),
            "boundsPerPlace": {
                p: {"lowerTotal": b.lower, "upperTotal": b.upper, "perColorUpper": dict(b.per_color_upper)}
                for p, b in self.bounds.items()
            },
            "sccCount": self.scc_count,
            "homeMarkings": list(self.home_markings),
            "acyclic": self.acyclic,
            "infiniteOccurrenceSequencesExist": self.infinite_occurrence_sequences_exist,
            "liveCycleTransitions": list(self.live_cycle_transitions),
        })
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def analyze(graph: ReachabilityGraph, sample: int = 10) -> StateSpaceReport:
    """Run every analysis; a truncated graph only gets its counts."""
    report = StateSpaceReport(graph.node_count, graph.arc_count, graph.complete, graph.seconds)
    if not graph.complete:
        return report
    dead = find_dead_markings(graph)
    scc = scc_condense(graph)
    fair = fairness_report(graph, scc)
    report.dead_marking_count = len(dead)
    report.dead_marking_sample = dead[:sample]
    report.dead_transitions = find_dead_transitions(graph)
    report.bounds = compute_bounds(graph)
    report.home_markings = find_home_markings(graph, scc)
    report.scc_count = scc.count
    report.acyclic = fair.acyclic
    report.infinite_occurrence_sequences_exist = fair.infinite_occurrence_sequences_exist
    report.live_cycle_transitions = fair.live_cycle_transitions
    return report


def to_dot(graph: ReachabilityGraph, max_nodes: int = 2000) -> str:
    if graph.node_count > max_nodes:
        raise ValueError(f"DOT export is limited to {max_nodes} nodes, graph has {graph.node_count}")
    lines = [f'digraph "{graph.net.name}" {{']
    lines += [f'  {i} [label="{i}"];' for i in range(graph.node_count)]
    for s, t, b, d in graph.arcs():
        lines.append(f'  {s} -> {d} [label="{t}/{b}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
