import json
import random

import numpy as np
import pytest

from cpnkit.core import Marking
from cpnkit.dsl import parse_net
from cpnkit.engine import SimulationConfig, enabled_bindings, fire, simulate
from cpnkit.gscm import GscmParameters, build_gscm_net
from cpnkit.statespace import (
    ExplorationLimits,
    IncompleteGraph,
    analyze,
    compute_bounds,
    explore,
    fairness_report,
    find_dead_markings,
    find_dead_transitions,
    find_home_markings,
    scc_condense,
    tarjan_scc,
    to_dot,
)

import oracle
from netgen import random_net

SINK = parse_net("colorset C = { a }; place P : C init 1`a; trans T { in P : 1`a; }")
SELF_LOOP = parse_net("colorset C = { a }; place P : C init 1`a; trans T { in P : 1`a; out P : 1`a; }")
CHAIN3 = parse_net("""
colorset C = { a };
place P1 : C init 1`a; place P2 : C; place P3 : C;
trans T1 { in P1 : 1`a; out P2 : 1`a; }
trans T2 { in P2 : 1`a; out P3 : 1`a; }
""")
CYCLE3 = parse_net("""
colorset C = { a };
place P1 : C init 1`a; place P2 : C; place P3 : C;
trans T1 { in P1 : 1`a; out P2 : 1`a; }
trans T2 { in P2 : 1`a; out P3 : 1`a; }
trans T3 { in P3 : 1`a; out P1 : 1`a; }
""")
CHOICE = parse_net("""
colorset C = { a };
place P : C init 1`a; place L : C; place R : C;
trans TL { in P : 1`a; out L : 1`a; }
trans TR { in P : 1`a; out R : 1`a; }
""")


def closure_sccs(graph):
    """Components from a boolean transitive closure (Warshall)."""
    n = graph.node_count
    reach = np.eye(n, dtype=bool)
    reach[graph.arc_source, graph.arc_target] = True
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    mutual = reach & reach.T
    return {frozenset(np.flatnonzero(mutual[i]).tolist()) for i in range(n)}


class TestExplore:
    def test_sink(self):
        g = explore(SINK)
        assert (g.node_count, g.arc_count, g.complete) == (2, 1, True)
        assert list(g.arcs())[0][:2] == (0, "T")

    def test_node_zero_is_initial(self, scaled_net, scaled_graph):
        assert scaled_graph.marking(0) == scaled_net.initial()

    def test_scaled_gscm_matches_oracle(self, scaled_net, scaled_graph):
        states, arcs, dead = oracle.enumerate_states(scaled_net)
        g_states, g_arcs, g_dead, _ = oracle.graph_sets(scaled_graph)
        assert g_states == states and g_arcs == arcs and g_dead == dead
        assert scaled_graph.arc_count == len(arcs)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_nets_match_oracle(self, seed):
        net = random_net(seed)
        states, arcs, dead = oracle.enumerate_states(net)
        g = explore(net)
        g_states, g_arcs, g_dead, _ = oracle.graph_sets(g)
        assert (g_states, g_arcs, g_dead) == (states, arcs, dead)
        assert g.node_count == len(states) and g.arc_count == len(arcs)

    def test_numbering_is_fifo_bfs(self, scaled_net, scaled_graph):
        from collections import deque
        init = scaled_net.initial()
        index = {init: 0}
        queue = deque([init])
        while queue:
            m = queue.popleft()
            for t in scaled_net.transitions:
                for b in enabled_bindings(scaled_net, m, t.name):
                    m2 = fire(scaled_net, m, t.name, b)
                    if m2 not in index:
                        index[m2] = len(index)
                        queue.append(m2)
        for m, i in index.items():
            assert scaled_graph.marking(i) == m

    def test_threads_do_not_change_result(self, scaled_net, scaled_graph):
        g = explore(scaled_net, threads=3)
        assert np.array_equal(g.markings, scaled_graph.markings)
        assert np.array_equal(g.arc_source, scaled_graph.arc_source)
        assert np.array_equal(g.arc_mode, scaled_graph.arc_mode)
        assert np.array_equal(g.arc_target, scaled_graph.arc_target)

    def test_truncation(self, scaled_net):
        g = explore(scaled_net, ExplorationLimits(max_states=50))
        assert not g.complete and g.node_count == 50
        assert (g.arc_target < 50).all()
        report = analyze(g)
        assert report.dead_marking_count is None
        assert json.loads(report.to_json()) == {"stateCount": 50, "arcCount": g.arc_count, "complete": False}
        with pytest.raises(IncompleteGraph, match="truncated"):
            compute_bounds(g)
        with pytest.raises(IncompleteGraph):
            find_home_markings(g, scc_condense(g))
        with pytest.raises(IncompleteGraph):
            fairness_report(g, scc_condense(g))
        with pytest.raises(IncompleteGraph):
            find_dead_transitions(g)

    def test_arc_limit(self, scaled_net):
        g = explore(scaled_net, ExplorationLimits(max_arcs=100))
        assert not g.complete and g.arc_count <= 100

    def test_default_gscm_is_too_big_for_small_limits(self, gscm_net):
        g = explore(gscm_net, ExplorationLimits(max_states=2000))
        assert not g.complete

    def test_index_of(self, scaled_graph):
        for i in (0, 5, scaled_graph.node_count - 1):
            assert scaled_graph.index_of(scaled_graph.marking(i)) == i

    def test_closure_on_sampled_nodes(self, scaled_net, scaled_graph):
        rng = random.Random(1)
        succ = {}
        for s, t, b, d in scaled_graph.arcs():
            succ.setdefault(s, set()).add((t, b, d))
        for node in rng.sample(range(scaled_graph.node_count), 60):
            m = scaled_graph.marking(node)
            for t in scaled_net.transitions:
                for b in enabled_bindings(scaled_net, m, t.name):
                    target = scaled_graph.index_of(fire(scaled_net, m, t.name, b))
                    assert (t.name, b, target) in succ.get(node, set())

    @pytest.mark.parametrize("seed", range(5))
    def test_simulation_trace_is_graph_path(self, scaled_net, scaled_graph, seed):
        report = simulate(scaled_net, SimulationConfig(max_steps=10_000, seed=seed, record_trace=True))
        edges = {(s, t, b): d for s, t, b, d in scaled_graph.arcs()}
        node = 0
        for ev in report.trace:
            node = edges[(node, ev.transition, ev.binding)]
        assert scaled_graph.marking(node) == report.final_marking

    def test_acyclic_runs_end_within_state_count(self, scaled_net, scaled_graph):
        assert fairness_report(scaled_graph, scc_condense(scaled_graph)).acyclic
        for seed in range(5):
            r = simulate(scaled_net, SimulationConfig(max_steps=scaled_graph.node_count, seed=seed))
            assert r.terminated == "dead"


class TestDeadMarkings:
    def test_sink(self):
        assert find_dead_markings(explore(SINK)) == [1]

    def test_self_loops(self):
        assert find_dead_markings(explore(SELF_LOOP)) == []
        assert find_dead_markings(explore(CYCLE3)) == []


class TestBounds:
    def test_untouched_and_empty_places(self):
        net = parse_net("""
        colorset C = { a, b };
        place K : C init 5`a; place E : C; place P : C init 1`a;
        trans T { in P : 1`a; }
        """)
        b = compute_bounds(explore(net))
        assert (b["K"].lower, b["K"].upper) == (5, 5)
        assert (b["E"].lower, b["E"].upper) == (0, 0)
        assert (b["P"].lower, b["P"].upper) == (0, 1)
        assert b["K"].per_color_upper == {"a": 5, "b": 0}

    def test_scaled_gscm_zero_initial_places(self, scaled_net, scaled_graph):
        bounds = compute_bounds(scaled_graph)
        marked = dict(scaled_net.initial_marking)
        for p in scaled_net.places:
            if p.name not in marked:
                assert bounds[p.name].lower == 0
        assert bounds["P8"].per_color_upper == {"waste": bounds["P8"].upper}


class TestScc:
    def test_dag(self):
        scc = scc_condense(explore(CHAIN3))
        assert scc.count == 3 and all(len(c) == 1 for c in scc.components)
        assert len(scc.condensation_arcs) == 2

    def test_cycle(self):
        scc = scc_condense(explore(CYCLE3))
        assert scc.components == [[0, 1, 2]]
        assert scc.condensation_arcs == set()

    def test_scaled_gscm_acyclic(self, scaled_graph):
        scc = scc_condense(scaled_graph)
        assert scc.count == scaled_graph.node_count

    def test_small_gscm_against_closure(self):
        params = GscmParameters(raw_material_stock=1, manufacturer_cash=2, supplier_cash=0, wholesaler_cash=1,
                                retailer_cash=0, customer_cash=1, collecting_cash=1, recycling_cash=0,
                                disassembly_cash=1, secondary_cash=1)
        g = explore(build_gscm_net(params))
        assert g.node_count <= 200
        scc = scc_condense(g)
        assert {frozenset(c) for c in scc.components} == closure_sccs(g)
        assert scc.count == g.node_count

    @pytest.mark.parametrize("seed", range(40))
    def test_random_nets_against_closure(self, seed):
        g = explore(random_net(seed))
        assert g.node_count <= 200
        scc = scc_condense(g)
        assert {frozenset(c) for c in scc.components} == closure_sccs(g)
        comp = scc.component_of
        for a, b in scc.condensation_arcs:
            assert a != b
        # reverse topological ids: condensation arcs point to lower ids
        assert all(a > b for a, b in scc.condensation_arcs)
        assert all(comp[s] == c for c, nodes in enumerate(scc.components) for s in nodes)

    @pytest.mark.parametrize("seed", range(20))
    def test_tarjan_on_random_digraphs(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        edges = sorted({(int(a), int(b)) for a, b in rng.integers(0, n, size=(int(rng.integers(0, 3 * n)), 2))})

        class G:
            pass

        g = G()
        g.node_count = n
        g.arc_source = np.array([a for a, _ in edges], dtype=np.int64)
        g.arc_target = np.array([b for _, b in edges], dtype=np.int64)
        counts = np.bincount(g.arc_source, minlength=n)
        indptr = np.concatenate(([0], np.cumsum(counts))).tolist()
        _, comps = tarjan_scc(n, indptr, g.arc_target.tolist())
        assert {frozenset(c) for c in comps} == closure_sccs(g)

    def test_deep_chain_no_recursion_limit(self):
        n = 50_000
        indptr = list(range(n)) + [n - 1]
        indices = list(range(1, n))
        comp_of, comps = tarjan_scc(n, indptr, indices)
        assert len(comps) == n


class TestHomeMarkings:
    def test_two_dead_markings(self):
        g = explore(CHOICE)
        assert len(find_dead_markings(g)) == 2
        assert find_home_markings(g, scc_condense(g)) == []

    def test_single_cycle(self):
        g = explore(CYCLE3)
        assert find_home_markings(g, scc_condense(g)) == [0, 1, 2]

    def test_unique_dead_marking_is_home(self):
        g = explore(CHAIN3)
        assert find_home_markings(g, scc_condense(g)) == [2]

    def test_scaled_gscm(self, scaled_graph):
        assert len(find_dead_markings(scaled_graph)) >= 2
        assert find_home_markings(scaled_graph, scc_condense(scaled_graph)) == []


class TestFairness:
    def test_sink(self):
        g = explore(SINK)
        f = fairness_report(g, scc_condense(g))
        assert f.acyclic and not f.infinite_occurrence_sequences_exist

    def test_self_loop(self):
        g = explore(SELF_LOOP)
        f = fairness_report(g, scc_condense(g))
        assert not f.acyclic and f.infinite_occurrence_sequences_exist
        assert f.live_cycle_transitions == ["T"]

    def test_cycle(self):
        g = explore(CYCLE3)
        assert fairness_report(g, scc_condense(g)).live_cycle_transitions == ["T1", "T2", "T3"]

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_cycle_detection(self, seed):
        g = explore(random_net(seed))
        # Kahn's algorithm: acyclic iff every node can be peeled off
        indeg = np.bincount(g.arc_target, minlength=g.node_count)
        succ = [[] for _ in range(g.node_count)]
        for s, d in zip(g.arc_source.tolist(), g.arc_target.tolist()):
            succ[s].append(d)
        ready = [i for i in range(g.node_count) if indeg[i] == 0]
        peeled = 0
        while ready:
            v = ready.pop()
            peeled += 1
            for w in succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        assert fairness_report(g, scc_condense(g)).acyclic == (peeled == g.node_count)


class TestDeadTransitions:
    def test_unreachable(self):
        net = parse_net("""
        colorset C = { a };
        place P : C init 1`a; place Q : C;
        trans T { in P : 1`a; }
        trans U { in Q : 1`a; }
        """)
        assert find_dead_transitions(explore(net)) == ["U"]

    def test_scaled_gscm(self, scaled_graph):
        assert find_dead_transitions(scaled_graph) == []

    def test_no_transitions(self):
        net = parse_net("colorset C = { a }; place P : C init 1`a;")
        g = explore(net)
        assert g.node_count == 1 and find_dead_transitions(g) == []


def test_report_json_schema(scaled_graph):
    jsonschema = pytest.importorskip("jsonschema")
    from importlib import resources
    schema = json.loads(resources.files("cpnkit").joinpath("schemas/statespace_report.json").read_text())
    doc = json.loads(analyze(scaled_graph).to_json())
    jsonschema.validate(doc, schema)
    assert doc["homeMarkings"] == [] and doc["acyclic"] is True


def test_dot_export():
    dot = to_dot(explore(CHOICE))
    assert dot.startswith('digraph "net" {')
    assert '0 -> 1 [label="TL/<>"];' in dot and '0 -> 2 [label="TR/<>"];' in dot


def test_dot_refuses_large_graphs(scaled_graph):
    with pytest.raises(ValueError):
        to_dot(scaled_graph, max_nodes=100)


def test_marking_rows_match_markings(scaled_graph):
    m = scaled_graph.marking(3)
    assert isinstance(m, Marking)
    assert list(m.vector) == scaled_graph.markings[3].tolist()
