# encoding: utf-8
"""
Path-based multicommodity total-flow maximization. Every commodity may use
up to K precomputed shortest paths; the LP maximizes total routed flow under
demand caps and edge capacities.
"""
import json, logging, warnings
import networkx as nx
import numpy as np
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import ClassVar
from xml.etree.ElementTree import ParseError
from .. import utils
from ..basedomain import BaseDomain, FeasibilityReport, register
from ..exceptions import InstanceError, PartitionError, PopWarning
from ..partition import EntityFeatures, Resource, SplitStrategy
from ..pop import AllocationMatrix
from ..solver import LE, MAX, LinearProgram
log = logging.getLogger(__name__)

DEFAULT_CAPACITY = 1000.0
DEFAULT_PATHS = 4
FEASIBILITY_TOL = 1e-6
TIE_CAP = 16        # Paths examined per requested path when collecting ties


@dataclass
class Topology:
    """ Directed graph with a 'capacity' attribute on every edge. """
    graph: nx.DiGraph
    defaulted: int = 0          # Edges whose capacity came from the default
    edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        for u, v, data in self.graph.edges(data=True):
            if u == v:
                raise InstanceError(f'Self-loop on node {u}')
            capacity = data.get('capacity')
            if capacity is None or not 0 <= capacity < float('inf'):
                raise InstanceError(f'Edge {u}->{v} needs a finite nonnegative capacity')
        self.edges = tuple(sorted(self.graph.edges, key=lambda e: (str(e[0]), str(e[1]))))

    def __str__(self):
        return f'<Topology:nodes={self.graph.number_of_nodes()} edges={self.graph.number_of_edges()}>'

    @property
    def nodes(self):
        return sorted(self.graph.nodes, key=str)

    def capacity(self, edge):
        return self.graph.edges[edge]['capacity']

    def with_capacities(self, capacities):
        """ Copy of the topology with capacities taken from an edge -> value mapping. """
        graph = self.graph.copy()
        for edge, capacity in capacities.items():
            graph.edges[edge]['capacity'] = float(capacity)
        return Topology(graph, self.defaulted)

    def to_dict(self):
        return {'nodes': [str(n) for n in self.nodes],
            'edges': [[str(u), str(v), self.capacity((u, v))] for u, v in self.edges]}

    @classmethod
    def from_dict(cls, data):
        graph = nx.DiGraph()
        graph.add_nodes_from(str(n) for n in data.get('nodes', []))
        for u, v, capacity in data['edges']:
            graph.add_edge(str(u), str(v), capacity=float(capacity))
        return cls(graph)


@dataclass(frozen=True)
class Commodity:
    commodity_id: str
    source: str
    sink: str
    demand: float
    paths: tuple = ()           # Node sequences from source to sink

    def __post_init__(self):
        if not self.demand > 0:
            raise InstanceError(f'Commodity {self.commodity_id} needs a positive demand')
        if self.source == self.sink:
            raise InstanceError(f'Commodity {self.commodity_id} has source == sink')


@dataclass
class TrafficInstance:
    DOMAIN: ClassVar[str] = 'traffic'
    topology: Topology
    commodities: tuple
    num_paths: int = DEFAULT_PATHS
    dropped: tuple = ()         # Commodity ids without any path

    def __post_init__(self):
        self.commodities = tuple(self.commodities)
        if not self.commodities:
            raise InstanceError('Traffic instance has no routable commodities')
        for commodity in self.commodities:
            if not 1 <= len(commodity.paths) <= self.num_paths:
                raise InstanceError(f'Commodity {commodity.commodity_id} has '
                    f'{len(commodity.paths)} paths; expected 1..{self.num_paths}')

    def __str__(self):
        return f'<TrafficInstance:{self.topology} commodities={len(self.commodities)}>'

    @property
    def commodity_ids(self):
        return tuple(c.commodity_id for c in self.commodities)

    def to_dict(self):
        commodities = [{'id': c.commodity_id, 'source': c.source, 'sink': c.sink, 'demand': c.demand,
            'paths': [list(p) for p in c.paths]} for c in self.commodities]
        return {'domain': self.DOMAIN, 'num_paths': self.num_paths,
            'topology': self.topology.to_dict(), 'commodities': commodities}

    @classmethod
    def from_dict(cls, data):
        """ Topology is inline or a GraphML path; missing paths are computed. """
        try:
            num_paths = int(data.get('num_paths', DEFAULT_PATHS))
            topology = data['topology']
            topology = load_topology(topology) if isinstance(topology, str) else Topology.from_dict(topology)
            commodities = []
            for i, item in enumerate(data['commodities']):
                paths = tuple(tuple(str(n) for n in p) for p in item.get('paths', ()))
                commodities.append(Commodity(str(item.get('id', f'c{i}')), str(item['source']),
                    str(item['sink']), float(item['demand']), paths))
        except (KeyError, TypeError, ValueError) as err:
            raise InstanceError(f'Malformed traffic instance: {err}')
        missing = [c for c in commodities if not c.paths]
        if missing:
            routed, dropped = attach_paths(topology, missing, num_paths)
            routed = {c.commodity_id: c for c in routed}
            commodities = [routed.get(c.commodity_id, c) for c in commodities if c.commodity_id not in dropped]
            return cls(topology, commodities, num_paths, tuple(dropped))
        return cls(topology, commodities, num_paths)


@dataclass
class FlowAllocation:
    """ Per commodity-path flows f_j^p; f_j is the row sum. """
    path_flows: AllocationMatrix
    num_paths: dict             # commodity id -> usable path count

    @property
    def flows(self):
        return dict(zip(self.path_flows.row_ids, self.path_flows.values.sum(axis=1)))

    @property
    def total(self):
        return float(self.path_flows.values.sum())

    def to_dict(self):
        result = {}
        for cid, row in zip(self.path_flows.row_ids, self.path_flows.values):
            result[str(cid)] = {str(p): float(row[p]) for p in range(self.num_paths[cid])}
        return result

    def save(self, path):
        with open(path, 'w') as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)

    @classmethod
    def from_allocation(cls, allocation, commodities):
        return cls(allocation, {c.commodity_id: len(c.paths) for c in commodities})


def path_edges(path):
    return list(zip(path[:-1], path[1:]))


def load_topology(path, default_capacity=DEFAULT_CAPACITY, capacity_attr='capacity'):
    """ Read a GraphML file as a directed topology. Undirected edges become
        two directed edges, parallel edges merge by summing capacity and
        self-loops are dropped. Edges without capacity get default_capacity.
    """
    try:
        source = nx.read_graphml(path)
    except (OSError, ParseError, nx.NetworkXError, KeyError, ValueError) as err:
        raise InstanceError(f"Cannot read GraphML '{path}': {err}")
    graph = nx.DiGraph()
    graph.add_nodes_from(str(n) for n in source.nodes)
    defaulted = 0
    for u, v, data in source.edges(data=True):
        if u == v:
            continue
        try:
            capacity = float(data[capacity_attr]) if capacity_attr in data else default_capacity
        except (TypeError, ValueError):
            raise InstanceError(f"Edge {u}->{v} has a non numeric {capacity_attr} '{data[capacity_attr]}'")
        defaulted += capacity_attr not in data
        pairs = [(u, v)] if source.is_directed() else [(u, v), (v, u)]
        for a, b in pairs:
            a, b = str(a), str(b)
            if graph.has_edge(a, b):
                graph.edges[a, b]['capacity'] += capacity
            else:
                graph.add_edge(a, b, capacity=capacity)
    if defaulted:
        log.info(f'{defaulted} edges in {path} have no {capacity_attr}; using {default_capacity:g}')
    return Topology(graph, defaulted)


def k_shortest_paths(topology, source, sink, K):
    """ Up to K loopless paths by hop count. Ties are ordered by the node-id
        sequence so results do not depend on graph insertion order.
    """
    if source == sink:
        raise InstanceError('k_shortest_paths needs source != sink')
    if K < 1:
        raise InstanceError('K must be positive')
    graph = topology.graph
    if source not in graph or sink not in graph:
        return []
    paths = []
    try:
        for path in nx.shortest_simple_paths(graph, source, sink):
            if len(paths) >= K and len(path) > len(paths[K - 1]):
                break
            paths.append(tuple(path))
            if len(paths) >= TIE_CAP * K:
                break
    except nx.NetworkXNoPath:
        return []
    paths.sort(key=lambda p: (len(p), tuple(str(n) for n in p)))
    return paths[:K]


def attach_paths(topology, commodities, K):
    """ Returns (commodities with paths, ids of dropped commodities). """
    routed, dropped = [], []
    for commodity in commodities:
        paths = k_shortest_paths(topology, commodity.source, commodity.sink, K)
        if paths:
            routed.append(replace(commodity, paths=tuple(paths)))
        else:
            dropped.append(commodity.commodity_id)
    if dropped:
        message = f'Dropped {len(dropped)} commodities without a path: {", ".join(dropped[:5])}'
        log.warning(message)
        warnings.warn(message, PopWarning)
    return routed, dropped


def build_lp(topology, commodities):
    """ Maximize the sum of path flows subject to per-commodity demand rows
        and per-edge capacity rows. Variables are ordered commodity by
        commodity, path by path.
    """
    lp = LinearProgram(sense=MAX)
    edge_rows = defaultdict(dict)
    for commodity in commodities:
        demand_row = {}
        for p, path in enumerate(commodity.paths):
            var = lp.add_variable(f'f[{commodity.commodity_id},{p}]', obj=1.0)
            demand_row[var] = 1.0
            for edge in path_edges(path):
                if not topology.graph.has_edge(*edge):
                    raise InstanceError(f'Path of {commodity.commodity_id} uses missing edge {edge}')
                edge_rows[edge][var] = edge_rows[edge].get(var, 0.0) + 1.0
        lp.add_constraint(demand_row, LE, commodity.demand, name=f'demand[{commodity.commodity_id}]')
    for edge in topology.edges:
        if edge in edge_rows:
            lp.add_constraint(edge_rows[edge], LE, topology.capacity(edge), name=f'capacity[{edge[0]},{edge[1]}]')
    return lp


def make_sub_instance(instance, plan, sub_index):
    """ Whole topology with every capacity at the sub-problem's share; the
        plan's commodities with replicated demands scaled by their weight.
    """
    if plan.strategy != SplitStrategy.CAPACITY_SPLIT:
        raise PartitionError('Traffic sub-problems need a capacity split plan')
    topology = instance.topology.with_capacities(dict(zip(plan.resource_ids, plan.resource_shares[sub_index])))
    members = set(plan.members(sub_index))
    commodities = [replace(c, demand=c.demand * plan.weight(c.commodity_id, sub_index))
        for c in instance.commodities if c.commodity_id in members]
    return TrafficInstance(topology, commodities, instance.num_paths)


def _bottleneck(residual, edges):
    return min(residual[e] for e in edges)


def cspf_baseline(topology, commodities, seed=0, num_paths=DEFAULT_PATHS):
    """ Largest demand first (seeded tie-break). Each commodity goes whole on
        its first path with enough residual capacity, otherwise fills its
        paths in order. Single pass; unroutable residue stays unallocated.
    """
    tiebreak = utils.rng(seed).permutation(len(commodities))
    order = sorted(range(len(commodities)), key=lambda j: (-commodities[j].demand, tiebreak[j]))
    residual = {edge: topology.capacity(edge) for edge in topology.edges}
    values = np.zeros((len(commodities), num_paths))
    for j in order:
        commodity = commodities[j]
        edges = [path_edges(path) for path in commodity.paths]
        remaining = commodity.demand
        first = next((p for p in range(len(edges)) if _bottleneck(residual, edges[p]) >= remaining), None)
        targets = [first] if first is not None else range(len(edges))
        for p in targets:
            amount = min(remaining, _bottleneck(residual, edges[p]))
            if amount <= 0:
                continue
            values[j, p] += amount
            for edge in edges[p]:
                residual[edge] -= amount
            remaining -= amount
            if remaining <= 1e-12:
                break
    allocation = AllocationMatrix([c.commodity_id for c in commodities], range(num_paths), values)
    return FlowAllocation.from_allocation(allocation, commodities)


def verify_feasible(topology, commodities, flows, tol=FEASIBILITY_TOL):
    """ Check nonnegativity, unused path slots, demand caps and edge capacities. """
    allocation = flows.path_flows if isinstance(flows, FlowAllocation) else flows
    values = allocation.values
    if values.shape[0] != len(commodities):
        raise InstanceError(f'Flow rows {values.shape[0]} do not match {len(commodities)} commodities')
    report = FeasibilityReport(tol)
    loads = defaultdict(float)
    for j, commodity in enumerate(commodities):
        report.check('nonnegative', commodity.commodity_id, -values[j].min())
        report.check('paths', commodity.commodity_id, values[j, len(commodity.paths):].sum())
        report.check('demand', commodity.commodity_id, values[j].sum() - commodity.demand, commodity.demand)
        for p, path in enumerate(commodity.paths):
            for edge in path_edges(path):
                loads[edge] += values[j, p]
    for edge in topology.edges:
        capacity = topology.capacity(edge)
        report.check('capacity', edge, loads[edge] - capacity, capacity)
    return report


def generate_instance(seed, num_nodes=30, num_edges=100, num_commodities=200, num_paths=DEFAULT_PATHS,
                      capacity=DEFAULT_CAPACITY, uniform_demands=False, demand_scale=2.0):
    """ Seeded connected random topology (num_edges directed edges, both
        directions of num_edges/2 links) with gravity demands: weight of
        (s, t) is out-degree(s) * in-degree(t), total demand scaled to
        demand_scale times total edge capacity.
    """
    rand = utils.rng(seed)
    links = nx.gnm_random_graph(num_nodes, max(num_nodes - 1, num_edges // 2), seed=int(seed))
    components = sorted(sorted(c) for c in nx.connected_components(links))
    for a, b in zip(components, components[1:]):
        links.add_edge(a[0], b[0])
    graph = nx.DiGraph()
    graph.add_nodes_from(f'n{i}' for i in range(num_nodes))
    for u, v in links.edges:
        graph.add_edge(f'n{u}', f'n{v}', capacity=float(capacity))
        graph.add_edge(f'n{v}', f'n{u}', capacity=float(capacity))
    topology = Topology(graph)
    nodes = topology.nodes
    pairs = [(s, t) for s in nodes for t in nodes if s != t]
    weights = np.array([graph.out_degree(s) * graph.in_degree(t) for s, t in pairs], dtype=float)
    count = min(num_commodities, len(pairs))
    chosen = np.sort(rand.choice(len(pairs), size=count, replace=False, p=weights / weights.sum()))
    demands = np.ones(count) if uniform_demands else weights[chosen]
    total_capacity = capacity * graph.number_of_edges()
    demands = demands * (demand_scale * total_capacity / demands.sum())
    commodities = [Commodity(f'c{i}', pairs[c][0], pairs[c][1], float(d))
        for i, (c, d) in enumerate(zip(chosen, demands))]
    routed, dropped = attach_paths(topology, commodities, num_paths)
    return TrafficInstance(topology, routed, num_paths, tuple(dropped))


@register
class TrafficDomain(BaseDomain):
    NAME = 'traffic'
    SENSE = MAX
    LOAD_FEATURE = 0            # Demand
    GROUP_FEATURE = 1           # Source node
    STRATA_FEATURES = (0,)

    def entities(self, instance):
        position = {node: i for i, node in enumerate(instance.topology.nodes)}
        return [EntityFeatures(c.commodity_id, (c.demand, float(position[c.source]), float(position[c.sink]),
            float(len(c.paths)), float(len(c.paths[0]) - 1))) for c in instance.commodities]

    def resources(self, instance):
        return [Resource(edge, instance.topology.capacity(edge)) for edge in instance.topology.edges]

    def columns(self, instance):
        return tuple(range(instance.num_paths))

    def variable_count(self, instance):
        return sum(len(c.paths) for c in instance.commodities)

    def build_program(self, instance):
        return build_lp(instance.topology, instance.commodities)

    def solve(self, instance, solver, limits=None):
        result = solver.solve_lp(self.build_program(instance), limits)
        if not result.has_solution:
            return None, result
        values = np.zeros((len(instance.commodities), instance.num_paths))
        position = 0
        for j, commodity in enumerate(instance.commodities):
            values[j, :len(commodity.paths)] = result.primal[position:position + len(commodity.paths)]
            position += len(commodity.paths)
        return AllocationMatrix(instance.commodity_ids, self.columns(instance), values), result

    def make_sub_instance(self, instance, plan, sub_index):
        return make_sub_instance(instance, plan, sub_index)

    def verify_feasible(self, instance, allocation):
        return verify_feasible(instance.topology, instance.commodities, allocation)

    def objective(self, instance, allocation):
        return float(allocation.values.sum())

    def quality(self, instance, allocation):
        demand = sum(c.demand for c in instance.commodities)
        return {'satisfied': float(allocation.values.sum() / demand)}

    def baseline(self, instance, seed=0):
        return cspf_baseline(instance.topology, instance.commodities, seed, instance.num_paths).path_flows

    def generate(self, seed, **params):
        return generate_instance(seed, **params)

    def from_dict(self, data):
        return TrafficInstance.from_dict(data)
