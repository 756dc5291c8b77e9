# encoding: utf-8
"""
Shard placement that keeps every server's load within a tolerance of the
average while moving as little data as possible. r[i, j] is the fraction of
shard i's queries served by server j; the binary r'[i, j] marks that server j
holds a copy of shard i.
"""
import logging, warnings
import numpy as np
from dataclasses import dataclass, field, replace
from typing import ClassVar
from .. import utils
from ..basedomain import BaseDomain, FeasibilityReport, register
from ..exceptions import InstanceError, PartitionError, PopWarning
from ..partition import EntityFeatures, Resource, SplitStrategy
from ..pop import AllocationMatrix
from ..solver import EQ, GE, LE, MIN, LinearProgram, MixedIntegerProgram, SolveResult, Status
log = logging.getLogger(__name__)

LOAD_TOL = 1e-6             # Absolute, on server loads and row sums
INDICATOR_TOL = 1e-6        # r above this counts as hosting the shard
DEFAULT_EPSILON = 0.05      # Fraction of L
LOAD_DEVIATION = 0.10       # Sub-problem load skew that triggers a warning
INFEASIBLE_HINT = 'shard loads are uneven across sub-problems; try a stratified split or replication=2'


@dataclass(frozen=True)
class Shard:
    shard_id: str
    load: float
    memory: float
    share: float = 1.0          # Fraction of the shard's queries this problem serves

    def __post_init__(self):
        if self.load < 0:
            raise InstanceError(f'Shard {self.shard_id} has negative load')
        if not self.memory > 0:
            raise InstanceError(f'Shard {self.shard_id} needs positive memory')


@dataclass(frozen=True)
class Server:
    server_id: str
    capacity: float

    def __post_init__(self):
        if not self.capacity > 0:
            raise InstanceError(f'Server {self.server_id} needs positive capacity')


@dataclass
class PlacementState:
    t: np.ndarray               # (shards, servers) current placement, 0/1
    load_target: float          # L
    epsilon: float
    window: tuple = None        # (low, high) load bounds; default L -/+ epsilon

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.epsilon < 0:
            raise InstanceError('Load tolerance epsilon must be nonnegative')
        if not np.isin(self.t, (0.0, 1.0)).all():
            raise InstanceError('Placement matrix must be binary')
        if self.window is None:
            self.window = (self.load_target - self.epsilon, self.load_target + self.epsilon)


@dataclass
class ShardMap:
    shard_ids: tuple
    server_ids: tuple
    r: np.ndarray
    indicator: np.ndarray
    moves: int = 0
    balanced: bool = None

    @classmethod
    def from_allocation(cls, allocation, tol=INDICATOR_TOL):
        r = allocation.values
        return cls(allocation.row_ids, allocation.col_ids, r, (r > tol).astype(float))

    @property
    def allocation(self):
        return AllocationMatrix(self.shard_ids, self.server_ids, self.r)


@dataclass
class LoadBalanceInstance:
    DOMAIN: ClassVar[str] = 'loadbalance'
    shards: tuple
    servers: tuple
    state: PlacementState
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.shards, self.servers = tuple(self.shards), tuple(self.servers)
        if not self.shards or not self.servers:
            raise InstanceError('Load balancing needs shards and servers')
        if self.state.t.shape != (len(self.shards), len(self.servers)):
            raise InstanceError(f'Placement shape {self.state.t.shape} does not match '
                f'{len(self.shards)} shards x {len(self.servers)} servers')

    def __str__(self):
        return f'<LoadBalanceInstance:shards={len(self.shards)} servers={len(self.servers)}>'

    @property
    def shard_ids(self):
        return tuple(s.shard_id for s in self.shards)

    @property
    def server_ids(self):
        return tuple(s.server_id for s in self.servers)

    def to_dict(self):
        placement = [[self.shards[i].shard_id, self.servers[j].server_id] for i, j in zip(*np.nonzero(self.state.t))]
        return {'domain': self.DOMAIN, 'epsilon': self.state.epsilon, 'placement': placement,
            'shards': [{'id': s.shard_id, 'load': s.load, 'memory': s.memory} for s in self.shards],
            'servers': [{'id': s.server_id, 'capacity': s.capacity} for s in self.servers]}

    @classmethod
    def from_dict(cls, data):
        try:
            shards = [Shard(str(s['id']), float(s['load']), float(s['memory'])) for s in data['shards']]
            servers = [Server(str(s['id']), float(s['capacity'])) for s in data['servers']]
            rows = {s.shard_id: i for i, s in enumerate(shards)}
            cols = {s.server_id: j for j, s in enumerate(servers)}
            t = np.zeros((len(shards), len(servers)))
            for shard_id, server_id in data['placement']:
                t[rows[str(shard_id)], cols[str(server_id)]] = 1.0
        except (KeyError, TypeError, ValueError) as err:
            raise InstanceError(f'Malformed load balancing instance: {err}')
        unplaced = [s.shard_id for s, row in zip(shards, t) if not row.any()]
        if unplaced:
            raise InstanceError(f'Shards without a current server: {", ".join(unplaced[:5])}')
        load_target = sum(s.load for s in shards) / len(servers)
        epsilon = float(data.get('epsilon', DEFAULT_EPSILON * load_target))
        return cls(shards, servers, PlacementState(t, load_target, epsilon))


def fits_memory(shards, servers):
    """ One copy of every shard fits the servers' total memory. """
    return sum(s.memory for s in shards) <= sum(s.capacity for s in servers) + LOAD_TOL


def build_milp(shards, servers, state):
    """ Minimize memory moved onto servers that do not hold the shard yet.
        Variables: r[i, j] in [0, share_i] then binary r'[i, j], row-major.
    """
    n, m = len(shards), len(servers)
    if not fits_memory(shards, servers):
        raise InstanceError('Total shard memory exceeds total server capacity')
    lp = LinearProgram(sense=MIN)
    for shard in shards:
        for server in servers:
            lp.add_variable(f'r[{shard.shard_id},{server.server_id}]', lower=0.0, upper=shard.share)
    for i, shard in enumerate(shards):
        for j, server in enumerate(servers):
            cost = (1.0 - state.t[i, j]) * shard.memory
            lp.add_variable(f'u[{shard.shard_id},{server.server_id}]', lower=0.0, upper=1.0, obj=cost)
    low, high = state.window
    for j, server in enumerate(servers):
        coeffs = {i * m + j: shard.load for i, shard in enumerate(shards)}
        lp.add_constraint(coeffs, GE, low, name=f'load_low[{server.server_id}]')
        lp.add_constraint(coeffs, LE, high, name=f'load_high[{server.server_id}]')
    for i, shard in enumerate(shards):
        lp.add_constraint({i * m + j: 1.0 for j in range(m)}, EQ, shard.share, name=f'serve[{shard.shard_id}]')
    for j, server in enumerate(servers):
        coeffs = {n * m + i * m + j: shard.memory for i, shard in enumerate(shards)}
        lp.add_constraint(coeffs, LE, server.capacity, name=f'memory[{server.server_id}]')
    for i, shard in enumerate(shards):
        for j in range(m):
            lp.add_constraint({i * m + j: 1.0, n * m + i * m + j: -shard.share}, LE, 0.0, name=f'link[{i},{j}]')
    return MixedIntegerProgram(lp, frozenset(range(n * m, 2 * n * m)))


def make_sub_instance(instance, plan, sub_index):
    """ Shards of the sub-problem on its dealt servers. L is recomputed from
        the sub-problem's load; the load window stays inside the global one
        so a coalesced map keeps the global bounds.
    """
    if plan.strategy != SplitStrategy.DISJOINT_PARTITION:
        raise PartitionError('Load balancing sub-problems need a disjoint server partition')
    server_ids = set(plan.resources_of(sub_index))
    cols = [j for j, s in enumerate(instance.servers) if s.server_id in server_ids]
    members = set(plan.members(sub_index))
    rows = [i for i, s in enumerate(instance.shards) if s.shard_id in members]
    shards = [instance.shards[i] for i in rows]
    shards = [replace(s, share=s.share * plan.weight(s.shard_id, sub_index)) for s in shards]
    servers = [instance.servers[j] for j in cols]
    sub_load = sum(s.load * s.share for s in shards)
    load_target = sub_load / len(servers)
    state = instance.state
    window = (max(load_target, state.load_target) - state.epsilon,
        min(load_target, state.load_target) + state.epsilon)
    window = (max(window[0], state.window[0]), min(window[1], state.window[1]))
    sub = LoadBalanceInstance(shards, servers, PlacementState(
        state.t[np.ix_(rows, cols)], load_target, state.epsilon, window))
    expected = state.load_target * len(servers)
    if abs(sub_load - expected) > LOAD_DEVIATION * expected:
        message = (f'Sub-problem {sub_index} load {sub_load:.6g} deviates more than '
            f'{LOAD_DEVIATION:.0%} from {expected:.6g}; it may be infeasible')
        log.warning(message)
        warnings.warn(message, PopWarning)
        sub.notes.append(message)
    return sub


def movement_cost(instance, allocation, tol=INDICATOR_TOL):
    """ Memory placed on servers that did not hold the shard before. """
    hosted = allocation.values > tol
    memory = np.array([s.memory for s in instance.shards])
    return float(((1.0 - instance.state.t) * hosted * memory[:, None]).sum())


def verify_feasible(instance, shard_map, tol=LOAD_TOL):
    """ Check the load window, per-shard row sums, memory capacity and the
        r / r' consistency of a ShardMap or an AllocationMatrix.
    """
    if isinstance(shard_map, AllocationMatrix):
        shard_map = ShardMap.from_allocation(shard_map)
    r = shard_map.r
    if r.shape != instance.state.t.shape:
        raise InstanceError(f'Shard map shape {r.shape} does not match the instance')
    report = FeasibilityReport(tol)
    low, high = instance.state.window
    loads = np.array([s.load for s in instance.shards]) @ r
    memory = np.array([s.memory for s in instance.shards]) @ shard_map.indicator
    for j, server in enumerate(instance.servers):
        report.check('load_high', server.server_id, loads[j] - high)
        report.check('load_low', server.server_id, low - loads[j])
        report.check('memory', server.server_id, memory[j] - server.capacity, server.capacity)
    for i, shard in enumerate(instance.shards):
        report.check('serve', shard.shard_id, abs(r[i].sum() - shard.share))
        report.check('nonnegative', shard.shard_id, -r[i].min())
        hosted = r[i] > INDICATOR_TOL
        mismatch = np.abs(hosted.astype(float) - shard_map.indicator[i]).max()
        report.check('indicator', shard.shard_id, mismatch)
    return report


def greedy_baseline(shards, servers, state, max_moves=None):
    """ Repeatedly take the most loaded server above the window and move its
        hottest shard to the least loaded server with memory room, as long
        as the move lowers the larger of the two loads. Ties go to the
        earlier shard or server.
    """
    n, m = len(shards), len(servers)
    load = np.array([s.load for s in shards])
    memory = np.array([s.memory for s in shards])
    capacity = np.array([s.capacity for s in servers])
    share = np.array([s.share for s in shards])
    rowsum = state.t.sum(axis=1)
    r = np.where(rowsum[:, None] > 0, state.t / np.where(rowsum > 0, rowsum, 1.0)[:, None], 0.0) * share[:, None]
    low, high = state.window
    moves = 0
    for i in np.flatnonzero(rowsum == 0):
        served = load @ r
        used = memory @ (r > 0)
        room = [j for j in range(m) if used[j] + memory[i] <= capacity[j]] or list(range(m))
        r[i, min(room, key=lambda j: (served[j], j))] = share[i]
        moves += 1
    max_moves = 10 * n * m if max_moves is None else max_moves
    while moves < max_moves:
        served = load @ r
        used = memory @ (r > 0)
        moved = False
        for j in sorted(np.flatnonzero(served > high + LOAD_TOL), key=lambda j: (-served[j], j)):
            for i in sorted(np.flatnonzero(r[:, j] > 0), key=lambda i: (-load[i] * r[i, j], i)):
                amount = load[i] * r[i, j]
                room = [k for k in range(m) if k != j and (r[i, k] > 0 or used[k] + memory[i] <= capacity[k])]
                if not room:
                    continue
                dest = min(room, key=lambda k: (served[k], k))
                if served[dest] + amount >= served[j]:
                    continue
                r[i, dest] += r[i, j]
                r[i, j] = 0.0
                moves += 1
                moved = True
                break
            if moved:
                break
        if not moved:
            break
    served = load @ r
    balanced = bool(((served >= low - LOAD_TOL) & (served <= high + LOAD_TOL)).all())
    if not balanced:
        log.info(f'Greedy placement ended unbalanced after {moves} moves')
    return ShardMap(tuple(s.shard_id for s in shards), tuple(s.server_id for s in servers),
        r, (r > INDICATOR_TOL).astype(float), moves, balanced)


def round_placement(instance, allocation):
    """ Serve every shard entirely from the server carrying most of it (ties
        prefer its current server, then the earlier server). Returns the
        rounded ShardMap and its feasibility report; rounding may break the
        load window.
    """
    r = allocation.values
    rounded = np.zeros_like(r)
    for i, shard in enumerate(instance.shards):
        j = max(range(r.shape[1]), key=lambda j: (round(r[i, j], 9), instance.state.t[i, j], -j))
        rounded[i, j] = shard.share
    shard_map = ShardMap.from_allocation(AllocationMatrix(allocation.row_ids, allocation.col_ids, rounded))
    report = verify_feasible(instance, shard_map)
    if not report.feasible:
        log.warning(f'Rounded placement is infeasible: {report}')
    return shard_map, report


def generate_instance(seed, num_shards=32, num_servers=8, epsilon=DEFAULT_EPSILON, zipf=1.1,
                      headroom=0.3, memory_range=(1.0, 10.0)):
    """ Seeded instance: Zipf shard loads over a random rank order,
        log-uniform memories, server capacities with aggregate headroom and a
        random first-fit current placement. epsilon is a fraction of L.
    """
    rand = utils.rng(seed)
    loads = 100.0 / (rand.permutation(num_shards) + 1.0) ** zipf
    memories = np.exp(rand.uniform(np.log(memory_range[0]), np.log(memory_range[1]), size=num_shards))
    raw = rand.uniform(0.8, 1.2, size=num_servers)
    capacities = np.maximum(raw / raw.sum() * (1.0 + headroom) * memories.sum(), memories.max())
    t = np.zeros((num_shards, num_servers))
    used = np.zeros(num_servers)
    for i in np.argsort(-memories, kind='stable'):
        candidates = [j for j in rand.permutation(num_servers) if used[j] + memories[i] <= capacities[j]]
        j = candidates[0] if candidates else int(np.argmax(capacities - used))
        t[i, j] = 1.0
        used[j] += memories[i]
    shards = [Shard(f'shard{i}', float(loads[i]), float(memories[i])) for i in range(num_shards)]
    servers = [Server(f'server{j}', float(capacities[j])) for j in range(num_servers)]
    load_target = float(loads.sum()) / num_servers
    return LoadBalanceInstance(shards, servers, PlacementState(t, load_target, epsilon * load_target))


@register
class LoadBalanceDomain(BaseDomain):
    NAME = 'loadbalance'
    SENSE = MIN
    STRATEGY = SplitStrategy.DISJOINT_PARTITION
    PARTITIONER = 'stratified'
    LOAD_FEATURE = 0
    GROUP_FEATURE = 2           # Current server
    STRATA_FEATURES = (0,)
    INFEASIBLE_HINT = INFEASIBLE_HINT

    def entities(self, instance):
        current = instance.state.t.argmax(axis=1)
        return [EntityFeatures(s.shard_id, (s.load, s.memory, float(current[i])))
            for i, s in enumerate(instance.shards)]

    def resources(self, instance):
        return [Resource(s.server_id, s.capacity) for s in instance.servers]

    def variable_count(self, instance):
        return 2 * len(instance.shards) * len(instance.servers)

    def build_program(self, instance):
        return build_milp(instance.shards, instance.servers, instance.state)

    def solve(self, instance, solver, limits=None):
        if not fits_memory(instance.shards, instance.servers):
            log.debug(f'{instance}: shard memory exceeds server capacity')
            return None, SolveResult(Status.INFEASIBLE)
        result = solver.solve(self.build_program(instance), limits)
        if not result.has_solution:
            return None, result
        n, m = len(instance.shards), len(instance.servers)
        r = np.asarray(result.primal[:n * m]).reshape(n, m)
        return AllocationMatrix(instance.shard_ids, instance.server_ids, r), result

    def make_sub_instance(self, instance, plan, sub_index):
        return make_sub_instance(instance, plan, sub_index)

    def verify_feasible(self, instance, allocation):
        return verify_feasible(instance, allocation)

    def objective(self, instance, allocation):
        return movement_cost(instance, allocation)

    def quality(self, instance, allocation):
        loads = np.array([s.load for s in instance.shards]) @ allocation.values
        return {'max_load': float(loads.max()), 'load_spread': float(loads.max() - loads.min())}

    def baseline(self, instance, seed=0):
        return greedy_baseline(instance.shards, instance.servers, instance.state).allocation

    def generate(self, seed, **params):
        return generate_instance(seed, **params)

    def from_dict(self, data):
        return LoadBalanceInstance.from_dict(data)
