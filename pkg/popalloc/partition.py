# encoding: utf-8
"""
Partitioners for POP (partitioned optimization problems). Every partitioner
decides which sub-problem each entity belongs to, then hands the buckets to
build_plan() which splits the resources with the chosen SplitStrategy.
"""
import logging, math, warnings
import numpy as np
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from . import utils
from .exceptions import PartitionError, PopWarning
log = logging.getLogger(__name__)

SHARE_TOL = 1e-9


class SplitStrategy(str, Enum):
    CAPACITY_SPLIT = 'capacity_split'           # Every sub-problem sees every resource at capacity/k
    DISJOINT_PARTITION = 'disjoint_partition'   # Whole resources dealt to sub-problems


@dataclass(frozen=True)
class EntityFeatures:
    entity_id: object
    features: tuple


@dataclass(frozen=True)
class Resource:
    resource_id: object
    capacity: float
    pooled: bool = False        # Capacity counts identical whole units (workers)


@dataclass
class PartitionPlan:
    """ Assignment of entities to k sub-problems plus the resource share
        every sub-problem receives. Replicated entities map to several
        sub-problems with a weight per sub-problem.
    """
    k: int
    strategy: SplitStrategy
    entity_ids: tuple                   # Original entity order
    assignment: dict                    # entity_id -> tuple of sub-problem indexes
    resource_ids: tuple
    capacities: np.ndarray              # Original capacity per resource
    resource_shares: np.ndarray         # (k, resources) share of every capacity
    replication_weights: dict = field(default_factory=dict)   # entity_id -> {sub: weight}

    def __str__(self):
        return f'<PartitionPlan:k={self.k} {self.strategy.value} entities={len(self.entity_ids)}>'

    def members(self, sub_index):
        """ Entity ids in sub-problem sub_index, in original order. """
        return [e for e in self.entity_ids if sub_index in self.assignment[e]]

    def weight(self, entity_id, sub_index):
        """ Fraction of entity_id's demand handled by sub_index. """
        weights = self.replication_weights.get(entity_id)
        if weights is None:
            return 1.0 if sub_index in self.assignment[entity_id] else 0.0
        return weights.get(sub_index, 0.0)

    def share_fraction(self, sub_index):
        """ Per resource fraction of the original capacity given to sub_index. """
        with np.errstate(divide='ignore', invalid='ignore'):
            fraction = self.resource_shares[sub_index] / self.capacities
        return np.where(self.capacities > 0, fraction, 0.0)

    def resources_of(self, sub_index):
        """ Resource ids with a nonzero share in sub_index. """
        return [r for r, share in zip(self.resource_ids, self.resource_shares[sub_index]) if share > 0]

    @property
    def replicated(self):
        return sorted(self.replication_weights, key=self.entity_ids.index)

    def validate(self):
        """ Raise PartitionError unless every plan invariant holds. """
        if self.k < 1:
            raise PartitionError(f'k must be at least 1, got {self.k}')
        for entity_id in self.entity_ids:
            subs = self.assignment.get(entity_id, ())
            if not subs:
                raise PartitionError(f'Entity {entity_id} is not assigned to any sub-problem')
            if any(not 0 <= s < self.k for s in subs):
                raise PartitionError(f'Entity {entity_id} assigned outside 0..{self.k - 1}')
        for entity_id, weights in self.replication_weights.items():
            if abs(sum(weights.values()) - 1.0) > SHARE_TOL:
                raise PartitionError(f'Replication weights of {entity_id} do not sum to 1')
        if self.resource_shares.shape != (self.k, len(self.resource_ids)):
            raise PartitionError('Resource shares do not match k and the resource count')
        if (self.resource_shares < 0).any():
            raise PartitionError('Resource shares must be nonnegative')
        drift = np.abs(self.resource_shares.sum(axis=0) - self.capacities)
        if (drift > SHARE_TOL * np.maximum(1.0, self.capacities)).any():
            raise PartitionError('Resource shares do not sum to the original capacities')
        for s in range(self.k):
            if not self.members(s):
                raise PartitionError(f'Sub-problem {s} has no entities')
        return self


@dataclass
class SimilarityReport:
    means: np.ndarray           # (k, d) z-scored feature means
    covariances: np.ndarray     # (k, d, d)
    distances: np.ndarray       # (k,) distance from the global distribution
    degenerate: np.ndarray      # (k,) fewer than 2 entities; covariance reported as zeros

    @property
    def max_distance(self):
        return float(self.distances.max()) if len(self.distances) else 0.0


def split_resources(resources, k, strategy):
    """ Returns the (k, resources) share matrix for a strategy. Shares of a
        resource always add back to its capacity exactly.
    """
    shares = np.zeros((k, len(resources)))
    if strategy == SplitStrategy.CAPACITY_SPLIT:
        for r, resource in enumerate(resources):
            shares[:, r] = resource.capacity / k
            shares[k - 1, r] = resource.capacity - shares[:k - 1, r].sum()
        return shares
    whole = [r for r, resource in enumerate(resources) if not resource.pooled]
    if whole and len(whole) < k:
        raise PartitionError(f'Cannot deal {len(whole)} resources to {k} sub-problems')
    for position, r in enumerate(whole):
        shares[position % k, r] = resources[r].capacity
    for r, resource in enumerate(resources):
        if resource.pooled:
            units = math.floor(resource.capacity)
            for s in range(k):
                shares[s, r] = units // k + (1 if s < units % k else 0)
            shares[k - 1, r] += resource.capacity - units
    return shares


def build_plan(entities, resources, k, buckets, strategy=SplitStrategy.CAPACITY_SPLIT):
    """ Plan from explicit per sub-problem lists of entity ids. """
    assignment = {}
    for s, bucket in enumerate(buckets):
        for entity_id in bucket:
            assignment[entity_id] = assignment.get(entity_id, ()) + (s,)
    plan = PartitionPlan(
        k=k, strategy=SplitStrategy(strategy),
        entity_ids=tuple(e.entity_id for e in entities),
        assignment=assignment,
        resource_ids=tuple(r.resource_id for r in resources),
        capacities=np.array([r.capacity for r in resources], dtype=float),
        resource_shares=split_resources(resources, k, SplitStrategy(strategy)),
    )
    return plan.validate()


def _check(entities, k):
    if k < 1:
        raise PartitionError(f'k must be at least 1, got {k}')
    if not entities:
        raise PartitionError('Cannot partition an empty entity list')
    if k > len(entities):
        raise PartitionError(f'k={k} exceeds the {len(entities)} entities; some sub-problem would be empty')
    sizes = {len(e.features) for e in entities}
    if len(sizes) > 1:
        raise PartitionError('Entity feature vectors have different dimensions')


def _deal(order, entities, k):
    """ Round-robin the entities in order across k buckets. """
    buckets = [[] for _ in range(k)]
    for position, index in enumerate(order):
        buckets[position % k].append(entities[index].entity_id)
    return buckets


def partition_random(entities, resources, k, seed, strategy=SplitStrategy.CAPACITY_SPLIT):
    """ Seeded shuffle then round-robin. Cheap and self-similar for large k·n. """
    _check(entities, k)
    order = utils.rng(seed).permutation(len(entities))
    return build_plan(entities, resources, k, _deal(order, entities, k), strategy)


def partition_stratified(entities, resources, k, strata_dims, seed,
                         strategy=SplitStrategy.CAPACITY_SPLIT, num_strata=None):
    """ Equal-frequency strata on every dimension in strata_dims; strata are
        dealt one after another with a continuing round-robin pointer so
        every sub-problem draws evenly from every stratum.
    """
    _check(entities, k)
    if not strata_dims:
        message = 'No strata dimensions given; falling back to random partitioning'
        log.warning(message)
        warnings.warn(message, PopWarning)
        return partition_random(entities, resources, k, seed, strategy)
    dims = len(entities[0].features)
    if any(not 0 <= d < dims for d in strata_dims):
        raise PartitionError(f'Strata dimensions {strata_dims} outside 0..{dims - 1}')
    n = len(entities)
    if num_strata is None:
        num_strata = max(1, int((n / k) ** (1.0 / len(strata_dims))))
    order = utils.rng(seed).permutation(n)
    keys = defaultdict(list)
    bins = np.zeros((n, len(strata_dims)), dtype=int)
    for column, d in enumerate(strata_dims):
        values = np.array([entities[i].features[d] for i in order], dtype=float)
        ranks = np.empty(n, dtype=int)
        ranks[np.argsort(values, kind='stable')] = np.arange(n)
        bins[order, column] = ranks * num_strata // n
    for i in order:
        keys[tuple(bins[i])].append(i)
    dealt = [i for key in sorted(keys) for i in keys[key]]
    return build_plan(entities, resources, k, _deal(dealt, entities, k), strategy)


def partition_clustered(entities, resources, k, cluster_key, seed,
                        strategy=SplitStrategy.CAPACITY_SPLIT):
    """ Group by the exact value of a categorical feature (job type, priority
        class) and deal every group across all sub-problems.
    """
    _check(entities, k)
    order = utils.rng(seed).permutation(len(entities))
    groups = defaultdict(list)
    for i in order:
        groups[entities[i].features[cluster_key]].append(i)
    dealt = [i for key in sorted(groups) for i in groups[key]]
    return build_plan(entities, resources, k, _deal(dealt, entities, k), strategy)


def partition_skewed(entities, resources, k, group_key, seed,
                     strategy=SplitStrategy.CAPACITY_SPLIT):
    """ Whole groups (e.g. every commodity leaving one source node) go to one
        sub-problem. Deliberately not self-similar; ablations only.
    """
    _check(entities, k)
    groups = defaultdict(list)
    for i, entity in enumerate(entities):
        groups[entity.features[group_key]].append(entity.entity_id)
    if len(groups) < k:
        raise PartitionError(f'Only {len(groups)} distinct groups for k={k}')
    # Largest groups first; ties broken by a seeded order of the group keys
    tiebreak = {key: rank for rank, key in enumerate(
        sorted(groups)[i] for i in utils.rng(seed).permutation(len(groups)))}
    ordered = sorted(groups, key=lambda key: (-len(groups[key]), tiebreak[key]))
    buckets = [[] for _ in range(k)]
    for position, key in enumerate(ordered):
        buckets[position % k].extend(groups[key])
    return build_plan(entities, resources, k, buckets, strategy)


def replicate_hot(plan, entities, hotness_threshold, load_feature=0):
    """ Entities whose load exceeds hotness_threshold x mean load join every
        sub-problem with weight 1/k. Returns a new plan; unchanged when no
        entity is hot.
    """
    if not hotness_threshold > 0:
        raise PartitionError('hotness_threshold must be positive')
    loads = np.array([e.features[load_feature] for e in entities], dtype=float)
    limit = hotness_threshold * loads.mean()
    hot = [e.entity_id for e, load in zip(entities, loads) if load > limit]
    if not hot:
        return plan
    log.info(f'Replicating {len(hot)} hot entities across {plan.k} sub-problems')
    assignment = dict(plan.assignment)
    weights = dict(plan.replication_weights)
    everywhere = tuple(range(plan.k))
    for entity_id in hot:
        assignment[entity_id] = everywhere
        weights[entity_id] = {s: 1.0 / plan.k for s in everywhere}
    return replace(plan, assignment=assignment, replication_weights=weights).validate()


def similarity_report(plan, entities):
    """ Mean and covariance of z-scored features per sub-problem and their
        distance ||mean - global mean||_2 + ||cov - global cov||_F.
    """
    features = np.array([e.features for e in entities], dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    std = features.std(axis=0)
    scaled = np.where(std > 0, (features - features.mean(axis=0)) / np.where(std > 0, std, 1.0), 0.0)
    dims = scaled.shape[1]
    global_mean = scaled.mean(axis=0)
    global_cov = _covariance(scaled)
    position = {e.entity_id: i for i, e in enumerate(entities)}
    means = np.zeros((plan.k, dims))
    covariances = np.zeros((plan.k, dims, dims))
    degenerate = np.zeros(plan.k, dtype=bool)
    distances = np.zeros(plan.k)
    for s in range(plan.k):
        rows = scaled[[position[e] for e in plan.members(s)]]
        means[s] = rows.mean(axis=0)
        if len(rows) < 2:
            degenerate[s] = True
        else:
            covariances[s] = _covariance(rows)
        distances[s] = (np.linalg.norm(means[s] - global_mean)
            + np.linalg.norm(covariances[s] - global_cov, ord='fro'))
    return SimilarityReport(means, covariances, distances, degenerate)


def _covariance(rows):
    if len(rows) < 2:
        return np.zeros((rows.shape[1], rows.shape[1]))
    return np.atleast_2d(np.cov(rows, rowvar=False, bias=True))
