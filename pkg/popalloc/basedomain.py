# encoding: utf-8
import importlib, json, logging
from dataclasses import dataclass, field
from . import partition
from .exceptions import ConfigError, InstanceError
log = logging.getLogger(__name__)

DOMAINS = {}    # Domain name -> BaseDomain subclass; filled by popalloc.domains


def register(cls):
    """ Class decorator adding a domain to the registry. """
    DOMAINS[cls.NAME] = cls
    return cls


def get_domain(instance_or_name):
    """ Returns the domain object for a name or for an instance's DOMAIN tag. """
    importlib.import_module('popalloc.domains')
    name = getattr(instance_or_name, 'DOMAIN', instance_or_name)
    if name not in DOMAINS:
        raise ConfigError(f"Unknown domain '{name}'; choose from {', '.join(sorted(DOMAINS))}")
    return DOMAINS[name]()


@dataclass
class Violation:
    family: str         # Constraint family (capacity, demand, window, ...)
    index: object       # Which row of the family
    excess: float       # Amount beyond the limit

    def __str__(self):
        return f'{self.family}[{self.index}] exceeded by {self.excess:.6g}'


@dataclass
class FeasibilityReport:
    tolerance: float
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __str__(self):
        if self.feasible:
            return '<FeasibilityReport:feasible>'
        return f'<FeasibilityReport:{len(self.violations)} violations; first {self.violations[0]}>'

    @property
    def feasible(self):
        return not self.violations

    def check(self, family, index, excess, scale=1.0):
        """ Record a violation when excess is above tolerance (scaled by
            max(1, |scale|) so large capacities get a proportional slack).
        """
        if excess > self.tolerance * max(1.0, abs(scale)):
            self.violations.append(Violation(family, index, float(excess)))


class BaseDomain:
    """ Abstract domain. Subclasses describe one allocation problem: how its
        instance looks as entities and resources, how to build and solve the
        full program, how to cut a sub-instance from a plan and how to check
        an allocation against the original constraints.
    """
    NAME = None                 # Registry key and instance DOMAIN tag
    SENSE = None                # 'max' or 'min'
    STRATEGY = partition.SplitStrategy.CAPACITY_SPLIT
    PARTITIONER = 'random'      # Default partitioner name
    LOAD_FEATURE = 0            # Feature index replicate_hot compares
    GROUP_FEATURE = None        # Categorical feature for skewed and clustered splits
    STRATA_FEATURES = (0,)      # Feature indexes for stratified splits
    INFEASIBLE_HINT = None      # Appended to InfeasibleSubproblemError

    def __str__(self):
        return f'<{self.__class__.__name__}>'

    # Instance description
    def entities(self, instance):
        raise NotImplementedError

    def resources(self, instance):
        raise NotImplementedError

    def columns(self, instance):
        """ Column ids of this domain's allocation matrix. """
        return tuple(r.resource_id for r in self.resources(instance))

    def variable_count(self, instance):
        raise NotImplementedError

    # Solving
    def build_program(self, instance):
        raise NotImplementedError

    def solve(self, instance, solver, limits=None):
        """ Returns (AllocationMatrix or None, SolveResult). """
        raise NotImplementedError

    def make_sub_instance(self, instance, plan, sub_index):
        raise NotImplementedError

    def verify_feasible(self, instance, allocation):
        raise NotImplementedError

    def objective(self, instance, allocation):
        raise NotImplementedError

    def baseline(self, instance, seed=0):
        raise NotImplementedError

    def quality(self, instance, allocation):
        """ Extra per-domain quality figures reported next to the objective. """
        return {}

    def better(self, value, reference, tol=1e-6):
        """ True if value beats reference by more than tol in this domain's sense. """
        return value > reference + tol if self.SENSE == 'max' else value < reference - tol

    # Instances on disk
    def generate(self, seed, **params):
        raise NotImplementedError

    def from_dict(self, data):
        raise NotImplementedError

    def load(self, path):
        try:
            with open(path) as handle:
                return self.from_dict(json.load(handle))
        except (OSError, ValueError) as err:
            raise InstanceError(f"Cannot read {self.NAME} instance '{path}': {err}")

    def save(self, instance, path):
        with open(path, 'w') as handle:
            json.dump(instance.to_dict(), handle, indent=2, sort_keys=True)

    # Partitioning
    def partition(self, instance, k, partitioner=None, seed=0, replication=None, strategy=None, **options):
        """ Partition instance into k sub-problems with the named partitioner,
            optionally replicating hot entities.
        """
        partitioner = partitioner or self.PARTITIONER
        partfunc = getattr(self, f'_partition_{partitioner}', None)
        if partfunc is None:
            raise ConfigError(f"Unknown partitioner '{partitioner}'")
        entities = self.entities(instance)
        resources = self.resources(instance)
        strategy = partition.SplitStrategy(strategy or self.STRATEGY)
        plan = partfunc(entities, resources, k, seed, strategy, **options)
        if replication:
            plan = partition.replicate_hot(plan, entities, replication, self.LOAD_FEATURE)
        return plan

    def _partition_random(self, entities, resources, k, seed, strategy):
        return partition.partition_random(entities, resources, k, seed, strategy)

    def _partition_stratified(self, entities, resources, k, seed, strategy, strata_dims=None, num_strata=None):
        strata_dims = self.STRATA_FEATURES if strata_dims is None else strata_dims
        return partition.partition_stratified(entities, resources, k, strata_dims, seed, strategy, num_strata)

    def _partition_clustered(self, entities, resources, k, seed, strategy, cluster_key=None):
        cluster_key = self.GROUP_FEATURE if cluster_key is None else cluster_key
        if cluster_key is None:
            raise ConfigError(f'The {self.NAME} domain has no categorical feature to cluster on')
        return partition.partition_clustered(entities, resources, k, cluster_key, seed, strategy)

    def _partition_skewed(self, entities, resources, k, seed, strategy, group_key=None):
        group_key = self.GROUP_FEATURE if group_key is None else group_key
        if group_key is None:
            raise ConfigError(f'The {self.NAME} domain has no categorical feature to group on')
        return partition.partition_skewed(entities, resources, k, group_key, seed, strategy)
