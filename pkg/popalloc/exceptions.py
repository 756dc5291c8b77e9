# encoding: utf-8


class PopError(Exception):
    pass


class ConfigError(PopError, ValueError):
    pass


class InstanceError(PopError):
    pass


class PartitionError(PopError):
    pass


class SolverError(PopError):
    pass


class InfeasibleSubproblemError(PopError):
    """ A sub-problem has no feasible allocation. """

    def __init__(self, sub_index, hint=None):
        self.sub_index = sub_index
        self.hint = hint
        message = f'Sub-problem {sub_index} is infeasible'
        super().__init__(f'{message}; {hint}' if hint else message)


class PopWarning(UserWarning):
    pass
