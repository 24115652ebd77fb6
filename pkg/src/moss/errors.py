"""Exception hierarchy.

Every error carries a short ``kind`` string so the CLI can serialize it.
Solver failures (``SolverError`` subclasses) map to exit code 2, everything
else to exit code 1.
"""


class MossError(Exception):
    kind = "error"

    def __init__(self, message="", **info):
        super().__init__(message)
        self.info = info

    def to_dict(self):
        out = {"error": self.kind, "message": str(self)}
        out.update(self.info)
        return out


class ContradictorySplits(MossError):
    kind = "contradictory_splits"


class EmptySplitList(MossError):
    kind = "empty_split_list"


class GammaNotPositive(MossError):
    kind = "gamma_not_positive"


class DimensionMismatch(MossError):
    kind = "dimension_mismatch"


class DataError(MossError):
    kind = "data_error"


class DegenerateData(MossError):
    kind = "degenerate_data"


class EmptyPool(MossError):
    kind = "empty_pool"


class IndexOutOfRange(MossError):
    kind = "index_out_of_range"


class KTooLarge(MossError):
    kind = "k_too_large"


class EmptyRuleSet(MossError):
    kind = "empty_rule_set"


class TooFewSets(MossError):
    kind = "too_few_sets"


class ConstantTarget(MossError):
    kind = "constant_target"


class ConfigError(MossError):
    kind = "config_error"


class SolverError(MossError):
    kind = "solver_error"


class CholeskyFailure(SolverError):
    kind = "cholesky_failure"


class Infeasible(SolverError):
    kind = "infeasible"


class IterationLimit(SolverError):
    kind = "iteration_limit"


class TimeLimit(SolverError):
    kind = "time_limit"


class SweepLimit(SolverError):
    kind = "sweep_limit"
