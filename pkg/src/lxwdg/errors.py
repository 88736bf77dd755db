"""Exception types shared across the solver."""


class LxwdgError(Exception):
    """Base class for solver errors."""


class ConfigError(LxwdgError):
    """Invalid run configuration (bad key, bad value, inconsistent options)."""


class DomainError(LxwdgError):
    """A model operation received a state outside its domain (e.g. division by
    a positivity component smaller than the hard floor)."""


class PositivityError(LxwdgError):
    """A limiter precondition failed: some cell mean is inadmissible, so the
    rescaling limiters cannot restore positivity."""


class SolverError(LxwdgError):
    """Numerical failure inside an iteration (singular operator, root finder
    out of budget, invalid time step)."""
