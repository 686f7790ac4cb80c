"""Exception hierarchy shared across the package."""


class LgcpDesignError(Exception):
    """Base class for all errors raised by lgcp_design."""


class EmptyGridError(LgcpDesignError):
    """Discretization produced no admissible cells."""


class NumericalError(LgcpDesignError):
    """Factorization failure, non-convergence, or excessive variance clamping."""


class InfeasibleDesignError(LgcpDesignError):
    """A design generator could not satisfy its constraints within its budget."""


class DegenerateFieldError(LgcpDesignError):
    """An inclusion-probability field is constant where min-max scaling is required."""
