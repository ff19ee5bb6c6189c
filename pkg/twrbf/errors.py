from typing import Optional


class TwrbfError(Exception):
    pass


class DimensionError(TwrbfError, ValueError):
    pass


class NotPSDError(TwrbfError, ValueError):
    def __init__(self, min_eigenvalue: float, *args, **kwargs):
        self.min_eigenvalue = min_eigenvalue
        super(NotPSDError, self).__init__(*args, **kwargs)

    def __str__(self):
        msg = self.args[0] if self.args else "matrix is not PSD"
        return f"{msg}: min eigenvalue={self.min_eigenvalue:.3e}"


class DomainError(TwrbfError, ValueError):
    pass


class ConfigError(TwrbfError, ValueError):
    pass


class SolverError(TwrbfError):
    """
    A numerical routine failed to produce a usable answer. ``status`` is the
    solver's own status string and ``stage`` says where in an outer algorithm
    the failure happened, if anywhere.
    """

    def __init__(self, status: str, *args, stage: Optional[str] = None, **kwargs):
        self.status = status
        self.stage = stage
        super(SolverError, self).__init__(*args, **kwargs)

    def with_stage(self, stage: str) -> "SolverError":
        if self.stage is None:
            self.stage = stage
        else:
            self.stage = f"{stage}: {self.stage}"
        return self

    def __str__(self):
        msg = self.args[0] if self.args else "solver failed"
        if self.stage is None:
            return f"{msg} (status={self.status})"
        return f"{msg} (status={self.status}, stage={self.stage})"

    def __repr__(self):
        return (
            f"{type(self).__name__}({self.status!r}, "
            + f"{self.args[0] if self.args else ''!r}, stage={self.stage!r})"
        )


class InfeasibleError(SolverError):
    def __init__(self, *args, **kwargs):
        super(InfeasibleError, self).__init__("infeasible", *args, **kwargs)


class BracketError(SolverError):
    def __init__(self, *args, **kwargs):
        super(BracketError, self).__init__("bracket", *args, **kwargs)
