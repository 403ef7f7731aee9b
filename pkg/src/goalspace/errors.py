"""Exception types raised across the package."""


class GoalspaceError(Exception):
    """Base class for every error raised by goalspace."""


class DimensionError(GoalspaceError, ValueError):
    def __init__(self, what, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected {expected}, got {got}")


class NotFittedError(GoalspaceError, RuntimeError):
    pass


class DisconnectedGraphError(GoalspaceError, ValueError):
    def __init__(self, n_components, kappa):
        self.n_components = n_components
        self.kappa = kappa
        super().__init__(
            f"neighbourhood graph has {n_components} connected components "
            f"with kappa={kappa}; raise kappa")


class NonFiniteLossError(GoalspaceError, FloatingPointError):
    def __init__(self, term):
        self.term = term
        super().__init__(f"non-finite value in loss term '{term}'")


class DivergenceError(GoalspaceError, FloatingPointError):
    def __init__(self, last_stable_update, loss):
        self.last_stable_update = last_stable_update
        self.loss = loss
        super().__init__(
            f"training diverged (loss={loss!r}); last stable update was "
            f"{last_stable_update}")


class EmptyHistoryError(GoalspaceError, ValueError):
    pass


class ShapeMismatchError(GoalspaceError, ValueError):
    pass
