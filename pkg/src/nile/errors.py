"""Shared exception types."""


class NileError(Exception):
    pass


class BudgetExceeded(NileError):
    """A computation exceeded its configured resource budget."""

    def __init__(self, what, limit):
        super().__init__(f"budget exceeded: {what} (limit {limit})")
        self.what = what
        self.limit = limit


class UnboundVariable(NileError):
    def __init__(self, name):
        super().__init__(f"unbound variable: {name}")
        self.name = name


class UnknownSugarForm(NileError):
    def __init__(self, node):
        super().__init__(f"cannot desugar node: {type(node).__name__}")
        self.node = node


class TemplateMissing(NileError):
    def __init__(self, name):
        super().__init__(f"prompt template not found: {name}")
        self.name = name


class EndpointError(NileError):
    pass
