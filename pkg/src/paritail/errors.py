"""Exception types shared across the package."""


class ParitailError(Exception):
    """Base class; ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 10


class ZeroBandwidth(ParitailError):
    """A request arrived for a file that no server is serving."""

    exit_code = 11

    def __init__(self, file):
        super().__init__(f"file {file} has zero bandwidth")
        self.file = file


class DegenerateGame(ParitailError):
    exit_code = 12


class NonpositivePayoff(ParitailError):
    exit_code = 13

    def __init__(self, server):
        super().__init__(f"server {server} has nonpositive payoff")
        self.server = server


class DomainError(ParitailError, ValueError):
    exit_code = 14


class Unstable(ParitailError):
    """Offered bandwidth does not exceed the request rate for some file."""

    exit_code = 15

    def __init__(self, file):
        super().__init__(f"file {file} is unstable (capacity*pi <= rate)")
        self.file = file


class Censored(ParitailError):
    """Fewer than half the runs reached the convergence band."""

    exit_code = 16

    def __init__(self, alpha, reached, runs):
        super().__init__(
            f"alpha={alpha}: only {reached}/{runs} runs reached the band")
        self.alpha = alpha
        self.reached = reached
        self.runs = runs
