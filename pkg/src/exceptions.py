"""Exception hierarchy for the igd-sync simulator."""
from common import *


class SyncSimError(Exception):
    """Base class for every error raised by the simulator."""


class InputError(SyncSimError, ValueError):
    """An operation received arguments outside its domain."""


class ConfigError(InputError):
    """A configuration (file, CLI or AlgoConfig) violates its invariants."""


class DisconnectedGraphError(InputError):
    """The peer graph does not connect every node."""

    def __init__(self, unreachable: Iterable[int]):
        self.unreachable: Tuple[int, ...] = tuple(sorted(unreachable))
        super().__init__(
            f"graph is disconnected; unreachable from node 0: {list(self.unreachable)}"
        )


class DivergenceError(SyncSimError):
    """An iterate became non-finite."""

    def __init__(self, iteration: int, message: str = "non-finite iterate"):
        self.iteration = iteration
        super().__init__(f"{message} at global iteration {iteration}")


class CertificateError(SyncSimError):
    """Certified traces reported violations and the harness runs in fail mode."""

    def __init__(self, reports: Sequence[Any]):
        self.reports = list(reports)
        total = sum(len(r.violations) for r in self.reports)
        super().__init__(f"{total} certificate violation(s) in {len(self.reports)} trace(s)")


class InternalError(SyncSimError):
    """A numerical step failed where the invariants say it cannot."""
