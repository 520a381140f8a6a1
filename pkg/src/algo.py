"""Inexact distributed gradient descent with triggered intermittent synchronization.

Peers run the IndComp stage (independent steps on inexact gradient sums)
until some peer's locally verifiable trigger fires, then IntSync averages the
local copies over the spanning tree. When the inner loop ran more than once
the last step is discarded before averaging.
"""
from common import *
from errors import ErrorMode, ErrorModel
from exceptions import ConfigError, DivergenceError, InputError
from keys import STREAM_INITIAL_POINT, derive_key, keyed_generator
from network import Topology, measure_all, tree_average
from objective import Problem

logger = logging.getLogger(__name__)


class Variant(Enum):
    """Algorithm family members that share the IndComp/IntSync engine."""

    ALG1 = "alg1"
    ALG2 = "alg2"
    IGDDS = "igdds"
    GD = "gd"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ",".join(v.value for v in cls)
            raise ConfigError(f"unknown algorithm {name!r}, expected one of {choices}") from None


class Event(Enum):
    INDCOMP = "indcomp"
    ROLLBACK = "rollback"
    INTSYNC = "intsync"


def max_trigger_ratio(L: float, ell: float) -> float:
    """Largest admissible trigger parameter, sqrt(ell) / (sqrt(L) + sqrt(ell))."""
    return math.sqrt(ell) / (math.sqrt(L) + math.sqrt(ell))


def continue_threshold(r: float, bound: float, N: int, h_norms: Vector) -> Vector:
    """Per-peer threshold r*||h_i|| / (2*b*N) - 1/2 on the local index.

    r = 0 gives -1/2 (synchronize after every step); b = 0 with r > 0 gives
    +inf (never synchronize, all copies stay identical).
    """
    h_norms = np.asarray(h_norms, dtype=np.float64)
    if r == 0.0:
        return np.full(h_norms.shape, -0.5)
    if bound == 0.0:
        return np.full(h_norms.shape, math.inf)
    return r * h_norms / (2.0 * bound * N) - 0.5


@dataclass(frozen=True)
class AlgoConfig:
    """Step size, trigger parameter, error bounds and stopping rule of one run."""

    gamma: float
    r: float = 0.0
    epsilon: float = 0.0
    zeta: Optional[float] = None
    variant: Variant = Variant.ALG1
    max_global_iters: int = 3000
    grad_tol: float = 0.0

    @property
    def bound(self) -> float:
        """Error bound driving the trigger: eps, or tau = max(eps, zeta) on general graphs."""
        if self.variant is Variant.ALG2:
            return max(self.epsilon, self.zeta or 0.0)
        return self.epsilon

    def validate(self, problem: Problem, topology: Topology, model: ErrorModel) -> None:
        """Reject configurations outside the convergence guarantees."""
        if not 0.0 < self.gamma <= 1.0 / problem.L:
            raise ConfigError(f"gamma={self.gamma} must lie in (0, 1/L] = (0, {1.0 / problem.L}]")
        if not 0.0 <= self.r < 1.0:
            raise ConfigError(f"r={self.r} must lie in [0, 1)")
        if self.epsilon < 0.0:
            raise ConfigError(f"epsilon={self.epsilon} must be non-negative")
        if self.max_global_iters < 1:
            raise ConfigError("max_global_iters must be at least 1")
        if self.grad_tol < 0.0:
            raise ConfigError("grad_tol must be non-negative")
        if topology.N != problem.N:
            raise ConfigError(f"topology has {topology.N} nodes, problem has {problem.N} peers")
        if not model.is_silent and model.epsilon != self.epsilon:
            raise ConfigError(
                f"error model bound {model.epsilon} differs from the configured epsilon {self.epsilon}"
            )

        if self.variant in (Variant.ALG1, Variant.ALG2):
            r_max = max_trigger_ratio(problem.L, problem.ell)
            if self.r >= r_max:
                raise ConfigError(f"r={self.r} must be below r_max={r_max:.6g} for this instance")
        if self.variant is not Variant.ALG2 and not topology.is_complete:
            raise ConfigError(f"{self.variant.value} requires a complete graph; use alg2")
        if self.variant is Variant.ALG2 and self.zeta is None:
            raise ConfigError("alg2 needs a gradient bound zeta")
        if self.variant is Variant.GD:
            if self.epsilon != 0.0 or self.r != 0.0 or not model.is_silent:
                raise ConfigError("gd requires epsilon = 0, r = 0 and a silent error model")
        if self.variant is Variant.IGDDS:
            if self.r != 0.0:
                raise ConfigError("igdds requires r = 0")
            if not model.is_silent and model.mode is not ErrorMode.SHARED:
                raise ConfigError("igdds requires receiver-independent (shared) errors")


@dataclass
class SyncRecord:
    """One IntSync: its ordinal m, the index s_m, the loop state and the averaged gap."""

    m: int
    s: int
    state_label: int
    loop_length: int
    gap: float


@dataclass
class RunState:
    """Local copies and loop counters of a run."""

    x: Matrix
    x_prev: Matrix
    s: int = 0
    k: int = 0
    m: int = 0
    h: Optional[Matrix] = None
    h_norms: Optional[Vector] = None
    trial: int = 0
    indcomp_messages: int = 0
    intsync_messages: int = 0
    sync_records: List[SyncRecord] = field(default_factory=list)

    @classmethod
    def start(cls, x0: Vector, N: int, trial: int = 0) -> "RunState":
        x = np.tile(np.asarray(x0, dtype=np.float64), (N, 1))
        return cls(x=x, x_prev=x.copy(), trial=trial)

    @property
    def iteration(self) -> int:
        """Global iteration index s + k."""
        return self.s + self.k


@dataclass
class StepRecord:
    """Measurements of one event at global index ``iteration``.

    INDCOMP describes the state a step started from. ROLLBACK holds the
    discarded iterate, stamped with the index the run falls back to. INTSYNC
    holds the iterate that was averaged (per-peer ``gaps``) and the averaged
    result (``mean_gap``).
    """

    iteration: int
    local_k: int
    event: Event
    gaps: Vector
    mean_gap: float
    indcomp_messages: int
    intsync_messages: int
    grad_norms: Optional[Vector] = None
    deviations: Optional[Vector] = None
    h_norms: Optional[Vector] = None
    spread: float = 0.0
    max_source_grad: float = 0.0
    state_label: int = 0


@dataclass
class RunTrace:
    """Append-only record of a run."""

    variant: Variant
    trial: int
    N: int
    records: List[StepRecord] = field(default_factory=list)
    sync_records: List[SyncRecord] = field(default_factory=list)
    final_iteration: int = 0
    final_mean_gap: float = math.nan
    final_gaps: Optional[Vector] = None
    stopped_by: str = ""

    @property
    def intsync_count(self) -> int:
        return len(self.sync_records)

    @property
    def messages(self) -> Tuple[int, int]:
        """Total (IndComp, IntSync) vector messages, discarded steps included."""
        if not self.records:
            return 0, 0
        last = self.records[-1]
        return last.indcomp_messages, last.intsync_messages

    def gap_series(self, length: Optional[int] = None) -> Vector:
        """Mean-iterate gap per committed global index; padded with the final value."""
        length = self.final_iteration + 1 if length is None else length
        series = np.full(max(length, self.final_iteration + 1), math.nan)
        for rec in self.records:
            if rec.event is not Event.ROLLBACK:
                series[rec.iteration] = rec.mean_gap
        series[self.final_iteration] = self.final_mean_gap
        series[self.final_iteration + 1 :] = self.final_mean_gap
        return series[:length]

    def sync_gaps(self) -> Vector:
        return np.array([rec.gap for rec in self.sync_records])


def indcomp_step(
    state: RunState,
    problem: Problem,
    topology: Topology,
    model: ErrorModel,
    config: AlgoConfig,
) -> RunState:
    """Every peer steps x_i <- x_i - gamma * h_i from the same pre-step snapshot."""
    if state.x.shape != (problem.N, problem.n):
        raise InputError(f"copies have shape {state.x.shape}, expected ({problem.N}, {problem.n})")
    H, messages = measure_all(topology, problem, model, state.x, state.iteration, state.trial)
    x_new = state.x - config.gamma * H
    if not np.all(np.isfinite(x_new)):
        logger.warning("run diverged at global iteration %d", state.iteration)
        raise DivergenceError(state.iteration)
    state.x_prev = state.x
    state.x = x_new
    state.h = H
    state.h_norms = np.linalg.norm(H, axis=1)
    state.k += 1
    state.indcomp_messages += messages
    return state


def trigger(state: RunState, config: AlgoConfig) -> bool:
    """True iff some peer has k - 1 > r*||h_i|| / (2*b*N) - 1/2 for its last h_i."""
    if state.k < 1 or state.h_norms is None:
        raise InputError("trigger needs at least one IndComp step since the last IntSync")
    thresholds = continue_threshold(config.r, config.bound, len(state.h_norms), state.h_norms)
    return bool(np.any(state.k - 1 > thresholds))


def intsync(state: RunState, topology: Topology, problem: Optional[Problem] = None) -> RunState:
    """Average the copies over the spanning tree and restart the inner loop.

    With k != 1 the newest iterate is discarded and the retained x^(s+k-1) is
    averaged (state 1); with k = 1 the current x^(s+1) is averaged (state 2).
    """
    if state.k < 1:
        raise InputError("IntSync needs at least one IndComp step since the last IntSync")
    loop_length = state.k
    if loop_length != 1:
        base, label = state.x_prev, 1
        state.s += loop_length - 1
    else:
        base, label = state.x, 2
        state.s += 1

    mean, messages = tree_average(topology, list(base))
    state.x = np.tile(mean, (topology.N, 1))
    state.x_prev = state.x.copy()
    state.k = 0
    state.m += 1
    state.intsync_messages += messages
    gap = problem.gap(mean) if problem is not None else math.nan
    state.sync_records.append(SyncRecord(state.m, state.s, label, loop_length, gap))
    logger.debug("IntSync m=%d at s=%d (state %d, loop length %d)", state.m, state.s, label, loop_length)
    return state


def _spread(X: Matrix) -> float:
    diffs = X[:, None, :] - X[None, :, :]
    return float(np.max(np.linalg.norm(diffs, axis=2)))


def initial_point(n: int, seed: int, trial: int) -> Vector:
    """Standard-normal starting point keyed by (seed, trial)."""
    gen = keyed_generator(derive_key(seed, STREAM_INITIAL_POINT), (0, trial, 0, 0))
    return gen.standard_normal(n)


class InexactSyncRunner:
    """Drives one run: IndComp steps, trigger checks and IntSync, with full recording."""

    def __init__(
        self,
        problem: Problem,
        topology: Topology,
        config: AlgoConfig,
        model: ErrorModel,
        trial: int = 0,
    ):
        config.validate(problem, topology, model)
        self.problem = problem
        self.topology = topology
        self.config = config
        self.model = model
        self.trial = trial
        self.state: Optional[RunState] = None
        self.trace: Optional[RunTrace] = None

    def reset(self, x0: Vector) -> None:
        """Place every peer at the same starting point."""
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (self.problem.n,):
            raise InputError(f"x0 has shape {x0.shape}, expected ({self.problem.n},)")
        self.state = RunState.start(x0, self.problem.N, self.trial)
        self.trace = RunTrace(self.config.variant, self.trial, self.problem.N)

    def run(self, x0: Vector) -> RunTrace:
        """Alternate IndComp / trigger / IntSync until the stopping criterion holds."""
        self.reset(x0)
        assert self.state is not None and self.trace is not None
        state, trace = self.state, self.trace
        stopped_by = ""
        while not stopped_by:
            pre = state.x
            local_k = state.k
            indcomp_step(state, self.problem, self.topology, self.model, self.config)
            self._record_indcomp(pre, local_k)

            if trigger(state, self.config):
                if state.k != 1:
                    self._record(Event.ROLLBACK, state.iteration - 1, state.k, state.x)
                base = state.x_prev if state.k != 1 else state.x
                base_gaps = self.problem.gaps(base)
                intsync(state, self.topology, self.problem)
                sync = state.sync_records[-1]
                trace.records.append(
                    StepRecord(
                        iteration=state.s,
                        local_k=0,
                        event=Event.INTSYNC,
                        gaps=base_gaps,
                        mean_gap=sync.gap,
                        indcomp_messages=state.indcomp_messages,
                        intsync_messages=state.intsync_messages,
                        state_label=sync.state_label,
                    )
                )
            stopped_by = self._stop_reason()

        trace.sync_records = list(state.sync_records)
        trace.final_iteration = state.iteration
        trace.final_gaps = self.problem.gaps(state.x)
        trace.final_mean_gap = self.problem.gap(state.x.mean(axis=0))
        trace.stopped_by = stopped_by
        return trace

    def _stop_reason(self) -> str:
        assert self.state is not None
        if self.state.iteration >= self.config.max_global_iters:
            return "iterations"
        if self.config.grad_tol > 0.0:
            mean = self.state.x.mean(axis=0)
            if np.linalg.norm(self.problem.gradient(mean)) <= self.config.grad_tol:
                return "grad_tol"
        return ""

    def _record(self, event: Event, iteration: int, local_k: int, X: Matrix) -> None:
        assert self.state is not None and self.trace is not None
        self.trace.records.append(
            StepRecord(
                iteration=iteration,
                local_k=local_k,
                event=event,
                gaps=self.problem.gaps(X),
                mean_gap=self.problem.gap(X.mean(axis=0)),
                indcomp_messages=self.state.indcomp_messages,
                intsync_messages=self.state.intsync_messages,
                spread=_spread(X),
            )
        )

    def _record_indcomp(self, pre: Matrix, local_k: int) -> None:
        assert self.state is not None and self.trace is not None
        H = self.state.h
        assert H is not None
        full = self.problem.full_gradients(pre)
        sources = self.problem.component_gradients(pre)
        self.trace.records.append(
            StepRecord(
                iteration=self.state.s + local_k,
                local_k=local_k,
                event=Event.INDCOMP,
                gaps=self.problem.gaps(pre),
                mean_gap=self.problem.gap(pre.mean(axis=0)),
                indcomp_messages=self.state.indcomp_messages,
                intsync_messages=self.state.intsync_messages,
                grad_norms=np.linalg.norm(full, axis=1),
                deviations=np.linalg.norm(full - H, axis=1),
                h_norms=self.state.h_norms,
                spread=_spread(pre),
                max_source_grad=float(np.max(np.linalg.norm(sources, axis=1))),
            )
        )


def run(
    problem: Problem,
    topology: Topology,
    config: AlgoConfig,
    model: ErrorModel,
    seed: int = 0,
    trial: int = 0,
    x0: Optional[Vector] = None,
) -> RunTrace:
    """Run one configured variant from x0 (default: standard-normal point keyed by seed, trial)."""
    if x0 is None:
        x0 = initial_point(problem.n, seed, trial)
    return InexactSyncRunner(problem, topology, config, model, trial).run(x0)


def estimate_zeta(
    problem: Problem, x0: Vector, gamma: float, iters: int, margin: float = 0.1
) -> float:
    """Empirical gradient bound: max ||grad f_j|| along an exact GD pilot run, widened by margin."""
    x = np.asarray(x0, dtype=np.float64).copy()
    largest = 0.0
    for _ in range(iters + 1):
        grads = problem.component_gradients(np.tile(x, (problem.N, 1)))
        largest = max(largest, float(np.max(np.linalg.norm(grads, axis=1))))
        x = x - gamma * grads.sum(axis=0)
    return (1.0 + margin) * largest
