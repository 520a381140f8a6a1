"""Closed-form constants and bounds, and certification of run traces.

All inequalities below hold exactly in real arithmetic. Checks allow a
relative slack of 1e-9 plus an absolute floor of 1e-14, so a violation means
the inequality failed by more than floating-point accumulation explains.
"""
from common import *
from algo import (
    AlgoConfig,
    Event,
    RunTrace,
    StepRecord,
    Variant,
    continue_threshold,
    max_trigger_ratio,
)
from exceptions import InputError
from objective import Problem

logger = logging.getLogger(__name__)

REL_TOL: float = 1e-9
ABS_FLOOR: float = 1e-14
GRAD_SKIP: float = 1e-14
PLATEAU_FRACTION: float = 0.1

CERTIFICATES: Tuple[str, ...] = (
    "drift",
    "trigger",
    "contraction",
    "single_step",
    "exit",
    "spread",
    "gradient_bound",
)


@dataclass(frozen=True)
class Contraction:
    q: float
    r_bar: float
    r_max: float

    @property
    def contracting(self) -> bool:
        return 0.0 < self.q < 1.0


def contraction_q(gamma: float, L: float, ell: float, r: float) -> Contraction:
    """q = 1 + gamma*L*r_bar^2 - gamma*ell with r_bar = r / (1 - r)."""
    if not 0.0 < gamma <= 1.0 / L:
        raise InputError(f"gamma={gamma} must lie in (0, 1/L] = (0, {1.0 / L}]")
    if not 0.0 <= r < 1.0:
        raise InputError(f"r={r} must lie in [0, 1)")
    r_bar = r / (1.0 - r)
    q = 1.0 + gamma * L * r_bar**2 - gamma * ell
    return Contraction(q=q, r_bar=r_bar, r_max=max_trigger_ratio(L, ell))


@dataclass(frozen=True)
class BoundSet:
    """Asymptotic bounds on the gap, gradient norm and distance to the optimum."""

    q: float
    r_bar: float
    r_max: float
    gap_bound: float
    grad_bound: float
    dist_bound: float
    igdds_gap_bound: float
    tau: float

    def describe(self) -> str:
        lines = [f"{name:>16} = {getattr(self, name):.10g}" for name in self.__dataclass_fields__]
        return "\n".join(lines)


def asymptotic_bounds(
    epsilon: float,
    zeta: Optional[float],
    N: int,
    L: float,
    ell: float,
    r: float,
    gamma: Optional[float] = None,
) -> BoundSet:
    """Limsup bounds with b = eps, or b = tau = max(eps, zeta) when zeta is given."""
    if not 0.0 <= r < 1.0:
        raise InputError(f"r={r} must lie in [0, 1)")
    r_bar = r / (1.0 - r)
    margin = ell - L * r_bar**2
    if margin <= 0.0:
        raise InputError(f"precondition ell > L*r_bar^2 violated ({ell} <= {L * r_bar**2})")
    b = epsilon if zeta is None else max(epsilon, zeta)
    q = math.nan if gamma is None else contraction_q(gamma, L, ell, r).q
    return BoundSet(
        q=q,
        r_bar=r_bar,
        r_max=max_trigger_ratio(L, ell),
        gap_bound=b**2 * N**2 / (2.0 * margin),
        grad_bound=math.sqrt(L * b**2 * N**2 / margin),
        dist_bound=math.sqrt(L * b**2 * N**2 / (ell**2 - L * r_bar**2 * ell)),
        igdds_gap_bound=epsilon**2 * N**2 / (2.0 * ell),
        tau=b,
    )


def bounds_for(problem: Problem, config: AlgoConfig) -> BoundSet:
    zeta = config.zeta if config.variant is Variant.ALG2 else None
    return asymptotic_bounds(
        config.epsilon, zeta, problem.N, problem.L, problem.ell, config.r, config.gamma
    )


def drift_bound(epsilon: float, N: int, k: int) -> float:
    """Worst-case ||grad f(x_i) - h_i|| after k steps since the last synchrony: 2*eps*N*(k + 1/2)."""
    return 2.0 * epsilon * N * (k + 0.5)


def spread_bound(epsilon: float, N: int, gamma: float, k: int) -> float:
    """Worst-case distance between two copies after k steps: 2*eps*N*gamma*k."""
    return 2.0 * epsilon * N * gamma * k


def exit_bound(
    q: float, L: float, ell: float, grad0_norm: float, epsilon: float, N: int, r_bar: float
) -> float:
    """Smallest t with (L/ell) * q^t * ||grad f(x0)||^2 < (eps*N/r_bar)^2.

    Bounds the number of kept steps in a run of consecutive multi-step inner
    loops starting from x0. Returns inf when no such t exists.
    """
    if r_bar == 0.0:
        return 0.0
    target = (epsilon * N / r_bar) ** 2
    start = (L / ell) * grad0_norm**2
    if start < target:
        return 0.0
    if target == 0.0 or not 0.0 < q < 1.0:
        return math.inf
    t = max(0, math.ceil(math.log(target / start) / math.log(q)))
    while t > 0 and start * q ** (t - 1) < target:
        t -= 1
    while start * q**t >= target:
        t += 1
    return float(t)


@dataclass(frozen=True)
class Violation:
    certificate: str
    trial: int
    iteration: int
    node: int
    measured: float
    bound: float


@dataclass
class CertificateReport:
    """Per-certificate check counts, skips, violations and the plateau statistic."""

    trial: int
    variant: Variant
    checked: Dict[str, int] = field(default_factory=lambda: {name: 0 for name in CERTIFICATES})
    skipped: Dict[str, int] = field(default_factory=lambda: {name: 0 for name in CERTIFICATES})
    state_steps: Dict[int, int] = field(default_factory=lambda: {1: 0, 2: 0})
    violations: List[Violation] = field(default_factory=list)
    plateau_max: float = math.nan
    plateau_bound: float = math.nan

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def plateau_within_bound(self) -> bool:
        return self.plateau_max <= self.plateau_bound * (1.0 + REL_TOL) + ABS_FLOOR

    def count(self, certificate: str) -> int:
        return sum(1 for v in self.violations if v.certificate == certificate)

    def summary(self) -> str:
        lines = [f"trial {self.trial} ({self.variant.value}): {'PASS' if self.passed else 'FAIL'}"]
        for name in CERTIFICATES:
            lines.append(
                f"  {name:<15} checked={self.checked[name]:<8} "
                f"skipped={self.skipped[name]:<6} violations={self.count(name)}"
            )
        lines.append(f"  state-1 steps={self.state_steps[1]} state-2 syncs={self.state_steps[2]}")
        status = "within" if self.plateau_within_bound else "ABOVE"
        lines.append(
            f"  plateau max={self.plateau_max:.6g} bound={self.plateau_bound:.6g} ({status} bound)"
        )
        return "\n".join(lines)


def _exceeds(measured: float, bound: float, scale: float = 0.0) -> bool:
    return measured > bound + REL_TOL * max(abs(bound), scale) + ABS_FLOOR


class _Certifier:
    """Walks a trace loop by loop and applies every inequality."""

    def __init__(self, trace: RunTrace, problem: Problem, config: AlgoConfig):
        self.trace = trace
        self.problem = problem
        self.config = config
        self.bound = config.bound
        self.N = problem.N
        self.factors = contraction_q(config.gamma, problem.L, problem.ell, config.r)
        self.report = CertificateReport(trial=trace.trial, variant=trace.variant)

    def _flag(self, name: str, iteration: int, node: int, measured: float, bound: float) -> None:
        self.report.violations.append(
            Violation(name, self.trace.trial, iteration, node, measured, bound)
        )

    def run(self) -> CertificateReport:
        loop: List[StepRecord] = []
        stretch_start: Optional[StepRecord] = None
        stretch_steps = 0
        for rec in self.trace.records:
            if rec.event is Event.INDCOMP:
                if rec.deviations is None or rec.grad_norms is None or rec.h_norms is None:
                    raise InputError(f"record at iteration {rec.iteration} lacks measurements")
                self._check_step(rec)
                loop.append(rec)
            elif rec.event is Event.INTSYNC:
                if rec.state_label == 1:
                    self._check_state_one(loop, [r.gaps for r in loop[1:]])
                    if stretch_start is None:
                        stretch_start = loop[0]
                    stretch_steps += len(loop) - 1
                else:
                    self._check_exit(stretch_start, stretch_steps)
                    stretch_start, stretch_steps = None, 0
                    self._check_state_two(loop, rec)
                loop = []
        if loop:
            # unfinished inner loop: every step passed its trigger check
            tail = [r.gaps for r in loop[1:]]
            if self.trace.final_gaps is not None:
                tail.append(self.trace.final_gaps)
            self._check_state_one(loop, tail)
        self._check_exit(stretch_start, stretch_steps)
        self._plateau()
        return self.report

    def _check_step(self, rec: StepRecord) -> None:
        assert rec.deviations is not None and rec.grad_norms is not None and rec.h_norms is not None
        report = self.report
        k = rec.local_k
        drift = drift_bound(self.bound, self.N, k)
        thresholds = continue_threshold(self.config.r, self.bound, self.N, rec.h_norms)
        for i in range(self.N):
            dev, grad, h = float(rec.deviations[i]), float(rec.grad_norms[i]), float(rec.h_norms[i])
            report.checked["drift"] += 1
            if _exceeds(dev, drift, scale=max(grad, h)):
                self._flag("drift", rec.iteration, i, dev, drift)
            if k <= thresholds[i]:
                if grad < GRAD_SKIP:
                    report.skipped["trigger"] += 1
                else:
                    report.checked["trigger"] += 1
                    ratio = dev / grad
                    if _exceeds(ratio, self.factors.r_bar, scale=1.0):
                        self._flag("trigger", rec.iteration, i, ratio, self.factors.r_bar)

        report.checked["spread"] += 1
        spread = spread_bound(self.bound, self.N, self.config.gamma, k)
        if _exceeds(rec.spread, spread):
            self._flag("spread", rec.iteration, -1, rec.spread, spread)

        if self.config.variant is Variant.ALG2 and self.config.zeta is not None:
            report.checked["gradient_bound"] += 1
            if _exceeds(rec.max_source_grad, self.config.zeta):
                self._flag("gradient_bound", rec.iteration, -1, rec.max_source_grad, self.config.zeta)

    def _check_state_one(self, loop: List[StepRecord], after: Sequence[Vector]) -> None:
        q = self.factors.q
        for rec, next_gaps in zip(loop, after):
            self.report.state_steps[1] += 1
            for i in range(self.N):
                self.report.checked["contraction"] += 1
                bound = q * float(rec.gaps[i])
                if _exceeds(float(next_gaps[i]), bound):
                    self._flag("contraction", rec.iteration + 1, i, float(next_gaps[i]), bound)

    def _check_state_two(self, loop: List[StepRecord], sync: StepRecord) -> None:
        self.report.state_steps[2] += 1
        start = loop[0]
        gamma, ell = self.config.gamma, self.problem.ell
        offset = gamma * self.bound**2 * self.N**2 / 2.0
        for i in range(self.N):
            self.report.checked["single_step"] += 1
            bound = (1.0 - gamma * ell) * float(start.gaps[i]) + offset
            if _exceeds(float(sync.gaps[i]), bound):
                self._flag("single_step", start.iteration + 1, i, float(sync.gaps[i]), bound)
        self.report.checked["single_step"] += 1
        bound = (1.0 - gamma * ell) * start.mean_gap + offset
        if _exceeds(sync.mean_gap, bound):
            self._flag("single_step", sync.iteration, -1, sync.mean_gap, bound)

    def _check_exit(self, start: Optional[StepRecord], steps: int) -> None:
        if start is None:
            return
        assert start.grad_norms is not None
        self.report.checked["exit"] += 1
        limit = exit_bound(
            self.factors.q,
            self.problem.L,
            self.problem.ell,
            float(np.max(start.grad_norms)),
            self.bound,
            self.N,
            self.factors.r_bar,
        )
        if steps > limit:
            self._flag("exit", start.iteration, -1, float(steps), limit)

    def _plateau(self) -> None:
        series = self.trace.gap_series()
        window = max(1, int(math.ceil(PLATEAU_FRACTION * len(series))))
        self.report.plateau_max = float(np.max(series[-window:]))
        self.report.plateau_bound = bounds_for(self.problem, self.config).gap_bound


def certify_trace(trace: RunTrace, problem: Problem, config: AlgoConfig) -> CertificateReport:
    """Check every recorded step against the drift, trigger, contraction and exit inequalities."""
    if not trace.records:
        raise InputError("trace has no records")
    report = _Certifier(trace, problem, config).run()
    if not report.passed:
        logger.debug("trial %d: %d violation(s)", trace.trial, len(report.violations))
    return report


def write_violations_csv(reports: Iterable[CertificateReport], path: Path) -> int:
    """Write every violation as one CSV row; returns the row count."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["certificate", "trial", "iter", "node", "measured", "bound"])
        for report in reports:
            for v in report.violations:
                writer.writerow(
                    [
                        v.certificate,
                        v.trial,
                        v.iteration,
                        v.node,
                        format(v.measured, ".17g"),
                        format(v.bound, ".17g"),
                    ]
                )
                rows += 1
    return rows
