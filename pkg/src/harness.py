"""Seeded Monte-Carlo experiments: paired trials, certification, aggregation and CSV output."""
from dataclasses import fields
from multiprocessing import Pool

from common import *
from algo import (
    AlgoConfig,
    Event,
    RunTrace,
    StepRecord,
    SyncRecord,
    Variant,
    estimate_zeta,
    initial_point,
    max_trigger_ratio,
    run,
)
from analysis import (
    CERTIFICATES,
    PLATEAU_FRACTION,
    CertificateReport,
    asymptotic_bounds,
    certify_trace,
    contraction_q,
    write_violations_csv,
)
from errors import ErrorMode, ErrorModel
from exceptions import CertificateError, ConfigError, InputError
from keys import subseed
from network import resolve_topology
from objective import Problem, QuadraticComponent, problem_summary, random_instance

logger = logging.getLogger(__name__)

RunKey = Tuple[str, float]

# Sync ordinal at which the reference and gd gaps are compared.
CLAIM_SYNC: int = 150


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _variant_list(text: str) -> Tuple[Variant, ...]:
    return tuple(Variant.parse(part) for part in text.split(",") if part.strip())


def _flag(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse_optional(text: str) -> Any:
        return None if text.strip().lower() in ("", "none", "auto") else parse(text)

    return parse_optional


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of an experiment; the defaults reproduce the four-peer quadratic study."""

    n: int = 10
    N: int = 4
    gamma_frac: float = 0.5
    gamma: Optional[float] = None
    r: float = 0.03
    epsilons: Tuple[float, ...] = (0.01, 0.1, 1.0, 10.0)
    algorithms: Tuple[Variant, ...] = (Variant.ALG1, Variant.IGDDS, Variant.GD)
    trials: int = 1000
    max_global_iters: int = 3000
    seed: int = 7
    topology: str = "complete"
    error_mode: ErrorMode = ErrorMode.BALL
    zeta: Optional[float] = None
    zeta_margin: float = 0.1
    rows: Optional[int] = None
    max_redraws: int = 10000
    fixed_instance: bool = False
    workers: int = 1
    on_violation: str = "warn"
    keep_traces: int = 0
    output_dir: Path = Path("results")

    def __post_init__(self) -> None:
        if self.n < 1 or self.N < 2:
            raise ConfigError(f"need n >= 1 and at least 2 nodes, got n={self.n}, nodes={self.N}")
        if self.gamma is None and not 0.0 < self.gamma_frac <= 1.0:
            raise ConfigError(f"gamma_frac={self.gamma_frac} must lie in (0, 1]")
        if self.gamma is not None and not self.gamma > 0.0:
            raise ConfigError(f"gamma={self.gamma} must be positive")
        if not 0.0 <= self.r < 1.0:
            raise ConfigError(f"r={self.r} must lie in [0, 1)")
        if not self.epsilons:
            raise ConfigError("at least one epsilon is required")
        if any(not (math.isfinite(eps) and eps >= 0.0) for eps in self.epsilons):
            raise ConfigError(f"epsilons must be finite and non-negative, got {self.epsilons}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if self.trials < 1 or self.max_global_iters < 1:
            raise ConfigError("trials and iters must be at least 1")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.zeta is not None and not self.zeta >= 0.0:
            raise ConfigError(f"zeta={self.zeta} must be non-negative")
        if self.workers < 1 or self.keep_traces < 0 or self.max_redraws < 0:
            raise ConfigError("workers must be >= 1; keep_traces and max_redraws >= 0")
        if self.on_violation not in ("warn", "fail"):
            raise ConfigError(f"on_violation must be warn or fail, got {self.on_violation!r}")

    @property
    def keys(self) -> List[RunKey]:
        return [(algo.value, eps) for algo in self.algorithms for eps in self.epsilons]

    @property
    def reference(self) -> Variant:
        """Algorithm whose plateau sets the sync targets: alg1, else alg2, else the first."""
        return next(
            (a for a in (Variant.ALG1, Variant.ALG2) if a in self.algorithms), self.algorithms[0]
        )

    def step_size(self, problem: Problem) -> float:
        return self.gamma if self.gamma is not None else self.gamma_frac / problem.L


# CLI flag / config-file key -> (field name, parser)
OPTIONS: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    "n": ("n", int),
    "nodes": ("N", int),
    "gamma_frac": ("gamma_frac", float),
    "gamma": ("gamma", _optional(float)),
    "r": ("r", float),
    "eps": ("epsilons", _float_list),
    "algos": ("algorithms", _variant_list),
    "trials": ("trials", int),
    "iters": ("max_global_iters", int),
    "seed": ("seed", int),
    "topology": ("topology", str),
    "error_mode": ("error_mode", ErrorMode.parse),
    "zeta": ("zeta", _optional(float)),
    "zeta_margin": ("zeta_margin", float),
    "rows": ("rows", _optional(int)),
    "max_redraws": ("max_redraws", int),
    "fixed_instance": ("fixed_instance", _flag),
    "workers": ("workers", int),
    "on_violation": ("on_violation", str),
    "keep_traces": ("keep_traces", int),
    "out": ("output_dir", Path),
}


def read_config_file(path: Path) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def build_config(
    values: Mapping[str, Optional[str]], base: Optional[ExperimentConfig] = None
) -> ExperimentConfig:
    """Apply string-valued options onto ``base``; ``None`` values are ignored."""
    updates: Dict[str, Any] = {}
    for raw_key, text in values.items():
        key = raw_key.strip().replace("-", "_")
        if key not in OPTIONS:
            raise ConfigError(f"unknown option {raw_key!r}")
        if text is None:
            continue
        name, parse = OPTIONS[key]
        try:
            updates[name] = parse(text)
        except ValueError as exc:
            raise ConfigError(f"invalid value for {raw_key}: {exc}") from exc
    return replace(base or ExperimentConfig(), **updates)


def load_config(
    path: Path, overrides: Optional[Mapping[str, Optional[str]]] = None
) -> ExperimentConfig:
    """Config file first, then ``overrides`` (the CLI flags) on top."""
    config = build_config(read_config_file(path))
    return build_config(overrides or {}, config)


def draw_instance(config: ExperimentConfig, trial: int) -> Tuple[Problem, int]:
    """Problem for ``trial`` and the number of redraws it took.

    When alg1 or alg2 is requested, instances with r >= r_max are redrawn
    under the next sub-key.
    """
    word = 0 if config.fixed_instance else trial
    needs_margin = any(a in (Variant.ALG1, Variant.ALG2) for a in config.algorithms)
    for attempt in range(config.max_redraws + 1):
        problem = random_instance(config.n, config.N, subseed(config.seed, word, attempt), config.rows)
        if not needs_margin or config.r < max_trigger_ratio(problem.L, problem.ell):
            return problem, attempt
    raise ConfigError(
        f"no instance with r_max > r={config.r} after {config.max_redraws} redraws; "
        "lower r or pass rows > n"
    )


def algo_setup(
    config: ExperimentConfig,
    variant: Variant,
    epsilon: float,
    problem: Problem,
    gamma: float,
    zeta: Optional[float],
) -> Tuple[AlgoConfig, ErrorModel]:
    """AlgoConfig and error model for one (algorithm, eps) cell of the grid."""
    if variant is Variant.GD:
        return (
            AlgoConfig(gamma=gamma, variant=variant, max_global_iters=config.max_global_iters),
            ErrorModel(ErrorMode.NONE, 0.0, config.seed),
        )
    if variant is Variant.IGDDS:
        return (
            AlgoConfig(
                gamma=gamma,
                r=0.0,
                epsilon=epsilon,
                variant=variant,
                max_global_iters=config.max_global_iters,
            ),
            ErrorModel(ErrorMode.SHARED, epsilon, config.seed),
        )
    return (
        AlgoConfig(
            gamma=gamma,
            r=config.r,
            epsilon=epsilon,
            zeta=zeta if variant is Variant.ALG2 else None,
            variant=variant,
            max_global_iters=config.max_global_iters,
        ),
        ErrorModel(config.error_mode, epsilon, config.seed),
    )


def plateau(series: Vector) -> float:
    """Mean gap over the trailing window of a series."""
    window = max(1, int(math.ceil(PLATEAU_FRACTION * len(series))))
    return float(np.mean(series[-window:]))


def syncs_to_target(sync_gaps: Vector, target: float) -> int:
    """1-based ordinal of the first sync whose gap is <= target, or -1."""
    hits = np.flatnonzero(sync_gaps <= target)
    return int(hits[0]) + 1 if hits.size else -1


@dataclass
class TrialResult:
    """Everything the aggregation needs from one trial."""

    trial: int
    redraws: int
    series: Dict[RunKey, Vector] = field(default_factory=dict)
    sync_gaps: Dict[RunKey, Vector] = field(default_factory=dict)
    messages: Dict[RunKey, Tuple[int, int, int]] = field(default_factory=dict)
    reports: Dict[RunKey, CertificateReport] = field(default_factory=dict)
    targets: List[Tuple[str, float, int, float, int]] = field(default_factory=list)
    bundles: List[Tuple[RunKey, Dict[str, Any]]] = field(default_factory=list)


def run_trial(config: ExperimentConfig, trial: int) -> TrialResult:
    """Run every (algorithm, eps) on the same instance and initial point."""
    problem, redraws = draw_instance(config, trial)
    topology = resolve_topology(config.topology, config.N)
    gamma = config.step_size(problem)
    x0 = initial_point(problem.n, config.seed, trial)
    zeta = config.zeta
    if Variant.ALG2 in config.algorithms and zeta is None:
        zeta = estimate_zeta(problem, x0, gamma, config.max_global_iters, config.zeta_margin)

    result = TrialResult(trial=trial, redraws=redraws)
    gd_trace: Optional[RunTrace] = None
    length = config.max_global_iters + 1
    for algo in config.algorithms:
        for eps in config.epsilons:
            key = (algo.value, eps)
            algo_config, model = algo_setup(config, algo, eps, problem, gamma, zeta)
            if algo is Variant.GD and gd_trace is not None:
                trace = gd_trace
            else:
                trace = run(problem, topology, algo_config, model, config.seed, trial, x0)
                if algo is Variant.GD:
                    gd_trace = trace
            result.series[key] = trace.gap_series(length)
            result.sync_gaps[key] = trace.sync_gaps()
            indcomp, intsync_msgs = trace.messages
            result.messages[key] = (indcomp, intsync_msgs, trace.intsync_count)
            result.reports[key] = certify_trace(trace, problem, algo_config)
            if trial < config.keep_traces:
                result.bundles.append((key, trace_bundle(problem, algo_config, model, trace)))

    reference = config.reference
    for eps in config.epsilons:
        target = 2.0 * plateau(result.series[(reference.value, eps)])
        for algo in config.algorithms:
            hits = syncs_to_target(result.sync_gaps[(algo.value, eps)], target)
            result.targets.append((algo.value, eps, trial, target, hits))
    return result


def _trial_worker(args: Tuple[ExperimentConfig, int]) -> TrialResult:
    return run_trial(*args)


@dataclass
class SeriesStats:
    mean: Vector
    std: Vector
    trials: int


@dataclass
class SyncStats:
    mean: Vector
    counts: NDArray[np.int64]


@dataclass
class ClaimSummary:
    """How the reference algorithm compares with igdds and gd at one eps.

    Fractions are over trials; a run that never reaches the target counts as
    slower than any run that does. Entries whose baseline was not run are nan.
    """

    eps: float
    reference: str
    trials: int
    wins_vs_igdds: float
    plateau_rel_diff: float
    gd_slower: float
    ref_gap_at_sync: float
    gd_gap_at_sync: float

    def describe(self) -> str:
        return (
            f"eps={self.eps:<8g} {self.reference} fewer syncs than igdds in "
            f"{self.wins_vs_igdds:.0%}, plateau diff {self.plateau_rel_diff:.1%}, "
            f"gd slower in {self.gd_slower:.0%}, gap at m={CLAIM_SYNC}: "
            f"{self.reference}={self.ref_gap_at_sync:.4g} gd={self.gd_gap_at_sync:.4g}"
        )


def _strictly_fewer(ours: int, theirs: int) -> bool:
    return ours > 0 and (theirs == -1 or ours < theirs)


def _gap_at_sync(stats: Optional[SyncStats], m: int) -> float:
    if stats is None or stats.mean.size < m:
        return math.nan
    return float(stats.mean[m - 1])


def summarize_claims(
    config: ExperimentConfig,
    targets: Sequence[Tuple[str, float, int, float, int]],
    plateaus: Mapping[RunKey, float],
    syncs: Mapping[RunKey, SyncStats],
) -> Dict[float, ClaimSummary]:
    """Per-eps sync savings and plateau agreement of the reference algorithm."""
    reference = config.reference.value
    hits: Dict[Tuple[str, float, int], int] = {(a, e, t): h for a, e, t, _, h in targets}
    trials = sorted({t for _, _, t, _, _ in targets})
    summaries: Dict[float, ClaimSummary] = {}
    for eps in config.epsilons:

        def fraction(baseline: str) -> float:
            if (baseline, eps) not in plateaus or not trials:
                return math.nan
            wins = sum(
                _strictly_fewer(hits[(reference, eps, t)], hits[(baseline, eps, t)]) for t in trials
            )
            return wins / len(trials)

        igdds = plateaus.get((Variant.IGDDS.value, eps))
        ours = plateaus[(reference, eps)]
        rel_diff = abs(ours - igdds) / igdds if igdds else math.nan
        summaries[eps] = ClaimSummary(
            eps=eps,
            reference=reference,
            trials=len(trials),
            wins_vs_igdds=fraction(Variant.IGDDS.value),
            plateau_rel_diff=rel_diff,
            gd_slower=fraction(Variant.GD.value),
            ref_gap_at_sync=_gap_at_sync(syncs.get((reference, eps)), CLAIM_SYNC),
            gd_gap_at_sync=_gap_at_sync(syncs.get((Variant.GD.value, eps)), CLAIM_SYNC),
        )
    return summaries


@dataclass
class AggregateResult:
    """Trial-ordered reduction of every (algorithm, eps) cell."""

    config: ExperimentConfig
    convergence: Dict[RunKey, SeriesStats]
    syncs: Dict[RunKey, SyncStats]
    communication: Dict[RunKey, Tuple[float, float, float]]
    plateaus: Dict[RunKey, float]
    plateau_exceeded: Dict[RunKey, int]
    targets: List[Tuple[str, float, int, float, int]]
    checked: Dict[str, int]
    failed_reports: List[CertificateReport]
    redraws: int
    bundles: List[Tuple[int, RunKey, Dict[str, Any]]]
    claims: Dict[float, ClaimSummary] = field(default_factory=dict)

    @property
    def violation_count(self) -> int:
        return sum(len(report.violations) for report in self.failed_reports)


class _Aggregator:
    """Welford moments per iteration; plain sums for everything else."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        length = config.max_global_iters + 1
        self.count = 0
        self.mean = {key: np.zeros(length) for key in config.keys}
        self.m2 = {key: np.zeros(length) for key in config.keys}
        self.sync_sum: Dict[RunKey, Vector] = {key: np.zeros(0) for key in config.keys}
        self.sync_count: Dict[RunKey, NDArray[np.int64]] = {
            key: np.zeros(0, dtype=np.int64) for key in config.keys
        }
        self.message_sum = {key: np.zeros(3) for key in config.keys}
        self.plateau_sum = {key: 0.0 for key in config.keys}
        self.plateau_exceeded = {key: 0 for key in config.keys}
        self.checked = {name: 0 for name in CERTIFICATES}
        self.failed: List[CertificateReport] = []
        self.targets: List[Tuple[str, float, int, float, int]] = []
        self.redraws = 0
        self.bundles: List[Tuple[int, RunKey, Dict[str, Any]]] = []

    def add(self, result: TrialResult) -> None:
        self.count += 1
        self.redraws += result.redraws
        for key in self.config.keys:
            series = result.series[key]
            delta = series - self.mean[key]
            self.mean[key] += delta / self.count
            self.m2[key] += delta * (series - self.mean[key])

            gaps = result.sync_gaps[key]
            if gaps.size > self.sync_sum[key].size:
                grow = gaps.size - self.sync_sum[key].size
                self.sync_sum[key] = np.concatenate([self.sync_sum[key], np.zeros(grow)])
                self.sync_count[key] = np.concatenate(
                    [self.sync_count[key], np.zeros(grow, dtype=np.int64)]
                )
            self.sync_sum[key][: gaps.size] += gaps
            self.sync_count[key][: gaps.size] += 1

            self.message_sum[key] += np.array(result.messages[key], dtype=np.float64)
            self.plateau_sum[key] += plateau(series)

            report = result.reports[key]
            for name in CERTIFICATES:
                self.checked[name] += report.checked[name]
            if not report.plateau_within_bound:
                self.plateau_exceeded[key] += 1
            if not report.passed:
                self.failed.append(report)
                logger.warning(
                    "trial %d %s eps=%g: %d certificate violation(s)",
                    result.trial,
                    key[0],
                    key[1],
                    len(report.violations),
                )
        self.targets.extend(result.targets)
        self.bundles.extend((result.trial, key, bundle) for key, bundle in result.bundles)

        step = max(1, self.config.trials // 10)
        if self.count % step == 0 or self.count == self.config.trials:
            logger.info("completed %d/%d trials", self.count, self.config.trials)

    def finish(self) -> AggregateResult:
        n = self.count
        convergence = {
            key: SeriesStats(
                mean=self.mean[key].copy(),
                std=np.sqrt(self.m2[key] / (n - 1)) if n > 1 else np.zeros_like(self.m2[key]),
                trials=n,
            )
            for key in self.config.keys
        }
        syncs = {
            key: SyncStats(mean=self.sync_sum[key] / self.sync_count[key], counts=self.sync_count[key])
            for key in self.config.keys
        }
        communication = {
            key: (float(v[0] / n), float(v[1] / n), float(v[2] / n))
            for key, v in self.message_sum.items()
        }
        plateaus = {key: total / n for key, total in self.plateau_sum.items()}
        return AggregateResult(
            config=self.config,
            convergence=convergence,
            syncs=syncs,
            communication=communication,
            plateaus=plateaus,
            plateau_exceeded=dict(self.plateau_exceeded),
            targets=self.targets,
            checked=self.checked,
            failed_reports=self.failed,
            redraws=self.redraws,
            bundles=self.bundles,
            claims=summarize_claims(self.config, self.targets, plateaus, syncs),
        )


def run_experiment(config: ExperimentConfig) -> AggregateResult:
    """Run all trials (optionally on a process pool) and reduce them in trial order.

    Raises CertificateError after the reduction when violations were found and
    ``on_violation`` is ``fail``.
    """
    logger.info(
        "experiment: %d trial(s), algos=%s, eps=%s, iters=%d, seed=%d",
        config.trials,
        ",".join(a.value for a in config.algorithms),
        ",".join(format(e, "g") for e in config.epsilons),
        config.max_global_iters,
        config.seed,
    )
    aggregator = _Aggregator(config)
    if config.workers > 1:
        with Pool(config.workers) as pool:
            jobs = ((config, trial) for trial in range(config.trials))
            for result in pool.imap(_trial_worker, jobs):
                aggregator.add(result)
    else:
        for trial in range(config.trials):
            aggregator.add(run_trial(config, trial))

    aggregate = aggregator.finish()
    logger.info(
        "experiment finished: %d violation(s), %d instance redraw(s)",
        aggregate.violation_count,
        aggregate.redraws,
    )
    if aggregate.failed_reports and config.on_violation == "fail":
        raise CertificateError(aggregate.failed_reports)
    return aggregate


def _g(value: float) -> str:
    return format(float(value), ".17g")


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_results(result: AggregateResult, out_dir: Path) -> List[Path]:
    """Write the convergence, sync, target, communication, claim and violation CSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keys = result.config.keys

    def convergence_rows() -> Iterator[List[Any]]:
        for algo, eps in keys:
            stats = result.convergence[(algo, eps)]
            for it, (mean, std) in enumerate(zip(stats.mean, stats.std)):
                yield [algo, _g(eps), it, _g(mean), _g(std), stats.trials]

    def sync_rows() -> Iterator[List[Any]]:
        for algo, eps in keys:
            stats = result.syncs[(algo, eps)]
            for m, (mean, count) in enumerate(zip(stats.mean, stats.counts), 1):
                yield [algo, _g(eps), m, _g(mean), int(count)]

    paths = [
        _write_rows(
            out_dir / "convergence.csv",
            ["algo", "eps", "iter", "mean_gap", "std_gap", "trials"],
            convergence_rows(),
        ),
        _write_rows(
            out_dir / "syncs.csv",
            ["algo", "eps", "m", "mean_gap_at_sync", "trials_contributing"],
            sync_rows(),
        ),
        _write_rows(
            out_dir / "targets.csv",
            ["algo", "eps", "trial", "target_gap", "syncs_to_target"],
            ([a, _g(e), t, _g(g), hits] for a, e, t, g, hits in result.targets),
        ),
        _write_rows(
            out_dir / "communication.csv",
            ["algo", "eps", "indcomp_messages", "intsync_messages", "syncs"],
            ([a, _g(e), *map(_g, result.communication[(a, e)])] for a, e in keys),
        ),
        _write_rows(
            out_dir / "claims.csv",
            [
                "eps",
                "reference",
                "trials",
                "wins_vs_igdds",
                "plateau_rel_diff",
                "gd_slower",
                "m",
                "ref_gap_at_m",
                "gd_gap_at_m",
            ],
            (
                [
                    _g(c.eps),
                    c.reference,
                    c.trials,
                    _g(c.wins_vs_igdds),
                    _g(c.plateau_rel_diff),
                    _g(c.gd_slower),
                    CLAIM_SYNC,
                    _g(c.ref_gap_at_sync),
                    _g(c.gd_gap_at_sync),
                ]
                for c in result.claims.values()
            ),
        ),
    ]
    violations = out_dir / "violations.csv"
    write_violations_csv(result.failed_reports, violations)
    paths.append(violations)

    for trial, (algo, eps), bundle in result.bundles:
        path = out_dir / f"trace_{algo}_eps{eps:g}_trial{trial}.json"
        path.write_text(json.dumps(bundle), encoding="utf-8")
        paths.append(path)
    return paths


def instance_diagnostics(
    L: float,
    ell: float,
    gamma: float,
    r: float,
    epsilons: Sequence[float],
    N: int,
    zeta: Optional[float] = None,
) -> str:
    """Constants and bounds of one instance, with the gamma*L*r_bar^2 << 1 - gamma*ell check."""
    factors = contraction_q(gamma, L, ell, r)
    penalty = gamma * L * factors.r_bar**2
    base = 1.0 - gamma * ell
    ratio = penalty / base if base > 0.0 else math.inf
    lines = [
        f"L              = {L:.10g}",
        f"ell            = {ell:.10g}",
        f"gamma          = {gamma:.10g}",
        f"r              = {r:.10g}",
        f"r_max          = {factors.r_max:.10g}",
        f"r_bar          = {factors.r_bar:.10g}",
        f"q              = {factors.q:.10g}",
        f"gamma*L*r_bar^2 = {penalty:.10g}",
        f"1-gamma*ell    = {base:.10g}",
        f"ratio          = {ratio:.10g} ({'<' if ratio < 0.01 else '>='} 0.01: "
        f"{'holds' if ratio < 0.01 else 'does not hold'})",
    ]
    if r >= factors.r_max:
        lines.append("r >= r_max: bounds undefined for this instance")
        return "\n".join(lines)
    for eps in epsilons:
        bounds = asymptotic_bounds(eps, zeta, N, L, ell, r, gamma)
        lines.append(
            f"eps={eps:g}: gap_bound={bounds.gap_bound:.10g} grad_bound={bounds.grad_bound:.10g} "
            f"dist_bound={bounds.dist_bound:.10g} igdds_gap_bound={bounds.igdds_gap_bound:.10g}"
            + (f" tau={bounds.tau:.10g}" if zeta is not None else "")
        )
    return "\n".join(lines)


def sanity_report(config: ExperimentConfig) -> str:
    """Diagnostics of the trial-0 instance under ``config``."""
    problem, redraws = draw_instance(config, 0)
    gamma = config.step_size(problem)
    header = f"instance: n={problem.n} N={problem.N} seed={config.seed} redraws={redraws}"
    zeta = config.zeta if Variant.ALG2 in config.algorithms else None
    body = instance_diagnostics(
        problem.L, problem.ell, gamma, config.r, config.epsilons, problem.N, zeta
    )
    return header + "\n" + body


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    return value


def trace_bundle(
    problem: Problem, config: AlgoConfig, model: ErrorModel, trace: RunTrace
) -> Dict[str, Any]:
    """JSON-ready snapshot of everything ``certify_trace`` needs."""
    return {
        "problem": {
            "A": [comp.A.tolist() for comp in problem.components],
            "c": [comp.c.tolist() for comp in problem.components],
        },
        "config": {f.name: _jsonable(getattr(config, f.name)) for f in fields(config)},
        "model": {f.name: _jsonable(getattr(model, f.name)) for f in fields(model)},
        "trace": {
            "variant": trace.variant.value,
            "trial": trace.trial,
            "N": trace.N,
            "final_iteration": trace.final_iteration,
            "final_mean_gap": trace.final_mean_gap,
            "final_gaps": _jsonable(trace.final_gaps),
            "stopped_by": trace.stopped_by,
            "records": [
                {f.name: _jsonable(getattr(rec, f.name)) for f in fields(rec)}
                for rec in trace.records
            ],
            "sync_records": [
                {f.name: getattr(rec, f.name) for f in fields(rec)} for rec in trace.sync_records
            ],
        },
    }


def _array(value: Optional[List[float]]) -> Optional[Vector]:
    return None if value is None else np.array(value, dtype=np.float64)


def load_trace_bundle(path: Path) -> Tuple[Problem, AlgoConfig, RunTrace]:
    """Read a bundle written by :func:`write_results`."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        problem = problem_summary(
            [
                QuadraticComponent.from_matrix(np.array(A), np.array(c))
                for A, c in zip(data["problem"]["A"], data["problem"]["c"])
            ]
        )
        cfg = dict(data["config"])
        cfg["variant"] = Variant.parse(cfg["variant"])
        config = AlgoConfig(**cfg)
        raw = data["trace"]
        records = []
        for rec in raw["records"]:
            rec = dict(rec)
            rec["event"] = Event(rec["event"])
            for name in ("gaps", "grad_norms", "deviations", "h_norms"):
                rec[name] = _array(rec[name])
            records.append(StepRecord(**rec))
        trace = RunTrace(
            variant=Variant.parse(raw["variant"]),
            trial=raw["trial"],
            N=raw["N"],
            records=records,
            sync_records=[SyncRecord(**rec) for rec in raw["sync_records"]],
            final_iteration=raw["final_iteration"],
            final_mean_gap=raw["final_mean_gap"],
            final_gaps=_array(raw["final_gaps"]),
            stopped_by=raw["stopped_by"],
        )
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read trace bundle {path}: {exc}") from exc
    return problem, config, trace
