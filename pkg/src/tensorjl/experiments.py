"""
Experiment runners: distortion, timing, pairwise distances and verification.

Every runner takes an ``ExperimentConfig`` and writes one CSV. Trials run on
a bounded worker pool but results are reduced in (configuration, trial)
order, so identical configs produce identical CSVs except for wall times.
"""

from pathlib import Path
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator
from tensorjl.cifar import CIFAR_SHAPE
from tensorjl.cifar import load_cifar10
from tensorjl.cifar import synthetic_points
from tensorjl.config import Experiment
from tensorjl.config import Family
from tensorjl.config import InputFormat
from tensorjl.config import Regime
from tensorjl.config import settings
from tensorjl.errors import ConfigurationError
from tensorjl.errors import OracleCapError
from tensorjl.projections import parameter_count
from tensorjl.projections import project
from tensorjl.records import ResultRecord
from tensorjl.records import summarize
from tensorjl.records import write_csv
from tensorjl.sampling import derive_seed
from tensorjl.sampling import InputSpec
from tensorjl.sampling import philox_key
from tensorjl.sampling import ProjectionFamily
from tensorjl.sampling import random_input
from tensorjl.sampling import substream
from tensorjl.tensors import DenseTensor
from tensorjl.tensors import Shape
from tensorjl.utils import get_logger
from tensorjl.utils import lazypprint
from tensorjl.utils import run_trials
from tensorjl import verify
from threadpoolctl import threadpool_limits
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple
import numpy as np
import sys
import time


if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


logger = get_logger(__name__)

TIMING_THREADS = 1

REGIME_SHAPES: Dict[Regime, Tuple[int, int]] = {
    Regime.SMALL: (15, 3),
    Regime.MEDIUM: (3, 12),
    Regime.HIGH: (3, 25),
}

REGIME_BASELINES: Dict[Regime, List[Family]] = {
    Regime.SMALL: [Family.GAUSSIAN],
    Regime.MEDIUM: [Family.VERY_SPARSE],
    Regime.HIGH: [],
    Regime.CUSTOM: [],
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    experiment: Experiment = Experiment.DISTORTION
    regime: Regime = Regime.SMALL
    d: Optional[int] = Field(default=None, ge=1)
    N: Optional[int] = Field(default=None, ge=1)
    input_format: InputFormat = Field(default=InputFormat.TT, alias="input-format")
    input_rank: int = Field(default=10, ge=1, alias="input-rank")
    families: Optional[List[Family]] = None
    tt_ranks: List[int] = Field(default=[2, 5, 10], alias="tt-ranks")
    cp_ranks: List[int] = Field(default=[4, 25, 100], alias="cp-ranks")
    k_grid: List[int] = Field(default=[5, 10, 25, 50, 100, 200], alias="k-grid")
    n_grid: Optional[List[int]] = Field(default=None, alias="n-grid")
    trials: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=42, ge=0)
    out: Path = Path("results.csv")
    sparsity: Optional[float] = Field(default=None, ge=1.0)
    dataset: Optional[Path] = None
    fixed_input: bool = Field(default=False, alias="fixed-input")
    oracle_cap: int = Field(
        default_factory=lambda: settings.ORACLE_CAP, alias="oracle-cap"
    )
    max_jobs: int = Field(
        default_factory=lambda: settings.MAX_JOBS, ge=1, alias="max-jobs"
    )

    @model_validator(mode="after")
    def apply_regime(self) -> "ExperimentConfig":
        if self.regime in REGIME_SHAPES:
            d, N = REGIME_SHAPES[self.regime]
            self.d = self.d or d
            self.N = self.N or N
        elif self.experiment != Experiment.PAIRWISE and (
            self.d is None or self.N is None
        ):
            raise ValueError("custom regime needs both d and N")
        if self.trials is None:
            self.trials = 10_000 if self.experiment == Experiment.VERIFY else 100
        if self.families is None:
            self.families = [Family.TT, Family.CP] + (
                [Family.GAUSSIAN]
                if self.experiment == Experiment.PAIRWISE
                else REGIME_BASELINES[self.regime]
            )
        ranks = self.tt_ranks + self.cp_ranks
        if any(k < 1 for k in self.k_grid) or any(r < 1 for r in ranks):
            raise ValueError("k grid and ranks must be positive")
        return self

    @property
    def shape(self) -> Shape:
        if self.experiment == Experiment.PAIRWISE:
            return CIFAR_SHAPE
        assert self.d and self.N
        return Shape.uniform(self.d, self.N)

    def projection_families(self, shape: Shape, k: int) -> List[ProjectionFamily]:
        result = []
        for family in self.families or []:
            ranks = (
                self.tt_ranks
                if family == Family.TT
                else self.cp_ranks if family == Family.CP else [1]
            )
            for rank in ranks:
                result.append(
                    ProjectionFamily(
                        family=family,
                        shape=shape,
                        k=k,
                        rank=rank,
                        sparsity=self.sparsity,
                    )
                )
        return result


def load_config(path: Optional[Path] = None, **overrides: Any) -> ExperimentConfig:
    """Read a flat key=value (TOML) file, then apply non-None overrides."""
    values: Dict[str, Any] = {}
    if path is not None:
        try:
            values = tomllib.loads(Path(path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigurationError(f"Cannot read config {path}: {e}") from e
        values = {key.replace("-", "_"): value for key, value in values.items()}
    values.update({key: value for key, value in overrides.items() if value is not None})
    config = ExperimentConfig(**values)
    logger.debug("Config | %s", lazypprint(config.model_dump()))
    return config


def baseline_allowed(family: ProjectionFamily, cap: int) -> Optional[str]:
    """Reason a matrix baseline cannot run, or None when it can."""
    if family.family not in (Family.GAUSSIAN, Family.VERY_SPARSE):
        return None
    D = family.shape.size
    if D > cap:
        return f"{family.label} needs vec(x) of {D} elements (cap {cap})"
    if family.family == Family.GAUSSIAN and family.k * D > settings.DENSE_MATRIX_CAP:
        return (
            f"{family.label} needs a {family.k}x{D} matrix "
            f"(cap {settings.DENSE_MATRIX_CAP} entries)"
        )
    return None


def check_baselines(config: ExperimentConfig, shape: Shape) -> None:
    for family in config.projection_families(shape, max(config.k_grid)):
        reason = baseline_allowed(family, config.oracle_cap)
        if reason:
            raise OracleCapError(f"Baseline refused for {shape}: {reason}")


def _record(
    config: ExperimentConfig, family: ProjectionFamily, **values: Any
) -> ResultRecord:
    return ResultRecord(
        experiment=config.experiment.value,
        regime=config.regime.value,
        family=family.family.value,
        rank=family.rank if family.family in (Family.TT, Family.CP) else None,
        k=family.k,
        **values,
    )


def run_distortion(config: ExperimentConfig) -> Path:
    shape = config.shape
    check_baselines(config, shape)
    spec = InputSpec(shape=shape, format=config.input_format, rank=config.input_rank)
    trials = config.trials or 0
    # one input per trial shared by all maps; rows nest across the k grid
    input_seeds = [
        derive_seed(config.seed, 0, 0 if config.fixed_input else t)
        for t in range(trials)
    ]
    records = []
    for index, base in enumerate(config.projection_families(shape, 1)):
        for k in config.k_grid:
            family = base.with_k(k)

            def trial(t: int) -> ResultRecord:
                x = random_input(spec, input_seeds[t])
                seed = derive_seed(config.seed, 1, index, t)
                p = family.sample(seed)
                start = time.perf_counter()
                e = project(p, x, config.oracle_cap)
                elapsed = time.perf_counter() - start
                return _record(
                    config,
                    family,
                    trial=t,
                    seed=seed,
                    metric="distortion",
                    value=verify.distortion(e, x),
                    wall_time_s=elapsed,
                    threads=config.max_jobs,
                )

            rows = run_trials(trial, trials, config.max_jobs)
            logger.info(
                "Distortion | %s | k=%s | mean=%.4f",
                family.label,
                k,
                np.mean([r.value for r in rows]),
            )
            records.extend(rows)
    return write_csv(records + summarize(records), config.out)


def median_time(call: Any, repeats: int, warmups: int) -> float:
    for _ in range(warmups):
        call()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        call()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def loglog_slope(ks: List[int], times: List[float]) -> float:
    """Least-squares slope of log(time) against log(k)."""
    slope, _ = np.polyfit(np.log(ks), np.log(times), 1)
    return float(slope)


def timing_records(config: ExperimentConfig) -> List[ResultRecord]:
    assert config.d and config.N
    records = []
    for N in config.n_grid or [config.N]:
        shape = Shape.uniform(config.d, N)
        for format_index, input_format in enumerate(InputFormat):
            x = random_input(
                InputSpec(shape=shape, format=input_format, rank=config.input_rank),
                derive_seed(config.seed, 0, N, format_index),
            )
            for index, base in enumerate(config.projection_families(shape, 1)):
                ks, times = [], []
                for k in config.k_grid:
                    family = base.with_k(k)
                    reason = baseline_allowed(family, config.oracle_cap)
                    if reason:
                        logger.warning("Timing | skipped | %s", reason)
                        continue
                    seed = derive_seed(config.seed, 1, index, k)
                    p = family.sample(seed)
                    elapsed = median_time(
                        lambda: project(p, x, config.oracle_cap),
                        settings.TIMING_REPEATS,
                        settings.TIMING_WARMUPS,
                    )
                    ks.append(k)
                    times.append(elapsed)
                    suffix = f"|input={input_format.value}|N={N}"
                    records.append(
                        _record(
                            config,
                            family,
                            seed=seed,
                            threads=TIMING_THREADS,
                            metric=f"project_time_s{suffix}",
                            value=elapsed,
                            wall_time_s=elapsed,
                        )
                    )
                    records.append(
                        _record(
                            config,
                            family,
                            seed=seed,
                            threads=TIMING_THREADS,
                            metric=f"repeats{suffix}",
                            value=settings.TIMING_REPEATS,
                        )
                    )
                    records.append(
                        _record(
                            config,
                            family,
                            seed=seed,
                            threads=TIMING_THREADS,
                            metric=f"parameters{suffix}",
                            value=parameter_count(
                                family.family, shape, family.rank, k, family.sparsity
                            ),
                        )
                    )
                    logger.info(
                        "Timing | %s | input=%s | N=%s | k=%s | %.6fs",
                        family.label,
                        input_format.value,
                        N,
                        k,
                        elapsed,
                    )
                if len(ks) >= 2:
                    records.append(
                        _record(
                            config,
                            base.with_k(ks[-1]),
                            threads=TIMING_THREADS,
                            metric=f"loglog_slope|input={input_format.value}|N={N}",
                            value=loglog_slope(ks, times),
                        )
                    )
    return records


def run_timing(config: ExperimentConfig) -> Path:
    """
    Median projection times per input format, order, map and k. BLAS pools are
    limited to one thread while timing; ``project_time_s`` and ``loglog_slope``
    rows carry wall-time values.
    """
    with threadpool_limits(limits=TIMING_THREADS):
        records = timing_records(config)
    return write_csv(records, config.out)


class PairwiseStats(BaseModel):
    n: int = Field(ge=2)
    mean: float
    std: float


def pairwise_stats(embeddings: np.ndarray, points: np.ndarray) -> PairwiseStats:
    """
    Mean and standard deviation of ||f(x_i) - f(x_j)|| / ||x_i - x_j|| over
    pairs i != j; rows of ``embeddings`` and ``points`` are the n points.
    """
    n = points.shape[0]
    assert n >= 2, "pairwise distances need two points"
    i, j = np.triu_indices(n, k=1)
    ratios = np.linalg.norm(embeddings[i] - embeddings[j], axis=1) / np.linalg.norm(
        points[i] - points[j], axis=1
    )
    return PairwiseStats(n=n, mean=float(ratios.mean()), std=float(ratios.std()))


def pairwise_points(config: ExperimentConfig) -> List[DenseTensor]:
    if config.dataset is not None:
        return load_cifar10(config.dataset)
    logger.warning("Pairwise | no dataset given, using synthetic unit tensors")
    return synthetic_points(50, derive_seed(config.seed, 2))


def run_pairwise(config: ExperimentConfig) -> Path:
    points = pairwise_points(config)
    shape = CIFAR_SHAPE
    check_baselines(config, shape)
    vectors = np.stack([x.vec() for x in points])
    records = []
    for index, base in enumerate(config.projection_families(shape, 1)):
        for k in config.k_grid:
            family = base.with_k(k)

            def trial(t: int) -> List[ResultRecord]:
                seed = derive_seed(config.seed, 1, index, t)
                p = family.sample(seed)
                start = time.perf_counter()
                embeddings = np.stack(
                    [project(p, x, config.oracle_cap) for x in points]
                )
                elapsed = time.perf_counter() - start
                stats = pairwise_stats(embeddings, vectors)
                return [
                    _record(
                        config,
                        family,
                        trial=t,
                        seed=seed,
                        metric=metric,
                        value=value,
                        wall_time_s=elapsed,
                        threads=config.max_jobs,
                    )
                    for metric, value in (
                        ("pairwise_mean", stats.mean),
                        ("pairwise_std", stats.std),
                    )
                ]

            batches = run_trials(trial, config.trials or 0, config.max_jobs)
            rows = [r for batch in batches for r in batch]
            logger.info(
                "Pairwise | %s | k=%s | mean=%.4f",
                family.label,
                k,
                np.mean([r.value for r in rows if r.metric == "pairwise_mean"]),
            )
            records.extend(rows)
    return write_csv(records + summarize(records), config.out)


def verify_checks(config: ExperimentConfig) -> List[verify.CheckResult]:
    """The verification suites at the configured trial count."""
    assert config.trials
    trials = config.trials
    jobs = config.max_jobs
    d = config.d if config.regime == Regime.CUSTOM and config.d else 3
    seed = config.seed
    results = []
    for case, (N, R, k) in enumerate([(3, 2, 20), (12, 5, 50)]):
        shape = Shape.uniform(d, N)
        x = random_input(
            InputSpec(shape=shape, rank=config.input_rank), derive_seed(seed, 3, case)
        )
        for family in (Family.TT, Family.CP):
            pf = ProjectionFamily(family=family, shape=shape, k=k, rank=R)
            check_seed = derive_seed(seed, 4, case, list(Family).index(family))
            report = verify.estimate_projection_moments(pf, x, trials, check_seed, jobs)
            results.append(verify.isometry_result(pf, x, report))
            results.append(verify.variance_bound_result(pf, x, report))
    rng = substream(philox_key(derive_seed(seed, 12)), 0)
    X = DenseTensor(rng.standard_normal((6, 6)))
    results.append(
        verify.exact_order2_check(X, 3, 10, trials, derive_seed(seed, 5), jobs)
    )
    lemma_trials = max(trials, 10_000)
    B = rng.standard_normal((3, 4))
    results.append(
        verify.lemma_check(
            "isserlis",
            verify.isserlis_check(0.5, B, lemma_trials, derive_seed(seed, 6)),
            verify.isserlis_expected(0.5, B),
        )
    )
    B = rng.standard_normal((2, 3))
    results.append(
        verify.lemma_check(
            "wishart",
            verify.wishart_check(1.0, B, 4, lemma_trials, derive_seed(seed, 7)),
            verify.wishart_expected(1.0, B, 4),
        )
    )
    shape = Shape.uniform(d, 3)
    x = random_input(InputSpec(shape=shape, rank=2), derive_seed(seed, 8))
    tail_trials = max(1000, trials // 10)
    pf = ProjectionFamily(family=Family.TT, shape=shape, k=5, rank=2)
    results.append(
        verify.tail_monotonic_check(
            pf, x, [5, 10, 20, 40], 0.5, tail_trials, derive_seed(seed, 9), jobs
        )
    )
    results.append(
        verify.chebyshev_check(
            pf.with_k(40), x, 0.5, tail_trials, derive_seed(seed, 10), jobs
        )
    )
    vector = DenseTensor(rng.standard_normal(8))
    results.extend(
        verify.n1_degeneracy_check(vector, 10, trials, derive_seed(seed, 11), jobs)
    )
    return results


def run_verify(config: ExperimentConfig) -> Tuple[Path, bool]:
    results = verify_checks(config)
    records = []
    for result in results:
        logger.info(
            "Verify | %s | %s | value=%.6g target=%.6g tol=%.3g",
            result.name,
            "PASS" if result.passed else "FAIL",
            result.value,
            result.target,
            result.tolerance,
        )
        records.append(
            ResultRecord(
                experiment=config.experiment.value,
                regime=config.regime.value,
                family="check",
                seed=config.seed,
                metric=f"{result.name}|{'pass' if result.passed else 'fail'}",
                value=result.value,
                threads=config.max_jobs,
            )
        )
    return write_csv(records, config.out), all(r.passed for r in results)


def run(config: ExperimentConfig) -> Tuple[Path, bool]:
    if config.experiment == Experiment.DISTORTION:
        return run_distortion(config), True
    elif config.experiment == Experiment.TIMING:
        return run_timing(config), True
    elif config.experiment == Experiment.PAIRWISE:
        return run_pairwise(config), True
    return run_verify(config)
