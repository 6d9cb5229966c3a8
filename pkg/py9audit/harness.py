from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from math import inf, sqrt
from typing import IO, Any, Optional, Sequence

import numpy as np

from py9audit.config import AuditConfig
from py9audit.core import (
    ConfigError,
    InvalidArgument,
    PY9Mechanism,
    med_mad,
    resolve_workers,
    run_pool,
)
from py9audit.default_mechanisms import DSA, mechanism_catalog
from py9audit.loss import LossProfile, dpl, dpl_profile
from py9audit.mpl import AuditReport, mpl
from py9audit.patterns import AdjacentPair
from py9audit.statcore import Rng

logger = logging.getLogger(__name__)


def _expect_mode(cfg: AuditConfig, *modes: str) -> None:
    if cfg.mode not in modes:
        raise ConfigError(
            f"a {cfg.mode!r} config cannot drive a {modes[0]!r} run",
            field="mode",
        )


def _write(path: str, text: str) -> None:
    # newline="" keeps LF line endings on every platform
    with open(path, "w", newline="") as f:
        f.write(text)
    logger.info("wrote %s", path)


@dataclass(frozen=True)
class _Setup:
    mechanism: PY9Mechanism
    pairs: list[AdjacentPair]
    grid: Any


def _setup(cfg: AuditConfig) -> _Setup:
    mechanism = cfg.build_mechanism()
    pairs = cfg.adjacent_pairs()
    grid = cfg.grid(mechanism, pairs[0].x)

    return _Setup(mechanism, pairs, grid)


def _mpl_run(
    cfg: AuditConfig, setup: _Setup, rng: Rng, workers: int
) -> AuditReport:
    report = mpl(
        setup.mechanism,
        setup.pairs,
        cfg.n,
        cfg.N,
        setup.grid,
        cfg.alpha,
        rng,
        settings=cfg.estimator_settings(),
        workers=workers,
    )
    report.config = cfg.to_dict()

    return report


def run_audit(cfg: AuditConfig) -> AuditReport:
    """
    One MPL run. The report is written to `cfg.out` as JSON when set; the
    runtime is left out of the file if `cfg.record_runtime` is false.
    """

    _expect_mode(cfg, "audit")

    setup = _setup(cfg)
    rng = Rng(cfg.seed).split(cfg.mode, 0)
    report = _mpl_run(cfg, setup, rng, resolve_workers(cfg.workers))

    if cfg.out:
        _write(cfg.out, report.to_json(runtime=cfg.record_runtime) + "\n")

    return report


@dataclass(frozen=True)
class CdfTable:
    """
    Empirical distribution of the lower bound LB over R independent audits.

    `lbs` is sorted ascending (ties keep run order) and `levels[i]` is
    exactly (i + 1) / R. `err_unstable_runs` counts runs whose stage-2
    density vanished at the selected location.
    """

    mechanism: str
    lbs: tuple[float, ...]
    levels: tuple[float, ...]
    epsilon0: Optional[float]
    true_epsilon: Optional[float]
    alpha: float
    err_unstable_runs: int = 0

    @classmethod
    def from_reports(
        cls,
        reports: Sequence[AuditReport],
        epsilon0: Optional[float],
        true_epsilon: Optional[float],
        alpha: float,
    ) -> CdfTable:
        if not reports:
            raise InvalidArgument("an empirical CDF needs at least one run")

        r = len(reports)
        lbs = sorted(rep.lb for rep in reports)
        unstable = sum(rep.err_unstable_location for rep in reports)

        return cls(
            mechanism=reports[0].mechanism,
            lbs=tuple(lbs),
            levels=tuple((i + 1) / r for i in range(r)),
            epsilon0=epsilon0,
            true_epsilon=true_epsilon,
            alpha=alpha,
            err_unstable_runs=unstable,
        )

    @property
    def repetitions(self) -> int:
        return len(self.lbs)

    def cdf_at(self, z: float) -> float:
        """
        The fraction of runs with LB <= z.
        """
        hits = np.searchsorted(self.lbs, z, side="right")
        return float(hits) / len(self.lbs)

    def median_mad(self) -> tuple[float, float]:
        return med_mad(self.lbs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(
            f"# epsilon0={self.epsilon0},true_epsilon={self.true_epsilon},"
            f"alpha={self.alpha}\n"
        )

        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("lb", "cdf_level"))
        for lb, level in zip(self.lbs, self.levels):
            writer.writerow((repr(lb), repr(level)))

        return buf.getvalue()


def _repetition(
    cfg: AuditConfig, setup: _Setup, master: Rng, rep: int
) -> AuditReport:
    try:
        return _mpl_run(cfg, setup, master.split(cfg.mode, rep), workers=1)
    except Exception:
        logger.exception("repetition %d of %s failed", rep, cfg.mechanism)
        raise


def _repeated_mpl(cfg: AuditConfig) -> CdfTable:
    setup = _setup(cfg)
    master = Rng(cfg.seed)

    reports = run_pool(
        _repetition,
        [(cfg, setup, master, rep) for rep in range(cfg.repetitions)],
        resolve_workers(cfg.workers),
    )

    table = CdfTable.from_reports(
        reports,
        epsilon0=cfg.params.get("epsilon0"),
        true_epsilon=setup.mechanism.true_epsilon(),
        alpha=cfg.alpha,
    )

    if table.err_unstable_runs:
        logger.warning(
            "%d of %d runs had an unstable location",
            table.err_unstable_runs,
            table.repetitions,
        )

    if cfg.out:
        _write(cfg.out, table.to_csv())

    return table


def run_cdf(cfg: AuditConfig) -> CdfTable:
    """
    `cfg.repetitions` independent MPL runs, summarised as the empirical CDF
    of their lower bounds.
    """

    _expect_mode(cfg, "cdf")
    return _repeated_mpl(cfg)


def run_data_centric(cfg: AuditConfig) -> CdfTable:
    """
    Repeated MPL runs over the full neighbourhood of one fixed input; the
    CDF of LB then describes the data-centric privacy level of that input.
    """

    _expect_mode(cfg, "data-centric")
    return _repeated_mpl(cfg)


@dataclass(frozen=True)
class MseRow:
    n: int
    mse: float
    repetitions: int
    eps_true: float

    @property
    def rmse(self) -> float:
        return sqrt(self.mse)


def _mse_job(
    setup: _Setup, cfg: AuditConfig, pair: AdjacentPair, n: int, rng: Rng
) -> float:
    _, eps_hat = dpl(
        setup.mechanism,
        pair.x,
        pair.x_prime,
        n,
        setup.grid,
        rng,
        cfg.estimator_settings(),
    )
    return eps_hat


def mse_to_csv(rows: Sequence[MseRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("n", "mse", "rmse", "repetitions", "eps_true"))
    for row in rows:
        writer.writerow(
            (
                row.n,
                repr(row.mse),
                repr(row.rmse),
                row.repetitions,
                repr(row.eps_true),
            )
        )
    return buf.getvalue()


def run_mse(cfg: AuditConfig) -> list[MseRow]:
    """
    For every n in `cfg.n_list`, the mean squared error of the DPL estimate
    of the first configured pair's privacy violation over `cfg.repetitions`
    seeds. The true violation is the maximum of the analytic loss over the
    evaluation set.
    """

    _expect_mode(cfg, "mse")

    setup = _setup(cfg)
    pair = setup.pairs[0]
    eps_true = setup.mechanism.pair_epsilon(
        pair.x, pair.x_prime, setup.grid.points
    )
    if eps_true is None:
        raise InvalidArgument(
            f"{cfg.mechanism} has no analytic loss, cannot compute an MSE"
        )

    master = Rng(cfg.seed)
    jobs = [
        (setup, cfg, pair, n, master.split(cfg.mode, rep, 0, ix))
        for ix, n in enumerate(cfg.n_list)
        for rep in range(cfg.repetitions)
    ]
    estimates = run_pool(_mse_job, jobs, resolve_workers(cfg.workers))

    rows = []
    for ix, n in enumerate(cfg.n_list):
        chunk = np.asarray(
            estimates[ix * cfg.repetitions : (ix + 1) * cfg.repetitions]
        )
        if np.isinf(chunk).any():
            mse = inf
        else:
            mse = float(np.mean((chunk - eps_true) ** 2))
        rows.append(MseRow(n, mse, cfg.repetitions, eps_true))
        logger.info("n=%d: rmse=%.4f", n, sqrt(mse))

    if cfg.out:
        _write(cfg.out, mse_to_csv(rows))

    return rows


def emit_loss_profile(
    cfg: AuditConfig, fh: Optional[IO[str]] = None
) -> tuple[LossProfile, Optional[np.ndarray]]:
    """
    One DPL run on the first configured pair, with the analytic loss over
    the same points when the mechanism provides it. The profile is written
    as CSV to `fh`, or to `cfg.out` when set.
    """

    _expect_mode(cfg, "loss-profile")

    setup = _setup(cfg)
    pair = setup.pairs[0]
    rng = Rng(cfg.seed).split(cfg.mode, 0, 0, 1)

    profile = dpl_profile(
        setup.mechanism,
        pair.x,
        pair.x_prime,
        cfg.n,
        setup.grid,
        rng,
        cfg.estimator_settings(),
    )
    analytic = setup.mechanism.analytic_loss(
        pair.x, pair.x_prime, profile.grid.points
    )

    if fh is not None:
        profile.to_csv(fh, analytic)
    elif cfg.out:
        buf = io.StringIO()
        profile.to_csv(buf, analytic)
        _write(cfg.out, buf.getvalue())

    return profile, analytic


def list_mechanisms() -> list[DSA]:
    return mechanism_catalog()
