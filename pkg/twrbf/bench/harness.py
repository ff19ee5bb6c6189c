"""
Seeded Monte-Carlo comparisons of relay schemes.

Trial ``t`` draws its channels from ``default_rng([seed, t])``; every scheme
and SNR point of that trial sees the same channels. Schemes report per-user
SINRs (or direct metric values) and the harness turns them into rows of the
results table.
"""
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from twrbf.baselines import BaselineKind, baseline_beamformer
from twrbf.bench.config import BASELINE_SCHEMES, RunConfig, RunMode
from twrbf.bench.records import (
    TRACES,
    ResultRecord,
    TraceRecord,
    sort_results,
    write_table,
)
from twrbf.collaborative import CollabInstance, collab_beamformer
from twrbf.collaborative import collab_utility_maximize
from twrbf.errors import SolverError, TwrbfError
from twrbf.linalg import unvec
from twrbf.mimo import MimoInstance, alternate, sinr_mimo
from twrbf.model import SystemInstance, build_forms, generate_channels, sinr_of_A
from twrbf.solvers.fractional import (
    maxmin_via_powermin,
    powermin_via_maxmin,
    relay_maxmin,
    relay_power_min,
)
from twrbf.solvers.monotonic import PolyblockResult, maximize_utility
from twrbf.solvers.rounding import extract_rank_one
from twrbf.util import RealVector
from twrbf.utility import Modulation, Utility, error_probability

log = logging.getLogger(__name__)

MIN_SINR = "min_sinr_ratio"
SUM_RATE = "sum_rate"
RELAY_POWER = "relay_power"
BER = "ber"
_UTILITY_METRICS = {"rate": SUM_RATE, "mse": "neg_mse", "ser": "neg_ser"}


def mode_metrics(config: RunConfig) -> List[str]:
    mode = config.mode
    if mode is RunMode.MAXMIN:
        return [MIN_SINR]
    if mode is RunMode.POWERMIN:
        return [RELAY_POWER]
    if mode is RunMode.UTILITY:
        return [_UTILITY_METRICS[config.utility], BER]
    if mode is RunMode.MIMO:
        return [MIN_SINR, SUM_RATE, BER]
    return [SUM_RATE]


@dataclass
class TrialContext:
    config: RunConfig
    trial: int
    snr_db: float
    instance: Any
    channels: Any

    @property
    def seed(self) -> List[int]:
        return [self.config.seed, self.trial]

    @property
    def weights(self) -> List[float]:
        return self.config.resolved_weights()

    def sum_rate(self) -> Utility:
        return Utility.sum_rate(self.weights)

    def utility(self) -> Utility:
        kind = self.config.utility
        if kind == "mse":
            return Utility.neg_mse(self.weights)
        if kind == "ser":
            return Utility.neg_ser(self.weights, Modulation(self.config.modulation))
        return self.sum_rate()

    def polyblock_options(self) -> Dict[str, Any]:
        return {"eps": self.config.eps, "max_seconds": self.config.poly_seconds}


@dataclass
class SchemeRun:
    """What a scheme produced for one instance."""

    sinr: Optional[RealVector] = None
    values: Dict[str, float] = field(default_factory=dict)
    bounds: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    rank1: bool = False


def metric_values(ctx: TrialContext, outcome: SchemeRun) -> Dict[str, float]:
    out = dict(outcome.values)
    if outcome.sinr is None:
        return out
    sinr = np.asarray(outcome.sinr, dtype=float)
    weights = ctx.weights
    targets = np.asarray(ctx.config.resolved_targets())
    modulation = Modulation(ctx.config.modulation)
    out.setdefault(MIN_SINR, float(np.min(sinr / targets)))
    out.setdefault(SUM_RATE, Utility.sum_rate(weights)(1.0 + sinr))
    out.setdefault("neg_mse", Utility.neg_mse(weights)(1.0 + sinr))
    out.setdefault("neg_ser", Utility.neg_ser(weights, modulation)(1.0 + sinr))
    out.setdefault(BER, float(np.mean(error_probability(sinr, modulation))))
    return out


def _relay_sinr(inst: SystemInstance, vector: np.ndarray) -> RealVector:
    return sinr_of_A(inst, unvec(vector, inst.antennas, inst.antennas))


def _rounded(res: PolyblockResult) -> np.ndarray:
    if res.rounded is None:
        raise SolverError(res.status.value, "polyblock found no feasible point")
    return res.rounded[0]


def _polyblock_run(
    res: PolyblockResult, sinr: RealVector, metric: str
) -> SchemeRun:
    return SchemeRun(
        sinr=sinr,
        bounds={metric: res.ub},
        iterations=res.iterations,
        rank1=res.x_best is not None and extract_rank_one(res.x_best).accepted,
    )


def scheme_maxmin(ctx: TrialContext) -> SchemeRun:
    inst = ctx.instance
    res = relay_maxmin(inst, stop_tol=ctx.config.tol, seed=ctx.seed)
    assert res.rounded is not None
    return SchemeRun(
        sinr=_relay_sinr(inst, res.rounded[0]),
        bounds={MIN_SINR: res.upper_bound},
        iterations=res.iterations,
        rank1=res.rank_one_accepted,
    )


def scheme_bisection(ctx: TrialContext) -> SchemeRun:
    inst = ctx.instance
    forms = build_forms(inst)
    if ctx.config.mode is RunMode.POWERMIN:
        res = powermin_via_maxmin(forms, inst.sinr_targets)
        return SchemeRun(values={RELAY_POWER: res.value}, iterations=res.iterations)
    res = maxmin_via_powermin(forms, inst.sinr_targets, inst.power_budget)
    return SchemeRun(values={MIN_SINR: res.value}, iterations=res.iterations)


def scheme_powermin(ctx: TrialContext) -> SchemeRun:
    res = relay_power_min(ctx.instance)
    return SchemeRun(
        values={RELAY_POWER: res.power},
        iterations=res.iterations,
        rank1=extract_rank_one(res.x).accepted,
    )


def scheme_wsr(ctx: TrialContext) -> SchemeRun:
    inst = ctx.instance
    res = maximize_utility(inst, ctx.sum_rate(), **ctx.polyblock_options())
    return _polyblock_run(res, _relay_sinr(inst, _rounded(res)), SUM_RATE)


def scheme_utility(ctx: TrialContext) -> SchemeRun:
    inst = ctx.instance
    res = maximize_utility(inst, ctx.utility(), **ctx.polyblock_options())
    metric = _UTILITY_METRICS[ctx.config.utility]
    return _polyblock_run(res, _relay_sinr(inst, _rounded(res)), metric)


def _baseline(kind: BaselineKind) -> Callable[[TrialContext], SchemeRun]:
    def scheme(ctx: TrialContext) -> SchemeRun:
        a = baseline_beamformer(kind, ctx.instance)
        return SchemeRun(sinr=sinr_of_A(ctx.instance, a))

    return scheme


def _collab(total_budget: bool) -> Callable[[TrialContext], SchemeRun]:
    def scheme(ctx: TrialContext) -> SchemeRun:
        inst: CollabInstance = ctx.instance
        res = collab_utility_maximize(
            inst, ctx.sum_rate(), total_budget=total_budget, **ctx.polyblock_options()
        )
        a = collab_beamformer(_rounded(res))
        return _polyblock_run(res, sinr_of_A(inst.as_system(), a), SUM_RATE)

    return scheme


def scheme_relay_array(ctx: TrialContext) -> SchemeRun:
    """The same antennas co-located on one relay with a single budget."""
    inst = SystemInstance.from_snr_db(
        ctx.channels, ctx.snr_db, targets=ctx.config.resolved_targets()
    )
    res = maximize_utility(inst, ctx.sum_rate(), **ctx.polyblock_options())
    return _polyblock_run(res, _relay_sinr(inst, _rounded(res)), SUM_RATE)


def _alternating(wsr: bool) -> Callable[[TrialContext], SchemeRun]:
    def scheme(ctx: TrialContext) -> SchemeRun:
        inst: MimoInstance = ctx.instance
        res = alternate(
            inst,
            eps=ctx.config.eps,
            max_outer=ctx.config.max_outer,
            tol=ctx.config.tol,
            utility=ctx.sum_rate() if wsr else None,
            seed=ctx.seed,
        )
        return SchemeRun(
            sinr=sinr_mimo(res.state, inst),
            iterations=res.iterations,
            rank1=all(res.rank_one),
        )

    return scheme


SCHEMES: Dict[str, Callable[[TrialContext], SchemeRun]] = {
    "maxmin": scheme_maxmin,
    "bisection": scheme_bisection,
    "powermin": scheme_powermin,
    "wsr": scheme_wsr,
    "utility": scheme_utility,
    "collab-individual": _collab(False),
    "collab-total": _collab(True),
    "relay-array": scheme_relay_array,
    "alternating": _alternating(False),
    "alternating-wsr": _alternating(True),
}
for _name in BASELINE_SCHEMES:
    SCHEMES[_name] = _baseline(BaselineKind(_name))


def trial_channels(config: RunConfig, trial: int) -> Any:
    user_antennas = None
    if config.mode is RunMode.MIMO:
        user_antennas = config.resolved_user_antennas()
    return generate_channels(
        [config.seed, trial], config.pairs, config.antennas, user_antennas
    )


def make_instance(config: RunConfig, channels: Any, snr_db: float) -> Any:
    targets = config.resolved_targets()
    if config.mode is RunMode.COLLAB:
        return CollabInstance.from_snr_db(channels, snr_db, targets=targets)
    if config.mode is RunMode.MIMO:
        return MimoInstance.from_snr_db(channels, snr_db, targets=targets)
    return SystemInstance.from_snr_db(channels, snr_db, targets=targets)


def _contexts(config: RunConfig, trial: int):
    channels = trial_channels(config, trial)
    for snr in config.snr_db:
        yield TrialContext(
            config, trial, snr, make_instance(config, channels, snr), channels
        )


def run_trial(config: RunConfig, trial: int) -> List[ResultRecord]:
    metrics = mode_metrics(config)
    records = []
    for ctx in _contexts(config, trial):
        for name in config.resolved_schemes():
            start = time.perf_counter()
            try:
                outcome = SCHEMES[name](ctx)
                values = metric_values(ctx, outcome)
            except TwrbfError as e:
                log.warning(
                    "trial %d, snr %g dB: scheme %s failed: %s",
                    trial,
                    ctx.snr_db,
                    name,
                    e,
                )
                outcome, values = SchemeRun(), {}
            elapsed = (time.perf_counter() - start) * 1000.0
            for metric in metrics:
                value = values.get(metric, math.nan)
                bound = outcome.bounds.get(metric)
                records.append(
                    ResultRecord(
                        trial=trial,
                        snr_db=float(ctx.snr_db),
                        scheme=name,
                        metric=metric,
                        value=float(value),
                        iterations=outcome.iterations,
                        runtime_ms=elapsed if config.timing else 0.0,
                        rank1_accepted=outcome.rank1,
                        relaxation_gap=math.nan if bound is None else bound - value,
                    )
                )
    return records


def run(config: RunConfig) -> List[ResultRecord]:
    """
    Run every trial, write the results table to ``config.out`` (if set) and
    return the rows in (trial, snr, scheme, metric) order.
    """
    trials = range(config.trials)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(run_trial, [config] * config.trials, trials))
    else:
        chunks = [run_trial(config, t) for t in trials]
    records = sort_results(
        [r for chunk in chunks for r in chunk],
        config.snr_db,
        config.resolved_schemes(),
    )
    if config.out:
        n = write_table(config.out, records)
        log.info("wrote %d result rows to %s", n, config.out)
    return records


class SummaryRow(NamedTuple):
    snr_db: float
    scheme: str
    metric: str
    mean: float
    failures: int


def summarize(records: Sequence[ResultRecord]) -> List[SummaryRow]:
    groups: Dict[tuple, List[float]] = defaultdict(list)
    for r in records:
        groups[(r.snr_db, r.scheme, r.metric)].append(r.value)
    rows = []
    for (snr, scheme, metric), values in groups.items():
        finite = [v for v in values if not math.isnan(v)]
        mean = float(np.mean(finite)) if finite else math.nan
        rows.append(SummaryRow(snr, scheme, metric, mean, len(values) - len(finite)))
    return rows


def format_summary(rows: Sequence[SummaryRow]) -> str:
    lines = [f"{'snr_db':>8}  {'scheme':<18}  {'metric':<15}  {'mean':>14}  failed"]
    for row in rows:
        lines.append(
            f"{row.snr_db:>8g}  {row.scheme:<18}  {row.metric:<15}  "
            f"{row.mean:>14.6g}  {row.failures:>6d}"
        )
    return "\n".join(lines)


def _trace_rows(ctx: TrialContext) -> List[TraceRecord]:
    config = ctx.config
    mode = config.mode
    base = dict(trial=ctx.trial, snr_db=float(ctx.snr_db))
    if mode in (RunMode.MAXMIN, RunMode.POWERMIN):
        res = relay_maxmin(ctx.instance, stop_tol=config.tol, round_result=False)
        return [
            TraceRecord(algorithm="dinkelbach", iteration=k, value=lam, **base)
            for k, lam in enumerate(res.lambda_trace)
        ]
    if mode is RunMode.MIMO:
        alt = alternate(
            ctx.instance,
            eps=config.eps,
            max_outer=config.max_outer,
            tol=config.tol,
            seed=ctx.seed,
        )
        return [
            TraceRecord(algorithm="alternating", iteration=k, value=v, **base)
            for k, v in enumerate(alt.trace)
        ]
    if mode is RunMode.COLLAB:
        poly = collab_utility_maximize(
            ctx.instance, ctx.sum_rate(), **ctx.polyblock_options()
        )
    else:
        utility = ctx.utility() if mode is RunMode.UTILITY else ctx.sum_rate()
        poly = maximize_utility(ctx.instance, utility, **ctx.polyblock_options())
    return [
        TraceRecord(
            algorithm="polyblock",
            iteration=row.iteration,
            value=row.cbv,
            bound=row.ub,
            vertices=row.vertices,
            **base,
        )
        for row in poly.trace
    ]


def convergence_trace(config: RunConfig) -> List[TraceRecord]:
    """
    Per-iteration progress of the mode's main algorithm: the lambda trace
    for max-min and power modes, CBV against the upper bound for polyblock
    modes, and the tracked value for the alternating MIMO design.
    """
    rows: List[TraceRecord] = []
    for trial in range(config.trials):
        for ctx in _contexts(config, trial):
            try:
                rows.extend(_trace_rows(ctx))
            except TwrbfError as e:
                log.warning("trial %d: trace failed: %s", trial, e)
    if config.trace_out:
        n = write_table(config.trace_out, rows, TRACES)
        log.info("wrote %d trace rows to %s", n, config.trace_out)
    return rows
