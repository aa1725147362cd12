"""Monte Carlo convergence studies.

Errors are strong (mean-squared L2) differences between two resolutions
driven by the same noise path:

* temporal ladders share one fine increment table per trajectory, block-summed
  down to each ``M``;
* spatial ladders use nested tensor bases whose common modes draw the same
  increment rows (streams are keyed by the mode's index tuple).

The error reported at rung ``r`` is ``E[||u^{1.5 r} - u^{r}||^2]^{1/2}`` at the
terminal time, so a ladder ``(32, 48, 72)`` also solves at 108.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import spectral, tfgn
from .errors import ConfigurationError, DegenerateRateError, DomainError, ProtocolError
from .solver import Forcing, NoiseSpec, integrate

__all__ = [
    "ExperimentPlan",
    "RateModel",
    "RateReport",
    "HolderReport",
    "PRESETS",
    "preset_plans",
    "convergence_rate",
    "check_coupling",
    "check_nested_coupling",
    "mc_error",
    "run_temporal_table",
    "run_spatial_table",
    "run_sweep",
    "holder_exponent",
    "holder_study",
    "write_report",
    "resolve_threads",
    "run_cli",
]

_LN_RATIO = math.log(1.5)
THREADS_ENV = "TFSPDE_THREADS"


def _square_corner(*x):
    out = 1.0
    for xk in x:
        out = out * xk * xk
    return out


INITIAL_CONDITIONS: Dict[str, Callable] = {
    "x2y2": _square_corner,
    "zero": lambda *x: np.zeros(np.broadcast(*x).shape),
}


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce one convergence study.

    ``ladder`` holds the varied resolution (``M`` for temporal and Hölder
    studies, ``N`` for spatial ones); ``modes_per_dim`` / ``steps`` hold the
    other. For Hölder studies ``steps`` is the time grid and ``lags`` are the
    time lags in units of its step.
    """

    mode: str
    ladder: Tuple[int, ...]
    alpha: float
    hurst: float
    mu: float
    rho: float
    horizon: float
    trajectories: int = 200
    master_seed: int = 0
    modes_per_dim: int = 20
    steps: int = 1000
    dim: int = 2
    conv_substep_ratio: int = 1
    forcing: str = "linear"
    silent: bool = False
    initial: str = "x2y2"
    lags: Tuple[int, ...] = (1, 2, 4, 8, 16)
    compare_time: Optional[float] = None
    chunk: int = 8
    output: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(int(v) for v in self.ladder))
        object.__setattr__(self, "lags", tuple(int(v) for v in self.lags))
        if self.mode not in ("temporal", "spatial", "holder"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        # Domain checks raise here rather than deep inside a run.
        tfgn.TemperingParams(self.hurst, self.mu)
        spectral.FractionalPower(self.alpha)
        NoiseSpec(self.rho)
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if self.trajectories < 1:
            raise ConfigurationError("need at least one trajectory")
        if not 0 <= self.master_seed <= tfgn.SEED_MAX:
            raise DomainError("master_seed must fit in 64 bits")
        if self.forcing not in ("linear", "zero"):
            raise ConfigurationError(f"unknown forcing {self.forcing!r}")
        if self.initial not in INITIAL_CONDITIONS:
            raise ConfigurationError(f"unknown initial condition {self.initial!r}")
        if self.chunk < 1:
            raise ConfigurationError("chunk must be positive")
        if self.mode == "holder":
            if len(self.lags) < 3:
                raise ConfigurationError("Hölder regression needs at least 3 lags")
            if min(self.lags) < 1 or max(self.lags) > self.steps:
                raise ConfigurationError("lags must lie in [1, steps]")
            return
        if len(self.ladder) < 3:
            raise ConfigurationError("ladder needs at least 3 rungs")
        if any(2 * b != 3 * a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigurationError(f"successive ladder entries must have ratio 3/2: {self.ladder}")
        if self.ladder[-1] % 2:
            raise ConfigurationError("last rung must be even so that 1.5x it is an integer")
        if self.compare_time is not None:
            grids = self.resolutions if self.mode == "temporal" else (self.steps,)
            for m in grids:
                k = self.compare_time / self.horizon * m
                if not (0 <= self.compare_time <= self.horizon and abs(k - round(k)) < 1e-9):
                    raise ConfigurationError(
                        f"compare_time {self.compare_time} is not on the grid with {m} steps")

    @property
    def resolutions(self) -> Tuple[int, ...]:
        """Ladder plus the 1.5x partner of its last rung."""
        return self.ladder + (self.ladder[-1] * 3 // 2,)

    @property
    def fixed(self) -> int:
        return self.steps if self.mode == "spatial" else self.modes_per_dim

    @property
    def fine_steps(self) -> int:
        """Noise grid size: lcm of all temporal resolutions times the substep ratio."""
        if self.mode == "temporal":
            return int(np.lcm.reduce(self.resolutions)) * self.conv_substep_ratio
        return self.steps * self.conv_substep_ratio

    @property
    def params(self) -> tfgn.TemperingParams:
        return tfgn.TemperingParams(self.hurst, self.mu)

    def noise_key(self):
        """Plans with equal keys see identical increments."""
        grid_sizes = (self.modes_per_dim,) if self.mode != "spatial" else self.resolutions
        return (self.mode, self.hurst, self.mu, self.horizon, self.fine_steps, self.dim,
                self.master_seed, self.trajectories, self.chunk, max(grid_sizes))

    def replace(self, **kw) -> "ExperimentPlan":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ladder"] = list(self.ladder)
        d["lags"] = list(self.lags)
        return d


@dataclass(frozen=True)
class RateModel:
    """Predicted rates from ``gamma = 2 rho - 1 + 2 alpha min(H, 1)``."""

    alpha: float
    hurst: float
    rho: float

    @classmethod
    def from_plan(cls, plan: ExperimentPlan) -> "RateModel":
        return cls(plan.alpha, plan.hurst, plan.rho)

    @property
    def gamma(self) -> float:
        return 2.0 * self.rho - 1.0 + 2.0 * self.alpha * min(self.hurst, 1.0)

    @property
    def predicted_temporal_rate(self) -> float:
        if self.rho > 0.5:
            return min(self.hurst, 1.0)
        return self.gamma / (2.0 * self.alpha)

    @property
    def predicted_spatial_rate(self) -> float:
        return self.gamma

    def check(self) -> bool:
        """False, with a warning, when ``gamma <= 0`` (outside the rate theory)."""
        if self.gamma <= 0:
            warnings.warn(f"gamma = {self.gamma:.3f} <= 0: rho must exceed "
                          f"1/2 - alpha min(H, 1) for the predicted rates to apply",
                          RuntimeWarning, stacklevel=2)
            return False
        return True

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "predicted_temporal_rate": self.predicted_temporal_rate,
                "predicted_spatial_rate": self.predicted_spatial_rate}


def convergence_rate(e_prev: float, e_next: float) -> float:
    """``ln(e_prev / e_next) / ln 1.5``: positive when the error decreases."""
    if not (e_prev > 0 and e_next > 0):
        raise DegenerateRateError(f"rates need positive errors, got {e_prev!r}, {e_next!r}")
    return math.log(e_prev / e_next) / _LN_RATIO


@dataclass
class RateReport:
    plan: ExperimentPlan
    errors: List[float]
    rates: List[float]
    predicted: float
    std_errors: List[float]
    rate_std_errors: List[float]
    wall_clock: float = 0.0

    @property
    def resolutions(self) -> Tuple[int, ...]:
        return self.plan.ladder

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "rate_model": RateModel.from_plan(self.plan).to_dict(),
            "predicted_rate": self.predicted,
            "trajectories": self.plan.trajectories,
            "seed": self.plan.master_seed,
            "resolutions": list(self.resolutions),
            "errors": self.errors,
            "rates": self.rates,
            "std_errors": [_finite_or_none(v) for v in self.std_errors],
            "rate_std_errors": [_finite_or_none(v) for v in self.rate_std_errors],
            "wall_clock_seconds": self.wall_clock,
        }


@dataclass
class HolderReport:
    plan: ExperimentPlan
    lags: np.ndarray
    mean_square_increments: np.ndarray
    exponent: float
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return {"plan": self.plan.to_dict(), "lag_times": self.lags.tolist(),
                "mean_square_increments": self.mean_square_increments.tolist(),
                "exponent": self.exponent,
                "rate_model": RateModel.from_plan(self.plan).to_dict(),
                "wall_clock_seconds": self.wall_clock}


def _finite_or_none(v):
    return float(v) if math.isfinite(v) else None


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


# --- coupling checks -------------------------------------------------------

def check_coupling(fine: tfgn.IncrementTable, coarse: tfgn.IncrementTable) -> None:
    """Raise :class:`ProtocolError` unless ``coarse`` is the block sum of ``fine``."""
    if (fine.seed, fine.trajectory, fine.params) != (coarse.seed, coarse.trajectory, coarse.params):
        raise ProtocolError(
            f"rungs driven by different noise: seed/trajectory {fine.seed}/{fine.trajectory} "
            f"vs {coarse.seed}/{coarse.trajectory}")
    if fine.grid.horizon != coarse.grid.horizon or fine.grid.steps % coarse.grid.steps:
        raise ProtocolError("coarse grid is not a coarsening of the fine grid")
    if fine.mode_keys != coarse.mode_keys:
        raise ProtocolError("rungs use different mode keys")
    expect = tfgn.block_sum(fine.data, fine.grid.steps // coarse.grid.steps)
    if not np.array_equal(expect, coarse.data):
        raise ProtocolError("coarse increments are not block sums of the fine increments")


def check_nested_coupling(small: tfgn.IncrementTable, large: tfgn.IncrementTable) -> None:
    """Raise :class:`ProtocolError` unless shared mode keys carry identical rows."""
    if (small.seed, small.trajectory, small.params, small.grid) != \
            (large.seed, large.trajectory, large.params, large.grid):
        raise ProtocolError("nested bases driven by different noise streams")
    if not np.array_equal(large.rows_for(small.mode_keys), small.data):
        raise ProtocolError("shared modes carry different increments")


# --- simulation core -------------------------------------------------------

@dataclass
class _Setup:
    plan: ExperimentPlan
    resolutions: Tuple[int, ...]
    bases: Dict[int, spectral.SpectralBasis]
    u0: Dict[int, np.ndarray]
    sigma: Dict[int, np.ndarray]
    frac: Dict[int, np.ndarray]
    rows: Dict[int, np.ndarray]
    forcing: Forcing
    record: Optional[Sequence[int]]


def _setup(plan: ExperimentPlan, resolutions, master: spectral.SpectralBasis, record=None) -> _Setup:
    init = INITIAL_CONDITIONS[plan.initial]
    noise = NoiseSpec.silent(plan.rho) if plan.silent else NoiseSpec(plan.rho)
    power = spectral.FractionalPower(plan.alpha)
    sizes = resolutions if plan.mode == "spatial" else (plan.modes_per_dim,)
    bases, u0, sigma, frac, rows = {}, {}, {}, {}, {}
    for n in sizes:
        b = spectral.build_basis(plan.dim, n)
        bases[n] = b
        u0[n] = spectral.project(init, b).coeffs
        sigma[n] = noise.amplitudes(b)
        frac[n] = spectral.fractional_eigenvalues(b, power)
        rows[n] = b.positions_in(master)
    forcing = Forcing.linear() if plan.forcing == "linear" else Forcing.zero()
    return _Setup(plan, tuple(resolutions), bases, u0, sigma, frac, rows, forcing, record)


def _chunk_increments(params, factor, keys, seed, ks, steps):
    normals = np.stack([tfgn.standard_normals(seed, k, keys, steps) for k in ks])
    b, n = normals.shape[:2]
    return (normals.reshape(b * n, steps) @ factor.lower.T).reshape(b, n, steps)


def _integrate_chunk(s: _Setup, incr: np.ndarray):
    """Terminal (or recorded) solutions per resolution for one chunk."""
    plan = s.plan
    out = {}
    ratio = plan.conv_substep_ratio
    if plan.mode == "spatial":
        m = plan.steps
        for n in s.resolutions:
            noise = s.sigma[n][:, None] * incr[:, s.rows[n], :]
            res = integrate(s.u0[n], noise, s.frac[n], plan.horizon / m, ratio,
                            s.forcing, s.bases[n], record=s.record)
            out[n] = res
        return out
    n = plan.modes_per_dim
    for m in s.resolutions:
        dB = tfgn.block_sum(incr, plan.fine_steps // (m * ratio))
        record = s.record
        if plan.mode == "temporal" and plan.compare_time is not None:
            record = [int(round(plan.compare_time / plan.horizon * m))]
        res = integrate(s.u0[n], s.sigma[n][:, None] * dB, s.frac[n], plan.horizon / m, ratio,
                        s.forcing, s.bases[n], record=record)
        if record is not None and plan.mode == "temporal":
            res = res[record[0]]
        out[m] = res
    return out


def _simulate(plans: Sequence[ExperimentPlan], resolutions, reducer, record=None, threads=None):
    """Run all ``plans`` (which must share a noise key) over their trajectories.

    ``reducer(setup, chunk_result) -> dict[name, ndarray (B,)]`` maps each chunk
    to per-trajectory statistics; results come back indexed by trajectory so
    the final reduction does not depend on thread scheduling.
    """
    head = plans[0]
    if any(p.noise_key() != head.noise_key() for p in plans):
        raise ConfigurationError("plans in one simulation must share their noise")
    if head.mode == "spatial":
        master = spectral.build_basis(head.dim, max(resolutions))
    else:
        master = spectral.build_basis(head.dim, head.modes_per_dim)
    keys = master.mode_tuples()
    grid = tfgn.TimeGrid(head.horizon, head.fine_steps)
    factor = tfgn.shared_factor(head.params, grid)
    setups = [_setup(p, resolutions, master, record) for p in plans]
    k_total = head.trajectories
    chunks = [range(a, min(a + head.chunk, k_total)) for a in range(0, k_total, head.chunk)]
    stats: List[Dict[str, np.ndarray]] = [dict() for _ in plans]

    def work(ks):
        incr = _chunk_increments(head.params, factor, keys, head.master_seed, ks, grid.steps)
        return ks, [reducer(s, _integrate_chunk(s, incr)) for s in setups]

    def store(ks, results):
        for i, res in enumerate(results):
            for name, vals in res.items():
                arr = stats[i].setdefault(name, np.empty(k_total))
                arr[ks.start:ks.stop] = vals

    nthreads = resolve_threads(threads)
    if nthreads == 1:
        for ks in chunks:
            store(*work(ks))
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            for ks, res in pool.map(work, chunks):
                store(ks, res)
    return stats


def _pair_sq_errors(setup: _Setup, res, pairs):
    plan = setup.plan
    out = {}
    for lo, hi in pairs:
        a, b = res[lo], res[hi]
        if plan.mode == "spatial":
            diff = b.copy()
            diff[..., setup.bases[lo].positions_in(setup.bases[hi])] -= a
        else:
            diff = b - a
        out[(lo, hi)] = np.sum(diff * diff, axis=-1)
    return out


def _terminal_result(res):
    # integrate(record=None) returns (z, conv, u); keep u
    return {k: (v[2] if isinstance(v, tuple) else v) for k, v in res.items()}


def _report(plan: ExperimentPlan, sq: Dict, started: float) -> RateReport:
    ladder = plan.ladder
    res = plan.resolutions
    pairs = list(zip(res, res[1:]))
    x = np.stack([sq[p] for p in pairs])          # (rungs, K)
    means = np.sum(x, axis=1) / x.shape[1]         # pairwise summation
    errors = [float(math.sqrt(m)) for m in means]
    rates = [convergence_rate(a, b) for a, b in zip(errors, errors[1:])]
    k = x.shape[1]
    if k > 1:
        cov = np.atleast_2d(np.cov(x)) / k
    else:
        cov = np.full((len(pairs), len(pairs)), np.nan)
    se = [float(math.sqrt(cov[i, i]) / (2 * e)) if e > 0 else math.nan for i, e in enumerate(errors)]
    rate_se = []
    for i in range(1, len(pairs)):
        g = np.zeros(len(pairs))
        g[i - 1] = 1.0 / (2 * means[i - 1] * _LN_RATIO)
        g[i] = -1.0 / (2 * means[i] * _LN_RATIO)
        rate_se.append(float(math.sqrt(max(g @ cov @ g, 0.0))) if k > 1 else math.nan)
    model = RateModel.from_plan(plan)
    model.check()
    predicted = model.predicted_temporal_rate if plan.mode == "temporal" else model.predicted_spatial_rate
    assert len(errors) == len(ladder)
    return RateReport(plan, errors, rates, predicted, se, rate_se, time.perf_counter() - started)


def run_sweep(plans: Sequence[ExperimentPlan], threads: Optional[int] = None) -> List[RateReport]:
    """Run several temporal or spatial plans; those sharing noise share one pass."""
    reports: List[Optional[RateReport]] = [None] * len(plans)
    groups: Dict[tuple, List[int]] = {}
    for i, p in enumerate(plans):
        if p.mode == "holder":
            raise ConfigurationError("use holder_exponent for Hölder plans")
        groups.setdefault(p.noise_key(), []).append(i)
    for idx in groups.values():
        group = [plans[i] for i in idx]
        started = time.perf_counter()
        res = group[0].resolutions
        pairs = list(zip(res, res[1:]))

        def reducer(setup, chunk):
            return _pair_sq_errors(setup, _terminal_result(chunk), pairs)

        stats = _simulate(group, res, reducer, threads=threads)
        for i, st in zip(idx, stats):
            reports[i] = _report(plans[i], st, started)
    return reports


def run_temporal_table(plan: ExperimentPlan, threads: Optional[int] = None) -> RateReport:
    if plan.mode != "temporal":
        raise ConfigurationError("plan mode must be 'temporal'")
    return run_sweep([plan], threads)[0]


def run_spatial_table(plan: ExperimentPlan, threads: Optional[int] = None) -> RateReport:
    if plan.mode != "spatial":
        raise ConfigurationError("plan mode must be 'spatial'")
    return run_sweep([plan], threads)[0]


def mc_error(plan: ExperimentPlan, rung_pair: Tuple[int, int],
             seeds: Optional[Tuple[int, int]] = None, threads: Optional[int] = None) -> float:
    """Monte Carlo strong error between two resolutions of ``plan``.

    Noise lives on the plan's fine grid (temporal) or on its largest basis
    (spatial), so the value equals the corresponding entry of the full table.
    ``seeds`` overrides the master seed per side; differing seeds break the
    coupling and raise :class:`ProtocolError`.
    """
    lo, hi = (int(v) for v in rung_pair)
    if seeds is not None and seeds[0] != seeds[1]:
        _demonstrate_decoupled(plan, (lo, hi), seeds)
    if lo == hi:
        return 0.0
    if plan.mode == "temporal":
        fine = plan.fine_steps // plan.conv_substep_ratio
        if fine % lo or fine % hi:
            raise ConfigurationError(f"{rung_pair} do not divide the fine grid of {fine} steps")
        sizes = plan.resolutions
    elif plan.mode == "spatial":
        sizes = plan.resolutions
        if max(lo, hi) > max(sizes):
            raise ConfigurationError(f"{rung_pair} exceeds the largest basis {max(sizes)}")
    else:
        raise ConfigurationError("mc_error needs a temporal or spatial plan")
    pair = (lo, hi)

    def reducer(setup, chunk):
        return _pair_sq_errors(setup, _terminal_result(chunk), [pair])

    # the spatial master basis depends on the largest resolution; keep the plan's
    stats = _simulate([plan], _with_master(pair, sizes, plan), reducer, threads=threads)[0]
    x = stats[pair]
    return float(math.sqrt(np.sum(x) / x.size))


def _with_master(pair, sizes, plan):
    if plan.mode == "spatial":
        # list the pair first, then pad with the largest size so the master basis matches
        return tuple(dict.fromkeys(pair + (max(sizes),)))
    return tuple(dict.fromkeys(pair))


def _demonstrate_decoupled(plan, pair, seeds):
    steps = plan.fine_steps if plan.mode == "temporal" else plan.steps
    grid = tfgn.TimeGrid(plan.horizon, steps)
    factor = tfgn.shared_factor(plan.params, grid)
    keys = [(1,) * plan.dim]
    a = tfgn.sample_increments(factor, keys, seeds[0], grid=grid, params=plan.params)
    b = tfgn.sample_increments(factor, keys, seeds[1], grid=grid, params=plan.params)
    if plan.mode == "temporal":
        check_coupling(a, tfgn.coarsen(b, steps // pair[0] // plan.conv_substep_ratio
                                       if steps % (pair[0] * plan.conv_substep_ratio) == 0 else 1))
    else:
        check_nested_coupling(a, b)


# --- Hölder exponent --------------------------------------------------------

def holder_study(plan: ExperimentPlan, threads: Optional[int] = None) -> HolderReport:
    """Mean-square increments ``E||u(T) - u(T - l tau)||^2`` over the lag set."""
    if plan.mode != "holder":
        raise ConfigurationError("plan mode must be 'holder'")
    started = time.perf_counter()
    m = plan.steps
    record = sorted({m} | {m - l for l in plan.lags})

    def reducer(setup, chunk):
        rec = chunk[m]
        u_end = rec[m][2]
        out = {}
        for l in plan.lags:
            d = u_end - rec[m - l][2]
            out[l] = np.sum(d * d, axis=-1)
        return out

    stats = _simulate([plan], (m,), reducer, record=record, threads=threads)[0]
    tau = plan.horizon / m
    lags = np.array([l * tau for l in plan.lags])
    msq = np.array([np.sum(stats[l]) / stats[l].size for l in plan.lags])
    if np.any(msq <= 0):
        raise DegenerateRateError("zero increments: the exponent is undefined")
    slope = np.polyfit(np.log(lags), np.log(msq), 1)[0]
    return HolderReport(plan, lags, msq, float(slope / 2.0), time.perf_counter() - started)


def holder_exponent(plan: ExperimentPlan, threads: Optional[int] = None) -> float:
    """Half the least-squares slope of ``ln E||u(T) - u(T - d)||^2`` against ``ln d``."""
    return holder_study(plan, threads).exponent


# --- presets and reports ----------------------------------------------------

# ``mu`` is always the tempering rate of the noise, never an eigenvalue.
PRESETS: Dict[str, dict] = {
    "table1": dict(base=dict(mode="temporal", ladder=(32, 48, 72), alpha=0.5, rho=0.75, mu=1.0,
                             horizon=0.5, modes_per_dim=20, hurst=0.4),
                   sweep=("hurst", (0.4, 0.8, 1.2, 1.6))),
    "table2": dict(base=dict(mode="temporal", ladder=(32, 48, 72), alpha=0.8, rho=0.4, mu=0.5,
                             horizon=0.5, modes_per_dim=20, hurst=0.6),
                   sweep=("hurst", (0.6, 0.8, 1.0, 1.2))),
    "table3": dict(base=dict(mode="spatial", ladder=(16, 24, 36), alpha=0.3, rho=0.75, mu=0.5,
                             horizon=0.25, steps=1000, hurst=0.35),
                   sweep=("hurst", (0.35, 0.7, 1.05, 1.4))),
    "table4": dict(base=dict(mode="spatial", ladder=(16, 24, 36), alpha=0.2, rho=0.75, mu=0.5,
                             horizon=0.25, steps=1000, hurst=0.8),
                   sweep=("alpha", (0.2, 0.4, 0.6, 0.8))),
    "table5": dict(base=dict(mode="spatial", ladder=(16, 24, 36), alpha=0.5, rho=0.75, mu=0.5,
                             horizon=0.25, steps=1000, hurst=1.2),
                   sweep=("rho", (0.75, 1.25, 1.75, 2.25))),
    "holder_rough": dict(base=dict(mode="holder", ladder=(), alpha=0.5, rho=0.75, mu=1.0,
                                   horizon=0.5, modes_per_dim=20, steps=1024, hurst=0.4,
                                   trajectories=500), sweep=None),
    "holder_smooth": dict(base=dict(mode="holder", ladder=(), alpha=0.5, rho=0.75, mu=1.0,
                                    horizon=0.5, modes_per_dim=20, steps=1024, hurst=1.6,
                                    trajectories=500), sweep=None),
}


def preset_plans(name: str, **overrides) -> Tuple[Optional[str], List[ExperimentPlan]]:
    """Plans of a preset; an override of the swept parameter collapses the sweep."""
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    spec = PRESETS[name]
    base = dict(spec["base"])
    base.update({k: v for k, v in overrides.items() if v is not None})
    sweep = spec["sweep"]
    if sweep is None or sweep[0] in overrides and overrides[sweep[0]] is not None:
        return None, [ExperimentPlan(**base)]
    param, values = sweep
    return param, [ExperimentPlan(**{**base, param: v}) for v in values]


def _fmt_num(v) -> str:
    return format(v, "g")


def write_report(reports: Sequence[RateReport], csv_path: str, sweep: Optional[str] = None,
                 json_path: Optional[str] = None) -> None:
    """CSV (one row per rung) plus a JSON sidecar with the full parameter echo."""
    label = "M" if reports[0].plan.mode == "temporal" else "N"
    with open(csv_path, "w") as fh:
        head = ([sweep] if sweep else []) + [label, "error", "rate"]
        fh.write(",".join(head) + "\n")
        for rep in reports:
            rates = [""] + [f"{r:.3f}" for r in rep.rates]
            for res, err, rate in zip(rep.resolutions, rep.errors, rates):
                cells = ([_fmt_num(getattr(rep.plan, sweep))] if sweep else []) + \
                        [str(res), f"{err:.5e}", rate]
                fh.write(",".join(cells) + "\n")
    if json_path is None:
        json_path = os.path.splitext(csv_path)[0] + ".json"
    doc = {"sweep": sweep, "reports": [r.to_dict() for r in reports]}
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_cli(argv=None) -> int:
    from .cli import main
    return main(argv)
