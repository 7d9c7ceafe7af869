"""Penalized EM for finite mixtures of Cox proportional-hazards components."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .coxfit import (
    BaselineHazard,
    ComponentFit,
    DegenerateComponentError,
    NumericalError,
    RATE_FLOOR,
    _newton,
    _RiskSets,
    component_log_density,
    default_time_bandwidth,
    kernel_values,
)
from .data import Dataset, standardize_covariates
from .penalties import PenaltySpec, lla_coefficient, log_scale_term

__all__ = [
    "EMConfig",
    "MixtureParams",
    "FittedModel",
    "initialize",
    "e_step",
    "update_mixing_proportions",
    "prune_components",
    "observed_loglik",
    "penalized_observed_loglik",
    "complete_data_loglik",
    "check_convergence",
    "monotonicity_failures",
    "fit_mixture",
    "model_to_json",
    "model_from_json",
    "save_model",
    "load_model",
]

DEFAULT_K_INIT = 10
DEFAULT_MAX_ITERATIONS = 500
DEFAULT_EPS_ABS = 1e-6
DEFAULT_EPS_REL = 1e-6
DEFAULT_RESTARTS = 5

# share of each record's weight spread across all components when building
# the initial baselines; keeps every starting density strictly positive
INIT_MASS_FLOOR = 0.05

# coefficient vectors closer than this in sup norm are flagged as indistinct
DISTINCT_TOL = 1e-6


@dataclass(frozen=True)
class EMConfig:
    """Knobs of the EM search."""

    k_init: int = DEFAULT_K_INIT
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    eps_abs: float = DEFAULT_EPS_ABS
    eps_rel: float = DEFAULT_EPS_REL
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_init < 1:
            raise ValueError("k_init must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (0 < self.eps_abs < 1) or not (0 < self.eps_rel < 1):
            raise ValueError("convergence tolerances must lie in (0, 1)")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit nonnegative integer")


@dataclass(frozen=True)
class MixtureParams:
    """Mixing proportions plus per-component fits."""

    pi: np.ndarray
    components: list[ComponentFit]

    def __post_init__(self) -> None:
        pi = np.array(self.pi, dtype=float, copy=True)
        if pi.ndim != 1 or pi.size == 0:
            raise ValueError("pi must be a nonempty 1-d array")
        if len(self.components) != pi.size:
            raise ValueError("pi and components disagree on the number of components")
        if not np.all(np.isfinite(pi)) or np.any(pi < 0) or np.any(pi > 1 + 1e-9):
            raise ValueError("mixing proportions must lie in [0, 1]")
        if abs(float(pi.sum()) - 1.0) > 1e-9:
            raise ValueError("mixing proportions must sum to 1")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @property
    def K(self) -> int:
        return self.pi.size


@dataclass
class FittedModel:
    """Result of `fit_mixture`, or of loading a serialized model."""

    params: MixtureParams
    spec: PenaltySpec
    seed: int
    history: list[float] = field(default_factory=list)
    responsibilities: np.ndarray | None = None
    config: EMConfig | None = None
    diagnostics: dict | None = None
    distinct: bool = True

    @property
    def selected_K(self) -> int:
        return self.params.K

    @property
    def kernel(self) -> str:
        return self.params.components[0].baseline.kernel

    @property
    def bandwidth(self) -> float:
        return self.params.components[0].baseline.bandwidth


class _FitContext:
    """Per-dataset caches shared across EM iterations: risk-set prefix sums,
    the distinct event-time grid, and the kernel matrix for smoothing."""

    def __init__(self, data: Dataset, kernel: str, bandwidth: float):
        self.data = data
        self.y = data.y
        self.delta = data.delta
        self.x = data.x
        self.n, self.p = data.x.shape
        self.kernel = kernel
        self.bandwidth = float(bandwidth)
        self.rs = _RiskSets(self.y)
        self.ev_mask = self.delta == 1
        self.grid = np.unique(self.y[self.ev_mask])
        self.grid_pos = np.searchsorted(self.grid, self.y[self.ev_mask])
        # index into the zero-padded cumulative increments for Lambda(y_i)
        self.cum_idx = np.searchsorted(self.grid, self.y, side="right")
        u = (self.y[:, None] - self.grid[None, :]) / self.bandwidth
        self.kmat = kernel_values(kernel, u) / self.bandwidth

    def increments(self, w: np.ndarray, beta: np.ndarray) -> np.ndarray:
        eta = self.x @ beta
        shift = float(np.max(eta))
        s0 = self.rs.sums(w * np.exp(eta - shift))
        num = w[self.ev_mask]
        den = s0[self.ev_mask]
        if np.any((num > 0) & (den <= 0)):
            raise DegenerateComponentError("empty risk-set weight sum at an event time")
        raw = np.where(num > 0, num * math.exp(-shift) / np.where(den > 0, den, 1.0), 0.0)
        inc = np.zeros(self.grid.size)
        np.add.at(inc, self.grid_pos, raw)
        return inc

    def log_density(self, beta: np.ndarray, inc: np.ndarray) -> np.ndarray:
        eta = self.x @ beta
        rate = self.kmat @ inc
        cum = np.concatenate(([0.0], np.cumsum(inc)))[self.cum_idx]
        log_rate = np.log(np.maximum(rate, RATE_FLOOR))
        with np.errstate(over="ignore"):
            risk = np.exp(eta)
        hazard_term = np.where(cum > 0, risk * cum, 0.0)
        return np.where(self.ev_mask, log_rate + eta, 0.0) - hazard_term

    def fit_component(self, w: np.ndarray, beta0: np.ndarray) -> ComponentFit:
        w_fit = w / float(np.max(w))
        try:
            beta, ll, iterations, converged = _newton(
                self.y, self.delta, self.x, w_fit, self.rs, beta0, 25, 1e-8, 20
            )
        except NumericalError:
            # a warm start can be infeasible after the weights shift; zero is
            # always a finite starting point for the partial likelihood
            beta, ll, iterations, converged = _newton(
                self.y, self.delta, self.x, w_fit, self.rs, np.zeros(self.x.shape[1]), 25, 1e-8, 20
            )
        inc = self.increments(w, beta)
        baseline = BaselineHazard(
            event_times=self.grid, increments=inc, kernel=self.kernel, bandwidth=self.bandwidth
        )
        return ComponentFit(beta=beta, baseline=baseline, loglik=ll, converged=converged, iterations=iterations)

    def refit_component(self, w: np.ndarray, previous: ComponentFit) -> ComponentFit:
        # a component starved of event weight keeps its coefficients and gets a
        # zero baseline; the next E-step then removes it naturally
        if float(np.sum(w[self.ev_mask])) <= 0.0:
            inc = np.zeros(self.grid.size)
            baseline = BaselineHazard(
                event_times=self.grid, increments=inc, kernel=self.kernel, bandwidth=self.bandwidth
            )
            return ComponentFit(
                beta=previous.beta, baseline=baseline, loglik=-np.inf, converged=False, iterations=0
            )
        return self.fit_component(w, previous.beta)

    def all_log_densities(self, params: MixtureParams) -> np.ndarray:
        out = np.empty((self.n, params.K))
        for k, comp in enumerate(params.components):
            out[:, k] = self.log_density(comp.beta, comp.baseline.increments)
        return out


def _softmax_rows(pi: np.ndarray, logd: np.ndarray) -> tuple[np.ndarray, float]:
    K = pi.size
    with np.errstate(divide="ignore"):
        L = np.log(pi)[None, :] + logd
    lse = logsumexp(L, axis=1)
    bad = ~np.isfinite(lse)
    if np.any(bad):
        warnings.warn(
            "records with zero density under every component; uniform responsibilities assigned",
            stacklevel=3,
        )
    safe_lse = np.where(bad, 0.0, lse)
    S = np.exp(L - safe_lse[:, None])
    if np.any(bad):
        S[bad] = 1.0 / K
    rowdev = float(np.max(np.abs(S.sum(axis=1) - 1.0)))
    return S, rowdev


def initialize(
    data: Dataset,
    config: EMConfig,
    rng: np.random.Generator,
    kernel: str = "gaussian",
    bandwidth: float | None = None,
) -> tuple[MixtureParams, np.ndarray]:
    """Random hard assignment into k_init groups, equal initial proportions,
    and per-group Cox fits. Returns (params, responsibilities)."""
    h = default_time_bandwidth(data.y) if bandwidth is None else float(bandwidth)
    ctx = _FitContext(data, kernel, h)
    return _initialize(ctx, config.k_init, rng)


def _initialize(ctx: _FitContext, k_init: int, rng: np.random.Generator):
    n = ctx.n
    if not 1 <= k_init <= n:
        raise ValueError("k_init must lie in [1, n]")
    k = int(k_init)
    events = ctx.ev_mask
    assign = None
    while assign is None:
        for _ in range(100):
            cand = rng.integers(0, k, size=n)
            counts = np.bincount(cand[events], minlength=k)
            if counts.min() > 0:
                assign = cand
                break
        else:
            # some group never received an event row; try a smaller split
            k -= 1
            if k < 1:
                raise NumericalError("could not seed initial components with event rows")
    S = np.zeros((n, k))
    S[np.arange(n), assign] = 1.0
    pi = np.full(k, 1.0 / k)
    comps = []
    for j in range(k):
        fit = ctx.fit_component(S[:, j], np.zeros(ctx.p))
        if k > 1:
            # the initial baselines must place positive mass at every event
            # time: a hard partition gives each component exactly zero mass at
            # the other groups' events, and the first E-step would then return
            # the starting assignment unchanged, freezing the split
            w = (1.0 - INIT_MASS_FLOOR) * S[:, j] + INIT_MASS_FLOOR / k
            inc = ctx.increments(w, fit.beta)
            baseline = BaselineHazard(
                event_times=ctx.grid, increments=inc, kernel=ctx.kernel, bandwidth=ctx.bandwidth
            )
            fit = ComponentFit(
                beta=fit.beta,
                baseline=baseline,
                loglik=fit.loglik,
                converged=fit.converged,
                iterations=fit.iterations,
            )
        comps.append(fit)
    return MixtureParams(pi=pi, components=comps), S


def e_step(data: Dataset, params: MixtureParams) -> np.ndarray:
    """Posterior component responsibilities, rows on the simplex.

    Uses the kernel-smoothed component densities so it applies to any data,
    not just the records the model was fitted on. Computed in log space; a
    record with zero density under every component gets a uniform row and
    triggers a warning.
    """
    logd = np.column_stack([component_log_density(data, comp) for comp in params.components])
    S, _ = _softmax_rows(params.pi, logd)
    return S


def update_mixing_proportions(S: np.ndarray, pi_prev: np.ndarray, spec: PenaltySpec) -> np.ndarray:
    """Penalized M-step update of the mixing proportions.

    Maximizes sum_k colsum_k log pi_k - n * level * sum_k g_k pi_k on the
    simplex, where g_k is the local linear approximation slope of the penalty
    at pi_prev. The maximizer is pi_k = colsum_k / (rho + n * level * g_k) with
    rho chosen so the proportions sum to one.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise ValueError("responsibilities must be a 2-d array")
    n, K = S.shape
    pi_prev = np.asarray(pi_prev, dtype=float)
    if pi_prev.shape != (K,):
        raise ValueError("pi_prev length must match the responsibility columns")
    colsum = S.sum(axis=0)
    lam = spec.level
    if lam == 0.0:
        return colsum / n
    g = np.array([lla_coefficient(spec, float(p)) for p in pi_prev])
    shift = n * lam * g
    active = colsum > 0.0
    if not np.any(active):
        raise NumericalError("responsibility matrix carries no mass")
    if np.all(shift[active] == 0.0):
        return colsum / n

    ca = colsum[active]
    sa = shift[active]

    def excess(rho: float) -> float:
        return float(np.sum(ca / (rho + sa)) - 1.0)

    hi = float(n)  # excess(n) <= 0 because colsums total n and shifts are nonnegative
    if excess(hi) == 0.0:
        rho = hi
    else:
        lo = -float(np.min(sa))
        span = hi - lo
        bracket = None
        for j in range(1, 1100):
            cand = lo + span * 0.5**j
            if excess(cand) > 0.0:
                bracket = cand
                break
        if bracket is None:
            raise NumericalError(
                f"mixing-proportion update is infeasible at penalty level {lam!r}"
            )
        rho = brentq(excess, bracket, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=256)
    with np.errstate(divide="ignore", invalid="ignore"):
        pi = np.where(active, colsum / (rho + shift), 0.0)
    if np.any(pi[active] <= 0.0) or not np.all(np.isfinite(pi)):
        raise NumericalError(
            f"mixing-proportion update produced a nonpositive denominator at penalty level {lam!r}"
        )
    total = float(pi.sum())
    if abs(total - 1.0) > 1e-12:
        pi = pi / total
    return pi


def _prune_mask(pi: np.ndarray, spec: PenaltySpec) -> np.ndarray:
    keep = pi >= spec.prune_threshold
    if not np.any(keep):
        if pi.size == 1:
            return np.ones(1, dtype=bool)
        raise NumericalError(
            f"every component fell below the prune threshold at penalty level {spec.level!r}"
        )
    return keep


def _apply_prune(pi, components, S, keep):
    pi2 = pi[keep]
    pi2 = pi2 / pi2.sum()
    comps = [c for c, k in zip(components, keep) if k]
    S2 = S[:, keep]
    rows = S2.sum(axis=1, keepdims=True)
    S2 = np.where(rows > 0, S2 / np.where(rows > 0, rows, 1.0), 1.0 / len(comps))
    return pi2, comps, S2


def prune_components(
    params: MixtureParams, S: np.ndarray, spec: PenaltySpec
) -> tuple[MixtureParams, np.ndarray]:
    """Drop components whose proportion fell below the prune threshold,
    renormalizing the survivors and the responsibility rows. The last
    component is never removed."""
    keep = _prune_mask(params.pi, spec)
    if np.all(keep):
        return params, S
    pi2, comps, S2 = _apply_prune(params.pi, params.components, S, keep)
    return MixtureParams(pi=pi2, components=comps), S2


def observed_loglik(data: Dataset, params: MixtureParams) -> float:
    """Unpenalized observed-data mixture log-likelihood."""
    logd = np.column_stack([component_log_density(data, comp) for comp in params.components])
    return _observed_from_logd(params.pi, logd)


def _observed_from_logd(pi: np.ndarray, logd: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        L = np.log(pi)[None, :] + logd
    return float(np.sum(logsumexp(L, axis=1)))


def _penalty_total(pi: np.ndarray, spec: PenaltySpec, n: int) -> float:
    if spec.level == 0.0:
        return 0.0
    return n * spec.level * sum(log_scale_term(spec, float(p)) for p in pi)


def penalized_observed_loglik(data: Dataset, params: MixtureParams, spec: PenaltySpec) -> float:
    """Observed log-likelihood minus n * level * sum_k [log(eps + p(pi_k)) - log(eps)]."""
    return observed_loglik(data, params) - _penalty_total(params.pi, spec, data.n)


def complete_data_loglik(data: Dataset, params: MixtureParams, S: np.ndarray) -> float:
    """sum_ik s_ik [log pi_k + log f_k(i)], with 0 * (-inf) treated as 0."""
    S = np.asarray(S, dtype=float)
    logd = np.column_stack([component_log_density(data, comp) for comp in params.components])
    with np.errstate(divide="ignore"):
        L = np.log(params.pi)[None, :] + logd
    terms = np.where(S > 0, S * L, 0.0)
    return float(np.sum(terms))


def check_convergence(current: float, previous: float, config: EMConfig) -> bool:
    """True when the step satisfies the absolute and relative criteria together."""
    diff = abs(current - previous)
    abs_ok = diff < config.eps_abs
    if current == 0.0:
        return abs_ok
    return abs_ok and (diff / abs(current) < config.eps_rel)


# relative tolerance for flagging a drop in the tracked objective
MONOTONICITY_RTOL = 1e-8


def monotonicity_failures(history) -> list[tuple[int, float]]:
    """Steps where the tracked objective dropped beyond 1e-8 * (1 + |value|).

    The per-iteration objective plugs the kernel-smoothed baseline into the
    observed log-likelihood, which is not the exact quantity the profile
    M-step maximizes, so small decreases can occur. They are recorded as
    (iteration index, drop) pairs rather than raised.
    """
    out: list[tuple[int, float]] = []
    for i in range(1, len(history)):
        diff = history[i] - history[i - 1]
        tol = MONOTONICITY_RTOL * (1.0 + abs(history[i]))
        if diff < -tol:
            out.append((i, float(diff)))
    return out


@dataclass
class _EMRun:
    params: MixtureParams
    responsibilities: np.ndarray
    history: list[float]
    converged: bool
    iterations: int
    row_dev: float
    pi_dev: float
    prune_events: int


def _pen_value(ctx: _FitContext, logd: np.ndarray, pi: np.ndarray, spec: PenaltySpec) -> float:
    return _observed_from_logd(pi, logd) - _penalty_total(pi, spec, ctx.n)


def _run_em(ctx: _FitContext, spec: PenaltySpec, config: EMConfig, rng: np.random.Generator) -> _EMRun:
    params, _ = _initialize(ctx, min(config.k_init, ctx.n), rng)
    logd = ctx.all_log_densities(params)
    ll = _pen_value(ctx, logd, params.pi, spec)
    history = [ll]
    row_dev = 0.0
    pi_dev = 0.0
    converged = False
    iterations = 0
    prune_events = 0
    for iterations in range(1, config.max_iterations + 1):
        S, dev = _softmax_rows(params.pi, logd)
        row_dev = max(row_dev, dev)
        pi_new = update_mixing_proportions(S, params.pi, spec)
        pi_dev = max(pi_dev, abs(float(pi_new.sum()) - 1.0))
        keep = _prune_mask(pi_new, spec)
        comps = params.components
        if not np.all(keep):
            prune_events += int(np.sum(~keep))
            pi_new, comps, S = _apply_prune(pi_new, comps, S, keep)
            pi_dev = max(pi_dev, abs(float(pi_new.sum()) - 1.0))
            logd = logd[:, keep]
            # responsibilities must reflect the reduced model before refitting
            S, dev = _softmax_rows(pi_new, logd)
            row_dev = max(row_dev, dev)
        new_comps = [ctx.refit_component(S[:, k], comp) for k, comp in enumerate(comps)]
        params = MixtureParams(pi=pi_new, components=new_comps)
        logd = ctx.all_log_densities(params)
        ll_new = _pen_value(ctx, logd, params.pi, spec)
        history.append(ll_new)
        if check_convergence(ll_new, ll, config):
            converged = True
            ll = ll_new
            break
        ll = ll_new
    S, dev = _softmax_rows(params.pi, logd)
    row_dev = max(row_dev, dev)
    return _EMRun(
        params=params,
        responsibilities=S,
        history=history,
        converged=converged,
        iterations=iterations,
        row_dev=row_dev,
        pi_dev=pi_dev,
        prune_events=prune_events,
    )


def _destandardize(params: MixtureParams, record) -> MixtureParams:
    comps = []
    for comp in params.components:
        beta = record.original_beta(comp.beta)
        offset = record.linear_offset(comp.beta)
        inc = comp.baseline.increments * math.exp(-offset)
        if not np.all(np.isfinite(inc)):
            raise NumericalError(
                "baseline increments overflowed while mapping back to the original covariate scale"
            )
        baseline = BaselineHazard(
            event_times=comp.baseline.event_times,
            increments=inc,
            kernel=comp.baseline.kernel,
            bandwidth=comp.baseline.bandwidth,
        )
        comps.append(
            ComponentFit(
                beta=beta,
                baseline=baseline,
                loglik=comp.loglik,
                converged=comp.converged,
                iterations=comp.iterations,
            )
        )
    return MixtureParams(pi=params.pi, components=comps)


def _distinct_components(params: MixtureParams, tol: float = DISTINCT_TOL) -> bool:
    for a in range(params.K):
        for b in range(a + 1, params.K):
            diff = np.max(np.abs(params.components[a].beta - params.components[b].beta))
            if diff < tol:
                return False
    return True


def fit_mixture(
    data: Dataset,
    spec: PenaltySpec,
    config: EMConfig | None = None,
    kernel: str = "gaussian",
    bandwidth: float | None = None,
) -> FittedModel:
    """Fit a penalized Cox mixture by EM with random restarts.

    Covariates are standardized internally and every reported quantity is
    mapped back to the original scale. The best restart by final penalized
    observed log-likelihood wins; components are ordered by decreasing
    proportion.

    Parameters
    ----------
    data : Dataset
    spec : PenaltySpec
        Penalty kind, level, and pruning threshold.
    config : EMConfig, optional
        Initial number of components, restart count, iteration budget,
        convergence tolerances, and the seed all randomness derives from.
    kernel, bandwidth :
        Baseline-hazard smoothing; bandwidth defaults to sd(y) * n^(-1/5).

    Raises
    ------
    NumericalError
        If every restart fails.
    """
    config = EMConfig() if config is None else config
    if config.k_init > data.n:
        raise ValueError("k_init cannot exceed the number of records")
    std_data, record = standardize_covariates(data)
    h = default_time_bandwidth(data.y) if bandwidth is None else float(bandwidth)
    ctx = _FitContext(std_data, kernel, h)
    children = np.random.SeedSequence(config.seed).spawn(config.restarts)
    best: _EMRun | None = None
    failures: list[str] = []
    row_dev = 0.0
    pi_dev = 0.0
    for child in children:
        rng = np.random.default_rng(child)
        try:
            run = _run_em(ctx, spec, config, rng)
        except NumericalError as exc:
            failures.append(str(exc))
            continue
        row_dev = max(row_dev, run.row_dev)
        pi_dev = max(pi_dev, run.pi_dev)
        if best is None or run.history[-1] > best.history[-1]:
            best = run
    if best is None:
        raise NumericalError(
            "every EM restart failed: " + "; ".join(failures[:3]) + ("..." if len(failures) > 3 else "")
        )
    order = np.argsort(-best.params.pi, kind="stable")
    ordered = MixtureParams(
        pi=best.params.pi[order], components=[best.params.components[int(k)] for k in order]
    )
    params = _destandardize(ordered, record)
    distinct = _distinct_components(params)
    if not distinct:
        warnings.warn("fitted components are not pairwise distinct", stacklevel=2)
    drops = monotonicity_failures(best.history)
    if drops and spec.level == 0.0 and best.prune_events == 0:
        # classical EM promises ascent here; the smoothed plug-in broke it
        warnings.warn(
            f"objective decreased beyond tolerance at {len(drops)} iteration(s); "
            f"largest drop {min(d for _, d in drops):.3e}",
            stacklevel=2,
        )
    return FittedModel(
        params=params,
        spec=spec,
        seed=config.seed,
        history=list(best.history),
        responsibilities=best.responsibilities[:, order],
        config=config,
        diagnostics={
            "responsibility_row_max_dev": row_dev,
            "pi_sum_max_dev": pi_dev,
            "restart_failures": failures,
            "converged": best.converged,
            "iterations": best.iterations,
            "prune_events": best.prune_events,
            "monotonicity_failures": drops,
        },
        distinct=distinct,
    )


def _fmt_float(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def _fmt_vector(vals) -> str:
    return "[" + ", ".join(_fmt_float(v) for v in vals) + "]"


def _fmt_matrix(rows) -> str:
    return "[" + ", ".join(_fmt_vector(r) for r in rows) + "]"


def model_to_json(model: FittedModel) -> str:
    """Serialize a fitted model with 17-significant-digit reals and a fixed field order."""
    spec = model.spec
    comps = model.params.components
    base = comps[0].baseline
    shape = "null" if spec.shape is None else _fmt_float(spec.shape)
    lines = [
        "{",
        f'  "penalty": {json.dumps(spec.kind)},',
        f'  "level": {_fmt_float(spec.level)},',
        f'  "shape": {shape},',
        f'  "epsilon": {_fmt_float(spec.epsilon)},',
        f'  "K": {model.params.K},',
        f'  "pi": {_fmt_vector(model.params.pi)},',
        f'  "beta": {_fmt_matrix(c.beta for c in comps)},',
        '  "baseline": {',
        f'    "event_times": {_fmt_vector(base.event_times)},',
        f'    "increments": {_fmt_matrix(c.baseline.increments for c in comps)},',
        f'    "kernel": {json.dumps(base.kernel)},',
        f'    "bandwidth": {_fmt_float(base.bandwidth)}',
        "  },",
        f'  "history": {_fmt_vector(model.history)},',
        f'  "seed": {int(model.seed)}',
        "}",
    ]
    return "\n".join(lines) + "\n"


def model_from_json(text: str) -> FittedModel:
    """Rebuild a FittedModel from its JSON form (responsibilities and config are not stored)."""
    raw = json.loads(text)
    spec = PenaltySpec(
        kind=raw["penalty"],
        level=float(raw["level"]),
        shape=None if raw.get("shape") is None else float(raw["shape"]),
        epsilon=float(raw["epsilon"]),
    )
    times = np.asarray(raw["baseline"]["event_times"], dtype=float)
    kernel = raw["baseline"]["kernel"]
    bandwidth = float(raw["baseline"]["bandwidth"])
    comps = []
    for beta, inc in zip(raw["beta"], raw["baseline"]["increments"]):
        baseline = BaselineHazard(
            event_times=times, increments=np.asarray(inc, dtype=float), kernel=kernel, bandwidth=bandwidth
        )
        comps.append(
            ComponentFit(
                beta=np.asarray(beta, dtype=float),
                baseline=baseline,
                loglik=float("nan"),
                converged=True,
                iterations=0,
            )
        )
    if len(comps) != int(raw["K"]):
        raise ValueError("component count disagrees with K")
    params = MixtureParams(pi=np.asarray(raw["pi"], dtype=float), components=comps)
    return FittedModel(
        params=params,
        spec=spec,
        seed=int(raw["seed"]),
        history=[float(v) for v in raw["history"]],
    )


def save_model(model: FittedModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path: str) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())
