"""Two-stage hyperparameter optimisation.

Stage one is a Bayesian search with a tree-structured Parzen estimator:
after a random startup phase, observed trials are split at a quantile of
the objective into good and bad sets, each parameter's good/bad densities
are modelled with adaptive-bandwidth Parzen mixtures (categorical counts
for discrete choices), and the next candidate is the member of a sampled
batch that maximises the good-to-bad density ratio. Stage two re-optimises
the best grid cells from scratch with a small genetic algorithm and checks
that both optimisers agree on every hyperparameter within a percentage
margin.

Objectives are minimised; trials that raise are recorded as failed and
excluded from the density models.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, OptimizationError


# ---------------------------------------------------------------------------
# Search-space domains


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ConfigError(f"empty continuous domain [{self.lo}, {self.hi}]")
        if self.log and self.lo <= 0:
            raise ConfigError("log-scaled domain must be strictly positive")


@dataclass(frozen=True)
class Integer:
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ConfigError(f"empty integer domain [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def __post_init__(self) -> None:
        if not self.choices:
            raise ConfigError("categorical domain must offer at least one choice")


def Boolean(default_first: bool = True) -> Categorical:
    return Categorical((default_first, not default_first))


Domain = Continuous | Integer | Categorical


@dataclass(frozen=True)
class SearchSpace:
    params: dict[str, Domain]

    def sample(self, rng: np.random.Generator) -> dict:
        out = {}
        for name in self.params:  # insertion order keeps draws deterministic
            out[name] = _sample_domain(self.params[name], rng)
        return out

    def contains(self, assignment: dict) -> bool:
        if set(assignment) != set(self.params):
            return False
        for name, domain in self.params.items():
            v = assignment[name]
            if isinstance(domain, Continuous):
                if not (domain.lo <= v <= domain.hi):
                    return False
            elif isinstance(domain, Integer):
                if not (isinstance(v, (int, np.integer))
                        and domain.lo <= v <= domain.hi):
                    return False
            elif v not in domain.choices:
                return False
        return True

    def midpoint(self) -> dict:
        """Centre of every domain: arithmetic (or geometric, for log scales)
        midpoint for numeric ranges, first listed choice for categoricals."""
        out = {}
        for name, domain in self.params.items():
            if isinstance(domain, Continuous):
                if domain.log:
                    out[name] = math.sqrt(domain.lo * domain.hi)
                else:
                    out[name] = 0.5 * (domain.lo + domain.hi)
            elif isinstance(domain, Integer):
                out[name] = (domain.lo + domain.hi) // 2
            else:
                out[name] = domain.choices[0]
        return out


def _sample_domain(domain: Domain, rng: np.random.Generator):
    if isinstance(domain, Continuous):
        if domain.log:
            return float(np.exp(rng.uniform(np.log(domain.lo), np.log(domain.hi))))
        return float(rng.uniform(domain.lo, domain.hi))
    if isinstance(domain, Integer):
        return int(rng.integers(domain.lo, domain.hi + 1))
    return domain.choices[int(rng.integers(len(domain.choices)))]


# ---------------------------------------------------------------------------
# Trials and results


@dataclass(frozen=True)
class Trial:
    assignment: dict
    value: float  # NaN when the evaluation failed
    ok: bool


@dataclass(frozen=True)
class OptimizationResult:
    best_params: dict
    best_objective: float
    trials: tuple[Trial, ...]
    budget_used: int

    def best_trace(self) -> list[float]:
        """Running best objective after each successful trial."""
        trace, best = [], math.inf
        for t in self.trials:
            if t.ok:
                best = min(best, t.value)
            trace.append(best)
        return trace


def _evaluate(objective, assignment: dict) -> Trial:
    try:
        value = float(objective(assignment))
    except Exception:
        return Trial(assignment, math.nan, False)
    if not math.isfinite(value):
        return Trial(assignment, math.nan, False)
    return Trial(assignment, value, True)


def _finish(trials: list[Trial], budget: int) -> OptimizationResult:
    ok = [t for t in trials if t.ok]
    if not ok:
        raise OptimizationError("every trial failed; no result available")
    best = min(ok, key=lambda t: t.value)
    return OptimizationResult(dict(best.assignment), best.value,
                              tuple(trials), budget)


# ---------------------------------------------------------------------------
# Tree-structured Parzen estimator


class _ParzenMixture:
    """Adaptive-bandwidth Gaussian mixture over a bounded 1-D domain, with a
    wide prior component at the centre to keep exploration alive."""

    def __init__(self, values: np.ndarray, lo: float, hi: float) -> None:
        self.lo, self.hi = lo, hi
        span = hi - lo
        mus = np.append(values, 0.5 * (lo + hi))
        order = np.argsort(mus)
        sorted_mus = mus[order]
        sigmas_sorted = np.empty_like(sorted_mus)
        if sorted_mus.size == 1:
            sigmas_sorted[:] = span
        else:
            left = np.diff(sorted_mus, prepend=sorted_mus[0])
            right = np.diff(sorted_mus, append=sorted_mus[-1])
            sigmas_sorted = np.maximum(left, right)
        sigma_min = span / min(100.0, 1.0 + mus.size)
        sigmas_sorted = np.clip(sigmas_sorted, sigma_min, span)
        sigmas = np.empty_like(sigmas_sorted)
        sigmas[order] = sigmas_sorted
        sigmas[-1] = span  # the prior component stays wide
        self.mus, self.sigmas = mus, sigmas

    def sample(self, rng: np.random.Generator) -> float:
        i = int(rng.integers(self.mus.size))
        for _ in range(64):
            draw = rng.normal(self.mus[i], self.sigmas[i])
            if self.lo <= draw <= self.hi:
                return float(draw)
        return float(np.clip(rng.normal(self.mus[i], self.sigmas[i]),
                             self.lo, self.hi))

    def log_pdf(self, x: float) -> float:
        z = (x - self.mus) / self.sigmas
        norm = ndtr((self.hi - self.mus) / self.sigmas) - \
            ndtr((self.lo - self.mus) / self.sigmas)
        norm = np.maximum(norm, 1e-12)
        dens = np.exp(-0.5 * z * z) / (self.sigmas * math.sqrt(2.0 * math.pi))
        return float(np.log(max(np.mean(dens / norm), 1e-300)))


class _CategoricalDensity:
    def __init__(self, values: list, choices: tuple) -> None:
        counts = np.array([1.0 + sum(v == c for v in values) for c in choices])
        self.choices = choices
        self.probs = counts / counts.sum()

    def sample(self, rng: np.random.Generator):
        return self.choices[int(rng.choice(len(self.choices), p=self.probs))]

    def log_pdf(self, x) -> float:
        return float(np.log(self.probs[self.choices.index(x)]))


def _numeric_view(domain: Domain, value) -> float:
    if isinstance(domain, Continuous) and domain.log:
        return math.log(value)
    return float(value)


def _from_numeric(domain: Domain, x: float):
    if isinstance(domain, Continuous):
        if domain.log:
            return float(np.clip(math.exp(x), domain.lo, domain.hi))
        return float(np.clip(x, domain.lo, domain.hi))
    return int(np.clip(int(round(x)), domain.lo, domain.hi))


def _domain_bounds(domain: Domain) -> tuple[float, float]:
    if isinstance(domain, Continuous) and domain.log:
        return math.log(domain.lo), math.log(domain.hi)
    return float(domain.lo), float(domain.hi)


def _build_density(domain: Domain, values: list):
    if isinstance(domain, Categorical):
        return _CategoricalDensity(values, domain.choices)
    lo, hi = _domain_bounds(domain)
    numeric = np.array([_numeric_view(domain, v) for v in values])
    return _ParzenMixture(numeric, lo, hi)


def _propose(rng: np.random.Generator, space: SearchSpace, ok: list[Trial],
             gamma: float, n_candidates: int) -> dict:
    ranked = sorted(ok, key=lambda t: t.value)
    n_good = max(1, math.ceil(gamma * len(ranked)))
    good, bad = ranked[:n_good], ranked[n_good:] or ranked[:n_good]

    densities = {}
    for name, domain in space.params.items():
        densities[name] = (
            _build_density(domain, [t.assignment[name] for t in good]),
            _build_density(domain, [t.assignment[name] for t in bad]),
        )

    best_score, best_assignment = -math.inf, None
    for _ in range(n_candidates):
        assignment, score = {}, 0.0
        for name, domain in space.params.items():
            lows, highs = densities[name]
            if isinstance(domain, Categorical):
                value = lows.sample(rng)
                score += lows.log_pdf(value) - highs.log_pdf(value)
            else:
                draw = lows.sample(rng)
                value = _from_numeric(domain, draw)
                at = _numeric_view(domain, value) if isinstance(domain, Integer) \
                    else draw
                score += lows.log_pdf(at) - highs.log_pdf(at)
            assignment[name] = value
        if score > best_score:
            best_score, best_assignment = score, assignment
    return best_assignment


def tpe_optimize(objective, space: SearchSpace, n_trials: int, seed: int,
                 n_startup: int = 10, gamma: float = 0.25,
                 n_candidates: int = 24) -> OptimizationResult:
    """Minimise ``objective`` over ``space`` with ``n_trials`` evaluations."""
    if n_trials < 1:
        raise ConfigError("need at least one trial")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7BE)))
    trials: list[Trial] = []
    for _ in range(n_trials):
        ok = [t for t in trials if t.ok]
        if len(ok) < n_startup or not space.params:
            assignment = space.sample(rng)
        else:
            assignment = _propose(rng, space, ok, gamma, n_candidates)
        trials.append(_evaluate(objective, assignment))
    return _finish(trials, n_trials)


# ---------------------------------------------------------------------------
# Genetic algorithm


def _mutate_gene(domain: Domain, value, rng: np.random.Generator):
    if isinstance(domain, Categorical):
        return domain.choices[int(rng.integers(len(domain.choices)))]
    lo, hi = _domain_bounds(domain)
    x = _numeric_view(domain, value) + rng.normal(0.0, 0.1 * (hi - lo))
    return _from_numeric(domain, float(np.clip(x, lo, hi)))


def ga_optimize(objective, space: SearchSpace, population: int = 20,
                generations: int = 25, seed: int = 42,
                tournament_size: int = 3, crossover_rate: float = 0.9,
                mutation_rate: float = 0.1) -> OptimizationResult:
    """Minimise ``objective`` with tournament selection, uniform crossover,
    per-gene Gaussian/resample mutation, and single-individual elitism."""
    if population < 2:
        raise ConfigError("population must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x6A)))
    names = list(space.params)

    def fitness(trial: Trial) -> float:
        return trial.value if trial.ok else math.inf

    trials: list[Trial] = []
    current: list[Trial] = []
    for _ in range(population):
        trial = _evaluate(objective, space.sample(rng))
        trials.append(trial)
        current.append(trial)

    for _ in range(generations):
        elite = min(current, key=fitness)
        next_gen = [elite]
        while len(next_gen) < population:
            parents = []
            for _ in range(2):
                picks = rng.integers(population, size=tournament_size)
                parents.append(min((current[i] for i in picks), key=fitness))
            if rng.random() < crossover_rate:
                child = {
                    n: parents[int(rng.integers(2))].assignment[n]
                    for n in names
                }
            else:
                child = dict(parents[0].assignment)
            for n in names:
                if rng.random() < mutation_rate:
                    child[n] = _mutate_gene(space.params[n], child[n], rng)
            trial = _evaluate(objective, child)
            trials.append(trial)
            next_gen.append(trial)
        current = next_gen
    return _finish(trials, len(trials))


# ---------------------------------------------------------------------------
# Agreement between the two optimisers


@dataclass(frozen=True)
class ParamAgreement:
    bo_value: object
    ga_value: object
    diff_percent: float | None  # None for categorical/boolean comparisons
    agrees: bool


@dataclass(frozen=True)
class AgreementReport:
    per_param: dict[str, ParamAgreement]
    passed: bool
    tolerance_percent: float
    denominator: str = "bo"  # which side scaled the numeric differences


def agreement_check(bo: dict, ga: dict,
                    tolerance_percent: float = 5.0) -> AgreementReport:
    """Compare two hyperparameter assignments parameter by parameter.

    Numeric values use |bo - ga| / |bo| * 100 (absolute difference * 100
    when the reference value is zero); categorical and boolean values must
    match exactly. The report passes only if every parameter agrees.
    """
    if set(bo) != set(ga):
        raise ConfigError(
            f"assignments name different parameters: "
            f"{sorted(set(bo) ^ set(ga))}"
        )
    per_param: dict[str, ParamAgreement] = {}
    for name in bo:
        b, g = bo[name], ga[name]
        numeric = isinstance(b, (int, float)) and not isinstance(b, bool) \
            and isinstance(g, (int, float)) and not isinstance(g, bool)
        if numeric:
            if b == 0:
                diff = abs(b - g) * 100.0
            else:
                diff = abs(b - g) / abs(b) * 100.0
            per_param[name] = ParamAgreement(b, g, diff,
                                             diff <= tolerance_percent)
        else:
            per_param[name] = ParamAgreement(b, g, None, b == g)
    return AgreementReport(per_param, all(p.agrees for p in per_param.values()),
                           tolerance_percent)


# ---------------------------------------------------------------------------
# Re-optimising the best grid cells


@dataclass(frozen=True)
class TunedCell:
    """A tuned grid cell: its identity, first-stage objective (lower is
    better), winning assignment, and the space it was searched over."""

    cell: object
    objective_value: float
    best_params: dict
    space: SearchSpace


@dataclass(frozen=True)
class ValidationOutcome:
    cell: object
    report: AgreementReport
    ga_result: OptimizationResult


def refine_top_k(grid_results: list[TunedCell], objective_factory, k: int = 5,
                 population: int = 20, generations: int = 25, seed: int = 42,
                 tolerance_percent: float = 5.0) -> list[ValidationOutcome]:
    """Re-optimise the k best cells from scratch with the genetic algorithm
    and report per-parameter agreement against the first-stage winners."""
    if not grid_results:
        raise ConfigError("no tuned cells to validate")
    if k > len(grid_results):
        warnings.warn(
            f"asked for top {k} of {len(grid_results)} cells; validating all"
        )
        k = len(grid_results)
    ranked = sorted(grid_results, key=lambda c: c.objective_value)[:k]
    outcomes = []
    for i, tuned in enumerate(ranked):
        ga_result = ga_optimize(
            objective_factory(tuned.cell), tuned.space,
            population=population, generations=generations,
            seed=seed + i,
        )
        report = agreement_check(tuned.best_params, ga_result.best_params,
                                 tolerance_percent)
        outcomes.append(ValidationOutcome(tuned.cell, report, ga_result))
    return outcomes
