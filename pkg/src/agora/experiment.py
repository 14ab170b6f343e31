"""Mechanism-experiment harness: condition assignment and statistics.

The study design crosses two voting methods with two power policies,
giving exactly four conditions. This module assigns participants to
conditions by seeded block randomization, summarizes ballots as
per-option ratio statistics, and provides the small statistics toolkit
the analysis needs: OLS with classical standard errors and t-based
p-values (supporting indicator regressors and interactions), Pearson
correlation, and grouped Likert / democracy-scale means.

The Student-t tail probability is computed in-process via the
regularized incomplete beta function (continued fraction, Lentz's
method), accurate to well below 1e-6 over the ranges used here, so the
harness has no statistics-package dependency to disagree with.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInput
from .ledger import PolicyKind
from .spaces import VotingMethod
from .tally import Ballot, RatioVector, ratio_vector


@dataclass(frozen=True)
class Condition:
    method: VotingMethod
    power: PolicyKind

    @property
    def key(self) -> str:
        m = "q" if self.method is VotingMethod.QUADRATIC else "w"
        p = "e" if self.power is PolicyKind.EQUAL else "p"
        return m + p

    def label(self) -> str:
        m = "quadratic" if self.method is VotingMethod.QUADRATIC else "weighted"
        p = "equal" if self.power is PolicyKind.EQUAL else "20/80"
        return f"{m}+{p}"


# Fixed reporting order: quadratic+equal, quadratic+20/80, weighted+equal,
# weighted+20/80. CLI flags use the short keys qe/qp/we/wp.
CONDITIONS: tuple[Condition, ...] = (
    Condition(VotingMethod.QUADRATIC, PolicyKind.EQUAL),
    Condition(VotingMethod.QUADRATIC, PolicyKind.PARETO_20_80),
    Condition(VotingMethod.WEIGHTED, PolicyKind.EQUAL),
    Condition(VotingMethod.WEIGHTED, PolicyKind.PARETO_20_80),
)

CONDITION_BY_KEY: dict[str, Condition] = {c.key: c for c in CONDITIONS}


@dataclass(frozen=True)
class AssignmentPlan:
    seed: int
    assignment: Mapping[str, Condition]
    counts: Mapping[Condition, int]


def assign(participants: Sequence[str], seed: int) -> AssignmentPlan:
    """Seeded block randomization over the four conditions.

    Counts are balanced within 1 for any n, and the plan is a pure
    function of (participants as a set, seed). Participants never see
    their condition; callers keep the plan server-side.
    """
    if not participants:
        raise InvalidInput("participant list is empty")
    addrs = sorted(participants)
    if len(set(addrs)) != len(addrs):
        raise InvalidInput("duplicate participants")
    rng = random.Random(seed)
    rng.shuffle(addrs)
    assignment = {addr: CONDITIONS[i % len(CONDITIONS)] for i, addr in enumerate(addrs)}
    counts = {c: 0 for c in CONDITIONS}
    for c in assignment.values():
        counts[c] += 1
    return AssignmentPlan(seed=seed, assignment=assignment, counts=counts)


@dataclass(frozen=True)
class SummaryCell:
    condition: Condition
    choice: int  # zero-based option index
    mean: float
    std: float
    n: int
    small_sample: bool  # n == 1, std reported as 0 by convention


def condition_summary(ballots_by_condition: Mapping[Condition, Sequence[Ballot]]
                      ) -> list[SummaryCell]:
    """Per-condition, per-option mean and sample (n-1) std of the ballot
    ratio vectors.

    Each ballot is normalized to its ratio vector first, so every
    summarized row sums to 1 across options. All-zero ballots have no
    ratio direction and are excluded from the cell statistics. A
    single-ballot cell reports std 0 with the small-sample flag set.
    """
    cells: list[SummaryCell] = []
    for condition, ballots in ballots_by_condition.items():
        vectors = [ratio_vector(b) for b in ballots]
        vectors = [v for v in vectors if not v.zero_ballot]
        if not vectors:
            raise InvalidInput(f"no nonzero ballots for condition {condition.label()}")
        width = len(vectors[0].ratios)
        data = np.array([v.as_floats() for v in vectors])
        n = len(vectors)
        means = data.mean(axis=0)
        stds = data.std(axis=0, ddof=1) if n > 1 else np.zeros(width)
        for j in range(width):
            cells.append(SummaryCell(
                condition=condition, choice=j,
                mean=float(means[j]), std=float(stds[j]),
                n=n, small_sample=(n == 1),
            ))
    return cells


# --- Student t tail via the regularized incomplete beta function ---------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b), the regularized incomplete beta function."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t_stat: float, df: int) -> float:
    """Two-sided p-value for a t statistic: P(|T_df| >= |t|)."""
    if df <= 0:
        raise InvalidInput("degrees of freedom must be positive")
    if math.isinf(t_stat):
        return 0.0
    if math.isnan(t_stat):
        raise InvalidInput("t statistic is NaN")
    x = df / (df + t_stat * t_stat)
    return betainc_regularized(df / 2.0, 0.5, x)


# --- Ordinary least squares ----------------------------------------------

@dataclass(frozen=True)
class RegressionFit:
    coefficients: tuple[float, ...]
    standard_errors: tuple[float, ...]
    t_stats: tuple[float, ...]
    p_values: tuple[float, ...]
    n: int
    r_squared: float


def ols_fit(X: Sequence[Sequence[float]], y: Sequence[float]) -> RegressionFit:
    """Least-squares fit with classical (homoskedastic) inference.

    The caller supplies the design matrix including its intercept column
    and any indicator or interaction columns. Raises on rank deficiency
    or when there are no residual degrees of freedom.
    """
    Xm = np.asarray(X, dtype=float)
    yv = np.asarray(y, dtype=float)
    if Xm.ndim != 2:
        raise InvalidInput("design matrix must be 2-dimensional")
    n, p = Xm.shape
    if yv.shape != (n,):
        raise InvalidInput("y length does not match design matrix rows")
    if n <= p:
        raise InvalidInput(f"need more observations ({n}) than regressors ({p})")
    if np.linalg.matrix_rank(Xm) < p:
        raise InvalidInput("design matrix is rank deficient")

    beta, _, _, _ = np.linalg.lstsq(Xm, yv, rcond=None)
    residuals = yv - Xm @ beta
    rss = float(residuals @ residuals)
    df = n - p

    # an exact fit (residuals at machine-noise level) has no error
    # variance to do inference with; snap to the degenerate case instead
    # of dividing noise by noise, and zero out the coefficients that are
    # themselves pure rounding noise (constant y gives slope ~1e-16)
    exact_fit = rss <= 1e-24 * max(1.0, float(yv @ yv))
    if exact_fit:
        rss = 0.0
        scale = max(1.0, float(np.max(np.abs(beta))))
        beta = np.where(np.abs(beta) <= 1e-10 * scale, 0.0, beta)
    sigma2 = rss / df
    cov = sigma2 * np.linalg.inv(Xm.T @ Xm)
    ses = np.sqrt(np.maximum(np.diag(cov), 0.0))

    beta_scale = max(1.0, float(np.max(np.abs(beta))))
    t_stats, p_values = [], []
    for b, se in zip(beta, ses):
        if se == 0.0:
            t = 0.0 if abs(b) <= 1e-10 * beta_scale else math.copysign(math.inf, b)
        else:
            t = b / se
        t_stats.append(float(t))
        p_values.append(t_two_sided_p(t, df))

    tss = float(((yv - yv.mean()) ** 2).sum())
    if tss == 0.0:
        r_squared = 1.0 if rss <= 1e-30 else 0.0
    else:
        r_squared = 1.0 - rss / tss
    return RegressionFit(
        coefficients=tuple(float(b) for b in beta),
        standard_errors=tuple(float(s) for s in ses),
        t_stats=tuple(t_stats),
        p_values=tuple(p_values),
        n=n,
        r_squared=r_squared,
    )


@dataclass(frozen=True)
class PearsonResult:
    r: float
    p_value: float
    n: int


def pearson(x: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Pearson correlation with the t-approximation p-value."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    n = len(xv)
    if n != len(yv):
        raise InvalidInput("x and y lengths differ")
    if n < 3:
        raise InvalidInput("need at least 3 pairs")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise InvalidInput("degenerate input: zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) >= 1.0:
        return PearsonResult(r=r, p_value=0.0, n=n)
    t = r * math.sqrt(df / (1.0 - r * r))
    return PearsonResult(r=r, p_value=t_two_sided_p(t, df), n=n)


# --- Survey aggregation ----------------------------------------------------

VDEM_DIMENSIONS = (
    "participatory",
    "deliberative",
    "liberal",
    "egalitarian",
    "rule_of_law",
    "civil_society",
    "judicial_constraints",
)

LIKERT_MIN, LIKERT_MAX = 1, 5


@dataclass(frozen=True)
class SurveyResponse:
    participant: str
    likert_items: Mapping[str, int] = field(default_factory=dict)
    vdem_items: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name, items in (("likert", self.likert_items), ("vdem", self.vdem_items)):
            for key, score in items.items():
                if not (LIKERT_MIN <= score <= LIKERT_MAX):
                    raise InvalidInput(
                        f"{name} item {key} score {score} outside {LIKERT_MIN}..{LIKERT_MAX}"
                    )


def likert_summary(responses_by_condition: Mapping[Condition, Sequence[SurveyResponse]]
                   ) -> dict[Condition, float]:
    """Mean satisfaction score per condition, reported in the fixed
    condition order regardless of input order."""
    out: dict[Condition, float] = {}
    for condition in CONDITIONS:
        responses = responses_by_condition.get(condition)
        if not responses:
            continue
        scores = [s for r in responses for s in r.likert_items.values()]
        if not scores:
            raise InvalidInput(f"no likert items for condition {condition.label()}")
        out[condition] = sum(scores) / len(scores)
    return out


@dataclass(frozen=True)
class DimensionMean:
    dimension: str
    condition: Condition
    mean: float
    n: int  # responses contributing; ones missing the dimension are excluded


def vdem_aggregate(responses_by_condition: Mapping[Condition, Sequence[SurveyResponse]]
                   ) -> list[DimensionMean]:
    """Per-dimension, per-condition means of the democracy-scale items.

    A response missing a dimension is excluded from that dimension's
    mean; the contributing count is reported alongside.
    """
    out: list[DimensionMean] = []
    for condition in CONDITIONS:
        responses = responses_by_condition.get(condition)
        if not responses:
            continue
        for dim in VDEM_DIMENSIONS:
            scores = [r.vdem_items[dim] for r in responses if dim in r.vdem_items]
            if not scores:
                continue
            out.append(DimensionMean(
                dimension=dim, condition=condition,
                mean=sum(scores) / len(scores), n=len(scores),
            ))
    return out
