"""Confusion counts, fold-level score summaries, and significance tests.

Scores follow the usual one-vs-rest definitions (precision = TP/(FP+TP),
recall = TP/(TP+FN), specificity = TN/(TN+FP)); a 0/0 ratio yields an
explicit ``None`` marker, never a silent zero. Confidence intervals use the
Student t quantile, and every p-value is computed through the regularized
incomplete beta function rather than a distribution lookup table:

    two-sided t:  p = I_x(df/2, 1/2),        x = df / (df + t^2)
    F upper tail: p = I_x(d2/2, d1/2),       x = d2 / (d2 + d1 * F)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaincinv


class StatsError(Exception):
    pass


class InsufficientFoldsError(StatsError):
    pass


class PairingError(StatsError):
    pass


def _t_two_sided_p(t: float, df: int) -> float:
    t = float(t)
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def _t_critical(df: int, confidence: float = 0.95) -> float:
    """Two-sided t quantile: P(|T_df| > t) = 1 - confidence."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie strictly between 0 and 1")
    x = float(betaincinv(df / 2.0, 0.5, 1.0 - confidence))
    return math.sqrt(df * (1.0 - x) / x)


def _f_upper_p(f: float, d1: int, d2: int) -> float:
    f = float(f)
    if math.isinf(f):
        return 0.0
    x = d2 / (d2 + d1 * f)
    return float(betainc(d2 / 2.0, d1 / 2.0, x))


@dataclass(frozen=True)
class ConfusionMatrix:
    """One-vs-rest counts for a designated positive class."""

    tp: int
    fp: int
    tn: int
    fn: int
    positive_class: object = None

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.positive_class != self.positive_class:
            raise ValueError("cannot add confusions with different positive classes")
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn,
                               self.positive_class)


def confusion(y_true, y_pred, positive_class) -> ConfusionMatrix:
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred must have equal length")
    if len(y_true) == 0:
        raise ValueError("need at least one sample")
    tp = fp = tn = fn = 0
    for t, p in zip(y_true, y_pred):
        if t == positive_class:
            if p == positive_class:
                tp += 1
            else:
                fn += 1
        else:
            if p == positive_class:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, fp, tn, fn, positive_class)


@dataclass(frozen=True)
class Scores:
    """Derived rates; a field is None when its ratio is 0/0."""

    precision: float | None
    recall: float | None
    specificity: float | None
    accuracy: float | None

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "specificity": self.specificity, "accuracy": self.accuracy}


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def scores(cm: ConfusionMatrix) -> Scores:
    return Scores(
        precision=_ratio(cm.tp, cm.fp + cm.tp),
        recall=_ratio(cm.tp, cm.tp + cm.fn),
        specificity=_ratio(cm.tn, cm.tn + cm.fp),
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
    )


@dataclass(frozen=True)
class ScoreSummary:
    """Mean and t confidence interval of one score across folds."""

    score_name: str
    values: tuple
    mean: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {"score": self.score_name, "values": list(self.values),
                "mean": self.mean, "ci_low": self.ci_low, "ci_high": self.ci_high}


def fold_summary(values, score_name: str = "score",
                 confidence: float = 0.95) -> ScoreSummary:
    """mean +/- t(1-(1-confidence)/2, k-1) * s / sqrt(k) over per-fold scores."""
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size < 2:
        raise InsufficientFoldsError(f"need >= 2 fold values, got {vals.size}")
    if np.any(vals < 0.0) or np.any(vals > 1.0):
        raise ValueError("fold scores must lie in [0, 1]")
    k = vals.size
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1))
    half = _t_critical(k - 1, confidence) * sd / math.sqrt(k)
    return ScoreSummary(score_name=score_name, values=tuple(float(v) for v in vals),
                        mean=mean, ci_low=mean - half, ci_high=mean + half)


@dataclass(frozen=True)
class ComparisonResult:
    """Paired t-test over matched fold scores of two configurations."""

    pair: tuple
    mean_diff: float
    p_value: float
    ci_low: float
    ci_high: float
    significant: bool

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "mean_diff": self.mean_diff,
                "p_value": self.p_value, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "significant": self.significant}


def paired_compare(values_a, values_b, pair: tuple = ("a", "b"),
                   alpha: float = 0.05, confidence: float = 0.95) -> ComparisonResult:
    """Two-sided paired t-test on per-fold differences (same fold plan assumed).

    All-zero differences give p = 1 and CI [0, 0] (no evidence of any
    difference). Constant non-zero differences are the opposite limit: the
    interval collapses onto the mean and p = 0.
    """
    a = np.asarray(list(values_a), dtype=np.float64)
    b = np.asarray(list(values_b), dtype=np.float64)
    if a.size != b.size:
        raise PairingError(f"fold counts differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise InsufficientFoldsError(f"need >= 2 fold values, got {a.size}")
    d = a - b
    k = d.size
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        p = 1.0 if mean == 0.0 else 0.0
        lo = hi = mean
    else:
        t = mean / (sd / math.sqrt(k))
        p = _t_two_sided_p(t, k - 1)
        half = _t_critical(k - 1, confidence) * sd / math.sqrt(k)
        lo, hi = mean - half, mean + half
    return ComparisonResult(pair=pair, mean_diff=mean, p_value=p,
                            ci_low=lo, ci_high=hi, significant=p < alpha)


@dataclass(frozen=True)
class AnovaResult:
    group_names: tuple
    group_sizes: tuple
    group_means: tuple
    f_statistic: float | None
    df_between: int
    df_within: int
    p_value: float | None

    def to_dict(self) -> dict:
        return {"groups": list(self.group_names), "sizes": list(self.group_sizes),
                "means": list(self.group_means), "f": self.f_statistic,
                "df_between": self.df_between, "df_within": self.df_within,
                "p": self.p_value}


def oneway_anova(groups, names=None) -> AnovaResult:
    """One-way fixed-effects ANOVA over real or boolean observation vectors.

    Degenerate inputs keep explicit markers: zero scatter everywhere gives
    F = None (0/0), zero within-group scatter with distinct means gives
    F = inf and p = 0.
    """
    arrays = [np.asarray(list(g), dtype=np.float64) for g in groups]
    g = len(arrays)
    if g < 2:
        raise ValueError("need at least 2 groups")
    for i, arr in enumerate(arrays):
        if arr.size < 2:
            raise ValueError(f"group {i} has {arr.size} observations, need >= 2")
    if names is None:
        names = tuple(f"group{i}" for i in range(g))
    names = tuple(names)
    if len(names) != g:
        raise ValueError("names length must match group count")

    sizes = tuple(int(a.size) for a in arrays)
    n_total = sum(sizes)
    means = tuple(float(a.mean()) for a in arrays)
    grand = float(np.concatenate(arrays).mean())
    ssb = float(sum(n * (m - grand) ** 2 for n, m in zip(sizes, means)))
    ssw = float(sum(((a - m) ** 2).sum() for a, m in zip(arrays, means)))
    df_b, df_w = g - 1, n_total - g

    if ssw == 0.0:
        if ssb == 0.0:
            f_stat, p = None, None
        else:
            f_stat, p = float("inf"), 0.0
    else:
        f_stat = (ssb / df_b) / (ssw / df_w)
        p = _f_upper_p(f_stat, df_b, df_w)
    return AnovaResult(group_names=names, group_sizes=sizes, group_means=means,
                       f_statistic=f_stat, df_between=df_b, df_within=df_w, p_value=p)


# --- human-readable table rendering -----------------------------------------

def format_mean_ci(mean: float, lo: float, hi: float) -> str:
    return f"{mean:.7f} [{lo:.7f}, {hi:.7f}]"


def _pct(v: float | None) -> str:
    return "NA" if v is None else f"{round(v * 100):.0f}"


def format_rate_row(name: str, sc: Scores) -> str:
    """Row of rounded percentages: accuracy, recall, specificity, precision."""
    return (f"{name}: {_pct(sc.accuracy)}, {_pct(sc.recall)}, "
            f"{_pct(sc.specificity)}, {_pct(sc.precision)}")


def render_summary_table(summaries: list[ScoreSummary], title: str = "Average scores") -> str:
    width = max((len(s.score_name) for s in summaries), default=10)
    lines = [title, "-" * len(title)]
    for s in summaries:
        lines.append(f"{s.score_name:<{width}}  {format_mean_ci(s.mean, s.ci_low, s.ci_high)}")
    return "\n".join(lines)


def render_comparison_table(results: list[ComparisonResult],
                            title: str = "Pairwise comparisons") -> str:
    names = [" vs ".join(str(p) for p in r.pair) for r in results]
    width = max((len(n) for n in names), default=10)
    lines = [title, "-" * len(title)]
    for name, r in zip(names, results):
        flag = " *" if r.significant else ""
        lines.append(f"{name:<{width}}  p={r.p_value:.4f}  "
                     f"CI [{r.ci_low:.8f}, {r.ci_high:.8f}]{flag}")
    return "\n".join(lines)


def render_anova(result: AnovaResult, title: str = "One-way ANOVA") -> str:
    lines = [title, "-" * len(title)]
    for name, size, mean in zip(result.group_names, result.group_sizes,
                                result.group_means):
        lines.append(f"{name}: n={size}, mean={mean:.4f}")
    f_txt = "undefined" if result.f_statistic is None else f"{result.f_statistic:.6f}"
    p_txt = "undefined" if result.p_value is None else f"{result.p_value:.4f}"
    lines.append(f"F({result.df_between}, {result.df_within}) = {f_txt}, p = {p_txt}")
    return "\n".join(lines)
