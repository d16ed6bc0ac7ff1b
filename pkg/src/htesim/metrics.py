"""Performance measures over the replication-by-validation-unit tensor.

Per validation unit v, over replications r = 1..R:

    MSE_v   = (1/R) sum_r (truth_v - pred_rv)^2
    Bias_v  = (1/R) sum_r pred_rv - truth_v
    SD_v    = sqrt((1/R) sum_r (pred_rv - mean_r pred_rv)^2)

so MSE_v = Bias_v^2 + SD_v^2 exactly. Summaries over units add the standard
error of the mean MSE (the dispersion of per-replication MSEs), the lower
median of MSE_v, the Jarque-Bera rejection fraction at the 5% level, mean
skewness/kurtosis (raw, population moments), and the replication-level mean
correlation and variance ratio against the truth. The scalar (highest
aggregation) level reports a single MSE/bias/SD plus the p-value of one
Jarque-Bera test across replications.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import format_float

LEVELS = ("iate", "gate", "ate")
JB_ALPHA = 0.05


@dataclass(frozen=True)
class PredictionTensor:
    """R x N predictions of one estimator at one aggregation level."""

    values: np.ndarray
    truth: np.ndarray
    estimator_id: str
    level: str
    n_failures: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        t = np.ascontiguousarray(self.truth, dtype=np.float64).ravel()
        if v.ndim != 2:
            raise ValueError("values must be an R x N matrix")
        if t.shape[0] != v.shape[1]:
            raise ValueError("truth length must match the number of prediction columns")
        if not np.isfinite(v).all() or not np.isfinite(t).all():
            raise ValueError("prediction tensor contains NaN or infinite entries")
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "truth", t)

    @property
    def n_replications(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PerUnitMeasures:
    mse: np.ndarray
    abs_bias: np.ndarray
    bias: np.ndarray
    sd: np.ndarray


def per_unit_measures(tensor: PredictionTensor) -> PerUnitMeasures:
    values, truth = tensor.values, tensor.truth
    R = values.shape[0]
    if R < 2:
        raise ValueError(f"need at least 2 replications, got {R}")
    err = values - truth[None, :]
    mse = (err * err).mean(axis=0)
    mean_pred = values.mean(axis=0)
    bias = mean_pred - truth
    dev = values - mean_pred[None, :]
    sd = np.sqrt((dev * dev).mean(axis=0))
    return PerUnitMeasures(mse=mse, abs_bias=np.abs(bias), bias=bias, sd=sd)


def _moments(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-column population variance, skewness, raw kurtosis; NaN when degenerate."""
    dev = values - values.mean(axis=0, keepdims=True)
    m2 = (dev**2).mean(axis=0)
    m3 = (dev**3).mean(axis=0)
    m4 = (dev**4).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(m2 > 0, m3 / np.power(m2, 1.5, where=m2 > 0), np.nan)
        kurt = np.where(m2 > 0, m4 / np.where(m2 > 0, m2 * m2, 1.0), np.nan)
    return m2, skew, kurt


def jarque_bera(samples) -> tuple[float, float]:
    """JB statistic and chi-square(2) upper-tail p-value for one sample."""
    x = np.ascontiguousarray(samples, dtype=np.float64).ravel()
    R = x.shape[0]
    if R < 8:
        raise ValueError(f"need at least 8 observations for the Jarque-Bera test, got {R}")
    m2, skew, kurt = _moments(x[:, None])
    if not m2[0] > 0:
        raise ValueError("degenerate sample: zero variance")
    stat = R / 6.0 * (skew[0] ** 2 + (kurt[0] - 3.0) ** 2 / 4.0)
    return float(stat), float(np.exp(-stat / 2.0))


@dataclass(frozen=True)
class EstimatorPerformance:
    """One report row; ``None`` marks measures that are undefined for the row
    (rendered as '-' in CSV output)."""

    estimator_id: str
    level: str
    n_replications: int
    n_failures: int
    mean_mse: float
    se_mean_mse: float
    median_mse: float | None
    mean_abs_bias: float
    mean_bias: float
    mean_sd: float
    jb_reject_frac: float | None
    jb_degenerate_count: int
    jb_p_value: float | None
    mean_skew: float | None
    mean_kurt: float | None
    corr: float | None
    var_ratio: float | None
    unreliable: bool = False
    best: bool = False


def _lower_median(x: np.ndarray) -> float:
    s = np.sort(x)
    return float(s[(s.shape[0] - 1) // 2])


def summarize(tensor: PredictionTensor, unreliable: bool = False) -> EstimatorPerformance:
    """All report measures for one estimator at one level."""
    values, truth = tensor.values, tensor.truth
    R, N = values.shape
    pum = per_unit_measures(tensor)
    err = values - truth[None, :]
    mse_r = (err * err).mean(axis=1)
    mean_mse = float(pum.mse.mean())
    se_mean_mse = float(np.sqrt(((mse_r - mse_r.mean()) ** 2).mean()))

    m2, skew, kurt = _moments(values)
    degenerate = ~(m2 > 0)
    n_deg = int(degenerate.sum())
    ok = ~degenerate
    jb_p = None
    jb_frac = None
    if tensor.level == "ate":
        if ok[0]:
            _, jb_p = jarque_bera(values[:, 0]) if R >= 8 else (None, None)
    else:
        if ok.any():
            stat = R / 6.0 * (skew[ok] ** 2 + (kurt[ok] - 3.0) ** 2 / 4.0)
            pvals = np.exp(-stat / 2.0)
            jb_frac = float((pvals < JB_ALPHA).mean())
    mean_skew = float(skew[ok].mean()) if ok.any() else None
    mean_kurt = float(kurt[ok].mean()) if ok.any() else None

    corr = None
    var_ratio = None
    truth_var = float(truth.var())
    if truth_var > 0 and tensor.level != "ate":
        pred_var = values.var(axis=1)
        cov = ((values - values.mean(axis=1, keepdims=True)) * (truth - truth.mean())[None, :]).mean(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = np.where(pred_var > 0, cov / np.sqrt(pred_var * truth_var, where=pred_var > 0), 0.0)
        corr = float(rho.mean())
        var_ratio = float((pred_var / truth_var).mean())

    return EstimatorPerformance(
        estimator_id=tensor.estimator_id,
        level=tensor.level,
        n_replications=R,
        n_failures=tensor.n_failures,
        mean_mse=mean_mse,
        se_mean_mse=se_mean_mse,
        median_mse=None if tensor.level == "ate" else _lower_median(pum.mse),
        mean_abs_bias=float(pum.abs_bias.mean()),
        mean_bias=float(pum.bias.mean()),
        mean_sd=float(pum.sd.mean()),
        jb_reject_frac=jb_frac,
        jb_degenerate_count=n_deg,
        jb_p_value=jb_p,
        mean_skew=mean_skew,
        mean_kurt=mean_kurt,
        corr=corr,
        var_ratio=var_ratio,
        unreliable=unreliable,
    )


def flag_best(rows: list[EstimatorPerformance]) -> list[EstimatorPerformance]:
    """Flag the lowest mean-MSE row and every row within two simulation
    standard errors of it."""
    from dataclasses import replace

    if not rows:
        return rows
    best_row = min(rows, key=lambda r: r.mean_mse)
    cutoff = best_row.mean_mse + 2.0 * best_row.se_mean_mse
    return [replace(r, best=bool(r.mean_mse <= cutoff)) for r in rows]


_UNIT_COLUMNS = (
    "mean_mse", "se_mean_mse", "median_mse", "mean_abs_bias", "mean_bias", "mean_sd",
    "jb_reject_frac", "mean_skew", "mean_kurt", "corr", "var_ratio",
)
_ATE_COLUMNS = ("mean_mse", "se_mean_mse", "mean_bias", "mean_sd", "mean_skew", "mean_kurt", "jb_p_value")


def report_columns(level: str) -> tuple[str, ...]:
    measures = _ATE_COLUMNS if level == "ate" else _UNIT_COLUMNS
    return ("estimator",) + measures + ("best", "n_failures", "unreliable", "jb_degenerate_count")


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def write_report_csv(path, rows: list[EstimatorPerformance], level: str) -> None:
    columns = report_columns(level)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.estimator_id] + [_cell(getattr(row, c)) for c in columns[1:]])


def format_report_table(rows: list[EstimatorPerformance], level: str) -> str:
    """Aligned human-readable table."""
    columns = report_columns(level)
    cells = [list(columns)]
    for row in rows:
        rendered = [row.estimator_id]
        for c in columns[1:]:
            v = getattr(row, c)
            if v is None:
                rendered.append("-")
            elif isinstance(v, bool):
                rendered.append("*" if v else "")
            elif isinstance(v, (int, np.integer)):
                rendered.append(str(int(v)))
            else:
                rendered.append(f"{v:.4g}")
        cells.append(rendered)
    widths = [max(len(r[j]) for r in cells) for j in range(len(columns))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"
