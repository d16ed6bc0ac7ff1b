"""Semi-synthetic population construction and per-replication sampling.

A population couples covariates and non-treated outcomes (real data from CSV
or a configurable synthetic generator) with synthesized unit-level treatment
effects. The pipeline:

1. obtain the population propensity score (fitted by unpenalized logistic
   regression in CSV mode on the full sample including the treated, who are
   then removed; taken as the known truth in synthetic mode),
2. shift its intercept so the mean score is 0.5 (Newton solve),
3. drop units whose shifted score leaves [0.05, 0.95],
4. synthesize effects: omega = sin(1.25*pi * p / max p) + noise is
   standardized, scaled by alpha, rounded half-away-from-zero, and censored
   so y0 + effect stays inside [0, y_max],
5. assign covariate-cell groups and reserve a validation sample.

Replications then draw estimation samples from the non-validation pool,
simulate treatment from the population score (or a fixed 0.5 coin under
random assignment) and reveal one potential outcome per unit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._rng import RNG_FAMILY, derive_rng, derive_seed
from .data import Dataset, Sample, format_float, load_csv, load_schema, write_csv, write_schema
from .lasso import LogisticLasso
from .validation import check_vector

POPULATION_FORMAT_VERSION = 1
TRIM_BOUNDS = (0.05, 0.95)
TARGET_TREATED_SHARE = 0.5
_SHIFT_TOL = 1e-8

NOISE_KINDS = ("none", "one_minus_poisson1")
ASSIGNMENT_KINDS = ("selection", "random_half")


@dataclass(frozen=True)
class ItesSpec:
    """Scale, noise, and assignment mechanism of the synthesized effects."""

    alpha: float = 2.0
    noise: str = "one_minus_poisson1"
    assignment: str = "selection"
    y_max: int = 33

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"noise must be one of {NOISE_KINDS}")
        if self.assignment not in ASSIGNMENT_KINDS:
            raise ValueError(f"assignment must be one of {ASSIGNMENT_KINDS}")
        if self.y_max < 1:
            raise ValueError("y_max must be positive")


@dataclass(frozen=True)
class Y0Config:
    """Shape of the synthetic non-treated outcome: boundary masses, interior
    shape, and how strongly the latent scale loads on the propensity signal.

    ``interior_tilt`` = 1 gives uniform interior counts; values below 1 push
    interior mass toward the bounds (U shape)."""

    zero_share: float = 0.30
    max_share: float = 0.10
    signal_weight: float = 0.60
    interior_tilt: float = 0.60

    def __post_init__(self):
        if not (0 <= self.zero_share < 1 and 0 <= self.max_share < 1):
            raise ValueError("boundary shares must lie in [0, 1)")
        if self.zero_share + self.max_share >= 1:
            raise ValueError("infeasible boundary shares: they must sum to less than 1")
        if not 0 <= self.signal_weight <= 1:
            raise ValueError("signal_weight must lie in [0, 1]")
        if self.interior_tilt <= 0:
            raise ValueError("interior_tilt must be positive")


@dataclass(frozen=True)
class SyntheticPopConfig:
    n_population: int = 90_000
    k_continuous: int = 6
    k_binary: int = 6
    propensity_coefficients: tuple[float, ...] | None = None
    propensity_intercept: float = -2.2
    y0_model: Y0Config = field(default_factory=Y0Config)
    seed: int = 0

    def __post_init__(self):
        if self.n_population < 100:
            raise ValueError("n_population must be at least 100")
        if self.k_continuous < 1 or self.k_binary < 1:
            raise ValueError("need at least one continuous and one binary covariate")
        if self.propensity_coefficients is not None:
            coefs = tuple(float(c) for c in self.propensity_coefficients)
            if len(coefs) != self.k_continuous + self.k_binary:
                raise ValueError("propensity_coefficients must have one entry per covariate")
            object.__setattr__(self, "propensity_coefficients", coefs)


@dataclass(frozen=True)
class GroupColumn:
    """A grouping column; continuous columns need explicit bin edges."""

    name: str
    bins: tuple[float, ...] | None = None


@dataclass(frozen=True)
class GroupingScheme:
    """Cross-tabulation of discrete(ized) covariates, with one designated
    cell refined by extra columns."""

    base: tuple[GroupColumn, ...]
    refine_cell: tuple[str, int] | None = None
    refine_by: tuple[GroupColumn, ...] = ()


def default_grouping_scheme() -> GroupingScheme:
    # terciles of a standard normal at +-0.4307
    t = (-0.43072728737672383, 0.43072728737672383)
    return GroupingScheme(
        base=(GroupColumn("cont_1", t), GroupColumn("bin_1"), GroupColumn("bin_2"), GroupColumn("bin_3")),
        refine_cell=("cont_1", 1),
        refine_by=(GroupColumn("cont_2", t), GroupColumn("bin_4")),
    )


@dataclass(frozen=True)
class GroupAssignment:
    labels: np.ndarray
    definitions: tuple[str, ...]
    merge_log: tuple[str, ...] = ()

    @property
    def n_groups(self) -> int:
        return len(self.definitions)


@dataclass(frozen=True)
class Population:
    """The full semi-synthetic universe a study draws from."""

    data: Dataset
    y0: np.ndarray
    p_full: np.ndarray
    ite: np.ndarray
    groups: np.ndarray
    validation_ids: np.ndarray
    spec: ItesSpec
    meta: dict

    def __post_init__(self):
        n = self.data.n
        y0 = check_vector(self.y0, n, "y0")
        ite = check_vector(self.ite, n, "ite")
        p = check_vector(self.p_full, n, "p_full")
        groups = np.ascontiguousarray(self.groups, dtype=np.int64)
        vids = np.ascontiguousarray(self.validation_ids, dtype=np.int64)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "ite", ite)
        object.__setattr__(self, "p_full", p)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "validation_ids", vids)
        y_max = self.spec.y_max
        if (np.round(ite) != ite).any():
            raise ValueError("treatment effects must be integer-valued")
        y1 = y0 + ite
        if (y1 < 0).any() or (y1 > y_max).any():
            raise ValueError(f"y0 + effect must stay inside [0, {y_max}]")
        if (p < TRIM_BOUNDS[0] - 1e-12).any() or (p > TRIM_BOUNDS[1] + 1e-12).any():
            raise ValueError(f"propensity scores outside {TRIM_BOUNDS} survived trimming")
        if vids.size and (np.unique(vids).size != vids.size or vids.min() < 0 or vids.max() >= n):
            raise ValueError("validation_ids must be unique indices into the population")

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def y1(self) -> np.ndarray:
        return self.y0 + self.ite

    @property
    def n_groups(self) -> int:
        return int(self.groups.max()) + 1

    @property
    def pool_ids(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.validation_ids] = False
        return np.flatnonzero(mask)


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, halves away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def ite_index(p, spec: ItesSpec, seed: int) -> np.ndarray:
    """The scaled effect index: alpha times the standardized (noisy) sine of
    the normalized propensity score; identically zero when alpha = 0 with no
    noise."""
    p = check_vector(p, None, "p")
    if (p <= 0).any():
        raise ValueError("propensity scores must be positive")
    n = p.shape[0]
    if spec.alpha == 0 and spec.noise == "none":
        return np.zeros(n)
    omega = np.sin(1.25 * np.pi * p / p.max())
    if spec.noise == "one_minus_poisson1":
        omega = omega + (1.0 - derive_rng(seed, "ite-noise").poisson(1.0, size=n))
    sd = float(omega.std())
    if sd == 0.0:
        if spec.alpha > 0:
            raise ValueError("degenerate propensity: the effect index has zero variance")
        return np.zeros(n)
    return spec.alpha * (omega - omega.mean()) / sd


def compute_ite(p, y0, spec: ItesSpec, seed: int) -> np.ndarray:
    """Synthesize integer unit effects from the propensity score.

    The effect index is rounded half-away-from-zero and censored so the
    implied treated outcome respects [0, y_max]: units pushed below zero get
    -y0, units pushed above the cap get y_max - y0.
    """
    omega_scaled = ite_index(p, spec, seed)
    n = omega_scaled.shape[0]
    y0 = check_vector(y0, n, "y0")
    if (y0 < 0).any() or (y0 > spec.y_max).any():
        raise ValueError(f"y0 must lie in [0, {spec.y_max}]")
    rounded = round_half_away(omega_scaled)
    xi = np.where(y0 + rounded < 0, -y0, np.where(y0 + rounded > spec.y_max, spec.y_max - y0, rounded))
    return xi


def _codes(data: Dataset, col: GroupColumn) -> tuple[np.ndarray, list[str]]:
    values = data.column(col.name)
    kind = data.column_kinds[data.column_names.index(col.name)]
    if col.bins is None:
        if kind == "continuous":
            raise ValueError(f"grouping column {col.name!r} is continuous and needs explicit bins")
        levels = np.unique(values)
        codes = np.searchsorted(levels, values)
        return codes, [f"{col.name}={format_float(v)}" for v in levels]
    edges = np.asarray(col.bins, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 1 or (np.diff(edges) <= 0).any():
        raise ValueError(f"bins for {col.name!r} must be strictly increasing edges")
    codes = np.digitize(values, edges)
    return codes, [f"{col.name}#bin{i}" for i in range(edges.size + 1)]


def assign_groups(data: Dataset, scheme: GroupingScheme) -> GroupAssignment:
    """Cross-tabulate the scheme's columns into group labels 0..G-1.

    Cells that are empty in ``data`` produce no group and are logged as
    merged into their parent cell.
    """
    base_codes, base_levels = [], []
    for col in scheme.base:
        codes, levels = _codes(data, col)
        base_codes.append(codes)
        base_levels.append(levels)

    refine_codes, refine_levels = [], []
    refine_mask = np.zeros(data.n, dtype=bool)
    refine_col_idx = None
    if scheme.refine_cell is not None:
        name, level = scheme.refine_cell
        names = [c.name for c in scheme.base]
        if name not in names:
            raise ValueError(f"refine_cell column {name!r} is not a base grouping column")
        refine_col_idx = names.index(name)
        refine_mask = base_codes[refine_col_idx] == level
        for col in scheme.refine_by:
            codes, levels = _codes(data, col)
            refine_codes.append(codes)
            refine_levels.append(levels)

    # composite keys: base cell id, plus refined sub-cell id where applicable
    n = data.n
    base_key = np.zeros(n, dtype=np.int64)
    for codes, levels in zip(base_codes, base_levels):
        base_key = base_key * len(levels) + codes
    sub_key = np.zeros(n, dtype=np.int64)
    n_sub = 1
    for codes, levels in zip(refine_codes, refine_levels):
        sub_key = sub_key * len(levels) + codes
        n_sub *= len(levels)
    full_key = np.where(refine_mask, base_key * n_sub + sub_key, -(base_key + 1))

    def describe(key: int) -> str:
        if key < 0:
            bk, parts = -key - 1, []
            for codes, levels in zip(reversed(base_codes), reversed(base_levels)):
                bk, c = divmod(bk, len(levels))
                parts.append(levels[c])
            return " & ".join(reversed(parts))
        bk, sk = divmod(key, n_sub) if n_sub > 1 else (key, 0)
        parts = []
        for codes, levels in zip(reversed(refine_codes), reversed(refine_levels)):
            sk, c = divmod(sk, len(levels))
            parts.append(levels[c])
        head = describe(-(bk + 1))
        return head + " & " + " & ".join(reversed(parts))

    observed = np.unique(full_key)
    labels = np.searchsorted(observed, full_key)
    definitions = tuple(describe(int(k)) for k in observed)

    # log theoretically possible but empty refined sub-cells
    merge_log = []
    if refine_col_idx is not None and refine_mask.any():
        refined_cells = np.unique(base_key[refine_mask])
        have = set(int(k) for k in observed if k >= 0)
        for bk in refined_cells:
            for sk in range(n_sub):
                key = int(bk) * n_sub + sk
                if key not in have:
                    merge_log.append(f"empty cell merged into parent: {describe(key)}")
    return GroupAssignment(labels, definitions, tuple(merge_log))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def shift_to_target_share(logits: np.ndarray, target: float = TARGET_TREATED_SHARE) -> float:
    """Newton solve for the intercept offset making mean(sigmoid) hit target."""
    c = 0.0
    for _ in range(100):
        p = _sigmoid(logits + c)
        f = p.mean() - target
        if abs(f) < _SHIFT_TOL:
            return c
        fp = (p * (1.0 - p)).mean()
        if fp <= 0:
            raise RuntimeError("degenerate propensity distribution: cannot shift the intercept")
        c -= f / fp
    raise RuntimeError("intercept shift did not converge")


_CONT_MAPS = ("identity", "identity", "softplus", "logistic", "cube", "scaled_exp")


def _monotone_map(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "softplus":
        return np.logaddexp(0.0, z)
    if kind == "logistic":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "cube":
        return z ** 3
    return np.exp(z / 2.0)


_BINARY_SHARES = (0.45, 0.30, 0.55, 0.20, 0.35, 0.50)
_FACTOR_LOADINGS = (0.75, 0.35, 0.60, 0.20, 0.50, 0.40)
_DEFAULT_COEF_CONT = (0.60, -0.80, 0.45, -0.25, 0.30, -0.20)
_DEFAULT_COEF_BIN = (0.50, -0.40, 0.35, -0.30, 0.25, -0.20)

# Gauss error function via the standard normal CDF identity; numpy-only.
def _norm_ppf(q: float) -> float:
    # Acklam-style rational approximation is overkill; bisect the CDF instead.
    from math import erf, sqrt

    def cdf(x):
        return 0.5 * (1.0 + erf(x / sqrt(2.0)))

    lo, hi = -10.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def default_propensity_coefficients(k_continuous: int, k_binary: int) -> tuple[float, ...]:
    cont = tuple(_DEFAULT_COEF_CONT[j % len(_DEFAULT_COEF_CONT)] for j in range(k_continuous))
    binry = tuple(_DEFAULT_COEF_BIN[j % len(_DEFAULT_COEF_BIN)] for j in range(k_binary))
    return cont + binry


def generate_synthetic_inputs(config: SyntheticPopConfig, y_max: int = 33) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Covariates, non-treated outcomes, and propensity logits for a synthetic
    population. Covariates come from a one-factor Gaussian model pushed
    through monotone maps (continuous) and thresholds (binary); the outcome
    is a censored integer count with calibrated boundary masses whose latent
    scale loads on the propensity signal (cream-skimming)."""
    rng = derive_rng(config.seed, "synthetic-covariates")
    n, kc, kb = config.n_population, config.k_continuous, config.k_binary
    k = kc + kb
    loadings = np.array([_FACTOR_LOADINGS[j % len(_FACTOR_LOADINGS)] for j in range(k)])
    factor = rng.normal(size=n)
    Z = loadings * factor[:, None] + np.sqrt(1.0 - loadings**2) * rng.normal(size=(n, k))

    columns, names, kinds = [], [], []
    for j in range(kc):
        columns.append(_monotone_map(Z[:, j], _CONT_MAPS[j % len(_CONT_MAPS)]))
        names.append(f"cont_{j + 1}")
        kinds.append("continuous")
    for j in range(kb):
        share = _BINARY_SHARES[j % len(_BINARY_SHARES)]
        columns.append((Z[:, kc + j] <= _norm_ppf(share)).astype(np.float64))
        names.append(f"bin_{j + 1}")
        kinds.append("binary")
    X = np.column_stack(columns)
    data = Dataset(X, tuple(kinds), tuple(names))

    coefs = config.propensity_coefficients or default_propensity_coefficients(kc, kb)
    X_std = (X - X.mean(axis=0)) / X.std(axis=0)
    logits = config.propensity_intercept + X_std @ np.asarray(coefs)

    y0cfg = config.y0_model
    sig = (logits - logits.mean()) / logits.std() if logits.std() > 0 else np.zeros(n)
    w = y0cfg.signal_weight
    latent = w * sig + np.sqrt(1.0 - w * w) * derive_rng(config.seed, "synthetic-y0").normal(size=n)
    # rank map: exact point masses at the bounds, near-uniform counts between,
    # matching the flat, boundary-heavy shape of censored employment durations
    u = (np.argsort(np.argsort(latent)) + 0.5) / n
    z0, zmax = y0cfg.zero_share, y0cfg.max_share
    interior_span = 1.0 - z0 - zmax
    if interior_span <= 0:
        raise ValueError("infeasible boundary shares: no interior mass left")
    inner = np.clip((u - z0) / interior_span, 0.0, 1.0 - 1e-12)
    centered = 2.0 * inner - 1.0
    inner = 0.5 * (1.0 + np.sign(centered) * np.abs(centered) ** y0cfg.interior_tilt)
    y0 = 1.0 + np.floor(np.clip(inner, 0.0, 1.0 - 1e-12) * (y_max - 1))
    y0[u < z0] = 0.0
    y0[u > 1.0 - zmax] = float(y_max)
    return data, y0, logits


def build_population(
    source,
    ites: ItesSpec,
    seed: int,
    n_validation: int = 10_000,
    grouping: GroupingScheme | None = None,
) -> Population:
    """Construct the study population from a synthetic config or a CSV triple.

    CSV mode expects ``{"covariates": path, "schema": path, "y0": column,
    "treatment": column}``: the treatment column is used only to fit the
    population propensity score (all rows), after which treated rows are
    dropped and their outcomes never used.
    """
    meta: dict = {"seed": int(seed), "rng_family": RNG_FAMILY}
    if isinstance(source, SyntheticPopConfig):
        y_max = ites.y_max
        data, y0, logits = generate_synthetic_inputs(source, y_max)
        meta["source"] = {"kind": "synthetic", **asdict(source)}
        zero_share = float((y0 == 0).mean())
        max_share = float((y0 == y_max).mean())
        cfg = source.y0_model
        if abs(zero_share - cfg.zero_share) > 0.05 or abs(max_share - cfg.max_share) > 0.05:
            raise ValueError(
                "infeasible boundary shares: realized "
                f"({zero_share:.3f}, {max_share:.3f}) vs configured ({cfg.zero_share}, {cfg.max_share})"
            )
        meta["y0_boundary_shares"] = {"zero": zero_share, "max": max_share}
    else:
        src = dict(source)
        names, kinds = load_schema(src["schema"])
        full = load_csv(src["covariates"], (names, kinds))
        y0_col, d_col = src.get("y0", "y0"), src.get("treatment", "treatment")
        for col in (y0_col, d_col):
            if col not in full.column_names:
                raise ValueError(f"CSV mode requires a {col!r} column (fitting the population propensity score)")
        d = full.column(d_col)
        if not np.isin(d, (0.0, 1.0)).all():
            raise ValueError("treatment column must be binary")
        y0_all = full.column(y0_col)
        cov_idx = [j for j, nm in enumerate(full.column_names) if nm not in (y0_col, d_col)]
        X_all = full.covariates[:, cov_idx]
        cov_names = tuple(full.column_names[j] for j in cov_idx)
        cov_kinds = tuple(full.column_kinds[j] for j in cov_idx)
        model = LogisticLasso(lambda_grid=[0.0], seed=derive_seed(seed, "propensity-fit"))
        model.fit(X_all, d)
        logits_all = model.decision_function(X_all)
        keep = d == 0.0
        data = Dataset(X_all[keep], cov_kinds, cov_names)
        y0 = y0_all[keep]
        y_max = ites.y_max
        if (y0 < 0).any() or (y0 > y_max).any():
            raise ValueError(f"non-treated outcomes must lie in [0, {y_max}]")
        logits = logits_all[keep]
        meta["source"] = {"kind": "csv", **{k: str(v) for k, v in src.items()}}
        meta["n_treated_removed"] = int((~keep).sum())

    # 50:50 manipulation, then trimming
    offset = shift_to_target_share(logits, TARGET_TREATED_SHARE)
    p_shifted = _sigmoid(logits + offset)
    meta["intercept_offset"] = offset
    meta["mean_p_after_shift"] = float(p_shifted.mean())
    keep = (p_shifted >= TRIM_BOUNDS[0]) & (p_shifted <= TRIM_BOUNDS[1])
    meta["n_trimmed"] = int((~keep).sum())
    data = data.select_rows(np.flatnonzero(keep))
    y0 = y0[keep]
    p_full = p_shifted[keep]
    n = data.n

    # effects come from the pre-shift score (the fitted/true selection process);
    # the shifted score only steers the simulated assignment
    ite = compute_ite(_sigmoid(logits[keep]), y0, ites, derive_seed(seed, "ite"))

    scheme = grouping if grouping is not None else default_grouping_scheme()
    assignment = assign_groups(data, scheme)
    groups = assignment.labels
    merge_log = list(assignment.merge_log)

    if not 0 < n_validation < n:
        raise ValueError(f"n_validation must lie strictly between 0 and the population size {n}")
    vids = np.sort(derive_rng(seed, "validation-draw").choice(n, size=n_validation, replace=False))

    # every group must appear in the validation sample; merge stragglers
    present = np.zeros(int(groups.max()) + 1, dtype=bool)
    present[np.unique(groups[vids])] = True
    if not present.all():
        relabel = np.cumsum(present) - 1
        for g in np.flatnonzero(~present):
            target = relabel[g - 1] if g > 0 else 0
            merge_log.append(
                f"group absent from validation merged into neighbor: {assignment.definitions[g]}"
            )
            relabel[g] = target
        groups = relabel[groups]
    meta["group_definitions"] = list(assignment.definitions)
    meta["group_merge_log"] = merge_log
    meta["ites"] = asdict(ites)
    meta["n_validation"] = int(n_validation)

    return Population(data, y0, p_full, ite, groups, vids, ites, meta)


def draw_replication(pop: Population, n_s: int, seed: int) -> Sample:
    """One estimation sample: uniform draw from the pool, simulated treatment,
    observed outcome from the revealed potential outcome."""
    pool = pop.pool_ids
    if n_s > pool.size:
        raise ValueError(f"requested {n_s} units but the sampling pool has only {pool.size}")
    rng = derive_rng(seed, "replication")
    rows = rng.choice(pool, size=n_s, replace=False)
    p_sim = pop.p_full[rows] if pop.spec.assignment == "selection" else np.full(n_s, 0.5)
    d = (rng.random(n_s) < p_sim).astype(np.float64)
    y = d * pop.y1[rows] + (1.0 - d) * pop.y0[rows]
    return Sample(pop.data.select_rows(rows), d, y, true_ite=pop.ite[rows])


def true_targets(pop: Population) -> tuple[np.ndarray, np.ndarray, float]:
    """(validation effect vector, true group effects, true mean effect)."""
    from .estimators import aggregate

    xi = pop.ite[pop.validation_ids]
    gate, ate = aggregate(xi, pop.groups[pop.validation_ids])
    return xi, gate, ate


# -- persistence -----------------------------------------------------------------


def save_population(pop: Population, out_dir) -> None:
    """Write a population directory: covariates.csv, schema.csv, outcomes.csv
    (y0, ite, p_full, validation flag), groups.csv, meta.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "covariates.csv", pop.data)
    write_schema(out / "schema.csv", pop.data)
    is_val = np.zeros(pop.n, dtype=np.int64)
    is_val[pop.validation_ids] = 1
    with open(out / "outcomes.csv", "w", encoding="utf-8") as fh:
        fh.write("y0,ite,p_full,validation\n")
        for i in range(pop.n):
            fh.write(
                f"{format_float(pop.y0[i])},{format_float(pop.ite[i])},"
                f"{format_float(pop.p_full[i])},{is_val[i]}\n"
            )
    with open(out / "groups.csv", "w", encoding="utf-8") as fh:
        fh.write("group\n")
        for g in pop.groups:
            fh.write(f"{g}\n")
    manifest = {
        "format_version": POPULATION_FORMAT_VERSION,
        "spec": asdict(pop.spec),
        "meta": pop.meta,
    }
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_population(in_dir) -> Population:
    src = Path(in_dir)
    if not src.is_dir():
        raise FileNotFoundError(f"population directory not found: {src}")
    with open(src / "meta.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest["format_version"] != POPULATION_FORMAT_VERSION:
        raise ValueError(f"unsupported population format version {manifest['format_version']}")
    names, kinds = load_schema(src / "schema.csv")
    data = load_csv(src / "covariates.csv", (names, kinds))
    outcomes = load_csv(
        src / "outcomes.csv",
        (("y0", "ite", "p_full", "validation"), ("continuous",) * 3 + ("binary",)),
    )
    groups = load_csv(src / "groups.csv", (("group",), ("continuous",)))
    spec = ItesSpec(**manifest["spec"])
    vids = np.flatnonzero(outcomes.column("validation") == 1.0)
    return Population(
        data,
        outcomes.column("y0"),
        outcomes.column("p_full"),
        outcomes.column("ite"),
        groups.covariates[:, 0].astype(np.int64),
        vids,
        spec,
        manifest["meta"],
    )
