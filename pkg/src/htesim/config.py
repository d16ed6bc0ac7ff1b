"""Flat key=value study configuration.

The config file is plain text: one ``key = value`` per line, ``#`` comments,
blank lines ignored. Lists are comma-separated. Every key has a default
matching the headline settings (1000 trees, mtry 70, honest 25/25/50 splits,
10-fold Lasso CV, 10,000 validation units, trimming at 5%/95%, 50% target
treated share). Only ``output_dir`` and ``parallelism`` may be overridden
from the environment (HTESIM_OUTPUT_DIR, HTESIM_PARALLELISM).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields

from .dgp import ASSIGNMENT_KINDS, NOISE_KINDS
from .estimators import THE_ELEVEN, EstimatorSpec, parse_estimator_id


class ConfigError(ValueError):
    """The config file is malformed or violates a constraint."""


@dataclass
class StudyConfig:
    # population / DGP
    population_dir: str = "population"
    population_source: str = "synthetic"
    csv_path: str | None = None
    csv_schema: str | None = None
    csv_y0_column: str = "y0"
    csv_treatment_column: str = "treatment"
    n_population: int = 90_000
    k_continuous: int = 6
    k_binary: int = 6
    y0_zero_share: float = 0.30
    y0_max_share: float = 0.10
    y0_signal_weight: float = 0.45
    propensity_coefficients: tuple[float, ...] | None = None
    alpha: float = 2.0
    noise: str = "one_minus_poisson1"
    assignment: str = "selection"
    y_max: int = 33
    n_validation: int = 10_000
    # study loop
    n_s: int = 1000
    n_replications: int = 2000
    estimators: tuple[str, ...] = ("eleven",)
    include_infeasible: bool = True
    master_seed: int = 12345
    output_dir: str = "study_output"
    parallelism: int = 1
    keep_replication_files: bool = True
    # forest learner
    n_trees: int = 1000
    mtry: int = 70
    min_leaf: int = 1
    honest_fractions: tuple[float, float, float] = (0.25, 0.25, 0.50)
    # lasso learner
    lasso_n_lambdas: int = 100
    lasso_lambda_min_ratio: float = 0.001
    lasso_n_folds: int = 10
    lasso_max_iter: int = 1000
    lasso_tol: float = 1e-7

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_replications < 2:
            raise ConfigError("n_replications must be at least 2")
        if self.n_s < 4:
            raise ConfigError("n_s must be at least 4")
        if self.n_s + self.n_validation > self.n_population:
            raise ConfigError(
                f"n_s + n_validation = {self.n_s + self.n_validation} exceeds the population size {self.n_population}"
            )
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}")
        if self.assignment not in ASSIGNMENT_KINDS:
            raise ConfigError(f"assignment must be one of {ASSIGNMENT_KINDS}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        if self.population_source not in ("synthetic", "csv"):
            raise ConfigError("population_source must be 'synthetic' or 'csv'")
        if self.population_source == "csv" and (not self.csv_path or not self.csv_schema):
            raise ConfigError("population_source=csv requires csv_path and csv_schema")
        self.estimator_specs()  # validates spec strings

    def estimator_specs(self) -> tuple[EstimatorSpec, ...]:
        specs: list[EstimatorSpec] = []
        for item in self.estimators:
            if item in ("eleven", "all"):
                specs.extend(THE_ELEVEN)
            else:
                try:
                    specs.append(parse_estimator_id(item))
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        if self.include_infeasible:
            specs.extend((EstimatorSpec("infeasible", "forest"), EstimatorSpec("infeasible", "lasso")))
        seen, out = set(), []
        for s in specs:
            if s.estimator_id not in seen:
                seen.add(s.estimator_id)
                out.append(s)
        if not out:
            raise ConfigError("no estimators configured")
        return tuple(out)

    def forest_params(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "mtry": self.mtry,
            "min_leaf": self.min_leaf,
            "honest_fractions": tuple(self.honest_fractions),
        }

    def lasso_params(self) -> dict:
        return {
            "n_lambdas": self.lasso_n_lambdas,
            "lambda_min_ratio": self.lasso_lambda_min_ratio,
            "n_folds": self.lasso_n_folds,
            "max_iter": self.lasso_max_iter,
            "tol": self.lasso_tol,
        }

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Hash of every result-relevant field (output_dir, parallelism, and
        file retention do not affect results)."""
        payload = self.to_dict()
        for key in ("output_dir", "parallelism", "keep_replication_files"):
            payload.pop(key)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _convert(key: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw.lower() not in _BOOL_VALUES:
                raise ValueError
            return _BOOL_VALUES[raw.lower()]
        if kind == "float_tuple":
            return tuple(float(v) for v in raw.split(","))
        if kind == "str_tuple":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse value {raw!r}") from None


def _field_kinds() -> dict:
    kinds = {}
    for f in fields(StudyConfig):
        if f.name in ("honest_fractions", "propensity_coefficients"):
            kinds[f.name] = "float_tuple"
        elif f.name == "estimators":
            kinds[f.name] = "str_tuple"
        elif f.type in ("int", int):
            kinds[f.name] = int
        elif f.type in ("float", float):
            kinds[f.name] = float
        elif f.type in ("bool", bool):
            kinds[f.name] = bool
        else:
            kinds[f.name] = str
    return kinds


def parse_config_text(text: str, source: str = "<config>") -> StudyConfig:
    kinds = _field_kinds()
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in kinds:
            raise ConfigError(f"{source}: line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{source}: line {lineno}: duplicate config key {key!r}")
        values[key] = _convert(key, raw, kinds[key])
    if os.environ.get("HTESIM_OUTPUT_DIR"):
        values["output_dir"] = os.environ["HTESIM_OUTPUT_DIR"]
    if os.environ.get("HTESIM_PARALLELISM"):
        values["parallelism"] = _convert("parallelism", os.environ["HTESIM_PARALLELISM"], int)
    try:
        return StudyConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> StudyConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


def format_config(config: StudyConfig) -> str:
    """Echo the effective configuration as re-parseable key=value text."""
    lines = []
    for f in fields(StudyConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
