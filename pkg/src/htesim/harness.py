"""Study orchestration: the replication loop, persistence, and reports.

Each replication draws an estimation sample, computes shared cross-fitted
nuisances once per learner family, runs every configured estimator, and
aggregates validation predictions to group and mean effects. Results land in
per-replication CSV files (with SHA-256 sidecars) that are merged in
replication order, so output bytes are independent of scheduling and a
partially written output directory can be resumed safely: a directory
produced by a different config or seed is refused outright.

Everything except timestamps and wall-clock entries in the manifest is a
deterministic function of (config, master seed).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import RNG_FAMILY, derive_seed
from .config import StudyConfig
from .data import Dataset, format_float, split_half
from .dgp import Population, draw_replication, load_population, true_targets
from .estimators import aggregate, estimate_iate
from .metrics import (
    LEVELS,
    EstimatorPerformance,
    PredictionTensor,
    flag_best,
    format_report_table,
    summarize,
    write_report_csv,
)
from .nuisance import estimate_nuisances

UNRELIABLE_FAILURE_SHARE = 0.10
_REP_HEADER = "# htesim replication"


@dataclass
class StudyResult:
    config: StudyConfig
    tensors: dict
    truth: dict
    failures: dict
    manifest: dict


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _rep_path(out_dir: Path, r: int) -> Path:
    return out_dir / "replications" / f"rep_{r:05d}.csv"


def _replication_completed(out_dir: Path, r: int) -> bool:
    path = _rep_path(out_dir, r)
    sidecar = path.with_suffix(".csv.sha256")
    if not path.exists() or not sidecar.exists():
        return False
    return sidecar.read_text().strip() == _sha256_file(path)


# -- per-replication execution -------------------------------------------------

_WORKER_STATE: dict = {}


def _worker_init(population_dir: str, config_dict: dict):
    _WORKER_STATE["population"] = load_population(population_dir)
    _WORKER_STATE["config"] = StudyConfig(**config_dict)
    val_ids = _WORKER_STATE["population"].validation_ids
    _WORKER_STATE["validation"] = _WORKER_STATE["population"].data.select_rows(val_ids)
    _WORKER_STATE["val_groups"] = _WORKER_STATE["population"].groups[val_ids]


def run_one_replication(pop: Population, validation: Dataset, val_groups: np.ndarray,
                        config: StudyConfig, rep_index: int):
    """All estimators on one replication; failures are caught per estimator."""
    specs = config.estimator_specs()
    rep_seed = derive_seed(config.master_seed, "replication-seed", rep_index)
    sample = draw_replication(pop, config.n_s, rep_seed)

    split = split_half(sample.n, derive_seed(rep_seed, "crossfit-split"))
    needs: dict[str, set] = {}
    for spec in specs:
        if spec.nuisance_needs:
            needs.setdefault(spec.learner, set()).update(spec.nuisance_needs)
    nuisances = {}
    nuisance_errors = {}
    for learner, names in sorted(needs.items()):
        try:
            nuisances[learner] = estimate_nuisances(
                sample, learner, tuple(sorted(names)),
                seed=derive_seed(rep_seed, f"nuisances-{learner}"), split=split,
                forest_params=config.forest_params(), lasso_params=config.lasso_params(),
            )
        except Exception as exc:  # noqa: BLE001 - nuisance failure fails its dependents only
            nuisance_errors[learner] = f"nuisance estimation failed: {exc}"

    results = {}
    failures = {}
    wallclock = {}
    for spec in specs:
        est_id = spec.estimator_id
        t0 = time.perf_counter()
        try:
            if spec.nuisance_needs and spec.learner in nuisance_errors:
                raise RuntimeError(nuisance_errors[spec.learner])
            iate = estimate_iate(
                spec, sample, validation,
                seed=derive_seed(rep_seed, f"estimator-{est_id}"),
                nuisances=nuisances.get(spec.learner) if spec.nuisance_needs else None,
                forest_params=config.forest_params(), lasso_params=config.lasso_params(),
            )
            if not np.isfinite(iate).all():
                raise RuntimeError("estimator produced non-finite predictions")
            gate, ate = aggregate(iate, val_groups)
            results[est_id] = (iate, gate, ate)
        except Exception as exc:  # noqa: BLE001 - isolate estimator failures
            failures[est_id] = f"{type(exc).__name__}: {exc}"
        wallclock[est_id] = time.perf_counter() - t0
    return rep_index, results, failures, wallclock


def _worker_run(rep_index: int):
    return run_one_replication(
        _WORKER_STATE["population"], _WORKER_STATE["validation"], _WORKER_STATE["val_groups"],
        _WORKER_STATE["config"], rep_index,
    )


def _write_replication_file(out_dir: Path, config_hash: str, rep_index: int,
                            results: dict, failures: dict) -> None:
    path = _rep_path(out_dir, rep_index)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{_REP_HEADER}\n# config_hash = {config_hash}\n# replication = {rep_index}\n")
        writer = csv.writer(fh)
        for est_id in sorted(results):
            iate, gate, ate = results[est_id]
            writer.writerow([est_id, "iate"] + [format_float(v) for v in iate])
            writer.writerow([est_id, "gate"] + [format_float(v) for v in gate])
            writer.writerow([est_id, "ate", format_float(ate)])
        for est_id in sorted(failures):
            writer.writerow([est_id, "failed", failures[est_id]])
    path.with_suffix(".csv.sha256").write_text(_sha256_file(path) + "\n")


def _read_replication_file(out_dir: Path, config_hash: str, rep_index: int):
    path = _rep_path(out_dir, rep_index)
    results, failures = {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        header = [fh.readline() for _ in range(3)]
        if not header[0].startswith(_REP_HEADER):
            raise RuntimeError(f"{path}: not a replication file")
        if header[1].strip() != f"# config_hash = {config_hash}":
            raise RuntimeError(f"{path}: written by a different config/seed; refusing to mix results")
        if header[2].strip() != f"# replication = {rep_index}":
            raise RuntimeError(f"{path}: replication index mismatch")
        for row in csv.reader(fh):
            est_id, level = row[0], row[1]
            if level == "failed":
                failures[est_id] = row[2]
            else:
                results.setdefault(est_id, {})[level] = np.array([float(v) for v in row[2:]])
    return results, failures


# -- study loop ------------------------------------------------------------------


def _prepare_output_dir(out_dir: Path, config: StudyConfig) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "replications").mkdir(exist_ok=True)
    (out_dir / "tensors").mkdir(exist_ok=True)
    (out_dir / "reports").mkdir(exist_ok=True)
    manifest_path = out_dir / "manifest.json"
    config_hash = config.config_hash()
    if manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as fh:
            prior = json.load(fh)
        if prior.get("config_hash") != config_hash:
            raise RuntimeError(
                f"output directory {out_dir} holds results for a different config or master seed; "
                "refusing to mix (use a fresh output_dir)"
            )
        return prior
    if any((out_dir / "replications").iterdir()):
        raise RuntimeError(
            f"output directory {out_dir} contains replication files but no manifest; refusing to resume"
        )
    manifest = {
        "package_version": __version__,
        "rng_family": RNG_FAMILY,
        "config": config.to_dict(),
        "config_hash": config_hash,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    _write_manifest(out_dir, manifest)
    return manifest


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    tmp = out_dir / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    tmp.replace(out_dir / "manifest.json")


def run_study(config: StudyConfig, population: Population | None = None) -> StudyResult:
    """Execute the replication loop and write tensors, reports, and manifest."""
    if population is None:
        pop_dir = Path(config.population_dir)
        if not pop_dir.is_dir():
            raise FileNotFoundError(f"population directory not found: {pop_dir}")
        population = load_population(pop_dir)
    pool_size = population.pool_ids.size
    if config.n_s > pool_size:
        raise ValueError(f"n_s={config.n_s} exceeds the sampling pool ({pool_size} units)")

    out_dir = Path(config.output_dir)
    manifest = _prepare_output_dir(out_dir, config)
    config_hash = config.config_hash()

    validation = population.data.select_rows(population.validation_ids)
    val_groups = population.groups[population.validation_ids]

    pending = [r for r in range(config.n_replications) if not _replication_completed(out_dir, r)]
    wallclocks: dict[str, list] = {}
    if pending:
        if config.parallelism > 1:
            with ProcessPoolExecutor(
                max_workers=config.parallelism,
                initializer=_worker_init,
                initargs=(config.population_dir, config.to_dict()),
            ) as pool:
                for rep_index, results, failures, wc in pool.map(_worker_run, pending):
                    _write_replication_file(out_dir, config_hash, rep_index, results, failures)
                    for est_id, seconds in wc.items():
                        wallclocks.setdefault(est_id, []).append(seconds)
        else:
            for r in pending:
                rep_index, results, failures, wc = run_one_replication(
                    population, validation, val_groups, config, r
                )
                _write_replication_file(out_dir, config_hash, rep_index, results, failures)
                for est_id, seconds in wc.items():
                    wallclocks.setdefault(est_id, []).append(seconds)

    # deterministic merge in replication order
    xi, gate_truth, ate_truth = true_targets(population)
    truth = {"iate": xi, "gate": gate_truth, "ate": np.array([ate_truth])}
    specs = config.estimator_specs()
    rows: dict[str, dict[str, list]] = {s.estimator_id: {lvl: [] for lvl in LEVELS} for s in specs}
    rep_of: dict[str, list] = {s.estimator_id: [] for s in specs}
    failure_counts: dict[str, int] = {s.estimator_id: 0 for s in specs}
    failure_messages: dict[str, str] = {}
    for r in range(config.n_replications):
        results, failures = _read_replication_file(out_dir, config_hash, r)
        for est_id, msg in failures.items():
            if est_id in failure_counts:
                failure_counts[est_id] += 1
                failure_messages.setdefault(est_id, msg)
        for est_id, by_level in results.items():
            if est_id not in rows:
                continue
            for lvl in LEVELS:
                rows[est_id][lvl].append(by_level[lvl])
            rep_of[est_id].append(r)

    tensors: dict = {}
    for spec in specs:
        est_id = spec.estimator_id
        n_ok = len(rows[est_id]["iate"])
        if n_ok == 0:
            continue
        for lvl in LEVELS:
            tensors[(est_id, lvl)] = PredictionTensor(
                np.vstack(rows[est_id][lvl]) if lvl != "ate" else np.array(rows[est_id][lvl]).reshape(-1, 1),
                truth[lvl],
                est_id,
                lvl,
                n_failures=failure_counts[est_id],
            )
        _write_tensor_csv(out_dir / "tensors" / f"{est_id}.csv", rows[est_id], rep_of[est_id])
    for lvl in LEVELS:
        _write_truth_csv(out_dir / "tensors" / f"truth_{lvl}.csv", truth[lvl])

    result = StudyResult(
        config=config,
        tensors=tensors,
        truth=truth,
        failures=failure_counts,
        manifest=manifest,
    )
    write_reports(result, out_dir)

    manifest["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    manifest["failure_counts"] = failure_counts
    manifest["failure_first_message"] = failure_messages
    manifest["wall_clock_seconds_per_replication"] = {
        est_id: [round(s, 6) for s in secs] for est_id, secs in sorted(wallclocks.items())
    }
    _write_manifest(out_dir, manifest)
    if not config.keep_replication_files:
        for r in range(config.n_replications):
            _rep_path(out_dir, r).unlink(missing_ok=True)
            _rep_path(out_dir, r).with_suffix(".csv.sha256").unlink(missing_ok=True)
    return result


def _write_tensor_csv(path: Path, by_level: dict, rep_ids: list) -> None:
    """One CSV per estimator: replication index, level, then the value row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for lvl in LEVELS:
            for rep_id, vec in zip(rep_ids, by_level[lvl]):
                values = vec if np.ndim(vec) else [vec]
                writer.writerow([rep_id, lvl] + [format_float(v) for v in np.atleast_1d(values)])


def _write_truth_csv(path: Path, vec: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth"] + [format_float(v) for v in np.atleast_1d(vec)])


def load_tensors(out_dir) -> StudyResult:
    """Rebuild a StudyResult from a finished study directory."""
    out_dir = Path(out_dir)
    manifest_path = out_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {out_dir}; is this a study output directory?")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg_dict = manifest["config"]
    for key in ("honest_fractions", "estimators", "propensity_coefficients"):
        if cfg_dict.get(key) is not None:
            cfg_dict[key] = tuple(cfg_dict[key])
    config = StudyConfig(**cfg_dict)
    truth = {}
    for lvl in LEVELS:
        with open(out_dir / "tensors" / f"truth_{lvl}.csv", newline="", encoding="utf-8") as fh:
            row = next(csv.reader(fh))
        truth[lvl] = np.array([float(v) for v in row[1:]])
    tensors = {}
    failures = dict(manifest.get("failure_counts", {}))
    for spec in config.estimator_specs():
        est_id = spec.estimator_id
        path = out_dir / "tensors" / f"{est_id}.csv"
        if not path.exists():
            continue
        by_level: dict[str, list] = {lvl: [] for lvl in LEVELS}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                by_level[row[1]].append(np.array([float(v) for v in row[2:]]))
        for lvl in LEVELS:
            tensors[(est_id, lvl)] = PredictionTensor(
                np.vstack(by_level[lvl]), truth[lvl], est_id, lvl,
                n_failures=int(failures.get(est_id, 0)),
            )
    return StudyResult(config=config, tensors=tensors, truth=truth, failures=failures, manifest=manifest)


def write_reports(result: StudyResult, out_dir) -> list[Path]:
    """Three level CSVs (and aligned text tables) with best-row flags."""
    out_dir = Path(out_dir)
    reports_dir = out_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    n_total = result.config.n_replications
    written = []
    for lvl in LEVELS:
        rows: list[EstimatorPerformance] = []
        for spec in result.config.estimator_specs():
            key = (spec.estimator_id, lvl)
            if key not in result.tensors:
                continue
            tensor = result.tensors[key]
            unreliable = tensor.n_failures > UNRELIABLE_FAILURE_SHARE * n_total
            rows.append(summarize(tensor, unreliable=unreliable))
        rows = flag_best(rows)
        csv_path = reports_dir / f"{lvl}.csv"
        write_report_csv(csv_path, rows, lvl)
        (reports_dir / f"{lvl}.txt").write_text(format_report_table(rows, lvl))
        written.append(csv_path)
    return written
