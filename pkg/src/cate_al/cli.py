"""Configuration-driven experiment runner.

``run`` executes every (estimator x method x seed) cell of a config against
one dataset variant, appending self-describing rows to results.csv as cells
finish and keeping a manifest that records enough to re-run any cell
bit-identically. ``summarize`` turns a results file into plot-ready long
tables. ``gen-data`` dumps a generated dataset for inspection.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import difflib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .acquisition import AcquisitionMethod, METHOD_NAMES
from .active_loop import ESTIMATOR_NAMES, LoopConfig, run_active_learning
from .dgp import (
    DATASET_NAMES,
    SplitSpec,
    default_split,
    gen_causalbald,
    gen_hahn,
    gen_actg_outcomes,
    gen_ihdp_outcomes,
    load_covariates_csv,
    make_benchmark,
    rng_stream,
)
from .errors import InputError
from .evaluation import RunRecord, StepEntry, aggregate_runs, count_failures

OUT_ROOT_ENV = "CATE_AL_OUT_ROOT"

RESULTS_HEADER = (
    "dataset", "variant", "estimator", "method", "seed", "step", "n_labeled",
    "sqrt_pehe_pool", "sqrt_pehe_test", "acq_seconds", "status",
)

SUMMARY_HEADER = (
    "dataset", "variant", "estimator", "method", "step", "n_labeled",
    "metric", "mean", "sd", "count",
)

_DEFAULT_BUDGETS = {
    "causalbald": 850, "hahn_linear": 850, "hahn_nonlinear": 850,
    "ihdp": 450, "actg": 350,
}

_DATASET_KEYS = ("name", "shift", "pool_size", "val_size", "test_size", "covariates_csv")
_LOOP_KEYS = ("n_init", "batch_size", "budget", "temperature", "refit_hyperparams", "target_mode")
_RUN_KEYS = ("estimators", "methods", "seeds", "out_dir", "jobs", "master_seed")
_METHOD_KEYS = ("target_cap", "sundin_samples", "eig_grid_size", "epig_sample_size")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated run matrix for one dataset variant."""

    dataset: str
    shift: bool
    pool_size: int
    val_size: int
    test_size: int
    covariates_csv: str | None
    n_init: int
    batch_size: int
    budget: int
    temperature: float
    refit_hyperparams: bool
    target_mode: str
    estimators: tuple[str, ...]
    methods: tuple[AcquisitionMethod, ...]
    seeds: tuple[int, ...]
    out_dir: str
    jobs: int
    master_seed: int

    @property
    def variant(self) -> str:
        return "shift" if self.shift else "standard"

    def cells(self) -> list[tuple[str, str, int]]:
        return [(e, m.name, s) for e in self.estimators for m in self.methods for s in self.seeds]

    def method_by_name(self, name: str) -> AcquisitionMethod:
        for m in self.methods:
            if m.name == name:
                return m
        raise InputError(f"method {name!r} is not part of this config")


def _reject_unknown(section: str, keys, valid) -> None:
    for key in keys:
        if key not in valid:
            hint = difflib.get_close_matches(key, valid, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise InputError(f"unknown key {key!r} in section [{section}]{suffix}")


def _parse_bool(raw: str, where: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise InputError(f"{where}: expected a boolean, got {raw!r}")


def _parse_seeds(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in raw.split(",") if v.strip())


def _parse_list(raw: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in raw.split(",") if v.strip())


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a sectioned key-value config file."""
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise InputError(f"config file {path} does not exist or is unreadable")

    known_sections = {"dataset", "loop", "run"}
    for section in parser.sections():
        if section in known_sections or section.startswith("method:"):
            continue
        hint = difflib.get_close_matches(section, sorted(known_sections), n=1)
        suffix = f"; did you mean [{hint[0]}]?" if hint else ""
        raise InputError(f"unknown section [{section}]{suffix}")

    ds = dict(parser.items("dataset")) if parser.has_section("dataset") else {}
    _reject_unknown("dataset", ds, _DATASET_KEYS)
    if "name" not in ds:
        raise InputError("section [dataset] must set 'name'")
    name = ds["name"].strip()
    if name not in DATASET_NAMES:
        raise InputError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")
    shift = _parse_bool(ds.get("shift", "false"), "[dataset] shift")
    split = default_split(name, shift)
    pool_size = int(ds.get("pool_size", split.pool_size))
    val_size = int(ds.get("val_size", split.val_size))
    test_size = int(ds.get("test_size", split.test_size))
    covariates_csv = ds.get("covariates_csv", "").strip() or None
    if name in ("ihdp", "actg") and covariates_csv is None:
        raise InputError(f"dataset {name!r} requires [dataset] covariates_csv")

    loop = dict(parser.items("loop")) if parser.has_section("loop") else {}
    _reject_unknown("loop", loop, _LOOP_KEYS)
    n_init = int(loop.get("n_init", 50))
    batch_size = int(loop.get("batch_size", 20))
    budget = int(loop.get("budget", _DEFAULT_BUDGETS[name]))
    temperature = float(loop.get("temperature", 0.0))
    refit = _parse_bool(loop.get("refit_hyperparams", "true"), "[loop] refit_hyperparams")
    target_mode = loop.get("target_mode", "").strip() or ("test" if shift else "pool")
    if target_mode not in ("pool", "test"):
        raise InputError(f"[loop] target_mode must be 'pool' or 'test', got {target_mode!r}")

    run = dict(parser.items("run")) if parser.has_section("run") else {}
    _reject_unknown("run", run, _RUN_KEYS)
    estimators = _parse_list(run.get("estimators", "cmgp"))
    for est in estimators:
        if est not in ESTIMATOR_NAMES:
            hint = difflib.get_close_matches(est, ESTIMATOR_NAMES, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise InputError(f"unknown estimator {est!r}{suffix}")
    method_names = _parse_list(run.get("methods", "random"))
    if not estimators or not method_names:
        raise InputError("estimators and methods must be non-empty")

    methods = []
    for mname in method_names:
        if mname not in METHOD_NAMES:
            hint = difflib.get_close_matches(mname, METHOD_NAMES, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise InputError(f"unknown method {mname!r}{suffix}")
        extra = {}
        msec = f"method:{mname}"
        if parser.has_section(msec):
            items = dict(parser.items(msec))
            _reject_unknown(msec, items, _METHOD_KEYS)
            for key, raw in items.items():
                extra[key] = int(raw)
        methods.append(AcquisitionMethod(mname, **extra))

    seeds = _parse_seeds(run.get("seeds", "0..9"))
    if not seeds:
        raise InputError("seeds must be non-empty")
    out_dir = run.get("out_dir", "results").strip()
    root = os.environ.get(OUT_ROOT_ENV, "")
    if root and not os.path.isabs(out_dir):
        out_dir = os.path.join(root, out_dir)
    jobs = int(run.get("jobs", 1))
    master_seed = int(run.get("master_seed", 0))

    return ExperimentConfig(
        dataset=name, shift=shift, pool_size=pool_size, val_size=val_size,
        test_size=test_size, covariates_csv=covariates_csv, n_init=n_init,
        batch_size=batch_size, budget=budget, temperature=temperature,
        refit_hyperparams=refit, target_mode=target_mode,
        estimators=tuple(estimators), methods=tuple(methods), seeds=seeds,
        out_dir=out_dir, jobs=jobs, master_seed=master_seed,
    )


def serialize_config(config: ExperimentConfig) -> str:
    """Config text that parses back to an equal ExperimentConfig."""
    parser = configparser.ConfigParser()
    parser["dataset"] = {
        "name": config.dataset,
        "shift": str(config.shift).lower(),
        "pool_size": str(config.pool_size),
        "val_size": str(config.val_size),
        "test_size": str(config.test_size),
    }
    if config.covariates_csv:
        parser["dataset"]["covariates_csv"] = config.covariates_csv
    parser["loop"] = {
        "n_init": str(config.n_init),
        "batch_size": str(config.batch_size),
        "budget": str(config.budget),
        "temperature": repr(config.temperature),
        "refit_hyperparams": str(config.refit_hyperparams).lower(),
        "target_mode": config.target_mode,
    }
    parser["run"] = {
        "estimators": ", ".join(config.estimators),
        "methods": ", ".join(m.name for m in config.methods),
        "seeds": ", ".join(str(s) for s in config.seeds),
        "out_dir": config.out_dir,
        "jobs": str(config.jobs),
        "master_seed": str(config.master_seed),
    }
    for m in config.methods:
        defaults = AcquisitionMethod(m.name)
        overrides = {
            k: getattr(m, k) for k in _METHOD_KEYS if getattr(m, k) != getattr(defaults, k)
        }
        if overrides:
            parser[f"method:{m.name}"] = {k: str(v) for k, v in overrides.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# -- cell execution --------------------------------------------------------------


def cell_id(dataset: str, variant: str, estimator: str, method: str, seed: int) -> str:
    return f"{dataset}|{variant}|{estimator}|{method}|{seed}"


def _benchmark_for(config: ExperimentConfig, seed: int):
    spec = SplitSpec(
        pool_size=config.pool_size, val_size=config.val_size,
        test_size=config.test_size, shift=config.shift, seed=seed,
    )
    return make_benchmark(
        config.dataset, config.shift, spec, seed=config.master_seed * 1000003 + seed,
        covariates_csv=config.covariates_csv,
    )


def run_cell(config: ExperimentConfig, estimator: str, method_name: str, seed: int) -> RunRecord:
    """Execute one cell; RNG streams depend only on the cell identity."""
    method = config.method_by_name(method_name)
    bench = _benchmark_for(config, seed)
    data_key = (config.master_seed, config.dataset, config.variant, seed)
    warm_seed = int(rng_stream(0, *data_key, "warm").integers(2**31))
    loop_rng = rng_stream(0, *data_key, estimator, method_name, "loop")
    loop_config = LoopConfig(
        n_init=config.n_init, n_b=config.batch_size, n_budget=config.budget,
        temperature=config.temperature, refit_hyperparams=config.refit_hyperparams,
        estimator=estimator, method=method, target_mode=config.target_mode,
        seed=seed, warm_start_seed=warm_seed,
    )
    record = run_active_learning(loop_config, bench.pool, bench.test, loop_rng)
    record.dataset = config.dataset
    record.variant = config.variant
    return record


def _record_rows(record: RunRecord) -> list[list[str]]:
    status = "failed" if record.failed else "ok"
    rows = []
    for e in record.entries:
        rows.append([
            record.dataset, record.variant, record.estimator, record.method,
            str(record.seed), str(e.step), str(e.n_labeled),
            f"{e.sqrt_pehe_pool:.12g}", f"{e.sqrt_pehe_test:.12g}",
            f"{e.acq_seconds:.6g}", status,
        ])
    if record.failed and not record.entries:
        rows.append([
            record.dataset, record.variant, record.estimator, record.method,
            str(record.seed), "0", "0", "nan", "nan", "0", status,
        ])
    return rows


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_manifest(path: str, config: ExperimentConfig, statuses: dict[str, str]) -> None:
    payload = {
        "version": __version__,
        "config": serialize_config(config),
        "cells": statuses,
    }
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True))


def load_manifest_config(manifest_path: str) -> ExperimentConfig:
    """Reconstruct the validated config embedded in a run manifest."""
    with open(manifest_path, encoding="utf-8") as fh:
        payload = json.load(fh)
    with tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False) as fh:
        fh.write(payload["config"])
        tmp = fh.name
    try:
        return parse_config(tmp)
    finally:
        os.unlink(tmp)


def _cell_worker(args):
    config, estimator, method_name, seed = args
    record = run_cell(config, estimator, method_name, seed)
    return cell_id(config.dataset, config.variant, estimator, method_name, seed), record


def run_matrix(config: ExperimentConfig, append: bool = False) -> int:
    """Execute the full cell grid; returns a nonzero status iff a cell failed."""
    os.makedirs(config.out_dir, exist_ok=True)
    results_path = os.path.join(config.out_dir, "results.csv")
    manifest_path = os.path.join(config.out_dir, "manifest.json")

    statuses: dict[str, str] = {}
    if os.path.exists(results_path) or os.path.exists(manifest_path):
        if not append:
            raise InputError(
                f"output directory {config.out_dir} already holds results; pass --append to resume"
            )
        if os.path.exists(manifest_path):
            with open(manifest_path, encoding="utf-8") as fh:
                statuses = json.load(fh).get("cells", {})

    todo = [
        (est, mname, seed)
        for est, mname, seed in config.cells()
        if statuses.get(cell_id(config.dataset, config.variant, est, mname, seed)) != "done"
    ]

    new_file = not os.path.exists(results_path)
    failures = 0
    with open(results_path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RESULTS_HEADER)
            fh.flush()

        def consume(cid: str, record: RunRecord) -> None:
            nonlocal failures
            for row in _record_rows(record):
                writer.writerow(row)
            fh.flush()
            statuses[cid] = "failed" if record.failed else "done"
            if record.failed:
                failures += 1
                print(f"cell {cid}: FAILED ({record.failure_reason})", file=sys.stderr)
            _write_manifest(manifest_path, config, statuses)

        if config.jobs <= 1:
            for est, mname, seed in todo:
                cid, record = _cell_worker((config, est, mname, seed))
                consume(cid, record)
        else:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                futures = [pool.submit(_cell_worker, (config, est, mname, seed)) for est, mname, seed in todo]
                for fut in as_completed(futures):
                    cid, record = fut.result()
                    consume(cid, record)

    _write_manifest(manifest_path, config, statuses)
    return 1 if failures else 0


# -- summaries --------------------------------------------------------------------


def _read_results(results_path: str):
    records: dict[tuple, RunRecord] = {}
    with open(results_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{results_path}: file is empty") from None
        if tuple(header) != RESULTS_HEADER:
            raise InputError(f"{results_path}: unexpected header {header}")
        for r, row in enumerate(reader, start=2):
            if len(row) != len(RESULTS_HEADER):
                raise InputError(f"{results_path}: row {r} has {len(row)} cells, expected {len(RESULTS_HEADER)}")
            try:
                dataset, variant, estimator, method, seed, step, n_labeled, pool, test, secs, status = row
                key = (dataset, variant, estimator, method, int(seed))
                rec = records.setdefault(
                    key,
                    RunRecord(method=method, estimator=estimator, dataset=dataset,
                              variant=variant, seed=int(seed)),
                )
                if status == "failed":
                    rec.failed = True
                rec.entries.append(
                    StepEntry(step=int(step), n_labeled=int(n_labeled),
                              sqrt_pehe_pool=float(pool), sqrt_pehe_test=float(test),
                              acq_seconds=float(secs))
                )
            except (ValueError, IndexError) as exc:
                raise InputError(f"{results_path}: row {r} is malformed: {exc}") from None
    for rec in records.values():
        rec.entries.sort(key=lambda e: e.step)
    return list(records.values())


def _fmt(v: float | None) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.12g}"


def emit_summary(results_path: str, out_path: str | None = None) -> str:
    """Aggregate curves plus relative improvement over the random baseline.

    Long-format rows, one per metric; undefined improvements (random curve at
    exactly 0) are left as empty cells. Written atomically.
    """
    records = _read_results(results_path)
    rows = aggregate_runs(records)
    failures = count_failures(records)

    by_cell: dict[tuple, dict] = {}
    for row in rows:
        key = (row.dataset, row.variant, row.estimator, row.method)
        by_cell.setdefault(key, {})[row.step] = row

    ok_records = [r for r in records if not r.failed]
    by_run: dict[tuple, RunRecord] = {
        (r.dataset, r.variant, r.estimator, r.method, r.seed): r for r in ok_records
    }

    out_lines: list[list[str]] = []
    for row in rows:
        base = [row.dataset, row.variant, row.estimator, row.method, str(row.step), str(row.n_labeled)]
        out_lines.append(base + ["sqrt_pehe_pool", _fmt(row.mean_pool), _fmt(row.sd_pool), str(row.count)])
        out_lines.append(base + ["sqrt_pehe_test", _fmt(row.mean_test), _fmt(row.sd_test), str(row.count)])
        out_lines.append(base + ["acq_seconds", _fmt(row.mean_seconds), "", str(row.count)])

        rand_key = (row.dataset, row.variant, row.estimator, "random")
        rand_row = by_cell.get(rand_key, {}).get(row.step)
        for metric, value, rand_value in (
            ("rel_impr_pool_meancurve", row.mean_pool, None if rand_row is None else rand_row.mean_pool),
            ("rel_impr_test_meancurve", row.mean_test, None if rand_row is None else rand_row.mean_test),
        ):
            if rand_value is None or rand_value == 0.0:
                out_lines.append(base + [metric, "", "", str(row.count)])
            else:
                out_lines.append(base + [metric, _fmt((rand_value - value) / rand_value), "", str(row.count)])

        for metric, attr in (("rel_impr_pool_perseed", "sqrt_pehe_pool"), ("rel_impr_test_perseed", "sqrt_pehe_test")):
            vals = []
            for seed_key, rec in by_run.items():
                if seed_key[:4] != (row.dataset, row.variant, row.estimator, row.method):
                    continue
                rand_rec = by_run.get((row.dataset, row.variant, row.estimator, "random", seed_key[4]))
                if rand_rec is None:
                    continue
                mine = next((e for e in rec.entries if e.step == row.step), None)
                theirs = next((e for e in rand_rec.entries if e.step == row.step), None)
                if mine is None or theirs is None or getattr(theirs, attr) == 0.0:
                    continue
                vals.append((getattr(theirs, attr) - getattr(mine, attr)) / getattr(theirs, attr))
            if vals:
                out_lines.append(base + [metric, _fmt(float(np.mean(vals))), "", str(len(vals))])
            else:
                out_lines.append(base + [metric, "", "", "0"])

    for (dataset, variant, estimator, method), n_failed in sorted(failures.items()):
        out_lines.append([dataset, variant, estimator, method, "", "", "failed_runs", str(n_failed), "", ""])

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(SUMMARY_HEADER)
    writer.writerows(out_lines)
    out_path = out_path or os.path.join(os.path.dirname(os.path.abspath(results_path)), "summary.csv")
    _atomic_write(out_path, buf.getvalue())
    return out_path


# -- dataset dumps -------------------------------------------------------------------


def dump_dataset(name: str, out_csv: str, n: int = 2000, seed: int = 0, shift: bool = False,
                 covariates_csv: str | None = None) -> None:
    """Write one generated dataset (with ground truth columns) to CSV."""
    rng = rng_stream(seed, name, "dump")
    if name == "causalbald":
        ds = gen_causalbald(n, shift=shift, rng=rng)
    elif name in ("hahn_linear", "hahn_nonlinear"):
        ds = gen_hahn(n, prognostic=name.split("_", 1)[1], shift=shift, rng=rng)
    elif name in ("ihdp", "actg"):
        if covariates_csv is None:
            raise InputError(f"dataset {name!r} requires --covariates")
        covs, t = load_covariates_csv(covariates_csv, name)
        if name == "ihdp":
            ds = gen_ihdp_outcomes(covs, t, shift=shift, rng=rng)
        else:
            if shift:
                raise InputError("the actg benchmark has no shift variant")
            ds = gen_actg_outcomes(covs, t, rng=rng)
    else:
        raise InputError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")

    d = ds.covariates.shape[1]
    header = [f"x{i + 1}" for i in range(d)] + ["t", "y", "mu0", "mu1", "tau"]
    if ds.propensity_true is not None:
        header.append("pi")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for i in range(ds.n):
        row = [f"{v:.12g}" for v in ds.covariates[i]]
        row += [str(int(ds.treatments[i]))]
        row += [f"{v:.12g}" for v in (ds.outcomes[i], ds.mu0[i], ds.mu1[i], ds.tau_true[i])]
        if ds.propensity_true is not None:
            row.append(f"{ds.propensity_true[i]:.12g}")
        writer.writerow(row)
    _atomic_write(out_csv, buf.getvalue())


# -- entry point ------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cate-al", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiment matrix of a config file")
    p_run.add_argument("config")
    p_run.add_argument("--append", action="store_true", help="resume, skipping completed cells")
    p_run.add_argument("--jobs", type=int, default=None, help="worker processes")
    p_run.add_argument("--out", default=None, help="output directory override")

    p_sum = sub.add_parser("summarize", help="aggregate a results.csv into summary tables")
    p_sum.add_argument("results")
    p_sum.add_argument("--out", default=None)

    p_gen = sub.add_parser("gen-data", help="dump a generated dataset to CSV")
    p_gen.add_argument("dataset", choices=DATASET_NAMES)
    p_gen.add_argument("out_csv")
    p_gen.add_argument("--n", type=int, default=2000)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--shift", action="store_true")
    p_gen.add_argument("--covariates", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = parse_config(args.config)
            if args.jobs is not None:
                config = replace(config, jobs=args.jobs)
            if args.out is not None:
                config = replace(config, out_dir=args.out)
            return run_matrix(config, append=args.append)
        if args.command == "summarize":
            path = emit_summary(args.results, args.out)
            print(path)
            return 0
        if args.command == "gen-data":
            dump_dataset(args.dataset, args.out_csv, n=args.n, seed=args.seed,
                         shift=args.shift, covariates_csv=args.covariates)
            print(args.out_csv)
            return 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
