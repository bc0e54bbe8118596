"""Command-line front end: ``onmfkit run | gen | bench``.

``run`` executes one algorithm on one dataset for a number of seeds and
writes per-run outputs plus a summary.  ``bench`` runs every
(algorithm, dataset) pair of a suite and prints an accuracy table.
``gen`` writes synthetic datasets to disk.

Settings can come from an INI file (``--config``); any flag given on the
command line overrides the file.  ``ONMFKIT_THREADS`` caps the number of
repetitions run concurrently.
"""

import argparse
import configparser
import csv
import json
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.sparse as sp

from .baselines import kmeans, spherical_kmeans
from .data import (
    UNLABELED,
    DatasetSpec,
    SwimmerParams,
    generate_directional_clusters,
    generate_separable,
    generate_swimmer,
    inline_clusters_spec,
    load_dataset,
    separated_clusters_spec,
    write_labels,
    write_matrix_csv,
    write_results,
    write_sparse_text_matrix,
)
from .emonmf import em_onmf, optimal_coefficients
from .errors import ConfigError, OnmfError, OnmfWarning
from .metrics import accuracy, orthogonality_residual, reconstruction_error
from .onpmf import OnpMfConfig, extract_clusters, onp_mf

log = logging.getLogger("onmfkit")

ALGORITHMS = ("em-onmf", "onp-mf", "kmeans", "skm")
GENERATORS = ("swimmer", "directional", "inline", "separated", "separable")
DEFAULT_MAX_ITER = {"em-onmf": 5000, "kmeans": 5000, "skm": 5000, "onp-mf": 20000}
ONP_KEYS = ("alpha0", "rho0", "growth", "neg_tol")

SUMMARY_FIELDS = ("run", "seed", "accuracy", "iterations", "seconds", "objective", "best")
TABLE_FIELDS = (
    "algorithm",
    "dataset",
    "m",
    "n",
    "nnz",
    "k",
    "reps",
    "accuracy_mean",
    "accuracy_std",
    "iterations_mean",
    "seconds_mean",
    "status",
)


@dataclass
class ExperimentConfig:
    algorithm: str
    dataset: DatasetSpec
    k: int = None
    reps: int = 1
    base_seed: int = 0
    max_iter: int = None
    onp: dict = field(default_factory=dict)
    out: str = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.reps < 1:
            raise ConfigError(f"reps must be at least 1, got {self.reps}")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigError(f"max-iter must be at least 1, got {self.max_iter}")
        unknown = set(self.onp) - set(f.name for f in fields(OnpMfConfig))
        if unknown:
            raise ConfigError(f"unknown ONP-MF settings {sorted(unknown)}")
        if self.algorithm == "onp-mf" and self.reps > 1:
            warnings.warn("onp-mf is deterministic; running a single repetition", OnmfWarning, stacklevel=2)
            self.reps = 1
        if self.max_iter is None:
            self.max_iter = DEFAULT_MAX_ITER[self.algorithm]


@dataclass
class RunResult:
    metrics: dict
    partition: np.ndarray
    trace: object
    U: np.ndarray
    V: np.ndarray
    objective: float


# -- running ----------------------------------------------------------------------


def worker_count(n_tasks):
    """Concurrent repetitions: CPU count, capped by ``ONMFKIT_THREADS``."""
    cap = os.environ.get("ONMFKIT_THREADS")
    workers = os.cpu_count() or 1
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise ConfigError(f"ONMFKIT_THREADS must be an integer, got {cap!r}") from None
        if cap < 1:
            raise ConfigError(f"ONMFKIT_THREADS must be at least 1, got {cap}")
        workers = min(workers, cap)
    return max(1, min(workers, n_tasks))


def resolve_k(cfg, ds):
    if cfg.k is not None:
        return cfg.k
    if cfg.dataset.expected_k is not None:
        return cfg.dataset.expected_k
    if ds.labels is not None:
        return ds.n_classes
    raise ConfigError("k is required when the dataset has no labels")


def run_once(ds, cfg, seed, k=None):
    """One run of ``cfg.algorithm`` on ``ds``; returns a :class:`RunResult`."""
    M = ds.matrix
    k = resolve_k(cfg, ds) if k is None else k
    start = time.perf_counter()
    neg = 0.0
    if cfg.algorithm == "em-onmf":
        fact, p, trace = em_onmf(M, k, seed=seed, max_iter=cfg.max_iter)
        U, V = fact.U, fact.V
    elif cfg.algorithm == "onp-mf":
        fact, trace = onp_mf(M, k, OnpMfConfig(max_iter=cfg.max_iter, **cfg.onp))
        U, V = fact.U, fact.V
        p = extract_clusters(V)
        if len(trace):
            neg = float(trace.column("neg_residual")[-1])
    elif cfg.algorithm == "kmeans":
        p, C, trace = kmeans(M, k, seed=seed, max_iter=cfg.max_iter)
        # normalized indicator rows; U V is still the centroid of each point
        counts = np.bincount(p, minlength=k).astype(float)
        V = np.zeros((k, p.size))
        V[p, np.arange(p.size)] = 1.0 / np.sqrt(counts[p])
        U = C * np.sqrt(counts)
    else:
        p, C, trace = spherical_kmeans(M, k, seed=seed, max_iter=cfg.max_iter)
        U, V = C, optimal_coefficients(M, C, p)
    seconds = time.perf_counter() - start

    err = reconstruction_error(M, U, V)
    acc = None
    if ds.labels is not None:
        mask = ds.labeled
        acc = accuracy(p[mask], ds.labels[mask])
    metrics = {
        "algorithm": cfg.algorithm,
        "dataset": ds.name,
        "k": int(k),
        "seed": None if cfg.algorithm == "onp-mf" else int(seed),
        "accuracy": acc,
        "iterations": int(trace.iterations),
        "seconds": round(seconds, 3),
        "final_error": err,
        "final_orth_residual": orthogonality_residual(V),
        "final_neg_residual": neg,
    }
    return RunResult(metrics, p, trace, U, V, err**2)


def run_repetitions(ds, cfg, k=None):
    """All repetitions of ``cfg`` (seeds ``base_seed + i``), in seed order."""
    k = resolve_k(cfg, ds) if k is None else k
    seeds = [cfg.base_seed + i for i in range(cfg.reps)]
    workers = worker_count(len(seeds))
    if workers == 1:
        return [run_once(ds, cfg, s, k) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_once(ds, cfg, s, k), seeds))


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def summarize(results):
    """Aggregate of a list of :class:`RunResult` (best = lowest objective)."""
    best = int(np.argmin([r.objective for r in results]))
    return {
        "algorithm": results[0].metrics["algorithm"],
        "dataset": results[0].metrics["dataset"],
        "k": results[0].metrics["k"],
        "reps": len(results),
        "mean_accuracy": _mean([r.metrics["accuracy"] for r in results]),
        "mean_iterations": _mean([r.metrics["iterations"] for r in results]),
        "mean_seconds": round(_mean([r.metrics["seconds"] for r in results]), 3),
        "best_run": best,
        "best_objective": results[best].objective,
        "best_accuracy": results[best].metrics["accuracy"],
    }


def write_experiment(out, results, summary):
    os.makedirs(out, exist_ok=True)
    for i, r in enumerate(results):
        write_results(os.path.join(out, f"run_{i:03d}"), r.metrics, r.partition, r.trace, r.U, r.V)
    best = results[summary["best_run"]]
    write_results(os.path.join(out, "best"), best.metrics, best.partition, best.trace, best.U, best.V)
    with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for i, r in enumerate(results):
            m = r.metrics
            w.writerow([i, m["seed"], m["accuracy"], m["iterations"], m["seconds"], repr(r.objective),
                        "*" if i == summary["best_run"] else ""])
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def run_experiment(cfg):
    """Load the dataset, run every repetition, write outputs if ``cfg.out``."""
    ds = load_dataset(cfg.dataset)
    results = run_repetitions(ds, cfg)
    summary = summarize(results)
    if cfg.out:
        write_experiment(cfg.out, results, summary)
    return results, summary


# -- configuration ----------------------------------------------------------------


def _parse_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _parse_params(items):
    params = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        params[key.strip().replace("-", "_")] = _parse_value(value.strip())
    return params


def _read_config(path):
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    return parser


def _flag_settings(args, keys):
    """Flags that were given explicitly (``None`` means absent)."""
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _as_bool(value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _as_int(name, value):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None


def _as_float(name, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


def dataset_spec(source, labels=None, params=None, seed=0, transpose=False, drop_zero=False, k=None):
    """A generator name or a file path turned into a :class:`DatasetSpec`."""
    if source is None:
        raise ConfigError("a dataset is required")
    if source in GENERATORS:
        return DatasetSpec(generator=source, params=params or {}, seed=seed,
                           drop_zero_columns=drop_zero, expected_k=k)
    return DatasetSpec(path=source, labels=labels, transpose=transpose,
                       drop_zero_columns=drop_zero, expected_k=k)


RUN_KEYS = ("algorithm", "dataset", "labels", "k", "reps", "seed", "out", "max_iter",
            "alpha0", "rho0", "growth", "neg_tol", "transpose", "drop_zero_columns")


def experiment_from_settings(s):
    """Build an :class:`ExperimentConfig` from a flat settings dict."""
    if "algorithm" not in s:
        raise ConfigError("an algorithm is required (--algorithm)")
    seed = _as_int("seed", s.get("seed", 0))
    spec = dataset_spec(
        s.get("dataset"),
        labels=s.get("labels"),
        params=s.get("params"),
        seed=seed,
        transpose=_as_bool(s.get("transpose", False)),
        drop_zero=_as_bool(s.get("drop_zero_columns", False)),
    )
    return ExperimentConfig(
        algorithm=s["algorithm"],
        dataset=spec,
        k=None if s.get("k") is None else _as_int("k", s["k"]),
        reps=_as_int("reps", s.get("reps", 1)),
        base_seed=seed,
        max_iter=None if s.get("max_iter") is None else _as_int("max-iter", s["max_iter"]),
        onp={key: _as_float(key, s[key]) for key in ONP_KEYS if s.get(key) is not None},
        out=s.get("out"),
    )


# -- subcommands ------------------------------------------------------------------


def cmd_run(args):
    settings = {}
    if args.config:
        parser = _read_config(args.config)
        if parser.has_section("run"):
            settings.update(parser["run"])
        if parser.has_section("params"):
            settings["params"] = {k: _parse_value(v) for k, v in parser["params"].items()}
    settings.update(_flag_settings(args, RUN_KEYS))
    if args.param:
        settings["params"] = {**settings.get("params", {}), **_parse_params(args.param)}
    cfg = experiment_from_settings(settings)
    _, summary = run_experiment(cfg)
    acc = summary["mean_accuracy"]
    print(
        f"{summary['algorithm']} on {summary['dataset']} (k={summary['k']}, reps={summary['reps']}): "
        f"accuracy {'n/a' if acc is None else f'{acc:.3f}'}, "
        f"iterations {summary['mean_iterations']:.1f}, seconds {summary['mean_seconds']:.3f}, "
        f"best run {summary['best_run']} (objective {summary['best_objective']:.6g})"
    )
    return 0


def cmd_gen(args):
    params = _parse_params(args.param)
    os.makedirs(args.out, exist_ok=True)
    name = args.generator
    if name == "swimmer":
        try:
            sw = SwimmerParams(**params)
        except TypeError as exc:
            raise ConfigError(f"bad swimmer parameters: {exc}") from None
        M, parts = generate_swimmer(sw)
        base = os.path.join(args.out, "swimmer")
        write_sparse_text_matrix(base + ".mat", sp.csr_matrix(M))
        with open(base + ".parts", "w") as fh:
            for part in parts:
                fh.write(" ".join(str(j + 1) for j in part) + "\n")
        labels = np.full(M.shape[1], UNLABELED)
        for i, part in enumerate(parts):
            labels[part] = i
        write_labels(base + ".labels", labels)
        written = [base + ".mat", base + ".parts", base + ".labels"]
    elif name in ("directional", "inline", "separated"):
        preset = params.pop("preset", "inline" if name == "inline" else "separated")
        if preset not in ("inline", "separated") or params:
            raise ConfigError(f"directional generator takes only preset=inline|separated, got {params or preset}")
        spec = inline_clusters_spec() if preset == "inline" else separated_clusters_spec()
        ds = generate_directional_clusters(spec, seed=args.seed)
        base = os.path.join(args.out, name)
        write_matrix_csv(base + ".csv", ds.matrix)
        write_labels(base + ".labels", ds.labels)
        written = [base + ".csv", base + ".labels"]
    else:
        try:
            ds = generate_separable(seed=args.seed, **params)
        except TypeError as exc:
            raise ConfigError(f"bad separable parameters: {exc}") from None
        base = os.path.join(args.out, "separable")
        write_matrix_csv(base + ".csv", ds.matrix)
        write_labels(base + ".labels", ds.labels)
        written = [base + ".csv", base + ".labels"]
    for path in written:
        print(path)
    return 0


def _split_list(value):
    if isinstance(value, (list, tuple)):
        value = ",".join(value)
    return [v.strip() for v in str(value).split(",") if v.strip()]


def suite_from_args(args):
    """``(entries, base_settings)``; each entry is ``(algorithm, name, settings)``."""
    base = {}
    dataset_sections = {}
    if args.config:
        parser = _read_config(args.config)
        if parser.has_section("suite"):
            base.update(parser["suite"])
        for sec in parser.sections():
            if sec.startswith("dataset "):
                dataset_sections[sec[len("dataset "):].strip()] = dict(parser[sec])
    flags = _flag_settings(args, RUN_KEYS)
    base.update(flags)
    algorithms = _split_list(base.pop("algorithm", base.pop("algorithms", "")))
    datasets = _split_list(base.pop("dataset", base.pop("datasets", "")))
    entries = []
    for ds_name in datasets:
        ds_settings = dict(dataset_sections.get(ds_name, {}))
        source = ds_settings.pop("path", None) or ds_settings.pop("generator", None) or ds_name
        for alg in algorithms:
            s = {**base, **ds_settings, "algorithm": alg, "dataset": source}
            # command-line flags beat per-dataset sections
            s.update({k: v for k, v in flags.items() if k not in ("algorithm", "dataset")})
            entries.append((alg, ds_name, s))
    return entries


def _bench_row(alg, name, settings):
    row = dict.fromkeys(TABLE_FIELDS, "")
    row.update(algorithm=alg, dataset=name)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", OnmfWarning)
            cfg = experiment_from_settings(settings)
            ds = load_dataset(cfg.dataset)
            M = ds.matrix
            row.update(m=M.shape[0], n=M.shape[1],
                       nnz=int(M.nnz) if sp.issparse(M) else int(np.count_nonzero(M)))
            results = run_repetitions(ds, cfg)
    except (OnmfError, ValueError, OSError) as exc:
        log.error("%s on %s failed: %s", alg, name, exc)
        row["status"] = "FAILED"
        return row
    if caught:
        log.info("%s on %s: %d warnings", alg, name, len(caught))
    accs = [r.metrics["accuracy"] for r in results if r.metrics["accuracy"] is not None]
    row.update(
        k=results[0].metrics["k"],
        reps=len(results),
        accuracy_mean=f"{np.mean(accs):.3f}" if accs else "",
        accuracy_std=f"{np.std(accs):.3f}" if accs else "",
        iterations_mean=f"{np.mean([r.metrics['iterations'] for r in results]):.1f}",
        seconds_mean=f"{np.mean([r.metrics['seconds'] for r in results]):.3f}",
        status="ok",
    )
    return row


def format_table(rows):
    """Aligned text table; accuracy shown as ``mean±std``."""
    header = ["algorithm", "dataset", "m x n", "nnz", "k", "reps", "accuracy", "iterations", "seconds", "status"]
    body = []
    for r in rows:
        acc = f"{r['accuracy_mean']}±{r['accuracy_std']}" if r["accuracy_mean"] != "" else ""
        shape = f"{r['m']} x {r['n']}" if r["m"] != "" else ""
        body.append([r["algorithm"], r["dataset"], shape, r["nnz"], r["k"], r["reps"], acc,
                     r["iterations_mean"], r["seconds_mean"], r["status"]])
    widths = [max(len(str(c)) for c in col) for col in zip(header, *body)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header] + body]
    return "\n".join(lines) + "\n"


def cmd_bench(args):
    rows = [_bench_row(alg, name, s) for alg, name, s in suite_from_args(args)]
    text = format_table(rows)
    sys.stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "table.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TABLE_FIELDS)
            w.writeheader()
            w.writerows(rows)
        with open(os.path.join(args.out, "table.txt"), "w") as fh:
            fh.write(text)
    return 1 if any(r["status"] == "FAILED" for r in rows) else 0


# -- argument parsing -------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="INI file; flags override its values")
    p.add_argument("--algorithm", help=f"one of {', '.join(ALGORITHMS)}")
    p.add_argument("--dataset", help=f"file path or generator ({', '.join(GENERATORS)})")
    p.add_argument("--labels", help="label file, one class per line")
    p.add_argument("--k", type=int, help="number of clusters (default: number of classes)")
    p.add_argument("--reps", type=int, help="repetitions with seeds seed, seed+1, ...")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--max-iter", type=int, help="iteration cap (default 5000, 20000 for onp-mf)")
    p.add_argument("--alpha0", type=float, help="ONP-MF multiplier step scale")
    p.add_argument("--rho0", type=float, help="ONP-MF initial penalty")
    p.add_argument("--growth", type=float, help="ONP-MF penalty growth factor")
    p.add_argument("--neg-tol", type=float, help="ONP-MF stopping threshold")
    p.add_argument("--transpose", action="store_const", const=True,
                   help="read a sparse file as rows = data points")
    p.add_argument("--drop-zero-columns", action="store_const", const=True)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter")


def build_parser():
    parser = argparse.ArgumentParser(prog="onmfkit", description="Orthogonal NMF clustering experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one algorithm on one dataset")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset")
    p_gen.add_argument("generator", choices=GENERATORS)
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--param", action="append", metavar="KEY=VALUE")
    p_gen.set_defaults(func=cmd_gen)

    p_bench = sub.add_parser("bench", help="run a suite of algorithms x datasets")
    _add_common(p_bench)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"onmfkit: error: {exc}", file=sys.stderr)
        return 2
    except (OnmfError, ValueError, OSError) as exc:
        print(f"onmfkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
