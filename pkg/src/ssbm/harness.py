"""
Batch commands behind the ``ssbm`` CLI: generate, fit, eval and bench.

Network and suite configs are INI documents.  A network config has a single
``[network]`` section::

    [network]
    family = sg          ; sg | block_pair | network_vi
    c = 4
    m = 32
    k = 32
    p_in = 0.8
    seed = 7

Block-pair networks list ``block_sizes = 32,32`` and one ``pi.<a>.<b> =
pos,neg,null`` key per unordered block pair, numbered from 1.

A bench suite has an optional ``[fit]`` section and one ``[sweep.<name>]``
section per curve.  A sweep holds the network keys above plus ``param``
(the swept key), either ``values`` or ``start``/``stop``/``step``,
optional ``tie`` (keys set equal to the swept value), ``seeds`` (runs per
point) and ``base_seed``.

All outputs are JSON, except bench curves, which are CSV.
"""

import configparser
import csv
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, SsbmError
from .evaluation import k_recovery
from .graph import (Partition, load_edge_list, load_partition,
                    write_edge_list, write_partition)
from .learner import FitConfig, fit
from .synth import (BlockPairConfig, SgConfig, generate_block_pair,
                    generate_sg, network_vi_config)

__all__ = [
    "FAMILIES",
    "CSV_COLUMNS",
    "network_config_from_mapping",
    "load_network_config",
    "fit_config_from_mapping",
    "generate_network",
    "file_digest",
    "cmd_generate",
    "cmd_fit",
    "cmd_eval",
    "cmd_bench",
    "load_suite",
    "Sweep",
]

logger = logging.getLogger(__name__)

FAMILIES = ("sg", "block_pair", "network_vi")
CSV_COLUMNS = ("param_value", "seed", "nmi", "k_found", "wall_time_ms",
               "error")

_SG_INT = ("c", "m")
_SG_FLOAT = ("k", "p_in", "p_minus", "p_plus")
_FIT_INT = ("k_min", "k_max", "restarts", "max_sweeps", "smoothing_steps")
_FIT_FLOAT = ("epsilon", "lambda_floor")
_FIT_STR = ("init", "assignment")


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _number(key, text, kind=float):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ConfigError(key, f"not a number: {text!r}") from None
    if kind is int:
        if not value.is_integer():
            raise ConfigError(key, f"expected an integer, got {text!r}")
        return int(value)
    return value


def _triple(key, text):
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise ConfigError(key, f"expected three comma-separated values, got "
                               f"{text!r}")
    return tuple(_number(key, p) for p in parts)


def network_config_from_mapping(section, seed=None):
    """
    Build an :class:`SgConfig` or :class:`BlockPairConfig`.

    ``seed`` overrides any ``seed`` key in ``section``.
    """
    section = dict(section)
    family = section.pop("family", "sg").strip().lower()
    if family not in FAMILIES:
        raise ConfigError("family", f"must be one of {FAMILIES}")
    if seed is None:
        seed = _number("seed", section.pop("seed", 0), int)
    else:
        section.pop("seed", None)

    if family == "sg":
        missing = [key for key in ("c", "m", "k", "p_in") if key not in section]
        if missing:
            raise ConfigError(missing[0], "required for family sg")
        kwargs = {key: _number(key, section.pop(key), int)
                  for key in _SG_INT}
        kwargs.update({key: _number(key, section.pop(key))
                       for key in _SG_FLOAT if key in section})
        _reject_extra(section)
        return SgConfig(seed=seed, **kwargs)

    if family == "network_vi":
        block_size = _number("block_size", section.pop("block_size", 32), int)
        _reject_extra(section)
        if block_size < 1:
            raise ConfigError("block_size", "must be positive")
        return network_vi_config(seed=seed, block_size=block_size)

    if "block_sizes" not in section:
        raise ConfigError("block_sizes", "required for family block_pair")
    sizes = tuple(_number("block_sizes", s, int)
                  for s in section.pop("block_sizes").split(",") if s.strip())
    pi = {}
    for key in [k for k in section if k.startswith("pi.")]:
        try:
            _, a, b = key.split(".")
            pair = (int(a) - 1, int(b) - 1)
        except ValueError:
            raise ConfigError(key, "expected pi.<block>.<block>") from None
        pi[pair] = _triple(key, section.pop(key))
    _reject_extra(section)
    return BlockPairConfig(block_sizes=sizes, pi=pi, seed=seed)


def _reject_extra(section):
    if section:
        key = sorted(section)[0]
        raise ConfigError(key, "unknown key")


def _read_ini(path):
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        try:
            parser.read_file(fh, source=str(path))
        except configparser.Error as exc:
            raise ConfigError("config", f"{path}: {exc}") from None
    return parser


def load_network_config(path, seed=None):
    parser = _read_ini(path)
    if not parser.has_section("network"):
        raise ConfigError("network", f"{path}: missing [network] section")
    return network_config_from_mapping(parser["network"], seed=seed)


def fit_config_from_mapping(section, **overrides):
    """:class:`FitConfig` from string values; ``None`` overrides are ignored."""
    kwargs = {}
    for key, text in dict(section).items():
        if key in _FIT_INT:
            kwargs[key] = None if text.lower() == "none" else _number(key, text,
                                                                     int)
        elif key in _FIT_FLOAT:
            kwargs[key] = _number(key, text)
        elif key in _FIT_STR:
            kwargs[key] = text.strip()
        else:
            raise ConfigError(key, "unknown fit option")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return FitConfig(**kwargs)


def generate_network(config):
    if isinstance(config, SgConfig):
        return generate_sg(config)
    return generate_block_pair(config)


def _config_echo(config):
    echo = asdict(config)
    if isinstance(config, BlockPairConfig):
        echo["family"] = "block_pair"
        echo["pi"] = np.asarray(config.pi).tolist()
    else:
        echo["family"] = "sg"
    return echo


def file_digest(path):
    sha = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            sha.update(chunk)
    return "sha256:" + sha.hexdigest()


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


def cmd_generate(config_path, out_dir, seed=None):
    """
    Generate one network and write ``graph.tsv``, ``truth.txt`` and
    ``manifest.json`` into ``out_dir``.

    :returns: the manifest as a dict.
    """
    started = _now()
    config = load_network_config(config_path, seed=seed)
    graph, truth = generate_network(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph_path, truth_path = out_dir / "graph.tsv", out_dir / "truth.txt"
    write_edge_list(graph, graph_path)
    write_partition(truth, truth_path, graph.node_labels)
    rows, cols, signs = graph.edges()
    if not graph.directed:
        signs = signs[rows < cols]
    manifest = {
        "command": "generate",
        "version": __version__,
        "config": _config_echo(config),
        "seed": config.seed,
        "summary": {
            "n": graph.n,
            "edges": graph.n_edges,
            "positive": int(np.count_nonzero(signs > 0)),
            "negative": int(np.count_nonzero(signs < 0)),
            "k_true": truth.k,
        },
        "files": {
            "graph": graph_path.name,
            "graph_digest": file_digest(graph_path),
            "truth": truth_path.name,
        },
        "started_at": started,
        "finished_at": _now(),
    }
    _write_json(out_dir / "manifest.json", manifest)
    logger.info("wrote %d-node graph with %d edges to %s", graph.n,
                graph.n_edges, out_dir)
    return manifest


def _result_payload(result, graph):
    params = result.best_params
    return {
        "k_found": result.k_found,
        "best_cost": result.best_cost,
        "assignment": result.best_partition.assignment.tolist(),
        "node_labels": list(graph.node_labels),
        "phi": params.phi[params.live].tolist(),
        "cost_trace": [[s, k, c] for s, k, c in result.cost_trace],
        "per_k_best": {str(k): v for k, v in result.per_k_best.items()},
        "restart": result.restart,
        "restart_costs": result.restart_costs,
        "n_sweeps": result.n_sweeps,
        "converged": result.converged,
        "flags": result.flags,
    }


def cmd_fit(graph_path, out_path, config=None):
    """
    Fit a graph file and write the run record to ``out_path``.

    :returns: the run record as a dict.  ``record["result"]["converged"]``
        is False when any regime hit the sweep cap.
    """
    config = config or FitConfig()
    started = _now()
    digest = file_digest(graph_path)
    graph = load_edge_list(graph_path)
    result = fit(graph, config)
    echo = asdict(config)
    echo["k_max"] = config.resolved_k_max(graph.n)
    record = {
        "command": "fit",
        "version": __version__,
        "config": echo,
        "input": str(graph_path),
        "input_digest": digest,
        "result": _result_payload(result, graph),
        "metrics": {"wall_time_s": result.wall_time},
        "started_at": started,
        "finished_at": _now(),
    }
    _write_json(out_path, record)
    logger.info("k_found=%d cost=%.4f in %.2fs", result.k_found,
                result.best_cost, result.wall_time)
    return record


def _aligned_assignments(result_labels, result_assign, truth_labels, truth):
    if sorted(result_labels) != sorted(truth_labels):
        only_r = set(result_labels) - set(truth_labels)
        only_t = set(truth_labels) - set(result_labels)
        raise ConfigError("nodes", f"node sets differ ({len(only_r)} only in "
                                   f"result, {len(only_t)} only in truth)")
    position = {label: i for i, label in enumerate(result_labels)}
    order = np.array([position[label] for label in truth_labels])
    return np.asarray(result_assign)[order], truth.assignment


def cmd_eval(result_path, truth_path, out_path=None):
    """
    Score a fit record against a ``node block`` truth file.

    :returns: ``{"nmi", "k_true", "k_found"}`` plus provenance.
    """
    with open(result_path, encoding="utf-8") as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("result", f"{result_path}: {exc}") from None
    try:
        payload = record["result"]
        labels, assign = payload["node_labels"], payload["assignment"]
    except (KeyError, TypeError):
        raise ConfigError("result", f"{result_path}: not a fit record") from None
    truth_labels, truth = load_partition(truth_path)
    found, expected = _aligned_assignments(labels, assign, truth_labels, truth)
    report = k_recovery(Partition.from_labels(expected),
                        Partition.from_labels(found))
    metrics = {
        "command": "eval",
        "version": __version__,
        "result": str(result_path),
        "truth": str(truth_path),
        "nmi": report.nmi,
        "k_true": report.k_true,
        "k_found": report.k_found,
    }
    if out_path is not None:
        _write_json(out_path, metrics)
    return metrics


class Sweep:
    """One ``[sweep.<name>]`` section: a parameter grid over one family."""

    def __init__(self, name, section):
        self.name = name
        section = dict(section)
        self.param = section.pop("param", None)
        if not self.param:
            raise ConfigError(f"sweep.{name}.param", "required")
        self.tie = tuple(t.strip() for t in section.pop("tie", "").split(",")
                         if t.strip())
        self.seeds = _number("seeds", section.pop("seeds", 10), int)
        self.base_seed = _number("base_seed", section.pop("base_seed", 0), int)
        if self.seeds < 1:
            raise ConfigError(f"sweep.{name}.seeds", "must be at least 1")
        if "values" in section:
            self.values = [_number("values", v)
                           for v in section.pop("values").split(",")
                           if v.strip()]
            for key in ("start", "stop", "step"):
                section.pop(key, None)
        else:
            try:
                start = _number("start", section.pop("start"))
                stop = _number("stop", section.pop("stop"))
                step = _number("step", section.pop("step"))
            except KeyError:
                raise ConfigError(f"sweep.{name}",
                                  "give values or start/stop/step") from None
            if step <= 0 or stop < start:
                raise ConfigError(f"sweep.{name}.step",
                                  "need step > 0 and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            self.values = [round(start + i * step, 12) for i in range(count)]
        if not self.values:
            raise ConfigError(f"sweep.{name}.values", "empty grid")
        self.base = section
        # validate every grid point up front
        for value in self.values:
            self.network_config(value, 0)

    def network_config(self, value, seed):
        section = dict(self.base)
        for key in (self.param,) + self.tie:
            section[key] = _format_value(value)
        return network_config_from_mapping(section, seed=seed)

    def run_seed(self, point, rep):
        state = np.random.SeedSequence([self.base_seed, point, rep])
        return int(state.generate_state(1, dtype=np.uint32)[0])

    def tasks(self):
        for point, value in enumerate(self.values):
            for rep in range(self.seeds):
                yield point, value, self.run_seed(point, rep)


def _format_value(value):
    return f"{value:.12g}"


def load_suite(path, base_seed=None):
    """Parse a bench suite into ``(sweeps, fit_section)``."""
    parser = _read_ini(path)
    sweeps = []
    for section in parser.sections():
        if section.startswith("sweep."):
            mapping = dict(parser[section])
            if base_seed is not None:
                mapping["base_seed"] = str(base_seed)
            sweeps.append(Sweep(section[len("sweep."):], mapping))
        elif section != "fit":
            raise ConfigError(section, "unknown section")
    if not sweeps:
        raise ConfigError("sweep", f"{path}: no [sweep.<name>] sections")
    fit_section = dict(parser["fit"]) if parser.has_section("fit") else {}
    return sweeps, fit_section


def _bench_point(sweep, value, seed, fit_config):
    started = time.perf_counter()
    try:
        net = sweep.network_config(value, seed)
        graph, truth = generate_network(net)
        config = fit_config.__class__(**{**asdict(fit_config), "seed": seed,
                                         "workers": 1})
        result = fit(graph, config)
        report = k_recovery(truth, result)
        row = {"nmi": repr(float(report.nmi)), "k_found": str(report.k_found),
               "error": ""}
    except (SsbmError, ValueError, ArithmeticError) as exc:
        logger.warning("sweep %s value %s seed %d failed: %s", sweep.name,
                       value, seed, exc)
        row = {"nmi": "", "k_found": "", "error": type(exc).__name__}
    row.update(param_value=_format_value(value), seed=str(seed),
               wall_time_ms=f"{(time.perf_counter() - started) * 1e3:.1f}")
    return row


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _summarize(sweep, rows):
    points = []
    for value in sweep.values:
        key = _format_value(value)
        ok = [r for r in rows if r["param_value"] == key and not r["error"]]
        nmis = [float(r["nmi"]) for r in ok]
        ks = [int(r["k_found"]) for r in ok]
        points.append({
            "param_value": value,
            "median_nmi": float(np.median(nmis)) if nmis else None,
            "median_k_found": float(np.median(ks)) if ks else None,
            "runs": sum(r["param_value"] == key for r in rows),
            "failed": sum(r["param_value"] == key and bool(r["error"])
                          for r in rows),
        })
    return points


def cmd_bench(suite_path, out_dir, workers=1, base_seed=None, **fit_overrides):
    """
    Run every sweep of a suite and write ``<sweep>.csv`` plus
    ``summary.json`` into ``out_dir``.

    Points run in a process pool when ``workers > 1``; rows are assembled in
    grid order so CSV bodies depend only on the suite and seeds.
    """
    started = _now()
    sweeps, fit_section = load_suite(suite_path, base_seed=base_seed)
    fit_config = fit_config_from_mapping(fit_section, **fit_overrides)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(sweep, value, seed) for sweep in sweeps
            for _, value, seed in sweep.tasks()]
    logger.info("bench: %d runs over %d sweeps", len(jobs), len(sweeps))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_point, *zip(*jobs),
                                 [fit_config] * len(jobs)))
    else:
        rows = [_bench_point(s, v, seed, fit_config) for s, v, seed in jobs]

    summary = {
        "command": "bench",
        "version": __version__,
        "suite": str(suite_path),
        "suite_digest": file_digest(suite_path),
        "fit": asdict(fit_config),
        "sweeps": {},
        "started_at": started,
    }
    cursor = 0
    for sweep in sweeps:
        count = len(sweep.values) * sweep.seeds
        sweep_rows = rows[cursor:cursor + count]
        cursor += count
        csv_path = out_dir / f"{sweep.name}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(sweep_rows))
        summary["sweeps"][sweep.name] = {
            "param": sweep.param,
            "tie": list(sweep.tie),
            "network": dict(sweep.base),
            "seeds": sweep.seeds,
            "base_seed": sweep.base_seed,
            "csv": csv_path.name,
            "points": _summarize(sweep, sweep_rows),
        }
    summary["finished_at"] = _now()
    _write_json(out_dir / "summary.json", summary)
    return summary
