"""Command-line pipelines: build the partition, assign, score, audit, simulate.

Every command is a one-shot process over files. Exit codes: 0 success, 2 for
input or contract errors, 3 for numeric failures. Each successful run writes
a manifest (resolved config, seed, paths, version, duration) next to its
primary output; reruns with identical inputs and seed produce byte-identical
primary outputs, while manifests may differ in timestamp and duration only.
"""
from __future__ import annotations

import csv
import functools
import io
import json
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import click
import numpy as np

from . import __version__
from .clusters import assign as assign_cluster
from .clusters import kmeans_fit, load_space, save_space
from .coverage import load_state, save_state
from .embedding import cosine, load_corpus
from .errors import (
    AllZeroError,
    BadParamError,
    EngineError,
    MissingVectorError,
    ParseError,
)
from .jsonfmt import dumps
from .metrics import coverage_report, lorenz_csv
from .rewards import RewardConfig, score_batch
from .simulator import SimConfig, final_state_dict, metrics_csv, run_coevolution


@dataclass
class RunManifest:
    """Reproducibility record emitted by every successful command."""

    command: str
    seed: int | None
    config: dict
    inputs: dict[str, str]
    outputs: dict[str, str]
    engine_version: str
    duration_seconds: float
    created_at: str

    def write(self, path: Path) -> None:
        doc = {
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "engine_version": self.engine_version,
            "duration_seconds": self.duration_seconds,
            "created_at": self.created_at,
        }
        path.write_text(dumps(doc, indent=2) + "\n", encoding="utf-8")


def _manifest(command, seed, config, inputs, outputs, started) -> RunManifest:
    return RunManifest(
        command=command,
        seed=seed,
        config=config,
        inputs=inputs,
        outputs=outputs,
        engine_version=__version__,
        duration_seconds=time.monotonic() - started,
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EngineError as exc:
            _fail(f"{type(exc).__name__.removesuffix('Error')}: {exc}", exc.exit_code)
        except OSError as exc:
            _fail(str(exc), 2)
        except json.JSONDecodeError as exc:
            _fail(f"invalid JSON: {exc}", 2)

    return wrapper


def _load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _read_corpus(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return load_corpus(fh)


@click.group()
@click.version_option(__version__)
def cli():
    """Coverage-regularised curriculum engine."""


@cli.command("build-clusters")
@click.argument("embeddings", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=None, help="Number of clusters (default 128).")
@click.option("--seed", type=int, default=None, help="RNG seed; required for reproducibility.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Cluster-space output file.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON config with k/seed/max_iters/tol; flags override.")
@click.option("--max-iters", type=int, default=None)
@click.option("--tol", type=float, default=None)
@handle_errors
def cmd_build_clusters(embeddings, k, seed, out, config_path, max_iters, tol):
    """Fit the K-means partition over an embedding corpus (one-time, offline)."""
    started = time.monotonic()
    cfg = _load_json(config_path) if config_path else {}
    if not isinstance(cfg, dict):
        raise BadParamError("config file must contain a JSON object")
    unknown = set(cfg) - {"k", "seed", "max_iters", "tol"}
    if unknown:
        raise BadParamError(f"unknown config fields: {sorted(unknown)}")
    k = k if k is not None else cfg.get("k", 128)
    seed = seed if seed is not None else cfg.get("seed")
    max_iters = max_iters if max_iters is not None else cfg.get("max_iters", 100)
    tol = tol if tol is not None else cfg.get("tol", 1e-6)
    if seed is None:
        raise BadParamError("a seed is required (--seed or config field); none given")

    corpus = _read_corpus(embeddings)
    space = kmeans_fit(corpus, k=k, seed=seed, max_iters=max_iters, tol=tol)
    space.provenance["corpus"] = str(embeddings)
    save_space(space, out)
    resolved = {"k": k, "seed": seed, "max_iters": max_iters, "tol": tol}
    _manifest(
        "build-clusters", seed, resolved,
        {"embeddings": str(embeddings)}, {"space": str(out)}, started,
    ).write(Path(str(out) + ".manifest.json"))
    click.echo(f"wrote {out} ({space.k} centroids, dim {space.dim})")


@cli.command("assign")
@click.argument("space_path", metavar="SPACE", type=click.Path(exists=True, dir_okay=False))
@click.argument("embeddings", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Assignment CSV output.")
@handle_errors
def cmd_assign(space_path, embeddings, out):
    """Map each corpus record to its nearest centroid."""
    started = time.monotonic()
    space = load_space(space_path)
    corpus = _read_corpus(embeddings)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "cluster", "cosine"])
    for rec in corpus:
        c = assign_cluster(space, rec.vector)
        centroid = space.centroids[c]
        sim = float(np.clip(np.dot(rec.vector.components, centroid), -1.0, 1.0))
        writer.writerow([rec.id, c, repr(sim)])
    Path(out).write_text(buf.getvalue(), encoding="utf-8")
    _manifest(
        "assign", None, {"k": space.k, "dim": space.dim},
        {"space": str(space_path), "embeddings": str(embeddings)},
        {"assignments": str(out)}, started,
    ).write(Path(str(out) + ".manifest.json"))
    click.echo(f"wrote {out} ({len(corpus)} assignments)")


def _load_batch(path: str) -> list[dict]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(lineno, "record is not a JSON object")
            qid = obj.get("id")
            if not isinstance(qid, str) or not qid:
                raise ParseError(lineno, "missing or empty 'id'")
            verdicts = obj.get("verdicts")
            if not isinstance(verdicts, list) or not verdicts:
                raise ParseError(lineno, "missing or empty 'verdicts'")
            if not all(isinstance(v, bool) for v in verdicts):
                raise ParseError(lineno, "'verdicts' must be a list of booleans")
            vector = obj.get("vector")
            if vector is not None and (not isinstance(vector, list) or not vector):
                raise ParseError(lineno, "'vector' must be a non-empty array of numbers")
            entries.append({"id": qid, "verdicts": verdicts, "vector": vector, "line": lineno})
    return entries


@cli.command("reward")
@click.option("--space", "space_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--state", "state_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Coverage state entering this batch (left untouched).")
@click.option("--batch", "batch_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="JSONL with per-question id, verdicts, and vector (or corpus references).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Reward config JSON; defaults used when omitted.")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Embedding corpus for batch records without inline vectors.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Reward CSV output.")
@click.option("--new-state", "new_state_path", type=click.Path(dir_okay=False), required=True,
              help="Where to write the post-batch coverage state.")
@handle_errors
def cmd_reward(space_path, state_path, batch_path, config_path, corpus_path, out, new_state_path):
    """Score one question batch and advance the coverage state."""
    started = time.monotonic()
    space = load_space(space_path)
    state = load_state(state_path)
    cfg_dict = _load_json(config_path) if config_path else {}
    if not isinstance(cfg_dict, dict):
        raise BadParamError("reward config file must contain a JSON object")
    rcfg = RewardConfig.from_dict(cfg_dict)

    entries = _load_batch(batch_path)
    corpus_vectors = {}
    if corpus_path:
        corpus_vectors = {rec.id: rec.vector for rec in _read_corpus(corpus_path)}
    from .embedding import normalize

    vectors = {}
    for entry in entries:
        if entry["vector"] is not None:
            try:
                vectors[entry["id"]] = normalize(entry["vector"])
            except EngineError as exc:
                raise ParseError(entry["line"], str(exc)) from exc
        elif entry["id"] in corpus_vectors:
            vectors[entry["id"]] = corpus_vectors[entry["id"]]
        else:
            raise MissingVectorError(entry["id"])

    questions = [(entry["id"], entry["verdicts"]) for entry in entries]
    scored, _tallies, new_state = score_batch(questions, space, vectors, state, rcfg)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "p", "cluster", "zpd", "rarity", "reward"])
    for s in scored:
        writer.writerow([
            s.id,
            repr(s.p),
            "" if s.cluster is None else s.cluster,
            repr(s.zpd),
            "" if s.rarity is None else repr(s.rarity),
            repr(s.reward),
        ])
    Path(out).write_text(buf.getvalue(), encoding="utf-8")
    save_state(new_state, new_state_path)
    _manifest(
        "reward", None, rcfg.to_dict(),
        {"space": str(space_path), "state": str(state_path), "batch": str(batch_path),
         **({"corpus": str(corpus_path)} if corpus_path else {})},
        {"rewards": str(out), "new_state": str(new_state_path)}, started,
    ).write(Path(str(out) + ".manifest.json"))
    click.echo(f"wrote {out} ({len(scored)} questions, {int(_tallies.sum())} in window)")


@cli.command("audit")
@click.option("--counts", "counts_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON array of per-cluster counts (or object with a 'counts' field).")
@click.option("--assignments", "assignments_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Assignment CSV from the assign command.")
@click.option("--k", type=int, default=None, help="Cluster count; required with --assignments.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Report JSON output.")
@click.option("--lorenz", "lorenz_path", type=click.Path(dir_okay=False), default=None,
              help="Optional Lorenz-curve CSV output.")
@handle_errors
def cmd_audit(counts_path, assignments_path, k, out, lorenz_path):
    """Coverage diagnostics (entropy, Gini, Lorenz) for a cluster distribution."""
    started = time.monotonic()
    if (counts_path is None) == (assignments_path is None):
        raise BadParamError("provide exactly one of --counts or --assignments")
    if counts_path:
        doc = _load_json(counts_path)
        if isinstance(doc, dict) and "counts" in doc:
            doc = doc["counts"]
        if not isinstance(doc, list) or not doc:
            raise BadParamError("counts file must hold a non-empty JSON array")
        counts = np.asarray(doc, dtype=np.float64)
        if k is not None and k != counts.shape[0]:
            raise BadParamError(f"--k {k} does not match {counts.shape[0]} counts in file")
        inputs = {"counts": str(counts_path)}
    else:
        if k is None:
            raise BadParamError("--k is required with --assignments")
        if k < 1:
            raise BadParamError(f"k must be >= 1, got {k}")
        counts = np.zeros(k, dtype=np.int64)
        with open(assignments_path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "cluster" not in reader.fieldnames:
                raise BadParamError("assignments CSV must have a 'cluster' column")
            for row in reader:
                c = int(row["cluster"])
                if not 0 <= c < k:
                    raise BadParamError(f"cluster index {c} outside [0, {k})")
                counts[c] += 1
        inputs = {"assignments": str(assignments_path)}
    if counts.sum() <= 0:
        raise AllZeroError("all counts are zero; nothing to audit")

    report = coverage_report(counts)
    Path(out).write_text(dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    outputs = {"report": str(out)}
    if lorenz_path:
        Path(lorenz_path).write_text(lorenz_csv(report), encoding="utf-8")
        outputs["lorenz"] = str(lorenz_path)
    _manifest("audit", None, {"k": int(counts.shape[0])}, inputs, outputs, started).write(
        Path(str(out) + ".manifest.json")
    )
    click.echo(
        f"wrote {out} (active {report.active_clusters}/{counts.shape[0]}, "
        f"gini {report.gini:.4f})"
    )


@cli.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Simulation config JSON (field names mirror the run configuration).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True,
              help="Output directory for metrics.csv, final_state.json, manifest.json.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--mode", type=str, default=None, help="Override the config mode.")
@click.option("--dump-updates", is_flag=True, default=False,
              help="Also write per-step policy updates to updates.jsonl (debug).")
@handle_errors
def cmd_simulate(config_path, out_dir, seed, mode, dump_updates):
    """Run the deterministic co-evolution simulator."""
    started = time.monotonic()
    doc = _load_json(config_path)
    if not isinstance(doc, dict):
        raise BadParamError("simulation config must be a JSON object")
    if seed is not None:
        doc["seed"] = seed
    if mode is not None:
        doc["mode"] = mode
    config = SimConfig.from_dict(doc)

    result = run_coevolution(config, record_updates=dump_updates)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(result), encoding="utf-8")
    (out / "final_state.json").write_text(
        dumps(final_state_dict(result), indent=2) + "\n", encoding="utf-8"
    )
    outputs = {
        "metrics": str(out / "metrics.csv"),
        "final_state": str(out / "final_state.json"),
    }
    if dump_updates:
        with open(out / "updates.jsonl", "w", encoding="utf-8") as fh:
            for update in result.updates or []:
                fh.write(dumps(update) + "\n")
        outputs["updates"] = str(out / "updates.jsonl")
    _manifest(
        "simulate", config.seed, config.to_dict(),
        {"config": str(config_path)}, outputs, started,
    ).write(out / "manifest.json")
    click.echo(
        f"wrote {out / 'metrics.csv'} ({len(result.records)} iterations, mode {config.mode})"
    )


if __name__ == "__main__":
    cli()
