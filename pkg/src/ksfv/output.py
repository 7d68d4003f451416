"""CSV and metadata writers for run outputs.

A run directory contains snapshots.csv (header t, x_1..x_I; one row per
snapshot), diagnostics.csv (one row per recorded step), and metadata.json
(full config echo, seed, code version).  Floats are written with shortest
round-trip formatting so reruns with identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import __version__
from .simulation import RunResult

__all__ = ["write_run_outputs", "SNAPSHOTS_CSV", "DIAGNOSTICS_CSV", "METADATA_JSON"]

SNAPSHOTS_CSV = "snapshots.csv"
DIAGNOSTICS_CSV = "diagnostics.csv"
METADATA_JSON = "metadata.json"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_run_outputs(out_dir: str | Path, result: RunResult, config_echo: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    I = result.config.mesh.cell_count

    with open(out / SNAPSHOTS_CSV, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x_{i}" for i in range(1, I + 1)])
        for t, u in zip(result.snapshot_times, result.snapshots):
            writer.writerow([_fmt(t)] + [_fmt(x) for x in u])

    with open(out / DIAGNOSTICS_CSV, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "mass", "energy", "linf_variation", "min_u", "max_u",
             "newton_iters", "fallback_used"]
        )
        for r in result.records:
            writer.writerow(
                [_fmt(r.t), _fmt(r.mass), _fmt(r.energy), _fmt(r.linf_variation),
                 _fmt(r.min_u), _fmt(r.max_u), str(r.newton_iters), str(int(r.fallback_used))]
            )

    seed = None
    if result.config.initial.kind == "constant-plus-noise":
        seed = result.config.initial.seed
    metadata = {
        "config": config_echo,
        "seed": seed,
        "code_version": __version__,
        "cells": I,
        "dx": result.config.mesh.dx,
    }
    with open(out / METADATA_JSON, "w") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out
