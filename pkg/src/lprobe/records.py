"""On-disk formats: checkpoints (JSON), CSV tables, atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lprobe.errors import ConfigError
from lprobe.network import NetworkSpec, param_count


def fmt(x) -> str:
    """17-significant-digit float, or a plain integer."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return write_atomic(path, csv_text(header, rows))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data.reshape(len(lines) - 1, len(header))


def checkpoint_text(spec: NetworkSpec, seed: int, epoch: int, theta) -> str:
    spec_json = json.dumps(spec.to_dict(), sort_keys=True)
    values = ", ".join(fmt(v) for v in np.asarray(theta, dtype=float))
    return (
        f'{{"spec": {spec_json}, "seed": {int(seed)}, "epoch": {int(epoch)}, '
        f'"theta": [{values}]}}\n'
    )


def save_checkpoint(path, spec: NetworkSpec, seed: int, epoch: int, theta) -> Path:
    return write_atomic(path, checkpoint_text(spec, seed, epoch, theta))


def load_checkpoint(path) -> tuple[NetworkSpec, int, int, np.ndarray]:
    """Returns ``(spec, seed, epoch, theta)``."""
    try:
        data = json.loads(Path(path).read_text())
        spec = NetworkSpec.from_dict(data["spec"])
        theta = np.array(data["theta"], dtype=float)
        seed, epoch = int(data["seed"]), int(data["epoch"])
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from exc
    if theta.size != param_count(spec):
        raise ConfigError(
            f"checkpoint {path}: theta has {theta.size} entries, spec needs {param_count(spec)}"
        )
    return spec, seed, epoch, theta


def list_checkpoints(run_dir) -> list[tuple[int, Path]]:
    out = []
    for p in Path(run_dir).glob("epoch_*.json"):
        try:
            out.append((int(p.stem.split("_", 1)[1]), p))
        except ValueError:
            continue
    return sorted(out)
