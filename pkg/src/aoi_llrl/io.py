"""Snapshots, config files and CSV output."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import os
from pathlib import Path

import numpy as np

from .ella import KnowledgeBase, TaskRecord
from .env import Task
from .tasks import TaskEstimate, TaskRanges

SNAPSHOT_FORMAT = "aoi_llrl.knowledge_base"
SNAPSHOT_VERSION = 1

CURVE_HEADER = ["algo", "task_id", "seed", "iteration", "mean_return", "mean_aoi", "mean_energy"]
TRAINING_LOG_HEADER = ["visit", "device_id", "task_id", "is_new_task", "mean_return_before",
                       "mean_return_after"]


class SnapshotError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# snapshots ------------------------------------------------------------------

def _matrix_out(M) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {"rows": M.shape[0], "cols": M.shape[1], "data": [float(v) for v in M.ravel()]}


def _vector_out(v) -> dict:
    v = np.asarray(v, dtype=float).reshape(-1, 1)
    return _matrix_out(v)


def _matrix_in(obj, name) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"field '{name}': malformed matrix ({exc})") from None
    if not isinstance(data, list) or len(data) != rows * cols:
        raise SnapshotError(f"field '{name}': expected {rows}x{cols} entries")
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise SnapshotError(f"field '{name}': non-numeric entries") from None
    return arr.reshape(rows, cols)


def _vector_in(obj, name) -> np.ndarray:
    M = _matrix_in(obj, name)
    if M.shape[1] != 1:
        raise SnapshotError(f"field '{name}': expected a column vector")
    return M[:, 0]


def _field(obj, key, ctx=""):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise SnapshotError(f"missing field '{ctx}{key}'") from None


def kb_to_dict(kb: KnowledgeBase) -> dict:
    tasks = []
    for tid in sorted(kb.registry):
        rec = kb.registry[tid]
        est = rec.estimate
        tasks.append({
            "task_id": int(tid),
            "task": dataclasses.asdict(rec.task),
            "s": _vector_out(rec.s),
            "alpha_vec": _vector_out(rec.alpha_vec),
            "gamma_mat": _matrix_out(rec.gamma_mat),
            "device_id": rec.device_id,
            "visits": int(rec.visits),
            "estimate": None if est is None else dataclasses.asdict(est),
        })
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "d": kb.d, "h": kb.h, "M": kb.M, "eta1": kb.eta1, "eta2": kb.eta2,
        "L": _matrix_out(kb.L), "A": _matrix_out(kb.A), "b": _vector_out(kb.b),
        "tasks": tasks,
    }


def kb_from_dict(obj) -> KnowledgeBase:
    if not isinstance(obj, dict):
        raise SnapshotError("snapshot root must be an object")
    if _field(obj, "format") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"field 'format': expected {SNAPSHOT_FORMAT!r}")
    if _field(obj, "version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"field 'version': unsupported version {obj['version']!r}")
    d, h, M = int(_field(obj, "d")), int(_field(obj, "h")), int(_field(obj, "M"))
    L = _matrix_in(_field(obj, "L"), "L")
    A = _matrix_in(_field(obj, "A"), "A")
    b = _vector_in(_field(obj, "b"), "b")
    if L.shape != (d, h):
        raise SnapshotError(f"field 'L': shape {L.shape} != ({d}, {h})")
    if A.shape != (d * h, d * h) or b.shape != (d * h,):
        raise SnapshotError("field 'A'/'b': dimensions inconsistent with d*h")
    registry = {}
    for i, t in enumerate(_field(obj, "tasks")):
        ctx = f"tasks[{i}]."
        try:
            task = Task(**_field(t, "task", ctx))
        except (TypeError, ValueError) as exc:
            raise SnapshotError(f"field '{ctx}task': {exc}") from None
        est = t.get("estimate")
        if est is not None:
            try:
                est = TaskEstimate(**est)
            except TypeError as exc:
                raise SnapshotError(f"field '{ctx}estimate': {exc}") from None
        rec = TaskRecord(
            task=task,
            s=_vector_in(_field(t, "s", ctx), ctx + "s"),
            alpha_vec=_vector_in(_field(t, "alpha_vec", ctx), ctx + "alpha_vec"),
            gamma_mat=_matrix_in(_field(t, "gamma_mat", ctx), ctx + "gamma_mat"),
            device_id=t.get("device_id"),
            visits=int(_field(t, "visits", ctx)),
            estimate=est,
        )
        registry[int(_field(t, "task_id", ctx))] = rec
    if len(registry) != M:
        raise SnapshotError(f"field 'M': {M} but {len(registry)} task records")
    return KnowledgeBase(L=L, A=A, b=b, M=M, registry=registry,
                         eta1=float(_field(obj, "eta1")), eta2=float(_field(obj, "eta2")))


def save_snapshot(kb: KnowledgeBase, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(kb_to_dict(kb), fh, indent=1)
    os.replace(tmp, path)


def load_snapshot(path) -> KnowledgeBase:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"malformed snapshot {path}: {exc}") from None
    return kb_from_dict(obj)


# config files ---------------------------------------------------------------

_RANGE_KEYS = {
    "lambda_min": ("lam", 0), "lambda_max": ("lam", 1),
    "abar_min": ("abar", 0), "abar_max": ("abar", 1),
    "eps_max_min": ("eps_max", 0), "eps_max_max": ("eps_max", 1),
    "avar": ("avar", None), "alpha": ("alpha", None),
}


def read_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines (``#`` comments) into a dict of strings."""
    parser = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                       delimiters=("=",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return dict(parser["config"])


def parse_config(text: str):
    """Build ``(TrainConfig, ExperimentConfig)`` from config text; unknown keys are rejected."""
    from .experiments import ExperimentConfig
    from .uav import TrainConfig

    raw = read_config_text(text)
    train_fields = {f.name: f for f in dataclasses.fields(TrainConfig) if f.name != "ranges"}
    exp_fields = {f.name: f for f in dataclasses.fields(ExperimentConfig) if f.name != "train"}
    train_kw, exp_kw = {}, {}
    ranges = dataclasses.asdict(TaskRanges())
    ranges = {k: list(v) if isinstance(v, tuple) else v for k, v in ranges.items()}
    for key, value in raw.items():
        try:
            if key in _RANGE_KEYS:
                name, idx = _RANGE_KEYS[key]
                if idx is None:
                    ranges[name] = float(value)
                else:
                    ranges[name][idx] = float(value)
            elif key in train_fields:
                train_kw[key] = _coerce(value, train_fields[key].type)
            elif key == "seeds":
                exp_kw["seeds"] = tuple(int(v) for v in value.replace(",", " ").split())
            elif key in exp_fields:
                exp_kw[key] = _coerce(value, exp_fields[key].type)
            else:
                raise ConfigError(f"unknown config key '{key}'")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for '{key}': {value!r}") from None
    try:
        task_ranges = TaskRanges(**{k: tuple(v) if isinstance(v, list) else v
                                    for k, v in ranges.items()})
        train = TrainConfig(**train_kw, ranges=task_ranges)
        exp = ExperimentConfig(train=train, **exp_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return train, exp


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _coerce(value: str, typ):
    name = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    if "int" in name:
        return int(value)
    if "float" in name:
        return float(value)
    if "bool" in name:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(value)
    return value


# CSV ------------------------------------------------------------------------

def write_curves_csv(curves, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for c in curves:
            for i in range(len(c)):
                w.writerow([c.algo, c.task_id, c.seed, i, _fmt(c.mean_return[i]),
                            _fmt(c.mean_aoi[i]), _fmt(c.mean_energy[i])])


def read_curves_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CURVE_HEADER:
            raise ValueError(f"unexpected curve header {reader.fieldnames}")
        return list(reader)


def write_training_log(log, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAINING_LOG_HEADER)
        for rep in log:
            w.writerow([rep.iteration, rep.device_id,
                        "" if rep.task_id is None else rep.task_id, _fmt(rep.is_new_task),
                        _fmt(rep.mean_return_before), _fmt(rep.mean_return_after)])


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
