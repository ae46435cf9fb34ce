"""JSON and CSV formats read and written by the command line tools.

Scalar results (errors, series columns, fitted parameters) are written with 9
significant digits.  Matrix entries and mesh phases keep full double precision
so that unitaries and meshes survive a file round trip at the 1e-10 level.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .matcore import as_matrix
from .mesh import MeshConfig, MZICell
from .noise import NoiseModel
from .shadow import ReconstructionResult, ScalingSeries, Snapshot, VoltageRecord

N_CHANNELS = 8


class DataFormatError(ValueError):
    """Malformed input file; the message names the offending row or field."""


def sig9(x: float) -> float | None:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return None
    return float(f"{x:.9g}")


def fmt9(x: float) -> str:
    return f"{float(x):.9g}"


def dump_json(obj, path: str | Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"d": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj, where: str = "matrix") -> np.ndarray:
    if not isinstance(obj, dict) or set(obj) != {"d", "re", "im"}:
        raise DataFormatError(f"{where}: expected an object with exactly the keys d, re, im")
    d = obj["d"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise DataFormatError(f"{where}.d: must be a positive integer")
    parts = []
    for key in ("re", "im"):
        rows = obj[key]
        if not isinstance(rows, list) or len(rows) != d:
            raise DataFormatError(f"{where}.{key}: expected {d} rows")
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != d:
                raise DataFormatError(f"{where}.{key}[{i}]: expected {d} entries")
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
                raise DataFormatError(f"{where}.{key}[{i}]: entries must be numbers")
        parts.append(np.array(rows, dtype=float))
    try:
        return as_matrix(parts[0] + 1j * parts[1])
    except ValueError as exc:
        raise DataFormatError(f"{where}: {exc}") from exc


def mesh_to_json(cfg: MeshConfig) -> dict:
    return {
        "d": cfg.d,
        "cells": [{"layer": c.layer, "top": c.top_channel, "theta": float(c.theta),
                   "phi": float(c.phi)} for c in cfg.cells],
        "output_phases_re": [float(z.real) for z in cfg.output_phases],
        "output_phases_im": [float(z.imag) for z in cfg.output_phases],
    }


def mesh_from_json(obj, where: str = "mesh") -> MeshConfig:
    try:
        d = int(obj["d"])
        cells = [MZICell(float(c["theta"]), float(c["phi"]), int(c["layer"]), int(c["top"]))
                 for c in obj["cells"]]
        phases = np.array(obj["output_phases_re"], dtype=float) + 1j * np.array(obj["output_phases_im"], dtype=float)
        return MeshConfig(d, tuple(cells), phases)
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{where}: missing or malformed field {exc}") from exc
    except ValueError as exc:
        raise DataFormatError(f"{where}: {exc}") from exc


def noise_to_json(noise: NoiseModel) -> dict:
    return {"p": float(noise.p), "u_c": matrix_to_json(noise.u_c), "epsilon": float(noise.epsilon)}


def noise_from_json(obj, where: str = "noise") -> NoiseModel:
    try:
        return NoiseModel(float(obj["p"]), matrix_from_json(obj["u_c"], f"{where}.u_c"), float(obj["epsilon"]))
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{where}: missing or malformed field {exc}") from exc
    except DataFormatError:
        raise
    except ValueError as exc:
        raise DataFormatError(f"{where}: {exc}") from exc


def result_to_json(res: ReconstructionResult, extra: dict | None = None) -> dict:
    out = {"M": int(res.M), "estimate": matrix_to_json(res.estimate), "target": matrix_to_json(res.target),
           "frobenius_error": sig9(res.frobenius_error)}
    if extra:
        out.update(extra)
    return out


def result_from_json(obj, where: str = "reconstruction") -> ReconstructionResult:
    try:
        est = matrix_from_json(obj["estimate"], f"{where}.estimate")
        tgt = matrix_from_json(obj["target"], f"{where}.target")
        return ReconstructionResult(est, int(obj["M"]), tgt)
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{where}: missing or malformed field {exc}") from exc


SERIES_HEADER = ["M", "mse_mean", "mse_stderr", "replications"]


def series_to_csv(series: ScalingSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_HEADER)
    for m, mu, se, r in zip(series.M, series.mse_mean, series.mse_stderr, series.replications):
        w.writerow([int(m), fmt9(mu), fmt9(se), int(r)])
    return buf.getvalue()


def series_from_csv(path: str | Path, d: int) -> ScalingSeries:
    rows = _read_csv(path)
    header, body = rows[0], rows[1:]
    if header != SERIES_HEADER:
        raise DataFormatError(f"{path}: header must be {','.join(SERIES_HEADER)}")
    cols = [[], [], [], []]
    for n, row in enumerate(body, start=2):
        if len(row) != 4:
            raise DataFormatError(f"{path}: row {n} has {len(row)} fields, expected 4")
        for k, (name, v) in enumerate(zip(SERIES_HEADER, row)):
            try:
                cols[k].append(float(v))
            except ValueError:
                raise DataFormatError(f"{path}: row {n}, field {name}: not a number: {v!r}") from None
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    try:
        return ScalingSeries(d, *map(np.array, cols))
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def _read_csv(path: str | Path) -> list[list[str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc.strerror}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(f.strip() for f in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    return [[f.strip() for f in r] for r in rows]


VOLTAGE_HEADER = ["run_id", "unitary_id"] + [f"v{i}" for i in range(N_CHANNELS)]


def read_voltage_csv(path: str | Path) -> list[VoltageRecord]:
    rows = _read_csv(path)
    if rows[0] != VOLTAGE_HEADER:
        raise DataFormatError(f"{path}: header must be {','.join(VOLTAGE_HEADER)}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(VOLTAGE_HEADER):
            raise DataFormatError(f"{path}: row {n} has {len(row)} fields, expected {len(VOLTAGE_HEADER)}")
        try:
            run_id, uid = int(row[0]), int(row[1])
        except ValueError:
            raise DataFormatError(f"{path}: row {n}: run_id and unitary_id must be integers") from None
        try:
            volts = [float(v) for v in row[2:]]
            out.append(VoltageRecord(run_id, uid, np.array(volts)))
        except ValueError as exc:
            raise DataFormatError(f"{path}: row {n}: {exc}") from None
    if not out:
        raise DataFormatError(f"{path}: no voltage rows")
    return out


def read_unitary_list(path: str | Path) -> list[np.ndarray]:
    obj = load_json(path)
    if not isinstance(obj, list) or not obj:
        raise DataFormatError(f"{path}: expected a non-empty JSON array of matrices")
    return [matrix_from_json(m, f"{path}[{i}]") for i, m in enumerate(obj)]


def snapshots_to_json(snaps: list[Snapshot], protocol: str, run_ids: list[int]) -> dict:
    return {
        "protocol": protocol,
        "d": snaps[0].d if snaps else None,
        "snapshots": [
            {"run_id": int(r), "unitary_id": int(s.unitary_id),
             "unitary": matrix_to_json(s.reported_unitary),
             "probabilities": s.probabilities.tolist()}
            for s, r in zip(snaps, run_ids)
        ],
    }


def snapshots_from_json(obj, where: str = "snapshots") -> tuple[int, list[Snapshot]]:
    try:
        d = int(obj["d"])
        raw = obj["snapshots"]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{where}: missing field {exc}") from exc
    snaps = []
    for i, s in enumerate(raw):
        try:
            u = matrix_from_json(s["unitary"], f"{where}[{i}].unitary")
            snaps.append(Snapshot(int(s["unitary_id"]), u, np.array(s["probabilities"], dtype=float)))
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"{where}[{i}]: missing or malformed field {exc}") from exc
        except DataFormatError:
            raise
        except ValueError as exc:
            raise DataFormatError(f"{where}[{i}]: {exc}") from exc
    if not snaps:
        raise DataFormatError(f"{where}: no snapshots")
    return d, snaps
