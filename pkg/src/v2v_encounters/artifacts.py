"""Reading and writing the on-disk stage artifacts.

Every JSON artifact carries ``format_version`` and ``artifact`` header fields.
Floats in CSV files are written with ``repr`` so they round-trip exactly and
reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .clustering import ClusteringResult
from .encounters import VehicleEncounter
from .errors import MalformedInput
from .features import FeatureSeries

FORMAT_VERSION = 1
ENCOUNTER_COLUMNS = ("timestamp_ds", "lat_a", "lon_a", "lat_b", "lon_b", "distance_m", "heading_a", "heading_b")

PathLike = Union[str, Path]


def write_json(path: PathLike, artifact: str, payload: Mapping) -> None:
    doc = {"format_version": FORMAT_VERSION, "artifact": artifact, **payload}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_json(path: PathLike, artifact: str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("artifact") != artifact:
        raise MalformedInput(f"{path}: expected a {artifact!r} artifact, found {doc.get('artifact')!r}")
    if doc.get("format_version") != FORMAT_VERSION:
        raise MalformedInput(f"{path}: unsupported format_version {doc.get('format_version')!r}")
    return doc


def _f(x) -> str:
    return repr(float(x))


def write_encounters(encounters: Sequence[VehicleEncounter], out_dir: PathLike) -> Path:
    """``encounters.json`` plus one aligned-sample CSV per encounter under ``encounters/``."""
    out_dir = Path(out_dir)
    sample_dir = out_dir / "encounters"
    sample_dir.mkdir(parents=True, exist_ok=True)
    for stale in sample_dir.glob("enc_*.csv"):
        stale.unlink()
    records = []
    for i, enc in enumerate(encounters):
        name = f"enc_{i:05d}.csv"
        with open(sample_dir / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ENCOUNTER_COLUMNS)
            for j, t in enumerate(enc.timestamps):
                w.writerow([
                    int(t), _f(enc.lat_a[j]), _f(enc.lon_a[j]), _f(enc.lat_b[j]), _f(enc.lon_b[j]),
                    _f(enc.distance[j]), _f(enc.heading_a[j]), _f(enc.heading_b[j]),
                ])
        records.append({**enc.summary(), "samples_file": f"encounters/{name}"})
    path = out_dir / "encounters.json"
    write_json(path, "encounters", {"encounters": records})
    return path


def read_encounters(mined_dir: PathLike) -> list[VehicleEncounter]:
    mined_dir = Path(mined_dir)
    doc = read_json(mined_dir / "encounters.json", "encounters")
    out = []
    for rec in doc["encounters"]:
        with open(mined_dir / rec["samples_file"], newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != ENCOUNTER_COLUMNS:
                raise MalformedInput(f"{rec['samples_file']}: unexpected columns {header}")
            rows = np.array([[float(v) for v in row] for row in reader], dtype=np.float64).reshape(-1, len(ENCOUNTER_COLUMNS))
        ts = rows[:, 0].astype(np.int64)
        if len(ts) != rec["n_samples"] or ts[0] != rec["t_start_ds"] or ts[-1] != rec["t_end_ds"]:
            raise MalformedInput(f"{rec['samples_file']}: samples disagree with encounters.json")
        out.append(VehicleEncounter(
            rec["trip_a"], rec["trip_b"], int(ts[0]), int(ts[-1]),
            rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4], rows[:, 5], rows[:, 6], rows[:, 7],
        ))
    return out


def write_feature_csv(fs: FeatureSeries, path: PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_ds", "L_m", "theta_deg"])
        for t, L, th in zip(fs.timestamps, fs.distance, fs.theta):
            w.writerow([int(t), _f(L), _f(th)])


def write_dtw_matrix(path: PathLike, matrix: np.ndarray) -> None:
    """Little-endian uint64 ``n`` followed by the n*n float64 matrix, row-major."""
    m = np.ascontiguousarray(matrix, dtype="<f8")
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("matrix must be square")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", n))
        fh.write(m.tobytes(order="C"))


def read_dtw_matrix(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise MalformedInput(f"{path}: truncated header")
    (n,) = struct.unpack("<Q", raw[:8])
    if len(raw) != 8 + 8 * n * n:
        raise MalformedInput(f"{path}: expected {n}x{n} matrix, file size {len(raw)}")
    return np.frombuffer(raw[8:], dtype="<f8").reshape(n, n).astype(np.float64)


def clusters_payload(result: Optional[ClusteringResult], k: int, seed: int, pipeline_seed: int, extra: Mapping) -> dict:
    if result is None:
        payload = {"k": k, "seed": seed, "objective": 0.0, "iterations": 0,
                   "objective_history": [], "medoids": [], "assignment": {}}
    else:
        payload = result.to_dict()
    payload["pipeline_seed"] = pipeline_seed
    payload.update(extra)
    return payload


def read_labels(path: PathLike, encounters: Iterable[VehicleEncounter]) -> dict[str, str]:
    """Map encounter id -> label.

    Accepts either ``encounter_id,label`` rows or pair-level
    ``trip_a,trip_b,label`` rows (as written by the synthetic generator), in
    which case every encounter of that pair gets the label.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        rows = list(reader)
    if "encounter_id" in fields and "label" in fields:
        return {r["encounter_id"]: r["label"] for r in rows}
    if {"trip_a", "trip_b", "label"} <= set(fields):
        by_pair = {}
        for r in rows:
            a, b = sorted((r["trip_a"], r["trip_b"]))
            by_pair[(a, b)] = r["label"]
        return {e.id: by_pair[(e.trip_a, e.trip_b)] for e in encounters if (e.trip_a, e.trip_b) in by_pair}
    raise MalformedInput(f"{path}: expected encounter_id,label or trip_a,trip_b,label columns")
