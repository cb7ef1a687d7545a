"""Table writers for run outputs.

Tables are written as CSV or as column-oriented JSON. Floats use Python's
shortest round-trip representation, so identical values give identical
bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_SCHEMA_VERSION = 1


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return v


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence], fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "json":
        path = path.with_suffix(".json")
        data = {"schema_version": CSV_SCHEMA_VERSION, "columns": list(header),
                "rows": [[_json_cell(v) for v in r] for r in rows]}
        path.write_text(json.dumps(data, separators=(",", ":")) + "\n")
        return path
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def read_table(path: Path) -> dict[str, np.ndarray]:
    """Read a CSV or JSON table back into float columns (empty cells become NaN)."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        cols = data["columns"]
        rows = data["rows"]
    else:
        with path.open() as fh:
            r = csv.reader(fh)
            cols = next(r)
            rows = list(r)
    out = {}
    for k, c in enumerate(cols):
        vals = [row[k] for row in rows]
        out[c] = np.array([float(v) if v not in ("", None) else math.nan for v in vals])
    return out


def write_json(path: Path, obj) -> Path:
    Path(path).write_text(json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n")
    return Path(path)


def to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    return _json_cell(obj)


# --------------------------------------------------------------------------
# Run outputs


def metrics_rows(tr):
    n = np.arange(1, tr.slot_count + 1)
    root = np.sqrt(n)
    mean, mx = tr.mean_aoi, tr.max_aoi
    updates = tr.nu.sum(axis=1)
    for k in range(tr.slot_count):
        yield (int(n[k]), tr.objective[k], tr.penalty[k], tr.max_target_error[k], float(mean[k]),
               int(mx[k]), float(mean[k]) / root[k], float(mx[k]) / root[k],
               int(tr.success_count[k]), int(updates[k]))


METRICS_HEADER = ("slot", "objective", "penalty", "max_target_error", "mean_aoi", "max_aoi",
                  "mean_aoi_over_sqrt", "max_aoi_over_sqrt", "successes", "updates")


def aoi_rows(tr, stride: int):
    A = tr.aoi
    D = A.pair_aoi.shape[1]
    eidx = {e: k for k, e in enumerate(A.edges)}
    for row in range(stride - 1, A.pair_aoi.shape[0], stride):
        slot = row + 1
        for s in range(D):
            for d in range(D):
                k = eidx.get((s, d))
                yield (slot, s, d, int(A.pair_aoi[row, s, d]),
                       None if k is None else int(A.edge_aoi[row, k]),
                       None if k is None else int(A.link_aoi[row, k]))


AOI_HEADER = ("slot", "src", "dst", "pair_aoi", "edge_aoi", "link_aoi")


def write_run(out: Path, tr, sc, fmt: str = "csv", verbosity: int = 0) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_table(out / "metrics.csv", METRICS_HEADER, metrics_rows(tr), fmt),
             write_table(out / "aoi.csv", AOI_HEADER, aoi_rows(tr, sc.aoi_stride), fmt)]
    pos = tr.final_positions
    dim = pos.shape[1]
    files.append(write_table(out / "positions.csv",
                             ("agent",) + tuple(f"x{k}" for k in range(dim)),
                             ((i, *pos[i]) for i in range(len(pos))), fmt))
    targets = getattr(sc.problem, "targets", np.zeros((0, 2)))
    files.append(write_table(out / "targets.csv", ("target", "x", "y", "error_prob"),
                             ((t, targets[t, 0], targets[t, 1], tr.target_error_final[t])
                              for t in range(len(targets))), fmt))
    if verbosity >= 1:
        files.append(write_table(out / "optimizer.csv",
                                 ("slot", "agent", "nu", "a", "b", "x_norm", "grad_f_norm",
                                  "grad_p_norm"), tr.optimizer_log, fmt))
        files.append(write_table(out / "channels.csv",
                                 ("slot", "edge_slot", "src", "dst", "channel", "latent_state",
                                  "channel_state", "success_prob", "success"),
                                 channel_rows(tr, sc), fmt))
    if verbosity >= 2:
        files.append(write_table(out / "messages.csv",
                                 ("slot", "kind", "sender", "receiver", "origin", "production_slot"),
                                 message_rows(tr.message_log), fmt))
    return files


def channel_rows(tr, sc):
    chn = tr.channels
    graphs = sc.topology.graphs
    C = sc.channel.channel_count
    for row in range(tr.slot_count):
        g = graphs[chn.topology[row]]
        for k, (s, d) in enumerate(g.edges):
            c = k % C
            lat = None if chn.latent is None else int(chn.latent[row])
            st = None if chn.states is None else int(chn.states[row, c])
            pr = None if chn.success_probability is None else chn.success_probability[row, c]
            yield (row + 1, k, s, d, c, lat, st, pr, bool(chn.success[row, k]))


def message_rows(log):
    for ev in log:
        if ev[0] == "produce":
            yield (ev[1], "produce", ev[2], None, ev[2], ev[1])
        elif ev[0] == "flush":
            yield (ev[1], "flush", ev[2], ev[3], None, None)
        else:
            for origin, prod in ev[4]:
                yield (ev[1], "deliver", ev[2], ev[3], origin, prod)
