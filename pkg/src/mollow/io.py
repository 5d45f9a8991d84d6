"""File formats: CSV curves, JSON-lines fit results, ASCII time-tag streams.

Units live at this boundary only.  CSV column names end in a unit suffix
(``freq_mhz``, ``tau_ns``, ``power_pw``...) that maps to an SI factor; frequencies in
files are ordinary frequencies, converted to angular on read.
"""
import csv
import json
import re

import numpy as np

from .montecarlo import RECORD_DTYPE, empty_records

TWO_PI = 2 * np.pi
UNIT_SCALE = {
    "mhz": TWO_PI * 1e6,
    "hz": TWO_PI,
    "rad_s": 1.0,
    "ns": 1e-9,
    "us": 1e-6,
    "ps": 1e-12,
    "s": 1.0,
    "pw": 1e-12,
    "nw": 1e-9,
    "w": 1.0,
    "per_s": 1.0,
}
TIMETAG_MAGIC = "#timetag-v1"


def column_scale(name):
    """SI factor for a column name's unit suffix (1.0 if none is recognised)."""
    for unit in sorted(UNIT_SCALE, key=len, reverse=True):
        if name.lower().endswith("_" + unit):
            return UNIT_SCALE[unit]
    return 1.0


def write_csv(path, columns, comments=()):
    """`columns` is an ordered mapping name -> 1-D array."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in data:
            writer.writerow([repr(float(v)) for v in row])


def read_csv(path):
    """Returns (ordered dict of float columns, list of comment lines)."""
    comments, rows, header = [], [], None
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            if row[0].lstrip().startswith("#"):
                comments.append(",".join(row).lstrip()[1:].strip())
            elif header is None:
                header = [c.strip() for c in row]
            else:
                rows.append([float(v) for v in row])
    if header is None:
        raise ValueError(f"{path}: no header line")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}, comments


def append_jsonl(path, obj, mode="a"):
    with open(path, mode) as fh:
        fh.write(json.dumps(obj, sort_keys=False) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _ps(t):
    return np.rint(np.asarray(t, dtype=float) * 1e12).astype(np.int64)


def write_timetags(path, records, pulse_length, seed, n_trials=None):
    """One click per line: ``trial_id<TAB>t_ns<TAB>channel``, times exact to 1 ps."""
    header = f"{TIMETAG_MAGIC} pulse_ns={pulse_length * 1e9:.12g} seed={seed}"
    if n_trials is not None:
        header += f" trials={int(n_trials)}"
    ps = _ps(records["t"])
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        fh.writelines(f"{tr}\t{p // 1000}.{p % 1000:03d}\t{ch}\n" for tr, p, ch in
                      zip(records["trial_id"].tolist(), ps.tolist(), records["channel"].tolist()))


def read_timetags(path):
    """Returns (records, meta) with meta keys pulse_length (s), seed and n_trials (or None)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(TIMETAG_MAGIC):
            raise ValueError(f"{path}: not a {TIMETAG_MAGIC} file")
        fields = dict(re.findall(r"(\w+)=(\S+)", header))
        trials, ps, channels = [], [], []
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            tr, t_ns, ch = line.split("\t")
            whole, _, frac = t_ns.partition(".")
            trials.append(int(tr))
            ps.append(int(whole) * 1000 + int((frac + "000")[:3]))
            channels.append(int(ch))
    recs = empty_records(len(trials))
    recs["trial_id"] = trials
    recs["t"] = np.asarray(ps, dtype=np.int64) * 1e-12
    recs["channel"] = channels
    meta = {
        "pulse_length": float(fields["pulse_ns"]) / 1e9,
        "seed": int(fields["seed"]) if "seed" in fields else None,
        "n_trials": int(fields["trials"]) if "trials" in fields else None,
    }
    return recs.astype(RECORD_DTYPE), meta
