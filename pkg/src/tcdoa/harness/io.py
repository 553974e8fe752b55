"""Flat-file outputs: CSV tables, run metadata, plot scripts and snapshot dumps.

CSV files are UTF-8, comma separated, with a header row; floats are written
with 17 significant digits so they parse back to the same double.

Monte Carlo CSV columns (single source)::

    <axis>, bias_1s, std_1s, bias_2s, std_2s, sqrt_crb_cor,
    se_std_1s, se_std_2s, trials_1s, trials_2s, failures_1s, failures_2s,
    sqrt_cov_1s, sqrt_cov_2s

Only the requested methods appear. With several sources every per-source
column gains a ``_s<k>`` suffix.

Snapshot dump (``.snap``), all little-endian::

    bytes 0-3   magic b"TCSN"
    uint32      format version (1)
    uint32      L (sensors)
    uint32      n (snapshots)
    uint64      seed
    complex128  L*n values, column-major (x(1), x(2), ...)
"""

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .experiments import METHOD_SUFFIX, MethodStats, MonteCarloReport, MonteCarloRow

SNAP_MAGIC = b"TCSN"
SNAP_VERSION = 1
_SNAP_HEADER = struct.Struct("<4sIIIQ")


class OutputError(OSError):
    pass


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None
    return path


def _read_rows(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from None
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# Monte Carlo report


def _source_cols(base, m):
    return [base] if m == 1 else [f"{base}_s{k + 1}" for k in range(m)]


def report_columns(report):
    m = report.num_sources
    suf = [METHOD_SUFFIX[x] for x in report.methods]
    cols = [report.axis]
    for s in suf:
        cols += _source_cols(f"bias_{s}", m) + _source_cols(f"std_{s}", m)
    cols += _source_cols("sqrt_crb_cor", m)
    for s in suf:
        cols += _source_cols(f"se_std_{s}", m)
    cols += [f"trials_{s}" for s in suf] + [f"failures_{s}" for s in suf]
    for s in suf:
        cols += _source_cols(f"sqrt_cov_{s}", m)
    return cols


def report_rows(report):
    rows = []
    for r in report.rows:
        st = [r.methods[x] for x in report.methods]
        row = [r.value]
        for s in st:
            row += list(s.bias) + list(s.std)
        row += list(r.sqrt_crb_cor)
        for s in st:
            row += list(s.se_std)
        row += [s.trials for s in st] + [s.failures for s in st]
        for s in st:
            row += list(s.sqrt_cov)
        rows.append(row)
    return rows


def write_report_csv(report, path):
    return _write_rows(path, report_columns(report), report_rows(report))


def read_report_csv(path, methods=None):
    """Parse a Monte Carlo CSV back into a :class:`MonteCarloReport`."""
    header, rows = _read_rows(path)
    axis = header[0]
    inv = {v: k for k, v in METHOD_SUFFIX.items()}
    suffixes = [c[len("trials_"):] for c in header if c.startswith("trials_")]
    methods = methods or [inv[s] for s in suffixes]
    m = sum(1 for c in header if c.startswith("sqrt_crb_cor"))
    report = MonteCarloReport(axis, methods, m)
    for raw in rows:
        rec = dict(zip(header, raw))

        def vec(base):
            return np.array([float(rec[c]) for c in _source_cols(base, m)])

        stats = {}
        for name in methods:
            s = METHOD_SUFFIX[name]
            stats[name] = MethodStats(
                vec(f"bias_{s}"), vec(f"std_{s}"), vec(f"se_std_{s}"),
                int(rec[f"trials_{s}"]), int(rec[f"failures_{s}"]), vec(f"sqrt_cov_{s}"),
            )
        value = float(rec[axis])
        if value.is_integer() and axis in ("n", "M"):
            value = int(value)
        report.rows.append(MonteCarloRow(value, stats, vec("sqrt_crb_cor")))
    return report


def write_metadata(path, **info):
    """Sidecar JSON (sorted keys, no timestamps so reruns are byte-identical)."""
    path = Path(path)
    try:
        path.write_text(json.dumps(info, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None
    return path


def write_bounds_csv(table, path):
    return _write_rows(path, table.columns, table.rows)


def read_bounds_csv(path):
    header, rows = _read_rows(path)
    return header, [[float(v) for v in r] for r in rows]


def write_diagnostics_csv(records, path):
    header = ["axis_value", "method", "trial", "estimate", "criterion", "coarse"]
    rows = []
    for r in records:
        est = "" if r["estimate"] is None else " ".join(fmt(v) for v in r["estimate"])
        coarse = "" if r["coarse"] is None else " ".join(fmt(v) for v in r["coarse"])
        rows.append([fmt(r["axis_value"]), r["method"], str(r["trial"]), est, fmt(r["criterion"]), coarse])
    return _write_rows(path, header, rows)


_MC_PLOT = '''"""Plot bias and standard deviation of the IV-SSF variants from {csv_name}."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
with open(path, newline="") as fh:
    rows = list(csv.DictReader(fh))
axis = "{axis}"
x = [float(r[axis]) for r in rows]
fig, ax = plt.subplots()
for suffix, label in (("1s", "one-sided IV-SSF"), ("2s", "two-sided IV-SSF")):
    if "std_" + suffix not in rows[0]:
        continue
    ax.plot(x, [float(r["std_" + suffix]) for r in rows], "o-", label=label + " std")
    ax.plot(x, [abs(float(r["bias_" + suffix])) for r in rows], "s--", label=label + " |bias|")
ax.plot(x, [float(r["sqrt_crb_cor"]) for r in rows], "k-", label="sqrt CRB cor")
ax.set_yscale("log")
if axis == "n":
    ax.set_xscale("log")
ax.set_xlabel(axis)
ax.legend()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''

_BOUNDS_PLOT = '''"""Plot the deterministic, iid and correlated bounds from {csv_name}."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
with open(path, newline="") as fh:
    rows = list(csv.DictReader(fh))
axis = "{axis}"
x = [float(r[axis]) for r in rows]
fig, ax = plt.subplots()
ratio = "cor_over_iid_s1" in rows[0]
for key, label in ((("det_over_iid_s1", "det / iid"), ("cor_over_iid_s1", "cor / iid")) if ratio else
                   (("crb_det_s1", "CRB det"), ("crb_iid_s1", "CRB iid"), ("crb_cor_s1", "CRB cor"))):
    ax.plot(x, [float(r[key]) for r in rows], "o-", label=label)
if not ratio:
    ax.set_yscale("log")
if axis == "n":
    ax.set_xscale("log")
ax.set_xlabel(axis)
ax.legend()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def write_plot_script(csv_path, axis, kind="montecarlo"):
    csv_path = Path(csv_path)
    template = _MC_PLOT if kind == "montecarlo" else _BOUNDS_PLOT
    out = csv_path.with_suffix(".plot.py")
    try:
        out.write_text(template.format(csv_name=csv_path.name, axis=axis), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc}") from None
    return out


def emit_outputs(report, path, plot=True, **metadata):
    """Write the report CSV, a metadata sidecar and (optionally) a plot script."""
    path = Path(path)
    written = [write_report_csv(report, path)]
    written.append(write_metadata(path.with_suffix(".meta.json"), generator=report.generator,
                                  seed=report.seed, axis=report.axis, methods=report.methods, **metadata))
    if plot:
        written.append(write_plot_script(path, report.axis, "montecarlo"))
    return written


# ---------------------------------------------------------------------------
# snapshot dumps


def dump_snapshots(path, X, seed=0):
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2:
        raise ValueError("snapshot dump expects an L x n matrix")
    L, n = X.shape
    try:
        with open(path, "wb") as fh:
            fh.write(_SNAP_HEADER.pack(SNAP_MAGIC, SNAP_VERSION, L, n, int(seed) & (2**64 - 1)))
            fh.write(X.astype("<c16").tobytes(order="F"))
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None
    return Path(path)


def load_snapshots(path):
    """Return ``(X, seed)`` from a snapshot dump."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from None
    magic, version, L, n, seed = _SNAP_HEADER.unpack_from(data)
    if magic != SNAP_MAGIC or version != SNAP_VERSION:
        raise ValueError(f"{path} is not a version-{SNAP_VERSION} snapshot dump")
    body = np.frombuffer(data, dtype="<c16", offset=_SNAP_HEADER.size)
    if body.size != L * n:
        raise ValueError(f"{path}: expected {L * n} values, found {body.size}")
    return body.reshape((L, n), order="F").astype(np.complex128), seed
