"""Typed in-memory tables with CSV round-tripping and feature transforms.

A Table is an ordered list of named columns, each numeric (float64) or
categorical (strings), with an explicit per-cell missing mask.  CSV files
use RFC-4180 quoting; an empty field or the literal "NA" reads back as
missing, and numeric cells are written with shortest round-trip reprs so a
write/read cycle is value-exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng

MISSING_TOKEN = "NA"


class TableError(ValueError):
    pass


@dataclass
class Column:
    name: str
    kind: str                      # "numeric" | "categorical"
    values: np.ndarray             # float64 or object (str)
    missing: np.ndarray            # bool mask

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise TableError(f"unknown column kind: {self.kind!r}")
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.kind == "numeric":
            self.values = np.asarray(self.values, dtype=np.float64)
        else:
            self.values = np.asarray(self.values, dtype=object)
        if len(self.values) != len(self.missing):
            raise TableError("values and missing mask must have equal length")


@dataclass
class Table:
    columns: list = field(default_factory=list)

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise TableError("column names must be unique")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) > 1:
            raise TableError("columns must share one length")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise TableError(f"no column named {name!r}")

    def take(self, indices) -> "Table":
        idx = np.asarray(indices, dtype=np.int64)
        return Table([Column(c.name, c.kind, c.values[idx], c.missing[idx])
                      for c in self.columns])


def numeric_column(name: str, values, missing=None) -> Column:
    values = np.asarray(values, dtype=np.float64)
    if missing is None:
        missing = ~np.isfinite(values)
    return Column(name, "numeric", np.where(missing, 0.0, values), missing)


def categorical_column(name: str, values, missing=None) -> Column:
    vals = np.array([str(v) for v in values], dtype=object)
    if missing is None:
        missing = np.zeros(len(vals), dtype=bool)
    return Column(name, "categorical", vals, missing)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_csv(table: Table, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(table.names)
        for i in range(table.n_rows):
            row = []
            for c in table.columns:
                if c.missing[i]:
                    row.append(MISSING_TOKEN)
                elif c.kind == "numeric":
                    row.append(repr(float(c.values[i])))
                else:
                    row.append(str(c.values[i]))
            writer.writerow(row)


def _parse_float(cell: str):
    try:
        v = float(cell)
        return v if math.isfinite(v) else None
    except ValueError:
        return None


def read_csv(path, types: dict = None) -> Table:
    """Load a Table; column types are inferred unless given in `types`.

    A column is numeric when every non-missing cell parses as a finite
    float and at least one cell is non-missing; otherwise categorical.
    Ragged rows raise with the offending 1-based line number.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError("empty CSV: no header row") from None
        raw = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise TableError(
                    f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            for name, cell in zip(header, row):
                raw[name].append(cell)

    columns = []
    for name in header:
        cells = raw[name]
        missing = np.array([c == "" or c == MISSING_TOKEN for c in cells])
        wanted = (types or {}).get(name)
        parsed = [None if m else _parse_float(c) for c, m in zip(cells, missing)]
        inferred_numeric = (not missing.all()
                            and all(p is not None for p, m in zip(parsed, missing)
                                    if not m))
        kind = wanted or ("numeric" if inferred_numeric else "categorical")
        if kind == "numeric":
            if not inferred_numeric and not missing.all():
                raise TableError(f"column {name!r} has non-numeric cells")
            values = np.array([0.0 if m else p for p, m in zip(parsed, missing)])
            columns.append(Column(name, "numeric", values, missing))
        else:
            values = np.array(["" if m else c for c, m in zip(cells, missing)],
                              dtype=object)
            columns.append(Column(name, "categorical", values, missing))
    return Table(columns)


# ---------------------------------------------------------------------------
# Feature transforms
# ---------------------------------------------------------------------------

def one_hot(table: Table, column: str) -> Table:
    """Replace a categorical column by K binary dummies (plus a missing
    indicator when any cell is missing).

    Dummies are named col=level in lexicographic level order; a non-missing
    row gets exactly one 1, a missing row is all-zero with indicator 1.
    """
    col = table.column(column)
    if col.kind != "categorical":
        raise TableError(f"column {column!r} is not categorical")
    levels = sorted({str(v) for v, m in zip(col.values, col.missing) if not m})
    out = []
    for c in table.columns:
        if c.name != column:
            out.append(c)
            continue
        for level in levels:
            hits = np.array([(not m) and str(v) == level
                             for v, m in zip(col.values, col.missing)],
                            dtype=np.float64)
            out.append(Column(f"{column}={level}", "numeric", hits,
                              np.zeros(table.n_rows, dtype=bool)))
        if col.missing.any():
            out.append(Column(f"{column}_missing", "numeric",
                              col.missing.astype(np.float64),
                              np.zeros(table.n_rows, dtype=bool)))
    return Table(out)


def _sample_std(values: np.ndarray) -> float:
    return float(values.std(ddof=1)) if len(values) > 1 else 0.0


def _lower_median(values: np.ndarray) -> float:
    s = np.sort(values)
    return float(s[(len(s) - 1) // 2])


def session_features(sessions: Table, user_ids=None) -> Table:
    """One feature row per user from raw session records.

    Requires columns user_id, action_type, device_type, duration.  Per
    user: total session count; per action type, count and duration sample
    std; per device type, the same; and overall duration mean, sample std,
    and lower median.  Users listed in user_ids but absent from the
    sessions table get all-zero features and had_sessions = 0.
    """
    for required in ("user_id", "action_type", "device_type", "duration"):
        if required not in sessions.names:
            raise TableError(f"sessions table lacks required column {required!r}")
    uid = sessions.column("user_id").values
    action = sessions.column("action_type").values
    device = sessions.column("device_type").values
    duration = sessions.column("duration").values

    by_user = {}
    for i in range(sessions.n_rows):
        by_user.setdefault(str(uid[i]), []).append(i)

    if user_ids is None:
        users = sorted(by_user)
    else:
        users = [str(u) for u in user_ids]

    action_levels = sorted({str(a) for a in action})
    device_levels = sorted({str(d) for d in device})
    action_index = {a: i for i, a in enumerate(action_levels)}
    device_index = {d: i for i, d in enumerate(device_levels)}
    action_codes = np.array([action_index[str(a)] for a in action], dtype=np.int64)
    device_codes = np.array([device_index[str(d)] for d in device], dtype=np.int64)

    n = len(users)
    feats = {"n_sessions": np.zeros(n), "had_sessions": np.zeros(n),
             "dur_mean": np.zeros(n), "dur_std": np.zeros(n),
             "dur_median": np.zeros(n)}
    for a in action_levels:
        feats[f"action={a}_count"] = np.zeros(n)
        feats[f"action={a}_dur_std"] = np.zeros(n)
    for d in device_levels:
        feats[f"device={d}_count"] = np.zeros(n)
        feats[f"device={d}_dur_std"] = np.zeros(n)

    for row, user in enumerate(users):
        idx = by_user.get(user)
        if not idx:
            continue
        idx = np.array(idx)
        durs = duration[idx]
        feats["n_sessions"][row] = len(idx)
        feats["had_sessions"][row] = 1.0
        feats["dur_mean"][row] = durs.mean()
        feats["dur_std"][row] = _sample_std(durs)
        feats["dur_median"][row] = _lower_median(durs)
        acodes = action_codes[idx]
        dcodes = device_codes[idx]
        for ai, a in enumerate(action_levels):
            mask = acodes == ai
            feats[f"action={a}_count"][row] = mask.sum()
            feats[f"action={a}_dur_std"][row] = _sample_std(durs[mask])
        for di, d in enumerate(device_levels):
            mask = dcodes == di
            feats[f"device={d}_count"][row] = mask.sum()
            feats[f"device={d}_dur_std"][row] = _sample_std(durs[mask])

    columns = [categorical_column("user_id", users)]
    for name, values in feats.items():
        columns.append(Column(name, "numeric", values,
                              np.zeros(n, dtype=bool)))
    return Table(columns)


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def holdout_size(n: int, frac: float) -> int:
    """round-half-up of frac * n."""
    return int(math.floor(frac * n + 0.5))


def holdout_split(table: Table, frac: float, seed: int, stratify=None):
    """Disjoint (train, holdout) partition with |holdout| = round(frac*n).

    With stratify (a label per row), per-class holdout counts follow
    largest-remainder allocation, so each stays within one record of exact
    proportionality.  Returns (train, holdout, train_idx, holdout_idx);
    both index arrays are ascending, preserving original row order.
    """
    if not 0.0 < frac < 1.0:
        raise ValueError("frac must lie strictly between 0 and 1")
    n = table.n_rows
    h = holdout_size(n, frac)
    rng = Rng(seed)
    if stratify is None:
        perm = rng.permutation(n)
        hold = np.sort(perm[:h])
    else:
        labels = [str(v) for v in stratify]
        if len(labels) != n:
            raise TableError("stratify must supply one label per row")
        groups = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        quotas = {}
        remainders = []
        total = 0
        for lab in sorted(groups):
            exact = frac * len(groups[lab])
            quotas[lab] = int(math.floor(exact))
            total += quotas[lab]
            remainders.append((-(exact - math.floor(exact)), lab))
        remainders.sort()
        for _, lab in remainders[: h - total]:
            quotas[lab] += 1
        chosen = []
        for lab in sorted(groups):
            members = np.array(groups[lab])
            perm = rng.permutation(len(members))
            chosen.extend(members[perm[: quotas[lab]]].tolist())
        hold = np.sort(np.array(chosen, dtype=np.int64))
    mask = np.zeros(n, dtype=bool)
    mask[hold] = True
    train = np.nonzero(~mask)[0]
    return table.take(train), table.take(hold), train, hold
