"""Delimited-text persistence for data, chains, and result tables.

All numeric output goes through repr() of Python floats (shortest
round-trip form), so byte-identical reruns are a matter of identical
numbers, not formatting luck.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import GridIncomplete, ParseError
from .inference import PosteriorChain
from .observation import CaseSeries
from .parameters import PARAM_NAMES

CASE_HEADER = "week,age_group,cases"
CHAIN_HEADER = ",".join(PARAM_NAMES + ("log_posterior",))
IMPACT_HEADER = ("coverage", "percent_reduction", "lower99", "upper99",
                 "absolute_reduction")


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path):
    """Returns (header fields, rows of string fields)."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError("empty table file", line=1)
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    return header, rows


# ---------------------------------------------------------------------------
# Case series


def load_case_series(path) -> CaseSeries:
    """Parse `week,age_group,cases` text into a complete weekly grid."""
    text = Path(path).read_text()
    header_seen = False
    cells = {}
    cell_lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not header_seen:
            if line != CASE_HEADER:
                raise ParseError(
                    f"expected header {CASE_HEADER!r}, got {line!r}",
                    line=lineno)
            header_seen = True
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 3:
            raise ParseError("expected 3 comma-separated fields",
                             line=lineno)
        try:
            week = int(fields[0])
            age = int(fields[1])
            cases = int(fields[2])
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}",
                             line=lineno) from None
        if week < 1:
            raise ParseError("week numbers start at 1", line=lineno)
        if not 1 <= age <= 6:
            raise ParseError("age_group must be 1..6", line=lineno)
        if cases < 0:
            raise ParseError("cases must be nonnegative", line=lineno)
        key = (week, age)
        if key in cells:
            raise GridIncomplete(
                f"duplicate cell (week={week}, age_group={age}) at line "
                f"{lineno} (first seen at line {cell_lines[key]})")
        cells[key] = cases
        cell_lines[key] = lineno
    if not header_seen:
        raise ParseError("missing header line", line=1)
    if not cells:
        return CaseSeries(np.zeros((0, 6), dtype=np.int64))
    n_weeks = max(week for week, _ in cells)
    missing = [(w, a) for w in range(1, n_weeks + 1) for a in range(1, 7)
               if (w, a) not in cells]
    if missing:
        shown = ", ".join(f"(week={w}, age_group={a})"
                          for w, a in missing[:12])
        extra = "" if len(missing) <= 12 else f" and {len(missing) - 12} more"
        raise GridIncomplete(f"missing cells: {shown}{extra}")
    counts = np.empty((n_weeks, 6), dtype=np.int64)
    for (week, age), value in cells.items():
        counts[week - 1, age - 1] = value
    return CaseSeries(counts)


def write_case_series(series: CaseSeries, path) -> Path:
    path = Path(path)
    lines = [CASE_HEADER]
    for t in range(series.n_weeks):
        for a in range(6):
            lines.append(f"{int(series.weeks[t])},{a + 1},"
                         f"{int(series.counts[t, a])}")
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Chains


def save_chain(chain: PosteriorChain, path) -> Path:
    path = Path(path)
    lines = [CHAIN_HEADER]
    for i in range(chain.n_samples):
        fields = [repr(float(v)) for v in chain.samples[i]]
        fields.append(repr(float(chain.log_posteriors[i])))
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_chain_records(path):
    """Read a chain file back to (samples (n, 10), log_posteriors (n,))."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != CHAIN_HEADER:
        raise ParseError(f"expected chain header {CHAIN_HEADER!r}", line=1)
    samples = []
    log_posts = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 11:
            raise ParseError("expected 11 comma-separated values",
                             line=lineno)
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}",
                             line=lineno) from None
        samples.append(values[:10])
        log_posts.append(values[10])
    return (np.asarray(samples, dtype=float).reshape(len(samples), 10),
            np.asarray(log_posts, dtype=float))


def load_chain(path, model_id: str, n_observations: int) -> PosteriorChain:
    """Rebuild a chain object from disk. Run metadata that the file format
    does not carry (acceptance rate, seed, burn-in) is set to placeholder
    values; everything downstream needs is the samples and posteriors."""
    samples, log_posts = load_chain_records(path)
    return PosteriorChain(model_id=model_id, samples=samples,
                          log_posteriors=log_posts,
                          acceptance_rate=math.nan, seed=-1,
                          burn_in_length=0, n_observations=n_observations)


# ---------------------------------------------------------------------------
# Manifest


def write_manifest(path, entries: dict) -> Path:
    path = Path(path)
    lines = [f"{key}={format_value(entries[key])}"
             for key in sorted(entries)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
