"""Text serialization of profiles and key: value documents.

Profiles are stored as a CSV body plus a ``.meta`` sidecar that shares the
basename. Floats are written with ``repr``, which is the shortest string that
round-trips, so read(write(p)) reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
import os
from pathlib import Path

import numpy as np

from .errors import ProfileFormatError
from .profile import FLAGS, Profile

HEADER = ("xi", "H", "Gamma", "dH", "dGamma", "flag")


def meta_path_for(path) -> Path:
    return Path(path).with_suffix(".meta")


def format_float(value) -> str:
    return repr(float(value))


def _write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def dump_keyvalue(pairs) -> str:
    """Render ``key: value`` lines; keys keep their given order."""
    items = pairs.items() if isinstance(pairs, dict) else pairs
    lines = []
    for key, value in items:
        text = format_float(value) if isinstance(value, (float, np.floating)) else str(value)
        if "\n" in text or "\n" in str(key) or ":" in str(key):
            raise ValueError(f"cannot store key {key!r} with value {text!r} on one line")
        lines.append(f"{key}: {text}")
    return "".join(line + "\n" for line in lines)


def parse_keyvalue(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(": ")
        if not sep:
            if line.endswith(":"):
                key, value = line[:-1], ""
            else:
                raise ProfileFormatError(f"expected 'key: value', got {line!r}", lineno)
        if key in out:
            raise ProfileFormatError(f"duplicate key {key!r}", lineno)
        out[key] = value
    return out


def write_keyvalue(pairs, path):
    _write_text(path, dump_keyvalue(pairs))


def read_keyvalue(path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_keyvalue(fh.read())


def profile_csv_text(profile: Profile) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for row in zip(profile.xi, profile.H, profile.Gamma, profile.dH, profile.dGamma, profile.flags):
        writer.writerow([*(format_float(v) for v in row[:5]), row[5]])
    return buf.getvalue()


def write_profile(profile: Profile, path, meta_path=None):
    """Write the CSV body and its metadata sidecar (default: same basename, ``.meta``)."""
    _write_text(path, profile_csv_text(profile))
    write_keyvalue(dict(sorted(profile.meta.items())), meta_path or meta_path_for(path))


def parse_profile_csv(text: str) -> tuple[np.ndarray, list[str]]:
    rows = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(rows)
    except StopIteration:
        raise ProfileFormatError("empty file", 1) from None
    if tuple(header) != HEADER:
        raise ProfileFormatError(f"header must be {','.join(HEADER)}, got {','.join(header)}", 1)
    values, flags = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(HEADER):
            raise ProfileFormatError(f"expected {len(HEADER)} fields, got {len(row)}", lineno)
        try:
            nums = [float(v) for v in row[:5]]
        except ValueError as exc:
            raise ProfileFormatError(f"bad number: {exc}", lineno) from None
        if row[5] not in FLAGS:
            raise ProfileFormatError(f"unknown flag {row[5]!r}", lineno)
        bad = [HEADER[i] for i, v in enumerate(nums) if not math.isfinite(v)]
        if bad:
            raise ProfileFormatError(f"non-finite value in column {bad[0]}", lineno)
        values.append(nums)
        flags.append(row[5])
    return np.array(values, dtype=float).reshape(-1, 5), flags


def read_profile(path, meta_path=None) -> Profile:
    """Load and validate a profile; a missing sidecar yields empty metadata."""
    with open(path, encoding="utf-8", newline="") as fh:
        data, flags = parse_profile_csv(fh.read())
    mp = Path(meta_path) if meta_path else meta_path_for(path)
    meta = read_keyvalue(mp) if os.path.exists(mp) else {}
    return Profile(*data.T, flags, meta).validate()
