"""Byte-stable CSV output and file hashing."""
from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np


def format_float(x: float) -> str:
    """17 significant digits, which round-trips any double."""
    return f"{float(x):.17g}"


def write_csv(path, header: Sequence[str], rows) -> str:
    """Write ``rows`` (2-D array or iterable of tuples) under ``header``.

    Floats use :func:`format_float`; ints and strings are written as is.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return str(path)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format_float(v)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def sha256_file(path, block: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while chunk := fh.read(block):
            h.update(chunk)
    return h.hexdigest()
