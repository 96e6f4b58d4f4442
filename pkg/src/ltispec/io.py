"""JSON system documents and CSV/JSON spectrum documents.

Indices in documents are one-based, matching the command line.  Floats are
written with ``repr`` so every value survives a write/read cycle exactly.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .system import LtiSystem

CONVENTION = ("two-sided density in angular frequency w = 2 pi f; "
              "(1/2pi) * integral S dw = covariance; S_ij = E[conj(X_i) X_j]; freq column in Hz")


class DocumentError(ValueError):
    """Malformed input document; the message names the offending field."""


def _matrix(doc, key, rows, cols=None):
    try:
        M = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"field '{key}': not a numeric matrix ({exc})") from None
    if M.ndim != 2 or M.shape[0] != rows or (cols is not None and M.shape[1] != cols):
        raise DocumentError(f"field '{key}': expected {rows} x {cols if cols is not None else 'm'}, "
                            f"got shape {M.shape}")
    return M


def system_from_dict(doc: dict) -> LtiSystem:
    """Validate a SystemDocument ``{"n", "m", "J", "L"?, "D"?, "labels"?}``."""
    if not isinstance(doc, dict):
        raise DocumentError("system document must be a JSON object")
    for key in ("n", "J"):
        if key not in doc:
            raise DocumentError(f"field '{key}': missing")
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise DocumentError(f"field 'n': expected a positive integer, got {n!r}")
    m = doc.get("m", n)
    if not isinstance(m, int) or m < 1:
        raise DocumentError(f"field 'm': expected a positive integer, got {m!r}")
    J = _matrix(doc, "J", n, n)
    L = _matrix(doc, "L", n, m) if "L" in doc else None
    if L is None and m != n:
        raise DocumentError("field 'L': required when m != n")
    D = None
    if "D" in doc:
        D = np.array(doc["D"], dtype=float)
        if D.shape != (m,):
            raise DocumentError(f"field 'D': expected {m} diagonal entries, got shape {D.shape}")
    labels = doc.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != n):
        raise DocumentError(f"field 'labels': expected a list of {n} strings")
    try:
        return LtiSystem(J, L, D, labels)
    except ValueError as exc:
        raise DocumentError(str(exc)) from None


def system_to_dict(sys: LtiSystem) -> dict:
    out = {"n": sys.n, "m": sys.m, "J": sys.J.tolist(), "L": sys.L.tolist(), "D": sys.D.tolist()}
    if sys.labels is not None:
        out["labels"] = list(sys.labels)
    return out


def read_system(path) -> LtiSystem:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return system_from_dict(doc)


@dataclass(eq=False)
class SpectrumDocument:
    """Spectrum values on an ordinary-frequency grid.

    ``values`` is keyed by zero-based ``(i, j)``; auto entries are real.
    ``extra`` holds further real columns such as coherence ``K_i_j``.
    """

    freqs: np.ndarray
    values: Dict[Tuple[int, int], np.ndarray]
    metadata: dict = field(default_factory=dict)
    extra: Dict[str, np.ndarray] = field(default_factory=dict)
    coefficients: Optional[dict] = None

    def columns(self):
        cols = {"freq": np.asarray(self.freqs, dtype=float)}
        for (i, j), v in self.values.items():
            v = np.asarray(v)
            cols[f"S_{i + 1}_{j + 1}_re"] = v.real.astype(float)
            if i != j:
                cols[f"S_{i + 1}_{j + 1}_im"] = v.imag.astype(float)
        for k, v in self.extra.items():
            cols[k] = np.asarray(v, dtype=float)
        return cols

    def to_dict(self) -> dict:
        out = {"metadata": self.metadata, "columns": {k: v.tolist() for k, v in self.columns().items()}}
        if self.coefficients is not None:
            out["coefficients"] = self.coefficients
        return out

    @classmethod
    def from_columns(cls, cols, metadata=None, coefficients=None):
        cols = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
        if "freq" not in cols:
            raise DocumentError("column 'freq': missing")
        values, extra = {}, {}
        pat = re.compile(r"S_(\d+)_(\d+)_(re|im)$")
        for k, v in cols.items():
            if k == "freq":
                continue
            mt = pat.match(k)
            if not mt:
                extra[k] = v
                continue
            if mt.group(3) == "im":
                continue
            i, j = int(mt.group(1)) - 1, int(mt.group(2)) - 1
            im = cols.get(f"S_{i + 1}_{j + 1}_im")
            values[(i, j)] = v if im is None else v + 1j * im
        return cls(cols["freq"], values, dict(metadata or {}), extra, coefficients)

    @classmethod
    def from_dict(cls, doc: dict):
        if "columns" not in doc:
            raise DocumentError("field 'columns': missing")
        return cls.from_columns(doc["columns"], doc.get("metadata"), doc.get("coefficients"))

    def write(self, path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".json":
            path.write_text(json.dumps(self.to_dict(), indent=1))
        else:
            path.write_text(self.to_csv())

    def to_csv(self) -> str:
        cols = self.columns()
        lines = [f"# {k}={json.dumps(v)}" for k, v in self.metadata.items()]
        lines.append(",".join(cols))
        table = np.column_stack(list(cols.values()))
        lines += [",".join(repr(float(x)) for x in row) for row in table]
        return "\n".join(lines) + "\n"


def read_spectrum(path) -> SpectrumDocument:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return SpectrumDocument.from_dict(json.loads(path.read_text()))
    return parse_spectrum_csv(path.read_text())


def parse_spectrum_csv(text: str) -> SpectrumDocument:
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = json.loads(v)
        elif line.strip():
            body.append(line)
    if not body:
        raise DocumentError("spectrum CSV has no header row")
    rows = list(csv.reader(body))
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(header))
    return SpectrumDocument.from_columns(dict(zip(header, data.T)), meta)
