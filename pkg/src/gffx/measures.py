"""Point, cell and maximum containers with their on-disk formats."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

__all__ = [
    "PointMeasure",
    "CellMeasure",
    "MaxSample",
    "write_point_measures",
    "read_point_measures",
]


@dataclass
class PointMeasure:
    """Finite collection of points ``(x, h)`` with ``x`` in ``[0, 1]^2``.

    ``meta`` carries extraction parameters (``N``, ``r``, ``lam``) and the seed
    lineage.  When ``lam`` is present every height satisfies ``h >= -lam``.
    """

    x: np.ndarray
    h: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1, 2)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        if len(self.x) != len(self.h):
            raise ValueError("positions and heights differ in length")
        if len(self.h) and (self.x.min() < 0.0 or self.x.max() > 1.0):
            raise ValueError("positions must lie in [0, 1]^2")
        lam = self.meta.get("lam")
        if lam is not None and len(self.h) and self.h.min() < -lam:
            raise ValueError("heights below the cutoff -lam")

    def __len__(self) -> int:
        return len(self.h)

    @classmethod
    def empty(cls, **meta) -> "PointMeasure":
        return cls(np.zeros((0, 2)), np.zeros(0), dict(meta))

    def in_region(self, region) -> np.ndarray:
        """Mask of points inside the box ``region = (a1, b1, a2, b2)`` (half-open)."""
        a1, b1, a2, b2 = region
        x = self.x
        return (x[:, 0] >= a1) & (x[:, 0] < b1) & (x[:, 1] >= a2) & (x[:, 1] < b2)

    def restrict(self, region) -> "PointMeasure":
        keep = self.in_region(region)
        return PointMeasure(self.x[keep], self.h[keep], dict(self.meta))

    def header(self) -> dict[str, Any]:
        return {"type": "header", "n_points": len(self), "meta": self.meta}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "h"])
            for (a, b), c in zip(self.x, self.h):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])


def write_point_measures(path, measures: Iterable[PointMeasure]) -> None:
    """JSONL: per measure one header record, then one ``{x1, x2, h}`` record per point."""
    with open(path, "w") as fh:
        for m in measures:
            fh.write(json.dumps(m.header()) + "\n")
            for (a, b), c in zip(m.x, m.h):
                fh.write(json.dumps({"x1": float(a), "x2": float(b), "h": float(c)}) + "\n")


def read_point_measures(path) -> list[PointMeasure]:
    out: list[PointMeasure] = []
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    i = 0
    while i < len(lines):
        head = lines[i]
        if head.get("type") != "header":
            raise ValueError(f"expected a header record at line {i + 1}")
        n = int(head["n_points"])
        recs = lines[i + 1 : i + 1 + n]
        if len(recs) != n:
            raise ValueError("truncated point-measure file")
        x = np.array([[r["x1"], r["x2"]] for r in recs]).reshape(-1, 2)
        h = np.array([r["h"] for r in recs])
        out.append(PointMeasure(x, h, head.get("meta", {})))
        i += 1 + n
    return out


@dataclass
class CellMeasure:
    """Nonnegative masses on the ``m x m`` grid of cells over ``[0, 1]^2``.

    ``cells[a, b]`` is the mass of ``[a/m, (a+1)/m) x [b/m, (b+1)/m)``.
    """

    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.ndim != 2 or self.cells.shape[0] != self.cells.shape[1]:
            raise ValueError("cells must be a square array")
        if not np.all(np.isfinite(self.cells)) or self.cells.min() < 0.0:
            raise ValueError("cell masses must be finite and nonnegative")

    @property
    def m(self) -> int:
        return self.cells.shape[0]

    @property
    def total(self) -> float:
        return float(self.cells.sum())

    @classmethod
    def uniform(cls, m: int, total: float = 1.0) -> "CellMeasure":
        return cls(np.full((m, m), total / (m * m)))

    def mass(self, region) -> float:
        """Mass of a box ``(a1, b1, a2, b2)`` whose edges lie on the grid."""
        a1, b1, a2, b2 = (int(round(v * self.m)) for v in region)
        return float(self.cells[a1:b1, a2:b2].sum())

    def scaled(self, c: float) -> "CellMeasure":
        return CellMeasure(self.cells * c)

    def to_dict(self) -> dict[str, Any]:
        return {"m": self.m, "cells": self.cells.ravel().tolist(), "total": self.total}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CellMeasure":
        m = int(d["m"])
        cm = cls(np.asarray(d["cells"], dtype=float).reshape(m, m))
        if not np.isclose(cm.total, d["total"], rtol=1e-12, atol=0.0):
            raise ValueError("stored total does not match the cells")
        return cm

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "CellMeasure":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class MaxSample:
    """Centered maxima ``M_N - m_N`` and scaled argmax positions, one row per replicate."""

    max_centered: np.ndarray
    position: np.ndarray
    N: int

    def __post_init__(self):
        self.max_centered = np.asarray(self.max_centered, dtype=float).reshape(-1)
        self.position = np.asarray(self.position, dtype=float).reshape(-1, 2)
        if len(self.position) != len(self.max_centered):
            raise ValueError("maxima and positions differ in length")
        if len(self.position) and (self.position.min() < 0.0 or self.position.max() > 1.0):
            raise ValueError("argmax positions must lie in [0, 1]^2")

    def __len__(self) -> int:
        return len(self.max_centered)

    @property
    def replicates(self) -> int:
        return len(self)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "max_centered", "x1", "x2"])
            for i, (m, (a, b)) in enumerate(zip(self.max_centered, self.position)):
                w.writerow([i, repr(float(m)), repr(float(a)), repr(float(b))])

    @classmethod
    def from_csv(cls, path, N: int) -> "MaxSample":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows.sort(key=lambda r: int(r["rep"]))
        m = [float(r["max_centered"]) for r in rows]
        x = [[float(r["x1"]), float(r["x2"])] for r in rows]
        return cls(np.array(m), np.array(x).reshape(-1, 2), N)
