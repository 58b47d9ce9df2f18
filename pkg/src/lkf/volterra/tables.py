"""Tabulated solutions and solver settings."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import InputError

KINDS = ("W", "Z", "U", "generic")


@dataclass(frozen=True)
class SolveConfig:
    """Discretisation and Picard settings.

    ``picard_damping`` is the exponential damping rate s0; ``None`` selects it
    automatically.  ``cross_check_limit`` caps the node count for which
    ``solve_z`` recomputes Z from its definition.
    """

    step: float = 1e-3
    picard_damping: Optional[float] = None
    picard_tol: float = 1e-12
    max_picard_iters: int = 200
    cross_check_limit: int = 1500

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise InputError(f"step must be positive, got {self.step!r}")
        if not self.picard_tol > 0:
            raise InputError("picard_tol must be positive")
        if self.picard_damping is not None and not self.picard_damping > 0:
            raise InputError("picard_damping must be positive")
        if self.max_picard_iters < 1:
            raise InputError("max_picard_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class ScaleTable:
    """``x -> H(x, base)`` on the nodes ``x >= base``."""

    base: float
    nodes: np.ndarray
    values: np.ndarray
    kind: str = "generic"
    q: Optional[float] = None
    step: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.shape != values.shape or nodes.ndim != 1:
            raise InputError("nodes and values must be 1-d arrays of equal length")
        if not np.all(np.isfinite(values)):
            raise InputError("table values must be finite")
        if self.kind not in KINDS:
            raise InputError(f"unknown table kind {self.kind!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.nodes.size

    def __call__(self, x):
        """Value at ``x``: exact on nodes, linear between them."""
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.nodes[0]) or np.any(xa > self.nodes[-1]):
            raise InputError(f"x outside table range [{self.nodes[0]!r}, {self.nodes[-1]!r}]")
        out = np.interp(xa, self.nodes, self.values)
        return float(out) if out.ndim == 0 else out

    def at_node(self, x: float) -> float:
        i = int(np.searchsorted(self.nodes, x))
        if i >= self.nodes.size or self.nodes[i] != x:
            raise InputError(f"{x!r} is not a node of this table")
        return float(self.values[i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# kind={self.kind}\n# base={self.base!r}\n")
        buf.write(f"# q={self.q!r}\n# step={self.step!r}\n")
        for k, v in self.meta.items():
            buf.write(f"# {k}={v!r}\n")
        buf.write("x,value\n")
        for x, v in zip(self.nodes, self.values):
            buf.write(f"{float(x)!r},{float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScaleTable":
        header = {}
        xs, vs = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key.strip()] = val.strip()
                continue
            if line.startswith("x,"):
                continue
            a, b = line.split(",")[:2]
            xs.append(float(a))
            vs.append(float(b))

        def num(key):
            v = header.pop(key, "None")
            return None if v == "None" else float(v)

        kind = header.pop("kind", "generic")
        base = num("base")
        q = num("q")
        step = num("step")
        return cls(base, np.array(xs), np.array(vs), kind, q, step, header)
