"""Named parameter vectors with per-entry fixed/free masks."""

from __future__ import annotations

from collections.abc import Iterable, Mapping

import numpy as np

from .exceptions import SpecError


def _readonly(arr):
    arr = np.asarray(arr)
    arr.flags.writeable = False
    return arr


class ParameterVector:
    """Ordered (name, value, fixed) triples.

    Fixed entries keep their value through estimation; only free entries are
    exposed to the optimizer.
    """

    __slots__ = ("names", "values", "fixed")

    def __init__(self, names, values, fixed=None):
        names = tuple(str(n) for n in names)
        if len(set(names)) != len(names):
            raise SpecError("parameter names must be unique")
        values = _readonly(np.array(values, dtype=float))
        if values.shape != (len(names),):
            raise SpecError(
                f"expected {len(names)} parameter values, got shape {values.shape}"
            )
        if fixed is None:
            fixed = np.zeros(len(names), dtype=bool)
        fixed = _readonly(np.array(fixed, dtype=bool))
        if fixed.shape != values.shape:
            raise SpecError("fixed mask must match parameter count")
        self.names = names
        self.values = values
        self.fixed = fixed

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_dict(cls, mapping: Mapping[str, float], fixed: Iterable[str] = ()):
        names = tuple(mapping)
        fixed_set = set(fixed)
        unknown = fixed_set - set(names)
        if unknown:
            raise SpecError(f"fixed names not in parameter vector: {sorted(unknown)}")
        return cls(names, [mapping[n] for n in names], [n in fixed_set for n in names])

    # -- basic accessors ----------------------------------------------------

    def __len__(self):
        return len(self.names)

    def __repr__(self):
        parts = [
            f"{n}={v:.6g}{'*' if f else ''}"
            for n, v, f in zip(self.names, self.values, self.fixed)
        ]
        return f"ParameterVector({', '.join(parts)})"

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SpecError(f"unknown parameter {name!r}") from None

    def value(self, name: str) -> float:
        return float(self.values[self.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    @property
    def free_mask(self) -> np.ndarray:
        return ~self.fixed

    @property
    def n_free(self) -> int:
        return int(self.free_mask.sum())

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(n for n, f in zip(self.names, self.fixed) if not f)

    def free_values(self) -> np.ndarray:
        return self.values[self.free_mask].copy()

    # -- derived vectors ----------------------------------------------------

    def with_values(self, values) -> "ParameterVector":
        """Full replacement of the value array; names and mask unchanged."""
        return ParameterVector(self.names, values, self.fixed)

    def with_free_values(self, free_values) -> "ParameterVector":
        free_values = np.asarray(free_values, dtype=float)
        if free_values.shape != (self.n_free,):
            raise SpecError(
                f"expected {self.n_free} free values, got shape {free_values.shape}"
            )
        values = self.values.copy()
        values[self.free_mask] = free_values
        return ParameterVector(self.names, values, self.fixed)

    def updated(self, mapping: Mapping[str, float]) -> "ParameterVector":
        values = self.values.copy()
        for name, val in mapping.items():
            values[self.index(name)] = val
        return ParameterVector(self.names, values, self.fixed)

    def fixing(self, mapping: Mapping[str, float]) -> "ParameterVector":
        """Fix the named entries at the given values; other entries unchanged."""
        values = self.values.copy()
        fixed = self.fixed.copy()
        for name, val in mapping.items():
            i = self.index(name)
            values[i] = val
            fixed[i] = True
        return ParameterVector(self.names, values, fixed)

    def all_free(self) -> "ParameterVector":
        return ParameterVector(self.names, self.values, np.zeros(len(self), bool))
