"""Panel choice datasets: schema, loading, writing, synthesis, validation.

A dataset is a panel of persons x tasks x alternatives.  Attributes are
stored as a dense float64 tensor of shape (total_tasks, n_alternatives,
n_attributes); person blocks are contiguous so per-person likelihood
contributions can be formed by segment sums.

Two delimited-text layouts are supported.  Wide is canonical: one row per
(person, task) with columns ``<attr>_<alt>``.  Long has one row per
(person, task, alternative) and needs explicit task and alternative
columns.  Attribute values are kept in their raw units (e.g. minutes,
CHF); no unit conversion is ever applied to the data.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from collections.abc import Mapping, Sequence

import numpy as np

from .exceptions import (
    DataValidationError,
    ParseError,
    SchemaError,
    SpecError,
)

_KNOWN_UNITS = ("minutes", "chf", "count", "unit")


@dataclass(frozen=True)
class DatasetSchema:
    """Declares how dataset columns map onto the choice panel.

    ``units`` is documentation used only when reporting monetary valuations
    (time attributes in minutes are scaled to per-hour values).
    """

    attributes: tuple[str, ...]
    n_alternatives: int
    choice_column: str = "choice"
    person_column: str = "person"
    layout: str = "wide"
    task_column: str | None = None
    alternative_column: str | None = None
    units: Mapping[str, str] | None = None
    person_covariates: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "person_covariates", tuple(self.person_covariates))
        if not self.attributes:
            raise SchemaError("schema needs at least one attribute column")
        if self.n_alternatives < 2:
            raise SchemaError("need at least two alternatives")
        if self.layout not in ("wide", "long"):
            raise SchemaError(f"unknown layout {self.layout!r}")
        if self.layout == "long" and not (self.task_column and self.alternative_column):
            raise SchemaError("long layout requires task_column and alternative_column")
        declared = [self.choice_column, self.person_column, *self.attributes,
                    *self.person_covariates]
        if self.task_column:
            declared.append(self.task_column)
        if self.alternative_column:
            declared.append(self.alternative_column)
        if len(set(declared)) != len(declared):
            raise SchemaError("declared columns must be disjoint")
        if self.units:
            for attr, unit in self.units.items():
                if attr not in self.attributes:
                    raise SchemaError(f"unit declared for unknown attribute {attr!r}")
                if unit not in _KNOWN_UNITS:
                    raise SchemaError(f"unknown unit {unit!r} for {attr!r}")

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    def unit_of(self, attr: str) -> str:
        if self.units and attr in self.units:
            return self.units[attr]
        return "unit"

    def wide_columns(self) -> list[str]:
        """Attribute column names in the wide layout, alternative-minor."""
        return [f"{a}_{j}" for a in self.attributes
                for j in range(1, self.n_alternatives + 1)]

    def to_jsonable(self) -> dict:
        return {
            "attributes": list(self.attributes),
            "n_alternatives": self.n_alternatives,
            "choice_column": self.choice_column,
            "person_column": self.person_column,
            "layout": self.layout,
            "task_column": self.task_column,
            "alternative_column": self.alternative_column,
            "units": dict(self.units) if self.units else None,
            "person_covariates": list(self.person_covariates),
        }

    @classmethod
    def from_jsonable(cls, d: Mapping) -> "DatasetSchema":
        return cls(
            attributes=tuple(d["attributes"]),
            n_alternatives=int(d["n_alternatives"]),
            choice_column=d.get("choice_column", "choice"),
            person_column=d.get("person_column", "person"),
            layout=d.get("layout", "wide"),
            task_column=d.get("task_column"),
            alternative_column=d.get("alternative_column"),
            units=d.get("units"),
            person_covariates=tuple(d.get("person_covariates") or ()),
        )


class ChoiceDataset:
    """Immutable panel of choices with dense attribute storage.

    ``attrs`` has shape (rows, J, A) where rows = sum of tasks over persons;
    ``choices`` holds the observed alternative index in 1..J per row;
    ``task_counts`` gives tasks per person, defining contiguous row blocks.
    """

    def __init__(self, schema: DatasetSchema, attrs, choices, task_counts,
                 person_ids=None, person_covariates=None, validate=True):
        self.schema = schema
        attrs = np.ascontiguousarray(attrs, dtype=np.float64)
        choices = np.ascontiguousarray(choices, dtype=np.int64)
        task_counts = np.ascontiguousarray(task_counts, dtype=np.int64)
        J, A = schema.n_alternatives, schema.n_attributes
        if attrs.ndim != 3 or attrs.shape[1:] != (J, A):
            raise DataValidationError(
                f"attribute tensor must be (rows, {J}, {A}); got {attrs.shape}"
            )
        rows = attrs.shape[0]
        if choices.shape != (rows,):
            raise DataValidationError("one choice per (person, task) row required")
        if task_counts.sum() != rows:
            raise DataValidationError(
                f"task counts sum to {task_counts.sum()} but there are {rows} rows"
            )
        if person_ids is None:
            person_ids = np.arange(1, len(task_counts) + 1)
        person_ids = np.asarray(person_ids)
        if person_ids.shape != task_counts.shape:
            raise DataValidationError("person_ids must match task_counts length")

        if validate:
            bad = np.flatnonzero((choices < 1) | (choices > J))
            if bad.size:
                r = int(bad[0])
                raise DataValidationError(
                    f"choice index {choices[r]} out of range 1..{J} at row {r}"
                )
            if not np.isfinite(attrs).all():
                r, j, a = np.argwhere(~np.isfinite(attrs))[0]
                raise DataValidationError(
                    f"non-finite attribute {schema.attributes[a]!r} at row {r}, "
                    f"alternative {j + 1}"
                )

        for arr in (attrs, choices, task_counts):
            arr.flags.writeable = False
        person_ids.flags.writeable = False
        self.attrs = attrs
        self.choices = choices
        self.task_counts = task_counts
        self.person_ids = person_ids
        starts = np.concatenate(([0], np.cumsum(task_counts)))
        starts.flags.writeable = False
        self.person_starts = starts
        if person_covariates:
            person_covariates = {k: np.asarray(v) for k, v in person_covariates.items()}
            for v in person_covariates.values():
                v.flags.writeable = False
        self.person_covariates = person_covariates or {}

    # -- shape accessors ----------------------------------------------------

    @property
    def n_persons(self) -> int:
        return len(self.task_counts)

    @property
    def n_alternatives(self) -> int:
        return self.schema.n_alternatives

    @property
    def n_attributes(self) -> int:
        return self.schema.n_attributes

    @property
    def n_rows(self) -> int:
        return self.attrs.shape[0]

    total_tasks = n_rows

    def person_slice(self, n: int) -> slice:
        return slice(int(self.person_starts[n]), int(self.person_starts[n + 1]))

    def row_person(self) -> np.ndarray:
        """Person ordinal for every row."""
        return np.repeat(np.arange(self.n_persons), self.task_counts)

    def attribute_index(self, name: str) -> int:
        try:
            return self.schema.attributes.index(name)
        except ValueError:
            raise SpecError(f"unknown attribute {name!r}") from None

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.schema.to_jsonable(), sort_keys=True).encode())
        h.update(self.task_counts.tobytes())
        h.update(self.choices.tobytes())
        h.update(self.attrs.tobytes())
        return h.hexdigest()

    def __repr__(self):
        return (f"ChoiceDataset(N={self.n_persons}, tasks={self.n_rows}, "
                f"J={self.n_alternatives}, attrs={list(self.schema.attributes)})")


# ---------------------------------------------------------------------------
# loading / saving
# ---------------------------------------------------------------------------


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _parse_float(cell, row_no, col):
    try:
        return float(cell)
    except (TypeError, ValueError):
        raise ParseError(
            f"non-numeric value {cell!r} in column {col!r}, data row {row_no}"
        ) from None


def _parse_int(cell, row_no, col):
    try:
        return int(float(cell))
    except (TypeError, ValueError):
        raise ParseError(
            f"non-integer value {cell!r} in column {col!r}, data row {row_no}"
        ) from None


def _check_columns(fieldnames, needed):
    missing = [c for c in needed if c not in fieldnames]
    if missing:
        raise SchemaError(f"missing column(s) {missing} in data file")


def load_dataset(path, schema: DatasetSchema) -> ChoiceDataset:
    """Read a delimited text file (comma or tab, sniffed from the header)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline()
        if not header:
            raise SchemaError(f"{path}: empty file")
        delim = _sniff_delimiter(header)
        fh.seek(0)
        reader = csv.DictReader(fh, delimiter=delim)
        if schema.layout == "wide":
            return _load_wide(reader, schema)
        return _load_long(reader, schema)


def _load_wide(reader, schema):
    J, A = schema.n_alternatives, schema.n_attributes
    needed = [schema.person_column, schema.choice_column] + schema.wide_columns()
    needed += list(schema.person_covariates)
    _check_columns(reader.fieldnames, needed)

    attrs_rows, choices, person_seq = [], [], []
    cov_rows = {c: [] for c in schema.person_covariates}
    for row_no, rec in enumerate(reader, start=1):
        person_seq.append(rec[schema.person_column])
        y = _parse_int(rec[schema.choice_column], row_no, schema.choice_column)
        if not 1 <= y <= J:
            raise DataValidationError(
                f"choice {y} out of range 1..{J} at data row {row_no}"
            )
        choices.append(y)
        block = np.empty((J, A))
        for a, attr in enumerate(schema.attributes):
            for j in range(J):
                col = f"{attr}_{j + 1}"
                block[j, a] = _parse_float(rec[col], row_no, col)
        attrs_rows.append(block)
        for c in schema.person_covariates:
            cov_rows[c].append(_parse_float(rec[c], row_no, c))
    if not attrs_rows:
        raise DataValidationError("data file has no data rows")

    task_counts, person_ids = _contiguous_person_blocks(person_seq)
    covariates = _person_covariates_from_rows(cov_rows, task_counts)
    return ChoiceDataset(schema, np.array(attrs_rows), choices, task_counts,
                         person_ids, covariates)


def _load_long(reader, schema):
    J, A = schema.n_alternatives, schema.n_attributes
    needed = [schema.person_column, schema.task_column, schema.alternative_column,
              schema.choice_column] + list(schema.attributes)
    needed += list(schema.person_covariates)
    _check_columns(reader.fieldnames, needed)

    # accumulate per (person, task) groups in file order
    tasks: list[tuple] = []  # (person, task_key, block, choice)
    current_key = None
    block = seen = choice = None
    cov_rows = {c: [] for c in schema.person_covariates}

    def flush(row_no):
        if current_key is None:
            return
        if len(seen) != J:
            raise DataValidationError(
                f"task {current_key} has alternatives {sorted(seen)}, expected 1..{J} "
                f"(near data row {row_no})"
            )
        tasks.append((current_key[0], current_key[1], block, choice))

    for row_no, rec in enumerate(reader, start=1):
        key = (rec[schema.person_column], rec[schema.task_column])
        alt = _parse_int(rec[schema.alternative_column], row_no,
                         schema.alternative_column)
        if not 1 <= alt <= J:
            raise DataValidationError(
                f"alternative {alt} out of range 1..{J} at data row {row_no}"
            )
        y = _parse_int(rec[schema.choice_column], row_no, schema.choice_column)
        if not 1 <= y <= J:
            raise DataValidationError(
                f"choice {y} out of range 1..{J} at data row {row_no}"
            )
        if key != current_key:
            flush(row_no)
            current_key = key
            block = np.empty((J, A))
            seen = set()
            choice = y
            for c in schema.person_covariates:
                cov_rows[c].append(_parse_float(rec[c], row_no, c))
        elif y != choice:
            raise DataValidationError(
                f"inconsistent choice within task {key} at data row {row_no}"
            )
        if alt in seen:
            raise DataValidationError(
                f"duplicate alternative {alt} in task {key} at data row {row_no}"
            )
        seen.add(alt)
        for a, attr in enumerate(schema.attributes):
            block[alt - 1, a] = _parse_float(rec[attr], row_no, attr)
    flush(row_no="end")
    if not tasks:
        raise DataValidationError("data file has no data rows")

    person_seq = [t[0] for t in tasks]
    task_counts, person_ids = _contiguous_person_blocks(person_seq)
    covariates = _person_covariates_from_rows(cov_rows, task_counts)
    attrs = np.array([t[2] for t in tasks])
    choices = [t[3] for t in tasks]
    return ChoiceDataset(schema, attrs, choices, task_counts, person_ids, covariates)


def _contiguous_person_blocks(person_seq):
    """Group consecutive identical person ids; reject interleaved panels."""
    ids, counts, seen = [], [], set()
    for pid in person_seq:
        if ids and pid == ids[-1]:
            counts[-1] += 1
            continue
        if pid in seen:
            raise DataValidationError(
                f"person {pid!r} appears in non-contiguous blocks"
            )
        seen.add(pid)
        ids.append(pid)
        counts.append(1)
    return np.array(counts, dtype=np.int64), np.array(ids)


def _person_covariates_from_rows(cov_rows, task_counts):
    if not cov_rows:
        return None
    starts = np.concatenate(([0], np.cumsum(task_counts)))
    out = {}
    for name, vals in cov_rows.items():
        vals = np.asarray(vals, dtype=float)
        if len(vals) == len(task_counts):
            per_person = vals  # long layout already collected once per task group
        else:
            per_person = vals[starts[:-1]]
            for n in range(len(task_counts)):
                seg = vals[starts[n]:starts[n + 1]]
                if seg.size and not np.all(seg == seg[0]):
                    raise DataValidationError(
                        f"person covariate {name!r} varies within person block {n}"
                    )
        out[name] = per_person
    return out


def save_dataset(ds: ChoiceDataset, path, delimiter=",") -> None:
    """Write the canonical wide layout; float cells round-trip bit-exactly."""
    schema = ds.schema
    cols = [schema.person_column, schema.choice_column] + schema.wide_columns()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(cols)
        row_person = ds.row_person()
        for r in range(ds.n_rows):
            pid = ds.person_ids[row_person[r]]
            rec = [pid, int(ds.choices[r])]
            for a in range(ds.n_attributes):
                for j in range(ds.n_alternatives):
                    rec.append(repr(float(ds.attrs[r, j, a])))
            writer.writerow(rec)


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthesisDesign:
    """Everything needed to simulate a dataset except the model parameters."""

    schema: DatasetSchema
    n_persons: int
    tasks_per_person: int | Sequence[int]
    attribute_ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def task_counts(self) -> np.ndarray:
        t = self.tasks_per_person
        if np.isscalar(t):
            return np.full(self.n_persons, int(t), dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        if t.shape != (self.n_persons,):
            raise SpecError("tasks_per_person must be scalar or length n_persons")
        return t


def synthesize_dataset(true_params, design: SynthesisDesign, spec, seed: int,
                       ) -> ChoiceDataset:
    """Simulate attributes uniformly and choices from the model's exact
    probabilities at ``true_params``.  Deterministic given ``seed``.

    For latent class models the class of each person is drawn once and held
    fixed across that person's tasks; for mixed logit the person's
    coefficient vector is drawn once from the population distribution.
    """
    from . import models  # deferred: data must not import models at module load

    schema = design.schema
    names = models.parameter_names(spec, schema)
    if tuple(true_params.names) != tuple(names):
        raise SpecError(
            f"true_params names {list(true_params.names)} do not match the "
            f"model's parameters {names}"
        )
    missing = [a for a in schema.attributes if a not in design.attribute_ranges]
    if missing:
        raise SpecError(f"no sampling range declared for attribute(s) {missing}")

    rng = np.random.default_rng(seed)
    task_counts = design.task_counts()
    rows = int(task_counts.sum())
    J, A = schema.n_alternatives, schema.n_attributes

    attrs = np.empty((rows, J, A))
    for a, attr in enumerate(schema.attributes):
        lo, hi = design.attribute_ranges[attr]
        attrs[:, :, a] = rng.uniform(lo, hi, size=(rows, J))

    probs = _choice_probabilities(models, spec, schema, attrs, task_counts,
                                  true_params, rng)
    u = rng.random(rows)
    cum = np.cumsum(probs, axis=1)
    choices = 1 + (u[:, None] > cum).sum(axis=1)
    choices = np.minimum(choices, J)  # guard cum[-1] rounding below 1

    return ChoiceDataset(schema, attrs, choices, task_counts)


def _choice_probabilities(models, spec, schema, attrs, task_counts, pv, rng):
    family = spec.family
    if family == "mnl":
        beta = pv.values
        return models.logit_row_probabilities(attrs, beta)
    if family == "lc":
        coef, delta_free = models.lc_split(pv.values, spec, schema)
        delta = np.append(delta_free, 0.0)
        pi = np.exp(delta - np.max(delta))
        pi /= pi.sum()
        classes = np.searchsorted(np.cumsum(pi), rng.random(len(task_counts)),
                                  side="right")
        classes = np.minimum(classes, spec.n_classes - 1)
        row_class = np.repeat(classes, task_counts)
        probs = np.empty(attrs.shape[:2])
        for c in range(spec.n_classes):
            mask = row_class == c
            if mask.any():
                probs[mask] = models.logit_row_probabilities(attrs[mask], coef[c])
        return probs
    if family == "mmnl_wtp":
        from .draws import cholesky_transform

        mu, L, signs = models.mmnl_split(pv.values, spec, schema)
        z = rng.standard_normal((len(task_counts), len(mu)))
        beta_n = cholesky_transform(mu, L, z, signs)  # (N, D)
        beta_rows = np.repeat(beta_n, task_counts, axis=0)
        cost = models.mmnl_cost_index(spec, schema)
        return models.wtp_row_probabilities(attrs, beta_rows, cost)
    raise SpecError(f"unknown model family {family!r}")


def resample_choices(ds: ChoiceDataset, spec, params, seed: int) -> ChoiceDataset:
    """New dataset with the same attributes and freshly simulated choices."""
    from . import models

    rng = np.random.default_rng(seed)
    probs = _choice_probabilities(models, spec, ds.schema, ds.attrs,
                                  ds.task_counts, params, rng)
    u = rng.random(ds.n_rows)
    cum = np.cumsum(probs, axis=1)
    choices = 1 + (u[:, None] > cum).sum(axis=1)
    choices = np.minimum(choices, ds.n_alternatives)
    return ChoiceDataset(ds.schema, ds.attrs, choices, ds.task_counts,
                         ds.person_ids)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class ReportEntry:
    code: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.message}"


@dataclass
class ValidationReport:
    violations: list[ReportEntry] = field(default_factory=list)
    warnings: list[ReportEntry] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.violations and not self.warnings

    def __str__(self):
        if self.is_clean:
            return "dataset OK"
        lines = [f"violation: {e}" for e in self.violations]
        lines += [f"warning: {e}" for e in self.warnings]
        return "\n".join(lines)


def validate_panel(ds: ChoiceDataset) -> ValidationReport:
    """Report-only check of panel invariants plus a separation scan.

    The separation scan flags any attribute whose within-task ordering
    perfectly predicts the choice (chosen alternative always strictly
    smallest, or always strictly largest).  Such patterns let a coefficient
    drift to +/- infinity, so they are surfaced as warnings.
    """
    report = ValidationReport()
    J = ds.n_alternatives

    zero = np.flatnonzero(ds.task_counts < 1)
    for n in zero:
        report.violations.append(ReportEntry(
            "empty-person", f"person {ds.person_ids[n]!r} has no tasks"))

    bad = np.flatnonzero((ds.choices < 1) | (ds.choices > J))
    for r in bad[:20]:
        report.violations.append(ReportEntry(
            "choice-range", f"choice {ds.choices[r]} out of 1..{J} at row {r}"))

    if not np.isfinite(ds.attrs).all():
        r, j, a = np.argwhere(~np.isfinite(ds.attrs))[0]
        report.violations.append(ReportEntry(
            "non-finite", f"non-finite attribute {ds.schema.attributes[a]!r} "
                          f"at row {r}, alternative {j + 1}"))

    rows = np.arange(ds.n_rows)
    chosen_ok = (ds.choices >= 1) & (ds.choices <= J)
    if chosen_ok.all() and ds.n_rows:
        y0 = ds.choices - 1
        for a, attr in enumerate(ds.schema.attributes):
            vals = ds.attrs[:, :, a]
            chosen_val = vals[rows, y0]
            others = np.ones_like(vals, dtype=bool)
            others[rows, y0] = False
            other_vals = vals[others].reshape(ds.n_rows, J - 1)
            strictly_min = (chosen_val[:, None] < other_vals).all(axis=1)
            strictly_max = (chosen_val[:, None] > other_vals).all(axis=1)
            informative = ~np.isclose(other_vals, chosen_val[:, None]).all(axis=1)
            if informative.any():
                if strictly_min[informative].all():
                    report.warnings.append(ReportEntry(
                        "separation",
                        f"attribute {attr!r}: chosen alternative always has the "
                        f"strictly smallest value (perfect-separation candidate)"))
                elif strictly_max[informative].all():
                    report.warnings.append(ReportEntry(
                        "separation",
                        f"attribute {attr!r}: chosen alternative always has the "
                        f"strictly largest value (perfect-separation candidate)"))
    return report
