"""Model families: likelihoods, per-person contributions and analytic
gradients for MNL, latent class, and WTP-space mixed logit.

Parameter packing conventions (these orders drive every report and
profile plot, so they are fixed here once):

* MNL: one coefficient per attribute, named ``b_<attr>``, in schema order.
* LC: attribute-major class coefficients ``b_<attr>_<class>`` (all classes
  of the first attribute, then the next attribute, ...), followed by the
  free class-allocation constants ``delta_1..delta_{C-1}``; the last
  class's constant is normalised to zero.
* MMNL (WTP space): every attribute's coefficient is random lognormal.
  The coefficient on the cost attribute is the (negative) scale; all other
  coefficients are the willingness-to-pay values, multiplied by the cost
  coefficient inside the utility.  For each random dimension in schema
  order, the location parameter ``mu_<attr>`` is followed by that row of
  the Cholesky factor (``chol_<attr>_<col>`` for col up to the diagonal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import EvaluationError, SpecError
from .params import ParameterVector

FAMILIES = ("mnl", "lc", "mmnl_wtp")


@dataclass(frozen=True)
class ModelSpec:
    """Which family to estimate and its structural settings."""

    family: str
    n_classes: int = 2
    cost_attribute: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown model family {self.family!r}; "
                            f"expected one of {FAMILIES}")
        if self.family == "lc" and self.n_classes < 2:
            raise SpecError("latent class models need n_classes >= 2")
        if self.family == "mmnl_wtp" and not self.cost_attribute:
            raise SpecError("mmnl_wtp needs a cost_attribute")

    def to_jsonable(self) -> dict:
        return {"family": self.family, "n_classes": self.n_classes,
                "cost_attribute": self.cost_attribute}

    @classmethod
    def from_jsonable(cls, d) -> "ModelSpec":
        return cls(family=d["family"], n_classes=int(d.get("n_classes", 2)),
                   cost_attribute=d.get("cost_attribute"))


# ---------------------------------------------------------------------------
# parameter layout helpers
# ---------------------------------------------------------------------------


def parameter_names(spec: ModelSpec, schema) -> tuple[str, ...]:
    attrs = schema.attributes
    if spec.family == "mnl":
        return tuple(f"b_{a}" for a in attrs)
    if spec.family == "lc":
        C = spec.n_classes
        coef = [f"b_{a}_{c}" for a in attrs for c in range(1, C + 1)]
        deltas = [f"delta_{c}" for c in range(1, C)]
        return tuple(coef + deltas)
    if spec.family == "mmnl_wtp":
        if spec.cost_attribute not in attrs:
            raise SpecError(
                f"cost attribute {spec.cost_attribute!r} not among {list(attrs)}"
            )
        names = []
        for d, a in enumerate(attrs):
            names.append(f"mu_{a}")
            names.extend(f"chol_{a}_{attrs[j]}" for j in range(d + 1))
        return tuple(names)
    raise SpecError(f"unknown family {spec.family!r}")


def n_parameters(spec: ModelSpec, schema) -> int:
    return len(parameter_names(spec, schema))


def lc_split(values, spec: ModelSpec, schema):
    """Unpack LC parameters into ((C, A) coefficients, free deltas)."""
    A, C = schema.n_attributes, spec.n_classes
    values = np.asarray(values, dtype=float)
    if values.shape != (A * C + C - 1,):
        raise SpecError(
            f"latent class with {C} classes and {A} attributes needs "
            f"{A * C + C - 1} parameters, got {values.shape[0]}"
        )
    coef = values[:A * C].reshape(A, C).T.copy()   # attribute-major packing
    delta_free = values[A * C:].copy()
    return coef, delta_free


def lc_pack(coef, delta_free, spec: ModelSpec, schema):
    A, C = schema.n_attributes, spec.n_classes
    out = np.empty(A * C + C - 1)
    out[:A * C] = np.asarray(coef).T.reshape(A * C)
    out[A * C:] = delta_free
    return out


def lc_class_shares(delta_free) -> np.ndarray:
    delta = np.append(np.asarray(delta_free, dtype=float), 0.0)
    dmax = delta.max()
    pi = np.exp(delta - dmax)
    return pi / pi.sum()


def mmnl_cost_index(spec: ModelSpec, schema) -> int:
    try:
        return schema.attributes.index(spec.cost_attribute)
    except ValueError:
        raise SpecError(
            f"cost attribute {spec.cost_attribute!r} not among "
            f"{list(schema.attributes)}"
        ) from None


def mmnl_signs(spec: ModelSpec, schema) -> np.ndarray:
    """+1 for positive-lognormal value coefficients, -1 for the cost scale."""
    signs = np.ones(schema.n_attributes)
    signs[mmnl_cost_index(spec, schema)] = -1.0
    return signs


def mmnl_split(values, spec: ModelSpec, schema):
    """Unpack MMNL parameters into (mu, lower-triangular L, signs)."""
    D = schema.n_attributes
    K = D + D * (D + 1) // 2
    values = np.asarray(values, dtype=float)
    if values.shape != (K,):
        raise SpecError(
            f"mmnl_wtp with {D} random coefficients needs {K} parameters "
            f"({D} means + {D * (D + 1) // 2} Cholesky entries), got {values.shape[0]}"
        )
    mu = np.empty(D)
    L = np.zeros((D, D))
    pos = 0
    for d in range(D):
        mu[d] = values[pos]
        pos += 1
        L[d, :d + 1] = values[pos:pos + d + 1]
        pos += d + 1
    return mu, L, mmnl_signs(spec, schema)


def mmnl_pack(mu, L, spec: ModelSpec, schema):
    D = schema.n_attributes
    out = []
    for d in range(D):
        out.append(mu[d])
        out.extend(L[d, :d + 1])
    return np.asarray(out)


# ---------------------------------------------------------------------------
# row-level probability helpers (used by synthesis and reporting)
# ---------------------------------------------------------------------------


def logit_row_probabilities(attrs, beta) -> np.ndarray:
    """Softmax choice probabilities per row; rows sum to one."""
    v = np.asarray(attrs) @ np.asarray(beta, dtype=float)
    if not np.isfinite(v).all():
        row = int(np.argwhere(~np.isfinite(v).all(axis=1))[0])
        raise EvaluationError(f"non-finite utility at row {row}")
    vmax = v.max(axis=1, keepdims=True)
    ex = np.exp(v - vmax)
    return ex / ex.sum(axis=1, keepdims=True)


def wtp_row_probabilities(attrs, beta_rows, cost_idx) -> np.ndarray:
    """Choice probabilities with per-row coefficient vectors in WTP space."""
    attrs = np.asarray(attrs)
    beta_rows = np.asarray(beta_rows, dtype=float)
    D = attrs.shape[2]
    val = [d for d in range(D) if d != cost_idx]
    inner = attrs[:, :, cost_idx] + np.einsum(
        "rjd,rd->rj", attrs[:, :, val], beta_rows[:, val])
    v = beta_rows[:, cost_idx][:, None] * inner
    vmax = v.max(axis=1, keepdims=True)
    ex = np.exp(v - vmax)
    return ex / ex.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# likelihood evaluation
# ---------------------------------------------------------------------------


@dataclass
class LikelihoodEvaluation:
    """Total log-likelihood plus per-person pieces and score rows."""

    total: float
    per_person: np.ndarray
    gradient: np.ndarray | None = None
    scores: np.ndarray | None = None


class LikelihoodFunction:
    """Binds a dataset, model spec and (for MMNL) a draw matrix into a
    pure function of the packed parameter vector.

    Evaluation is stateless and safe to call concurrently over the shared
    immutable inputs; per-person terms are reduced in person order.
    """

    def __init__(self, ds, spec: ModelSpec, draws=None):
        self.ds = ds
        self.spec = spec
        self.draws = draws
        self.names = parameter_names(spec, ds.schema)
        self.k = len(self.names)
        if (ds.task_counts < 1).any():
            raise SpecError("estimation requires every person to have >= 1 task")
        if spec.family == "mmnl_wtp":
            if draws is None:
                raise SpecError("mmnl_wtp needs a DrawMatrix")
            D = ds.n_attributes
            if draws.n_dims != D or draws.n_persons != ds.n_persons:
                raise SpecError(
                    f"draws dimensioned ({draws.n_persons}, {draws.n_draws}, "
                    f"{draws.n_dims}) do not match persons={ds.n_persons}, "
                    f"random dims={D}"
                )
        self._choices0 = np.ascontiguousarray(ds.choices - 1, dtype=np.int64)

    def start_vector(self, values=None) -> ParameterVector:
        if values is None:
            values = np.zeros(self.k)
        return ParameterVector(self.names, values)

    def evaluate(self, values, need_grad: bool = True) -> LikelihoodEvaluation:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.k,):
            raise SpecError(f"expected {self.k} parameters, got {values.shape}")
        ds, spec = self.ds, self.spec
        if spec.family == "mnl":
            ll_n, scores = kernels.mnl_panel(
                ds.attrs, self._choices0, ds.person_starts, values, need_grad)
        elif spec.family == "lc":
            coef, delta_free = lc_split(values, spec, ds.schema)
            delta = np.append(delta_free, 0.0)
            ll_n, scores = kernels.lc_panel(
                ds.attrs, self._choices0, ds.person_starts, coef, delta, need_grad)
        else:
            mu, L, signs = mmnl_split(values, spec, ds.schema)
            ll_n, scores = kernels.mmnl_panel(
                ds.attrs, self._choices0, ds.person_starts,
                mmnl_cost_index(spec, ds.schema), mu, L, signs,
                self.draws.z, need_grad)
        total = float(ll_n.sum())
        gradient = scores.sum(axis=0) if scores is not None else None
        return LikelihoodEvaluation(total, ll_n, gradient, scores)


def total_loglikelihood(evaluation: LikelihoodEvaluation, free_mask=None):
    """Assemble (LL, gradient over free parameters) from per-person pieces.

    Fixed entries contribute no gradient component.
    """
    per_person = evaluation.per_person
    if not np.isfinite(per_person).all():
        n = int(np.argwhere(~np.isfinite(per_person))[0])
        raise EvaluationError(f"non-finite log-likelihood for person {n}")
    total = float(per_person.sum())
    grad = None
    if evaluation.scores is not None:
        grad = evaluation.scores.sum(axis=0)
        if free_mask is not None:
            grad = grad[np.asarray(free_mask, dtype=bool)]
    return total, grad


# -- spec-level operation wrappers ------------------------------------------


def mnl_probabilities(ds, pv: ParameterVector) -> np.ndarray:
    """Choice probability per (person, task) row for the MNL model."""
    A = ds.n_attributes
    if len(pv) != A:
        raise SpecError(f"MNL needs {A} coefficients (one per attribute), "
                        f"got {len(pv)}")
    probs = logit_row_probabilities(ds.attrs, pv.values)
    return probs


def lc_person_likelihood(ds, pv: ParameterVector, spec: ModelSpec
                         ) -> LikelihoodEvaluation:
    return LikelihoodFunction(ds, spec).evaluate(pv.values)


def mmnl_simulated_likelihood(ds, pv: ParameterVector, spec: ModelSpec,
                              draws) -> LikelihoodEvaluation:
    return LikelihoodFunction(ds, spec, draws).evaluate(pv.values)
