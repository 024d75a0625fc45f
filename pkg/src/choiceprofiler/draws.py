"""Quasi-random draws: Sobol sequences mapped to correlated lognormal
coefficient draws for simulated likelihoods.

The Sobol generator embeds the Joe-Kuo (2008) primitive polynomials and
initial direction numbers for the first 24 dimensions, which is ample for
the models in this package.  Points are emitted in Gray-code order, the
same ordering used by the standard generators, so golden values like the
dimension-1 prefix (0.5, 0.75, 0.25) hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .exceptions import ConfigError, SpecError

# Joe-Kuo "new-joe-kuo-6" table, dimensions 2..24: (degree s, coefficient a,
# initial direction integers m_1..m_s).  Dimension 1 uses m_k = 1 for all k.
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)),
    (6, 22, (1, 3, 1, 15, 13, 25)),
    (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)),
    (7, 4, (1, 3, 7, 13, 13, 15, 69)),
    (7, 7, (1, 1, 3, 13, 7, 35, 63)),
    (7, 8, (1, 3, 5, 9, 1, 25, 53)),
    (7, 14, (1, 3, 1, 13, 9, 35, 107)),
)

MAX_DIMENSIONS = 1 + len(_JOE_KUO)
_NBITS = 52  # fixed-point resolution; 52 bits stay exact in a float64


def _direction_integers(dim: int) -> np.ndarray:
    """v[k] for one dimension, scaled so point = XOR(v[k]) / 2**_NBITS."""
    m = np.empty(_NBITS, dtype=np.uint64)
    if dim == 1:
        m[:] = 1
    else:
        s, a, m_init = _JOE_KUO[dim - 2]
        m[:s] = m_init
        for k in range(s, _NBITS):
            val = m[k - s] ^ (m[k - s] << np.uint64(s))
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    val ^= m[k - i] << np.uint64(i)
            m[k] = val
    k = np.arange(1, _NBITS + 1, dtype=np.uint64)
    return m << (np.uint64(_NBITS) - k)


def sobol_sequence(count: int, dim: int, skip: int = 1,
                   shift_seed: int | None = None) -> np.ndarray:
    """First ``count`` Sobol points in [0,1)^dim after skipping ``skip``.

    ``skip`` defaults to 1 so the all-zeros point is never emitted.  An
    optional random digital shift (XOR of a fixed random bit pattern per
    dimension) is applied when ``shift_seed`` is given.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    if not 1 <= dim <= MAX_DIMENSIONS:
        raise ConfigError(
            f"dimension {dim} outside the direction-number table (1..{MAX_DIMENSIONS})"
        )
    if skip < 0:
        raise ConfigError("skip must be >= 0")

    v = np.stack([_direction_integers(d) for d in range(1, dim + 1)])  # (dim, 52)
    idx = np.arange(skip, skip + count, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    acc = np.zeros((count, dim), dtype=np.uint64)
    bits = int(gray.max()).bit_length() if count else 0
    for b in range(bits):
        mask = (gray >> np.uint64(b)) & np.uint64(1)
        acc ^= mask[:, None] * v[None, :, b]
    if shift_seed is not None:
        rng = np.random.default_rng(shift_seed)
        shift = rng.integers(0, 1 << _NBITS, size=dim, dtype=np.uint64)
        acc ^= shift[None, :]
    return acc.astype(np.float64) / float(1 << _NBITS)


# ---------------------------------------------------------------------------
# inverse standard-normal CDF
# ---------------------------------------------------------------------------

# Acklam's rational approximation, refined below by one Halley step.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def inv_normal_cdf(u):
    """Standard normal quantile, accurate to well below 1e-9 on (0, 1).

    Accepts scalars or arrays; raises for arguments outside (0, 1).
    """
    scalar = np.isscalar(u)
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("inv_normal_cdf requires 0 < u < 1")

    x = np.empty_like(u)
    lo = u < _P_LOW
    hi = u > 1.0 - _P_LOW
    mid = ~(lo | hi)

    if np.any(mid):
        q = u[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num * q / den
    for sel, tail_u, sign in ((lo, u[lo], -1.0), (hi, 1.0 - u[hi], 1.0)):
        if np.any(sel):
            q = np.sqrt(-2.0 * np.log(tail_u))
            num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
            den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
            x[sel] = -sign * num / den

    # one Halley refinement against the (machine-accurate) complementary erf;
    # the residual Phi(x) - u is formed on whichever side avoids cancellation
    e = np.where(u >= 0.5,
                 (1.0 - u) - 0.5 * erfc(x / np.sqrt(2.0)),
                 0.5 * erfc(-x / np.sqrt(2.0)) - u)
    t = e * np.sqrt(2.0 * np.pi) * np.exp(x * x / 2.0)
    x = x - t / (1.0 + x * t / 2.0)
    return float(x) if scalar else x


# ---------------------------------------------------------------------------
# person-level draw matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SobolConfig:
    """Configuration of the per-person quasi-random draws."""

    draws: int
    dims: int
    skip: int = 1
    antithetic: bool = False
    shift_seed: int | None = None

    def __post_init__(self):
        if self.draws < 1:
            raise ConfigError("draws must be >= 1")
        if not 1 <= self.dims <= MAX_DIMENSIONS:
            raise ConfigError(f"dims must be in 1..{MAX_DIMENSIONS}")
        if self.skip < 1:
            raise ConfigError("skip must be >= 1 (u=0 has no normal quantile)")
        if self.antithetic and self.draws % (1 << self.dims):
            raise ConfigError(
                f"antithetic draws need draws divisible by 2^dims = {1 << self.dims}"
            )

    def provenance(self) -> dict:
        return {
            "sequence": "sobol-joe-kuo",
            "draws": self.draws,
            "dims": self.dims,
            "skip": self.skip,
            "antithetic": self.antithetic,
            "shift_seed": self.shift_seed,
        }


@dataclass(frozen=True)
class DrawMatrix:
    """Standard-normal draws z with shape (persons, draws, dims)."""

    z: np.ndarray
    config: SobolConfig

    def __post_init__(self):
        self.z.flags.writeable = False

    @property
    def n_persons(self) -> int:
        return self.z.shape[0]

    @property
    def n_draws(self) -> int:
        return self.z.shape[1]

    @property
    def n_dims(self) -> int:
        return self.z.shape[2]


def build_person_draws(cfg: SobolConfig, n_persons: int) -> DrawMatrix:
    """One Sobol block of N*R points, partitioned by person in sequence
    order and mapped through the inverse normal CDF.

    With ``antithetic`` enabled, each base point is expanded into the full
    set of per-coordinate reflections u -> 1-u, making every person's draw
    set closed under sign flips of any single coordinate.
    """
    if n_persons < 1:
        raise ConfigError("need at least one person")
    R, D = cfg.draws, cfg.dims
    if cfg.antithetic:
        n_base = n_persons * R // (1 << D)
        base = sobol_sequence(n_base, D, cfg.skip, cfg.shift_seed)
        combos = np.arange(1 << D)
        flip = ((combos[:, None] >> np.arange(D)[None, :]) & 1).astype(bool)
        u = np.where(flip[None, :, :], 1.0 - base[:, None, :], base[:, None, :])
        u = u.reshape(n_base * (1 << D), D)
    else:
        u = sobol_sequence(n_persons * R, D, cfg.skip, cfg.shift_seed)
    z = inv_normal_cdf(u).reshape(n_persons, R, D)
    return DrawMatrix(np.ascontiguousarray(z), cfg)


def cholesky_transform(mu, L, z, signs):
    """Coefficient draws beta_d = sign_d * exp(mu_d + (L z)_d).

    ``z`` may have any leading shape ending in the random dimension; ``L``
    is a full lower-triangular matrix (no positivity constraint on the
    diagonal).
    """
    mu = np.asarray(mu, dtype=float)
    L = np.asarray(L, dtype=float)
    z = np.asarray(z, dtype=float)
    signs = np.asarray(signs, dtype=float)
    D = mu.shape[0]
    if L.shape != (D, D):
        raise SpecError(f"L must be ({D}, {D}); got {L.shape}")
    if z.shape[-1] != D or signs.shape != (D,):
        raise SpecError("draw/parameter dimension mismatch")
    a = mu + z @ L.T
    return signs * np.exp(a)
