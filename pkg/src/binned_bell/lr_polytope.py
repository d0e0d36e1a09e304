"""Local-realistic analysis of binned Bell inequalities for d-outcome measurements.

A subset R of the outcome set {0, ..., d-1} defines the binning function
zeta_R(k) = +1 if k in R else -1.  Four subsets (R1, R2 for the first party,
S1, S2 for the second) fix a coefficient tensor

    eps_ab(k, l) = zeta_{R_a}(k) * zeta_{S_b}(l),   (a, b) != (2, 2),
    eps_22(k, l) = -zeta_{R_2}(k) * zeta_{S_2}(l),

and the Bell sum B = sum_ab sum_kl eps_ab(k, l) P_ab(k, l).  Local-realistic
models assign deterministic outcomes (k1, k2, l1, l2) to the four settings,
so the LR bound is the maximum of

    eps_11(k1, l1) + eps_12(k1, l2) + eps_21(k2, l1) + eps_22(k2, l2)

over all d^4 assignments.  For the product form above this value is
x*y1 + x*y2 + xt*y1 - xt*y2 with x, xt, y1, y2 in {-1, +1}, hence always ±2.

Tightness of B <= 2 on the LR polytope is certified by counting maximizing
assignments (the count has the closed form m_formula) against the facet
threshold 4d(d-1), and by exact integer ranks of the maximizers' extremal
0/1 vectors.  Rank computations never touch floating point.
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass
from math import gcd
from typing import Iterable, Iterator

import numpy as np

DEFAULT_ENUMERATION_LIMIT = 32

# int64 products in row elimination stay below this before the arbitrary
# precision fallback kicks in.
_INT64_SAFE = 2**62
_NORMALISE_ABOVE = 2**20


class EnumerationLimitError(ValueError):
    """A d^4 enumeration was refused because d exceeds the configured limit."""


def _check_limit(d: int, limit: int) -> None:
    if d > limit:
        raise EnumerationLimitError(
            f"d={d} exceeds the enumeration limit {limit} (d^4 = {d**4} "
            f"deterministic assignments); pass a larger limit to proceed"
        )


def _as_index(value, what: str) -> int:
    try:
        return operator.index(value)
    except TypeError:
        raise ValueError(f"{what} must be an integer, got {value!r}") from None


def _validate_subset(name: str, subset: Iterable[int], d: int) -> tuple[int, ...]:
    seen: list[int] = []
    for k in subset:
        kk = _as_index(k, f"{name} entry")
        if not 0 <= kk < d:
            raise ValueError(f"{name} contains outcome {kk}, outside 0..{d - 1}")
        if kk in seen:
            raise ValueError(f"{name} lists outcome {kk} more than once")
        seen.append(kk)
    if len(seen) == d:
        raise ValueError(
            f"{name} is the full outcome set for d={d}; the binning would be "
            f"constant (subset sizes must be at most d-1)"
        )
    return tuple(sorted(seen))


@dataclass(frozen=True)
class BinningSpec:
    """Dimension d plus the four binning subsets (R1, R2, S1, S2).

    Subsets are stored sorted and deduplicated.  Sizes range over
    0 <= |subset| <= d-1; the full outcome set is rejected because it makes
    the corresponding binning function constant.
    """

    d: int
    r1: tuple[int, ...]
    r2: tuple[int, ...]
    s1: tuple[int, ...]
    s2: tuple[int, ...]

    def __post_init__(self) -> None:
        d = _as_index(self.d, "d")
        if d < 2:
            raise ValueError(f"d must be at least 2, got {d}")
        object.__setattr__(self, "d", d)
        for name in ("r1", "r2", "s1", "s2"):
            object.__setattr__(self, name, _validate_subset(name, getattr(self, name), d))

    @property
    def subset_sizes(self) -> tuple[int, int, int, int]:
        """(n1, n2, m1, m2) = sizes of (r1, r2, s1, s2)."""
        return (len(self.r1), len(self.r2), len(self.s1), len(self.s2))


def zeta(subset: Iterable[int], d: int) -> np.ndarray:
    """±1 binning vector: +1 on the subset, -1 elsewhere."""
    z = -np.ones(d, dtype=np.int8)
    z[list(subset)] = 1
    return z


@dataclass(frozen=True)
class CoefficientTensor:
    """Bell coefficients eps[a-1, b-1, k, l] with every entry exactly ±1."""

    d: int
    eps: np.ndarray

    def __post_init__(self) -> None:
        eps = np.asarray(self.eps)
        if eps.shape != (2, 2, self.d, self.d):
            raise ValueError(
                f"eps must have shape (2, 2, {self.d}, {self.d}), got {eps.shape}"
            )
        if not np.all(np.abs(eps) == 1):
            raise ValueError("every coefficient must be exactly +1 or -1")
        eps = eps.astype(np.int8)
        eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)

    def value(self, a: int, b: int, k: int, l: int) -> int:
        if a not in (1, 2) or b not in (1, 2):
            raise ValueError(f"settings a, b must be 1 or 2, got a={a}, b={b}")
        if not (0 <= k < self.d and 0 <= l < self.d):
            raise ValueError(f"outcomes k={k}, l={l} outside 0..{self.d - 1}")
        return int(self.eps[a - 1, b - 1, k, l])


def build_coefficients(spec: BinningSpec) -> CoefficientTensor:
    """Product-form coefficient tensor with the sign of the (2,2) block flipped."""
    za1 = zeta(spec.r1, spec.d)
    za2 = zeta(spec.r2, spec.d)
    zb1 = zeta(spec.s1, spec.d)
    zb2 = zeta(spec.s2, spec.d)
    eps = np.empty((2, 2, spec.d, spec.d), dtype=np.int8)
    eps[0, 0] = np.outer(za1, zb1)
    eps[0, 1] = np.outer(za1, zb2)
    eps[1, 0] = np.outer(za2, zb1)
    eps[1, 1] = -np.outer(za2, zb2)
    return CoefficientTensor(spec.d, eps)


@dataclass(frozen=True)
class DeterministicConfig:
    """Deterministic outcome assignment (k1, k2) for party A, (l1, l2) for B."""

    k1: int
    k2: int
    l1: int
    l2: int

    def __post_init__(self) -> None:
        for name in ("k1", "k2", "l1", "l2"):
            object.__setattr__(self, name, _as_index(getattr(self, name), name))


def deterministic_value(coeffs: CoefficientTensor, config: DeterministicConfig) -> float:
    """Bell sum of a single deterministic assignment; ±2 for product-form tensors."""
    d = coeffs.d
    for name in ("k1", "k2", "l1", "l2"):
        v = getattr(config, name)
        if not 0 <= v < d:
            raise ValueError(f"{name}={v} outside 0..{d - 1}")
    e = coeffs.eps
    return float(
        int(e[0, 0, config.k1, config.l1])
        + int(e[0, 1, config.k1, config.l2])
        + int(e[1, 0, config.k2, config.l1])
        + int(e[1, 1, config.k2, config.l2])
    )


def _all_values(coeffs: CoefficientTensor) -> np.ndarray:
    """All d^4 deterministic values, indexed [k1, k2, l1, l2]."""
    e = coeffs.eps.astype(np.int16)
    return (
        e[0, 0][:, None, :, None]
        + e[0, 1][:, None, None, :]
        + e[1, 0][None, :, :, None]
        + e[1, 1][None, :, None, :]
    )


def lr_max(coeffs: CoefficientTensor, *, limit: int = DEFAULT_ENUMERATION_LIMIT) -> float:
    """Exact LR bound: maximum deterministic value over all d^4 assignments."""
    _check_limit(coeffs.d, limit)
    return float(_all_values(coeffs).max())


def count_max_configs(
    coeffs: CoefficientTensor, *, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> int:
    """Number of deterministic assignments attaining lr_max (exact count)."""
    _check_limit(coeffs.d, limit)
    values = _all_values(coeffs)
    return int((values == values.max()).sum())


def m_formula(spec: BinningSpec) -> int:
    """Closed-form count of LR maximizers, d^2 (d^2 - d(n1+m1) + n1(m1+m2) + n2(m1-m2))."""
    d = spec.d
    n1, n2, m1, m2 = spec.subset_sizes
    return d * d * (d * d - d * (n1 + m1) + n1 * (m1 + m2) + n2 * (m1 - m2))


def facet_threshold(d: int) -> int:
    """Minimum number of independent extremal vectors a facet needs, 4d(d-1)."""
    return 4 * d * (d - 1)


@dataclass(frozen=True)
class ExtremalVector:
    """0/1 vector of a deterministic assignment in the 4d^2 probability layout.

    Blocks are ordered (a, b) = (1,1), (1,2), (2,1), (2,2); block (a, b)
    carries a single 1 at index k_a * d + l_b.
    """

    d: int
    components: np.ndarray

    def __post_init__(self) -> None:
        comp = np.asarray(self.components, dtype=np.int64)
        if comp.shape != (4 * self.d * self.d,):
            raise ValueError(
                f"components must have length {4 * self.d * self.d}, got {comp.shape}"
            )
        blocks = comp.reshape(4, self.d * self.d)
        if not (np.all((comp == 0) | (comp == 1)) and np.all(blocks.sum(axis=1) == 1)):
            raise ValueError("each d^2 block must contain exactly one 1")
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)

    @classmethod
    def from_config(cls, d: int, config: DeterministicConfig) -> "ExtremalVector":
        return cls(d, _extremal_components(d, config.k1, config.k2, config.l1, config.l2))


def _extremal_components(d: int, k1: int, k2: int, l1: int, l2: int) -> np.ndarray:
    g = np.zeros(4 * d * d, dtype=np.int64)
    dd = d * d
    g[0 * dd + k1 * d + l1] = 1
    g[1 * dd + k1 * d + l2] = 1
    g[2 * dd + k2 * d + l1] = 1
    g[3 * dd + k2 * d + l2] = 1
    return g


def _gcd_normalise(row: np.ndarray) -> np.ndarray:
    """Divide a row by the gcd of its entries (sign-preserving)."""
    if row.dtype == object:
        g = 0
        for v in row:
            g = gcd(g, abs(int(v)))
            if g == 1:
                break
        if g > 1:
            row = row // g
        if max(abs(int(v)) for v in row) < _INT64_SAFE:
            row = row.astype(np.int64)
        return row
    g = int(np.gcd.reduce(np.abs(row)))
    if g > 1:
        row = row // g
    return row


def _combine(ca: int, row: np.ndarray, cb: int, piv: np.ndarray) -> np.ndarray:
    """Exact integer row combination ca*row - cb*piv, overflow-safe."""
    ca, cb = int(ca), int(cb)
    if row.dtype == object or piv.dtype == object:
        return row.astype(object) * ca - piv.astype(object) * cb
    bound = abs(ca) * int(np.abs(row).max(initial=0)) + abs(cb) * int(
        np.abs(piv).max(initial=0)
    )
    if bound >= _INT64_SAFE:
        return row.astype(object) * ca - piv.astype(object) * cb
    return ca * row - cb * piv


class ExactIntegerRank:
    """Streaming exact rank of integer rows, no floating point anywhere.

    Rows are reduced against stored pivot rows by cross-multiplied integer
    combinations (fraction-free elimination); rows are rescaled by their gcd
    to bound growth and arithmetic falls back to arbitrary precision if a
    combination could overflow int64.  Feeding rows in a fixed order makes
    the reduction deterministic.
    """

    def __init__(self, ncols: int):
        self.ncols = ncols
        self._pivots: dict[int, np.ndarray] = {}

    @property
    def rank(self) -> int:
        return len(self._pivots)

    def add(self, row: np.ndarray) -> bool:
        """Reduce a row into the basis; True if it increased the rank."""
        row = np.asarray(row)
        if row.shape != (self.ncols,):
            raise ValueError(f"row must have length {self.ncols}")
        if row.dtype == object:
            values = [operator.index(v) for v in row]
            if max((abs(v) for v in values), default=0) < _INT64_SAFE:
                row = np.array(values, dtype=np.int64)
            else:
                row = np.array(values, dtype=object)
        elif np.issubdtype(row.dtype, np.integer):
            row = np.array(row, dtype=np.int64, copy=True)
        else:
            raise ValueError("rank rows must be integer-valued")
        while True:
            nz = np.flatnonzero(row)
            if nz.size == 0:
                return False
            lead = int(nz[0])
            piv = self._pivots.get(lead)
            if piv is None:
                self._pivots[lead] = _gcd_normalise(row)
                return True
            row = _combine(piv[lead], row, row[lead], piv)
            if row.dtype == object or np.abs(row).max(initial=0) > _NORMALISE_ABOVE:
                row = _gcd_normalise(row)


def exact_rank(rows: Iterable[np.ndarray], ncols: int) -> int:
    """Exact integer rank of an iterable of rows."""
    elim = ExactIntegerRank(ncols)
    for row in rows:
        if elim.rank == ncols:
            break
        elim.add(row)
    return elim.rank


@dataclass(frozen=True)
class TightnessReport:
    """Certificate data for one binned inequality."""

    lr_max: float
    m_counted: int
    m_formula: int
    threshold: int
    linear_rank: int
    affine_rank: int
    is_tight_by_count: bool

    def to_dict(self) -> dict:
        return {
            "lr_max": self.lr_max,
            "m_counted": self.m_counted,
            "m_formula": self.m_formula,
            "threshold": self.threshold,
            "linear_rank": self.linear_rank,
            "affine_rank": self.affine_rank,
            "is_tight_by_count": self.is_tight_by_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def _max_config_array(coeffs: CoefficientTensor) -> np.ndarray:
    """Maximizing assignments as an (M, 4) array of (k1, k2, l1, l2), lexicographic."""
    values = _all_values(coeffs)
    return np.argwhere(values == values.max())


def iter_max_configs(
    coeffs: CoefficientTensor, *, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> Iterator[DeterministicConfig]:
    """Maximizing deterministic assignments in lexicographic order."""
    _check_limit(coeffs.d, limit)
    for k1, k2, l1, l2 in _max_config_array(coeffs):
        yield DeterministicConfig(int(k1), int(k2), int(l1), int(l2))


def tightness_certificate(
    spec: BinningSpec, *, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> TightnessReport:
    """Enumerate LR maximizers and certify tightness of the binned inequality.

    The maximizers are streamed into two exact integer eliminations (one for
    linear rank, one for ranks of differences from the first maximizer, which
    gives the affine rank as rank + 1) with early exit at full rank 4d^2.
    is_tight_by_count compares the exact count against the facet threshold
    4d(d-1); the ranks are reported alongside for independent scrutiny.
    """
    _check_limit(spec.d, limit)
    d = spec.d
    coeffs = build_coefficients(spec)
    values = _all_values(coeffs)
    vmax = int(values.max())
    configs = np.argwhere(values == vmax)
    m_counted = int(configs.shape[0])

    ncols = 4 * d * d
    linear = ExactIntegerRank(ncols)
    affine = ExactIntegerRank(ncols)
    first: np.ndarray | None = None
    for k1, k2, l1, l2 in configs:
        g = _extremal_components(d, int(k1), int(k2), int(l1), int(l2))
        if first is None:
            first = g
        elif affine.rank < ncols:
            affine.add(g - first)
        if linear.rank < ncols:
            linear.add(g)
        if linear.rank == ncols and affine.rank == ncols:
            break

    affine_rank = affine.rank + 1 if m_counted > 0 else 0
    threshold = facet_threshold(d)
    return TightnessReport(
        lr_max=float(vmax),
        m_counted=m_counted,
        m_formula=m_formula(spec),
        threshold=threshold,
        linear_rank=linear.rank,
        affine_rank=affine_rank,
        is_tight_by_count=m_counted >= threshold,
    )
