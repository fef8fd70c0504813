"""Stochastic-matrix calculus for the gossip update law.

Two carriers live here:

* float64 matrices, fine for spectra and Monte Carlo summaries;
* exact dyadic matrices (integer numerators over a shared power-of-two
  denominator), needed wherever a claim is about exact equality - finite-time
  consensus, average preservation, and the 2^-N entry floor cannot be
  certified in floating point.

Products are written newest-on-the-left: a chain given in time order
[m1, m2, ..., mk] multiplies out to mk @ ... @ m1, mirroring the recursion
x(k+1) = W(k) x(k).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DyadicOverflowError, ExactnessWarning

DYADIC_EXP_CAP = 4096
FLOAT_EQ_TOL = 1e-12


def _trailing_zeros(x: int) -> int:
    return (x & -x).bit_length() - 1


def dyadic_reduce(nums, exp):
    """Strip common factors of two so the exponent is minimal."""
    acc = 0
    for row in nums:
        for v in row:
            acc |= v
    if acc == 0:
        return nums, 0
    shift = min(_trailing_zeros(acc), exp)
    if shift == 0:
        return nums, exp
    return [[v >> shift for v in row] for row in nums], exp - shift


class StochasticMatrix:
    """Square row-stochastic matrix in float64 or exact dyadic form."""

    def __init__(self, *, floats=None, nums=None, exp=None, validate=True):
        if floats is not None:
            f = np.array(floats, dtype=float)
            if f.ndim != 2 or f.shape[0] != f.shape[1]:
                raise ValueError(f"matrix must be square, got shape {f.shape}")
            if validate:
                if (f < 0).any():
                    raise ValueError("entries must be nonnegative")
                if np.abs(f.sum(axis=1) - 1.0).max() > FLOAT_EQ_TOL:
                    raise ValueError("rows must sum to 1 within 1e-12")
            f.setflags(write=False)
            self.mode = "float"
            self.f = f
            self.n = f.shape[0]
        else:
            nums = [[int(v) for v in row] for row in nums]
            n = len(nums)
            if any(len(row) != n for row in nums):
                raise ValueError("matrix must be square")
            exp = int(exp)
            if exp < 0:
                raise ValueError("exponent must be >= 0")
            if validate:
                target = 1 << exp
                for row in nums:
                    if any(v < 0 for v in row):
                        raise ValueError("entries must be nonnegative")
                    if sum(row) != target:
                        raise ValueError(
                            f"row sum {sum(row)} != 2^{exp} in dyadic mode")
            nums, exp = dyadic_reduce(nums, exp)
            self.mode = "dyadic"
            self.nums = tuple(tuple(row) for row in nums)
            self.exp = exp
            self.n = n

    @classmethod
    def from_floats(cls, arr) -> "StochasticMatrix":
        return cls(floats=arr)

    @classmethod
    def from_dyadic(cls, nums, exp) -> "StochasticMatrix":
        return cls(nums=nums, exp=exp)

    @classmethod
    def identity(cls, n, mode="dyadic") -> "StochasticMatrix":
        if mode == "dyadic":
            return cls(nums=[[int(i == j) for j in range(n)] for i in range(n)], exp=0)
        return cls(floats=np.eye(n))

    def to_floats(self) -> np.ndarray:
        if self.mode == "float":
            return self.f
        den = 1 << self.exp
        return np.array([[float(Fraction(v, den)) for v in row] for row in self.nums])

    def to_json(self):
        return {"n": self.n, "rows": [list(map(float, row)) for row in self.to_floats()]}

    def __matmul__(self, other: "StochasticMatrix") -> "StochasticMatrix":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        if self.mode != other.mode:
            raise ValueError("cannot mix float and dyadic matrices in a product")
        if self.mode == "float":
            return StochasticMatrix(floats=self.f @ other.f, validate=False)
        exp = self.exp + other.exp
        if exp > DYADIC_EXP_CAP:
            raise DyadicOverflowError(
                f"dyadic exponent {exp} exceeds cap {DYADIC_EXP_CAP}; use float mode")
        n = self.n
        a, b = self.nums, other.nums
        cols = list(zip(*b))
        nums = [[sum(a[i][k] * cols[j][k] for k in range(n)) for j in range(n)]
                for i in range(n)]
        return StochasticMatrix(nums=nums, exp=exp, validate=False)

    def __eq__(self, other):
        if not isinstance(other, StochasticMatrix):
            return NotImplemented
        if self.mode == "dyadic" and other.mode == "dyadic":
            return self.nums == other.nums and self.exp == other.exp
        return bool(np.array_equal(self.to_floats(), other.to_floats()))

    def __hash__(self):
        if self.mode == "dyadic":
            return hash((self.nums, self.exp))
        return hash(self.f.tobytes())

    def __repr__(self):
        return f"StochasticMatrix(n={self.n}, mode={self.mode})"


def delta_coefficient(m) -> float:
    """Largest column-wise spread between two rows; zero iff all rows equal."""
    if isinstance(m, StochasticMatrix) and m.mode == "dyadic":
        best = 0
        for col in zip(*m.nums):
            best = max(best, max(col) - min(col))
        return float(Fraction(best, 1 << m.exp))
    f = m.to_floats() if isinstance(m, StochasticMatrix) else np.asarray(m, dtype=float)
    return float((f.max(axis=0) - f.min(axis=0)).max())


def lambda_coefficient(m) -> float:
    """One minus the smallest shared row mass; < 1 means the matrix is
    scrambling (every two rows overlap somewhere)."""
    if isinstance(m, StochasticMatrix) and m.mode == "dyadic":
        nums, exp = m.nums, m.exp
        n = m.n
        worst = 1 << exp
        for a in range(n):
            for b in range(a + 1, n):
                overlap = sum(min(nums[a][k], nums[b][k]) for k in range(n))
                worst = min(worst, overlap)
        return float(1 - Fraction(worst, 1 << exp))
    f = m.to_floats() if isinstance(m, StochasticMatrix) else np.asarray(m, dtype=float)
    overlap = np.minimum(f[:, None, :], f[None, :, :]).sum(axis=2)
    return float(1.0 - overlap.min())


def is_scrambling(m) -> bool:
    return lambda_coefficient(m) < 1.0


def is_finite_consensus(m) -> bool:
    """True iff all rows are identical (a rank-one consensus matrix).

    Exact on dyadic input; float input gets a 1e-12 tolerance and a warning,
    since floats cannot certify exact equality.
    """
    if isinstance(m, StochasticMatrix) and m.mode == "dyadic":
        return all(row == m.nums[0] for row in m.nums)
    warnings.warn("is_finite_consensus on float data falls back to a 1e-12 tolerance",
                  ExactnessWarning, stacklevel=2)
    return delta_coefficient(m) <= FLOAT_EQ_TOL


def product_chain(ms) -> StochasticMatrix:
    """Multiply a time-ordered chain (index 0 acts first)."""
    ms = list(ms)
    if not ms:
        raise ValueError("empty chain")
    acc = ms[0]
    for m in ms[1:]:
        acc = m @ acc
    return acc


UPDATE_KINDS = ("symmetric", "asymmetric", "identity")


@dataclass(frozen=True)
class UpdateMatrix:
    """One realized gossip update.

    symmetric(i, j): both endpoints move to their midpoint (doubly stochastic,
    a projection). asymmetric(i, j): only node i moves to the midpoint (row
    stochastic, not doubly). identity: nothing happened.
    """

    kind: str
    n: int
    i: int | None = None
    j: int | None = None

    def __post_init__(self):
        if self.kind not in UPDATE_KINDS:
            raise ValueError(f"unknown update kind {self.kind!r}")
        if self.kind == "identity":
            if self.i is not None or self.j is not None:
                raise ValueError("identity update takes no endpoints")
        else:
            if self.i is None or self.j is None:
                raise ValueError(f"{self.kind} update needs endpoints")
            if self.i == self.j:
                raise ValueError("endpoints must differ")
            if not (0 <= self.i < self.n and 0 <= self.j < self.n):
                raise ValueError("endpoint out of range")

    def expand(self) -> StochasticMatrix:
        n = self.n
        if self.kind == "identity":
            return StochasticMatrix.identity(n)
        nums = [[2 * int(r == c) for c in range(n)] for r in range(n)]
        nums[self.i][self.i] = 1
        nums[self.i][self.j] = 1
        if self.kind == "symmetric":
            nums[self.j][self.j] = 1
            nums[self.j][self.i] = 1
        return StochasticMatrix(nums=nums, exp=1, validate=False)


def symmetric_update(i, j, n) -> UpdateMatrix:
    return UpdateMatrix("symmetric", n, i, j)


def asymmetric_update(i, j, n) -> UpdateMatrix:
    return UpdateMatrix("asymmetric", n, i, j)


def identity_update(n) -> UpdateMatrix:
    return UpdateMatrix("identity", n)


def expected_update_dependent(sel, p: float) -> StochasticMatrix:
    """Mean one-step update matrix when the two link directions share one coin
    of success probability p: I - (p/2n) * (D - (A + A^T))."""
    from .graphs import laplacian

    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    n = sel.n
    e = np.eye(n) - (p / (2 * n)) * laplacian(sel.a)
    return StochasticMatrix(floats=e, validate=False)


def expected_update_independent(sel, p_plus: float, p_minus: float) -> StochasticMatrix:
    """Mean one-step update matrix when the two link directions flip
    independent coins: the probability-weighted sum over the full sample space
    of one-sided, two-sided, and identity updates."""
    if not (0.0 <= p_plus <= 1.0 and 0.0 <= p_minus <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    a = sel.a
    n = sel.n
    e = np.zeros((n, n))
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            p_one = (a[i, j] / n) * p_plus * (1 - p_minus) \
                + (a[j, i] / n) * p_minus * (1 - p_plus)
            if p_one > 0:
                e += p_one * asymmetric_update(i, j, n).expand().to_floats()
                total += p_one
            if i > j:
                p_both = (a[i, j] + a[j, i]) / n * p_plus * p_minus
                if p_both > 0:
                    e += p_both * symmetric_update(i, j, n).expand().to_floats()
                    total += p_both
    e += (1.0 - total) * np.eye(n)
    return StochasticMatrix(floats=e, validate=False)


def second_largest_eigenvalue_symmetric(m) -> float:
    """Largest eigenvalue below the trivial one at 1, for a symmetric
    stochastic matrix (eigenvalues are real)."""
    f = m.to_floats() if isinstance(m, StochasticMatrix) else np.asarray(m, dtype=float)
    eigs = np.linalg.eigvalsh(f)
    return float(eigs[-2])


@dataclass(frozen=True)
class DyadicVector:
    """Exact dyadic state vector: value_i = nums[i] / 2^exp."""

    nums: tuple[int, ...]
    exp: int

    def __post_init__(self):
        if self.exp < 0:
            raise ValueError("exponent must be >= 0")

    @classmethod
    def from_floats(cls, values) -> "DyadicVector":
        """Exact embedding; every float64 is a dyadic rational."""
        parts = []
        for v in values:
            num, den = float(v).as_integer_ratio()
            if den < 1:
                raise ValueError("negative denominators impossible")
            parts.append((num, den.bit_length() - 1))
        exp = max((e for _, e in parts), default=0)
        nums = [num << (exp - e) for num, e in parts]
        return cls._reduced(nums, exp)

    @classmethod
    def _reduced(cls, nums, exp) -> "DyadicVector":
        acc = 0
        for v in nums:
            acc |= v
        if acc:
            shift = min(_trailing_zeros(acc), exp)
            if shift:
                nums = [v >> shift for v in nums]
                exp -= shift
        else:
            exp = 0
        return cls(tuple(nums), exp)

    def to_floats(self) -> np.ndarray:
        den = 1 << self.exp
        return np.array([float(Fraction(v, den)) for v in self.nums])

    def sum_fraction(self) -> Fraction:
        return Fraction(sum(self.nums), 1 << self.exp)

    def all_equal(self) -> bool:
        return all(v == self.nums[0] for v in self.nums)

    def averaged(self, i: int, j: int, both: bool = True) -> "DyadicVector":
        """Apply one midpoint update exactly: both endpoints (symmetric) or
        only node i (asymmetric)."""
        nums = [v << 1 for v in self.nums]
        mid = self.nums[i] + self.nums[j]
        nums[i] = mid
        if both:
            nums[j] = mid
        return DyadicVector._reduced(nums, self.exp + 1)

    def __len__(self):
        return len(self.nums)
