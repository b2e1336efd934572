"""State vectors and operators over small qutrit registers.

Register encoding: a flat row-major vector of length ``3**n`` with qutrit 0
as the most significant trit, so ``|j k>`` sits at index ``3*j + k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

DIM = 3
ALGEBRA_TOL = 1e-12
INPUT_TOL = 1e-9


class QutritError(ValueError):
    """Base class for invalid inputs to the qutrit engine."""


class ZeroVector(QutritError):
    pass


class NotNormalized(QutritError):
    pass


class NotOrdered(QutritError):
    pass


class Negative(QutritError):
    pass


class DimensionMismatch(QutritError):
    pass


class IndexOutOfRange(QutritError, IndexError):
    pass


def _frozen(values: ArrayLike, shape: tuple[int, ...]) -> NDArray[np.complex128]:
    arr = np.array(values, dtype=np.complex128).reshape(shape)
    if not np.isfinite(arr).all():
        raise QutritError("amplitudes must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PureState:
    """A normalized pure state on ``n_qutrits`` qutrits."""

    n_qutrits: int
    amps: NDArray[np.complex128] = field(repr=False)

    def __post_init__(self) -> None:
        if self.n_qutrits < 1:
            raise QutritError("a register needs at least one qutrit")
        amps = _frozen(self.amps, (DIM**self.n_qutrits,))
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > INPUT_TOL:
            raise NotNormalized(f"state norm^2 is {norm!r}, expected 1")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_vector(cls, vec: ArrayLike) -> PureState:
        """Normalize ``vec`` (length a power of 3) into a state."""
        vec = np.asarray(vec, dtype=np.complex128).ravel()
        n = round(math.log(vec.size, DIM)) if vec.size > 0 else 0
        if n < 1 or DIM**n != vec.size:
            raise DimensionMismatch(f"length {vec.size} is not a power of 3")
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            raise ZeroVector("cannot normalize the zero vector")
        return cls(n, vec / norm)

    @classmethod
    def _trusted(cls, n_qutrits: int, amps: NDArray[np.complex128]) -> PureState:
        # internal fast path: caller guarantees shape and unit norm
        obj = object.__new__(cls)
        amps.flags.writeable = False
        object.__setattr__(obj, "n_qutrits", n_qutrits)
        object.__setattr__(obj, "amps", amps)
        return obj

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PureState):
            return NotImplemented
        return self.n_qutrits == other.n_qutrits and np.array_equal(self.amps, other.amps)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ChannelCoeffs:
    """Schmidt coefficients of ``a0|00> + a1|11> + a2|22>``.

    Inputs are validated, never sorted or renormalized.
    """

    a0: float
    a1: float
    a2: float

    def __post_init__(self) -> None:
        a = (self.a0, self.a1, self.a2)
        if not all(math.isfinite(x) for x in a):
            raise QutritError("channel coefficients must be finite")
        if min(a) < 0:
            raise Negative(f"negative channel coefficient in {a}")
        if abs(sum(x * x for x in a) - 1.0) > INPUT_TOL:
            raise NotNormalized(f"a0^2+a1^2+a2^2 = {sum(x * x for x in a)!r}, expected 1")
        if self.a0 > self.a1 or self.a1 > self.a2:
            raise NotOrdered(f"need a0 <= a1 <= a2, got {a}")

    @property
    def coeffs(self) -> tuple[float, float, float]:
        return (self.a0, self.a1, self.a2)

    @cached_property
    def state(self) -> PureState:
        """The two-qutrit resource as a register."""
        vec = np.zeros(DIM * DIM, dtype=np.complex128)
        for j, a in enumerate(self.coeffs):
            vec[DIM * j + j] = a
        return PureState(2, vec)

    @property
    def is_maximal(self) -> bool:
        return abs(self.a0 - self.a2) <= ALGEBRA_TOL


@dataclass(frozen=True)
class QutritOperator:
    """A 3x3 complex matrix acting on one qutrit."""

    entries: NDArray[np.complex128] = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", _frozen(self.entries, (DIM, DIM)))

    @classmethod
    def diag(cls, values: ArrayLike) -> QutritOperator:
        return cls(np.diag(np.asarray(values, dtype=np.complex128)))

    @classmethod
    def identity(cls) -> QutritOperator:
        return cls(np.eye(DIM))

    @classmethod
    def zero(cls) -> QutritOperator:
        return cls(np.zeros((DIM, DIM)))

    @property
    def dagger(self) -> QutritOperator:
        return QutritOperator(self.entries.conj().T)

    def __matmul__(self, other: QutritOperator) -> QutritOperator:
        return QutritOperator(self.entries @ other.entries)

    def is_unitary(self, tol: float = ALGEBRA_TOL) -> bool:
        m = self.entries
        return bool(np.allclose(m.conj().T @ m, np.eye(DIM), rtol=0, atol=tol))


def make_state(alpha: complex, beta: complex, gamma: complex) -> PureState:
    """Build the normalized one-qutrit state proportional to ``(alpha, beta, gamma)``."""
    return PureState.from_vector([alpha, beta, gamma])


def make_channel(a0: float, a1: float, a2: float) -> ChannelCoeffs:
    return ChannelCoeffs(float(a0), float(a1), float(a2))


def tensor(s1: PureState, s2: PureState) -> PureState:
    return PureState._trusted(s1.n_qutrits + s2.n_qutrits, np.outer(s1.amps, s2.amps).ravel())


def fidelity(s1: PureState, s2: PureState) -> float:
    """Squared overlap ``|<s1|s2>|^2``, clipped into [0, 1]."""
    if s1.n_qutrits != s2.n_qutrits:
        raise DimensionMismatch(f"{s1.n_qutrits} vs {s2.n_qutrits} qutrits")
    f = abs(np.vdot(s1.amps, s2.amps)) ** 2
    return float(min(max(f, 0.0), 1.0))


def haar_random_state(seed: int) -> PureState:
    """One-qutrit Haar-random state; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(DIM) + 1j * rng.standard_normal(DIM)
    return PureState.from_vector(z)


def apply_to_vector(
    op: NDArray[np.complex128], vec: NDArray[np.complex128], n_qutrits: int, target: int
) -> NDArray[np.complex128]:
    """Apply a 3x3 matrix to qutrit ``target`` of a raw amplitude vector."""
    if not 0 <= target < n_qutrits:
        raise IndexOutOfRange(f"target {target} outside a {n_qutrits}-qutrit register")
    t = vec.reshape(DIM**target, DIM, DIM ** (n_qutrits - target - 1))
    return (op @ t).reshape(-1)


def apply_operator(op: QutritOperator, s: PureState, target: int) -> NDArray[np.complex128]:
    """Apply ``op`` to one qutrit of ``s``.

    The result is returned as a raw (possibly sub-normalized) amplitude vector
    since Kraus operators shrink the norm; wrap it with
    :meth:`PureState.from_vector` to renormalize.
    """
    return apply_to_vector(op.entries, s.amps, s.n_qutrits, target)


def random_channel(rng: np.random.Generator) -> ChannelCoeffs:
    """A generic ordered channel: sorted moduli of a uniform point on the unit sphere."""
    a = np.sort(np.abs(rng.standard_normal(DIM)))
    a /= np.linalg.norm(a)
    return make_channel(*a)
