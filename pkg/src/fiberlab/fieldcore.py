"""Complex-field primitives, random unitaries and circuit figures of merit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateRow, InvalidDimension, InvalidFraction,
                     InvalidShape)

UNITARY_TOL = 1e-9


def as_rng(seed):
    """Return a numpy Generator from an int seed, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class FieldVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if not np.all(np.isfinite(amps)):
            raise InvalidShape("field contains non-finite entries")
        object.__setattr__(self, "amplitudes", amps)

    def power(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __len__(self):
        return len(self.amplitudes)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    entries: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def unitarity_error(self) -> float:
        return unitarity_error(self.entries)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def unitarity_error(u) -> float:
    """max |U^H U - I| elementwise."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def haar_unitary(n: int, seed=None) -> TransferMatrix:
    """Sample an n x n unitary from the Haar measure.

    QR of a complex Ginibre matrix, with the columns of Q rephased by
    R_kk/|R_kk| so the result does not inherit LAPACK's sign convention.
    """
    if n < 1:
        raise InvalidDimension(f"dimension must be >= 1, got {n}")
    rng = as_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return TransferMatrix(q, seed if isinstance(seed, (int, np.integer)) else None)


def random_isometry(rows: int, cols: int, seed=None) -> np.ndarray:
    """Seeded partial isometry of shape (rows, cols).

    Orthonormal columns when rows >= cols, orthonormal rows otherwise; this is
    the polar factor of a complex Gaussian matrix.
    """
    rng = as_rng(seed)
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    u, _, vh = np.linalg.svd(g, full_matrices=False)
    return u @ vh


@dataclass(frozen=True, eq=False)
class CircuitSpec:
    """Target linear circuit; rows are implemented one at a time."""

    target: np.ndarray
    is_unitary: bool = False
    label: str = ""

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.target, dtype=complex))
        if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] < 1:
            raise InvalidShape(f"circuit must be a non-empty matrix, got shape {t.shape}")
        if np.any(np.all(t == 0, axis=1)):
            raise DegenerateRow("circuit has an all-zero row")
        if self.is_unitary:
            if t.shape[0] != t.shape[1]:
                raise InvalidShape("unitary circuit must be square")
            if unitarity_error(t) >= UNITARY_TOL:
                raise InvalidShape("circuit flagged unitary is not unitary")
        object.__setattr__(self, "target", t)

    @property
    def shape(self):
        return self.target.shape

    @classmethod
    def haar(cls, m: int, seed=None, label: str = ""):
        return cls(haar_unitary(m, seed).entries, is_unitary=True, label=label)

    def to_json(self) -> dict:
        return {"matrix": matrix_to_json(self.target), "is_unitary": self.is_unitary,
                "label": self.label}

    @classmethod
    def from_json(cls, data: dict):
        return cls(matrix_from_json(data["matrix"]), bool(data.get("is_unitary", False)),
                   data.get("label", ""))


@dataclass(frozen=True, eq=False)
class MeasuredCircuit:
    """Measured amplitude moduli (n x m) and per-row transmitted power fraction."""

    moduli: np.ndarray
    row_power: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        mod = np.atleast_2d(np.asarray(self.moduli, dtype=float))
        power = np.asarray(self.row_power, dtype=float).reshape(-1)
        if np.any(mod < 0):
            raise InvalidShape("moduli must be non-negative")
        if power.shape[0] != mod.shape[0]:
            raise InvalidShape("row_power length must match the number of rows")
        if np.any(power < 0) or np.any(power > 1 + 1e-12):
            raise InvalidFraction("row_power must lie in [0, 1]")
        object.__setattr__(self, "moduli", mod)
        object.__setattr__(self, "row_power", power)

    @property
    def shape(self):
        return self.moduli.shape

    def to_json(self) -> dict:
        return {"moduli": matrix_to_json(self.moduli),
                "row_power": [float(p) for p in self.row_power],
                "provenance": self.provenance}

    @classmethod
    def from_json(cls, data: dict):
        return cls(matrix_from_json(data["moduli"]).real, data["row_power"],
                   data.get("provenance", {}))


def _matrix(x):
    for attr in ("moduli", "target", "entries"):
        if hasattr(x, attr):
            return getattr(x, attr)
    return x


def trace_fidelity(exp, target) -> float:
    """(1/n) Re Tr(exp target^H) for n x m complex matrices."""
    a = np.atleast_2d(np.asarray(_matrix(exp), dtype=complex))
    b = np.atleast_2d(np.asarray(_matrix(target), dtype=complex))
    if a.shape != b.shape:
        raise InvalidShape(f"shape mismatch {a.shape} vs {b.shape}")
    # Tr(A B^H) = sum_ij A_ij conj(B_ij)
    return float(np.sum(a * b.conj()).real / a.shape[0])


def normalize_rows(matrix, mode: str = "norm") -> np.ndarray:
    """Scale each row to unit Euclidean norm (``mode="norm"``) or unit maximum (``"max"``)."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if mode == "norm":
        scale = np.linalg.norm(m, axis=1)
    elif mode == "max":
        scale = np.max(np.abs(m), axis=1)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    if np.any(scale == 0):
        raise DegenerateRow("cannot normalize an all-zero row")
    return m / scale[:, None]


def row_overlaps(measured, target, normalize: bool = True) -> np.ndarray:
    """Per-row amplitude overlap sum_j |exp|_ij |target|_ij.

    Target rows are always taken at unit norm. With ``normalize`` the measured
    rows are too, which removes the global transmission loss of each row.
    """
    a = np.abs(np.atleast_2d(np.asarray(_matrix(measured))))
    b = np.abs(np.atleast_2d(np.asarray(_matrix(target))))
    if a.shape != b.shape:
        raise InvalidShape(f"shape mismatch {a.shape} vs {b.shape}")
    b = normalize_rows(b)
    if normalize:
        a = normalize_rows(a)
    return np.sum(a * b, axis=1)


def statistical_fidelity(measured, target, normalize: bool = True) -> float:
    """Amplitude-modulus fidelity (1/n) Tr(|exp| |target|^T), rows averaged."""
    return float(np.mean(row_overlaps(measured, target, normalize)))


def to_db(transmission) -> float:
    """Loss in dB for a power transmission in (0, 1]."""
    t = float(transmission)
    if not (0 < t <= 1):
        raise InvalidFraction(f"transmission must be in (0, 1], got {t}")
    return -10.0 * math.log10(t)


@dataclass(frozen=True)
class LossBudget:
    factors: tuple = ()

    def __post_init__(self):
        factors = tuple((str(name), float(t)) for name, t in self.factors)
        for name, t in factors:
            if not (0 < t <= 1):
                raise InvalidFraction(f"factor {name!r} = {t} outside (0, 1]")
        object.__setattr__(self, "factors", factors)

    def total(self) -> float:
        return math.prod(t for _, t in self.factors)

    def db(self) -> float:
        return to_db(self.total())

    def without(self, name: str) -> "LossBudget":
        kept = tuple(f for f in self.factors if f[0] != name)
        if len(kept) == len(self.factors):
            raise KeyError(name)
        return LossBudget(kept)

    def as_dict(self) -> dict:
        return dict(self.factors)


def budget_total(budget: LossBudget) -> tuple[float, float]:
    if not budget.factors:
        raise InvalidFraction("loss budget has no factors")
    total = budget.total()
    return total, to_db(total)


def matrix_to_json(m) -> dict:
    m = np.atleast_2d(np.asarray(m))
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]),
            "re": m.real.tolist(), "im": np.imag(m).tolist()}


def matrix_from_json(data: dict) -> np.ndarray:
    re = np.asarray(data["re"], dtype=float)
    im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
    m = (re + 1j * im).reshape(int(data["rows"]), int(data["cols"]))
    return m
