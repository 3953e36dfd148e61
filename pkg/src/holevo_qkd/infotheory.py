"""Shannon and von Neumann information measures, and QKD efficiency."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .qstate import ATOL, DensityMatrix, StateError, von_neumann_entropy

Number = Union[float, Fraction, int]


class EfficiencyBoundWarning(UserWarning):
    """Raised (as a warning) when a protocol claims efficiency above 1."""


@dataclass(frozen=True, eq=False)
class Distribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise ValueError("empty distribution")
        if np.any(p < -ATOL):
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > ATOL:
            raise ValueError(f"probabilities sum to {p.sum():.12g}, expected 1")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """p(x_i, y_j) with rows indexing X and columns indexing Y."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise ValueError("joint distribution must be a non-empty matrix")
        if np.any(p < -ATOL):
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > ATOL:
            raise ValueError(f"joint probabilities sum to {p.sum():.12g}, expected 1")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))

    def marginal_x(self) -> Distribution:
        return Distribution(self.probs.sum(axis=1))

    def marginal_y(self) -> Distribution:
        return Distribution(self.probs.sum(axis=0))

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.probs.T)


@dataclass(frozen=True)
class EnsembleSpec:
    states: tuple[DensityMatrix, ...]
    probs: Distribution

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if not isinstance(self.probs, Distribution):
            object.__setattr__(self, "probs", Distribution(self.probs))
        if len(self.states) != len(self.probs.probs):
            raise ValueError("ensemble needs one probability per state")
        if len({s.dim for s in self.states}) > 1:
            raise StateError("ensemble states have different dimensions")

    def mixture(self) -> DensityMatrix:
        m = sum(p * s.matrix for p, s in zip(self.probs.probs, self.states))
        return DensityMatrix(m)


@dataclass(frozen=True)
class ProtocolCost:
    """Per-step accounting: secret bits, qubits sent, classical bits sent."""

    b_s: Number
    q_t: Number
    b_t: Number

    def __post_init__(self):
        if min(self.b_s, self.q_t, self.b_t) < 0:
            raise ValueError("costs must be non-negative")
        if self.q_t + self.b_t <= 0:
            raise ZeroDivisionError("q_t + b_t must be positive")

    def scaled(self, factor: Number) -> "ProtocolCost":
        return ProtocolCost(self.b_s * factor, self.q_t * factor, self.b_t * factor)


def _as_distribution(d) -> Distribution:
    return d if isinstance(d, Distribution) else Distribution(d)


def _as_joint(j) -> JointDistribution:
    return j if isinstance(j, JointDistribution) else JointDistribution(j)


def _plogp(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def shannon_entropy(d: Distribution | Sequence[float]) -> float:
    return _plogp(_as_distribution(d).probs)


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def conditional_entropy(j: JointDistribution | np.ndarray) -> float:
    """H(X|Y) for a joint with X on rows and Y on columns."""
    probs = _as_joint(j).probs
    total = 0.0
    for col in probs.T:
        py = col.sum()
        if py <= 0:
            continue
        total += py * _plogp(col / py)
    return max(0.0, total)


def mutual_information(j: JointDistribution | np.ndarray) -> float:
    joint = _as_joint(j)
    return shannon_entropy(joint.marginal_x()) - conditional_entropy(joint)


def holevo_chi(e: EnsembleSpec) -> float:
    """S(sum p_i rho_i) - sum p_i S(rho_i)."""
    avg = sum(p * von_neumann_entropy(s) for p, s in zip(e.probs.probs, e.states))
    return von_neumann_entropy(e.mixture()) - avg


def efficiency(c: ProtocolCost) -> Number:
    """Secret bits per transmitted qubit plus classical bit.

    Exact for ``Fraction`` inputs. Emits ``EfficiencyBoundWarning`` if the
    result exceeds 1, which no protocol can honestly achieve.
    """
    value = c.b_s / (c.q_t + c.b_t)
    if value > 1:
        warnings.warn(
            f"efficiency {float(value):.4g} exceeds the information-theoretic bound of 1",
            EfficiencyBoundWarning,
            stacklevel=2,
        )
    return value


@dataclass(frozen=True)
class TableRow:
    scheme: str
    b_s: Fraction
    q_t: Fraction
    b_t: Fraction
    # how the printed value relates to the true one: "exact", "strict-bound"
    # (true value is strictly below) or "upper-bound" (at most)
    qualifier: str = "exact"

    @property
    def cost(self) -> ProtocolCost:
        return ProtocolCost(self.b_s, self.q_t, self.b_t)

    @property
    def efficiency(self) -> Fraction:
        return efficiency(self.cost)

    def display(self, digits: int = 2) -> str:
        prefix = {"exact": "", "strict-bound": "< ", "upper-bound": "≤ "}[self.qualifier]
        return f"{prefix}{float(self.efficiency):.{digits}f}"


F = Fraction

# b_s and b_t of the bounded rows hold the bounding value; the qualifier
# records the direction.
TABLE_I = (
    TableRow("Bennett, 1992", F(1, 2), F(1), F(1), "strict-bound"),
    TableRow("Bennett and Brassard, 1984", F(1, 2), F(1), F(1)),
    TableRow("Goldenberg and Vaidman, 1995", F(1), F(2), F(1), "upper-bound"),
    TableRow("Ekert, 1991", F(1), F(1), F(1)),
    TableRow("Koashi and Imoto, 1997", F(1), F(2), F(0)),
    TableRow("Cabello, 2000", F(2), F(2), F(1)),
)
