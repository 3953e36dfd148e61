"""Two-photon, four-mode model of Bob's linear-optics analyzer.

Input modes are ordered (aH, aV, bH, bV); qubit 1 travels in port a and
qubit 2 in port b. After the analyzer, mode k feeds detector D(k+1):
D1 = output 1 H, D2 = output 1 V, D3 = output 2 H, D4 = output 2 V.

A two-photon state is stored as ten amplitudes over occupation states
|1_i 1_j> (i < j) and |2_i>. Squared amplitudes are click probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np

from .basisclass import LetterBasis
from .qstate import ATOL, PureState, StateError, _sample_index, sample_batch

MODES = ("aH", "aV", "bH", "bV")
DETECTORS = ("D1", "D2", "D3", "D4")
PAIRS = tuple(combinations_with_replacement(range(4), 2))
PAIR_INDEX = {p: k for k, p in enumerate(PAIRS)}
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.shape != (10,):
            raise StateError(f"two-photon state needs 10 amplitudes, got {amps.shape}")
        if abs(np.vdot(amps, amps).real - 1.0) > ATOL:
            raise StateError("two-photon state is not normalized")
        object.__setattr__(self, "amplitudes", amps)

    def amplitude(self, i: int, j: int) -> complex:
        return complex(self.amplitudes[PAIR_INDEX[(min(i, j), max(i, j))]])

    def to_symmetric(self) -> np.ndarray:
        """Coefficient matrix C with state = sum_ij C_ij a_i^dag a_j^dag |0>."""
        c = np.zeros((4, 4), dtype=complex)
        for (i, j), amp in zip(PAIRS, self.amplitudes):
            if i == j:
                c[i, i] = amp / SQRT2
            else:
                c[i, j] = c[j, i] = amp / 2
        return c

    @classmethod
    def from_symmetric(cls, c: np.ndarray) -> "TwoPhotonState":
        amps = [c[i, i] * SQRT2 if i == j else c[i, j] * 2 for i, j in PAIRS]
        return cls(np.array(amps))


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """Unitary acting on creation operators: a_k^dag -> sum_j U[j, k] b_j^dag."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise StateError("mode transform must be 4x4")
        if np.max(np.abs(m @ m.conj().T - np.eye(4))) > ATOL:
            raise StateError("mode transform is not unitary")
        object.__setattr__(self, "matrix", m)

    def then(self, other: "ModeTransform") -> "ModeTransform":
        """Apply self first, then other."""
        return ModeTransform(other.matrix @ self.matrix)


@dataclass(frozen=True, order=True)
class ClickPattern:
    """Two detector clicks as a sorted pair of 0-based detector indices."""

    first: int
    second: int

    def __post_init__(self):
        if not (0 <= self.first <= 3 and 0 <= self.second <= 3):
            raise ValueError("detector index out of range")
        if self.first > self.second:
            a, b = self.second, self.first
            object.__setattr__(self, "first", a)
            object.__setattr__(self, "second", b)

    @classmethod
    def parse(cls, text: str) -> "ClickPattern":
        """``"D1D2"``, ``"D1 D2"`` or ``"D1,D2"``."""
        digits = [int(ch) for ch in text if ch.isdigit()]
        if len(digits) != 2 or not all(1 <= d <= 4 for d in digits):
            raise ValueError(f"cannot parse click pattern {text!r}")
        return cls(digits[0] - 1, digits[1] - 1)

    def __str__(self):
        return DETECTORS[self.first] + DETECTORS[self.second]


ALL_PATTERNS = tuple(ClickPattern(i, j) for i, j in PAIRS)


def encode_qubits(psi: PureState) -> TwoPhotonState:
    """Map a two-qubit polarization state onto the four modes."""
    if psi.dim != 4:
        raise StateError("analyzer input must be a two-qubit state")
    amps = np.zeros(10, dtype=complex)
    for idx, amp in enumerate(psi.amplitudes):
        x, y = idx >> 1, idx & 1
        # qubit 1 -> port a (modes 0, 1); qubit 2 -> port b (modes 2, 3)
        amps[PAIR_INDEX[(x, 2 + y)]] = amp
    return TwoPhotonState(amps)


def encode_letter(index: int, basis: LetterBasis) -> TwoPhotonState:
    if not 0 <= index < 4:
        raise IndexError(f"letter index {index} out of range")
    return encode_qubits(basis.states[index])


def beam_splitter() -> np.ndarray:
    """Polarization-independent 50/50 splitter, phase i on reflection."""
    t = 1 / SQRT2
    r = 1j / SQRT2
    # (port, pol) ordering: rows are outputs (1H, 1V, 2H, 2V)
    return np.array(
        [
            [t, 0, r, 0],
            [0, t, 0, r],
            [r, 0, t, 0],
            [0, r, 0, t],
        ]
    )


def pbs_routing() -> np.ndarray:
    # each PBS sends H to the transmitted detector and V to the reflected
    # one; with modes already split by polarization this is the identity
    # map from (port, pol) onto (D1, D2, D3, D4)
    return np.eye(4, dtype=complex)


def analyzer_transform() -> ModeTransform:
    return ModeTransform(pbs_routing() @ beam_splitter())


def apply_mode_transform(s: TwoPhotonState, t: ModeTransform) -> TwoPhotonState:
    c = s.to_symmetric()
    u = t.matrix
    return TwoPhotonState.from_symmetric(u @ c @ u.T)


def click_distribution(s: TwoPhotonState) -> dict[ClickPattern, float]:
    probs = np.abs(s.amplitudes) ** 2
    return {pat: float(p) for pat, p in zip(ALL_PATTERNS, probs)}


_DECISION = {
    (0, 0): 0, (2, 2): 0,
    (1, 1): 3, (3, 3): 3,
    (0, 1): 1, (2, 3): 1,
    (1, 2): 2, (0, 3): 2,
}


def discriminate(c: ClickPattern) -> Optional[int]:
    """Letter index signalled by a click pattern, or ``None`` to reject."""
    return _DECISION.get((c.first, c.second))


def analyze(psi: PureState) -> TwoPhotonState:
    return apply_mode_transform(encode_qubits(psi), analyzer_transform())


def sample_clicks(s: TwoPhotonState, rng) -> ClickPattern:
    probs = np.abs(s.amplitudes) ** 2
    return ALL_PATTERNS[_sample_index(probs, rng)]


def success_probability(index: int, basis: LetterBasis) -> float:
    """Probability that the analyzer returns letter ``index`` for that letter."""
    dist = click_distribution(analyze(basis.states[index]))
    return sum(p for pat, p in dist.items() if discriminate(pat) == index)


def analyzer_discriminates(basis: LetterBasis, tol: float = 1e-10) -> bool:
    return all(abs(success_probability(i, basis) - 1.0) <= tol for i in range(4))


# Batched analyzer: rows are independent two-qubit inputs.

DECISION_TABLE = np.array([-1 if discriminate(p) is None else discriminate(p) for p in ALL_PATTERNS])
_I, _J = (np.array(ix) for ix in zip(*PAIRS))
_WEIGHT = np.where(_I == _J, 2.0, 4.0)


def click_probs_batch(amps: np.ndarray, t: Optional[ModeTransform] = None) -> np.ndarray:
    """(rows, 4) qubit amplitudes -> (rows, 10) click probabilities."""
    u = (t or analyzer_transform()).matrix
    # port a carries modes 0-1, port b modes 2-3; amplitude of |xy> sits at C[x, 2+y]
    c = np.zeros((len(amps), 4, 4), dtype=complex)
    c[:, 0:2, 2:4] = amps.reshape(-1, 2, 2) / 2
    c = c + c.transpose(0, 2, 1)
    out = u @ c @ u.T
    vals = out[:, _I, _J]
    return _WEIGHT * (vals.real**2 + vals.imag**2)


def sample_clicks_batch(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Pattern indices into ``ALL_PATTERNS``."""
    return sample_batch(probs, u)
