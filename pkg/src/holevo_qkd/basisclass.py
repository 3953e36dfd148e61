"""Four-letter two-qubit alphabets: entanglement-type classification,
Mor's pairwise condition, and vulnerability screening."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .qstate import ATOL, PureState, StateError, concurrence, ket, partial_trace

PRODUCT_TOL = 1e-6
# concurrences this close to 0 or 1 (but outside PRODUCT_TOL) get a
# borderline flag: they are classified, but probably meant to be exact
BORDERLINE_BAND = 1e-3

DEFAULT_LABELS = ("00", "01", "10", "11")


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class LetterBasis:
    states: tuple[PureState, ...]
    labels: tuple[str, ...] = DEFAULT_LABELS
    name: str = "custom"

    def __post_init__(self):
        states = tuple(self.states)
        labels = tuple(self.labels)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", labels)
        if len(states) != 4 or any(s.dim != 4 for s in states):
            raise BasisError("a letter basis needs exactly four two-qubit states")
        if sorted(labels) != sorted(DEFAULT_LABELS):
            raise BasisError(f"labels {labels} are not a bijection onto 00, 01, 10, 11")
        for i in range(4):
            for j in range(i + 1, 4):
                if abs(states[i].inner(states[j])) >= ATOL:
                    raise BasisError(f"letters {i} and {j} are not orthogonal")

    def vectors(self) -> np.ndarray:
        """4x4 array; row i holds letter i's amplitudes."""
        return np.array([s.amplitudes for s in self.states])

    def permuted(self, order: Sequence[int]) -> "LetterBasis":
        return LetterBasis(
            tuple(self.states[i] for i in order),
            tuple(self.labels[i] for i in order),
            self.name,
        )

    def to_rows(self) -> list[list[float]]:
        rows = []
        for s in self.states:
            row = []
            for a in s.amplitudes:
                row += [float(a.real), float(a.imag)]
            rows.append(row)
        return rows


def parse_basis(text: str, name: str = "custom") -> LetterBasis:
    """Four rows of eight reals (re, im interleaved over HH, HV, VH, VV).

    Whitespace or commas separate numbers; ``#`` starts a comment. Rows
    are normalized, so ``1 0 0 0 0 0 1 0`` is accepted for (|HH> + |VH>)/sqrt2.
    An optional ``labels: 00 01 10 11`` line overrides the bit labels.
    """
    rows = []
    labels = DEFAULT_LABELS
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("labels:"):
            labels = tuple(line.split(":", 1)[1].replace(",", " ").split())
            continue
        try:
            values = [float(v) for v in line.replace(",", " ").split()]
        except ValueError as exc:
            raise BasisError(f"line {lineno}: {exc}") from None
        if len(values) != 8:
            raise BasisError(f"line {lineno}: expected 8 numbers, got {len(values)}")
        rows.append(values)
    if len(rows) != 4:
        raise BasisError(f"expected 4 basis rows, got {len(rows)}")
    states = []
    for row in rows:
        amps = np.array(row[0::2]) + 1j * np.array(row[1::2])
        try:
            states.append(PureState.normalized(amps))
        except StateError as exc:
            raise BasisError(str(exc)) from None
    return LetterBasis(tuple(states), labels, name)


def format_basis(b: LetterBasis) -> str:
    lines = [f"# {b.name}: re/im pairs over HH HV VH VV", "labels: " + " ".join(b.labels)]
    for row in b.to_rows():
        lines.append(" ".join(repr(v) for v in row))
    return "\n".join(lines) + "\n"


def load_basis(source: str) -> LetterBasis:
    """Preset name or path to a basis file."""
    key = source.lower()
    if key in PRESETS:
        return PRESETS[key]
    path = Path(source)
    if not path.exists():
        raise BasisError(f"{source!r} is neither a preset ({', '.join(sorted(PRESETS))}) nor a file")
    return parse_basis(path.read_text(), name=path.stem)


def _sum(*terms) -> PureState:
    amps = sum(c * ket(lbl).amplitudes for c, lbl in terms)
    return PureState.normalized(amps)


PHI_PLUS = _sum((1, "00"), (1, "11"))
PHI_MINUS = _sum((1, "00"), (-1, "11"))
PSI_PLUS = _sum((1, "01"), (1, "10"))
PSI_MINUS = _sum((1, "01"), (-1, "10"))

BASIS_202 = LetterBasis((ket("HH"), PSI_PLUS, PSI_MINUS, ket("VV")), name="202")
BASIS_400 = LetterBasis((ket("00"), ket("10"), ket("+1"), ket("-1")), name="400")
# ordered so letters 1 and 2 coincide with those of the 202 basis
BELL_BASIS = LetterBasis((PHI_PLUS, PSI_PLUS, PSI_MINUS, PHI_MINUS), name="004")


def _basis_040(theta: float = math.pi / 8) -> LetterBasis:
    c, s = math.cos(theta), math.sin(theta)
    return LetterBasis(
        (
            _sum((c, "00"), (s, "11")),
            _sum((s, "00"), (-c, "11")),
            _sum((c, "01"), (s, "10")),
            _sum((s, "01"), (-c, "10")),
        ),
        name="040",
    )


BASIS_040 = _basis_040()

PRESETS = {
    "202": BASIS_202,
    "400": BASIS_400,
    "004": BELL_BASIS,
    "bell": BELL_BASIS,
    "040": BASIS_040,
}


@dataclass(frozen=True)
class PnmSignature:
    p: int
    n: int
    m: int
    concurrences: tuple[float, ...] = field(default=(), compare=False)
    borderline: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if min(self.p, self.n, self.m) < 0 or self.p + self.n + self.m != 4:
            raise ValueError(f"invalid pnm signature {self.p}{self.n}{self.m}")

    @property
    def code(self) -> str:
        return f"{self.p}{self.n}{self.m}"

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.p, self.n, self.m)


def classify_pnm(b: LetterBasis) -> PnmSignature:
    counts = [0, 0, 0]
    concs = []
    borderline = []
    for i, s in enumerate(b.states):
        c = concurrence(s)
        concs.append(c)
        if c < PRODUCT_TOL:
            counts[0] += 1
        elif c > 1 - PRODUCT_TOL:
            counts[2] += 1
        else:
            counts[1] += 1
            if c < BORDERLINE_BAND or c > 1 - BORDERLINE_BAND:
                borderline.append(i)
    return PnmSignature(*counts, concurrences=tuple(concs), borderline=tuple(borderline))


@dataclass(frozen=True)
class MorPair:
    i: int
    j: int
    first_nonorthogonal: bool
    first_nonidentical: bool
    second_nonorthogonal: bool

    @property
    def satisfied(self) -> bool:
        return self.first_nonorthogonal and self.first_nonidentical and self.second_nonorthogonal


@dataclass(frozen=True)
class MorReport:
    pairs: tuple[MorPair, ...]

    def pair(self, i: int, j: int) -> MorPair:
        lo, hi = min(i, j), max(i, j)
        for p in self.pairs:
            if (p.i, p.j) == (lo, hi):
                return p
        raise KeyError((i, j))

    @property
    def satisfied_pairs(self) -> list[tuple[int, int]]:
        return [(p.i, p.j) for p in self.pairs if p.satisfied]


def reductions(psi: PureState) -> tuple[np.ndarray, np.ndarray]:
    rho = psi.density()
    return (
        partial_trace(rho, [0], [2, 2]).matrix,
        partial_trace(rho, [1], [2, 2]).matrix,
    )


def mor_pair(a: PureState, b: PureState, i: int = 0, j: int = 1) -> MorPair:
    a1, a2 = reductions(a)
    b1, b2 = reductions(b)
    return MorPair(
        i,
        j,
        first_nonorthogonal=float(np.trace(a1 @ b1).real) > ATOL,
        first_nonidentical=float(np.max(np.abs(a1 - b1))) > ATOL,
        second_nonorthogonal=float(np.trace(a2 @ b2).real) > ATOL,
    )


def mor_condition(b: LetterBasis) -> MorReport:
    pairs = tuple(
        mor_pair(b.states[i], b.states[j], i, j) for i in range(4) for j in range(i + 1, 4)
    )
    return MorReport(pairs)


LOCAL_MEASUREMENT = "vulnerable-to-local-measurement"
ANCILLA_SWAP = "vulnerable-to-ancilla-swap"
CANDIDATE = "candidate-secure"


@dataclass(frozen=True)
class ScreenReport:
    basis: str
    signature: PnmSignature
    verdict: str
    mor: MorReport
    attack_stats: dict = field(default_factory=dict)

    @property
    def vulnerable(self) -> bool:
        return self.verdict != CANDIDATE


def screen_basis(b: LetterBasis, with_attacks: bool = True) -> ScreenReport:
    sig = classify_pnm(b)
    if sig.as_tuple() == (4, 0, 0):
        verdict = LOCAL_MEASUREMENT
    elif sig.as_tuple() == (0, 0, 4):
        verdict = ANCILLA_SWAP
    else:
        verdict = CANDIDATE
    stats = {}
    if with_attacks:
        from .attacks import ancilla_swap, exact_eve_stats, local_measure_qubit2

        for strategy in (local_measure_qubit2(), ancilla_swap()):
            stats[strategy.name] = exact_eve_stats(b, strategy)
    return ScreenReport(b.name, sig, verdict, mor_condition(b), stats)
