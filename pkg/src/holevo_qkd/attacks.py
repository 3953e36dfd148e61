"""Eavesdropping strategies under sequential access, and their exact statistics.

Qubits carry physical labels: 1 and 2 are Alice's travelling qubits, 3 and
4 are Eve's ancillas. A strategy runs in two stages. Stage 1 sees qubit 1
and the ancillas and must name the qubit it forwards to Bob in place of
qubit 1. Only then does stage 2 receive qubit 2; it sees everything Eve
still holds and forwards the replacement for qubit 2. Programs that break
this order cannot be constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .basisclass import BELL_BASIS, LetterBasis
from .infotheory import mutual_information
from .qstate import (
    ATOL,
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    PureState,
    _check_orthonormal,
    _to_front,
    apply_array,
    apply_batch,
    branch_array,
    measure_batch,
    sample_batch,
)

TRAVEL = (1, 2)
ANCILLA_LABELS = (3, 4)


class SequentialAccessError(ValueError):
    """A strategy touches a qubit Eve cannot hold at that stage."""


def _vecs(basis) -> np.ndarray:
    if isinstance(basis, LetterBasis):
        return basis.vectors()
    if isinstance(basis, np.ndarray):
        return np.asarray(basis, dtype=complex)
    return np.array([b.amplitudes if isinstance(b, PureState) else b for b in basis], dtype=complex)


@dataclass(frozen=True, eq=False)
class Gate:
    targets: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2 ** len(self.targets),) * 2:
            raise ValueError(f"gate of shape {m.shape} does not fit targets {self.targets}")
        if np.max(np.abs(m @ m.conj().T - np.eye(len(m)))) > ATOL:
            raise ValueError("gate matrix is not unitary")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True, eq=False)
class Measure:
    """Projective measurement; the outcome index is stored under ``key``."""

    key: str
    targets: tuple[int, ...]
    basis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        vecs = _vecs(self.basis)
        if vecs.shape != (2 ** len(self.targets),) * 2:
            raise ValueError(f"basis of shape {vecs.shape} does not fit targets {self.targets}")
        _check_orthonormal(vecs)
        object.__setattr__(self, "basis", vecs)


@dataclass(frozen=True, eq=False)
class Correct:
    """Unitary chosen by an earlier outcome: ``matrices[outcome]``."""

    key: str
    targets: tuple[int, ...]
    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "matrices", tuple(np.asarray(m, dtype=complex) for m in self.matrices))
        for m in self.matrices:
            Gate(self.targets, m)


Op = Union[Gate, Measure, Correct]


@dataclass(frozen=True, eq=False)
class AttackStrategy:
    name: str
    stage1: tuple[Op, ...] = ()
    forward1: int = 1
    stage2: tuple[Op, ...] = ()
    forward2: int = 2
    ancilla: Optional[PureState] = None
    final: tuple[Op, ...] = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for attr in ("stage1", "stage2", "final"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        n_anc = 0 if self.ancilla is None else self.ancilla.n_qubits
        if n_anc > len(ANCILLA_LABELS):
            raise ValueError(f"at most {len(ANCILLA_LABELS)} ancilla qubits, got {n_anc}")
        ancillas = set(ANCILLA_LABELS[:n_anc])

        held1 = {1} | ancillas
        keys: set[str] = set()
        self._check_program("stage 1", self.stage1, held1, keys)
        if self.forward1 not in held1:
            raise SequentialAccessError(
                f"stage 1 forwards qubit {self.forward1}, which Eve does not hold before qubit 1 leaves"
            )
        held2 = (held1 - {self.forward1}) | {2}
        self._check_program("stage 2", self.stage2, held2, keys)
        if self.forward2 not in held2:
            raise SequentialAccessError(f"stage 2 forwards qubit {self.forward2}, which Eve does not hold")
        held3 = held2 - {self.forward2}
        self._check_program("final", self.final, held3, keys)
        object.__setattr__(self, "_keys", tuple(keys))

    @staticmethod
    def _check_program(stage: str, ops: Sequence[Op], held: set[int], keys: set[str]) -> None:
        for op in ops:
            if not isinstance(op, (Gate, Measure, Correct)):
                raise TypeError(f"{stage}: unsupported operation {op!r}")
            bad = [q for q in op.targets if q not in held]
            if bad:
                raise SequentialAccessError(
                    f"{stage} touches qubit(s) {bad}; Eve holds only {sorted(held)} at that point"
                )
            if len(set(op.targets)) != len(op.targets):
                raise ValueError(f"{stage}: repeated target in {op.targets}")
            if isinstance(op, Measure):
                if op.key in keys:
                    raise ValueError(f"duplicate measurement key {op.key!r}")
                keys.add(op.key)
            elif isinstance(op, Correct) and op.key not in keys:
                raise ValueError(f"{stage}: correction depends on unknown key {op.key!r}")

    @property
    def register(self) -> tuple[int, ...]:
        n_anc = 0 if self.ancilla is None else self.ancilla.n_qubits
        return TRAVEL + ANCILLA_LABELS[:n_anc]

    @property
    def n_measurements(self) -> int:
        return sum(isinstance(op, Measure) for op in self.stage1 + self.stage2 + self.final)

    def programs(self) -> tuple[Op, ...]:
        return self.stage1 + self.stage2 + self.final


# -- catalog -----------------------------------------------------------------

Z_BASIS = np.eye(2, dtype=complex)


def local_basis(theta_deg: float, phi_deg: float = 0.0) -> np.ndarray:
    """Orthonormal qubit basis {cos t|0> + e^{i p} sin t|1>, its complement}."""
    t = math.radians(theta_deg)
    ph = np.exp(1j * math.radians(phi_deg))
    # rows are the two kets
    return np.array(
        [
            [math.cos(t), ph * math.sin(t)],
            [-np.conj(ph) * math.sin(t), math.cos(t)],
        ],
        dtype=complex,
    )


def no_attack() -> AttackStrategy:
    return AttackStrategy("none")


def local_measure_qubit2() -> AttackStrategy:
    return AttackStrategy(
        "local-measure-qubit2",
        stage2=(Measure("q2", (2,), Z_BASIS),),
    )


def _bell_correction(k: int) -> np.ndarray:
    # maps Phi+ on (3, 4) to BELL_BASIS[k] by acting on qubit 4
    return (PAULI_I, PAULI_X, PAULI_X @ PAULI_Z, PAULI_Z)[k]


def ancilla_swap() -> AttackStrategy:
    return AttackStrategy(
        "ancilla-swap",
        ancilla=BELL_BASIS.states[0],
        stage1=(),
        forward1=3,
        stage2=(
            Measure("bell", (1, 2), BELL_BASIS.vectors()),
            Correct("bell", (4,), tuple(_bell_correction(k) for k in range(4))),
        ),
        forward2=4,
    )


def intercept_resend(theta1: Optional[float] = 0.0, theta2: Optional[float] = 0.0,
                     phi1: float = 0.0, phi2: float = 0.0) -> AttackStrategy:
    """Measure each travelling qubit in a local basis and resend the eigenstate.

    ``None`` for an angle leaves that qubit untouched.
    """
    stage1 = () if theta1 is None else (Measure("q1", (1,), local_basis(theta1, phi1)),)
    stage2 = () if theta2 is None else (Measure("q2", (2,), local_basis(theta2, phi2)),)
    return AttackStrategy(
        "intercept-resend",
        stage1=stage1,
        stage2=stage2,
        params={"theta1": theta1, "theta2": theta2, "phi1": phi1, "phi2": phi2},
    )


def catalog() -> dict[str, AttackStrategy]:
    return {
        s.name: s
        for s in (no_attack(), local_measure_qubit2(), ancilla_swap(), intercept_resend(0.0, 0.0))
    }


def _parse_angle(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("off", "none", "-") else float(text)


def strategy_from_spec(spec: str) -> AttackStrategy:
    """``NAME[,key=value...]``, e.g. ``intercept-resend,theta1=off,theta2=45``."""
    name, *rest = [part.strip() for part in spec.split(",") if part.strip()]
    kwargs = {}
    for item in rest:
        if "=" not in item:
            raise ValueError(f"attack parameter {item!r} must be key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        kwargs[key] = value
    if name == "intercept-resend":
        allowed = {"theta1", "theta2", "phi1", "phi2"}
        unknown = set(kwargs) - allowed
        if unknown:
            raise ValueError(f"unknown intercept-resend parameters {sorted(unknown)}")
        return intercept_resend(
            _parse_angle(kwargs.get("theta1", "0")),
            _parse_angle(kwargs.get("theta2", "0")),
            float(kwargs.get("phi1", 0.0)),
            float(kwargs.get("phi2", 0.0)),
        )
    cat = catalog()
    if name not in cat:
        raise ValueError(f"unknown attack {name!r}; choose from {sorted(cat)}")
    if kwargs:
        raise ValueError(f"attack {name!r} takes no parameters")
    return cat[name]


# -- evolution ----------------------------------------------------------------


def initial_register(letter: PureState, strategy: AttackStrategy) -> np.ndarray:
    """Alice's letter on qubits (1, 2) followed by Eve's ancillas."""
    amps = letter.amplitudes
    if strategy.ancilla is not None:
        amps = np.kron(amps, strategy.ancilla.amplitudes)
    return amps.reshape((2,) * len(strategy.register))


def _positions(strategy: AttackStrategy, targets: Iterable[int]) -> list[int]:
    reg = strategy.register
    return [reg.index(q) for q in targets]


def _apply_op(tensor, op: Op, record: dict, strategy: AttackStrategy):
    pos = _positions(strategy, op.targets)
    if isinstance(op, Gate):
        return apply_array(tensor, op.matrix, pos)
    if isinstance(op, Correct):
        return apply_array(tensor, op.matrices[record[op.key]], pos)
    raise TypeError(op)


def enumerate_branches(letter: PureState, strategy: AttackStrategy, cutoff: float = 1e-15):
    """Every measurement branch: list of (probability, record tuple, tensor)."""
    branches = [(1.0, {}, initial_register(letter, strategy))]
    for op in strategy.programs():
        nxt = []
        for prob, record, tensor in branches:
            if isinstance(op, Measure):
                probs, posts = branch_array(tensor, op.basis, _positions(strategy, op.targets))
                for k, (p, post) in enumerate(zip(probs, posts)):
                    if post is None or prob * p <= cutoff:
                        continue
                    nxt.append((prob * float(p), {**record, op.key: k}, post))
            else:
                nxt.append((prob, record, _apply_op(tensor, op, record, strategy)))
        branches = nxt
    keys = [op.key for op in strategy.programs() if isinstance(op, Measure)]
    return [(p, tuple(rec[k] for k in keys), t) for p, rec, t in branches]


def run_attack_batch(letters: np.ndarray, basis: LetterBasis, strategy: AttackStrategy,
                     uniforms: np.ndarray, slot: int = 0):
    """Sample the strategy once per row of ``letters``.

    Measurement number j consumes column ``slot + j`` of ``uniforms``.
    Returns (records, register batch, next free slot); ``records[r, j]`` is
    outcome j of row r.
    """
    init = np.stack([initial_register(s, strategy) for s in basis.states])
    batch = init[letters]
    records = np.zeros((len(letters), strategy.n_measurements), dtype=int)
    column: dict[str, int] = {}
    for op in strategy.programs():
        pos = _positions(strategy, op.targets)
        if isinstance(op, Measure):
            j = len(column)
            k, batch = measure_batch(batch, op.basis, pos, uniforms[:, slot])
            slot += 1
            records[:, j] = k
            column[op.key] = j
        elif isinstance(op, Gate):
            batch = apply_batch(batch, op.matrix, pos)
        else:
            mats = np.stack(op.matrices)[records[:, column[op.key]]]
            batch = apply_batch(batch, mats, pos)
    return records, batch, slot


def bob_outcome_probs(tensor: np.ndarray, strategy: AttackStrategy, vecs: np.ndarray) -> np.ndarray:
    """Letter-basis outcome probabilities for the qubits Bob receives."""
    pos = _positions(strategy, (strategy.forward1, strategy.forward2))
    probs, _ = branch_array(tensor, vecs, pos)
    return probs


def bob_states_batch(batch: np.ndarray, strategy: AttackStrategy, u: np.ndarray) -> np.ndarray:
    """Bob's two-qubit amplitudes, one row per register.

    Eve's leftover qubits are read out in the computational basis first.
    That readout acts on qubits Bob never sees, so it commutes with his
    measurement and leaves his statistics unchanged.
    """
    pos = _positions(strategy, (strategy.forward1, strategy.forward2))
    flat, _, _ = _to_front(batch, pos)
    if flat.shape[2] == 1:
        return flat[:, :, 0]
    weights = (flat.real**2 + flat.imag**2).sum(axis=1)
    col = sample_batch(weights, u)
    rows = np.arange(len(col))
    picked = flat[rows, :, col]
    return picked / np.sqrt(weights[rows, col])[:, None]


# -- exact statistics ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EveStats:
    info_gain: float
    detect_prob: float
    joint: np.ndarray  # p(sent letter, Eve's guess)
    bob_table: np.ndarray  # row i: p(Bob's outcome | letter i)
    guess_table: dict  # measurement record -> ML letter guess
    per_letter_detect: tuple[float, ...]

    def __post_init__(self):
        if not -1e-9 <= self.info_gain <= 2 + 1e-9:
            raise ValueError("info_gain out of range")
        if not -1e-12 <= self.detect_prob <= 1 + 1e-12:
            raise ValueError("detect_prob out of range")

    def guess(self, record: tuple) -> int:
        return self.guess_table.get(record, 0)

    def as_dict(self) -> dict:
        return {
            "info_gain": self.info_gain,
            "detect_prob": self.detect_prob,
            "per_letter_detect": list(self.per_letter_detect),
            "bob_table": self.bob_table.tolist(),
            "joint_letter_guess": self.joint.tolist(),
        }


def exact_eve_stats(b: LetterBasis, a: AttackStrategy) -> EveStats:
    vecs = b.vectors()
    records: dict[tuple, np.ndarray] = {}
    bob = np.zeros((4, 4))
    for i, letter in enumerate(b.states):
        for prob, rec, tensor in enumerate_branches(letter, a):
            records.setdefault(rec, np.zeros(4))[i] += 0.25 * prob
            bob[i] += prob * bob_outcome_probs(tensor, a, vecs)
    # ML guess under a uniform prior; ties go to the lowest letter index
    guess_table = {rec: int(np.argmax(p)) for rec, p in records.items()}
    joint = np.zeros((4, 4))
    for rec, p in records.items():
        joint[:, guess_table[rec]] += p
    joint /= joint.sum()
    per_letter = tuple(float(max(0.0, 1.0 - bob[i, i] / bob[i].sum())) for i in range(4))
    return EveStats(
        info_gain=max(0.0, mutual_information(joint)),
        detect_prob=float(np.mean(per_letter)),
        joint=joint,
        bob_table=bob / bob.sum(axis=1, keepdims=True),
        guess_table=guess_table,
        per_letter_detect=per_letter,
    )


# -- sweeps ----------------------------------------------------------------------


def _grid_values(item: str) -> list:
    item = item.strip()
    if ":" not in item:
        return [_parse_angle(item)]
    start, stop, step = (float(v) for v in item.split(":"))
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(count)]


def parse_grid(spec: str) -> list[dict]:
    """``theta1=0:90:15;theta2=off,0,45`` -> list of parameter dicts.

    Each comma-separated item is an angle, ``off`` (leave the qubit alone)
    or an inclusive ``start:stop:step`` range.
    """
    axes: dict[str, list] = {}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"grid axis {part!r} must be name=values")
        name, values = (s.strip() for s in part.split("=", 1))
        if name not in ("theta1", "theta2", "phi1", "phi2"):
            raise ValueError(f"unknown grid axis {name!r}")
        axes[name] = [v for item in values.split(",") for v in _grid_values(item)]
        if name.startswith("phi") and any(v is None for v in axes[name]):
            raise ValueError("phase axes cannot be off")
    if not axes:
        raise ValueError("empty grid")
    names = sorted(axes)
    return [dict(zip(names, combo)) for combo in product(*(axes[n] for n in names))]


@dataclass(frozen=True)
class SweepResult:
    points: tuple[tuple[dict, EveStats], ...]
    best_info: int
    best_stealth: int


def strategy_sweep(b: LetterBasis, grid: Sequence[dict]) -> SweepResult:
    if not grid:
        raise ValueError("empty grid")
    points = []
    for params in grid:
        strategy = intercept_resend(
            params.get("theta1", 0.0),
            params.get("theta2", 0.0),
            params.get("phi1", 0.0),
            params.get("phi2", 0.0),
        )
        points.append((dict(params), exact_eve_stats(b, strategy)))
    infos = [s.info_gain for _, s in points]
    detects = [s.detect_prob for _, s in points]
    # first index wins ties, keeping the result deterministic
    best_info = max(range(len(points)), key=lambda k: (infos[k], -k))
    best_stealth = min(range(len(points)), key=lambda k: (detects[k], k))
    return SweepResult(tuple(points), best_info, best_stealth)
