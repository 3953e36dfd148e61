"""End-to-end key distribution engine with sequential-access timing checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import optics
from .attacks import (
    AttackStrategy,
    EveStats,
    bob_states_batch,
    exact_eve_stats,
    no_attack,
    run_attack_batch,
    strategy_from_spec,
)
from .basisclass import BASIS_202, LetterBasis, load_basis, parse_basis
from .infotheory import ProtocolCost, efficiency
from .qstate import measure_batch
from .rng import derive_rng, step_uniforms

STEP_SLOTS = 8


class SequentialAccessViolation(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TimingParams:
    L: float = 100.0
    l: float = 60.0
    speed: float = 1.0

    def __post_init__(self):
        if self.L <= 0 or self.l <= 0 or self.speed <= 0:
            raise ConfigError("path length, ring length and speed must be positive")


@dataclass(frozen=True)
class Schedule:
    events: tuple[tuple[float, str], ...]
    eve_holds_qubit1: tuple[float, float]
    eve_holds_qubit2: tuple[float, float]
    arrival: float
    # announced over the classical channel before the run
    pair_delay: float


def timing_schedule(t: TimingParams) -> Schedule:
    if not t.l > t.L / 2:
        raise SequentialAccessViolation(
            f"storage ring length l={t.l} must exceed half the path length L/2={t.L / 2}"
        )
    v = t.speed
    q1_protected = t.L / v
    q1_exit = (t.L + t.l) / v
    q2_release = t.l / v
    q2_arrival = (t.l + t.L) / v
    if not math.isclose(q1_exit, q2_arrival):
        raise SequentialAccessViolation("qubits would not reach the analyzer together")
    events = (
        (0.0, "qubit 1 leaves Alice"),
        (q2_release, "qubit 2 leaves Alice's storage ring"),
        (q1_protected, "qubit 1 enters Bob's protected storage ring"),
        (q1_exit, "qubit 1 leaves Bob's storage ring"),
        (q2_arrival, "qubit 2 reaches Bob"),
    )
    return Schedule(
        events=tuple(sorted(events)),
        eve_holds_qubit1=(0.0, q1_protected),
        eve_holds_qubit2=(q2_release, q2_arrival),
        arrival=q2_arrival,
        pair_delay=q2_arrival,
    )


@dataclass(frozen=True)
class ProtocolConfig:
    steps: int = 1000
    basis: LetterBasis = BASIS_202
    attack: AttackStrategy = field(default_factory=no_attack)
    test_fraction: float = 0.5
    seed: int = 42
    timing: TimingParams = TimingParams()
    # "optics" (linear-optics analyzer), "projective" (ideal letter measurement)
    # or "auto" (optics when the analyzer discriminates the basis)
    bob: str = "auto"
    # how the basis and attack were named in the config document
    basis_source: str = "202"
    attack_spec: str = "none"

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if not 0.0 <= self.test_fraction <= 1.0:
            raise ConfigError("test_fraction must lie in [0, 1]")
        if self.bob not in ("auto", "optics", "projective"):
            raise ConfigError(f"unknown Bob measurement {self.bob!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


CONFIG_FIELDS = ("steps", "basis", "attack", "test_fraction", "seed", "timing", "bob")


def config_from_dict(d: dict, base_dir: Optional[Path] = None) -> ProtocolConfig:
    unknown = set(d) - set(CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    kwargs = {}
    if "steps" in d:
        kwargs["steps"] = int(d["steps"])
    if "test_fraction" in d:
        kwargs["test_fraction"] = float(d["test_fraction"])
    if "seed" in d:
        kwargs["seed"] = int(d["seed"])
    if "bob" in d:
        kwargs["bob"] = str(d["bob"])
    if "timing" in d:
        t = dict(d["timing"])
        bad = set(t) - {"L", "l", "speed"}
        if bad:
            raise ConfigError(f"unknown timing fields {sorted(bad)}")
        kwargs["timing"] = TimingParams(**{k: float(v) for k, v in t.items()})
    if "basis" in d:
        src = d["basis"]
        if isinstance(src, list):
            text = "\n".join(" ".join(str(x) for x in row) for row in src)
            kwargs["basis"] = parse_basis(text)
            kwargs["basis_source"] = src
        else:
            path = Path(src)
            if base_dir is not None and not path.is_absolute() and (base_dir / path).exists():
                path = base_dir / path
            kwargs["basis"] = load_basis(str(path) if path.exists() else src)
            kwargs["basis_source"] = src
    if "attack" in d:
        kwargs["attack"] = strategy_from_spec(str(d["attack"]))
        kwargs["attack_spec"] = str(d["attack"])
    return ProtocolConfig(**kwargs)


def config_to_dict(c: ProtocolConfig) -> dict:
    return {
        "steps": c.steps,
        "basis": c.basis_source,
        "attack": c.attack_spec,
        "test_fraction": c.test_fraction,
        "seed": c.seed,
        "timing": {"L": c.timing.L, "l": c.timing.l, "speed": c.timing.speed},
        "bob": c.bob,
    }


def load_config(path: str | Path) -> ProtocolConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(data, base_dir=path.parent)


@dataclass(frozen=True)
class StepRecord:
    step: int
    letter: int
    letter_bits: str
    pattern: Optional[str]  # click pattern, or None on the projective path
    inferred: Optional[int]  # None means the analyzer rejected the pattern
    inferred_bits: Optional[str]
    tested: bool
    mismatch: bool
    eve_guess: int

    def csv_row(self) -> list:
        return [
            self.step,
            self.letter_bits,
            self.pattern or "-",
            self.inferred_bits or "reject",
            int(self.tested),
            int(self.mismatch),
        ]


TRANSCRIPT_COLUMNS = ("step", "letter_bits", "pattern", "inferred_bits", "tested", "mismatch")


class ClassicalChannel:
    """Public, append-only log; anyone may read it, nobody may edit it."""

    def __init__(self):
        self._entries: list[tuple] = []

    def announce(self, *entry) -> None:
        self._entries.append(tuple(entry))

    @property
    def entries(self) -> tuple[tuple, ...]:
        return tuple(self._entries)


@dataclass(frozen=True)
class RunSummary:
    steps: int
    alice_key: str
    bob_key: str
    tested: int
    mismatches: int
    detected: bool
    cost: ProtocolCost
    efficiency: float
    bob_path: str
    eve_guess_rate: float
    rejected: int

    @property
    def mismatch_rate(self) -> float:
        return self.mismatches / self.tested if self.tested else 0.0

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "tested_pairs": self.tested,
            "mismatches": self.mismatches,
            "mismatch_rate": self.mismatch_rate,
            "detected": self.detected,
            "rejected": self.rejected,
            "key_length": len(self.alice_key),
            "keys_equal": self.alice_key == self.bob_key,
            "alice_key": self.alice_key,
            "bob_key": self.bob_key,
            "b_s": float(self.cost.b_s),
            "q_t": float(self.cost.q_t),
            "b_t": float(self.cost.b_t),
            "efficiency": float(self.efficiency),
            "bob_path": self.bob_path,
            "eve_guess_rate": self.eve_guess_rate,
        }


@dataclass(frozen=True)
class RunResult:
    summary: RunSummary
    records: tuple[StepRecord, ...]
    channel: tuple[tuple, ...]
    eve: EveStats
    schedule: Schedule


# b_s = q_t = log2(4) and nothing classical per step
PROTOCOL_COST = ProtocolCost(2, 2, 0)


class _Engine:
    def __init__(self, config: ProtocolConfig):
        self.config = config
        if config.bob == "auto":
            self.path = "optics" if optics.analyzer_discriminates(config.basis) else "projective"
        else:
            self.path = config.bob
        self.eve = exact_eve_stats(config.basis, config.attack)
        self.uniforms = step_uniforms(config.seed, config.steps, STEP_SLOTS)

    def simulate(self, indices: np.ndarray) -> dict[str, np.ndarray]:
        """Outcomes for the given steps; row r depends only on step indices[r]."""
        attack, basis = self.config.attack, self.config.basis
        u = self.uniforms[indices]
        letters = np.minimum((u[:, 0] * 4).astype(int), 3)
        records, batch, slot = run_attack_batch(letters, basis, attack, u, slot=1)
        if self.path == "optics":
            amps = bob_states_batch(batch, attack, u[:, slot])
            probs = optics.click_probs_batch(amps)
            patterns = optics.sample_clicks_batch(probs, u[:, slot + 1])
            inferred = optics.DECISION_TABLE[patterns]
        else:
            pos = [attack.register.index(q) for q in (attack.forward1, attack.forward2)]
            inferred, _ = measure_batch(batch, basis.vectors(), pos, u[:, slot])
            patterns = np.full(len(indices), -1)
        guesses = np.array([self.eve.guess(tuple(r)) for r in records.tolist()], dtype=int)
        return {"letters": letters, "patterns": patterns, "inferred": inferred, "guesses": guesses}


def simulate_steps(config: ProtocolConfig, indices=None) -> dict[str, np.ndarray]:
    """Raw per-step outcomes; any subset, in any order, reproduces the full run."""
    indices = np.arange(config.steps) if indices is None else np.asarray(indices, dtype=int)
    return _Engine(config).simulate(indices)


def select_tests(config: ProtocolConfig) -> np.ndarray:
    n_test = math.ceil(config.test_fraction * config.steps)
    order = derive_rng(config.seed, 1).permutation(config.steps)
    return np.sort(order[:n_test])


def run_protocol(config: ProtocolConfig) -> RunResult:
    schedule = timing_schedule(config.timing)
    engine = _Engine(config)
    labels = config.basis.labels
    channel = ClassicalChannel()
    channel.announce("timing", schedule.arrival, schedule.pair_delay)

    out = engine.simulate(np.arange(config.steps))
    outcomes = zip(
        out["letters"].tolist(), out["patterns"].tolist(), out["inferred"].tolist(), out["guesses"].tolist()
    )

    tested_idx = select_tests(config)
    tested = np.zeros(config.steps, dtype=bool)
    tested[tested_idx] = True
    channel.announce("test-steps", tuple(int(i) for i in tested_idx))

    records = []
    alice_key, bob_key = [], []
    mismatches = rejected = eve_hits = 0
    for i, (letter, pattern_idx, inferred, guess) in enumerate(outcomes):
        pattern = str(optics.ALL_PATTERNS[pattern_idx]) if pattern_idx >= 0 else None
        inferred = inferred if inferred >= 0 else None
        mismatch = False
        bob_bits = labels[inferred] if inferred is not None else None
        if inferred is None:
            rejected += 1
        if tested[i]:
            mismatch = inferred != letter
            mismatches += mismatch
            channel.announce("compare", i, labels[letter], bob_bits)
        elif inferred is not None:
            alice_key.append(labels[letter])
            bob_key.append(bob_bits)
        eve_hits += guess == letter
        records.append(
            StepRecord(i, letter, labels[letter], pattern, inferred, bob_bits, bool(tested[i]), mismatch, guess)
        )

    summary = RunSummary(
        steps=config.steps,
        alice_key="".join(alice_key),
        bob_key="".join(bob_key),
        tested=int(tested.sum()),
        mismatches=mismatches,
        detected=mismatches > 0,
        cost=PROTOCOL_COST,
        efficiency=efficiency(PROTOCOL_COST),
        bob_path=engine.path,
        eve_guess_rate=eve_hits / config.steps,
        rejected=rejected,
    )
    return RunResult(summary, tuple(records), channel.entries, engine.eve, schedule)


def detection_curve(p: float, n_max: int) -> list[float]:
    """Probability of catching Eve after N = 1..n_max independent tests."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"detection probability {p} outside [0, 1]")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    return [1.0 - (1.0 - p) ** n for n in range(1, n_max + 1)]


def transcript_lines(records) -> list[str]:
    lines = [",".join(TRANSCRIPT_COLUMNS)]
    lines += [",".join(str(v) for v in r.csv_row()) for r in records]
    return lines
