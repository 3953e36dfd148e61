"""Exact state algebra for registers of one to four qubits.

Qubit ordering is big-endian: qubit 0 is the most significant tensor
factor. Entropies are in bits. ``targets`` arguments are 0-based positions
in the register.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ATOL = 1e-9
EIG_CUTOFF = 1e-12
MAX_DIM = 16


class StateError(ValueError):
    pass


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _n_qubits(dim: int) -> int:
    return dim.bit_length() - 1


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if not _is_power_of_two(len(amps)) or len(amps) > MAX_DIM:
            raise StateError(f"dimension {len(amps)} is not a power of two <= {MAX_DIM}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ATOL:
            raise StateError(f"state is not normalized (norm^2 = {norm:.12g})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(amps / norm)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    @property
    def n_qubits(self) -> int:
        return _n_qubits(self.dim)

    def inner(self, other: "PureState") -> complex:
        """<self|other>"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.inner(other)) ** 2

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self):
        return f"PureState({np.round(self.amplitudes, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError(f"density matrix must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > ATOL:
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > ATOL:
            raise StateError(f"density matrix trace is {np.trace(m).real:.12g}, expected 1")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise StateError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True, eq=False)
class UnitaryMap:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError(f"unitary must be square, got shape {m.shape}")
        if np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) > ATOL:
            raise StateError("matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "UnitaryMap") -> "UnitaryMap":
        return UnitaryMap(self.matrix @ other.matrix)


_SINGLE = {
    "0": (1, 0),
    "1": (0, 1),
    "H": (1, 0),
    "V": (0, 1),
    "+": (1 / np.sqrt(2), 1 / np.sqrt(2)),
    "-": (1 / np.sqrt(2), -1 / np.sqrt(2)),
}


def ket(label: str) -> PureState:
    """Product state from a label such as ``"HV"``, ``"0+"`` or ``"-1"``."""
    amps = np.array([1.0], dtype=complex)
    for ch in label:
        try:
            amps = np.kron(amps, np.array(_SINGLE[ch], dtype=complex))
        except KeyError:
            raise StateError(f"unknown single-qubit label {ch!r}") from None
    return PureState(amps)


def tensor_product(a: PureState, b: PureState) -> PureState:
    if a.dim * b.dim > MAX_DIM:
        raise StateError(f"register of dimension {a.dim * b.dim} exceeds {MAX_DIM}")
    return PureState(np.kron(a.amplitudes, b.amplitudes))


def kron_all(*states: PureState) -> PureState:
    out = states[0]
    for s in states[1:]:
        out = tensor_product(out, s)
    return out


def partial_trace(rho: DensityMatrix, keep: Sequence[int], dims: Sequence[int]) -> DensityMatrix:
    """Reduce ``rho`` onto the factors listed in ``keep`` (0-based, any order).

    The kept factors appear in ascending order in the result.
    """
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.dim:
        raise StateError(f"factor dimensions {dims} do not multiply to {rho.dim}")
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise StateError(f"kept factors {keep} out of range for {len(dims)} factors")
    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    t = rho.matrix.reshape(dims + dims)
    # row axes i, column axes n + i; contract traced pairs
    perm = keep + traced + [n + k for k in keep] + [n + i for i in traced]
    t = t.transpose(perm)
    dk = int(np.prod([dims[k] for k in keep]))
    dt = int(np.prod([dims[i] for i in traced]))
    t = t.reshape(dk, dt, dk, dt)
    return DensityMatrix(np.einsum("ajbj->ab", t))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    evals = rho.eigenvalues()
    if evals.min() < -ATOL:
        raise StateError("density matrix is not positive semidefinite")
    evals = evals[evals > EIG_CUTOFF]
    return float(max(0.0, -np.sum(evals * np.log2(evals))))


def schmidt_coefficients(psi: PureState) -> np.ndarray:
    if psi.dim != 4:
        raise StateError(f"expected a two-qubit state, got dimension {psi.dim}")
    return np.linalg.svd(psi.amplitudes.reshape(2, 2), compute_uv=False)


def concurrence(psi: PureState) -> float:
    s = schmidt_coefficients(psi)
    return float(min(1.0, 2.0 * s[0] * s[1]))


def _check_orthonormal(vectors: np.ndarray) -> None:
    gram = vectors.conj() @ vectors.T
    if np.max(np.abs(gram - np.eye(len(vectors)))) > ATOL:
        raise StateError("measurement basis is not orthonormal")


def _basis_array(basis: Sequence[PureState] | np.ndarray) -> np.ndarray:
    if isinstance(basis, np.ndarray):
        return np.asarray(basis, dtype=complex)
    return np.array([b.amplitudes for b in basis], dtype=complex)


def _sample_index(probs, rng) -> int:
    # inverse CDF over ascending index; deterministic tie-breaking
    probs = [float(p) for p in probs]
    target = rng.random() * sum(probs)
    acc = 0.0
    last = 0
    for k, p in enumerate(probs):
        if p <= 0.0:
            continue
        acc += p
        last = k
        if target < acc:
            return k
    return last


def projective_measure(psi: PureState, basis: Sequence[PureState], rng) -> tuple[int, PureState]:
    """Measure the whole register; returns (outcome, post-measurement basis state)."""
    vecs = _basis_array(basis)
    if vecs.shape != (psi.dim, psi.dim):
        raise StateError(f"basis must hold {psi.dim} vectors of dimension {psi.dim}")
    _check_orthonormal(vecs)
    probs = np.abs(vecs.conj() @ psi.amplitudes) ** 2
    k = _sample_index(probs, rng)
    return k, PureState(vecs[k])


# Array kernels. The register is an ndarray of shape (2,) * n; these skip
# validation and are used on the protocol hot path.


def apply_array(tensor: np.ndarray, matrix: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    k = len(targets)
    op = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    # tensordot puts the target axes first; restore register order
    rest = [i for i in range(tensor.ndim) if i not in targets]
    order = list(targets) + rest
    return np.moveaxis(out, list(range(tensor.ndim)), order)


def _project(tensor: np.ndarray, vecs: np.ndarray, targets: Sequence[int]):
    n = tensor.ndim
    rest = [i for i in range(n) if i not in targets]
    perm = list(targets) + rest
    m = tensor.transpose(perm).reshape(len(vecs), -1)
    coeff = vecs.conj() @ m
    probs = (coeff.real**2 + coeff.imag**2).sum(axis=1)
    return coeff, probs, perm


def _collapse(vec: np.ndarray, row: np.ndarray, prob: float, perm: list[int]) -> np.ndarray:
    n = len(perm)
    post = np.outer(vec, row / np.sqrt(prob)).reshape((2,) * n)
    return post.transpose(np.argsort(perm))


def branch_array(tensor: np.ndarray, vecs: np.ndarray, targets: Sequence[int]):
    """Project onto each basis vector of the target qubits.

    Returns (probs, posts) where posts[k] is the normalized post-measurement
    tensor for outcome k (``None`` when the probability vanishes).
    """
    coeff, probs, perm = _project(tensor, vecs, targets)
    posts = [
        _collapse(vecs[k], coeff[k], probs[k], perm) if probs[k] > 0.0 else None
        for k in range(len(vecs))
    ]
    return probs, posts


def measure_array(tensor: np.ndarray, vecs: np.ndarray, targets: Sequence[int], rng):
    coeff, probs, perm = _project(tensor, vecs, targets)
    k = _sample_index(probs, rng)
    return k, _collapse(vecs[k], coeff[k], probs[k], perm)


def _check_targets(n: int, targets: Sequence[int], dim: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets) or any(t < 0 or t >= n for t in targets):
        raise StateError(f"invalid targets {targets} for a {n}-qubit register")
    if 2 ** len(targets) != dim:
        raise StateError(f"operator of dimension {dim} does not fit {len(targets)} target qubits")
    return targets


def apply_unitary(state: PureState, u: UnitaryMap, targets: Sequence[int]) -> PureState:
    n = state.n_qubits
    targets = _check_targets(n, targets, u.dim)
    out = apply_array(state.amplitudes.reshape((2,) * n), u.matrix, targets)
    return PureState(out.reshape(-1))


def measurement_branches(
    state: PureState, basis: Sequence[PureState], targets: Sequence[int]
) -> list[tuple[int, float, PureState]]:
    """All outcomes of measuring ``targets`` in ``basis`` with nonzero probability."""
    vecs = _basis_array(basis)
    n = state.n_qubits
    targets = _check_targets(n, targets, vecs.shape[1])
    _check_orthonormal(vecs)
    probs, posts = branch_array(state.amplitudes.reshape((2,) * n), vecs, targets)
    return [
        (k, float(p), PureState(post.reshape(-1)))
        for k, (p, post) in enumerate(zip(probs, posts))
        if post is not None and p > EIG_CUTOFF
    ]


def measure_subsystem(
    state: PureState, basis: Sequence[PureState], targets: Sequence[int], rng
) -> tuple[int, PureState]:
    vecs = _basis_array(basis)
    n = state.n_qubits
    targets = _check_targets(n, targets, vecs.shape[1])
    _check_orthonormal(vecs)
    k, post = measure_array(state.amplitudes.reshape((2,) * n), vecs, targets, rng)
    return k, PureState(post.reshape(-1))


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def random_unitary(dim: int, rng: np.random.Generator) -> UnitaryMap:
    """Haar-ish unitary from QR of a complex Gaussian matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return UnitaryMap(q * (d / np.abs(d)))


def random_state(dim: int, rng: np.random.Generator) -> PureState:
    return PureState.normalized(rng.normal(size=dim) + 1j * rng.normal(size=dim))


# Batched kernels: axis 0 indexes independent registers (protocol steps),
# the remaining axes are qubits. Row i's result depends only on row i.


def _to_front(batch: np.ndarray, targets: Sequence[int]):
    k = len(targets)
    src = [1 + t for t in targets]
    moved = np.moveaxis(batch, src, list(range(1, 1 + k)))
    return moved.reshape(batch.shape[0], 2**k, -1), src, moved.shape


def _from_front(flat: np.ndarray, src: list[int], shape) -> np.ndarray:
    k = len(src)
    return np.moveaxis(flat.reshape(shape), list(range(1, 1 + k)), src)


def apply_batch(batch: np.ndarray, matrix: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """``matrix`` is (d, d) for all rows or (rows, d, d) per row."""
    flat, src, shape = _to_front(batch, targets)
    return _from_front(matrix @ flat, src, shape)


def sample_batch(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF sampling with the same rule as ``_sample_index``."""
    cdf = np.cumsum(probs, axis=1)
    target = u * cdf[:, -1]
    k = (cdf <= target[:, None]).sum(axis=1)
    positive = probs > 0
    last = probs.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
    return np.minimum(k, last)


def measure_batch(batch: np.ndarray, vecs: np.ndarray, targets: Sequence[int], u: np.ndarray):
    flat, src, shape = _to_front(batch, targets)
    coeff = vecs.conj() @ flat
    probs = (coeff.real**2 + coeff.imag**2).sum(axis=2)
    k = sample_batch(probs, u)
    rows = np.arange(len(k))
    kept = coeff[rows, k, :] / np.sqrt(probs[rows, k])[:, None]
    post = vecs[k][:, :, None] * kept[:, None, :]
    return k, _from_front(post, src, shape)
