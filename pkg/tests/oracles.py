"""Independent reference computations.

Plain density-matrix / Kraus-operator formulas written without touching the
package's branch-enumeration engine. Only numpy is used.
"""

import math

import numpy as np

S2 = 1 / math.sqrt(2)
BELL = np.array(
    [
        [S2, 0, 0, S2],   # Phi+
        [0, S2, S2, 0],   # Psi+
        [0, S2, -S2, 0],  # Psi-
        [S2, 0, 0, -S2],  # Phi-
    ],
    dtype=complex,
)


def entropy_bits(matrix):
    w = np.linalg.eigvalsh(matrix)
    w = w[w > 1e-14]
    return float(-(w * np.log2(w)).sum())


def qubit_projectors(theta_deg, phi_deg=0.0):
    t = math.radians(theta_deg)
    ph = np.exp(1j * math.radians(phi_deg))
    v0 = np.array([math.cos(t), ph * math.sin(t)])
    v1 = np.array([-np.conj(ph) * math.sin(t), math.cos(t)])
    return [np.outer(v, v.conj()) for v in (v0, v1)]


def dephase(rho, projectors, qubit):
    """Non-selective measurement of one qubit of a two-qubit state."""
    eye = np.eye(2)
    out = np.zeros_like(rho)
    for p in projectors:
        k = np.kron(p, eye) if qubit == 0 else np.kron(eye, p)
        out += k @ rho @ k
    return out


def intercept_resend_detect(letters, theta1, theta2, phi1=0.0, phi2=0.0):
    """Letter-averaged probability Bob's letter measurement disagrees."""
    total = 0.0
    for psi in letters:
        rho = np.outer(psi, psi.conj())
        if theta1 is not None:
            rho = dephase(rho, qubit_projectors(theta1, phi1), 0)
        if theta2 is not None:
            rho = dephase(rho, qubit_projectors(theta2, phi2), 1)
        total += 1 - float(np.real(psi.conj() @ rho @ psi))
    return total / len(letters)


def ancilla_swap_detect(letters):
    """Bob receives Bell state k with the probability Eve's Bell measurement gives k."""
    total = 0.0
    for psi in letters:
        weights = np.abs(BELL.conj() @ psi) ** 2
        rho_bob = sum(w * np.outer(b, b.conj()) for w, b in zip(weights, BELL))
        total += 1 - float(np.real(psi.conj() @ rho_bob @ psi))
    return total / len(letters)


def mutual_information_bits(joint):
    joint = np.asarray(joint, dtype=float)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mi = 0.0
    for i in range(joint.shape[0]):
        for j in range(joint.shape[1]):
            if joint[i, j] > 0:
                mi += joint[i, j] * math.log2(joint[i, j] / (px[i] * py[j]))
    return mi
