"""Small density matrices, trace distance, BB84 measurement entropy and the
Markov-chain state decomposition check."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .entropy import hmin, hmin_smooth

MAX_DIM = 64
HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = -1e-9
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite complex matrix."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("density matrix must be square")
        if a.shape[0] > MAX_DIM:
            raise ValueError("dimension above 64")
        if np.abs(a - a.conj().T).max() > HERM_TOL:
            raise ValueError("not Hermitian")
        if abs(np.trace(a) - 1) > TRACE_TOL:
            raise ValueError("trace differs from 1")
        if np.linalg.eigvalsh(a).min() < PSD_TOL:
            raise ValueError("not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def random(cls, dim: int, rng, rank: int | None = None) -> "DensityMatrix":
        """Ginibre-distributed mixed state of the given rank (full by default)."""
        g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
        rho = g @ g.conj().T
        return cls(rho / np.trace(rho).real)


def _mat(x) -> np.ndarray:
    return x.data if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of rho - sigma."""
    a, b = _mat(rho), _mat(sigma)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    diff = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def haar_state(n_qubits: int, rng) -> np.ndarray:
    v = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


# --------------------------------------------------------------------------
# BB84 measurement of an n-qubit state in a random basis

def measurement_table(psi) -> np.ndarray:
    """P(x, theta) for measuring psi in basis theta chosen uniformly.

    Row index x and column index theta are both n-bit integers, qubit 0 the
    most significant bit; theta bit 1 means the Hadamard basis.
    """
    psi = np.asarray(psi, dtype=complex)
    n = int(round(math.log2(psi.size)))
    if psi.size != 1 << n or n > 5:
        raise ValueError("state must hold between 1 and 5 qubits")
    if abs(np.vdot(psi, psi).real - 1) > 1e-9:
        raise ValueError("state is not normalised")
    table = np.empty((1 << n, 1 << n))
    for theta, bases in enumerate(itertools.product((0, 1), repeat=n)):
        u = np.array([[1.0]], dtype=complex)
        for b in bases:
            u = np.kron(u, HADAMARD if b else np.eye(2))
        # H is real symmetric, so <x_theta|psi> = (U psi)_x
        table[:, theta] = np.abs(u @ psi) ** 2 / (1 << n)
    return table


def exact_measurement_entropy(psi, eps: float = 0.0) -> tuple[float, float]:
    """(Hmin(X|Theta), Hmin^eps(X|Theta)) for a pure state of up to 5 qubits."""
    t = measurement_table(psi)
    return hmin(t), hmin_smooth(t, eps=eps)


# --------------------------------------------------------------------------
# Markov-chain state X <-> Y <-> E

@dataclass(frozen=True)
class MarkovReport:
    p_event: float
    tau_min_eig: float
    tau_trace: float
    tau_form_residual: float
    identity_residual: float
    split_residual: float | None

    @property
    def tau_valid(self) -> bool:
        return self.tau_min_eig >= PSD_TOL and abs(self.tau_trace - 1) <= 1e-9

    def holds(self, tol: float = 1e-9) -> bool:
        ok = self.tau_valid and self.identity_residual <= tol and self.tau_form_residual <= tol
        return ok and (self.split_residual is None or self.split_residual <= tol)


def markov_state(p_xy: np.ndarray, rho_y) -> np.ndarray:
    """sum_{x,y} P(x,y) |x><x| (x) |y><y| (x) rho_E^y as a dense matrix."""
    nx, ny = p_xy.shape
    de = rho_y[0].shape[0]
    blocks = np.zeros((nx * ny, de, de), dtype=complex)
    for x in range(nx):
        for y in range(ny):
            blocks[x * ny + y] = p_xy[x, y] * rho_y[y]
    return _block_diag(blocks)


def _block_diag(blocks) -> np.ndarray:
    k, de, _ = blocks.shape
    out = np.zeros((k * de, k * de), dtype=complex)
    for i in range(k):
        out[i * de:(i + 1) * de, i * de:(i + 1) * de] = blocks[i]
    return out


def _conditional_y_states(p_xy, event, rho_in, rho_out, p_weight):
    """rho_E^y given the event (or its complement) and the y-marginal mixture."""
    ny = p_xy.shape[1]
    rho_y = []
    for y in range(ny):
        py = p_xy[:, y].sum()
        pe = (p_weight[:, y]).sum()
        if py <= 0:
            rho_y.append(rho_in[y])
            continue
        frac = pe / py
        rho_y.append(frac * rho_in[y] + (1 - frac) * rho_out[y])
    return rho_y


def markov_decompose_check(p_xy, event, rho_y, rho_y_event=None) -> MarkovReport:
    """Check the event decomposition of the Markov-chain state.

    Parameters
    ----------
    p_xy : (nx, ny) array
        Joint law of the classical X, Y.
    event : (nx, ny) array
        P[event | x, y]; 0/1 entries give a deterministic event.
    rho_y : list of (de, de) arrays
        E's state given y.  Used for both branches unless ``rho_y_event``
        supplies a pair (states given y and the event, given y and not).

    Returns a report on tau = (rho - p^2 rho_event) / (1 - p^2): its smallest
    eigenvalue and trace, its distance from the explicit mixture form, and,
    when the event is independent of (X, Y), the residual of the convex split
    rho = p rho_event + (1 - p) rho_not_event.
    """
    p_xy = np.asarray(p_xy, dtype=float)
    event = np.asarray(event, dtype=float)
    if p_xy.shape != event.shape or (event < 0).any() or (event > 1).any():
        raise ValueError("event table must match P_XY with entries in [0, 1]")
    if abs(p_xy.sum() - 1) > 1e-12 or (p_xy < 0).any():
        raise ValueError("P_XY is not a distribution")
    if p_xy.size * rho_y[0].shape[0] > 16 * 16:
        raise ValueError("state dimension above the supported size")
    rho_y = [DensityMatrix(r).data for r in rho_y]
    if rho_y_event is None:
        r_in, r_out = rho_y, rho_y
    else:
        r_in = [DensityMatrix(r).data for r in rho_y_event[0]]
        r_out = [DensityMatrix(r).data for r in rho_y_event[1]]

    joint_in = p_xy * event
    joint_out = p_xy * (1 - event)
    p = float(joint_in.sum())
    if not 0 < p < 1 - 1e-12:
        if p >= 1 - 1e-12:
            # the event is certain: both identities read rho = rho
            return MarkovReport(1.0, 1.0, 1.0, 0.0, 0.0, 0.0)
        raise ValueError("event has probability zero")
    # E's y-state of the full state mixes both branches
    rho_full_y = _conditional_y_states(p_xy, event, r_in, r_out, joint_in)
    rho = markov_state(p_xy, rho_full_y)
    p_in, p_out = joint_in / p, joint_out / (1 - p)
    rho_in = markov_state(p_in, r_in)
    rho_out = markov_state(p_out, r_out)

    tau = (rho - p * p * rho_in) / (1 - p * p)
    tau = (tau + tau.conj().T) / 2
    # explicit mixture form, from expanding P_XY and rho^y with p and 1-p
    q = 1 - p
    explicit = (p * q * markov_state(p_in, r_out) + q * p * markov_state(p_out, r_in)
                + q * q * rho_out) / (1 - p * p)
    identity = np.abs(rho - (p * p * rho_in + (1 - p * p) * explicit)).max()
    form = np.abs(tau - explicit).max()

    independent = np.allclose(event, p, atol=1e-15)
    split = float(np.abs(rho - (p * rho_in + q * rho_out)).max()) if independent else None
    return MarkovReport(p, float(np.linalg.eigvalsh(tau).min()), float(np.trace(tau).real),
                        float(form), float(identity), split)
