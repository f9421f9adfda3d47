"""Sliced-filter evolution and its continuum limits.

A medium is modeled as a stack of thin filters T = 1 + dt K; iterating
rho -> T rho T* converges at first order in dt to the quantum Liouville
equation d rho / dt = K rho + rho K*.  With i*hbar*K = H - i V this covers
the von Neumann (V = 0) and dissipative cases; adding weak mixing terms
sqrt(dt) L_l per slice yields the Lindblad equation in the limit.  Closed
forms use Hermitian eigendecompositions; the Lindblad reference integrator
is classical RK4 on the vectorized master equation with step halving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericalError
from .ops import as_square, hermitian_defect, quantum_value


@dataclass(frozen=True)
class GeneratorModel:
    """Slice generator i*hbar*K = H - i*V with Hermitian H and PSD V."""

    H: np.ndarray
    V: np.ndarray | None = None
    hbar: float = 1.0

    def __post_init__(self):
        h = as_square(self.H, "H")
        if hermitian_defect(h) > 1e-9:
            raise ContractViolation("Hamiltonian must be Hermitian")
        object.__setattr__(self, "H", h)
        if self.V is not None:
            v = as_square(self.V, "V")
            if hermitian_defect(v) > 1e-9:
                raise ContractViolation("dissipative potential must be Hermitian")
            if float(np.linalg.eigvalsh(0.5 * (v + v.conj().T))[0]) < -1e-9:
                raise ContractViolation("dissipative potential must be PSD for a passive medium")
            object.__setattr__(self, "V", v)
        if self.hbar <= 0:
            raise ContractViolation("hbar must be positive")

    def K(self) -> np.ndarray:
        k = -1j * self.H / self.hbar
        if self.V is not None:
            k = k - self.V / self.hbar
        return k


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian, jump operators and nonnegative rates for mixing media."""

    H: np.ndarray
    jump_ops: tuple = ()
    rates: tuple = ()
    hbar: float = 1.0

    def __post_init__(self):
        h = as_square(self.H, "H")
        if hermitian_defect(h) > 1e-9:
            raise ContractViolation("Hamiltonian must be Hermitian")
        jumps = tuple(as_square(l, "jump operator") for l in self.jump_ops)
        gammas = tuple(float(g) for g in self.rates)
        if len(jumps) != len(gammas):
            raise ContractViolation("need one rate per jump operator")
        if any(g < 0 for g in gammas):
            raise ContractViolation(f"rates must be nonnegative, got {gammas}")
        if self.hbar <= 0:
            raise ContractViolation("hbar must be positive")
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "jump_ops", jumps)
        object.__setattr__(self, "rates", gammas)

    @property
    def dim(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.times.size

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def slice_evolution(K, rho0, dt: float, steps: int) -> Trajectory:
    """Iterate rho -> (1 + dt K) rho (1 + dt K)*; first order in dt."""
    if dt <= 0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    k = as_square(K, "K")
    rho = as_square(rho0, "rho0").copy()
    t_op = np.eye(k.shape[0], dtype=complex) + dt * k
    states = [rho]
    for _ in range(steps):
        rho = t_op @ rho @ t_op.conj().T
        states.append(rho)
    return Trajectory(dt * np.arange(steps + 1), np.stack(states))


def evolution_operator(H, t: float, hbar: float = 1.0) -> np.ndarray:
    """Propagator exp(-i H t / hbar) via Hermitian eigendecomposition."""
    h = as_square(H, "H")
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    phases = np.exp(-1j * evals * t / hbar)
    return (evecs * phases) @ evecs.conj().T


def von_neumann_evolve(H, rho0, t: float, hbar: float = 1.0) -> np.ndarray:
    u = evolution_operator(H, t, hbar)
    return u @ as_square(rho0, "rho0") @ u.conj().T


def schrodinger_evolve(H, psi0, t: float, hbar: float = 1.0) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    return evolution_operator(H, t, hbar) @ psi


def spectral_solution(H, psi0, cluster_tol: float = 1e-9):
    """Decompose psi0 into eigencomponents: psi(t) = sum exp(-i t E_k) psi_k.

    Eigenvalues closer than cluster_tol (relative to the spectral spread)
    are grouped into one component, so each psi_k satisfies
    H psi_k = E_k psi_k within tolerance even for degenerate spectra.
    Returns a list of (E_k, psi_k) pairs covering all clusters.
    """
    h = as_square(H, "H")
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    spread = max(float(evals[-1] - evals[0]), 1.0)
    gap = cluster_tol * spread
    components = []
    start = 0
    for i in range(1, evals.size + 1):
        if i == evals.size or evals[i] - evals[i - 1] > gap:
            block = evecs[:, start:i]
            comp = block @ (block.conj().T @ psi)
            components.append((float(np.mean(evals[start:i])), comp))
            start = i
    return components


def liouvillian(model: LindbladModel) -> np.ndarray:
    """Vectorized generator of the Lindblad equation (row-major convention)."""
    d = model.dim
    ident = np.eye(d, dtype=complex)
    h = model.H
    gen = (-1j / model.hbar) * (np.kron(h, ident) - np.kron(ident, h.T))
    for g, l in zip(model.rates, model.jump_ops):
        ll = l.conj().T @ l
        gen += g * (
            np.kron(l, l.conj())
            - 0.5 * np.kron(ll, ident)
            - 0.5 * np.kron(ident, ll.T)
        )
    return gen


def _rk4(gen, v0, t_grid):
    v = v0.copy()
    out = [v0]
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        h = t1 - t0
        k1 = gen @ v
        k2 = gen @ (v + 0.5 * h * k1)
        k3 = gen @ (v + 0.5 * h * k2)
        k4 = gen @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(v)
    return np.stack(out)


def lindblad_evolve(model: LindbladModel, rho0, t: float, dt: float | None = None,
                    tol: float = 1e-8, max_refine: int = 20) -> Trajectory:
    """Reference master-equation solution on a grid of step dt.

    RK4 on the vectorized equation, with the internal substep halved until
    two successive refinements agree to tol at every grid point.
    """
    rho = as_square(rho0, "rho0")
    d = model.dim
    if rho.shape[0] != d:
        raise ContractViolation("initial state does not match the model dimension")
    if t < 0 or (dt is not None and dt <= 0):
        raise ContractViolation("need t >= 0 and dt > 0")
    if dt is None:
        dt = t / 64.0 if t > 0 else 1.0
    n_steps = max(1, int(round(t / dt))) if t > 0 else 0
    times = np.linspace(0.0, t, n_steps + 1)
    if t == 0:
        return Trajectory(times, rho[None, :, :].astype(complex))
    gen = liouvillian(model)
    v0 = rho.reshape(-1).astype(complex)
    substeps = 1
    prev = None
    for _ in range(max_refine):
        grid = np.linspace(0.0, t, n_steps * substeps + 1)
        sol = _rk4(gen, v0, grid)[::substeps]
        if prev is not None and float(np.max(np.abs(sol - prev))) < tol:
            return Trajectory(times, sol.reshape(-1, d, d))
        prev = sol
        substeps *= 2
    raise NumericalError(
        f"Lindblad integrator did not reach tolerance {tol} after {max_refine} refinements"
    )


def sliced_master(model: LindbladModel, rho0, dt: float, steps: int) -> Trajectory:
    """Mixing-filter slices: rho -> T rho T* + dt sum_l gamma_l L_l rho L_l*.

    T = 1 + dt K with K = -i H / hbar - (1/2) sum_l gamma_l L_l* L_l, the
    lossless bookkeeping that makes the continuum limit the Lindblad
    equation; converges to it at first order in dt.
    """
    if dt <= 0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    d = model.dim
    k = -1j * model.H / model.hbar
    for g, l in zip(model.rates, model.jump_ops):
        k = k - 0.5 * g * (l.conj().T @ l)
    t_op = np.eye(d, dtype=complex) + dt * k
    rho = as_square(rho0, "rho0").copy()
    states = [rho]
    for _ in range(steps):
        nxt = t_op @ rho @ t_op.conj().T
        for g, l in zip(model.rates, model.jump_ops):
            nxt = nxt + dt * g * (l @ rho @ l.conj().T)
        rho = nxt
        states.append(rho)
    return Trajectory(dt * np.arange(steps + 1), np.stack(states))


def gibbs_state(H, temperature: float, k_boltzmann: float = 1.0) -> np.ndarray:
    """Canonical equilibrium state exp((E0 - H)/kT) normalized to unit trace."""
    if temperature <= 0:
        raise ContractViolation(f"temperature must be positive, got {temperature}")
    h = as_square(H, "H")
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    weights = np.exp((evals[0] - evals) / (k_boltzmann * temperature))
    weights = weights / weights.sum()
    return (evecs * weights) @ evecs.conj().T


@dataclass(frozen=True)
class SpectralLines:
    omega: np.ndarray  # angular frequencies |E_j - E_k| / hbar
    nu: np.ndarray     # line frequencies omega / (2 pi)


def rydberg_ritz_lines(H, hbar: float = 1.0, tol: float = 1e-9) -> SpectralLines:
    """Distinct level-difference frequencies, zero excluded.

    Differences within tol (relative to the spectral spread) of each other
    are merged into one line.
    """
    h = as_square(H, "H")
    evals = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
    spread = max(float(evals[-1] - evals[0]), 1.0)
    cut = tol * spread
    diffs = sorted(
        abs(a - b) for i, a in enumerate(evals) for b in evals[:i] if abs(a - b) > cut
    )
    merged = []
    for x in diffs:
        if merged and x - merged[-1][-1] <= cut:
            merged[-1].append(x)
        else:
            merged.append([x])
    omega = np.array([np.mean(group) for group in merged]) / hbar
    return SpectralLines(omega, omega / (2.0 * np.pi))


def lie_product(A, B, hbar: float = 1.0) -> np.ndarray:
    """Commutator Lie product (i/hbar)(AB - BA)."""
    a = as_square(A, "A")
    b = as_square(B, "B")
    return (1j / hbar) * (a @ b - b @ a)


def ehrenfest_derivative(rho, H, A, hbar: float = 1.0) -> complex:
    """Time derivative of <A> along the von Neumann flow: <H lie A>."""
    h = as_square(H, "H")
    if hermitian_defect(h) > 1e-9:
        raise ContractViolation("Ehrenfest derivative needs a Hermitian Hamiltonian")
    return quantum_value(rho, lie_product(h, A, hbar))


def poisson_bracket(A, B, rho, hbar: float = 1.0) -> complex:
    """Induced Lie product of the quantum values <A>, <B>: <A lie B>."""
    return quantum_value(rho, lie_product(A, B, hbar))
