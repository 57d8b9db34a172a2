"""Lindblad generator and solvers for the four-level trion system.

The generator acts on row-major vectorised 4x4 density matrices
(vec(rho)[4*i + j] = rho[i, j]) and is expressed in angular-frequency units
(rad/s).  Dissipative channels: two vertical radiative decays at
gamma_vertical, two diagonal (spin-flipping) decays at gamma_diagonal,
ground-state spin flips at 1/(2*t1_spin) + kappa/2 in each direction, and
pure dephasing of all four optical coherences at gamma_dephasing.

Lasers couple coherently to the two vertical transitions only; each vertical
transition may be driven by at most one laser (otherwise no time-independent
rotating frame exists and :class:`IncompatibleFramesError` is raised, in
which case callers fall back to the classical rate-equation path where
scattering rates add incoherently).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm as _expm

from .constants import HBAR_EVS
from .errors import DegenerateKernelError, IncompatibleFramesError, PositivityError
from .qdcore import (
    Branch,
    DensityMatrix4,
    DeviceModel,
    LaserField,
    STATE_DOWN,
    STATE_TRION_DOWN,
    STATE_TRION_UP,
    STATE_UP,
    SystemParams,
    cotunneling_rate,
    transition_energy,
)

__all__ = [
    "DriveAssignment",
    "Liouvillian",
    "RateMatrix4",
    "effective_cutoff",
    "laser_assignments",
    "frames_compatible",
    "build_liouvillian",
    "steady_state",
    "propagate",
    "scattering_rate",
    "rate_matrix",
    "rate_steady_populations",
]

TRACE_INDICES = np.array([0, 5, 10, 15])

_GROUND = {Branch.BLUE: STATE_UP, Branch.RED: STATE_DOWN}
_EXCITED = {Branch.BLUE: STATE_TRION_UP, Branch.RED: STATE_TRION_DOWN}
_DIAG_GROUND = {Branch.BLUE: STATE_DOWN, Branch.RED: STATE_UP}

_I4 = np.eye(4)


def _ket_bra(i: int, j: int) -> np.ndarray:
    m = np.zeros((4, 4))
    m[i, j] = 1.0
    return m


def _dissipator(jump: np.ndarray) -> np.ndarray:
    """Superoperator of D[J]rho = J rho J+ - {J+J, rho}/2 (row-major vec)."""
    jdj = jump.conj().T @ jump
    return (np.kron(jump, jump.conj())
            - 0.5 * (np.kron(jdj, _I4) + np.kron(_I4, jdj.T)))


def _hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    return -1j * (np.kron(h, _I4) - np.kron(_I4, h.T))


# unit-rate jump operators, scaled by the actual rate on assembly
_J_VERTICAL = {b: _ket_bra(_GROUND[b], _EXCITED[b]) for b in Branch}
_J_DIAGONAL = {b: _ket_bra(_DIAG_GROUND[b], _EXCITED[b]) for b in Branch}
_J_FLIP_UP_TO_DOWN = _ket_bra(STATE_DOWN, STATE_UP)
_J_FLIP_DOWN_TO_UP = _ket_bra(STATE_UP, STATE_DOWN)
# Hermitian dephasing operator: optical coherences decay at gamma_dephasing,
# ground-ground and trion-trion coherences are untouched.
_A_DEPHASE = np.diag([-1.0, -1.0, 1.0, 1.0]) / math.sqrt(2.0)

_D_VERTICAL = {b: _dissipator(_J_VERTICAL[b]) for b in Branch}
_D_DIAGONAL = {b: _dissipator(_J_DIAGONAL[b]) for b in Branch}
_D_FLIPS = _dissipator(_J_FLIP_UP_TO_DOWN) + _dissipator(_J_FLIP_DOWN_TO_UP)
_D_DEPHASE = _dissipator(_A_DEPHASE)

# detuning generators: adding c * DETUNING_GEN[b] to the Liouvillian is the
# same as adding c * P_excited(b) to the rotating-frame Hamiltonian
DETUNING_GEN = {b: _hamiltonian_superop(np.diag(np.eye(4)[_EXCITED[b]]).astype(float))
                for b in Branch}
_DETUNING_GEN_BOTH = DETUNING_GEN[Branch.BLUE] + DETUNING_GEN[Branch.RED]


@dataclass(frozen=True)
class DriveAssignment:
    """A laser coherently coupled to one vertical transition."""

    laser_index: int
    branch: Branch
    rabi: float
    detuning: float  # eV, laser energy minus transition energy


def effective_cutoff(laser: LaserField, params: SystemParams) -> float:
    """Coupling cutoff of a laser; default 20 * hbar * gamma_vertical."""
    if laser.coupling_cutoff is not None:
        return laser.coupling_cutoff
    return 20.0 * HBAR_EVS * params.gamma_vertical


def laser_assignments(params: SystemParams, device: DeviceModel, v: float,
                      lasers: list[LaserField]) -> list[DriveAssignment]:
    """Resolve which laser drives which vertical transition at voltage ``v``.

    A laser is assigned to a branch when its detuning magnitude does not
    exceed its coupling cutoff.  Lasers with zero Rabi frequency are off and
    never assigned.  One laser may drive both branches (degenerate field);
    that is a single-frame problem and is allowed.
    """
    out = []
    for idx, laser in enumerate(lasers):
        if laser.rabi == 0.0:
            continue
        cutoff = effective_cutoff(laser, params)
        for branch in Branch:
            det = laser.energy - transition_energy(device, params, v, branch)
            if abs(det) <= cutoff:
                out.append(DriveAssignment(idx, branch, laser.rabi, det))
    return out


def frames_compatible(assignments: list[DriveAssignment]) -> bool:
    """True when no vertical transition is driven by two distinct lasers."""
    for branch in Branch:
        drivers = {a.laser_index for a in assignments if a.branch is branch}
        if len(drivers) > 1:
            return False
    return True


def _static_generator(params: SystemParams, kappa: float,
                      drive_rabis: dict[Branch, float]) -> np.ndarray:
    """Dissipators plus the detuning-independent Hamiltonian part.

    The ground-state Zeeman shift never appears here: each ground spin
    carries its own rotating frame (no coherent coupling links them), so the
    full field dependence lives in the per-branch detunings.
    """
    h = np.zeros((4, 4))
    for branch, rabi in drive_rabis.items():
        g, e = _GROUND[branch], _EXCITED[branch]
        h[g, e] += 0.5 * rabi
        h[e, g] += 0.5 * rabi
    flip = 0.5 / params.t1_spin + 0.5 * kappa
    gen = _hamiltonian_superop(h)
    for b in Branch:
        gen = gen + params.gamma_vertical * _D_VERTICAL[b]
        gen = gen + params.gamma_diagonal * _D_DIAGONAL[b]
    gen = gen + flip * _D_FLIPS
    if params.gamma_dephasing > 0:
        gen = gen + params.gamma_dephasing * _D_DEPHASE
    return gen


@dataclass(frozen=True)
class Liouvillian:
    """A 16x16 generator with its rotating-frame metadata.

    Construction verifies the structural invariants: the generator
    annihilates the trace and maps Hermitian matrices to Hermitian matrices
    (both exact up to 1e-12 relative to the generator norm).
    """

    matrix: np.ndarray
    assignments: tuple[DriveAssignment, ...]
    voltage: float
    kappa: float

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (16, 16):
            raise ValueError("Liouvillian matrix must be 16x16")
        scale = max(np.abs(m).max(), 1.0)
        trace_row = np.zeros(16)
        trace_row[TRACE_INDICES] = 1.0
        if np.abs(trace_row @ m).max() > 1e-12 * scale:
            raise ValueError("generator does not annihilate the trace")
        # Hermiticity preservation: conj(L) == S L S with S the vec-transpose
        perm = np.arange(16).reshape(4, 4).T.ravel()
        if np.abs(m.conj() - m[np.ix_(perm, perm)]).max() > 1e-12 * scale:
            raise ValueError("generator does not preserve Hermiticity")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def build_liouvillian(params: SystemParams, device: DeviceModel, v: float,
                      lasers: list[LaserField]) -> Liouvillian:
    """Assemble the rotating-frame generator at gate voltage ``v``.

    Raises
    ------
    OutsidePlateauError
        Voltage outside the one-electron plateau.
    IncompatibleFramesError
        Two lasers coherently drive the same transition.
    """
    kappa = cotunneling_rate(device, v)
    asg = laser_assignments(params, device, v, lasers)
    if not frames_compatible(asg):
        raise IncompatibleFramesError(
            "two lasers drive the same vertical transition at different "
            "frequencies; use the rate-equation path")
    drive_rabis = {a.branch: a.rabi for a in asg}
    gen = _static_generator(params, kappa, drive_rabis)
    for a in asg:
        gen = gen + (-a.detuning / HBAR_EVS) * DETUNING_GEN[a.branch]
    return Liouvillian(gen, tuple(asg), v, kappa)


def steady_state(liouvillian: Liouvillian, *, kernel_rtol: float = 1e-8) -> DensityMatrix4:
    """Unique steady state via a dense solve with the trace condition
    replacing the first row.

    Raises
    ------
    DegenerateKernelError
        If the numerical kernel of the generator is not one-dimensional.
    """
    m = liouvillian.matrix
    sv = np.linalg.svd(m, compute_uv=False)
    null_dim = int(np.sum(sv < kernel_rtol * sv[0]))
    if null_dim > 1:
        raise DegenerateKernelError(
            f"Liouvillian kernel is {null_dim}-dimensional; steady state not unique")
    a = m.copy()
    a[0, :] = 0.0
    a[0, TRACE_INDICES] = 1.0
    b = np.zeros(16, dtype=complex)
    b[0] = 1.0
    rho = np.linalg.solve(a, b).reshape(4, 4)
    return DensityMatrix4(rho)


def propagate(liouvillian: Liouvillian, rho0: DensityMatrix4, t: float) -> DensityMatrix4:
    """Evolve ``rho0`` for duration ``t`` by the exact matrix exponential.

    Scaling-and-squaring is exact to machine precision at any ``t``; there is
    no step size to fail.  Trace and Hermiticity are re-validated on the
    result, and positivity violations beyond tolerance raise instead of
    being projected away.
    """
    if t < 0:
        raise ValueError("propagation time must be >= 0")
    if t == 0:
        return rho0
    prop = _expm(liouvillian.matrix * t)
    rho = (prop @ rho0.matrix.reshape(16)).reshape(4, 4)
    return DensityMatrix4(rho)


def scattering_rate(omega_rabi, delta, params: SystemParams):
    """Lorentzian photon scattering rate of a driven vertical transition.

    W = (Omega^2/2) * (Gamma'/2) / ((Delta/hbar)^2 + (Gamma'/2)^2) with
    Gamma' = gamma_vertical + gamma_diagonal + 2*gamma_dephasing; ``delta``
    in eV.  Peak value Omega^2 / Gamma'.  Vectorized over both arguments.
    """
    gp = params.gamma_vertical + params.gamma_diagonal + 2.0 * params.gamma_dephasing
    dw = np.asarray(delta, dtype=float) / HBAR_EVS
    w = (np.asarray(omega_rabi, dtype=float) ** 2 / 2.0) * (gp / 2.0) / (dw ** 2 + (gp / 2.0) ** 2)
    return w if w.ndim else float(w)


@dataclass(frozen=True)
class RateMatrix4:
    """Classical rate matrix: columns sum to zero, off-diagonals >= 0."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError("rate matrix must be 4x4")
        scale = max(np.abs(m).max(), 1.0)
        off = m - np.diag(np.diag(m))
        if off.min() < -1e-12 * scale:
            raise ValueError("off-diagonal transfer rates must be >= 0")
        if np.abs(m.sum(axis=0)).max() > 1e-12 * scale:
            raise ValueError("rate-matrix columns must sum to zero")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def _rate_static(params: SystemParams, kappa: float) -> np.ndarray:
    m = np.zeros((4, 4))
    g, gd = params.gamma_vertical, params.gamma_diagonal
    for b in Branch:
        e = _EXCITED[b]
        m[_GROUND[b], e] += g
        m[_DIAG_GROUND[b], e] += gd
    flip = 0.5 / params.t1_spin + 0.5 * kappa
    m[STATE_DOWN, STATE_UP] += flip
    m[STATE_UP, STATE_DOWN] += flip
    np.fill_diagonal(m, np.diag(m) - m.sum(axis=0))
    return m


def _rate_drive_template(branch: Branch) -> np.ndarray:
    g, e = _GROUND[branch], _EXCITED[branch]
    t = np.zeros((4, 4))
    t[e, g] = t[g, e] = 1.0
    t[g, g] = t[e, e] = -1.0
    return t


_RATE_TEMPLATES = {b: _rate_drive_template(b) for b in Branch}


def rate_matrix(params: SystemParams, device: DeviceModel, v: float,
                lasers: list[LaserField]) -> RateMatrix4:
    """Classical reduction of the driven system.

    Each (laser, transition) pair within the coupling cutoff contributes its
    Lorentzian :func:`scattering_rate` as a symmetric transfer rate between
    the transition's ground and trion state; contributions from several
    lasers on one transition add (incoherent sum).  Trion decay branches
    gamma_vertical/(sum) vertically and gamma_diagonal/(sum) diagonally,
    identical to the separate rate channels.
    """
    kappa = cotunneling_rate(device, v)
    m = _rate_static(params, kappa)
    for a in laser_assignments(params, device, v, lasers):
        w = scattering_rate(a.rabi, a.detuning, params)
        m = m + w * _RATE_TEMPLATES[a.branch]
    return RateMatrix4(m)


def rate_steady_populations(rates: RateMatrix4) -> np.ndarray:
    """Normalized steady populations of a rate matrix."""
    a = rates.matrix.copy()
    a[0, :] = 1.0
    b = np.zeros(4)
    b[0] = 1.0
    p = np.linalg.solve(a, b)
    if p.min() < -1e-8:
        raise PositivityError(f"steady population {p.min():.3e} below tolerance")
    return p


# ---------------------------------------------------------------------------
# batched kernels (shared by the observable pipelines)

_POP_CHUNK = 8192


def lindblad_batch(params: SystemParams, kappa: float,
                   drives: list[tuple[Branch, float, np.ndarray]],
                   offsets: np.ndarray) -> np.ndarray:
    """Stack of generators over (pixel, quadrature-node) pairs.

    ``drives`` holds (branch, rabi, base detuning array in eV) per driven
    transition; ``offsets`` (eV) is the quasi-static transition-energy shift
    per node, subtracted from every detuning.  Returns (n_pixel * n_node,
    16, 16) in C order with the node index fastest.
    """
    drive_rabis = {b: r for b, r, _ in drives}
    static = _static_generator(params, kappa, drive_rabis)
    n_pix = drives[0][2].size if drives else 1
    n = n_pix * offsets.size
    out = np.broadcast_to(static, (n, 16, 16)).copy()
    for branch, _, base in drives:
        coeff = (-(base[:, None] - offsets[None, :]) / HBAR_EVS).reshape(n)
        out += coeff[:, None, None] * DETUNING_GEN[branch]
    return out


def steady_populations_batch(generators: np.ndarray) -> np.ndarray:
    """Steady populations for a stack of generators, (N, 4) real."""
    n = generators.shape[0]
    pops = np.empty((n, 4))
    for lo in range(0, n, _POP_CHUNK):
        hi = min(lo + _POP_CHUNK, n)
        a = generators[lo:hi].copy()
        a[:, 0, :] = 0.0
        a[:, 0, TRACE_INDICES] = 1.0
        b = np.zeros((hi - lo, 16), dtype=complex)
        b[:, 0] = 1.0
        x = np.linalg.solve(a, b[..., None])[..., 0]
        block = x[:, TRACE_INDICES]
        if np.abs(block.imag).max() > 1e-8:
            raise PositivityError("steady populations acquired imaginary parts beyond 1e-8")
        pops[lo:hi] = block.real
    if pops.min() < -1e-8:
        raise PositivityError(f"steady population {pops.min():.3e} below tolerance")
    return pops


def rate_batch(params: SystemParams, kappa: float,
               drives: list[tuple[Branch, float, np.ndarray]],
               offsets: np.ndarray) -> np.ndarray:
    """Rate-matrix analogue of :func:`lindblad_batch`, (N, 4, 4) real."""
    static = _rate_static(params, kappa)
    n_pix = drives[0][2].size if drives else 1
    n = n_pix * offsets.size
    out = np.broadcast_to(static, (n, 4, 4)).copy()
    for branch, rabi, base in drives:
        w = scattering_rate(rabi, base[:, None] - offsets[None, :], params).reshape(n)
        out += w[:, None, None] * _RATE_TEMPLATES[branch]
    return out


def rate_steady_populations_batch(matrices: np.ndarray) -> np.ndarray:
    a = matrices.copy()
    a[:, 0, :] = 1.0
    b = np.zeros((matrices.shape[0], 4))
    b[:, 0] = 1.0
    p = np.linalg.solve(a, b[..., None])[..., 0]
    if p.min() < -1e-8:
        raise PositivityError(f"steady population {p.min():.3e} below tolerance")
    return p


# Pade-13 coefficients for the scaling-and-squaring matrix exponential
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
           960960.0, 16380.0, 182.0, 1.0)
_THETA13 = 5.371920351148152


def expm_batch(matrices: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack of small square matrices.

    Single Pade-13 scaling-and-squaring pass with a shared scaling exponent
    (the largest needed in the batch); deterministic and vectorized.
    """
    a = np.asarray(matrices)
    n = a.shape[-1]
    norm = np.abs(a).sum(axis=-2).max(axis=-1).max() if a.size else 0.0
    s = max(0, int(math.ceil(math.log2(norm / _THETA13))) if norm > _THETA13 else 0)
    a = a / (2.0 ** s)
    b = _PADE13
    ident = np.broadcast_to(np.eye(n, dtype=a.dtype), a.shape)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(-u + v, u + v)
    for _ in range(s):
        r = r @ r
    return r


def propagator_with_average(generator: np.ndarray, duration: float) -> tuple[np.ndarray, np.ndarray]:
    """End-of-window propagator and window-averaged propagator.

    Returns (E, C) with E = exp(G*t) and C = (1/t) * integral_0^t exp(G*s) ds
    via the block-triangular (Van Loan) augmentation; applying C to a state
    yields its time average over the window.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    g = np.asarray(generator)
    n = g.shape[-1]
    batch = g.shape[:-2]
    aug = np.zeros(batch + (2 * n, 2 * n), dtype=g.dtype)
    aug[..., :n, :n] = g * duration
    aug[..., :n, n:] = np.broadcast_to(np.eye(n, dtype=g.dtype), batch + (n, n)) * duration
    e = expm_batch(aug) if batch else _expm(aug)
    return e[..., :n, :n], e[..., :n, n:] / duration
