"""Unitaries of the magnetic quantum walk.

One step of the walk is W = F S_y C S_x C: a spin coin, a spin-dependent
shift along x, a second coin, a spin-dependent shift along y, and a
site-diagonal spin-dependent phase (the magnetic-field operator, which
carries the Peierls phases of the artificial vector potential).

Everything is built both in real space (arrays over a finite lattice) and
in the Bloch basis of the q-site magnetic unit cell for uniform flux p/q.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.linalg import schur

TWO_PI = 2.0 * np.pi
SQRT2 = np.sqrt(2.0)

#: Hadamard-like coin exp(-i sigma_y pi/4); spin basis (up, down).
COIN = np.array([[1.0, -1.0], [1.0, 1.0]], dtype=complex) / SQRT2

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

#: rotation to the basis where the chiral operator sigma_x is diagonal
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / SQRT2


class TimeFrame(enum.Enum):
    """Choice of the time origin within one step.

    ORIGINAL is W = F S_y C S_x C. PRIMED and DOUBLEPRIMED are the two
    cyclic permutations W' = W_up W_dn and W'' = W_dn W_up built from the
    half-step operators; both possess chiral symmetry with Gamma = sigma_x.
    """

    ORIGINAL = "original"
    PRIMED = "primed"
    DOUBLEPRIMED = "doubleprimed"


class GaplessAtCutError(ValueError):
    """An eigenvalue sits on the branch cut of the requested logarithm."""


def build_coin():
    """The 2x2 coin (1/sqrt2) [[1, -1], [1, 1]]."""
    return COIN.copy()


# ----------------------------------------------------------------------
# quasienergy branch bookkeeping
# ----------------------------------------------------------------------


def branch_window(E, cut):
    """Represent quasienergies on the branch (cut, cut + 2 pi]."""
    E = np.asarray(E, dtype=float)
    return cut + TWO_PI - np.mod(cut - E, TWO_PI)


def wrap_pi(E):
    """Map quasienergies into the standard Floquet zone (-pi, pi]."""
    return branch_window(E, -np.pi)


def quasienergies(U, cut=-np.pi):
    """Eigenphases E of a unitary (eigenvalues e^{-iE}) on (cut, cut+2pi], sorted."""
    lam = np.linalg.eigvals(U)
    return np.sort(branch_window(-np.angle(lam), cut))


def eig_unitary(U, cut=-np.pi):
    """Orthonormal eigendecomposition of a unitary matrix.

    Uses a complex Schur factorization so that eigenvectors stay orthonormal
    through degeneracies. Returns (E, V) with E sorted ascending on the
    branch (cut, cut + 2 pi] and V's columns the matching eigenvectors.
    """
    T, Z = schur(np.asarray(U, dtype=complex), output="complex")
    lam = np.diag(T)
    off = np.abs(T - np.diag(lam)).max() if T.shape[0] > 1 else 0.0
    if off > 1e-8:
        raise np.linalg.LinAlgError(
            f"matrix is not normal enough for a unitary eigendecomposition (off={off:.2e})"
        )
    E = branch_window(-np.angle(lam), cut)
    order = np.argsort(E, kind="stable")
    return E[order], Z[:, order]


def unitarity_defect(U):
    U = np.asarray(U)
    return np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()


# ----------------------------------------------------------------------
# Bloch-reduced operators for the q-site magnetic unit cell
# ----------------------------------------------------------------------


@dataclass
class BlochUnitary:
    """One-step unitary reduced to the magnetic Brillouin zone."""

    p: int
    q: int
    kx: float
    ky: float
    frame: TimeFrame
    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    def quasienergies(self, cut=-np.pi):
        return quasienergies(self.matrix, cut)


def _ring_shift(Q, kx):
    """Cyclic site shift u'_j = u_{j-1} with the Bloch phase on the wrap hop.

    Placing e^{-i Q kx} only on the boundary hop makes the walk matrix
    exactly periodic in kx with period 2 pi / Q.
    """
    R = np.zeros((Q, Q), dtype=complex)
    for j in range(Q):
        R[j, (j - 1) % Q] = np.exp(-1j * Q * kx) if j == 0 else 1.0
    return R


def _bloch_parts(phases_up, kx, ky, coin=None):
    """Spin-resolved factors of the Bloch walk for given F phases.

    phases_up[j] is the field-operator phase of spin-up at cell site j
    (spin-down carries the opposite sign).
    """
    phases_up = np.asarray(phases_up, dtype=float)
    Q = len(phases_up)
    up = np.diag([1.0, 0.0]).astype(complex)
    dn = np.diag([0.0, 1.0]).astype(complex)
    eye = np.eye(Q, dtype=complex)
    R = _ring_shift(Q, kx)

    sx_up = np.kron(R, up) + np.kron(eye, dn)
    sx_dn = np.kron(eye, up) + np.kron(R.conj().T, dn)
    sy_up = np.kron(eye, np.diag([np.exp(-1j * ky), 1.0]))
    sy_dn = np.kron(eye, np.diag([1.0, np.exp(1j * ky)]))
    f_up = np.kron(np.diag(np.exp(1j * phases_up)), up) + np.kron(eye, dn)
    f_dn = np.kron(eye, up) + np.kron(np.diag(np.exp(-1j * phases_up)), dn)
    coin_q = np.kron(eye, COIN if coin is None else np.asarray(coin, dtype=complex))
    return coin_q, sx_up, sx_dn, sy_up, sy_dn, f_up, f_dn


def bloch_walk_from_phases(phases_up, kx, ky, frame=TimeFrame.ORIGINAL, coin=None):
    """2Q x 2Q one-step unitary for arbitrary field phases on a Q-site cell."""
    coin, sx_up, sx_dn, sy_up, sy_dn, f_up, f_dn = _bloch_parts(phases_up, kx, ky, coin)
    if frame is TimeFrame.ORIGINAL:
        return f_up @ f_dn @ sy_up @ sy_dn @ coin @ sx_up @ sx_dn @ coin
    w_up = f_up @ sy_up @ coin @ sx_up
    w_dn = sx_dn @ coin @ sy_dn @ f_dn
    if frame is TimeFrame.PRIMED:
        return w_up @ w_dn
    if frame is TimeFrame.DOUBLEPRIMED:
        return w_dn @ w_up
    raise ValueError(f"unknown frame {frame!r}")


def half_step_up_from_phases(phases_up, kx, ky):
    """The spin-up half step W_up = F_up S_{y,up} C S_{x,up}."""
    coin, sx_up, _, sy_up, _, f_up, _ = _bloch_parts(phases_up, kx, ky)
    return f_up @ sy_up @ coin @ sx_up


def landau_phases(p, q, s=1, beta=0.0):
    """F phases of the Landau gauge on an s*q-site cell, plus a fictitious
    flux beta threaded once per original magnetic unit cell."""
    B = TWO_PI * p / q
    j = np.arange(s * q)
    return B * j + beta * (j // q)


def bloch_step_operator(p, q, kx, ky, frame=TimeFrame.ORIGINAL):
    """One-step Bloch unitary at flux p/q in the Landau gauge.

    kx lives in [-pi/q, pi/q], ky in [-pi, pi] (endpoints identified); the
    matrix is exactly periodic under kx -> kx + 2 pi / q.
    """
    p, q = int(p), int(q)
    if q < 1:
        raise ValueError("q must be positive")
    if p != 0 and gcd(abs(p), q) != 1:
        raise ValueError(f"flux {p}/{q} is not a reduced fraction")
    if p == 0 and q != 1:
        raise ValueError("zero flux must be passed as p=0, q=1")
    W = bloch_walk_from_phases(landau_phases(p, q), kx, ky, frame)
    return BlochUnitary(p, q, kx, ky, frame, W)


def spectral_flow_operator(p, q, beta, energy_shift, kx, ky, s):
    """Modified walk unitary used for the spectral-flow gap invariant.

    The field operator becomes exp[i sigma_z (beta * floor(x/q) + B x)] on an
    enlarged cell of s*q sites, and the whole unitary carries a prefactor
    e^{i energy_shift} that moves the branch reference.
    """
    s = int(s)
    if s < 1:
        raise ValueError("s must be a positive integer")
    W = bloch_walk_from_phases(landau_phases(p, q, s=s, beta=beta), kx, ky)
    return np.exp(1j * energy_shift) * W


# ----------------------------------------------------------------------
# effective Hamiltonian
# ----------------------------------------------------------------------


@dataclass
class EffectiveHamiltonian:
    """H = i log(W) on a chosen branch; exp(-i H) reconstructs W."""

    matrix: np.ndarray
    quasienergies: np.ndarray
    energy_shift: float


def effective_hamiltonian(U, energy_shift=0.0, cut_tol=1e-8):
    """Hermitian logarithm H of a unitary U with a movable branch cut.

    The branch cut sits at the point e^{i (pi - energy_shift)} of the unit
    circle, i.e. quasienergies are reported in the window
    (energy_shift - pi, energy_shift + pi]. Raises GaplessAtCutError when an
    eigenvalue comes within cut_tol of the cut.
    """
    U = np.asarray(getattr(U, "matrix", U), dtype=complex)
    s = float(energy_shift)
    T, Z = schur(U, output="complex")
    lam = np.diag(T)
    E_shifted = -np.angle(np.exp(1j * s) * lam)  # in [-pi, pi)
    dist_to_cut = np.pi - np.abs(E_shifted)
    if dist_to_cut.min() < cut_tol:
        raise GaplessAtCutError(
            "eigenvalue within {:.1e} of the branch cut at quasienergy {:+.6f}; "
            "shift the cut into a gap".format(cut_tol, s + np.pi)
        )
    E = E_shifted + s
    H = (Z * E) @ Z.conj().T
    H = 0.5 * (H + H.conj().T)
    return EffectiveHamiltonian(H, np.sort(E), s)


# ----------------------------------------------------------------------
# real-space step
# ----------------------------------------------------------------------


def _apply_coin(amps):
    up = (amps[..., 0] - amps[..., 1]) / SQRT2
    dn = (amps[..., 0] + amps[..., 1]) / SQRT2
    amps[..., 0] = up
    amps[..., 1] = dn


def _shift_component(a, axis, n, periodic):
    """Shift one spin component by n sites along axis.

    Open boundaries leave would-be-lost amplitude in place (no-op on that
    component) and return its squared norm as leakage.
    """
    if periodic:
        return np.roll(a, n, axis=axis), 0.0
    out = np.zeros_like(a)
    src_stuck = []
    if n > 0:
        sl_to = [slice(None)] * a.ndim
        sl_from = [slice(None)] * a.ndim
        sl_to[axis] = slice(n, None)
        sl_from[axis] = slice(None, -n)
        out[tuple(sl_to)] = a[tuple(sl_from)]
        sl_stuck = [slice(None)] * a.ndim
        sl_stuck[axis] = slice(-n, None)
        src_stuck = sl_stuck
    else:
        m = -n
        sl_to = [slice(None)] * a.ndim
        sl_from = [slice(None)] * a.ndim
        sl_to[axis] = slice(None, -m)
        sl_from[axis] = slice(m, None)
        out[tuple(sl_to)] = a[tuple(sl_from)]
        sl_stuck = [slice(None)] * a.ndim
        sl_stuck[axis] = slice(None, m)
        src_stuck = sl_stuck
    stuck = a[tuple(src_stuck)]
    leak = float(np.sum(np.abs(stuck) ** 2))
    out[tuple(src_stuck)] += stuck
    return out, leak


def _apply_site_phases(amps, up_phase, dn_phase, spin):
    if spin in ("up", "both"):
        amps[..., 0] *= np.exp(1j * up_phase)
    if spin in ("dn", "both"):
        amps[..., 1] *= np.exp(1j * dn_phase)


def real_space_step(state, gauge, frame=TimeFrame.ORIGINAL, supershift_m=1,
                    fy_phases=None, fx_phases=None):
    """Apply one full walk step to a SpinorField in place.

    `state` must expose .amps (Lx, Ly, 2), .geometry, and .leakage; the
    default field operators are the line-integral phases of `gauge`
    (fy_phases / fx_phases = (up, dn) arrays override them, e.g. for the
    imprint-profile model). supershift_m replaces S_x by (S_x)^m.

    Off-lattice amplitude on open axes stays in place and accumulates into
    state.leakage.
    """
    m = int(supershift_m)
    if m < 1:
        raise ValueError("supershift_m must be >= 1")
    geo = state.geometry
    amps = state.amps
    if amps.shape != (geo.Lx, geo.Ly, 2):
        raise ValueError("state amplitudes do not match the lattice geometry")
    if gauge is not None and gauge.geometry != geo:
        raise ValueError("gauge and state live on different lattices")
    if gauge is None and fy_phases is None:
        raise ValueError("either a gauge field or explicit fy_phases is required")
    if fy_phases is None:
        fy_phases = gauge.field_phases("y")
    if fx_phases is None:
        fx_up, fx_dn = gauge.field_phases("x") if gauge is not None else (None, None)
    else:
        fx_up, fx_dn = fx_phases
    fy_up, fy_dn = fy_phases
    px = geo.bc_x == "periodic"
    py = geo.bc_y == "periodic"
    trivial_fx = fx_up is None or (not np.any(fx_up) and not np.any(fx_dn))

    def sub_coin():
        _apply_coin(amps)

    def sub_shift_x(spin):
        nonlocal amps
        if spin in ("up", "both"):
            amps[..., 0], leak = _shift_component(amps[..., 0], 0, m, px)
            state.leakage += leak
        if spin in ("dn", "both"):
            amps[..., 1], leak = _shift_component(amps[..., 1], 0, -m, px)
            state.leakage += leak

    def sub_shift_y(spin):
        nonlocal amps
        if spin in ("up", "both"):
            amps[..., 0], leak = _shift_component(amps[..., 0], 1, 1, py)
            state.leakage += leak
        if spin in ("dn", "both"):
            amps[..., 1], leak = _shift_component(amps[..., 1], 1, -1, py)
            state.leakage += leak

    def sub_fx(spin):
        if not trivial_fx:
            _apply_site_phases(amps, fx_up, fx_dn, spin)

    def sub_fy(spin):
        _apply_site_phases(amps, fy_up, fy_dn, spin)

    if frame is TimeFrame.ORIGINAL:
        sub_coin()
        sub_shift_x("both")
        sub_fx("both")
        sub_coin()
        sub_shift_y("both")
        sub_fy("both")
    elif frame is TimeFrame.PRIMED or frame is TimeFrame.DOUBLEPRIMED:
        def half_dn():
            sub_fy("dn")
            sub_shift_y("dn")
            sub_coin()
            sub_fx("dn")
            sub_shift_x("dn")

        def half_up():
            sub_shift_x("up")
            sub_fx("up")
            sub_coin()
            sub_shift_y("up")
            sub_fy("up")

        if frame is TimeFrame.PRIMED:
            half_dn()
            half_up()
        else:
            half_up()
            half_dn()
    else:
        raise ValueError(f"unknown frame {frame!r}")
    state.amps = amps
    return state


class _RawState:
    """Minimal stand-in for a SpinorField (used by dense_walk_matrix)."""

    def __init__(self, geometry, amps):
        self.geometry = geometry
        self.amps = amps
        self.leakage = 0.0


def dense_walk_matrix(gauge, frame=TimeFrame.ORIGINAL, supershift_m=1, fy_phases=None):
    """Materialize the full one-step unitary of a finite lattice.

    Only meant for small lattices (dimension 2 Lx Ly); used by the symmetry
    checks and gauge-covariance tests.
    """
    geo = gauge.geometry
    dim = geo.Lx * geo.Ly * 2
    cols = []
    for i in range(dim):
        amps = np.zeros((geo.Lx, geo.Ly, 2), dtype=complex)
        amps.reshape(-1)[i] = 1.0
        state = _RawState(geo, amps)
        real_space_step(state, gauge, frame=frame, supershift_m=supershift_m,
                        fy_phases=fy_phases)
        cols.append(state.amps.reshape(-1))
    return np.column_stack(cols)
