"""Topological invariants of the magnetic walk.

Chern numbers are computed by the link-variable (plaquette vortex counting)
method on the magnetic BZ grid, with an independent perturbative
Berry-curvature summation as cross-check. Gap invariants come from the
spectral flow induced by a fictitious flux threaded once per magnetic unit
cell; chiral winding numbers and Dirac-point charges complete the toolbox.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    HADAMARD,
    TimeFrame,
    bloch_step_operator,
    branch_window,
    effective_hamiltonian,
    eig_unitary,
    half_step_up_from_phases,
    landau_phases,
    spectral_flow_operator,
    wrap_pi,
)
from .spectra import band_structure, gap_table

TWO_PI = 2.0 * np.pi


class NotIsolatedError(ValueError):
    """The requested band group touches its complement on the k-grid."""


class NotInGapError(ValueError):
    """The requested energy lies inside a band."""


class QuantizationError(ArithmeticError):
    """An invariant failed its integer-quantization residual check."""


class MethodDisagreementError(AssertionError):
    """Two independent routes to the same invariant disagree."""


# ----------------------------------------------------------------------
# Chern numbers
# ----------------------------------------------------------------------


@dataclass
class ChernResult:
    band_group: tuple
    value: int
    grid: tuple
    residual: float


def _fhs_total(vectors, band_group):
    """Sum of plaquette field strengths for the selected frame bundle."""
    Nx, Ny = vectors.shape[:2]
    idx = list(band_group)
    total = 0.0
    for i in range(Nx):
        ip = (i + 1) % Nx
        for j in range(Ny):
            jp = (j + 1) % Ny
            v00 = vectors[i, j][:, idx]
            v10 = vectors[ip, j][:, idx]
            v11 = vectors[ip, jp][:, idx]
            v01 = vectors[i, jp][:, idx]
            u = (
                np.linalg.det(v00.conj().T @ v10)
                * np.linalg.det(v10.conj().T @ v11)
                * np.linalg.det(v11.conj().T @ v01)
                * np.linalg.det(v01.conj().T @ v00)
            )
            total += np.angle(u)
    return total / TWO_PI


def chern_number(bands, band_group, residual_tol=1e-6, _retry=True):
    """Link-variable Chern number of a band group.

    `band_group` lists contiguous canonical band indices of `bands` (the
    canonical order puts the branch cut inside a gap, so touching pairs are
    contiguous). The group must be separated from its complement at every
    grid point. The plaquette sum is an exact vortex count; its residual
    from the nearest integer is a pure floating-point check. If the
    quantization residual exceeds `residual_tol` the k-grid is doubled once.
    """
    if bands.vectors is None:
        raise ValueError("band structure was built without eigenvectors")
    band_group = tuple(int(b) for b in band_group)
    n = bands.n_bands
    if sorted(band_group) != list(range(min(band_group), max(band_group) + 1)):
        raise ValueError("band_group must be a contiguous range of canonical indices")
    E = bands.energies
    below = min(band_group) - 1
    above = max(band_group) + 1
    sep = np.inf
    if below >= 0:
        sep = min(sep, (E[..., min(band_group)] - E[..., below]).min())
    if above < n:
        sep = min(sep, (E[..., above] - E[..., max(band_group)]).min())
    if not np.isfinite(sep) and len(band_group) == n:
        pass  # whole space, trivially isolated
    elif sep < 1e-12:
        raise NotIsolatedError(
            f"band group {band_group} touches its complement (min separation {sep:.2e})"
        )
    total = _fhs_total(bands.vectors, band_group)
    value = int(np.rint(total))
    residual = abs(total - value)
    if residual > residual_tol:
        if _retry:
            finer = band_structure(bands.p, bands.q, 2 * len(bands.kxs),
                                   2 * len(bands.kys), frame=bands.frame)
            return chern_number(finer, band_group, residual_tol, _retry=False)
        raise QuantizationError(
            f"Chern quantization residual {residual:.2e} exceeds {residual_tol}"
        )
    return ChernResult(band_group, value, (len(bands.kxs), len(bands.kys)), residual)


def chern_spectrum(bands, residual_tol=1e-6):
    """Chern number of every isolated band group of a band structure."""
    table = gap_table(bands)
    return {grp: chern_number(bands, grp, residual_tol) for grp in table.band_groups()}


def berry_curvature_chern(p, q, band_group, cut, N=64, frame=TimeFrame.ORIGINAL):
    """Direct Berry-curvature summation (independent of the link method).

    Uses first-order perturbation theory in the analytic k-derivatives of
    the walk unitary; converges to the integer with grid refinement rather
    than being exactly quantized.
    """
    from .operators import bloch_walk_from_phases  # local to keep import light

    phases = landau_phases(p, q)
    kxs = np.linspace(-np.pi / q, np.pi / q, N, endpoint=False)
    kys = np.linspace(-np.pi, np.pi, N, endpoint=False)
    dA = (TWO_PI / q / N) * (TWO_PI / N)
    grp = set(band_group)
    dim = 2 * q
    total = 0.0
    for kx in kxs:
        for ky in kys:
            W, dWx, dWy = _walk_and_gradients(phases, kx, ky)
            E, V = eig_unitary(W, cut=cut)
            lam = np.exp(-1j * E)
            Ax = V.conj().T @ dWx @ V
            Ay = V.conj().T @ dWy @ V
            om = 0.0
            for nb in band_group:
                for m in range(dim):
                    if m in grp:
                        continue
                    d2 = abs(lam[nb] - lam[m]) ** 2
                    om += (
                        1j * (np.conj(Ay[m, nb]) * Ax[m, nb]
                              - np.conj(Ax[m, nb]) * Ay[m, nb]) / d2
                    ).real
            total += om * dA
    return total / TWO_PI


def _walk_and_gradients(phases_up, kx, ky):
    """Original-frame Bloch walk and its analytic k-derivatives."""
    phases_up = np.asarray(phases_up, dtype=float)
    Q = len(phases_up)
    up = np.diag([1.0, 0.0]).astype(complex)
    dn = np.diag([0.0, 1.0]).astype(complex)
    eye = np.eye(Q, dtype=complex)
    R = np.zeros((Q, Q), dtype=complex)
    dR = np.zeros((Q, Q), dtype=complex)
    for j in range(Q):
        src = (j - 1) % Q
        if j == 0:
            R[j, src] = np.exp(-1j * Q * kx)
            dR[j, src] = -1j * Q * R[j, src]
        else:
            R[j, src] = 1.0
    Sx = np.kron(R, up) + np.kron(R.conj().T, dn)
    dSx = np.kron(dR, up) + np.kron(dR.conj().T, dn)
    sy = np.diag([np.exp(-1j * ky), np.exp(1j * ky)])
    dsy = np.diag([-1j * np.exp(-1j * ky), 1j * np.exp(1j * ky)])
    Sy = np.kron(eye, sy)
    dSy = np.kron(eye, dsy)
    from .operators import COIN

    Cq = np.kron(eye, COIN)
    F = np.kron(np.diag(np.exp(1j * phases_up)), up) + np.kron(
        np.diag(np.exp(-1j * phases_up)), dn
    )
    W = F @ Sy @ Cq @ Sx @ Cq
    dWx = F @ Sy @ Cq @ dSx @ Cq
    dWy = F @ dSy @ Cq @ Sx @ Cq
    return W, dWx, dWy


# ----------------------------------------------------------------------
# spectral-flow gap invariant
# ----------------------------------------------------------------------


@dataclass
class RLBLResult:
    e_tilde: float
    value: int
    raw_flow: float
    s: int
    k_probe: tuple


def _flow_sum(p, q, beta, e_tilde, kx, ky, s):
    lam = np.linalg.eigvals(spectral_flow_operator(p, q, beta, 0.0, kx, ky, s))
    E = branch_window(-np.angle(lam), e_tilde - TWO_PI)  # branch cut at e_tilde
    return E.sum()


def rlbl_invariant(p, q, e_tilde, s=15, k_probe=(0.1, 0.1), residual_tol=1e-6,
                   check_gap=True, check_probe=True, _retry=True):
    """Gap invariant from the spectral flow under a fictitious flux.

    The 2 s q eigenphases of the modified walk are taken on the branch whose
    cut sits exactly at the gap energy e_tilde; the invariant is the net
    eigenphase flow (in units of 2 pi) as the fictitious flux goes from
    0 to 2 pi / s. The flow is quantized because the determinant of the
    modified walk does not depend on the fictitious flux.
    """
    e_tilde = float(e_tilde)
    if check_gap:
        table = gap_table(band_structure(p, q, 12, 12, store_vectors=False))
        if table.containing(e_tilde) is None:
            raise NotInGapError(f"energy {e_tilde:+.6f} is not inside a bulk gap")
    kx, ky = k_probe
    raw = (_flow_sum(p, q, TWO_PI / s, e_tilde, kx, ky, s)
           - _flow_sum(p, q, 0.0, e_tilde, kx, ky, s)) / TWO_PI
    value = int(np.rint(raw))
    residual = abs(raw - value)
    if residual > residual_tol:
        if _retry:
            return rlbl_invariant(p, q, e_tilde, 2 * s, k_probe, residual_tol,
                                  check_gap=False, check_probe=check_probe,
                                  _retry=False)
        raise QuantizationError(
            f"spectral flow residual {residual:.2e} exceeds {residual_tol}"
        )
    if check_probe:
        kx2, ky2 = wrap_pi(kx + 0.37) , wrap_pi(ky - 0.53)
        raw2 = (_flow_sum(p, q, TWO_PI / s, e_tilde, kx2, ky2, s)
                - _flow_sum(p, q, 0.0, e_tilde, kx2, ky2, s)) / TWO_PI
        if abs(raw2 - value) > residual_tol:
            raise QuantizationError(
                f"gap invariant depends on the quasimomentum probe "
                f"({raw:+.6f} vs {raw2:+.6f})"
            )
    return RLBLResult(e_tilde, value, raw, s, tuple(k_probe))


def rlbl_spectrum(p, q, s=15, k_probe=(0.1, 0.1)):
    """Gap invariant of every gap of the flux-p/q walk, keyed by midgap."""
    table = gap_table(band_structure(p, q, 16, 16, store_vectors=False))
    return {g.midgap: rlbl_invariant(p, q, g.midgap, s, k_probe, check_gap=False)
            for g in table}


# ----------------------------------------------------------------------
# chiral winding numbers and Dirac charges
# ----------------------------------------------------------------------


def winding_number(h_func, contour, det_floor=1e-8, max_depth=24):
    """Winding of det h(k) along a closed contour.

    `contour` is an (N, 2) array of k-points traversed in order (the loop is
    closed automatically). Phase increments between consecutive points are
    kept below pi/2 by adaptive bisection, which guards against undercounting
    rapid windings.
    """
    pts = [np.asarray(k, dtype=float) for k in contour]
    dets = [complex(np.linalg.det(h_func(k))) for k in pts]
    for d in dets:
        if abs(d) < det_floor:
            raise ValueError(f"|det h| = {abs(d):.2e} below floor on the contour")

    def increment(k0, d0, k1, d1, depth):
        dphi = np.angle(d1 / d0)
        if abs(dphi) < np.pi / 2 or depth >= max_depth:
            return dphi
        km = 0.5 * (k0 + k1)
        dm = complex(np.linalg.det(h_func(km)))
        if abs(dm) < det_floor:
            raise ValueError(f"|det h| = {abs(dm):.2e} below floor on the contour")
        return (increment(k0, d0, km, dm, depth + 1)
                + increment(km, dm, k1, d1, depth + 1))

    total = 0.0
    n = len(pts)
    for i in range(n):
        j = (i + 1) % n
        total += increment(pts[i], dets[i], pts[j], dets[j], 0)
    return int(np.rint(total / TWO_PI))


def _chiral_blocks(H):
    """Off-diagonal block of a chiral Hamiltonian, Gamma = 1 x sigma_x.

    Rotates to the basis where the chiral operator is diagonal and reorders
    the +1 eigenspace before the -1 eigenspace, giving
    H -> [[0, h], [h^dag, 0]]; returns (h, chirality_defect).
    """
    dim = H.shape[0]
    Q = dim // 2
    T = np.kron(np.eye(Q), HADAMARD)
    Ht = T @ H @ T
    plus = np.arange(0, dim, 2)
    minus = np.arange(1, dim, 2)
    defect = max(np.abs(Ht[np.ix_(plus, plus)]).max(),
                 np.abs(Ht[np.ix_(minus, minus)]).max())
    return Ht[np.ix_(plus, minus)], defect


def _halfstep_blocks(p, q, k):
    """Blocks [[a, b], [c, d]] of W_up in the chiral-diagonal basis."""
    W = half_step_up_from_phases(landau_phases(p, q), k[0], k[1])
    dim = W.shape[0]
    Q = dim // 2
    T = np.kron(np.eye(Q), HADAMARD)
    Wt = T @ W @ T
    plus = np.arange(0, dim, 2)
    minus = np.arange(1, dim, 2)
    return (Wt[np.ix_(plus, plus)], Wt[np.ix_(plus, minus)],
            Wt[np.ix_(minus, plus)], Wt[np.ix_(minus, minus)])


@dataclass
class DiracCharge:
    K: tuple
    energy: float
    nu_primed: int
    nu_doubleprimed: int
    nu0: int
    nu_pi: int


def dirac_charges(p, q, K, radius=0.08, n_points=256):
    """Topological charges of a Dirac point from chiral winding numbers.

    nu' and nu'' are the windings of det h around K in the two chiral time
    frames; the charges are their half sum and half difference. The same
    charges are recomputed from the off-diagonal blocks of the half-step
    operator; disagreement raises, since it indicates a frame or basis bug.
    """
    K = np.asarray(K, dtype=float)
    circle = [K + radius * np.array([np.cos(t), np.sin(t)])
              for t in np.linspace(0.0, TWO_PI, n_points, endpoint=False)]

    def h_of(frame):
        def f(k):
            W = bloch_step_operator(p, q, k[0], k[1], frame).matrix
            H = effective_hamiltonian(W).matrix
            h, defect = _chiral_blocks(H)
            if defect > 1e-8:
                raise ValueError(f"chirality defect {defect:.2e}; frame {frame} not chiral here")
            return h
        return f

    nu_p = winding_number(h_of(TimeFrame.PRIMED), circle)
    nu_pp = winding_number(h_of(TimeFrame.DOUBLEPRIMED), circle)
    if (nu_p + nu_pp) % 2 != 0:
        raise MethodDisagreementError(
            f"nu'={nu_p}, nu''={nu_pp} have different parity; charges undefined"
        )
    nu0 = (nu_p + nu_pp) // 2
    nu_pi = (nu_p - nu_pp) // 2

    # with the +1 eigenspace of Gamma ordered first, the half-step blocks
    # carry nu0 in the upper-right block and nu_pi in the upper-left one
    # (ordering the -1 eigenspace first maps a <-> d and recovers the
    # equivalent "nu_pi from d" convention)
    nu0_alt = winding_number(lambda k: _halfstep_blocks(p, q, k)[1], circle)
    nu_pi_alt = winding_number(lambda k: _halfstep_blocks(p, q, k)[0], circle)
    if (nu0, nu_pi) != (nu0_alt, nu_pi_alt):
        raise MethodDisagreementError(
            f"time-frame charges ({nu0}, {nu_pi}) disagree with half-step "
            f"charges ({nu0_alt}, {nu_pi_alt})"
        )
    E = quasienergy_at(p, q, K)
    return DiracCharge(tuple(K), E, nu_p, nu_pp, nu0, nu_pi)


def quasienergy_at(p, q, K):
    """0.0 or pi depending on which touching the point K belongs to."""
    from .operators import quasienergies

    E = quasienergies(bloch_step_operator(p, q, K[0], K[1]).matrix)
    return 0.0 if np.abs(E).min() < (np.pi - np.abs(E)).min() else np.pi


# ----------------------------------------------------------------------
# bulk-boundary correspondence
# ----------------------------------------------------------------------


@dataclass
class EdgeCrossingReport:
    midgap: float
    net_left: int
    net_right: int
    expected: int          # R_inside - R_outside
    branches_left: int     # number of distinct left-edge crossings (unsigned)
    branches_right: int
    matches: bool


class AmbiguousBranchError(RuntimeError):
    """An edge branch could not be attributed to a single wall."""


def bulk_boundary_check(ribbon, rlbl_inside, rlbl_outside, gap,
                        classify_band=(0.4, 0.6)):
    """Count signed midgap crossings of edge branches and compare with the
    difference of the two bulk gap invariants.

    Crossing signs follow dE/dky; each wall is counted in the orientation
    that keeps the inner domain on the same hand, i.e. the left wall counts
    -sign(dE/dky) and the right wall +sign(dE/dky). With that convention
    both edges must equal R_inside - R_outside.
    """
    if ribbon.vectors is None:
        raise ValueError("ribbon must be built with store_vectors=True")
    lo, hi, mid = gap.lower, gap.upper, gap.midgap
    kys = ribbon.kys
    nky = len(kys)
    cutref = ribbon.cut
    lo_c = branch_window(lo, cutref)
    span = hi - lo
    net = {"left": 0, "right": 0}
    count = {"left": 0, "right": 0}
    margin = 0.02 * span

    def in_gap_states(j):
        E = ribbon.energies[j]
        rel = np.mod(E - lo_c, TWO_PI)
        sel = np.nonzero((rel > margin) & (rel < span - margin))[0]
        return [(rel[i], i) for i in sel]

    mid_rel = span / 2.0
    prev = None
    for jj in range(nky + 1):
        j = jj % nky
        cur = in_gap_states(j)
        if prev is not None and prev and cur:
            pj = (jj - 1) % nky
            for (e0, i0) in prev:
                ovl = [abs(np.vdot(ribbon.vectors[pj][:, i0],
                                   ribbon.vectors[j][:, i1])) for (_, i1) in cur]
                kbest = int(np.argmax(ovl))
                e1, i1 = cur[kbest]
                if ovl[kbest] < 0.5:
                    continue
                if (e0 - mid_rel) * (e1 - mid_rel) < 0:
                    sgn = 1 if e1 > e0 else -1
                    wl = ribbon.edge_weight_left[j, i1]
                    wr = ribbon.edge_weight_right[j, i1]
                    if wl > classify_band[1]:
                        net["left"] -= sgn
                        count["left"] += 1
                    elif wr > classify_band[1]:
                        net["right"] += sgn
                        count["right"] += 1
                    elif wl < classify_band[0] and wr < classify_band[0]:
                        continue   # bulk-like leak-through, ignore
                    else:
                        raise AmbiguousBranchError(
                            f"edge weight ({wl:.2f}, {wr:.2f}) in the ambiguous band "
                            f"at ky={kys[j]:+.4f}; refine the ky grid"
                        )
        prev = cur
    expected = int(rlbl_inside) - int(rlbl_outside)
    return EdgeCrossingReport(
        midgap=mid,
        net_left=net["left"],
        net_right=net["right"],
        expected=expected,
        branches_left=count["left"],
        branches_right=count["right"],
        matches=(net["left"] == expected and net["right"] == expected),
    )
