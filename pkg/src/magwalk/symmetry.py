"""Discrete symmetries of the walk, verified as operator identities.

Each check returns a SymmetryReport with the maximal residual found; the
chiral and particle-hole identities are checked on Bloch matrices, the two
sublattice symmetries on real-space evolution of seeded random states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import GaugeField, LatticeGeometry
from .operators import (
    COIN,
    SIGMA_X,
    TimeFrame,
    bloch_step_operator,
    bloch_walk_from_phases,
    landau_phases,
    quasienergies,
    real_space_step,
)

DEFAULT_SEED = 20190411
N_PROBE_STATES = 20


@dataclass
class SymmetryReport:
    name: str
    residual: float
    passed: bool
    tolerance: float
    details: dict = field(default_factory=dict)
    seed: int | None = None


def _report(name, residual, tol=1e-12, details=None, seed=None):
    return SymmetryReport(name, float(residual), bool(residual < tol), tol,
                          details or {}, seed)


def _random_k_set(q, n=16, seed=DEFAULT_SEED):
    rng = np.random.RandomState(seed)
    kx = rng.uniform(-np.pi / q, np.pi / q, n)
    ky = rng.uniform(-np.pi, np.pi, n)
    return list(zip(kx, ky))


def _random_states(geometry, n=N_PROBE_STATES, seed=DEFAULT_SEED):
    rng = np.random.RandomState(seed)
    shape = (geometry.Lx, geometry.Ly, 2)
    out = []
    for _ in range(n):
        a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        out.append(a / np.linalg.norm(a))
    return out


def check_chiral(p, q, k_set=None, seed=DEFAULT_SEED):
    """Gamma W Gamma = W^dag with Gamma = sigma_x in both chiral frames.

    The original frame fails this identity by O(1); only the two
    time-translated frames W' and W'' are chiral symmetric.
    """
    if k_set is None:
        k_set = _random_k_set(q, seed=seed)
    gx = np.kron(np.eye(q), SIGMA_X)
    res = {TimeFrame.PRIMED: 0.0, TimeFrame.DOUBLEPRIMED: 0.0}
    for frame in res:
        for kx, ky in k_set:
            W = bloch_step_operator(p, q, kx, ky, frame).matrix
            res[frame] = max(res[frame], np.abs(gx @ W @ gx - W.conj().T).max())
    worst = max(res.values())
    return _report("chiral", worst,
                   details={f.value: r for f, r in res.items()}, seed=seed)


def chiral_defect_original_frame(p, q, k_set=None, seed=DEFAULT_SEED):
    """Residual of the chiral identity for the untranslated frame (O(1))."""
    if k_set is None:
        k_set = _random_k_set(q, seed=seed)
    gx = np.kron(np.eye(q), SIGMA_X)
    worst = 0.0
    for kx, ky in k_set:
        W = bloch_step_operator(p, q, kx, ky, TimeFrame.ORIGINAL).matrix
        worst = max(worst, np.abs(gx @ W @ gx - W.conj().T).max())
    return worst


def check_alternating_sublattice(gauge, seed=DEFAULT_SEED):
    """chi W chi = -W with chi = (-1)^y, on a torus with even Ly."""
    geo = gauge.geometry
    if geo.bc_y == "periodic" and geo.Ly % 2:
        raise ValueError("(-1)^y is ill-defined on an odd periodic axis")
    chi = ((-1.0) ** np.arange(geo.Ly))[None, :, None]
    worst = 0.0
    for amps in _random_states(geo, seed=seed):
        s1 = _evolved(geo, gauge, chi * amps)
        s2 = _evolved(geo, gauge, amps)
        worst = max(worst, np.abs(chi * s1 + s2).max())
    return _report("alternating_sublattice", worst, seed=seed)


def check_conserved_sublattice(gauge, seed=DEFAULT_SEED):
    """One step never couples the (x+y) parity sublattices."""
    geo = gauge.geometry
    X, Y = np.meshgrid(np.arange(geo.Lx), np.arange(geo.Ly), indexing="ij")
    on_I = ((X + Y) % 2 == 0)[:, :, None]
    worst = 0.0
    for amps in _random_states(geo, seed=seed):
        a = np.where(on_I, amps, 0.0)
        nrm = np.linalg.norm(a)
        if nrm == 0:
            continue
        out = _evolved(geo, gauge, a / nrm)
        worst = max(worst, np.abs(np.where(~on_I, out, 0.0)).max())
    return _report("conserved_sublattice", worst, tol=1e-14, seed=seed)


def check_particle_hole(p, q, k_set=None, seed=DEFAULT_SEED):
    """W(phi, k)^* = W(-phi, -k) in every frame, plus the time-reversal
    relation Gamma W'(phi, k)^* Gamma = W'(-phi, -k)^dag."""
    if k_set is None:
        k_set = _random_k_set(q, seed=seed)
    gx = np.kron(np.eye(q), SIGMA_X)
    worst_ph = 0.0
    worst_tr = 0.0
    for frame in TimeFrame:
        for kx, ky in k_set:
            Wp = bloch_step_operator(p, q, kx, ky, frame).matrix
            Wm = bloch_step_operator(-p, q, -kx, -ky, frame).matrix
            worst_ph = max(worst_ph, np.abs(Wp.conj() - Wm).max())
    for kx, ky in k_set:
        Wp = bloch_step_operator(p, q, kx, ky, TimeFrame.PRIMED).matrix
        Wm = bloch_step_operator(-p, q, -kx, -ky, TimeFrame.PRIMED).matrix
        worst_tr = max(worst_tr, np.abs(gx @ Wp.conj() @ gx - Wm.conj().T).max())
    return _report("particle_hole", max(worst_ph, worst_tr),
                   details={"conjugation": worst_ph, "time_reversal": worst_tr},
                   seed=seed)


def _evolved(geo, gauge, amps):
    class _S:
        pass

    s = _S()
    s.geometry = geo
    s.amps = amps.astype(complex).copy()
    s.leakage = 0.0
    real_space_step(s, gauge)
    return s.amps


def run_symmetry_suite(q_values=range(1, 11), seed=DEFAULT_SEED):
    """The full identity suite: chiral, sublattices, particle-hole.

    Bloch identities run for flux 1/q over random k; the sublattice checks
    run on a small commensurate torus per q.
    """
    reports = []
    for q in q_values:
        p = 0 if q == 1 else 1
        reports.append((f"chiral p={p} q={q}", check_chiral(p, q, seed=seed)))
        reports.append((f"particle_hole p={p} q={q}", check_particle_hole(p, q, seed=seed)))
        Lx = max(2 * q, 4)
        geo = LatticeGeometry(Lx, 4)
        gauge = GaugeField.uniform_landau(p, q, geo)
        reports.append((f"alternating p={p} q={q}",
                        check_alternating_sublattice(gauge, seed=seed)))
        reports.append((f"conserved p={p} q={q}",
                        check_conserved_sublattice(gauge, seed=seed)))
    return reports


# ----------------------------------------------------------------------
# Dirac-point stability under perturbed coins (chiral vs non-chiral)
# ----------------------------------------------------------------------


def _perturbed_coin(kind, eps):
    if kind == "angle":
        th = np.pi / 4 + eps
        c, s = np.cos(th), np.sin(th)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "sigma_z":
        return np.diag(np.exp(-1j * np.array([eps, -eps]))) @ COIN
    raise ValueError(kind)


def perturbed_dirac_gap(kind, eps, p=0, q=1, scan=48):
    """Smallest local gap at E=0 after perturbing the coin.

    An angle perturbation keeps the chiral identity (sigma_x C sigma_x = C^T
    holds for every rotation angle) so the Dirac points can only move; a
    sigma_z factor breaks it and opens a gap of order eps.
    """
    coin = _perturbed_coin(kind, eps)
    phases = landau_phases(p, q)

    def gap(kx, ky):
        W = bloch_walk_from_phases(phases, kx, ky, coin=coin)
        E = quasienergies(W)
        return 2.0 * float(np.abs(E).min())

    kxs = np.linspace(-np.pi / q, np.pi / q, scan, endpoint=False)
    kys = np.linspace(-np.pi, np.pi, scan, endpoint=False)
    best = np.inf
    best_k = (0.0, 0.0)
    for kx in kxs:
        for ky in kys:
            g = gap(kx, ky)
            if g < best:
                best, best_k = g, (kx, ky)
    # local refinement
    from .spectra import _golden_refine

    kx, ky = best_k
    h = np.pi / scan
    for _ in range(12):
        kx = _golden_refine(lambda u: gap(u, ky), kx, h)
        ky = _golden_refine(lambda u: gap(kx, u), ky, h)
        h *= 0.4
    return gap(kx, ky)
