"""Quasienergy band structures, gaps, the flux butterfly, Dirac points,
and stripe-geometry (ribbon) spectra with edge-localization weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import reduced_fractions
from .operators import (
    TimeFrame,
    bloch_step_operator,
    bloch_walk_from_phases,
    branch_window,
    eig_unitary,
    landau_phases,
    quasienergies,
    wrap_pi,
)

TWO_PI = 2.0 * np.pi


def _bz_grid(q, Nx, Ny):
    kxs = np.linspace(-np.pi / q, np.pi / q, Nx, endpoint=False)
    kys = np.linspace(-np.pi, np.pi, Ny, endpoint=False)
    return kxs, kys


def _choose_cut(all_energies, min_width=0.15):
    """Branch cut placed in the widest spectral gap (deterministically).

    Sorting and indexing of band states is only stable against wrap-around
    when the branch cut lies inside a gap of the spectrum. Candidate gaps
    narrower than `min_width` cannot be told apart from the sampling holes
    a conical touching leaves in a finite k-grid, so the standard cut at
    -pi is kept for (effectively) gapless spectra.
    """
    E = np.sort(wrap_pi(np.asarray(all_energies).ravel()))
    spacings = np.diff(E)
    wrap_spacing = E[0] + TWO_PI - E[-1]
    widths = np.concatenate([spacings, [wrap_spacing]])
    i = int(np.argmax(widths))
    if widths[i] < min_width:
        return -np.pi
    lo = E[i]
    hi = E[i + 1] if i < len(spacings) else E[0] + TWO_PI
    return wrap_pi(0.5 * (lo + hi))


@dataclass
class BandStructure:
    """Eigen data of the Bloch walk over the magnetic Brillouin zone.

    Energies are stored on the canonical branch (cut, cut + 2 pi], sorted
    ascending per k-point; the cut is placed inside a spectral gap so band
    indices never shuffle across the zone. `floquet_energies` gives the same
    data wrapped back to (-pi, pi].
    """

    p: int
    q: int
    kxs: np.ndarray
    kys: np.ndarray
    energies: np.ndarray            # (Nx, Ny, 2q), canonical branch
    cut: float
    frame: TimeFrame
    vectors: np.ndarray | None = None   # (Nx, Ny, 2q, 2q) columns per band

    @property
    def n_bands(self):
        return self.energies.shape[-1]

    def floquet_energies(self):
        return wrap_pi(self.energies)


def band_structure(p, q, Nx=32, Ny=32, frame=TimeFrame.ORIGINAL, store_vectors=True):
    """Diagonalize the Bloch walk on an Nx x Ny grid of the magnetic BZ."""
    if Nx < 4 or Ny < 4:
        raise ValueError("need at least a 4x4 k-grid")
    kxs, kys = _bz_grid(q, Nx, Ny)
    dim = 2 * q
    energies = np.empty((Nx, Ny, dim))
    vectors = np.empty((Nx, Ny, dim, dim), dtype=complex) if store_vectors else None
    for i, kx in enumerate(kxs):
        for j, ky in enumerate(kys):
            W = bloch_step_operator(p, q, kx, ky, frame).matrix
            if store_vectors:
                E, V = eig_unitary(W)
                energies[i, j] = E
                vectors[i, j] = V
            else:
                energies[i, j] = quasienergies(W)
    cut = _choose_cut(energies)
    # re-sort every k-point on the canonical branch
    Ec = branch_window(energies, cut)
    order = np.argsort(Ec, axis=-1, kind="stable")
    Ec = np.take_along_axis(Ec, order, axis=-1)
    if store_vectors:
        vectors = np.take_along_axis(vectors, order[:, :, None, :], axis=-1)
    return BandStructure(p, q, kxs, kys, Ec, cut, frame, vectors)


# ----------------------------------------------------------------------
# gaps
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Gap:
    lower: float        # top of the band below (canonical branch value)
    upper: float        # bottom of the band above
    width: float
    midgap: float       # representative energy, wrapped to (-pi, pi]
    below: int          # canonical band index just below the gap
    above: int          # canonical band index just above (modulo 2q)


@dataclass
class GapTable:
    gaps: list
    cut: float
    n_bands: int

    def __iter__(self):
        return iter(self.gaps)

    def __len__(self):
        return len(self.gaps)

    def midgaps(self):
        return [g.midgap for g in self.gaps]

    def containing(self, energy):
        """The gap whose circular interval contains `energy`, or None."""
        for g in self.gaps:
            span = g.upper - g.lower
            if np.mod(energy - g.lower, TWO_PI) < span:
                return g
        return None

    def band_groups(self):
        """Maximal runs of band indices separated by the reported gaps."""
        if not self.gaps:
            return [tuple(range(self.n_bands))]
        edges = sorted(g.below for g in self.gaps)
        groups = []
        for a, b in zip(edges, edges[1:] + [edges[0]]):
            members = []
            i = (a + 1) % self.n_bands
            while True:
                members.append(i)
                if i == b:
                    break
                i = (i + 1) % self.n_bands
            groups.append(tuple(members))
        return groups


def gap_table(bands, threshold=1e-6):
    """Spectral gaps of a band structure (including the wrap-around gap).

    A gap between adjacent canonically-ordered bands is reported when the
    bottom of the upper band clears the top of the lower band by more than
    `threshold` everywhere in the zone (an indirect-overlap check, so the
    reported intervals are true gaps of the full spectrum).
    """
    E = bands.energies.reshape(-1, bands.n_bands)
    tops = E.max(axis=0)
    bottoms = E.min(axis=0)
    n = bands.n_bands
    gaps = []
    for i in range(n):
        lo = tops[i]
        hi = bottoms[(i + 1) % n] + (TWO_PI if i == n - 1 else 0.0)
        width = hi - lo
        if width > threshold:
            gaps.append(Gap(lo, hi, width, wrap_pi(0.5 * (lo + hi)), i, (i + 1) % n))
    gaps.sort(key=lambda g: g.midgap)
    return GapTable(gaps, bands.cut, n)


# ----------------------------------------------------------------------
# the flux butterfly
# ----------------------------------------------------------------------


@dataclass
class ButterflyData:
    entries: list   # (Fraction, sorted eigenphase samples)

    def fluxes(self):
        return [f for f, _ in self.entries]


def butterfly(q_max, k_samples=8, frame=TimeFrame.ORIGINAL):
    """Sampled quasienergy spectrum for every reduced flux p/q, q <= q_max.

    Stores eigenphases only (no eigenvectors); each flux contributes the
    sorted union of the 2q eigenphases over a k_samples^2 grid.
    """
    if q_max < 2:
        raise ValueError("q_max must be at least 2")
    entries = []
    for frac in reduced_fractions(q_max):
        if frac == 1:
            continue
        p, q = frac.numerator, frac.denominator
        kxs, kys = _bz_grid(q, k_samples, k_samples)
        samples = []
        for kx in kxs:
            for ky in kys:
                W = bloch_step_operator(p, q, kx, ky, frame).matrix
                samples.append(quasienergies(W))
        entries.append((frac, np.sort(np.concatenate(samples))))
    return ButterflyData(entries)


# ----------------------------------------------------------------------
# Dirac points
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiracPoint:
    k: tuple
    energy: float     # 0.0 or pi
    gap: float        # refined local gap at the point


def _local_gap(p, q, kx, ky, at_pi):
    E = quasienergies(bloch_step_operator(p, q, kx, ky).matrix)
    if at_pi:
        return 2.0 * float((np.pi - np.abs(E)).min())
    return 2.0 * float(np.abs(E).min())


def _golden_refine(f, x0, h, iters=80, xtol=1e-12):
    """Golden-section minimization of f on [x0 - h, x0 + h]."""
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = x0 - h, x0 + h
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < xtol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def find_dirac_points(p, q, grid=48, tol=1e-8, refine_rounds=24):
    """Locate conical band touchings at quasienergies 0 and pi.

    A coarse scan of the local gap over the magnetic BZ seeds coordinate-wise
    golden-section refinement; points whose refined gap stays above `tol` are
    discarded. For nonzero flux the existence of such touchings is an
    empirical observation (verified here by construction, not proven).
    Results are deduplicated on the BZ torus and sorted lexicographically.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kxs, kys = _bz_grid(q, grid, grid)
    wx, wy = TWO_PI / q, TWO_PI
    found = []
    for at_pi in (False, True):
        gaps = np.empty((grid, grid))
        for i, kx in enumerate(kxs):
            for j, ky in enumerate(kys):
                gaps[i, j] = _local_gap(p, q, kx, ky, at_pi)
        thresh = 3.0 * max(wx, wy) / grid
        is_min = np.ones_like(gaps, dtype=bool)
        for shift, axis in ((1, 0), (-1, 0), (1, 1), (-1, 1)):
            is_min &= gaps <= np.roll(gaps, shift, axis=axis)
        seeds = [(kxs[i], kys[j]) for i, j in zip(*np.nonzero(is_min & (gaps < thresh)))]
        hx, hy = wx / grid, wy / grid
        for kx0, ky0 in seeds:
            kx, ky = kx0, ky0
            for _ in range(refine_rounds):
                kx = _golden_refine(lambda u: _local_gap(p, q, u, ky, at_pi), kx, hx)
                ky = _golden_refine(lambda u: _local_gap(p, q, kx, u, at_pi), ky, hy)
                g = _local_gap(p, q, kx, ky, at_pi)
                if g < tol * 1e-2:
                    break
                hx *= 0.35
                hy *= 0.35
            g = _local_gap(p, q, kx, ky, at_pi)
            if g < tol:
                kx = wrap_pi(kx * q) / q     # canonical BZ representative
                ky = wrap_pi(ky)
                found.append(DiracPoint((kx, ky), np.pi if at_pi else 0.0, g))
    # deduplicate on the torus
    out = []
    for pt in sorted(found, key=lambda d: (d.energy, round(d.k[0], 6), round(d.k[1], 6))):
        dup = False
        for kept in out:
            if kept.energy != pt.energy:
                continue
            dx = wrap_pi((pt.k[0] - kept.k[0]) * q) / q
            dy = wrap_pi(pt.k[1] - kept.k[1])
            if np.hypot(dx, dy) < 1e-4:
                dup = True
                break
        if not dup:
            out.append(pt)
    return out


# ----------------------------------------------------------------------
# ribbon (x-ring) spectra
# ----------------------------------------------------------------------


@dataclass
class RibbonSpectrum:
    """Spectrum of the x-periodic ring walk, resolved in k_y.

    `energies[j]` are the 2 Lx quasienergies at kys[j] on the canonical
    branch; edge weights give the probability fraction within `window`
    sites of each domain wall.
    """

    kys: np.ndarray
    energies: np.ndarray            # (Nky, 2 Lx)
    edge_weight_left: np.ndarray    # (Nky, 2 Lx)
    edge_weight_right: np.ndarray
    walls: tuple
    window: int
    cut: float
    Lx: int
    phases: np.ndarray
    vectors: np.ndarray | None = None


def detect_walls(flux_profile):
    """Sites where the per-column flux changes (cyclically)."""
    f = np.asarray(flux_profile, dtype=float)
    jumps = np.nonzero(~np.isclose(f, np.roll(f, 1)))[0]
    return tuple(int(x) for x in jumps)


def phases_from_flux_profile(flux_profile):
    """F phases theta(x) = 2 pi cumsum of the per-column plaquette flux.

    Requires the total flux through the x-ring to be an integer number of
    flux quanta, otherwise the ring walk is inconsistent.
    """
    f = np.asarray(flux_profile, dtype=float)
    total = f.sum()
    if abs(total - round(total)) > 1e-9:
        raise ValueError(
            f"total flux {total} through the periodic x-ring must be an integer"
        )
    return TWO_PI * np.concatenate([[0.0], np.cumsum(f)[:-1]])


def ribbon_spectrum(flux_profile=None, ky_grid=256, edge_window=5,
                    phases=None, walls=None, frame=TimeFrame.ORIGINAL,
                    store_vectors=False):
    """Diagonalize the x-ring walk for each k_y and classify edge weight.

    Either a per-column flux profile or an explicit F phase profile must be
    given. Walls are detected from the flux profile when not passed
    explicitly; with no walls all edge weights are zero.
    """
    if phases is None:
        if flux_profile is None:
            raise ValueError("need flux_profile or phases")
        phases = phases_from_flux_profile(flux_profile)
        if walls is None:
            walls = detect_walls(flux_profile)
    elif walls is None:
        walls = ()
    phases = np.asarray(phases, dtype=float)
    Lx = len(phases)
    if np.isscalar(ky_grid):
        kys = np.linspace(-np.pi, np.pi, int(ky_grid), endpoint=False)
    else:
        kys = np.asarray(ky_grid, dtype=float)
    dim = 2 * Lx
    x = np.arange(Lx)

    def window_mask(wall):
        return np.abs((x - wall + Lx / 2) % Lx - Lx / 2) <= edge_window

    left_mask = window_mask(walls[0]) if len(walls) > 0 else np.zeros(Lx, bool)
    right_mask = window_mask(walls[1]) if len(walls) > 1 else np.zeros(Lx, bool)

    raw_E = np.empty((len(kys), dim))
    wl = np.zeros((len(kys), dim))
    wr = np.zeros((len(kys), dim))
    vecs = np.empty((len(kys), dim, dim), dtype=complex) if store_vectors else None
    for j, ky in enumerate(kys):
        W = bloch_walk_from_phases(phases, 0.0, ky, frame)
        E, V = eig_unitary(W)
        raw_E[j] = E
        prob = np.abs(V.reshape(Lx, 2, dim)) ** 2
        px = prob.sum(axis=1)
        wl[j] = px[left_mask].sum(axis=0)
        wr[j] = px[right_mask].sum(axis=0)
        if store_vectors:
            vecs[j] = V
    cut = _choose_cut(raw_E)
    Ec = branch_window(raw_E, cut)
    order = np.argsort(Ec, axis=-1, kind="stable")
    Ec = np.take_along_axis(Ec, order, axis=-1)
    wl = np.take_along_axis(wl, order, axis=-1)
    wr = np.take_along_axis(wr, order, axis=-1)
    if store_vectors:
        vecs = np.take_along_axis(vecs, order[:, None, :], axis=-1)
    return RibbonSpectrum(kys, Ec, wl, wr, tuple(walls), edge_window, cut,
                          Lx, phases, vecs)
