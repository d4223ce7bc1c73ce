"""Real-space time evolution: wave packets, cyclotron orbits, and chiral
transport along magnetic-domain boundaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .lattice import GaugeField, LatticeGeometry, QuarterCircleFlux, UniformFlux
from .operators import TimeFrame, bloch_step_operator, real_space_step, wrap_pi

TWO_PI = 2.0 * np.pi
SQRT2 = np.sqrt(2.0)


class LeakageError(RuntimeError):
    """Open-boundary leakage exceeded the validity threshold."""


@dataclass
class SpinorField:
    """Walker state: complex amplitudes over (x, y, spin)."""

    geometry: LatticeGeometry
    amps: np.ndarray
    leakage: float = 0.0

    def __post_init__(self):
        self.amps = np.ascontiguousarray(self.amps, dtype=complex)
        if self.amps.shape != (self.geometry.Lx, self.geometry.Ly, 2):
            raise ValueError("amplitude array must have shape (Lx, Ly, 2)")

    @classmethod
    def point_source(cls, geometry, site, spin=(1 / SQRT2, 1 / SQRT2)):
        amps = np.zeros((geometry.Lx, geometry.Ly, 2), dtype=complex)
        amps[site[0], site[1], :] = np.asarray(spin, dtype=complex)
        amps /= np.linalg.norm(amps)
        return cls(geometry, amps)

    def norm(self):
        return float(np.linalg.norm(self.amps))

    def probability(self):
        return np.abs(self.amps[..., 0]) ** 2 + np.abs(self.amps[..., 1]) ** 2

    def copy(self):
        return SpinorField(self.geometry, self.amps.copy(), self.leakage)


@dataclass(frozen=True)
class WavePacketSpec:
    """Gaussian packet: rms position width sigma, kinetic quasimomentum k0,
    spin from the selected Dirac-cone branch (or an explicit spinor)."""

    center: tuple
    sigma: float
    k0: tuple
    band_select: str | None = "upper_cone"   # 'upper_cone' | 'lower_cone' | None
    spin: tuple = (1.0, 0.0)


def cone_spinor(k0, band_select):
    """Eigenvector of the zero-field walk at k0 on the chosen cone branch.

    'upper_cone' is the branch with quasienergy above the touching energy of
    the nearest Dirac point (0 or pi, with circular ordering around pi).
    """
    W = bloch_step_operator(0, 1, k0[0], k0[1]).matrix
    from .operators import eig_unitary

    E, V = eig_unitary(W)
    e0 = 0.0 if np.abs(E).min() <= (np.pi - np.abs(E)).min() else np.pi
    rel = wrap_pi(E - e0)
    idx = int(np.argmax(rel)) if band_select == "upper_cone" else int(np.argmin(rel))
    return V[:, idx]


def prepare_packet(spec, geometry, gauge=None, tail_tol=1e-8):
    """Gaussian envelope x plane wave x cone spinor, normalized.

    k0 is the gauge-invariant (kinetic) quasimomentum of the packet; the
    plane-wave factor uses the canonical momentum k0 + A(center) so the
    packet actually sits at kinetic momentum k0 in the given gauge.
    """
    if spec.sigma <= 0:
        raise ValueError("packet width must be positive")
    Lx, Ly = geometry.Lx, geometry.Ly
    x0, y0 = spec.center
    X, Y = np.meshgrid(np.arange(Lx, dtype=float), np.arange(Ly, dtype=float),
                       indexing="ij")
    dx, dy = X - x0, Y - y0
    if geometry.bc_x == "periodic":
        dx = (dx + Lx / 2) % Lx - Lx / 2
    if geometry.bc_y == "periodic":
        dy = (dy + Ly / 2) % Ly - Ly / 2
    env = np.exp(-(dx ** 2 + dy ** 2) / (4.0 * spec.sigma ** 2))

    # tail check at the lattice boundary (open axes are hard walls)
    edge_amp = 0.0
    if geometry.bc_x == "open":
        edge_amp = max(edge_amp, env[0, :].max(), env[-1, :].max())
    if geometry.bc_y == "open":
        edge_amp = max(edge_amp, env[:, 0].max(), env[:, -1].max())
    if edge_amp > tail_tol:
        raise ValueError(
            f"packet tail {edge_amp:.2e} exceeds {tail_tol:.0e} at an open boundary"
        )

    kx, ky = spec.k0
    if gauge is not None:
        ix, iy = int(round(x0)) % Lx, int(round(y0)) % Ly
        kx = kx + gauge.ax[ix, iy]
        ky = ky + gauge.ay[ix, iy]
    plane = np.exp(1j * (kx * X + ky * Y))
    if spec.band_select in ("upper_cone", "lower_cone"):
        spinor = cone_spinor(spec.k0, spec.band_select)
    elif spec.band_select is None:
        spinor = np.asarray(spec.spin, dtype=complex)
        spinor = spinor / np.linalg.norm(spinor)
    else:
        raise ValueError(f"unknown band_select {spec.band_select!r}")
    amps = (env * plane)[:, :, None] * spinor[None, None, :]
    amps /= np.linalg.norm(amps)
    return SpinorField(geometry, amps)


# ----------------------------------------------------------------------
# trajectory bookkeeping
# ----------------------------------------------------------------------


def center_of_mass(prob, geometry):
    """Center of mass; periodic axes use the circular mean (seam safe)."""
    Lx, Ly = geometry.Lx, geometry.Ly
    X, Y = np.meshgrid(np.arange(Lx), np.arange(Ly), indexing="ij")
    out = []
    for coord, L, bc in ((X, Lx, geometry.bc_x), (Y, Ly, geometry.bc_y)):
        if bc == "periodic":
            w = (prob * np.exp(2j * np.pi * coord / L)).sum()
            out.append((L / TWO_PI) * np.angle(w) % L)
        else:
            out.append(float((prob * coord).sum() / prob.sum()))
    return tuple(out)


def _unwrap_track(coms, geometry):
    track = np.array(coms, dtype=float)
    for k, (L, bc) in enumerate(((geometry.Lx, geometry.bc_x),
                                 (geometry.Ly, geometry.bc_y))):
        if bc != "periodic":
            continue
        d = np.diff(track[:, k])
        jump = np.cumsum(np.where(d > L / 2, -L, np.where(d < -L / 2, L, 0.0)))
        track[1:, k] += jump
    return track


def fit_circle(track, discard_frac=0.05):
    """Algebraic least-squares circle fit (center, radius) of a 2D track."""
    n0 = int(len(track) * discard_frac)
    pts = np.asarray(track, dtype=float)[n0:]
    xs, ys = pts[:, 0], pts[:, 1]
    A = np.column_stack([2 * xs, 2 * ys, np.ones_like(xs)])
    b = xs ** 2 + ys ** 2
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    cx, cy = sol[0], sol[1]
    radius = float(np.sqrt(max(sol[2] + cx ** 2 + cy ** 2, 0.0)))
    return (float(cx), float(cy)), radius


def fit_period(steps, track, center, discard_frac=0.05):
    """Revolution period in steps from the unwrapped polar angle."""
    n0 = int(len(track) * discard_frac)
    pts = np.asarray(track, dtype=float)[n0:]
    t = np.asarray(steps, dtype=float)[n0:]
    ang = np.unwrap(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
    slope = np.polyfit(t, ang, 1)[0]
    if slope == 0:
        return np.inf
    return float(TWO_PI / abs(slope))


@dataclass
class TrajectoryAnalysis:
    steps: np.ndarray
    track: np.ndarray                  # unwrapped center-of-mass positions
    circle_center: tuple
    circle_radius: float
    period: float
    boundary_fraction: np.ndarray | None = None


@dataclass
class EvolveResult:
    state: SpinorField
    steps: np.ndarray
    maps: list
    analysis: TrajectoryAnalysis


def evolve(state, gauge, n_steps, record_every=10, frame=TimeFrame.ORIGINAL,
           supershift_m=1, fy_phases=None, boundary_distance=None,
           boundary_window=5.0, leakage_limit=1e-6, keep_maps=True):
    """Apply the walk n_steps times, recording probability maps and the
    running center of mass every record_every steps.

    Aborts with LeakageError when open-boundary leakage exceeds
    leakage_limit (the evolution is no longer trustworthy past that point).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    geo = state.geometry
    bmask = None
    if boundary_distance is not None:
        bmask = np.asarray(boundary_distance) <= boundary_window
    steps, maps, coms, fracs = [], [], [], []
    for n in range(1, n_steps + 1):
        real_space_step(state, gauge, frame=frame, supershift_m=supershift_m,
                        fy_phases=fy_phases)
        if state.leakage > leakage_limit:
            raise LeakageError(
                f"open-boundary leakage {state.leakage:.3e} exceeded "
                f"{leakage_limit:.0e} at step {n}"
            )
        if n % record_every == 0 or n == n_steps:
            prob = state.probability()
            steps.append(n)
            if keep_maps:
                maps.append(prob)
            coms.append(center_of_mass(prob, geo))
            if bmask is not None:
                fracs.append(float(prob[bmask].sum()))
    track = _unwrap_track(coms, geo)
    center, radius = fit_circle(track)
    period = fit_period(steps, track, center)
    analysis = TrajectoryAnalysis(
        np.asarray(steps), track, center, radius, period,
        np.asarray(fracs) if fracs else None,
    )
    return EvolveResult(state, np.asarray(steps), maps, analysis)


# ----------------------------------------------------------------------
# edge-transport experiment (quarter-circle magnetic island)
# ----------------------------------------------------------------------


@dataclass
class EdgeTransportResult:
    result: EvolveResult
    boundary_fraction: np.ndarray
    packet_counts: np.ndarray        # connected near-boundary components
    corner_transits: list            # (corner, step_start, step_end, bulk_increase)


def edge_transport_experiment(preset, geometry, start_site, n_steps=400,
                              record_every=10, spin=(1 / SQRT2, 1 / SQRT2),
                              window=5.0, fy_phases=None,
                              corner_radius=8.0, corner_threshold=0.08):
    """Launch a single-site walker next to a magnetic-domain boundary.

    Returns boundary fractions per recorded step, the number of connected
    near-boundary probability components (the two counter-propagating
    packets), and the bulk-fraction change across the first transit of each
    boundary corner.
    """
    bdist = preset.boundary_distance(geometry)
    if bdist[start_site[0] % geometry.Lx, start_site[1] % geometry.Ly] > 2.0:
        raise ValueError("start site must lie within 2 sites of the boundary")
    gauge = preset.gauge(geometry)
    state = SpinorField.point_source(geometry, start_site, spin)
    res = evolve(state, gauge, n_steps, record_every, fy_phases=fy_phases,
                 boundary_distance=bdist, boundary_window=window)
    bmask = bdist <= window
    counts = []
    for prob in res.maps:
        dens = np.where(bmask, prob, 0.0)
        lab, nlab = ndimage.label(dens > 0.2 * dens.max())
        counts.append(nlab)

    corners = preset.corners() if hasattr(preset, "corners") else []
    X, Y = np.meshgrid(np.arange(geometry.Lx, dtype=float),
                       np.arange(geometry.Ly, dtype=float), indexing="ij")
    transits = []
    bulk = 1.0 - res.analysis.boundary_fraction
    for corner in corners:
        near = np.hypot(X - corner[0], Y - corner[1]) <= corner_radius
        occup = np.array([prob[near].sum() for prob in res.maps])
        active = occup > corner_threshold
        # first contiguous transit window
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            continue
        start = idx[0]
        end = start
        while end + 1 < len(active) and active[end + 1]:
            end += 1
        transits.append((corner, int(res.steps[start]), int(res.steps[end]),
                         float(bulk[end] - bulk[start])))
    return EdgeTransportResult(res, res.analysis.boundary_fraction,
                               np.asarray(counts), transits)
