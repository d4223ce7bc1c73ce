"""Lattice geometry, link gauge fields, and flux-landscape presets.

Dimensionless conventions used throughout the package: lattice constant,
single-step duration, reduced Planck constant, and artificial charge all
equal to 1. Quasienergies live on the circle, reported in (-pi, pi] unless
a shifted branch is requested explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

TWO_PI = 2.0 * np.pi


class IncommensurateFluxError(ValueError):
    """Uniform flux p/q on a periodic axis requires q to divide the length."""


@dataclass(frozen=True)
class LatticeGeometry:
    """Finite rectangular lattice with independent boundary conditions."""

    Lx: int
    Ly: int
    bc_x: str = "periodic"
    bc_y: str = "periodic"

    def __post_init__(self):
        if self.Lx < 1 or self.Ly < 1:
            raise ValueError(f"lattice sizes must be positive, got {self.Lx}x{self.Ly}")
        for bc in (self.bc_x, self.bc_y):
            if bc not in ("periodic", "open"):
                raise ValueError(f"unknown boundary condition {bc!r}")

    @property
    def is_torus(self):
        return self.bc_x == "periodic" and self.bc_y == "periodic"


@dataclass
class GaugeField:
    """Peierls phases on the links of a finite lattice.

    ax[x, y] is the phase acquired on the hop (x, y) -> (x+1, y); ay[x, y]
    on (x, y) -> (x, y+1). The spin-down component couples with the opposite
    sign (charge -1 relative to spin-up).
    """

    geometry: LatticeGeometry
    ax: np.ndarray
    ay: np.ndarray

    def __post_init__(self):
        shape = (self.geometry.Lx, self.geometry.Ly)
        self.ax = np.ascontiguousarray(np.asarray(self.ax, dtype=float))
        self.ay = np.ascontiguousarray(np.asarray(self.ay, dtype=float))
        if self.ax.shape != shape or self.ay.shape != shape:
            raise ValueError("link-phase arrays must have shape (Lx, Ly)")

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def zero(cls, geometry):
        z = np.zeros((geometry.Lx, geometry.Ly))
        return cls(geometry, z, z.copy())

    @classmethod
    def uniform_landau(cls, p, q, geometry):
        """Landau gauge A = (0, B x, 0) with flux p/q per plaquette.

        On a periodic x-axis the magnetic unit cell (q sites along x) must
        tile the torus, otherwise the gauge is not single-valued and the
        constructor refuses; use `from_flux` for landscapes where a seam
        defect is acceptable.
        """
        p, q = int(p), int(q)
        if q < 1:
            raise ValueError("q must be a positive integer")
        if gcd(abs(p), q) not in (0, 1):
            raise ValueError(f"p/q = {p}/{q} must be a reduced fraction")
        if geometry.bc_x == "periodic" and geometry.Lx % q != 0:
            raise IncommensurateFluxError(
                f"flux {p}/{q} on a periodic axis of {geometry.Lx} sites: "
                f"Lx must be a multiple of q"
            )
        B = TWO_PI * p / q
        x = np.arange(geometry.Lx, dtype=float)[:, None]
        ax = np.zeros((geometry.Lx, geometry.Ly))
        ay = np.broadcast_to(B * x, (geometry.Lx, geometry.Ly)).copy()
        return cls(geometry, ax, ay)

    @classmethod
    def from_flux(cls, flux, geometry):
        """Gauge with ax = 0 and ay built by cumulative sums along x.

        Reproduces the requested per-plaquette flux exactly on all interior
        plaquettes; on a periodic x-axis the wrap column absorbs whatever
        flux defect the landscape leaves over (harmless as long as dynamics
        stays away from the seam).
        """
        flux = np.asarray(flux, dtype=float)
        if flux.shape != (geometry.Lx, geometry.Ly):
            raise ValueError("flux grid must have shape (Lx, Ly)")
        ay = TWO_PI * np.concatenate(
            [np.zeros((1, geometry.Ly)), np.cumsum(flux, axis=0)[:-1]], axis=0
        )
        ax = np.zeros_like(ay)
        return cls(geometry, ax, ay)

    # ------------------------------------------------------------------
    # derived quantities
    # ------------------------------------------------------------------

    def plaquette_flux(self):
        """Discrete curl of the link phases divided by 2 pi.

        Plaquette (x, y) is bounded by sites (x, y), (x+1, y), (x+1, y+1),
        (x, y+1); on open axes the last row/column of plaquettes does not
        exist and is reported as zero.
        """
        ax, ay = self.ax, self.ay
        circ = (
            ax
            + np.roll(ay, -1, axis=0)
            - np.roll(ax, -1, axis=1)
            - ay
        )
        if self.geometry.bc_x == "open":
            circ[-1, :] = 0.0
        if self.geometry.bc_y == "open":
            circ[:, -1] = 0.0
        return circ / TWO_PI

    def field_phases(self, direction):
        """Spin-resolved site phases of the magnetic-field operator F_d.

        Returns (up, dn): the spin-up phase at r is the line integral of A
        over the incoming link r - e_d -> r, the spin-down phase is the line
        integral over r + e_d -> r (i.e. minus the outgoing link). On open
        axes a missing link contributes zero phase.
        """
        if direction == "x":
            a, axis, bc = self.ax, 0, self.geometry.bc_x
        elif direction == "y":
            a, axis, bc = self.ay, 1, self.geometry.bc_y
        else:
            raise ValueError("direction must be 'x' or 'y'")
        up = np.roll(a, 1, axis=axis).copy()
        if bc == "open":
            if axis == 0:
                up[0, :] = 0.0
            else:
                up[:, 0] = 0.0
        dn = -a
        return up, dn

    def gauge_transformed(self, lam):
        """Apply the discrete gauge transformation A -> A + grad(lam)."""
        lam = np.asarray(lam, dtype=float)
        if lam.shape != self.ax.shape:
            raise ValueError("gauge function must be defined per site")
        ax = self.ax + np.roll(lam, -1, axis=0) - lam
        ay = self.ay + np.roll(lam, -1, axis=1) - lam
        return GaugeField(self.geometry, ax, ay)


# ----------------------------------------------------------------------
# flux-landscape presets
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class UniformFlux:
    """Homogeneous flux phi on every plaquette."""

    phi: float

    def flux_grid(self, geometry):
        return np.full((geometry.Lx, geometry.Ly), float(self.phi))

    def gauge(self, geometry):
        return GaugeField.from_flux(self.flux_grid(geometry), geometry)

    def boundary_distance(self, geometry):
        return np.full((geometry.Lx, geometry.Ly), np.inf)


@dataclass(frozen=True)
class StripeFlux:
    """phi_in inside the column stripe [x_left, x_right), phi_out elsewhere."""

    phi_out: float
    phi_in: float
    x_left: int
    x_right: int

    def flux_grid(self, geometry):
        x = np.arange(geometry.Lx)
        col = np.where((x >= self.x_left) & (x < self.x_right), self.phi_in, self.phi_out)
        return np.broadcast_to(col[:, None], (geometry.Lx, geometry.Ly)).astype(float).copy()

    def column_flux(self, Lx):
        x = np.arange(Lx)
        return np.where((x >= self.x_left) & (x < self.x_right), self.phi_in, self.phi_out)

    def gauge(self, geometry):
        return GaugeField.from_flux(self.flux_grid(geometry), geometry)

    def boundary_distance(self, geometry):
        X = np.arange(geometry.Lx, dtype=float)[:, None]
        L = geometry.Lx
        dl = np.abs((X - self.x_left + L / 2) % L - L / 2)
        dr = np.abs((X - self.x_right + L / 2) % L - L / 2)
        d = np.minimum(dl, dr)
        return np.broadcast_to(d, (geometry.Lx, geometry.Ly)).copy()


@dataclass(frozen=True)
class QuarterCircleFlux:
    """phi_in inside a quarter-disc island, phi_out outside.

    The island occupies {r: |r - center| <= radius, x >= cx, y >= cy}; its
    boundary consists of two straight radius segments and the 90-degree arc.
    """

    phi_out: float
    phi_in: float
    radius: float
    center: tuple = (0.0, 0.0)

    def _inside(self, px, py):
        cx, cy = self.center
        return (np.hypot(px - cx, py - cy) <= self.radius) & (px >= cx) & (py >= cy)

    def flux_grid(self, geometry):
        x = np.arange(geometry.Lx, dtype=float)
        y = np.arange(geometry.Ly, dtype=float)
        PX, PY = np.meshgrid(x + 0.5, y + 0.5, indexing="ij")
        return np.where(self._inside(PX, PY), self.phi_in, self.phi_out)

    def gauge(self, geometry):
        return GaugeField.from_flux(self.flux_grid(geometry), geometry)

    def corners(self):
        cx, cy = self.center
        return [(cx + self.radius, cy), (cx, cy + self.radius), (cx, cy)]

    def boundary_distance(self, geometry):
        cx, cy = self.center
        X, Y = np.meshgrid(
            np.arange(geometry.Lx, dtype=float),
            np.arange(geometry.Ly, dtype=float),
            indexing="ij",
        )
        ang = np.arctan2(Y - cy, X - cx)
        r = np.hypot(X - cx, Y - cy)
        arc = np.where((ang >= 0) & (ang <= np.pi / 2), np.abs(r - self.radius), np.inf)
        d1 = _segment_distance(X, Y, cx, cy, cx + self.radius, cy)
        d2 = _segment_distance(X, Y, cx, cy, cx, cy + self.radius)
        return np.minimum(arc, np.minimum(d1, d2))


def _segment_distance(px, py, ax, ay, bx, by):
    vx, vy = bx - ax, by - ay
    t = np.clip(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0)
    return np.hypot(px - (ax + t * vx), py - (ay + t * vy))


def reduced_fractions(q_max, lo=Fraction(0), hi=Fraction(1)):
    """All reduced fractions p/q with 1 <= q <= q_max in [lo, hi], sorted."""
    out = set()
    for q in range(1, q_max + 1):
        for p in range(int(np.ceil(lo * q)), int(np.floor(hi * q)) + 1):
            out.add(Fraction(p, q))
    return sorted(out)
