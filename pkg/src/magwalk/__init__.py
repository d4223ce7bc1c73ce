"""Magnetic discrete-time quantum walks on the 2D square lattice.

Simulation and analysis of the walk protocol W = F S_y C S_x C with
artificial gauge fields: quasienergy spectra and the flux butterfly,
Chern and spectral-flow gap invariants, edge-mode transport along magnetic
domain walls, and the Floquet phase-imprinting realism model.
"""

__version__ = "0.1.0"

from .lattice import (GaugeField, IncommensurateFluxError, LatticeGeometry,
                      QuarterCircleFlux, StripeFlux, UniformFlux)
from .operators import (COIN, BlochUnitary, EffectiveHamiltonian,
                        GaplessAtCutError, TimeFrame, bloch_step_operator,
                        build_coin, effective_hamiltonian, quasienergies,
                        real_space_step, spectral_flow_operator, wrap_pi)
from .spectra import (BandStructure, ButterflyData, DiracPoint, GapTable,
                      RibbonSpectrum, band_structure, butterfly,
                      find_dirac_points, gap_table, ribbon_spectrum)
from .topology import (ChernResult, DiracCharge, RLBLResult,
                       bulk_boundary_check, chern_number, chern_spectrum,
                       dirac_charges, rlbl_invariant, rlbl_spectrum,
                       winding_number)
from .symmetry import (SymmetryReport, check_alternating_sublattice,
                       check_chiral, check_conserved_sublattice,
                       check_particle_hole, run_symmetry_suite)
from .dynamics import (SpinorField, TrajectoryAnalysis, WavePacketSpec,
                       edge_transport_experiment, evolve, prepare_packet)
from .realism import (PhaseProfile, field_op_from_profile, gap_width_scan,
                      p_ex_perturbative, p_ex_splitstep, sawtooth_profile)
