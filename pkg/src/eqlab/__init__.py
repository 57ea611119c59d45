"""Numerical laboratory for interaction-energy minimizers on grid measures."""

__version__ = "0.1.0"

from .grid import (DiscreteMeasure, Domain, GridError, GridSpec, bump_measure, compactify,
                   make_domain, mollify, normalize, support_diameter, translate, truncate_rescale)
from .kernels import (Anisotropic, GaussianBounded, Kernel, KernelError, Newtonian, PowerSum,
                      Riesz, Tabulated, check_essential_convexity, evaluate, fourier_estimate,
                      laplacian, make_kernel, representation_reconstruct)
from .field import (ExternalPotential, KernelTable, PotentialField, balayage, bump_well,
                    cell_averaged_kernel, energy, generated_potential, height, zero_potential)
from .solver import SolverConfig, SolveTrace, frank_wolfe_minimize, height_ascent, microscopic_diffusion
from .analysis import (ELReport, ProbeReport, candidate_from_minimizer, existence_probe,
                       interpolation_convexity_check, nonexistence_scenario, scale_flow_derivative,
                       truncation_probe, verify_euler_lagrange)
