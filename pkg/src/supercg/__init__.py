"""TV-superiorized conjugate gradient reconstruction for parallel-beam CT."""

from .bench import ExperimentConfig, MethodParams, make_problem, run_bench, run_method
from .cg import run_cg, run_cg_k, run_s_cg, run_s_cg_cd, run_s_cg_k
from .fista import ProxConfig, run_fista, run_ista, tv_prox
from .operators import Image, LinearMap, Sinogram, spectral_norm
from .pcg import Preconditioner, fbp_reconstruct, run_pcg, run_s_pcg, run_s_pcg_k
from .projector import Projector, add_noise, make_geometry, make_phantom
from .solver import SolverConfig, SolveResult
from .tv import PerturbationSchedule, SmoothingParams, perturbed, tv_norm

__version__ = "0.1.0"
