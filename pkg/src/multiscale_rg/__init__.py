"""Multi-scale lattice dynamics, renormalization-group maps and spontaneous stochasticity."""
from .dyadic import DyadicTime, LatticePoint, dyadic, tau, time_decompose
from .lattice import (NothingCheckable, Violation, cantor_decode, cantor_encode,
                      cantor_grid, residual_check)
from .model import (BUILTIN_MODELS, MODEL_A, MODEL_B, PHASE_MODEL, ModelSpec,
                    ProblemSpec, Space, State, bits, phase, phase_value)
from .noise import Bernoulli, DiscretePhase, NoiseStream, UniformCircle, derive_seed
from .rg import (constant_map, convergence_metric, fixed_point_A, fixed_point_map,
                 jump_at_third, map_table_export, random_table_map, rg_apply,
                 rg_iterate, table_map)
from .solver import (BLOWUP, GLOBAL_STRONG, HORIZON_REACHED, BlowupReport, ConstAt,
                     Cutoff, FlowMap, MapReg, Pinned, RegularizationError, Solution,
                     blowup_time, eval_fractional, first_disagreement, flow_phi,
                     flow_psi, nonuniqueness_witness, solve_regularized, solve_strong)
from .stochastic import (EmpiricalKernel, KernelSampler, StochasticReg,
                         estimate_expectations, fit_convergence, limit_kernel_check,
                         noise_realization_map, phase_coefficients, sample_solution,
                         sampler_at, sampler_from_map, sampler_psi,
                         stochastic_rg_apply, stochastic_rg_iterate,
                         two_sample_kernel_test)

__version__ = "0.1.0"
