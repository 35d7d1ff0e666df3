"""Structure-preserving parametric finite element solver for axisymmetric
solid-state dewetting with strongly anisotropic surface energy and Willmore
regularization.

The film surface is a surface of revolution described by a generating curve
in the (r, z) half-plane. The evolution is surface diffusion coupled to
contact-line migration, discretized so that the enclosed volume is conserved
exactly and the total free energy never increases.
"""

from .anisotropy import (AnisotropyModel, ConfigurationError, StabilityCase,
                         StabilityLookup, StabilityMode, StabilityPolicy,
                         eval_gamma, minimal_stability, stability_table,
                         surface_energy_matrix, verify_stability_inequality)
from .config import (ConfigError, RunConfig, build_events,
                     build_initial_curve, build_model, build_newton,
                     build_params, config_to_dict, load_config, parse_config,
                     preset, PRESET_NAMES)
from .curve import (CurveError, GeneratingCurve, Topology, discrete_energy,
                    discrete_volume, initial_mu_S, mesh_ratio, recover_kappa,
                    segment_frames)
from .diagnostics import (ClosedRegion, ConvergenceTable, MeshQualityReport,
                          RegionError, convergence_harness, manifold_distance,
                          mesh_quality_study, time_interpolant)
from .evolve import (Branch, EventConfig, EventRecord, NewtonConfig,
                     RunResult, StepFailure, detect_events, evolve,
                     newton_step, seed_state, split_at_pinch)
from .forms import DofMap, PhysicsParams, SchemeState, StepSystem, f_half, volume_pairing
from .output import (read_snapshot, write_convergence, write_diagnostics,
                     write_mesh_study, write_run_outputs, write_snapshot,
                     write_stability_table, write_surface_obj)

__version__ = "0.1.0"
