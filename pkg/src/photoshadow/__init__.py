"""Classical-shadow tomography on a simulated photonic processor."""

from .analysis import (AnalysisReport, LinearFit, ModelInconsistencyError, NoHorizonError, analyze,
                       closed_loop_recovery, detect_horizon, estimate_epsilon, estimate_p, model_floor,
                       predict_mse_curve, scaled_error_fit, systematic_floor)
from .haar import (MomentIndex, RngSeed, fourth_moment_analytic, fourth_moment_mc, reduced_fourth_moment,
                   sample_haar, sample_haar_batch, weingarten_value)
from .matcore import (DimensionError, Spectrum, frobenius_distance, purity, spectral_decompose,
                      validate_unitary)
from .mesh import (MeshConfig, MZICell, SubspaceEmbedding, compose_mesh, decompose_unitary, embed_unitary,
                   perturb_mesh, unit_cell_matrix)
from .noise import (NoiseModel, apply_depolarizing, coherent_error, distorted_state, noisy_probabilities,
                    sample_coherent_distortion)
from .shadow import (Protocol, ProtocolSpec, ReconstructionResult, ScalingSeries, Snapshot, expected_mse,
                     reconstruct, run_protocol, simulate_replications, snapshot_click_estimator,
                     snapshot_intensity_estimator)

__version__ = "0.1.0"
