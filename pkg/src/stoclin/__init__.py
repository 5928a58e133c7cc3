"""Analysis and synthesis for linear Ito stochastic systems
dx = (Ax + Bu) dt + (Cx + Du) dw:

- lifted-operator construction on symmetric-matrix coordinates,
- spectra and mean-square / weak stability verdicts,
- generalized Lyapunov equations,
- mean-square stabilizability, unremovable spectra, PBH tests,
- exact observability and stochastic detectability,
- generalized algebraic Riccati equations (maximal / strong solutions),
- robust quadratic stabilization under norm-bounded uncertainty,
- exact moment propagation and Monte-Carlo validation.
"""

from .errors import (InternalConsistencyError, InvalidInputError,
                     NotSupportedError, NumericalFailureError, StoclinError)
from .gare import (DEFAULT_EPS_SCHEDULE, GareProblem, GareSolution,
                   classify_solution, compare_gare, epsilon_homotopy_strong,
                   gare_residual, solve_gare_maximal)
from .lift import (KronOperator, LiftedOperator, OutputLift, SvecIndexMap,
                   SystemQuad, build_closed_loop_operator, build_drift_operator,
                   build_kron_operator, build_output_lift,
                   classify_extra_spectrum, smat, svec, svec_dim)
from .lmi import (LinearMatrixExpr, SdpSolution, VarSpec, feasibility,
                  maximize, s_procedure_embed, schur_embed)
from .observability import (OutputSystem, check_observability_invariance,
                            detectability_spectrum_check, is_exactly_observable,
                            is_stochastically_detectable, liu_rank_criterion)
from .robust import (QuadStabCertificate, UncertaintyModel, assemble_qs_lmi,
                     sample_f_ball, synthesize_extended,
                     synthesize_quadratic_stabilizer,
                     verify_quadratic_stability)
from .sim import (SimConfig, compare_empirical_vs_exact,
                  euler_maruyama_ensemble, moment_trajectory)
from .spectra import (TOL_MARGIN, Spectrum, StabilityVerdict, is_ms_stable,
                      is_weakly_stable, spectral_abscissa, spectrum)
from .stability import (GenLyapProblem, SingularReport,
                        classify_lyapunov_solution, solve_gen_lyapunov,
                        sym_sqrt_psd)
from .stabilizability import (StabilizabilityReport, UnremovableSpectrumItem,
                              deterministic_pbh, find_c1_representation,
                              is_stabilizable, is_weakly_stabilizable,
                              scalar_analysis, stabilizing_gain,
                              stochastic_pbh, unremovable_spectra)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
