"""seisfrag: synthetic ground motions, nonlinear shear-frame response, and
parametric/non-parametric seismic fragility curves with bootstrap
uncertainty quantification."""

__version__ = "0.1.0"

from .bootstrap import (BootstrapEnsemble, MedianIMStats, bootstrap_curves,
                        median_im, median_im_logstd, resample)
from .groundmotion import (GMParamDistributions, GroundMotionParams,
                           MarginalSpec, ModulatorCoeffs,
                           default_gm_distributions, filter_irf, frequency_at,
                           modulating_q, sample_gm_params,
                           sample_gm_params_batch, solve_modulator, synthesize)
from .intensity import (DemandRecord, IMRecord, arias_intensity,
                        effective_duration, im_record, pga,
                        pseudo_spectral_acceleration, spectral_acceleration,
                        t_alpha)
from .motion import Accelerogram, ingest_recorded, write_accelerogram
from .nonparametric import (Bandwidth1D, Bandwidth2D, BinSpec,
                            ConditionalHistogram, FragilityCurve,
                            bandwidth_lscv_2d, bandwidth_normal_reference,
                            bmcs_fragility, conditional_histogram,
                            default_im_grid, kde_1d, kde_2d, kde_fragility,
                            kernel_exceedance_term, scale_drift)
from .parametric import (DemandModelFit, LognormalCurve, SegmentedFit,
                         fit_linear_demand, fit_mle, fit_segmented,
                         lognormal_eval, lr_to_fragility,
                         segmented_to_fragility)
from .streams import RandomStream
from .structure import (HystereticState, ResponseHistory, ShearFrameModel,
                        bilinear_restoring, integrate, linear_sdof_response,
                        max_interstorey_drift, modal_analysis, rayleigh_coeffs,
                        uniform_shear_frame)
