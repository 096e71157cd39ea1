"""Secret-key agreement toolkit for RO PUFs.

Pipeline: decorrelate RO arrays with multiplication-free orthogonal 2D
transforms, fit truncated-Gaussian models to the coefficients, equalize,
quantize with equal-mass boundaries and Gray labels under a QoS
elimination window, and bind/reconstruct keys with a fuzzy commitment
scheme over a pluggable linear block code.
"""

from .data_io import (Device, DevicePopulation, ROArrayMeasurement, crop_upper,
                      generate_synthetic, load_dataset, save_dataset)
from .fcs import (HammingCode74, LinearBlockCode, RatePoint, RateRegion,
                  RepetitionCode, binary_entropy, enroll, leakage_by_enumeration,
                  rate_region, reconstruct)
from .models import (CoefficientModel, OutOfModelError, de_equalize, equalize,
                     estimate_noise_sigma, fit_truncated_gaussian,
                     load_model_catalog, q_function, q_inverse, save_model_catalog)
from .pipeline import (CoefficientAssignment, QuantizationPlan, fit_models,
                       key_agreement_trial, qos_curve, simulate_population,
                       threshold_design)
from .quantizer import (MemorylessReport, QuantizationOutcome, QuantizerSpec,
                        correctness_probability, design_boundaries,
                        elimination_ratio, gray_label, gray_unlabel,
                        joint_bit_error_and_memoryless_check, marginal_bit_error,
                        quantize_with_qos, usable_percent, worst_case_error_1bit)
from .transforms import (CoefficientGrid, TransformMatrix, build_large_transform,
                         decorrelation_efficiency, enumerate_seed_matrices,
                         fast_dwht_2d, forward_2d, inverse_2d,
                         load_transform_family, sample_covariance,
                         save_transform_family, select_transform,
                         sylvester_hadamard)

__version__ = "0.1.0"
