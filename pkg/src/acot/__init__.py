"""Contrastive optimal-transport subspace representations for ordered
feature sequences: a proximal-point transport solver, conjugate-gradient
optimization over orthonormal bases, an adversarial negative-sample
generator, projected-transport bounds certification, and sequence
classification on the learned representations.
"""

from .adversarial import (GanConfig, NegativeSet, classifier_accuracy,
                          fooling_rates, make_negatives,
                          make_random_negatives, train_classifier, train_wgan)
from .bounds import (BoundsReport, c2_value, estimate_bounds, gram_residual,
                     pythagorean_check)
from .classify import (KernelMatrix, PipelineConfig, build_kernel_matrix,
                       default_bandwidth, evaluate, grassmann_kernel,
                       kernel_knn_classify, linear_classify_predict,
                       linear_classify_train)
from .data import (Dataset, FeatureSequence, SyntheticConfig, load_dataset,
                   make_synthetic, save_dataset, sequence_mean)
from .errors import NumericalError
from .grassmann import (QuadraticTraceObjective, RcgConfig, SubspacePoint,
                        TangentVector, principal_angle_affinity,
                        project_tangent, random_subspace, rcg_minimize,
                        retract_qr)
from .nn import Arch, MlpParams, init_mlp, mlp_backward, mlp_forward, rmsprop_step
from .representation import (AcotConfig, AcotObjectiveParts, PoolingMode,
                             acot_objective, distortion_penalty,
                             learn_representation, ordering_penalty,
                             ordering_satisfaction, pool_sequence)
from .transport import (CostMatrix, Coupling, IpotConfig, Metric, cost_matrix,
                        exact_ot_uniform, ipot, transport_cost,
                        uniform_marginal)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
