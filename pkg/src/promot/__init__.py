"""promot: zeroth-order global optimization by transform-amplified smoothing.

The toolkit builds a smoothed surrogate of a black-box objective by averaging
a monotone transform of it under a shifted product kernel, then ascends the
surrogate with score-function gradient estimates.  Amplifying the transform
concentrates the surrogate's mass near the global maximizer, so a fixed
smoothing scale can localize it without continuation schedules.  A
leave-one-out control variate provides a variance-reduced estimator that is
still unbiased at any batch size >= 2.
"""

from .kernels import (
    GaussianKernel,
    GeneralizedGaussianKernel,
    HyperbolicSecantKernel,
    Kernel,
    LogisticKernel,
    QuadratureError,
    ShiftedProductKernel,
    StudentTKernel,
    compute_constants,
    make_kernel,
    shipped_kernels,
)
from .objectives import (
    Box,
    Objective,
    SoftmaxClassifier,
    ackley,
    attack_objective,
    attack_success,
    griewank,
    landscape_objective,
    make_synthetic_classifier,
    rosenbrock,
)
from .smoothing import (
    GradientEstimate,
    SmoothingSpec,
    default_ridge,
    loo_gradient,
    paired_second_moments,
    score_gradient,
    second_moment_probe,
    smoothed_value,
)
from .transforms import (
    ExponentialTransform,
    FracExponentialTransform,
    PowerExpHybridTransform,
    PowerTransform,
    RatioReport,
    SigmoidPowerTransform,
    SinhShiftTransform,
    SoftplusTransform,
    Transform,
    TransformDomainError,
    make_transform,
    ratio_monotonicity_check,
    shipped_transforms,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ExponentialTransform",
    "FracExponentialTransform",
    "GaussianKernel",
    "GeneralizedGaussianKernel",
    "GradientEstimate",
    "HyperbolicSecantKernel",
    "Kernel",
    "LogisticKernel",
    "Objective",
    "PowerExpHybridTransform",
    "PowerTransform",
    "QuadratureError",
    "RatioReport",
    "ShiftedProductKernel",
    "SigmoidPowerTransform",
    "SinhShiftTransform",
    "SmoothingSpec",
    "SoftmaxClassifier",
    "SoftplusTransform",
    "StudentTKernel",
    "Transform",
    "TransformDomainError",
    "ackley",
    "attack_objective",
    "attack_success",
    "compute_constants",
    "default_ridge",
    "griewank",
    "landscape_objective",
    "loo_gradient",
    "make_kernel",
    "make_synthetic_classifier",
    "make_transform",
    "paired_second_moments",
    "ratio_monotonicity_check",
    "rosenbrock",
    "score_gradient",
    "second_moment_probe",
    "shipped_kernels",
    "shipped_transforms",
    "smoothed_value",
    "__version__",
]
