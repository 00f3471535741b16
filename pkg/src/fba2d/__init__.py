"""Hard-label black-box attack toolkit for real-vs-generated image detectors.

The attack walks the decision boundary of a binary detector with a
triangle-geometry line search carried out in the 2-D DCT domain, under a hard
query budget.  Initialization comes from an "adversarial soup" built on a
differentiable logistic surrogate, with a targeted fallback pool.  The package
also ships the synthetic oracles, dataset generator, metrics and CLI harness
used to benchmark the attack end to end.
"""

from .spectral import FrequencyMask, build_mask, dct2, idct2, sample_masked_direction
from .attack import (
    AttackConfig,
    AttackState,
    AttackTrace,
    FrequencyTriangleAttack,
    Subspace2D,
    TraceRecord,
    candidate,
    delta_next,
    make_subspace,
    run_attack,
    search_subspace,
    update_alpha,
)
from .oracles import (
    FreqEnergyOracle,
    HalfspaceOracle,
    HttpOracle,
    Oracle,
    OracleTransportError,
    QueryLedger,
    make_oracle,
    quantize_8bit,
)
from .mockserver import MockDetectorServer
from .dataset import generate_dataset, generate_image, load_manifest
from .surrogate import DctLogisticDetector, load_surrogate, save_surrogate
from .soup import (
    InitializationError,
    SoupConfig,
    build_soup_init,
    make_soup,
    mig_step,
    run_surrogate_attack,
    select_init,
)
from .metrics import (
    BenchmarkSummary,
    SampleMetrics,
    aggregate,
    compute_sample_metrics,
    psnr,
    rmse,
    ssim,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackState",
    "AttackTrace",
    "BenchmarkSummary",
    "DctLogisticDetector",
    "FreqEnergyOracle",
    "FrequencyMask",
    "FrequencyTriangleAttack",
    "HalfspaceOracle",
    "HttpOracle",
    "InitializationError",
    "MockDetectorServer",
    "Oracle",
    "OracleTransportError",
    "QueryLedger",
    "SampleMetrics",
    "SoupConfig",
    "Subspace2D",
    "TraceRecord",
    "aggregate",
    "build_mask",
    "build_soup_init",
    "candidate",
    "compute_sample_metrics",
    "dct2",
    "delta_next",
    "generate_dataset",
    "generate_image",
    "idct2",
    "load_manifest",
    "load_surrogate",
    "make_oracle",
    "make_soup",
    "make_subspace",
    "mig_step",
    "psnr",
    "quantize_8bit",
    "rmse",
    "run_attack",
    "run_surrogate_attack",
    "sample_masked_direction",
    "save_surrogate",
    "search_subspace",
    "select_init",
    "ssim",
    "update_alpha",
]
