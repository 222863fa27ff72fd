"""Age-dependent saccadic model of visual attention."""

from .engine import (
    MemoryState,
    Scanpath,
    ViewerProfile,
    batch_generate,
    generate_scanpath,
    load_profile,
    memory_weight,
    sample_candidates,
    save_profile,
    scanpath_plausibility,
    select_fixation,
    transition_map,
)
from .errors import (
    ConfigurationError,
    DegenerateMapError,
    EstimationError,
    MetricError,
    ParseError,
    SaccadicError,
    StarvedCellError,
    ValidationError,
)
from .eyedata import (
    CrownHistogram,
    FixationPoint,
    FixationSequence,
    SaccadeSample,
    SaliencyGrid,
    center_bias_crowns,
    fixation_saliency_map,
    load_saliency,
    parse_fixation_log,
    saccades_from_sequence,
)
from .metrics import MetricReport, auc_borji, auc_judd, cc, emd, evaluate_all, nss, sim
from .statmodel import (
    JointSaccadeDistribution,
    KsResult,
    SpatialDistributionSet,
    botev_bandwidth,
    estimate_joint,
    estimate_spatial_set,
    evaluate_density,
    kl_divergence,
    ks2d_test,
    silverman_bandwidth,
)

__version__ = "0.1.0"
