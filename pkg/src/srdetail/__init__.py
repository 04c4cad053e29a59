"""Full-reference detail-restoration metrics for super-resolution output."""

__version__ = "0.1.0"

from .degrade import (
    DegradeConfig,
    NoiseParams,
    add_noise,
    bd_downsample,
    bicubic_resize,
    gaussian_blur,
    prepare_pair,
    translate,
)
from .erqa import (
    ErqaConfig,
    ErqaScore,
    MatchMasks,
    ShiftCandidate,
    enumerate_shifts,
    erqa_score,
    erqa_sequence,
    f_beta,
    rank_shifts,
    render_heatmap,
    sequential_match,
    shift_similarity,
)
from .frame_io import Frame, FrameError, FrameSequence, load_frame, load_sequence, save_frame, to_luma
from .gradients import GradientConfig, GradientField, compute_gradients, cosine_match, percentile_filter
from .stats import (
    AbilityVector,
    ComparisonRecord,
    FeatureMatrix,
    bt_fit,
    global_shift_psnr,
    kmedoids,
    plcc,
    psnr,
    shift_distribution,
    srcc,
    ssim,
)
