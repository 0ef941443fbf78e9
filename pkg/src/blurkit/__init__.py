"""blurkit: linear motion-blur kernels, blurred datasets, and evaluation."""

from .kernels import (
    KernelCatalog,
    KernelError,
    PixelKernel,
    build_catalog,
    canonicalize_prediction,
    bresenham_line,
    identity_kernel,
    kernel_dims,
    quantize_angle,
    rasterize_line,
    realize_kernel,
    wrap_angle,
)
from .imaging import (
    ImagingError,
    add_gaussian_noise,
    as_image,
    convolve,
    load_image,
    random_crop,
    save_image,
    variance_to_snr_db,
)
from .dataset import (
    BlurSampleRecord,
    DatasetError,
    Manifest,
    SourceShortfallError,
    denormalize_labels,
    distribution_report,
    generate_dataset,
    normalize_labels,
    reproduce_record,
    subset,
)
from .evaluate import (
    ErrorRatioRecord,
    EvalError,
    EvalReport,
    cumulative_error_histogram,
    deblur,
    error_ratio,
    evaluate_predictions,
    pad_to_odd_square,
    r2_score,
    read_predictions,
    richardson_lucy,
    ssd,
    wiener_deconvolve,
    write_predictions,
)

__version__ = "0.1.0"
