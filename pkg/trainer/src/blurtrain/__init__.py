"""blurtrain: regression CNN for linear motion-blur (length, angle) prediction."""

from .data import BlurCropDataset, read_manifest, split_by_crop
from .labels import to_native, to_normalized
from .model import ToyRegressor, build_model
from .predict import predict
from .train import TrainConfig, TrainResult, apply_preset, load_checkpoint, paper_overrides, train

__version__ = "0.1.0"
