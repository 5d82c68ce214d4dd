"""Sobel-gradient MLP for handwritten character recognition.

Pipeline: 28x28 image -> signed Sobel derivatives -> per-channel min-max
scaling -> 1568-vector -> 3-hidden-layer MLP trained with Adam.
"""

from .features import featurize, featurize_batch, gradient_diagnostics, minmax_normalize, sobel_derivatives
from .idx import LabeledImageSet, SplitSpec, carve_validation, load_dataset, parse_idx, stratified_split
from .model import MlpConfig, Model, backward, forward, init_model, loss_softmax_xent, param_count, softmax
from .optim import Adam, EarlyStopping, ReduceLROnPlateau
from .store import load, save
from .training import TrainConfig, evaluate, saliency, top_confusions, train

__version__ = "0.1.0"
