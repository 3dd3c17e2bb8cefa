"""Integer-only neural network training with direct feedback alignment."""

from .activations import Activation
from .matrix import IntMatrix, Overflow, overflow_policy
from .network import Network, build, deserialize, dfa_backward, bp_backward, forward, predict, serialize
from .rng import Rng
from .trainer import Mode, TrainConfig, train

__all__ = [
    "Activation", "IntMatrix", "Overflow", "overflow_policy", "Network", "build", "deserialize",
    "dfa_backward", "bp_backward", "forward", "predict", "serialize", "Rng", "Mode", "TrainConfig", "train",
]
__version__ = "0.1.0"
