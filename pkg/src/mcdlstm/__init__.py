"""Desk-scale, bit-accurate model of a streaming FPGA accelerator for
Monte-Carlo-Dropout LSTM networks, with the matching analytical resource and
latency models and a design-space-exploration frontend."""

from .engine import Arch, NetworkParams, Prediction, build_network, forward_once, mc_predict
from .fxp import ACC_FORMAT, ACT_FORMAT, Fx, QFormat, quantize
from .hwmodel import CostReport, HwConfig, cost_report
from .mcrng import BernoulliSampler, Lfsr, MaskSet

__version__ = "0.1.0"

__all__ = [
    "Arch",
    "NetworkParams",
    "Prediction",
    "build_network",
    "forward_once",
    "mc_predict",
    "Fx",
    "QFormat",
    "quantize",
    "ACT_FORMAT",
    "ACC_FORMAT",
    "CostReport",
    "HwConfig",
    "cost_report",
    "BernoulliSampler",
    "Lfsr",
    "MaskSet",
    "__version__",
]
