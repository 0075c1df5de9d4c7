"""Offline feature-extraction tool: runs a frozen Whisper encoder over
dataset audio and dumps per-layer representation matrices plus manifests
in the poolprobe engine's file formats."""

from .audio import load_audio, log_mel
from .datasets import (
    LabeledUtterance,
    generic_labels,
    iemocap_labels,
    shemo_labels,
    write_manifest,
)
from .encoder import ENCODER_SIZES, EncoderRunner
from .fea import write_fea

__version__ = "0.1.0"
