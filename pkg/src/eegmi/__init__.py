"""eegmi: imagined left/right fist classification from raw multi-channel EEG.

Subpackages: edf ingestion and epoching, DSP (Butterworth/FFT/Welch), a
from-scratch neural network engine with first-order optimizers, training
protocols with early stopping, and a pipeline CLI.
"""

__version__ = "0.1.0"
