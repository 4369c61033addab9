"""Kinematic-chain pose representations, losses and an attentive recurrent motion predictor."""

__version__ = "0.1.0"
