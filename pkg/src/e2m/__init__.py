"""Regression with metric-space outputs through learned Frechet-mean weights.

A neural network maps predictors to simplex weights over a fixed set of
anchor outputs; the prediction is the weighted Frechet mean of the anchors.
"""

__version__ = "0.1.0"
