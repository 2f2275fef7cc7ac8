"""Instantaneous phase/envelope features of ROI time series and three-class KNN evaluation."""

__version__ = "0.1.0"
