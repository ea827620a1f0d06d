"""Exact, spectral and learned estimates of the Cheeger constant of regular graphs."""
from .cheeger import CheegerResult, cheeger_exact, cheeger_naive
from .estimators import BoundSet, LinearModel, bounds, deviation, fit_linear, predict_linear
from .graph import Graph, Seed, generate_regular, validate
from .spectral import Spectrum, spectral_gap, spectrum
