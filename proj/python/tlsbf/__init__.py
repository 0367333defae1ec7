"""Sparse additive smooth backfitting with two-stage transfer learning."""

from ._tlsbf import (
    ConfigError,
    DataError,
    DomainError,
    Error,
    Fit,
    IllConditioned,
    InvalidBandwidth,
    detect,
    fit,
    rot_bandwidth,
    simulate,
    tl_fit,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DomainError",
    "Error",
    "Fit",
    "IllConditioned",
    "InvalidBandwidth",
    "detect",
    "fit",
    "rot_bandwidth",
    "simulate",
    "tl_fit",
]
