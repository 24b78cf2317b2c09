"""Specification tests for quantile autoregressions with latent factors."""

from ._core import (
    LoadError,
    NumericError,
    ParameterError,
    extract_factors,
    fit_path,
    fit_skewt,
    simulate,
    skewt_cdf,
    skewt_pdf,
    skewt_quantile,
    spec_test,
    tau_grid,
)

__all__ = [
    "LoadError",
    "NumericError",
    "ParameterError",
    "extract_factors",
    "fit_path",
    "fit_skewt",
    "simulate",
    "skewt_cdf",
    "skewt_pdf",
    "skewt_quantile",
    "spec_test",
    "tau_grid",
]
