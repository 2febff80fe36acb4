"""Python access to the cfbench core: task definitions, metrics and experiment runs."""

from ._cfbench import (
    ConfigError,
    DataError,
    FormatError,
    NumericalError,
    __version__,
    cf_threshold,
    classify_cf,
    experiments,
    list_slts,
    make_slt,
    omega_all,
    quality_from_curve,
    report,
    run,
)

__all__ = [
    "ConfigError",
    "DataError",
    "FormatError",
    "NumericalError",
    "__version__",
    "cf_threshold",
    "classify_cf",
    "experiments",
    "list_slts",
    "make_slt",
    "omega_all",
    "quality_from_curve",
    "report",
    "run",
]
