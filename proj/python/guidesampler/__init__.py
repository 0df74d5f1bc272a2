"""Guided discrete flow sampling on enumerable state spaces."""

import json

from ._core import (
    CapabilityError,
    ConfigError,
    DomainError,
    Error,
    SizeError,
    TabularDistribution,
    brute_force_posterior,
    check_names,
    decode_index,
    empirical,
    encode_index,
    run_cli,
    sample,
    tv_distance,
)


def run_check(name, seed=None, threads=1):
    """Run one acceptance check; returns its JSON record as a dict."""
    from . import _core

    args = {"threads": threads}
    if seed is not None:
        args["seed"] = seed
    return json.loads(_core._run_check(name, **args))


__all__ = [
    "CapabilityError",
    "ConfigError",
    "DomainError",
    "Error",
    "SizeError",
    "TabularDistribution",
    "brute_force_posterior",
    "check_names",
    "decode_index",
    "empirical",
    "encode_index",
    "run_check",
    "run_cli",
    "sample",
    "tv_distance",
]
