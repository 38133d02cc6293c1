"""Minimum relative-entropy Markov policies with prescribed first-arrival marginals."""

import json

from ._core import (
    Policy,
    Problem,
    StopbridgeError,
    __version__,
    arrival,
    induced_marginals,
    load_problem,
    parse_problem,
    simulate,
    sinkhorn_partial,
    solve,
    telescopic_expand,
)
from ._core import verify_json as _verify_json


def verify(problem, cap=None):
    """Audit the solved policy against the path-space oracle; returns the report as a dict."""
    return json.loads(_verify_json(problem, cap))


__all__ = [
    "Policy",
    "Problem",
    "StopbridgeError",
    "__version__",
    "arrival",
    "induced_marginals",
    "load_problem",
    "parse_problem",
    "simulate",
    "sinkhorn_partial",
    "solve",
    "telescopic_expand",
    "verify",
]
