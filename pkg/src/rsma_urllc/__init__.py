"""Downlink multi-carrier RSMA resource management under finite-blocklength
URLLC constraints: channel simulation, R-ZF precoding, convex power/rate
allocation (iterative CCCP and iteration-free LBA), user grouping, and a
Monte-Carlo experiment harness."""

from .scenario import ScenarioConfig, derive_theta, derive_rng_stream

__all__ = ["ScenarioConfig", "derive_theta", "derive_rng_stream"]

__version__ = "0.1.0"
