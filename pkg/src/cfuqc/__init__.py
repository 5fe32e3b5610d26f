"""cfuqc: colony-counting quality-control pipeline.

Synthetic plate generation, a pre-screening agent, two independent counting
agents, a consensus gate with human-review escalation, feedback-driven
recalibration, hash-chained audit persistence, and an HTTP/CLI front end.
"""

__version__ = "0.1.0"
