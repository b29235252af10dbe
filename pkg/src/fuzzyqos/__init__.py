"""Policy-driven QoS admission control with fuzzy-rule-based class allocation."""

__version__ = "0.1.0"
