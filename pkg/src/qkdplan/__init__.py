"""Budget-constrained planning of hybrid QKD networks as a MILP."""

__version__ = "0.1.0"
