"""Heterogeneous treatment effect estimation with meta-learners and a semi-synthetic benchmark harness."""
__version__ = "0.1.0"
