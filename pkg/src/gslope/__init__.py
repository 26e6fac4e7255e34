"""Group SLOPE: group selection with a sorted L1 penalty on group effects."""

__version__ = "0.1.0"
