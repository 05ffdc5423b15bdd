"""qvi-lab: quasi-variational inequalities of obstacle type."""

__version__ = "0.1.0"
