"""Release version of the dwbsim package."""

__version__ = "0.3.0"
