"""Exact counterfactual inference on discrete SCMs, POMDP off-policy
evaluation, and counterfactually guided policy search."""

from cfrl._cfrl import *  # noqa: F401,F403
from cfrl._cfrl import __doc__  # noqa: F401

__version__ = "0.1.0"
