from .__version__ import __version__
from .config import Budget
from .metric import Clustering, MetricInstance, Objective
from .oracles import Graph

__all__ = [
    "Budget",
    "Clustering",
    "Graph",
    "MetricInstance",
    "Objective",
    "__version__",
]
