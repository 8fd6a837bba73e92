"""
gerk trains sharded graph neural networks that can forget training nodes and
edges exactly, by retraining only the shard that held them.
"""

from .aggregation import ImportanceScores, OptAggrConfig
from .errors import GerkError
from .gnn import Aggregator, GnnConfig, Updater
from .graph import Graph, SbmSpec, generate_sbm, load_graph, split_train_test
from .partition import PartitionConfig, ShardAssignment
from .unlearn import Eraser, EraserConfig, EraserState, UnlearnReport, UnlearnRequest

__version__ = "0.1.0"
