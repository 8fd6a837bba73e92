from .graph import (
    Graph,
    IdMap,
    delete_edge,
    delete_node,
    disjoint_union,
    ego_nodes,
    induced_subgraph,
)
from .io import export_graph, load_graph, load_graph_snapshot, save_graph
from .sbm import SbmSpec, generate_sbm
from .split import NodeSplit, split_train_test
