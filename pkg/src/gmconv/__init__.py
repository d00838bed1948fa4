"""Graph convolutional networks driven by graph matching.

Convolution here is not a sliding window: each vertex's l-hop
neighborhood subgraph is matched against a small learnable filter graph
by solving an assignment problem, and the matching score becomes the
vertex's output attribute.  Pooling contracts the graph along community
structure instead of a pixel lattice, so the whole pipeline runs on
irregular graphs.
"""

from ._lsap import AssignmentError, solve_lsap
from .data import (DataError, Dataset, GridSpec, build_mixed, filter_classes,
                   find_mnist, grid_graph_from_array, image_to_grid_graph,
                   load_mnist_idx, load_rag_dataset, make_grid_dataset,
                   make_splits, read_pgm, rotate_image, synthesize_digits,
                   write_pgm)
from .gradcheck import LAYER_KINDS, relative_error, run_all
from .graphs import (AttributedGraph, FilterGraph, GraphError,
                     GraphParseError, NeighborhoodGraph, l_hop_neighborhood,
                     load_graph, save_graph)
from .layers import (ConvGradients, ConvLayer, ConvTape, DenseLayer,
                     LayerError, PoolPartition, conv_backward, conv_forward,
                     dense_backward, dense_forward, global_avg_pool,
                     global_avg_pool_backward, init_uniform, louvain_pool,
                     pool_backward, relu_backward, relu_forward,
                     softmax_cross_entropy)
from .matching import (Matching, MatchingError, edge_similarity,
                       gms_bp_edges, gms_brute_force, gms_no_edges,
                       node_similarity, score_assignment)
from .network import GraphNetwork, load_checkpoint, save_checkpoint
from .optim import (AdamState, NumericalError, TrainConfig, TrainError,
                    adam_step, evaluate, train)
from .pooling import louvain_levels, modularity

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AssignmentError", "AttributedGraph", "ConvGradients",
    "ConvLayer", "ConvTape", "DataError", "Dataset", "DenseLayer",
    "FilterGraph", "GraphError", "GraphNetwork", "GraphParseError",
    "GridSpec", "LAYER_KINDS", "LayerError", "Matching", "MatchingError",
    "NeighborhoodGraph", "NumericalError", "PoolPartition", "TrainConfig",
    "TrainError", "adam_step", "build_mixed", "conv_backward",
    "conv_forward", "dense_backward", "dense_forward", "edge_similarity",
    "evaluate", "filter_classes", "find_mnist", "global_avg_pool",
    "global_avg_pool_backward", "gms_bp_edges", "gms_brute_force",
    "gms_no_edges", "grid_graph_from_array", "image_to_grid_graph",
    "init_uniform", "l_hop_neighborhood", "load_checkpoint", "load_graph",
    "load_mnist_idx", "load_rag_dataset", "louvain_levels", "louvain_pool",
    "make_grid_dataset", "make_splits", "modularity", "node_similarity",
    "pool_backward", "read_pgm", "relative_error", "relu_backward",
    "relu_forward", "rotate_image", "run_all", "save_checkpoint",
    "save_graph", "score_assignment", "softmax_cross_entropy",
    "solve_lsap", "synthesize_digits", "train", "write_pgm",
]
