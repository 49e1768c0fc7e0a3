"""Near-neighbor preserving dimensionality reduction for doubling subsets of l1."""

from .ann_index import AnnIndex, build_index, linear_scan_oracle, query
from .embedding import (DimensionPlan, EmbeddedDataset, GridEmbedding, NetEmbedding, embed_dataset_grid,
                        embed_dataset_net, embed_query, estimate_doubling_constant, plan_dimension)
from .grid_partition import ShiftedGrid, build_cover, cell_of, make_grid
from .net_builder import NetResult, brute_force_net, build_approx_net, verify_net
from .projection import CauchyMatrix, make_projection, project
from .rng import RandomSeed

__all__ = [
    "AnnIndex", "CauchyMatrix", "DimensionPlan", "EmbeddedDataset", "GridEmbedding", "NetEmbedding",
    "NetResult", "RandomSeed", "ShiftedGrid", "brute_force_net", "build_approx_net", "build_cover",
    "build_index", "cell_of", "embed_dataset_grid", "embed_dataset_net", "embed_query",
    "estimate_doubling_constant", "linear_scan_oracle", "make_grid", "make_projection",
    "plan_dimension", "project", "query", "verify_net",
]
