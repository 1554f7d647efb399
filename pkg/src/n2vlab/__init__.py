"""Stability and quality measurements for node2vec embeddings."""
from .graph import Graph, SbmSpec, edge_density, generate_er, generate_sbm, les_miserables, load_edge_list
from .skipgram import EmbedParams, PointCloud, train
from .walks import WalkParams, build_corpus

__version__ = "0.1.0"

__all__ = [
    "Graph", "SbmSpec", "edge_density", "generate_er", "generate_sbm", "les_miserables",
    "load_edge_list", "EmbedParams", "PointCloud", "train", "WalkParams", "build_corpus",
]
