"""Semi-supervised neural architecture assessor.

An auto-encoder learns architecture embeddings, an RBF relation graph couples
labeled and unlabeled cells, and a two-layer GCN regresses performance.  A
deterministic synthetic oracle stands in for trained-network accuracy.
"""

__version__ = "0.1.0"
