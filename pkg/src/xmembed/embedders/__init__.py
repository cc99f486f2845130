from .alias import AliasTable
from .base import EmbeddingCollapse, EmbeddingMatrix, TrainingDiverged
from .line import LINE
from .sdne import SDNE

__all__ = ["AliasTable", "EmbeddingCollapse", "EmbeddingMatrix", "TrainingDiverged", "LINE", "SDNE"]
