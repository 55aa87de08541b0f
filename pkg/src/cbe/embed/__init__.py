"""Token vectors: tokenization, skip-gram training, SIF pooling and file I/O."""

from cbe.embed.io import export_embeddings, import_embeddings
from cbe.embed.sgns import EmbeddingTable, SgnsConfig, sgns_loss_and_grad, train_skipgram
from cbe.embed.sif import SifConfig, SifEmbedder, sif_embed, sif_weight, token_frequencies
from cbe.embed.tokens import Vocabulary, build_vocab, tokenize

__all__ = [
    "EmbeddingTable",
    "SgnsConfig",
    "SifConfig",
    "SifEmbedder",
    "Vocabulary",
    "build_vocab",
    "export_embeddings",
    "import_embeddings",
    "sgns_loss_and_grad",
    "sif_embed",
    "sif_weight",
    "token_frequencies",
    "tokenize",
    "train_skipgram",
]
