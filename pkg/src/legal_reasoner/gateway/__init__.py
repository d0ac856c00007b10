"""Model gateway: templates, completion backends and embedders."""

from .backends import CompletionRequest, CompletionResult, Decoding, HttpChatBackend, ModelBackend
from .embeddings import Embedder, EmbeddingVector, HttpEmbedder, TrigramEmbedder, cosine_similarity
from .gateway import ModelGateway, UsageLedger, UsageSnapshot, build_gateway
from .scripted import ScriptedBackend
from .templates import PromptTemplate, TemplateLibrary, render

__all__ = [
    'CompletionRequest', 'CompletionResult', 'Decoding', 'HttpChatBackend', 'ModelBackend',
    'Embedder', 'EmbeddingVector', 'HttpEmbedder', 'TrigramEmbedder', 'cosine_similarity',
    'ModelGateway', 'UsageLedger', 'UsageSnapshot', 'build_gateway',
    'ScriptedBackend', 'PromptTemplate', 'TemplateLibrary', 'render',
]
