"""Build conversational RAG benchmarks from encyclopedia pages and score RAG pipelines on them."""

__version__ = "0.1.0"
