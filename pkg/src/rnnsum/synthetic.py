"""Synthetic corpora for overfitting experiments and protocol tests.

Each document is a few sentences of random tokens over a small vocabulary;
its reference summary is a copy of a few randomly chosen sentences, so the
greedy label oracle recovers those sentences as the positive set.
"""

from __future__ import annotations

import numpy as np

from .corpus import Document


def synthetic_corpus(
    rng: np.random.Generator,
    n_docs: int = 20,
    vocab_size: int = 60,
    sentence_range: tuple[int, int] = (8, 12),
    words_range: tuple[int, int] = (4, 8),
    positives_range: tuple[int, int] = (2, 3),
) -> list[Document]:
    tokens = [f"w{i:02d}" for i in range(vocab_size)]
    docs = []
    for d in range(n_docs):
        n_sents = int(rng.integers(sentence_range[0], sentence_range[1] + 1))
        sentences = []
        for _ in range(n_sents):
            n_words = int(rng.integers(words_range[0], words_range[1] + 1))
            sentences.append([tokens[i] for i in rng.choice(vocab_size, n_words, replace=False)])
        n_pos = int(rng.integers(positives_range[0], positives_range[1] + 1))
        chosen = sorted(int(i) for i in rng.choice(n_sents, n_pos, replace=False))
        summary = [list(sentences[i]) for i in chosen]
        docs.append(Document(f"doc-{d:03d}", sentences, summary=summary))
    return docs
