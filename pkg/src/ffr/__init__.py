"""Machine-translation toolkit for diacritic-rich low-resource language pairs.

Corpus analysis and splitting, diacritic-aware tokenization, a GRU
encoder-decoder with additive attention trained by a built-in reverse-mode
gradient engine, BLEU/GLEU evaluation, and a human scoring service.
"""

__version__ = "0.1.0"
