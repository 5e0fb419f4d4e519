"""Sentence encoder training from automatically mined paraphrase pairs.

Pipeline: bitext paraphrase mining -> siamese contrastive training with an
LSTM pooling layer -> frozen-embedding probing evaluation.
"""

__version__ = "0.1.0"
