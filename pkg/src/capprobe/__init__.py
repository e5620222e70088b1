"""capprobe: measure information loss in single-vector text encoders.

Builds a typed corpus of compositional captions, trains a conditional
decoder probe on frozen caption embeddings, and scores text-only
recoverability plus multimodal image/caption matching.
"""

__version__ = "0.1.0"
