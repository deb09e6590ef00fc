"""Federated, privacy-preserving cross-domain sequential recommendation toolkit.

Two-stage pipeline: (1) clients encrypt item text embeddings (Gaussian
perturbation + nearest-neighbor replacement) and a server clusters the pooled
uploads with k-means++, returning centroid-synchronized embeddings; (2) a
frozen self-attentive sequence model is aligned with the synchronized text
modality by fact-counter distillation, and the result is projected into a
small decoder LM's soft-prompt space for next-item prediction.
"""

__version__ = "0.1.0"
