"""Bridge between pretrained transformers and the edgeslm evaluation harness.

Reads prepared-record files (``#edgeslm-prep v1``), fine-tunes a
sequence-classification model, and writes prediction files
(``#edgeslm-pred v1``) for the harness to score. No metrics are computed
here; scoring lives in the primary package.
"""

__version__ = "0.1.0"
