"""ctxkit: contextuality as a resource, scenarios through monotones"""

from src import logging_config  # noqa: F401  registers Logger.trace
